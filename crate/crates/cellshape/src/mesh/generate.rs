//! Synthetic composite-domain generator.
//!
//! Builds the unit square with a `rows x cols` lattice of octagonal cell
//! inclusions. Cells in the same lattice row share a subdomain id (row 0 at
//! the top gets id 1), so a material table can grade stiffness from top to
//! bottom. Each lattice tile is meshed as an 8-triangle fan inside the
//! octagon plus a 16-triangle bulk ring out to the tile boundary, which makes
//! neighboring tiles conform along shared corner/midpoint vertices.

use super::{BoundaryEdge, BoundaryMarker, Mesh, MeshHierarchy};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Generate the composite domain and refine it `refinements` times.
///
/// `cell_radius_fraction` scales the octagon circumradius relative to the
/// smaller lattice pitch and must stay below 0.5 so that inclusions neither
/// overlap nor touch the outer boundary.
pub fn generate_composite_domain(
    rows: usize,
    cols: usize,
    cell_radius_fraction: f64,
    refinements: usize,
) -> Result<MeshHierarchy> {
    if rows < 1 || cols < 1 {
        return Err(Error::Geometry(format!(
            "lattice must be at least 1x1, got {rows}x{cols}"
        )));
    }
    if !(cell_radius_fraction > 0.0 && cell_radius_fraction < 0.5) {
        return Err(Error::Geometry(format!(
            "cell_radius_fraction {cell_radius_fraction} outside (0, 0.5): \
             inclusions would overlap or touch the boundary"
        )));
    }
    let tile_w = 1.0 / cols as f64;
    let tile_h = 1.0 / rows as f64;
    let radius = cell_radius_fraction * tile_w.min(tile_h);
    // The ring construction needs each octagon vertex to fall angularly
    // between the neighboring tile-boundary points; very elongated tiles
    // break that ordering.
    let corner_angle = (tile_h / tile_w).atan();
    if !(corner_angle > PI / 8.0 && corner_angle < 3.0 * PI / 8.0) {
        return Err(Error::Geometry(format!(
            "tile aspect ratio {}:{} too elongated for the octagon ring",
            tile_w, tile_h
        )));
    }

    let corner = |r: usize, c: usize| r * (cols + 1) + c;
    let n_corners = (rows + 1) * (cols + 1);
    let hmid = |r: usize, c: usize| n_corners + r * cols + c;
    let n_hmid = (rows + 1) * cols;
    let vmid = |r: usize, c: usize| n_corners + n_hmid + r * (cols + 1) + c;
    let n_vmid = rows * (cols + 1);
    let tile_base = |r: usize, c: usize| n_corners + n_hmid + n_vmid + (r * cols + c) * 9;

    let mut vertices = vec![[0.0f64; 2]; n_corners + n_hmid + n_vmid + rows * cols * 9];
    // Row index increases downward: row 0 sits at the top of the square.
    for r in 0..=rows {
        let y = 1.0 - r as f64 * tile_h;
        for c in 0..=cols {
            vertices[corner(r, c)] = [c as f64 * tile_w, y];
        }
    }
    for r in 0..=rows {
        let y = 1.0 - r as f64 * tile_h;
        for c in 0..cols {
            vertices[hmid(r, c)] = [(c as f64 + 0.5) * tile_w, y];
        }
    }
    for r in 0..rows {
        let y = 1.0 - (r as f64 + 0.5) * tile_h;
        for c in 0..=cols {
            vertices[vmid(r, c)] = [c as f64 * tile_w, y];
        }
    }

    let mut triangles = Vec::with_capacity(rows * cols * 24);
    let mut subdomains = Vec::with_capacity(rows * cols * 24);
    let mut boundary_edges = Vec::new();

    for r in 0..rows {
        for c in 0..cols {
            let center = [(c as f64 + 0.5) * tile_w, 1.0 - (r as f64 + 0.5) * tile_h];
            let base = tile_base(r, c);
            vertices[base] = center;
            let oct = |k: usize| base + 1 + k;
            for k in 0..8 {
                let theta = PI / 8.0 + k as f64 * PI / 4.0;
                vertices[oct(k)] = [
                    center[0] + radius * theta.cos(),
                    center[1] + radius * theta.sin(),
                ];
            }

            // Tile boundary ring, counterclockwise from the right edge midpoint.
            let ring = [
                vmid(r, c + 1),
                corner(r, c + 1),
                hmid(r, c),
                corner(r, c),
                vmid(r, c),
                corner(r + 1, c),
                hmid(r + 1, c),
                corner(r + 1, c + 1),
            ];

            let cell_id = (r + 1) as u32;
            for k in 0..8 {
                triangles.push([base, oct(k), oct((k + 1) % 8)]);
                subdomains.push(cell_id);
            }
            for k in 0..8 {
                triangles.push([ring[k], ring[(k + 1) % 8], oct(k)]);
                subdomains.push(0);
                triangles.push([ring[k], oct(k), oct((k + 7) % 8)]);
                subdomains.push(0);
            }

            if r == 0 {
                boundary_edges.push(edge(corner(0, c), hmid(0, c), BoundaryMarker::Top));
                boundary_edges.push(edge(hmid(0, c), corner(0, c + 1), BoundaryMarker::Top));
            }
            if r == rows - 1 {
                boundary_edges.push(edge(corner(rows, c), hmid(rows, c), BoundaryMarker::Bottom));
                boundary_edges.push(edge(
                    hmid(rows, c),
                    corner(rows, c + 1),
                    BoundaryMarker::Bottom,
                ));
            }
            if c == 0 {
                boundary_edges.push(edge(corner(r, 0), vmid(r, 0), BoundaryMarker::Side));
                boundary_edges.push(edge(vmid(r, 0), corner(r + 1, 0), BoundaryMarker::Side));
            }
            if c == cols - 1 {
                boundary_edges.push(edge(corner(r, cols), vmid(r, cols), BoundaryMarker::Side));
                boundary_edges.push(edge(
                    vmid(r, cols),
                    corner(r + 1, cols),
                    BoundaryMarker::Side,
                ));
            }
        }
    }

    let coarse = Mesh::new(vertices, triangles, subdomains, boundary_edges)
        .map_err(|e| Error::Geometry(format!("generated mesh invalid: {e}")))?;
    MeshHierarchy::from_coarse(coarse, refinements)
}

fn edge(a: usize, b: usize, marker: BoundaryMarker) -> BoundaryEdge {
    BoundaryEdge { a, b, marker }
}
