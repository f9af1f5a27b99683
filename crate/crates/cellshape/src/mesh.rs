//! Multi-material triangle meshes on the unit square.
//!
//! A [`Mesh`] carries vertex coordinates, counterclockwise triangles with a
//! per-triangle subdomain id (0 is the bulk material, nonzero ids are cell
//! inclusions), marked outer-boundary edges, and the derived interface edges
//! separating bulk from cells. Connectivity and markers are fixed at
//! construction; deformation moves vertex coordinates only, so marker and
//! interface queries never depend on the current geometry.

mod generate;
mod io;
mod refine;

pub use generate::generate_composite_domain;
pub use io::{read_cellmesh, write_cellmesh, write_vtk};
pub use refine::{refine_uniform, MeshHierarchy, VertexParent};

use crate::{Error, Result};
use std::collections::BTreeMap;

/// Marker for an outer-boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMarker {
    Top,
    Bottom,
    Side,
}

impl BoundaryMarker {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMarker::Top => "TOP",
            BoundaryMarker::Bottom => "BOTTOM",
            BoundaryMarker::Side => "SIDE",
        }
    }
}

/// Outer-boundary edge between vertices `a` and `b`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub marker: BoundaryMarker,
}

/// Edge of the bulk/cell interface, directed so that `a -> b` runs
/// counterclockwise around the cell; the outward cell normal is the
/// right-hand normal of that direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfaceEdge {
    pub a: usize,
    pub b: usize,
    pub cell_triangle: usize,
    pub outer_triangle: usize,
}

/// Per-element mesh quality: circumradius over inradius (2 is equilateral).
#[derive(Debug, Clone)]
pub struct QualityReport {
    pub per_element: Vec<f64>,
    pub max: f64,
    pub median: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    subdomain_ids: Vec<u32>,
    boundary_edges: Vec<BoundaryEdge>,
    interface_edges: Vec<InterfaceEdge>,
    /// Per-vertex OR of incident boundary-edge markers (bits: 1 top, 2 bottom, 4 side).
    vertex_marks: Vec<u8>,
    /// Signed areas below this count as inverted; frozen at construction.
    area_floor: f64,
}

pub const MARK_TOP: u8 = 1;
pub const MARK_BOTTOM: u8 = 2;
pub const MARK_SIDE: u8 = 4;

impl Mesh {
    /// Validate and build a mesh. Checks orientation, the boundary-marker
    /// cover, the separation of cell inclusions, and derives interface edges.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        subdomain_ids: Vec<u32>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        let nt = triangles.len();
        if subdomain_ids.len() != nt {
            return Err(Error::InvalidMesh(format!(
                "{} triangles but {} subdomain ids",
                nt,
                subdomain_ids.len()
            )));
        }
        for (i, p) in vertices.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references vertex {v} out of {nv}"
                    )));
                }
            }
        }

        // Positive orientation, with the inversion floor taken from the
        // median area of this (initial) geometry.
        let areas: Vec<f64> = triangles
            .iter()
            .map(|tri| signed_area(&vertices, tri))
            .collect();
        let mut sorted = areas.clone();
        sorted.sort_by(|x, y| x.total_cmp(y));
        let median_area = if sorted.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        } else {
            median_of_sorted(&sorted)
        };
        let area_floor = 1e-14 * median_area.abs();
        for (t, &a) in areas.iter().enumerate() {
            if a <= area_floor {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive area {a:.3e}"
                )));
            }
        }

        // Edge incidence map.
        let mut edge_tris: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                edge_tris.entry(key).or_default().push(t);
            }
        }
        for (&(a, b), tris) in &edge_tris {
            if tris.len() > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a},{b}) shared by {} triangles",
                    tris.len()
                )));
            }
        }

        // Marked boundary must equal the topological boundary.
        let mut marked: BTreeMap<(usize, usize), BoundaryMarker> = BTreeMap::new();
        for e in &boundary_edges {
            let key = (e.a.min(e.b), e.a.max(e.b));
            if marked.insert(key, e.marker).is_some() {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge ({},{}) marked twice",
                    e.a, e.b
                )));
            }
        }
        for (&key, tris) in &edge_tris {
            let on_boundary = tris.len() == 1;
            if on_boundary != marked.contains_key(&key) {
                return Err(Error::InvalidMesh(format!(
                    "edge ({},{}) boundary marking does not match topology",
                    key.0, key.1
                )));
            }
        }

        // Interface edges: bulk on one side, a cell on the other. Distinct
        // nonzero subdomains must never share an edge.
        let mut interface_edges = Vec::new();
        for (&(a, b), tris) in &edge_tris {
            if tris.len() != 2 {
                continue;
            }
            let (s0, s1) = (subdomain_ids[tris[0]], subdomain_ids[tris[1]]);
            if s0 != 0 && s1 != 0 && s0 != s1 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a},{b}) joins distinct cells {s0} and {s1}"
                )));
            }
            if (s0 == 0) != (s1 == 0) {
                let (cell_triangle, outer_triangle) = if s0 != 0 {
                    (tris[0], tris[1])
                } else {
                    (tris[1], tris[0])
                };
                // Orient along the cell triangle's counterclockwise cycle.
                let tri = &triangles[cell_triangle];
                let (ea, eb) = directed_in(tri, a, b).ok_or_else(|| {
                    Error::InvalidMesh(format!("edge ({a},{b}) missing in triangle"))
                })?;
                interface_edges.push(InterfaceEdge {
                    a: ea,
                    b: eb,
                    cell_triangle,
                    outer_triangle,
                });
            }
        }

        // Cells must be vertex-disjoint: group nonzero triangles into
        // edge-connected components and check that no vertex is shared by two
        // components (cells may only be separated by bulk material).
        check_cell_separation(nv, &triangles, &subdomain_ids, &edge_tris)?;

        // Per-vertex boundary marks.
        let mut vertex_marks = vec![0u8; nv];
        for e in &boundary_edges {
            let bit = match e.marker {
                BoundaryMarker::Top => MARK_TOP,
                BoundaryMarker::Bottom => MARK_BOTTOM,
                BoundaryMarker::Side => MARK_SIDE,
            };
            vertex_marks[e.a] |= bit;
            vertex_marks[e.b] |= bit;
        }

        Ok(Mesh {
            vertices,
            triangles,
            subdomain_ids,
            boundary_edges,
            interface_edges,
            vertex_marks,
            area_floor,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn subdomain_ids(&self) -> &[u32] {
        &self.subdomain_ids
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn interface_edges(&self) -> &[InterfaceEdge] {
        &self.interface_edges
    }

    pub fn vertex_marks(&self) -> &[u8] {
        &self.vertex_marks
    }

    pub fn is_top_vertex(&self, v: usize) -> bool {
        self.vertex_marks[v] & MARK_TOP != 0
    }

    pub fn is_bottom_vertex(&self, v: usize) -> bool {
        self.vertex_marks[v] & MARK_BOTTOM != 0
    }

    pub fn is_side_vertex(&self, v: usize) -> bool {
        self.vertex_marks[v] & MARK_SIDE != 0
    }

    pub fn area_floor(&self) -> f64 {
        self.area_floor
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    /// Area and P1 shape-function gradients of triangle `t`.
    /// `grads[i]` is the gradient of the hat function of local vertex `i`.
    pub fn p1_gradients(&self, t: usize) -> ([[f64; 2]; 3], f64) {
        let [i, j, k] = self.triangles[t];
        let p = [self.vertices[i], self.vertices[j], self.vertices[k]];
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let inv = 1.0 / (2.0 * area);
        let grads = [
            [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
            [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
            [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
        ];
        (grads, area)
    }

    /// Current length of an edge given by vertex indices.
    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    /// Unit outward normal of an interface edge (pointing out of the cell),
    /// computed from current vertex positions.
    pub fn interface_normal(&self, e: &InterfaceEdge) -> [f64; 2] {
        let pa = self.vertices[e.a];
        let pb = self.vertices[e.b];
        let dx = pb[0] - pa[0];
        let dy = pb[1] - pa[1];
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    }

    /// Move every vertex by `t * v`, keeping connectivity and markers.
    /// Fails with [`Error::ElementInversion`] if any triangle's signed area
    /// drops to the inversion floor.
    pub fn deform(&self, v: &[[f64; 2]], t: f64) -> Result<Mesh> {
        assert_eq!(v.len(), self.vertices.len());
        let vertices: Vec<[f64; 2]> = self
            .vertices
            .iter()
            .zip(v)
            .map(|(p, d)| [p[0] + t * d[0], p[1] + t * d[1]])
            .collect();
        for (e, tri) in self.triangles.iter().enumerate() {
            let area = signed_area(&vertices, tri);
            if area <= self.area_floor {
                return Err(Error::ElementInversion { element: e, area });
            }
        }
        Ok(Mesh {
            vertices,
            ..self.clone()
        })
    }

    /// Replace vertex positions without an inversion check. Used when
    /// injecting deformed fine-level coordinates into coarser hierarchy
    /// levels, where a degraded coarse element only affects preconditioning.
    pub(crate) fn with_positions_unchecked(&self, vertices: Vec<[f64; 2]>) -> Mesh {
        assert_eq!(vertices.len(), self.vertices.len());
        Mesh {
            vertices,
            ..self.clone()
        }
    }

    /// Total area per subdomain id.
    pub fn subdomain_areas(&self) -> BTreeMap<u32, f64> {
        let mut areas = BTreeMap::new();
        for t in 0..self.num_triangles() {
            *areas.entry(self.subdomain_ids[t]).or_insert(0.0) += self.signed_area(t);
        }
        areas
    }

    /// Smallest triangle altitude in the mesh (a safe bound on deformation
    /// magnitudes that cannot invert elements).
    pub fn min_element_height(&self) -> f64 {
        let mut min_h = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let [i, j, k] = self.triangles[t];
            let area = self.signed_area(t);
            let longest = self
                .edge_length(i, j)
                .max(self.edge_length(j, k))
                .max(self.edge_length(k, i));
            min_h = min_h.min(2.0 * area / longest);
        }
        min_h
    }
}

/// Circumradius-to-inradius ratio per element, with max and median.
pub fn mesh_quality(mesh: &Mesh) -> Result<QualityReport> {
    let per_element = crate::parallel::map_collect(mesh.num_triangles(), |t| {
        let [i, j, k] = mesh.triangles[t];
        let a = mesh.edge_length(j, k);
        let b = mesh.edge_length(k, i);
        let c = mesh.edge_length(i, j);
        let area = mesh.signed_area(t);
        if area <= 0.0 || a == 0.0 || b == 0.0 || c == 0.0 {
            f64::NAN
        } else {
            // R = abc / (4A), r = 2A / (a+b+c)
            a * b * c * (a + b + c) / (8.0 * area * area)
        }
    });
    if let Some(t) = per_element.iter().position(|q| !q.is_finite()) {
        return Err(Error::DegenerateElement { element: t });
    }
    let mut sorted = per_element.clone();
    sorted.sort_by(|x, y| x.total_cmp(y));
    let max = *sorted.last().expect("non-empty mesh");
    let median = median_of_sorted(&sorted);
    Ok(QualityReport {
        per_element,
        max,
        median,
    })
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let p0 = vertices[tri[0]];
    let p1 = vertices[tri[1]];
    let p2 = vertices[tri[2]];
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Find (a, b) as a directed edge of `tri`'s counterclockwise cycle.
fn directed_in(tri: &[usize; 3], a: usize, b: usize) -> Option<(usize, usize)> {
    for k in 0..3 {
        let u = tri[k];
        let v = tri[(k + 1) % 3];
        if (u, v) == (a, b) || (u, v) == (b, a) {
            return Some((u, v));
        }
    }
    None
}

fn check_cell_separation(
    nv: usize,
    triangles: &[[usize; 3]],
    subdomain_ids: &[u32],
    edge_tris: &BTreeMap<(usize, usize), Vec<usize>>,
) -> Result<()> {
    let nt = triangles.len();
    // Union-find over nonzero triangles joined by shared edges.
    let mut parent: Vec<usize> = (0..nt).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for tris in edge_tris.values() {
        if tris.len() == 2 && subdomain_ids[tris[0]] != 0 && subdomain_ids[tris[1]] != 0 {
            let a = find(&mut parent, tris[0]);
            let b = find(&mut parent, tris[1]);
            parent[a] = b;
        }
    }
    // Each vertex may belong to at most one cell component.
    let mut vertex_cell: Vec<Option<usize>> = vec![None; nv];
    for t in 0..nt {
        if subdomain_ids[t] == 0 {
            continue;
        }
        let root = find(&mut parent, t);
        for &v in &triangles[t] {
            match vertex_cell[v] {
                None => vertex_cell[v] = Some(root),
                Some(r) if r == root => {}
                Some(_) => {
                    return Err(Error::InvalidMesh(format!(
                        "vertex {v} is shared by two distinct cell inclusions"
                    )))
                }
            }
        }
    }
    // A component must carry a single subdomain id.
    let mut component_id: BTreeMap<usize, u32> = BTreeMap::new();
    for t in 0..nt {
        if subdomain_ids[t] == 0 {
            continue;
        }
        let root = find(&mut parent, t);
        let id = subdomain_ids[t];
        if *component_id.entry(root).or_insert(id) != id {
            return Err(Error::InvalidMesh(
                "cell component mixes subdomain ids".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![0],
            vec![
                BoundaryEdge {
                    a: 0,
                    b: 1,
                    marker: BoundaryMarker::Bottom,
                },
                BoundaryEdge {
                    a: 1,
                    b: 2,
                    marker: BoundaryMarker::Side,
                },
                BoundaryEdge {
                    a: 2,
                    b: 0,
                    marker: BoundaryMarker::Side,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_inverted_triangle() {
        let r = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            vec![0],
            vec![],
        );
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn rejects_wrong_boundary_markers() {
        let r = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![0],
            vec![BoundaryEdge {
                a: 0,
                b: 1,
                marker: BoundaryMarker::Bottom,
            }],
        );
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn deform_identity_and_inverse() {
        let mesh = unit_triangle();
        let zero = vec![[0.0, 0.0]; 3];
        let same = mesh.deform(&zero, 1.0).unwrap();
        assert_eq!(same.vertices(), mesh.vertices());

        let v = vec![[0.1, 0.05], [-0.02, 0.04], [0.0, -0.03]];
        let fwd = mesh.deform(&v, 0.5).unwrap();
        let back = fwd.deform(&v, -0.5).unwrap();
        for (p, q) in mesh.vertices().iter().zip(back.vertices()) {
            assert!((p[0] - q[0]).abs() < 1e-15);
            assert!((p[1] - q[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn deform_keeps_connectivity_and_interfaces() {
        let hier = crate::mesh::generate_composite_domain(2, 2, 0.3, 1).unwrap();
        let mesh = hier.finest();
        let v: Vec<[f64; 2]> = mesh
            .vertices()
            .iter()
            .map(|p| [1e-3 * (9.0 * p[1]).sin(), 1e-3 * (7.0 * p[0]).cos()])
            .collect();
        let moved = mesh.deform(&v, 1.0).unwrap();
        assert_eq!(moved.interface_edges(), mesh.interface_edges());
        assert_eq!(moved.triangles(), mesh.triangles());
        assert_eq!(moved.vertex_marks(), mesh.vertex_marks());
    }

    #[test]
    fn deform_reports_inverting_element() {
        // Moving (0,0) to (0.6,0.6) flips the orientation of the unit triangle:
        // signed area becomes 0.5*((1-0.6)(1-0.6)-(0-0.6)(0-0.6)) = -0.1.
        let mesh = unit_triangle();
        let v = vec![[0.6, 0.6], [0.0, 0.0], [0.0, 0.0]];
        match mesh.deform(&v, 1.0) {
            Err(Error::ElementInversion { element, area }) => {
                assert_eq!(element, 0);
                assert!((area - (-0.1)).abs() < 1e-12);
            }
            other => panic!("expected inversion, got {other:?}"),
        }
    }

    #[test]
    fn quality_of_reference_triangles() {
        // Right isosceles: R = sqrt(2)/2, r = (2 - sqrt(2))/2, ratio = 1 + sqrt(2).
        let mesh = unit_triangle();
        let q = mesh_quality(&mesh).unwrap();
        assert!((q.per_element[0] - (1.0 + 2.0f64.sqrt())).abs() < 1e-12);

        let eq = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3.0f64.sqrt() / 2.0]],
            vec![[0, 1, 2]],
            vec![0],
            vec![
                BoundaryEdge {
                    a: 0,
                    b: 1,
                    marker: BoundaryMarker::Bottom,
                },
                BoundaryEdge {
                    a: 1,
                    b: 2,
                    marker: BoundaryMarker::Side,
                },
                BoundaryEdge {
                    a: 2,
                    b: 0,
                    marker: BoundaryMarker::Side,
                },
            ],
        )
        .unwrap();
        let q = mesh_quality(&eq).unwrap();
        assert!((q.per_element[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quality_invariant_under_rigid_motion_and_scaling() {
        let mesh = unit_triangle();
        let q0 = mesh_quality(&mesh).unwrap();
        let (sin, cos) = 0.7f64.sin_cos();
        let moved: Vec<[f64; 2]> = mesh
            .vertices()
            .iter()
            .map(|p| {
                let x = 3.0 * (cos * p[0] - sin * p[1]) + 5.0;
                let y = 3.0 * (sin * p[0] + cos * p[1]) - 2.0;
                [x, y]
            })
            .collect();
        let moved_mesh = mesh.with_positions_unchecked(moved);
        let q1 = mesh_quality(&moved_mesh).unwrap();
        assert!((q0.per_element[0] - q1.per_element[0]).abs() < 1e-12);
    }
}
