//! Mesh file formats: the line-oriented `cellmesh` text format and VTK
//! legacy ASCII export for visualization.

use super::{BoundaryEdge, BoundaryMarker, Mesh};
use crate::{Error, Result};
use std::io::{BufRead, Write};

/// Write the `cellmesh 1` text format. Coordinates are printed with 17
/// significant digits so a parse round-trip reproduces them exactly.
pub fn write_cellmesh<W: Write>(mesh: &Mesh, out: &mut W) -> Result<()> {
    writeln!(out, "cellmesh 1")?;
    writeln!(out, "# {} vertices", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(out, "vertex {:.16e} {:.16e}", p[0], p[1])?;
    }
    writeln!(out, "# {} triangles", mesh.num_triangles())?;
    for (tri, id) in mesh.triangles().iter().zip(mesh.subdomain_ids()) {
        writeln!(out, "triangle {} {} {} {}", tri[0], tri[1], tri[2], id)?;
    }
    writeln!(out, "# {} boundary edges", mesh.boundary_edges().len())?;
    for e in mesh.boundary_edges() {
        writeln!(out, "bedge {} {} {}", e.a, e.b, e.marker.as_str())?;
    }
    Ok(())
}

/// Parse the `cellmesh 1` format and validate the mesh.
pub fn read_cellmesh<R: BufRead>(input: R) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut subdomains = Vec::new();
    let mut boundary_edges = Vec::new();
    let mut saw_header = false;

    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let content = match line.split('#').next() {
            Some(c) => c.trim(),
            None => "",
        };
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let kind = tokens.next().expect("non-empty");
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if !saw_header {
            if kind != "cellmesh" || tokens.next() != Some("1") {
                return Err(parse_err("expected header 'cellmesh 1'".into()));
            }
            saw_header = true;
            continue;
        }
        match kind {
            "vertex" => {
                let x = next_f64(&mut tokens, line_no)?;
                let y = next_f64(&mut tokens, line_no)?;
                vertices.push([x, y]);
            }
            "triangle" => {
                let i = next_usize(&mut tokens, line_no)?;
                let j = next_usize(&mut tokens, line_no)?;
                let k = next_usize(&mut tokens, line_no)?;
                let id = next_usize(&mut tokens, line_no)? as u32;
                triangles.push([i, j, k]);
                subdomains.push(id);
            }
            "bedge" => {
                let a = next_usize(&mut tokens, line_no)?;
                let b = next_usize(&mut tokens, line_no)?;
                let marker = match tokens.next() {
                    Some("TOP") => BoundaryMarker::Top,
                    Some("BOTTOM") => BoundaryMarker::Bottom,
                    Some("SIDE") => BoundaryMarker::Side,
                    other => return Err(parse_err(format!("unknown boundary marker {other:?}"))),
                };
                boundary_edges.push(BoundaryEdge { a, b, marker });
            }
            other => return Err(parse_err(format!("unknown record '{other}'"))),
        }
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 0,
            message: "empty cellmesh file".into(),
        });
    }
    Mesh::new(vertices, triangles, subdomains, boundary_edges)
}

fn next_f64<'a, I: Iterator<Item = &'a str>>(tokens: &mut I, line: usize) -> Result<f64> {
    let tok = tokens.next().ok_or(Error::Parse {
        line,
        message: "missing number".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad float '{tok}'"),
    })
}

fn next_usize<'a, I: Iterator<Item = &'a str>>(tokens: &mut I, line: usize) -> Result<usize> {
    let tok = tokens.next().ok_or(Error::Parse {
        line,
        message: "missing index".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad index '{tok}'"),
    })
}

/// VTK legacy ASCII export: triangles as cell type 5, subdomain ids as cell
/// data, and optional per-vertex vector fields as point data.
pub fn write_vtk<W: Write>(
    mesh: &Mesh,
    point_vectors: &[(&str, &[[f64; 2]])],
    out: &mut W,
) -> Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "cellshape mesh")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(out, "{:.9e} {:.9e} 0.0", p[0], p[1])?;
    }
    let nt = mesh.num_triangles();
    writeln!(out, "CELLS {} {}", nt, 4 * nt)?;
    for tri in mesh.triangles() {
        writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    writeln!(out, "CELL_DATA {nt}")?;
    writeln!(out, "SCALARS subdomain_id int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for id in mesh.subdomain_ids() {
        writeln!(out, "{id}")?;
    }
    if !point_vectors.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
        for (name, values) in point_vectors {
            assert_eq!(values.len(), mesh.num_vertices());
            writeln!(out, "VECTORS {name} double")?;
            for v in values.iter() {
                writeln!(out, "{:.9e} {:.9e} 0.0", v[0], v[1])?;
            }
        }
    }
    Ok(())
}
