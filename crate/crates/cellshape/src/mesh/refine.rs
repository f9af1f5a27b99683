//! Uniform red refinement and the nested mesh hierarchy.

use super::{BoundaryEdge, Mesh};
use crate::Result;
use std::collections::HashMap;

/// Origin of a fine vertex relative to its coarse mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexParent {
    /// Same vertex, same index, on the coarse mesh.
    Inherited(usize),
    /// Midpoint of the coarse edge (a, b); interpolation weights are 1/2, 1/2.
    EdgeMidpoint(usize, usize),
}

/// Split every triangle into four by connecting edge midpoints. Children keep
/// the parent's subdomain id, boundary edges split in two with the marker
/// kept. Coarse vertices keep their indices; midpoints are appended.
pub fn refine_uniform(mesh: &Mesh) -> Result<(Mesh, Vec<VertexParent>)> {
    let nv = mesh.num_vertices();
    let mut vertices: Vec<[f64; 2]> = mesh.vertices().to_vec();
    let mut parents: Vec<VertexParent> = (0..nv).map(VertexParent::Inherited).collect();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();

    let mut midpoint_of = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let pa = vertices[a];
            let pb = vertices[b];
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            parents.push(VertexParent::EdgeMidpoint(key.0, key.1));
            vertices.len() - 1
        })
    };

    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    let mut subdomains = Vec::with_capacity(4 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = *tri;
        let mab = midpoint_of(a, b, &mut vertices);
        let mbc = midpoint_of(b, c, &mut vertices);
        let mca = midpoint_of(c, a, &mut vertices);
        let id = mesh.subdomain_ids()[t];
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
        subdomains.extend_from_slice(&[id; 4]);
    }

    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges().len());
    for e in mesh.boundary_edges() {
        let m = midpoint_of(e.a, e.b, &mut vertices);
        boundary_edges.push(BoundaryEdge {
            a: e.a,
            b: m,
            marker: e.marker,
        });
        boundary_edges.push(BoundaryEdge {
            a: m,
            b: e.b,
            marker: e.marker,
        });
    }

    let fine = Mesh::new(vertices, triangles, subdomains, boundary_edges)?;
    Ok((fine, parents))
}

/// Nested meshes from repeated red refinement, level 0 coarsest. Vertex
/// indices are stable prefixes: vertex `i` of level `l` is vertex `i` of every
/// finer level.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    levels: Vec<Mesh>,
    parent_maps: Vec<Vec<VertexParent>>,
}

impl MeshHierarchy {
    pub fn from_coarse(coarse: Mesh, refinements: usize) -> Result<MeshHierarchy> {
        let mut levels = vec![coarse];
        let mut parent_maps = Vec::new();
        for _ in 0..refinements {
            let (fine, parents) = refine_uniform(levels.last().expect("non-empty"))?;
            levels.push(fine);
            parent_maps.push(parents);
        }
        Ok(MeshHierarchy {
            levels,
            parent_maps,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &Mesh {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[Mesh] {
        &self.levels
    }

    pub fn finest(&self) -> &Mesh {
        self.levels.last().expect("non-empty hierarchy")
    }

    /// Parent map of level `l + 1` vertices relative to level `l`.
    pub fn parent_map(&self, l: usize) -> &[VertexParent] {
        &self.parent_maps[l]
    }

    /// Apply `x -> x + t v` on the finest level (checked for element
    /// inversion there), then inject the moved coordinates into every coarser
    /// level: a coarse vertex takes the position of its fine image.
    pub fn deform_finest(&mut self, v: &[[f64; 2]], t: f64) -> Result<()> {
        let fine = self.finest().deform(v, t)?;
        let fine_positions = fine.vertices().to_vec();
        let last = self.levels.len() - 1;
        for l in 0..last {
            let nvl = self.levels[l].num_vertices();
            let prefix = fine_positions[..nvl].to_vec();
            self.levels[l] = self.levels[l].with_positions_unchecked(prefix);
        }
        self.levels[last] = fine;
        Ok(())
    }
}
