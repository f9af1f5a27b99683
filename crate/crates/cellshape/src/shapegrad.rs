//! Nodal assembly of the shape derivative of the composite objective.
//!
//! Every operation returns the dual coefficients of a derivative functional
//! paired against the vector-valued nodal basis: entry `i` belongs to the hat
//! field at vertex `i`. The compliance term uses the volumetric tensor form
//! `(1/2 (sigma:grad u) I - (grad u)^T sigma) : grad v` with the true
//! per-element materials; under piecewise-affine mesh motion it pairs as
//! exactly minus the derivative of the discrete compliance, and the volume
//! form likewise pairs as minus the bulk-area derivative, while the
//! perimeter form pairs as plus the length derivative. The finite-difference
//! tests pin these signs.
//!
//! [`combine_and_reset`] merges the parts into the dual vector handed to the
//! descent solve, arranging signs so that the resulting metric representative
//! is a direction of objective decrease (the convention is pinned by the
//! finite-difference suite), and zeroes every entry whose nodal support does
//! not touch the interface: away from the material interfaces the continuous
//! derivative vanishes, and the leftover discrete mesh sensitivities must not
//! move vertices.

use crate::fem::{displacement_gradient, MaterialTable, NodalField, ObjectiveWeights};
use crate::mesh::Mesh;
use crate::parallel;
use crate::Result;

/// Dual coefficients of a shape-derivative functional on mesh vertices.
#[derive(Debug, Clone)]
pub struct ShapeGradient {
    values: Vec<[f64; 2]>,
    /// True where the nodal support touches the interface; entries at
    /// `false` vertices are exactly zero after [`combine_and_reset`].
    active_mask: Vec<bool>,
}

impl ShapeGradient {
    /// Wrap raw dual coefficients with an all-active mask (no reset applied).
    pub fn from_values(values: Vec<[f64; 2]>) -> ShapeGradient {
        let n = values.len();
        ShapeGradient {
            values,
            active_mask: vec![true; n],
        }
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active_mask
    }

    pub fn num_active_vertices(&self) -> usize {
        self.active_mask.iter().filter(|&&a| a).count()
    }

    /// Duality pairing with a nodal direction field.
    pub fn pair(&self, v: &NodalField) -> f64 {
        assert_eq!(v.len(), self.values.len());
        self.values
            .iter()
            .zip(v.values())
            .map(|(g, d)| g[0] * d[0] + g[1] * d[1])
            .sum()
    }

    /// Interleaved dof vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(2 * self.values.len());
        for v in &self.values {
            flat.push(v[0]);
            flat.push(v[1]);
        }
        flat
    }
}

/// Compliance term: per element, with constant stress `sigma` and
/// displacement gradient `H`, pair the tensor
/// `1/2 (sigma : H) I - H^T sigma` against the basis gradients.
pub fn assemble_elastic_shape_derivative(
    mesh: &Mesh,
    materials: &MaterialTable,
    u: &NodalField,
) -> Result<ShapeGradient> {
    let nt = mesh.num_triangles();
    let mut lames = Vec::with_capacity(nt);
    for t in 0..nt {
        lames.push(materials.get(mesh.subdomain_ids()[t])?);
    }
    let per_element = parallel::map_collect(nt, |t| {
        let (grads, area) = mesh.p1_gradients(t);
        let h = displacement_gradient(mesh, u, t);
        let lame = lames[t];
        let tr = h[0][0] + h[1][1];
        let sigma = [
            [
                lame.lambda * tr + 2.0 * lame.mu * h[0][0],
                lame.mu * (h[0][1] + h[1][0]),
            ],
            [
                lame.mu * (h[0][1] + h[1][0]),
                lame.lambda * tr + 2.0 * lame.mu * h[1][1],
            ],
        ];
        let energy = sigma[0][0] * h[0][0]
            + sigma[0][1] * h[0][1]
            + sigma[1][0] * h[1][0]
            + sigma[1][1] * h[1][1];
        // M = 1/2 (sigma:H) I - H^T sigma
        let mut m = [[0.0f64; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                let ht_sigma = h[0][r] * sigma[0][c] + h[1][r] * sigma[1][c];
                m[r][c] = if r == c { 0.5 * energy } else { 0.0 } - ht_sigma;
            }
        }
        let mut entries = [[0.0f64; 2]; 3];
        for i in 0..3 {
            for r in 0..2 {
                entries[i][r] = area * (m[r][0] * grads[i][0] + m[r][1] * grads[i][1]);
            }
        }
        entries
    });
    Ok(ShapeGradient::from_values(scatter(mesh, &per_element)))
}

/// Bulk-volume term in its volumetric form: minus the divergence of the
/// basis field integrated over subdomain 0.
pub fn assemble_volume_shape_derivative(mesh: &Mesh) -> ShapeGradient {
    let per_element = parallel::map_collect(mesh.num_triangles(), |t| {
        let mut entries = [[0.0f64; 2]; 3];
        if mesh.subdomain_ids()[t] == 0 {
            let (grads, area) = mesh.p1_gradients(t);
            for i in 0..3 {
                entries[i] = [-area * grads[i][0], -area * grads[i][1]];
            }
        }
        entries
    });
    ShapeGradient::from_values(scatter(mesh, &per_element))
}

/// Surface form of the bulk-volume term: basis fields paired with the cell
/// outward normal along the interface. Agrees with the volumetric form for
/// directions vanishing on the outer boundary; kept as an independent route
/// for cross-checking.
pub fn volume_shape_derivative_surface_form(mesh: &Mesh) -> ShapeGradient {
    let mut values = vec![[0.0f64; 2]; mesh.num_vertices()];
    for e in mesh.interface_edges() {
        let len = mesh.edge_length(e.a, e.b);
        let n = mesh.interface_normal(e);
        for &v in &[e.a, e.b] {
            values[v][0] += 0.5 * len * n[0];
            values[v][1] += 0.5 * len * n[1];
        }
    }
    ShapeGradient::from_values(values)
}

/// Interface-perimeter term: tangential divergence along each interface
/// edge, exact for P1 traces. For edge (a, b) with unit tangent `tau` the
/// length derivative in direction v is `tau . (v_b - v_a)`.
pub fn assemble_perimeter_shape_derivative(mesh: &Mesh) -> ShapeGradient {
    let mut values = vec![[0.0f64; 2]; mesh.num_vertices()];
    for e in mesh.interface_edges() {
        let pa = mesh.vertices()[e.a];
        let pb = mesh.vertices()[e.b];
        let len = mesh.edge_length(e.a, e.b);
        let tau = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
        values[e.b][0] += tau[0];
        values[e.b][1] += tau[1];
        values[e.a][0] -= tau[0];
        values[e.a][1] -= tau[1];
    }
    ShapeGradient::from_values(values)
}

/// Vertices whose nodal support touches the interface: a vertex is active
/// iff one of its incident triangles contains an interface vertex.
pub fn interface_support_mask(mesh: &Mesh) -> Vec<bool> {
    let nv = mesh.num_vertices();
    let mut on_interface = vec![false; nv];
    for e in mesh.interface_edges() {
        on_interface[e.a] = true;
        on_interface[e.b] = true;
    }
    let mut active = vec![false; nv];
    for tri in mesh.triangles() {
        if tri.iter().any(|&v| on_interface[v]) {
            for &v in tri {
                active[v] = true;
            }
        }
    }
    active
}

/// Zero every entry whose nodal support does not touch the interface and
/// record the mask. Idempotent.
pub fn reset_interface_support(mesh: &Mesh, gradient: &ShapeGradient) -> ShapeGradient {
    let active_mask = interface_support_mask(mesh);
    let values = gradient
        .values
        .iter()
        .zip(&active_mask)
        .map(|(v, &a)| if a { *v } else { [0.0, 0.0] })
        .collect();
    ShapeGradient {
        values,
        active_mask,
    }
}

/// Weighted combination of the three parts followed by the interface-support
/// reset. The result is the dual vector of the descent problem: pairing it
/// with the returned descent direction is positive, and moving the mesh along
/// that direction decreases the weighted objective.
pub fn combine_and_reset(
    mesh: &Mesh,
    elastic: &ShapeGradient,
    volume: &ShapeGradient,
    perimeter: &ShapeGradient,
    weights: ObjectiveWeights,
) -> ShapeGradient {
    let nv = mesh.num_vertices();
    assert_eq!(elastic.values.len(), nv);
    assert_eq!(volume.values.len(), nv);
    assert_eq!(perimeter.values.len(), nv);
    let mut values = vec![[0.0f64; 2]; nv];
    for v in 0..nv {
        for c in 0..2 {
            // Signs pinned by the finite-difference suite: the assembled
            // compliance and volume forms already pair as minus the objective
            // derivative, the perimeter form pairs as plus; negating the
            // perimeter part makes the sum the (negative-gradient) descent
            // functional for every weight choice.
            values[v][c] = weights.elast * elastic.values[v][c] + weights.vol * volume.values[v][c]
                - weights.peri * perimeter.values[v][c];
        }
    }
    reset_interface_support(mesh, &ShapeGradient::from_values(values))
}

fn scatter(mesh: &Mesh, per_element: &[[[f64; 2]; 3]]) -> Vec<[f64; 2]> {
    let mut values = vec![[0.0f64; 2]; mesh.num_vertices()];
    for (t, entries) in per_element.iter().enumerate() {
        let tri = mesh.triangles()[t];
        for i in 0..3 {
            values[tri[i]][0] += entries[i][0];
            values[tri[i]][1] += entries[i][1];
        }
    }
    values
}
