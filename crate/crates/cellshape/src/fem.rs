//! P1 linear elasticity on multi-material triangle meshes.
//!
//! The state problem is plane-strain elasticity with the stress tensor
//! `sigma(u) = lambda tr(grad u) I + mu (grad u + grad u^T)`, piecewise
//! constant Lame parameters per subdomain, a vertical traction on the top
//! boundary, a clamped bottom boundary, and traction-free sides. Strains are
//! constant per element, so all integrals here are evaluated exactly by
//! one-point quadrature.

use crate::linalg::CsrMatrix;
use crate::mesh::Mesh;
use crate::parallel;
use crate::{Error, Result};

/// Isotropic Lame pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameParameters {
    pub lambda: f64,
    pub mu: f64,
}

/// Per-subdomain material assignment, indexed by subdomain id.
#[derive(Debug, Clone)]
pub struct MaterialTable {
    pairs: Vec<Option<LameParameters>>,
    /// Resolves every id when set (uniform tables).
    fallback: Option<LameParameters>,
}

impl MaterialTable {
    pub fn from_pairs(pairs: &[(u32, LameParameters)]) -> Result<MaterialTable> {
        let max_id = pairs.iter().map(|(id, _)| *id).max().unwrap_or(0);
        let mut table = vec![None; max_id as usize + 1];
        for &(id, lame) in pairs {
            if !(lame.mu > 0.0 && lame.lambda + lame.mu > 0.0) {
                return Err(Error::InvalidMaterial {
                    subdomain: id,
                    lambda: lame.lambda,
                    mu: lame.mu,
                });
            }
            table[id as usize] = Some(lame);
        }
        Ok(MaterialTable {
            pairs: table,
            fallback: None,
        })
    }

    /// One material everywhere (any subdomain id resolves to it).
    pub fn uniform(lambda: f64, mu: f64) -> MaterialTable {
        MaterialTable {
            pairs: Vec::new(),
            fallback: Some(LameParameters { lambda, mu }),
        }
    }

    /// Bulk material on subdomain 0 plus `rows` cell materials whose
    /// stiffness interpolates linearly from `top` (row id 1) to `bottom`
    /// (row id `rows`). With a single row the top values are used.
    pub fn layered(
        rows: usize,
        outer: LameParameters,
        top: LameParameters,
        bottom: LameParameters,
    ) -> Result<MaterialTable> {
        let mut pairs = vec![(0u32, outer)];
        for k in 0..rows {
            let s = if rows > 1 {
                k as f64 / (rows - 1) as f64
            } else {
                0.0
            };
            pairs.push((
                (k + 1) as u32,
                LameParameters {
                    lambda: (1.0 - s) * top.lambda + s * bottom.lambda,
                    mu: (1.0 - s) * top.mu + s * bottom.mu,
                },
            ));
        }
        MaterialTable::from_pairs(&pairs)
    }

    pub fn get(&self, subdomain: u32) -> Result<LameParameters> {
        self.pairs
            .get(subdomain as usize)
            .copied()
            .flatten()
            .or(self.fallback)
            .ok_or(Error::MissingMaterial { subdomain })
    }
}

/// Vector-valued nodal coefficients (displacement, descent direction, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<[f64; 2]>,
}

impl NodalField {
    pub fn zeros(num_vertices: usize) -> NodalField {
        NodalField {
            values: vec![[0.0; 2]; num_vertices],
        }
    }

    pub fn from_values(values: Vec<[f64; 2]>) -> NodalField {
        NodalField { values }
    }

    /// Interleaved dof vector [x0, y0, x1, y1, ...].
    pub fn from_flat(flat: &[f64]) -> NodalField {
        assert_eq!(flat.len() % 2, 0);
        NodalField {
            values: flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(2 * self.values.len());
        for v in &self.values {
            flat.push(v[0]);
            flat.push(v[1]);
        }
        flat
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.values
    }

    /// Euclidean pairing with another per-vertex vector table.
    pub fn dot(&self, other: &NodalField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
            .sum()
    }
}

/// Assembled constrained linear system.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// (dof index, prescribed value) pairs already eliminated from the matrix.
    pub constraints: Vec<(usize, f64)>,
}

/// Weights of the composite objective.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveWeights {
    pub elast: f64,
    pub vol: f64,
    pub peri: f64,
}

/// Objective value split into its weighted parts.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveBreakdown {
    pub elast: f64,
    pub vol: f64,
    pub peri: f64,
    pub total: f64,
}

/// Element stiffness of the constant-strain triangle for `sigma(u) : grad w`.
/// Dof order is (v0x, v0y, v1x, v1y, v2x, v2y).
fn element_stiffness(grads: &[[f64; 2]; 3], area: f64, lame: LameParameters) -> [[f64; 6]; 6] {
    let mut k = [[0.0f64; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            let gi = grads[i];
            let gj = grads[j];
            let dot = gi[0] * gj[0] + gi[1] * gj[1];
            for r in 0..2 {
                for s in 0..2 {
                    let mut val = lame.lambda * gj[r] * gi[s] + lame.mu * gi[r] * gj[s];
                    if r == s {
                        val += lame.mu * dot;
                    }
                    k[2 * j + r][2 * i + s] = area * val;
                }
            }
        }
    }
    k
}

/// Assemble the elasticity system: stiffness matrix, traction load on the
/// top boundary (vertical component `traction`), and homogeneous Dirichlet
/// conditions on both components of every bottom vertex.
pub fn assemble_elasticity(
    mesh: &Mesh,
    materials: &MaterialTable,
    traction: f64,
) -> Result<LinearSystem> {
    let mut matrix = assemble_elasticity_matrix(mesh, materials)?;
    let n = 2 * mesh.num_vertices();
    let mut rhs = vec![0.0; n];
    for e in mesh.boundary_edges() {
        if e.marker == crate::mesh::BoundaryMarker::Top {
            let half = 0.5 * mesh.edge_length(e.a, e.b) * traction;
            rhs[2 * e.a + 1] += half;
            rhs[2 * e.b + 1] += half;
        }
    }
    let constraints = bottom_constraints(mesh);
    matrix.apply_dirichlet(&mut rhs, &constraints);
    Ok(LinearSystem {
        matrix,
        rhs,
        constraints,
    })
}

/// Unconstrained stiffness matrix for `sigma(u) : grad w` with per-element
/// materials looked up by subdomain id.
pub fn assemble_elasticity_matrix(mesh: &Mesh, materials: &MaterialTable) -> Result<CsrMatrix> {
    let nt = mesh.num_triangles();
    // Resolve materials up front so the parallel loop is infallible.
    let mut lames = Vec::with_capacity(nt);
    for t in 0..nt {
        lames.push(materials.get(mesh.subdomain_ids()[t])?);
    }
    let local = parallel::map_collect(nt, |t| {
        let (grads, area) = mesh.p1_gradients(t);
        element_stiffness(&grads, area, lames[t])
    });
    let mut triplets = Vec::with_capacity(36 * nt);
    for (t, k) in local.iter().enumerate() {
        let tri = mesh.triangles()[t];
        for a in 0..6 {
            let row = 2 * tri[a / 2] + a % 2;
            for b in 0..6 {
                let col = 2 * tri[b / 2] + b % 2;
                triplets.push((row, col, k[a][b]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(2 * mesh.num_vertices(), triplets))
}

/// Both displacement components clamp to zero on bottom vertices.
pub fn bottom_constraints(mesh: &Mesh) -> Vec<(usize, f64)> {
    let mut constraints = Vec::new();
    for v in 0..mesh.num_vertices() {
        if mesh.is_bottom_vertex(v) {
            constraints.push((2 * v, 0.0));
            constraints.push((2 * v + 1, 0.0));
        }
    }
    constraints
}

/// Per-element displacement gradient (row r is the gradient of component r).
pub fn displacement_gradient(mesh: &Mesh, u: &NodalField, t: usize) -> [[f64; 2]; 2] {
    let (grads, _) = mesh.p1_gradients(t);
    let tri = mesh.triangles()[t];
    let mut h = [[0.0f64; 2]; 2];
    for i in 0..3 {
        let ui = u.values()[tri[i]];
        for r in 0..2 {
            for c in 0..2 {
                h[r][c] += ui[r] * grads[i][c];
            }
        }
    }
    h
}

/// Stored elastic energy `1/2 integral sigma(u) : grad u`.
pub fn compute_compliance(mesh: &Mesh, materials: &MaterialTable, u: &NodalField) -> Result<f64> {
    let nt = mesh.num_triangles();
    let mut lames = Vec::with_capacity(nt);
    for t in 0..nt {
        lames.push(materials.get(mesh.subdomain_ids()[t])?);
    }
    Ok(0.5
        * parallel::sum_indexed(nt, |t| {
            let h = displacement_gradient(mesh, u, t);
            let (_, area) = mesh.p1_gradients(t);
            let lame = lames[t];
            let tr = h[0][0] + h[1][1];
            let frob =
                h[0][0] * h[0][0] + h[0][1] * h[0][1] + h[1][0] * h[1][0] + h[1][1] * h[1][1];
            let cross = h[0][0] * h[0][0] + 2.0 * h[0][1] * h[1][0] + h[1][1] * h[1][1];
            area * (lame.lambda * tr * tr + lame.mu * (frob + cross))
        }))
}

/// Area of the bulk material (subdomain 0).
pub fn compute_volume_objective(mesh: &Mesh) -> f64 {
    parallel::sum_indexed(mesh.num_triangles(), |t| {
        if mesh.subdomain_ids()[t] == 0 {
            mesh.signed_area(t)
        } else {
            0.0
        }
    })
}

/// Total length of the bulk/cell interfaces.
pub fn compute_perimeter_objective(mesh: &Mesh) -> f64 {
    mesh.interface_edges()
        .iter()
        .map(|e| mesh.edge_length(e.a, e.b))
        .sum()
}

/// Weighted objective evaluation at a given state.
pub fn evaluate_objective(
    mesh: &Mesh,
    materials: &MaterialTable,
    u: &NodalField,
    weights: ObjectiveWeights,
) -> Result<ObjectiveBreakdown> {
    let elast = compute_compliance(mesh, materials, u)?;
    let vol = compute_volume_objective(mesh);
    let peri = compute_perimeter_objective(mesh);
    Ok(ObjectiveBreakdown {
        elast,
        vol,
        peri,
        total: weights.elast * elast + weights.vol * vol + weights.peri * peri,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_composite_domain, BoundaryEdge, BoundaryMarker};

    fn reference_triangle() -> Mesh {
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

    /// Two-triangle unit square with bottom edge clamped.
    fn unit_square() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![0, 0],
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
                    b: 3,
                    marker: BoundaryMarker::Top,
                },
                BoundaryEdge {
                    a: 3,
                    b: 0,
                    marker: BoundaryMarker::Side,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn element_matrix_spot_value() {
        // For the reference triangle with lambda = 0, mu = 1 the (v0x, v0x)
        // entry integrates to 3/2.
        let mesh = reference_triangle();
        let mat = MaterialTable::uniform(0.0, 1.0);
        let k = assemble_elasticity_matrix(&mesh, &mat).unwrap();
        let dense = k.to_dense();
        assert!((dense[0][0] - 1.5).abs() < 1e-14);
        // Symmetry of the full element matrix.
        assert!(k.symmetry_defect() < 1e-15);
    }

    #[test]
    fn zero_traction_means_zero_solution() {
        let mesh = unit_square();
        let mat = MaterialTable::uniform(1.0, 0.1);
        let sys = assemble_elasticity(&mesh, &mat, 0.0).unwrap();
        assert!(sys.rhs.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn traction_load_sums_to_total_force() {
        let hier = generate_composite_domain(2, 2, 0.3, 1).unwrap();
        let mesh = hier.finest();
        let mat = MaterialTable::uniform(1.0, 0.1);
        let sys = assemble_elasticity(mesh, &mat, 0.1).unwrap();
        let mut total_y = 0.0;
        for v in 0..mesh.num_vertices() {
            total_y += sys.rhs[2 * v + 1];
        }
        // Top boundary has unit length, so the resultant equals the traction.
        assert!((total_y - 0.1).abs() < 1e-13);
    }

    #[test]
    fn compliance_zero_for_zero_and_rigid_fields() {
        let mesh = unit_square();
        let mat = MaterialTable::uniform(1.0, 0.1);
        let zero = NodalField::zeros(4);
        assert_eq!(compute_compliance(&mesh, &mat, &zero).unwrap(), 0.0);
        let rigid = NodalField::from_values(vec![[0.3, -0.2]; 4]);
        assert!(compute_compliance(&mesh, &mat, &rigid).unwrap().abs() < 1e-15);
    }

    #[test]
    fn compliance_matches_quadratic_form() {
        let mesh = unit_square();
        let mat = MaterialTable::uniform(1.0, 0.1);
        let k = assemble_elasticity_matrix(&mesh, &mat).unwrap();
        let u =
            NodalField::from_values(vec![[0.1, -0.3], [0.07, 0.2], [-0.15, 0.05], [0.02, 0.09]]);
        let flat = u.to_flat();
        let ku = k.mul_vec_alloc(&flat);
        let quad = 0.5 * crate::linalg::dot(&flat, &ku);
        let direct = compute_compliance(&mesh, &mat, &u).unwrap();
        assert!((quad - direct).abs() <= 1e-13 * quad.abs().max(1.0));
    }

    #[test]
    fn missing_material_is_reported() {
        let hier = generate_composite_domain(2, 1, 0.3, 0).unwrap();
        let mat = MaterialTable::from_pairs(&[
            (
                0,
                LameParameters {
                    lambda: 1.0,
                    mu: 0.1,
                },
            ),
            (
                1,
                LameParameters {
                    lambda: 1.2,
                    mu: 0.12,
                },
            ),
        ])
        .unwrap();
        let r = assemble_elasticity(hier.finest(), &mat, 0.1);
        assert!(matches!(r, Err(Error::MissingMaterial { subdomain: 2 })));
        // A single explicit pair is not a wildcard, unlike a uniform table.
        let only_zero = MaterialTable::from_pairs(&[(
            0,
            LameParameters {
                lambda: 1.0,
                mu: 0.1,
            },
        )])
        .unwrap();
        assert!(only_zero.get(1).is_err());
        assert!(MaterialTable::uniform(1.0, 0.1).get(7).is_ok());
    }

    #[test]
    fn layered_table_interpolates_linearly() {
        let outer = LameParameters {
            lambda: 1.0,
            mu: 0.1,
        };
        let top = LameParameters {
            lambda: 1.2,
            mu: 0.12,
        };
        let bottom = LameParameters {
            lambda: 2.0,
            mu: 0.2,
        };
        let table = MaterialTable::layered(8, outer, top, bottom).unwrap();
        assert_eq!(table.get(0).unwrap(), outer);
        assert_eq!(table.get(1).unwrap(), top);
        assert_eq!(table.get(8).unwrap(), bottom);
        let mid = table.get(4).unwrap(); // row k = 3 of 0..=7
        let s = 3.0 / 7.0;
        assert!((mid.lambda - ((1.0 - s) * 1.2 + s * 2.0)).abs() < 1e-15);
        assert!((mid.mu - ((1.0 - s) * 0.12 + s * 0.2)).abs() < 1e-15);

        let single = MaterialTable::layered(1, outer, top, bottom).unwrap();
        assert_eq!(single.get(1).unwrap(), top);
    }

    #[test]
    fn volume_of_plain_square_is_one() {
        // No inclusions: the whole unit square is bulk and has no interface.
        let mesh = unit_square();
        assert!((compute_volume_objective(&mesh) - 1.0).abs() < 1e-15);
        assert_eq!(compute_perimeter_objective(&mesh), 0.0);
    }

    #[test]
    fn volume_and_perimeter_objectives() {
        // 4x4 lattice of octagons with circumradius rho = 0.3 * 0.25.
        let hier = generate_composite_domain(4, 4, 0.3, 0).unwrap();
        let mesh = hier.finest();
        let rho = 0.075;
        let oct_area = 2.0 * 2.0f64.sqrt() * rho * rho;
        let vol = compute_volume_objective(mesh);
        assert!((vol - (1.0 - 16.0 * oct_area)).abs() < 1e-12);
        let peri = compute_perimeter_objective(mesh);
        let oct_peri = 8.0 * rho * 2.0 * (std::f64::consts::PI / 8.0).sin();
        assert!((peri - 16.0 * oct_peri).abs() < 1e-12);
        // Refinement does not change either value.
        let hier2 = generate_composite_domain(4, 4, 0.3, 1).unwrap();
        assert!((compute_volume_objective(hier2.finest()) - vol).abs() < 1e-12);
        assert!((compute_perimeter_objective(hier2.finest()) - peri).abs() < 1e-12);
    }

    #[test]
    fn objective_weights_project_components() {
        let mesh = unit_square();
        let mat = MaterialTable::uniform(1.0, 0.1);
        let u = NodalField::zeros(4);
        let b = evaluate_objective(
            &mesh,
            &mat,
            &u,
            ObjectiveWeights {
                elast: 1.0,
                vol: 0.0,
                peri: 0.0,
            },
        )
        .unwrap();
        assert_eq!(b.total, 0.0);
        let b = evaluate_objective(
            &mesh,
            &mat,
            &u,
            ObjectiveWeights {
                elast: 0.0,
                vol: 1.0,
                peri: 0.0,
            },
        )
        .unwrap();
        assert!((b.total - compute_volume_objective(&mesh)).abs() < 1e-15);
    }
}
