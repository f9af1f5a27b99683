//! Krylov solvers preconditioned by a geometric multigrid V-cycle.
//!
//! The hierarchy comes from uniform refinement, so transfers are exact P1
//! interpolation: a fine vertex either coincides with a coarse vertex or is
//! the midpoint of a coarse edge (weights 1/2, 1/2); restriction is the
//! transpose. Each V-cycle uses damped block-Jacobi smoothing with 2x2
//! per-vertex blocks and a dense LU solve on the coarsest level. The cycle is
//! a fixed linear operator (zero initial guess), as required for use as a
//! preconditioner.

use crate::linalg::{self, CsrMatrix, DenseLu};
use crate::mesh::{Mesh, MeshHierarchy, VertexParent};
use crate::parallel;
use crate::{Error, Result};

/// Dof-level grid transfer between two consecutive hierarchy levels.
#[derive(Debug, Clone)]
pub struct Transfer {
    parents: Vec<VertexParent>,
    n_coarse_vertices: usize,
}

impl Transfer {
    pub fn from_parent_map(parents: &[VertexParent]) -> Transfer {
        let n_coarse_vertices = parents
            .iter()
            .filter(|p| matches!(p, VertexParent::Inherited(_)))
            .count();
        // Inherited vertices must be the index-identical prefix.
        for (f, p) in parents.iter().enumerate() {
            if let VertexParent::Inherited(c) = p {
                assert_eq!(*c, f, "inherited vertices must keep their indices");
            }
        }
        Transfer {
            parents: parents.to_vec(),
            n_coarse_vertices,
        }
    }

    pub fn n_fine_dofs(&self) -> usize {
        2 * self.parents.len()
    }

    pub fn n_coarse_dofs(&self) -> usize {
        2 * self.n_coarse_vertices
    }

    /// Linear interpolation from coarse to fine dofs.
    pub fn prolongate(&self, coarse: &[f64], fine: &mut [f64]) {
        assert_eq!(coarse.len(), self.n_coarse_dofs());
        assert_eq!(fine.len(), self.n_fine_dofs());
        let parents = &self.parents;
        parallel::fill_indexed(fine, |dof| {
            let (v, comp) = (dof / 2, dof % 2);
            match parents[v] {
                VertexParent::Inherited(c) => coarse[2 * c + comp],
                VertexParent::EdgeMidpoint(a, b) => {
                    0.5 * (coarse[2 * a + comp] + coarse[2 * b + comp])
                }
            }
        });
    }

    /// Transpose of prolongation.
    pub fn restrict(&self, fine: &[f64], coarse: &mut [f64]) {
        assert_eq!(coarse.len(), self.n_coarse_dofs());
        assert_eq!(fine.len(), self.n_fine_dofs());
        coarse.fill(0.0);
        for (v, parent) in self.parents.iter().enumerate() {
            for comp in 0..2 {
                let val = fine[2 * v + comp];
                match *parent {
                    VertexParent::Inherited(c) => coarse[2 * c + comp] += val,
                    VertexParent::EdgeMidpoint(a, b) => {
                        coarse[2 * a + comp] += 0.5 * val;
                        coarse[2 * b + comp] += 0.5 * val;
                    }
                }
            }
        }
    }

    /// Interpolation stencil of a fine dof as (coarse dof, weight) pairs.
    fn stencil(&self, dof: usize) -> [(usize, f64); 2] {
        let (v, comp) = (dof / 2, dof % 2);
        match self.parents[v] {
            VertexParent::Inherited(c) => [(2 * c + comp, 1.0), (usize::MAX, 0.0)],
            VertexParent::EdgeMidpoint(a, b) => [(2 * a + comp, 0.5), (2 * b + comp, 0.5)],
        }
    }

    /// Galerkin triple product `P^T A P` of a fine-level matrix.
    pub fn galerkin(&self, fine: &CsrMatrix) -> CsrMatrix {
        assert_eq!(fine.n_rows(), self.n_fine_dofs());
        let mut triplets = Vec::new();
        for r in 0..fine.n_rows() {
            let (cols, vals) = fine.row(r);
            if cols.is_empty() {
                continue;
            }
            let row_stencil = self.stencil(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if v == 0.0 {
                    continue;
                }
                for &(cr, wr) in &row_stencil {
                    if wr == 0.0 {
                        continue;
                    }
                    for &(cc, wc) in &self.stencil(c) {
                        if wc == 0.0 {
                            continue;
                        }
                        triplets.push((cr, cc, wr * v * wc));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.n_coarse_dofs(), triplets)
    }
}

/// Transfers for every level pair of a hierarchy.
pub fn transfers_for(hierarchy: &MeshHierarchy) -> Vec<Transfer> {
    (0..hierarchy.num_levels() - 1)
        .map(|l| Transfer::from_parent_map(hierarchy.parent_map(l)))
        .collect()
}

/// Assemble one matrix per hierarchy level with the same builder.
pub fn build_hierarchy_matrices<F>(hierarchy: &MeshHierarchy, assemble: F) -> Result<Vec<CsrMatrix>>
where
    F: Fn(&Mesh) -> Result<CsrMatrix>,
{
    hierarchy.levels().iter().map(assemble).collect()
}

/// Coarsen a fine-level-only matrix term through the whole hierarchy with
/// repeated Galerkin products, zeroing constrained rows/columns per level.
/// Index `l` of the result lives on level `l`; the finest entry is a copy.
pub fn coarsen_additive_term(
    fine_term: &CsrMatrix,
    transfers: &[Transfer],
    fixed_masks: &[Vec<bool>],
) -> Vec<CsrMatrix> {
    let n_levels = transfers.len() + 1;
    assert_eq!(fixed_masks.len(), n_levels);
    let mut per_level = vec![fine_term.clone()];
    for l in (0..transfers.len()).rev() {
        let coarser = {
            let finer = per_level.last().expect("non-empty");
            let mut m = transfers[l].galerkin(finer);
            m.zero_constrained(&fixed_masks[l]);
            m
        };
        per_level.push(coarser);
    }
    per_level.reverse();
    per_level
}

/// Multigrid cycle parameters.
#[derive(Debug, Clone, Copy)]
pub struct MgConfig {
    pub pre_smooth: usize,
    pub post_smooth: usize,
    pub damping: f64,
}

impl Default for MgConfig {
    fn default() -> Self {
        MgConfig {
            pre_smooth: 3,
            post_smooth: 3,
            damping: 0.66,
        }
    }
}

struct LevelOps {
    matrix: CsrMatrix,
    block_inv: Vec<[f64; 4]>,
}

/// One V-cycle of geometric multigrid, used as a fixed linear preconditioner.
pub struct GmgPreconditioner<'a> {
    levels: Vec<LevelOps>,
    transfers: &'a [Transfer],
    coarse_lu: DenseLu,
    cfg: MgConfig,
}

impl<'a> GmgPreconditioner<'a> {
    /// `matrices[l]` is the operator on level `l` (0 coarsest); `transfers[l]`
    /// maps level `l` to `l + 1`.
    pub fn new(
        matrices: Vec<CsrMatrix>,
        transfers: &'a [Transfer],
        cfg: MgConfig,
    ) -> Result<GmgPreconditioner<'a>> {
        assert_eq!(matrices.len(), transfers.len() + 1);
        assert!(cfg.pre_smooth >= 1 && cfg.post_smooth >= 1);
        assert!(cfg.damping > 0.0 && cfg.damping <= 1.0);
        let coarse_lu = DenseLu::factor(&matrices[0])?;
        let mut levels = Vec::with_capacity(matrices.len());
        for matrix in matrices {
            let block_inv = matrix.block_diagonal_inverse()?;
            levels.push(LevelOps { matrix, block_inv });
        }
        Ok(GmgPreconditioner {
            levels,
            transfers,
            coarse_lu,
            cfg,
        })
    }

    pub fn fine_matrix(&self) -> &CsrMatrix {
        &self.levels.last().expect("non-empty").matrix
    }

    /// Apply one V-cycle with zero initial guess to `rhs` on the finest level.
    pub fn apply(&self, rhs: &[f64]) -> Vec<f64> {
        self.vcycle(self.levels.len() - 1, rhs)
    }

    fn vcycle(&self, level: usize, rhs: &[f64]) -> Vec<f64> {
        if level == 0 {
            return self.coarse_lu.solve(rhs);
        }
        let ops = &self.levels[level];
        let n = rhs.len();
        let mut x = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        for _ in 0..self.cfg.pre_smooth {
            block_jacobi_sweep(ops, self.cfg.damping, &mut x, rhs, &mut scratch);
        }
        // Coarse-grid correction on the residual.
        ops.matrix.mul_vec(&x, &mut scratch);
        for i in 0..n {
            scratch[i] = rhs[i] - scratch[i];
        }
        let transfer = &self.transfers[level - 1];
        let mut coarse_rhs = vec![0.0; transfer.n_coarse_dofs()];
        transfer.restrict(&scratch, &mut coarse_rhs);
        let coarse_corr = self.vcycle(level - 1, &coarse_rhs);
        transfer.prolongate(&coarse_corr, &mut scratch);
        for i in 0..n {
            x[i] += scratch[i];
        }
        for _ in 0..self.cfg.post_smooth {
            block_jacobi_sweep(ops, self.cfg.damping, &mut x, rhs, &mut scratch);
        }
        x
    }
}

/// x += damping * blockdiag(A)^-1 (rhs - A x)
fn block_jacobi_sweep(
    ops: &LevelOps,
    damping: f64,
    x: &mut [f64],
    rhs: &[f64],
    scratch: &mut [f64],
) {
    ops.matrix.mul_vec(x, scratch);
    for i in 0..scratch.len() {
        scratch[i] = rhs[i] - scratch[i];
    }
    for (v, inv) in ops.block_inv.iter().enumerate() {
        let rx = scratch[2 * v];
        let ry = scratch[2 * v + 1];
        x[2 * v] += damping * (inv[0] * rx + inv[1] * ry);
        x[2 * v + 1] += damping * (inv[2] * rx + inv[3] * ry);
    }
}

/// Krylov method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMethod {
    BiCgStab,
    Cg,
}

/// Stopping rule: iterate until `||r|| <= max(rel_tol * ||r0||, abs_tol)`.
#[derive(Debug, Clone, Copy)]
pub struct KrylovConfig {
    pub method: KrylovMethod,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

const BREAKDOWN_EPS: f64 = 1e-60;

/// Solve `A x = b` from a zero initial guess; returns the solution and the
/// number of iterations taken.
pub fn krylov_solve<A, M>(
    apply_a: A,
    apply_m: M,
    rhs: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, usize)>
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64]) -> Vec<f64>,
{
    match cfg.method {
        KrylovMethod::BiCgStab => bicgstab(apply_a, apply_m, rhs, cfg),
        KrylovMethod::Cg => cg(apply_a, apply_m, rhs, cfg),
    }
}

/// Right-preconditioned BiCGStab.
pub fn bicgstab<A, M>(
    apply_a: A,
    apply_m: M,
    rhs: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, usize)>
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let r0_norm = linalg::norm2(&r);
    let tol = (cfg.rel_tol * r0_norm).max(cfg.abs_tol);
    if r0_norm <= tol {
        return Ok((x, 0));
    }
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut t = vec![0.0; n];

    for it in 1..=cfg.max_iter {
        let rho_new = linalg::dot(&r_hat, &r);
        if rho_new.abs() < BREAKDOWN_EPS {
            return Err(Error::Breakdown {
                what: "bicgstab rho",
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = apply_m(&p);
        apply_a(&p_hat, &mut v);
        let denom = linalg::dot(&r_hat, &v);
        if denom.abs() < BREAKDOWN_EPS {
            return Err(Error::Breakdown {
                what: "bicgstab r_hat.v",
            });
        }
        alpha = rho_new / denom;
        // s = r - alpha v  (reuse r)
        linalg::axpy(-alpha, &v, &mut r);
        linalg::axpy(alpha, &p_hat, &mut x);
        if linalg::norm2(&r) <= tol {
            return Ok((x, it));
        }
        let s_hat = apply_m(&r);
        apply_a(&s_hat, &mut t);
        let tt = linalg::dot(&t, &t);
        if tt.abs() < BREAKDOWN_EPS {
            return Err(Error::Breakdown {
                what: "bicgstab t.t",
            });
        }
        omega = linalg::dot(&t, &r) / tt;
        linalg::axpy(omega, &s_hat, &mut x);
        linalg::axpy(-omega, &t, &mut r);
        if linalg::norm2(&r) <= tol {
            return Ok((x, it));
        }
        rho = rho_new;
    }
    Err(Error::NonConvergence {
        what: "bicgstab",
        iterations: cfg.max_iter,
        residual: linalg::norm2(&r),
    })
}

/// Preconditioned conjugate gradients (for cross-checking on SPD systems).
pub fn cg<A, M>(
    apply_a: A,
    apply_m: M,
    rhs: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, usize)>
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let r0_norm = linalg::norm2(&r);
    let tol = (cfg.rel_tol * r0_norm).max(cfg.abs_tol);
    if r0_norm <= tol {
        return Ok((x, 0));
    }
    let mut z = apply_m(&r);
    let mut p = z.clone();
    let mut rz = linalg::dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 1..=cfg.max_iter {
        apply_a(&p, &mut q);
        let pq = linalg::dot(&p, &q);
        if pq.abs() < BREAKDOWN_EPS {
            return Err(Error::Breakdown { what: "cg p.q" });
        }
        let alpha = rz / pq;
        linalg::axpy(alpha, &p, &mut x);
        linalg::axpy(-alpha, &q, &mut r);
        if linalg::norm2(&r) <= tol {
            return Ok((x, it));
        }
        z = apply_m(&r);
        let rz_new = linalg::dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }
    Err(Error::NonConvergence {
        what: "cg",
        iterations: cfg.max_iter,
        residual: linalg::norm2(&r),
    })
}

/// Identity preconditioner.
pub fn no_preconditioner(r: &[f64]) -> Vec<f64> {
    r.to_vec()
}
