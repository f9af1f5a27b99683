//! Optimization loop, configuration, and experiment outputs.
//!
//! Each step on the finest hierarchy level: solve the elasticity state
//! problem, evaluate the objective, assemble and reset the shape derivative,
//! solve the penalized descent problem, and move every mesh level along the
//! resulting direction with a fixed step size. The loop runs a fixed step
//! budget and stops early when an element inverts or a solver gives up,
//! recording the failure step; that mirrors how overly aggressive descent
//! parameters manifest in practice.

use crate::descent::{DescentContext, NewtonConfig, PenaltyConfig};
use crate::fem::{
    self, LameParameters, MaterialTable, NodalField, ObjectiveBreakdown, ObjectiveWeights,
};
use crate::linalg::CsrMatrix;
use crate::mesh::{self, mesh_quality, Mesh, MeshHierarchy};
use crate::mgsolve::{
    transfers_for, GmgPreconditioner, KrylovConfig, KrylovMethod, MgConfig, Transfer,
};
use crate::shapegrad;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Full experiment configuration; the defaults reproduce the reference
/// cellular-composite experiment.
#[derive(Debug, Clone)]
pub struct OptimConfig {
    pub rows: usize,
    pub cols: usize,
    pub cell_radius_fraction: f64,
    pub refinements: usize,
    pub traction: f64,
    pub weights: ObjectiveWeights,
    pub penalty: PenaltyConfig,
    pub step_size: f64,
    pub max_steps: usize,
    pub outer: LameParameters,
    pub cell_top: LameParameters,
    pub cell_bottom: LameParameters,
    pub elasticity_solver: KrylovConfig,
    pub newton: NewtonConfig,
    pub mg: MgConfig,
    pub out_dir: PathBuf,
    pub snapshot_steps: Vec<usize>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            rows: 8,
            cols: 4,
            cell_radius_fraction: 0.3,
            refinements: 2,
            traction: 0.1,
            weights: ObjectiveWeights {
                elast: 100.0,
                vol: 1.0,
                peri: 0.01,
            },
            penalty: PenaltyConfig::default(),
            step_size: 1.0,
            max_steps: 100,
            outer: LameParameters {
                lambda: 1.0,
                mu: 0.1,
            },
            cell_top: LameParameters {
                lambda: 1.2,
                mu: 0.12,
            },
            cell_bottom: LameParameters {
                lambda: 2.0,
                mu: 0.2,
            },
            elasticity_solver: KrylovConfig {
                method: KrylovMethod::BiCgStab,
                rel_tol: 1e-10,
                abs_tol: 1e-10,
                max_iter: 2000,
            },
            newton: NewtonConfig::default(),
            mg: MgConfig::default(),
            out_dir: PathBuf::from("out"),
            snapshot_steps: vec![0, 25, 50, 75, 100],
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_size <= 0.0 {
            return Err(Error::Config("step_size must be positive".into()));
        }
        if !(self.weights.elast > 0.0 && self.weights.vol >= 0.0 && self.weights.peri >= 0.0) {
            return Err(Error::Config(
                "weights need nu_elast > 0 and nu_vol, nu_peri >= 0".into(),
            ));
        }
        self.penalty.validate()?;
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::Config("lattice must be at least 1x1".into()));
        }
        if !(self.cell_radius_fraction > 0.0 && self.cell_radius_fraction < 0.5) {
            return Err(Error::Config(
                "cell_radius_fraction must lie in (0, 0.5)".into(),
            ));
        }
        if self.mg.pre_smooth < 1 || self.mg.post_smooth < 1 {
            return Err(Error::Config("smoothing counts must be at least 1".into()));
        }
        if !(self.mg.damping > 0.0 && self.mg.damping <= 1.0) {
            return Err(Error::Config("jacobi_damping must lie in (0, 1]".into()));
        }
        for (name, krylov) in [
            ("elasticity", &self.elasticity_solver),
            ("inner", &self.newton.linear),
        ] {
            if !(krylov.rel_tol > 0.0 && krylov.abs_tol >= 0.0 && krylov.max_iter >= 1) {
                return Err(Error::Config(format!("bad {name} solver tolerances")));
            }
        }
        if self.newton.max_steps < 1 || !(self.newton.rel_tol > 0.0 && self.newton.abs_tol > 0.0) {
            return Err(Error::Config("bad Newton stopping parameters".into()));
        }
        Ok(())
    }

    pub fn materials(&self) -> Result<MaterialTable> {
        MaterialTable::layered(self.rows, self.outer, self.cell_top, self.cell_bottom)
    }

    /// Newton settings with the shared multigrid configuration applied.
    fn newton_with_mg(&self) -> NewtonConfig {
        let mut n = self.newton;
        n.mg = self.mg;
        n
    }
}

/// Per-step log record.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub objective: ObjectiveBreakdown,
    pub newton_iterations: usize,
    pub mean_linear_iterations: f64,
    pub elasticity_iterations: usize,
    pub quality_max: f64,
    pub quality_median: f64,
    pub failure: Option<FailureKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    ElementInversion,
    SolverFailure,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// Ran the full step budget.
    Budget,
    ElementInversion {
        step: usize,
    },
    SolverFailure {
        step: usize,
        message: String,
    },
}

impl Termination {
    pub fn is_budget(&self) -> bool {
        matches!(self, Termination::Budget)
    }
}

/// Mesh plus state/direction fields captured at a snapshot step.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub label: String,
    pub mesh: Mesh,
    pub displacement: NodalField,
    pub direction: NodalField,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<StepRecord>,
    pub termination: Termination,
    /// Number of successful mesh updates.
    pub completed_steps: usize,
    pub snapshots: Vec<Snapshot>,
    pub final_mesh: Mesh,
}

/// Solve the elasticity state problem on the finest level with the
/// multigrid-preconditioned Krylov solver. Returns the displacement and the
/// iteration count.
pub fn solve_state(
    hierarchy: &MeshHierarchy,
    transfers: &[Transfer],
    materials: &MaterialTable,
    traction: f64,
    krylov: &KrylovConfig,
    mg: MgConfig,
) -> Result<(NodalField, usize)> {
    let mut matrices: Vec<CsrMatrix> = Vec::with_capacity(hierarchy.num_levels());
    let mut fine_rhs = Vec::new();
    for (l, mesh) in hierarchy.levels().iter().enumerate() {
        let sys = fem::assemble_elasticity(mesh, materials, traction)?;
        if l == hierarchy.num_levels() - 1 {
            fine_rhs = sys.rhs;
        }
        matrices.push(sys.matrix);
    }
    let gmg = GmgPreconditioner::new(matrices, transfers, mg)?;
    let (mut u_flat, iterations) = crate::mgsolve::krylov_solve(
        |x, out| gmg.fine_matrix().mul_vec(x, out),
        |r| gmg.apply(r),
        &fine_rhs,
        krylov,
    )?;
    // Exact homogeneous Dirichlet values on the bottom boundary.
    let fine = hierarchy.finest();
    for v in 0..fine.num_vertices() {
        if fine.is_bottom_vertex(v) {
            u_flat[2 * v] = 0.0;
            u_flat[2 * v + 1] = 0.0;
        }
    }
    Ok((NodalField::from_flat(&u_flat), iterations))
}

/// Assemble, combine, and reset the shape derivative of the weighted
/// objective at the given state.
pub fn shape_gradient(
    mesh: &Mesh,
    materials: &MaterialTable,
    u: &NodalField,
    weights: ObjectiveWeights,
) -> Result<shapegrad::ShapeGradient> {
    let elastic = shapegrad::assemble_elastic_shape_derivative(mesh, materials, u)?;
    let volume = shapegrad::assemble_volume_shape_derivative(mesh);
    let perimeter = shapegrad::assemble_perimeter_shape_derivative(mesh);
    Ok(shapegrad::combine_and_reset(
        mesh, &elastic, &volume, &perimeter, weights,
    ))
}

/// Run the optimization loop for `cfg.max_steps` steps or until a failure.
pub fn run_optimization(cfg: &OptimConfig) -> Result<RunResult> {
    cfg.validate()?;
    let materials = cfg.materials()?;
    let mut hierarchy = mesh::generate_composite_domain(
        cfg.rows,
        cfg.cols,
        cfg.cell_radius_fraction,
        cfg.refinements,
    )?;
    let transfers = transfers_for(&hierarchy);
    let newton_cfg = cfg.newton_with_mg();

    let mut records: Vec<StepRecord> = Vec::new();
    let mut snapshots = Vec::new();
    let mut termination = Termination::Budget;
    let mut completed_steps = 0usize;

    if cfg.max_steps == 0 {
        let mesh = hierarchy.finest().clone();
        let zeros = NodalField::zeros(mesh.num_vertices());
        snapshots.push(Snapshot {
            label: "step_0000".into(),
            mesh: mesh.clone(),
            displacement: zeros.clone(),
            direction: zeros,
        });
        return Ok(RunResult {
            records,
            termination,
            completed_steps,
            snapshots,
            final_mesh: mesh,
        });
    }

    for step in 0..cfg.max_steps {
        let (u, elast_iters) = match solve_state(
            &hierarchy,
            &transfers,
            &materials,
            cfg.traction,
            &cfg.elasticity_solver,
            cfg.mg,
        ) {
            Ok(pair) => pair,
            Err(
                err @ (Error::NonConvergence { .. }
                | Error::Breakdown { .. }
                | Error::SingularMatrix { .. }),
            ) => {
                termination = Termination::SolverFailure {
                    step,
                    message: err.to_string(),
                };
                break;
            }
            Err(err) => return Err(err),
        };

        let mesh = hierarchy.finest();
        let objective = fem::evaluate_objective(mesh, &materials, &u, cfg.weights)?;
        let quality = mesh_quality(mesh)?;
        let dj = shape_gradient(mesh, &materials, &u, cfg.weights)?;

        let descent_ctx = DescentContext::new(&hierarchy, &transfers, cfg.penalty)?;
        let (direction, report) = match descent_ctx.solve(&dj, &newton_cfg) {
            Ok(pair) => pair,
            Err(
                err @ (Error::NonConvergence { .. }
                | Error::Breakdown { .. }
                | Error::SingularMatrix { .. }),
            ) => {
                let iterations = match &err {
                    Error::NonConvergence { iterations, .. } => *iterations,
                    _ => 0,
                };
                records.push(StepRecord {
                    step,
                    objective,
                    newton_iterations: iterations,
                    mean_linear_iterations: 0.0,
                    elasticity_iterations: elast_iters,
                    quality_max: quality.max,
                    quality_median: quality.median,
                    failure: Some(FailureKind::SolverFailure),
                });
                termination = Termination::SolverFailure {
                    step,
                    message: err.to_string(),
                };
                break;
            }
            Err(err) => return Err(err),
        };

        records.push(StepRecord {
            step,
            objective,
            newton_iterations: report.newton_steps(),
            mean_linear_iterations: report.mean_linear_iterations(),
            elasticity_iterations: elast_iters,
            quality_max: quality.max,
            quality_median: quality.median,
            failure: None,
        });

        if cfg.snapshot_steps.contains(&step) {
            snapshots.push(Snapshot {
                label: format!("step_{step:04}"),
                mesh: mesh.clone(),
                displacement: u.clone(),
                direction: direction.clone(),
            });
        }

        match hierarchy.deform_finest(direction.values(), cfg.step_size) {
            Ok(()) => completed_steps += 1,
            Err(Error::ElementInversion { .. }) => {
                if let Some(last) = records.last_mut() {
                    last.failure = Some(FailureKind::ElementInversion);
                }
                termination = Termination::ElementInversion { step };
                break;
            }
            Err(err) => return Err(err),
        }
    }

    Ok(RunResult {
        records,
        termination,
        completed_steps,
        snapshots,
        final_mesh: hierarchy.finest().clone(),
    })
}

/// Summary of one run of a penalty-bound sweep.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub bound: f64,
    pub completed_steps: usize,
    pub final_quality_max: f64,
    pub final_quality_median: f64,
    pub termination: Termination,
}

/// Rerun the optimization for each penalty bound, collecting how far each
/// run gets and the final mesh quality.
pub fn b_sweep(cfg: &OptimConfig, bounds: &[f64]) -> Result<Vec<SweepSummary>> {
    if bounds.is_empty() {
        return Err(Error::Config("sweep needs at least one bound".into()));
    }
    let mut summaries = Vec::with_capacity(bounds.len());
    for &bound in bounds {
        let mut run_cfg = cfg.clone();
        run_cfg.penalty.bound = bound;
        let result = run_optimization(&run_cfg)?;
        let (q_max, q_median) = result
            .records
            .last()
            .map(|r| (r.quality_max, r.quality_median))
            .unwrap_or((f64::NAN, f64::NAN));
        summaries.push(SweepSummary {
            bound,
            completed_steps: result.completed_steps,
            final_quality_max: q_max,
            final_quality_median: q_median,
            termination: result.termination,
        });
    }
    Ok(summaries)
}

pub const HISTORY_HEADER: &str =
    "step,J_elast,J_vol,J_peri,J_total,newton_iters,avg_lin_iters,elast_iters,quality_max,quality_median";

/// Render the per-step history as CSV text.
pub fn history_csv(records: &[StepRecord]) -> String {
    let mut out = String::new();
    out.push_str(HISTORY_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{},{:.17e},{:.17e}",
            r.step,
            r.objective.elast,
            r.objective.vol,
            r.objective.peri,
            r.objective.total,
            r.newton_iterations,
            r.mean_linear_iterations,
            r.elasticity_iterations,
            r.quality_max,
            r.quality_median
        )
        .expect("string write");
    }
    out
}

/// Write history.csv, VTK snapshots, the final mesh, and a run summary.
pub fn write_outputs(out_dir: &Path, result: &RunResult) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("history.csv"), history_csv(&result.records))?;

    for snap in &result.snapshots {
        let mut buf = Vec::new();
        mesh::write_vtk(
            &snap.mesh,
            &[
                ("u", snap.displacement.values()),
                ("v", snap.direction.values()),
            ],
            &mut buf,
        )?;
        fs::write(out_dir.join(format!("{}.vtk", snap.label)), buf)?;
    }
    if result.completed_steps > 0 || !result.records.is_empty() {
        let mut buf = Vec::new();
        mesh::write_vtk(&result.final_mesh, &[], &mut buf)?;
        fs::write(out_dir.join("final.vtk"), buf)?;
    }
    let mut buf = Vec::new();
    mesh::write_cellmesh(&result.final_mesh, &mut buf)?;
    fs::write(out_dir.join("mesh_final.cellmesh"), buf)?;

    let summary = match &result.termination {
        Termination::Budget => {
            format!("completed {} steps (full budget)\n", result.completed_steps)
        }
        Termination::ElementInversion { step } => format!(
            "stopped at step {step}: element inversion after {} completed steps\n",
            result.completed_steps
        ),
        Termination::SolverFailure { step, message } => format!(
            "stopped at step {step}: {message} after {} completed steps\n",
            result.completed_steps
        ),
    };
    fs::write(out_dir.join("summary.txt"), summary)?;
    Ok(())
}

/// Parse a flat `key = value` configuration file; `#` starts a comment and
/// unspecified keys keep their defaults.
pub fn parse_config(text: &str) -> Result<OptimConfig> {
    let mut cfg = OptimConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                idx + 1
            )));
        };
        apply_setting(&mut cfg, key.trim(), value.trim())
            .map_err(|e| Error::Config(format!("line {}: {e}", idx + 1)))?;
    }
    Ok(cfg)
}

/// Apply one `key = value` override.
pub fn apply_setting(cfg: &mut OptimConfig, key: &str, value: &str) -> Result<()> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
        value
            .parse()
            .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
    }
    match key {
        "rows" => cfg.rows = num(key, value)?,
        "cols" => cfg.cols = num(key, value)?,
        "cell_radius_fraction" => cfg.cell_radius_fraction = num(key, value)?,
        "refinements" => cfg.refinements = num(key, value)?,
        "traction" => cfg.traction = num(key, value)?,
        "nu_elast" => cfg.weights.elast = num(key, value)?,
        "nu_vol" => cfg.weights.vol = num(key, value)?,
        "nu_peri" => cfg.weights.peri = num(key, value)?,
        "nu_penalty" => cfg.penalty.nu_penalty = num(key, value)?,
        "penalty_bound" => cfg.penalty.bound = num(key, value)?,
        "metric_lambda" => cfg.penalty.metric_lambda = num(key, value)?,
        "metric_mu" => cfg.penalty.metric_mu = num(key, value)?,
        "step_size" => cfg.step_size = num(key, value)?,
        "max_steps" => cfg.max_steps = num(key, value)?,
        "lambda_out" => cfg.outer.lambda = num(key, value)?,
        "mu_out" => cfg.outer.mu = num(key, value)?,
        "lambda_top" => cfg.cell_top.lambda = num(key, value)?,
        "mu_top" => cfg.cell_top.mu = num(key, value)?,
        "lambda_bottom" => cfg.cell_bottom.lambda = num(key, value)?,
        "mu_bottom" => cfg.cell_bottom.mu = num(key, value)?,
        "elast_rel_tol" => cfg.elasticity_solver.rel_tol = num(key, value)?,
        "elast_abs_tol" => cfg.elasticity_solver.abs_tol = num(key, value)?,
        "elast_max_iter" => cfg.elasticity_solver.max_iter = num(key, value)?,
        "elast_method" => cfg.elasticity_solver.method = parse_method(value)?,
        "newton_rel_tol" => cfg.newton.rel_tol = num(key, value)?,
        "newton_abs_tol" => cfg.newton.abs_tol = num(key, value)?,
        "newton_max_steps" => cfg.newton.max_steps = num(key, value)?,
        "inner_rel_tol" => cfg.newton.linear.rel_tol = num(key, value)?,
        "inner_abs_tol" => cfg.newton.linear.abs_tol = num(key, value)?,
        "inner_max_iter" => cfg.newton.linear.max_iter = num(key, value)?,
        "inner_method" => cfg.newton.linear.method = parse_method(value)?,
        "pre_smooth" => cfg.mg.pre_smooth = num(key, value)?,
        "post_smooth" => cfg.mg.post_smooth = num(key, value)?,
        "jacobi_damping" => cfg.mg.damping = num(key, value)?,
        "out_dir" => cfg.out_dir = PathBuf::from(value),
        "snapshot_steps" => {
            let mut steps = Vec::new();
            for tok in value.split(',') {
                let tok = tok.trim();
                if !tok.is_empty() {
                    steps.push(num::<usize>(key, tok)?);
                }
            }
            cfg.snapshot_steps = steps;
        }
        other => return Err(Error::Config(format!("unknown key '{other}'"))),
    }
    Ok(())
}

fn parse_method(value: &str) -> Result<KrylovMethod> {
    match value.to_ascii_lowercase().as_str() {
        "bicgstab" => Ok(KrylovMethod::BiCgStab),
        "cg" => Ok(KrylovMethod::Cg),
        other => Err(Error::Config(format!("unknown Krylov method '{other}'"))),
    }
}

/// One direction of the finite-difference gradient verification.
#[derive(Debug, Clone)]
pub struct FdSample {
    pub field: usize,
    pub pairing: f64,
    pub fd: [f64; 2],
    pub rel_err: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct FdCheckReport {
    pub steps: [f64; 2],
    pub samples: Vec<FdSample>,
}

impl FdCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.samples
            .iter()
            .flat_map(|s| s.rel_err.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Compare the assembled shape derivative against central finite differences
/// of the full reduced objective (the state is re-solved on every deformed
/// mesh) for random directions supported near the interface. The assembled
/// functional is the descent dual, so its pairing equals minus the objective
/// derivative; the comparison accounts for that.
pub fn gradient_fd_check(n_fields: usize, seed: u64) -> Result<FdCheckReport> {
    let cfg = OptimConfig {
        rows: 2,
        cols: 1,
        cell_radius_fraction: 0.3,
        refinements: 2,
        ..OptimConfig::default()
    };
    let materials = cfg.materials()?;
    let hierarchy = mesh::generate_composite_domain(
        cfg.rows,
        cfg.cols,
        cfg.cell_radius_fraction,
        cfg.refinements,
    )?;
    let transfers = transfers_for(&hierarchy);
    // The finite differences difference two nearby objective values, so the
    // state solves use much tighter tolerances than a production run.
    let tight = KrylovConfig {
        method: KrylovMethod::BiCgStab,
        rel_tol: 1e-13,
        abs_tol: 1e-15,
        max_iter: 4000,
    };

    let (u, _) = solve_state(
        &hierarchy,
        &transfers,
        &materials,
        cfg.traction,
        &tight,
        cfg.mg,
    )?;
    let fine = hierarchy.finest();
    let dj = shape_gradient(fine, &materials, &u, cfg.weights)?;

    let reduced_objective = |deformed: &MeshHierarchy| -> Result<f64> {
        let (u_t, _) = solve_state(
            deformed,
            &transfers,
            &materials,
            cfg.traction,
            &tight,
            cfg.mg,
        )?;
        Ok(fem::evaluate_objective(deformed.finest(), &materials, &u_t, cfg.weights)?.total)
    };

    let steps = [1e-4, 1e-5];
    let mut rng = Xorshift64(seed.max(1));
    let mut samples = Vec::with_capacity(n_fields);
    for field in 0..n_fields {
        let v = random_interface_field(fine, &mut rng);
        let pairing = dj.pair(&v);
        let mut fd = [0.0f64; 2];
        let mut rel_err = [0.0f64; 2];
        for (k, &t) in steps.iter().enumerate() {
            let mut plus = hierarchy.clone();
            plus.deform_finest(v.values(), t)?;
            let mut minus = hierarchy.clone();
            minus.deform_finest(v.values(), -t)?;
            let j_plus = reduced_objective(&plus)?;
            let j_minus = reduced_objective(&minus)?;
            fd[k] = (j_plus - j_minus) / (2.0 * t);
            // Descent convention: pairing == -dJ/dt.
            rel_err[k] = (pairing + fd[k]).abs() / fd[k].abs().max(1e-300);
        }
        samples.push(FdSample {
            field,
            pairing,
            fd,
            rel_err,
        });
    }
    Ok(FdCheckReport { steps, samples })
}

/// Random unit-scaled direction supported on vertices whose support touches
/// the interface, with slip-constrained components zeroed.
fn random_interface_field(mesh: &Mesh, rng: &mut Xorshift64) -> NodalField {
    let mask = shapegrad::interface_support_mask(mesh);
    let mut values = vec![[0.0f64; 2]; mesh.num_vertices()];
    let mut max_abs = 0.0f64;
    for v in 0..mesh.num_vertices() {
        if mask[v] {
            values[v] = [rng.unit() - 0.5, rng.unit() - 0.5];
            if mesh.is_side_vertex(v) {
                values[v][0] = 0.0;
            }
            if mesh.is_top_vertex(v) || mesh.is_bottom_vertex(v) {
                values[v][1] = 0.0;
            }
            max_abs = max_abs.max(values[v][0].abs()).max(values[v][1].abs());
        }
    }
    if max_abs > 0.0 {
        for v in values.iter_mut() {
            v[0] /= max_abs;
            v[1] /= max_abs;
        }
    }
    NodalField::from_values(values)
}

struct Xorshift64(u64);

impl Xorshift64 {
    /// Uniform in [0, 1).
    fn unit(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        (x >> 11) as f64 / (1u64 << 53) as f64
    }
}
