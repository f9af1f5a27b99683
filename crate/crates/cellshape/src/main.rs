use std::path::PathBuf;
use std::process::ExitCode;

use cellshape::driver::{
    self, apply_setting, gradient_fd_check, parse_config, run_optimization, OptimConfig,
    Termination,
};

const USAGE: &str = "\
cellshape - shape optimization of 2D cellular composites

USAGE:
    cellshape run   [CONFIG] [--set key=value]...
    cellshape sweep --b B1,B2,... [CONFIG] [--set key=value]...
    cellshape check

Without CONFIG the built-in defaults are used. `--set` overrides apply after
the file. The CELLSHAPE_OUT environment variable overrides the output
directory. Exit code 0: full run; 2: early termination or failed check;
1: configuration error.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("run") => run_command(&args[1..]),
        Some("sweep") => sweep_command(&args[1..]),
        Some("check") => check_command(),
        Some("--help") | Some("-h") | None => {
            print!("{USAGE}");
            ExitCode::from(if args.is_empty() { 1 } else { 0 })
        }
        Some(other) => {
            eprintln!("unknown command '{other}'\n\n{USAGE}");
            ExitCode::from(1)
        }
    }
}

/// Parse [CONFIG] plus repeated `--set key=value` into an OptimConfig.
fn load_config(args: &[String]) -> Result<OptimConfig, String> {
    let mut cfg: Option<OptimConfig> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if arg == "--set" {
            let Some(pair) = it.next() else {
                return Err("--set needs key=value".into());
            };
            let Some((k, v)) = pair.split_once('=') else {
                return Err(format!("bad --set '{pair}', expected key=value"));
            };
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        } else if arg.starts_with("--") {
            return Err(format!("unknown option '{arg}'"));
        } else if cfg.is_none() {
            let text = std::fs::read_to_string(arg)
                .map_err(|e| format!("cannot read config '{arg}': {e}"))?;
            cfg = Some(parse_config(&text).map_err(|e| e.to_string())?);
        } else {
            return Err(format!("unexpected argument '{arg}'"));
        }
    }
    let mut cfg = cfg.unwrap_or_default();
    for (k, v) in &overrides {
        apply_setting(&mut cfg, k, v).map_err(|e| e.to_string())?;
    }
    if let Ok(dir) = std::env::var("CELLSHAPE_OUT") {
        if !dir.is_empty() {
            cfg.out_dir = PathBuf::from(dir);
        }
    }
    Ok(cfg)
}

fn run_command(args: &[String]) -> ExitCode {
    let cfg = match load_config(args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    match run_optimization(&cfg) {
        Ok(result) => {
            if let Err(e) = driver::write_outputs(&cfg.out_dir, &result) {
                eprintln!("error writing outputs: {e}");
                return ExitCode::from(1);
            }
            report_run(&result, &cfg);
            match result.termination {
                Termination::Budget => ExitCode::from(0),
                _ => ExitCode::from(2),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn report_run(result: &driver::RunResult, cfg: &OptimConfig) {
    if let (Some(first), Some(last)) = (result.records.first(), result.records.last()) {
        println!(
            "steps {:>3}..{:>3}: J_total {:.6e} -> {:.6e}",
            first.step, last.step, first.objective.total, last.objective.total
        );
    }
    match &result.termination {
        Termination::Budget => println!(
            "completed {} steps; outputs in {}",
            result.completed_steps,
            cfg.out_dir.display()
        ),
        Termination::ElementInversion { step } => {
            println!("stopped at step {step}: element inversion")
        }
        Termination::SolverFailure { step, message } => {
            println!("stopped at step {step}: {message}")
        }
    }
}

fn sweep_command(args: &[String]) -> ExitCode {
    // Extract --b, forward the rest to the config loader.
    let mut bounds: Option<Vec<f64>> = None;
    let mut rest: Vec<String> = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if arg == "--b" {
            let Some(list) = it.next() else {
                eprintln!("error: --b needs a comma-separated list");
                return ExitCode::from(1);
            };
            let parsed: Result<Vec<f64>, _> =
                list.split(',').map(|t| t.trim().parse::<f64>()).collect();
            match parsed {
                Ok(v) if !v.is_empty() => bounds = Some(v),
                _ => {
                    eprintln!("error: bad bound list '{list}'");
                    return ExitCode::from(1);
                }
            }
        } else {
            rest.push(arg.clone());
        }
    }
    let Some(bounds) = bounds else {
        eprintln!("error: sweep needs --b B1,B2,...");
        return ExitCode::from(1);
    };
    let cfg = match load_config(&rest) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };

    // Run each bound into its own subdirectory, then summarize.
    let mut rows = String::from("b,completed_steps,quality_max,quality_median,termination\n");
    for &b in &bounds {
        let mut run_cfg = cfg.clone();
        run_cfg.penalty.bound = b;
        run_cfg.out_dir = cfg.out_dir.join(format!("b_{b}"));
        match run_optimization(&run_cfg) {
            Ok(result) => {
                if let Err(e) = driver::write_outputs(&run_cfg.out_dir, &result) {
                    eprintln!("error writing outputs: {e}");
                    return ExitCode::from(1);
                }
                let (qm, qmed) = result
                    .records
                    .last()
                    .map(|r| (r.quality_max, r.quality_median))
                    .unwrap_or((f64::NAN, f64::NAN));
                let term = match &result.termination {
                    Termination::Budget => "budget".to_string(),
                    Termination::ElementInversion { step } => format!("inversion@{step}"),
                    Termination::SolverFailure { step, .. } => format!("solver@{step}"),
                };
                println!(
                    "b = {b:<10} completed {:>4} steps   quality max {qm:.3}   ({term})",
                    result.completed_steps
                );
                rows.push_str(&format!(
                    "{b},{},{qm:.17e},{qmed:.17e},{term}\n",
                    result.completed_steps
                ));
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
    }
    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir)
        .and_then(|_| std::fs::write(cfg.out_dir.join("sweep.csv"), rows))
    {
        eprintln!("error writing sweep.csv: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(0)
}

fn check_command() -> ExitCode {
    const TOLERANCE: f64 = 1e-4;
    match gradient_fd_check(10, 0x5eed) {
        Ok(report) => {
            println!(
                "gradient check: pairing vs central differences at t = {:?}",
                report.steps
            );
            let mut ok = true;
            for s in &report.samples {
                let pass = s.rel_err.iter().all(|&e| e <= TOLERANCE);
                ok &= pass;
                println!(
                    "  field {:>2}: pairing {:+.9e}  rel err {:.2e} / {:.2e}  [{}]",
                    s.field,
                    s.pairing,
                    s.rel_err[0],
                    s.rel_err[1],
                    if pass { "ok" } else { "FAIL" }
                );
            }
            println!(
                "max relative error {:.3e} (tolerance {TOLERANCE:.0e})",
                report.max_rel_err()
            );
            ExitCode::from(if ok { 0 } else { 2 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
