//! Command-line entry point: reproducible runs of the torus construction,
//! the van der Pol reduction report, independent verification, measure and
//! amplitude sweeps, and Diophantine certificates.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 hypothesis or
//! validation failure. Every run writes `manifest.json` (config echo,
//! versions, wall time) next to its outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qptorus::engine::{solve_system, RunResult};
use qptorus::resonance::{check_diophantine, exclude_melnikov, ParameterSet, ResonanceData};
use qptorus::sysspec::{default_vdp_spec, ModelSpec, SystemSpec};
use qptorus::vdp::{build_basis, spectrum_gap};
use qptorus::verify::{
    fit_slope, ode_defect, scaling_sweep, shadow_check_dde, shadow_check_ode, torus_amplitudes,
};
use qptorus::Error;

#[derive(Parser)]
#[command(name = "qptorus", version, about = "Quasi-periodic invariant tori near a degenerate equilibrium: KAM construction and validation")]
struct Cli {
    /// Cap on rayon worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed echoed into the manifest for randomized probes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (overridden by the QPTORUS_OUT environment variable).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Path to a SystemSpec JSON file, or the literal `vdp` for the built-in
    /// delayed van der Pol configuration.
    #[arg(long, default_value = "vdp")]
    spec: String,
    /// Override the forcing strength ε.
    #[arg(long)]
    eps: Option<f64>,
    /// Override the exclusion constant γ0.
    #[arg(long)]
    gamma0: Option<f64>,
    /// Override the parameter-grid size.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Override the polynomial degree cutoff.
    #[arg(long)]
    degree: Option<u32>,
    /// Override the Fourier truncation cap.
    #[arg(long)]
    kcap: Option<usize>,
    /// Override the convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Skip the ε0 ≤ γ0^p smallness gate (exploratory desk-scale runs).
    #[arg(long)]
    case_override: bool,
}

impl SpecArgs {
    fn resolve(&self) -> Result<SystemSpec, CliFailure> {
        let mut spec = if self.spec == "vdp" {
            default_vdp_spec(self.eps.unwrap_or(1e-6))
        } else {
            let text = std::fs::read_to_string(&self.spec).map_err(|e| {
                CliFailure::usage(format!("cannot read spec file {}: {e}", self.spec))
            })?;
            SystemSpec::from_json(&text).map_err(CliFailure::from)?
        };
        if let Some(v) = self.eps {
            spec.eps = v;
        }
        if let Some(v) = self.gamma0 {
            spec.gamma0 = v;
        }
        if let Some(v) = self.grid_n {
            spec.grid.n = v;
        }
        if let Some(v) = self.degree {
            spec.numerics.degree = v;
        }
        if let Some(v) = self.kcap {
            spec.numerics.kcap = v;
        }
        if let Some(v) = self.tol {
            spec.numerics.tol = v;
        }
        if self.case_override {
            spec.numerics.case_override = true;
        }
        spec.validate().map_err(CliFailure::from)?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the KAM iteration and emit the torus, ledgers, and a summary.
    Solve {
        #[command(flatten)]
        spec: SpecArgs,
        /// Maximum number of iteration steps.
        #[arg(long, default_value_t = 12)]
        max_steps: usize,
    },
    /// Emit the built-in van der Pol SystemSpec plus a center-basis report.
    Vdp {
        /// Forcing strength written into the emitted spec.
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Grid size of the basis report table.
        #[arg(long, default_value_t = 33)]
        report_n: usize,
        /// Also confirm the spectral gap per report row (slower).
        #[arg(long)]
        with_gap: bool,
    },
    /// Solve, then validate the torus by direct integration.
    Verify {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 12)]
        max_steps: usize,
        /// Shadowing horizon (default 20/ε^{1/4}, capped at 1e4).
        #[arg(long)]
        horizon: Option<f64>,
        /// Also shadow the full delay equation (van der Pol model only).
        #[arg(long)]
        dde: bool,
    },
    /// Tabulate removed parameter measure against halvings of γ0.
    Measure {
        #[command(flatten)]
        spec: SpecArgs,
        /// Number of γ0 halvings.
        #[arg(long, default_value_t = 4)]
        halvings: usize,
        /// Fourier cutoff of the exclusion test.
        #[arg(long, default_value_t = 64)]
        kcut: usize,
    },
    /// Amplitude-scaling sweep over a list of ε values.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// Comma-separated ε list.
        #[arg(long, default_value = "1e-8,1e-7,1e-6,1e-5", value_delimiter = ',')]
        eps_list: Vec<f64>,
        #[arg(long, default_value_t = 12)]
        max_steps: usize,
    },
    /// Brute-force Diophantine certificate for a frequency vector.
    Diophantine {
        /// Comma-separated frequency components.
        #[arg(long, value_delimiter = ',', required = true)]
        omega: Vec<f64>,
        #[arg(long, default_value_t = 0.2)]
        gamma: f64,
        /// Diophantine exponent (the construction fixes ι = n0 + 1).
        #[arg(long, default_value_t = 3.0)]
        iota: f64,
        /// Largest |k| checked.
        #[arg(long, default_value_t = 50)]
        k: usize,
    },
}

/// Failure carrying its process exit code.
struct CliFailure {
    code: u8,
    message: String,
}

impl CliFailure {
    fn usage(message: String) -> Self {
        CliFailure { code: 1, message }
    }
}

impl From<Error> for CliFailure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_) | Error::Config(_) | Error::Io(_) | Error::Serde(_) => 1,
            _ => 2,
        };
        CliFailure { code, message: e.to_string() }
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.17e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliFailure> {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliFailure::usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn run_ledger_csv(run: &RunResult) -> String {
    let mut s = String::from(
        "step,eps_nu,gamma_nu,k_nu,removed_measure,measure_after,valid_points,gnorm_before,\
         gnorm_after,fnorm_after,max_transform_norm,max_w10,max_reality_violation,max_dropped,\
         max_neumann_defect\n",
    );
    for r in &run.steps {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.nu,
            fmt_f(r.eps_nu),
            fmt_f(r.gamma_nu),
            r.k_nu,
            fmt_f(r.removed_measure),
            fmt_f(r.measure_after),
            r.valid_points,
            fmt_f(r.gnorm_before),
            fmt_f(r.gnorm_after),
            fmt_f(r.fnorm_after),
            fmt_f(r.max_transform_norm),
            fmt_f(r.max_w10),
            fmt_f(r.max_reality_violation),
            fmt_f(r.max_dropped),
            fmt_f(r.max_neumann_defect),
        );
    }
    s
}

fn measure_ledger_csv(run: &RunResult) -> String {
    let mut s = String::from("step,gamma_nu,k_nu,measure_before,measure_removed\n");
    for r in &run.steps {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.nu,
            fmt_f(r.gamma_nu),
            r.k_nu,
            fmt_f(r.measure_after + r.removed_measure),
            fmt_f(r.removed_measure),
        );
    }
    s
}

fn torus_csv(run: &RunResult) -> String {
    let sol = &run.solution;
    let mut header = String::from("a_index,a,component");
    for d in 1..=sol.n0 {
        let _ = write!(header, ",k{d}");
    }
    let mut s = format!("{header},re,im\n");
    for (i, emb) in sol.embedding.iter().enumerate() {
        let Some(emb) = emb else { continue };
        let a = sol.grid.value(i);
        for (j, series) in emb.iter().enumerate() {
            for (k, c) in series.iter() {
                let _ = write!(s, "{},{},{}", i, fmt_f(a), j + 1);
                for kd in k {
                    let _ = write!(s, ",{kd}");
                }
                let _ = writeln!(s, ",{},{}", fmt_f(c.re), fmt_f(c.im));
            }
        }
    }
    s
}

fn solution_summary(run: &RunResult) -> serde_json::Value {
    let sup = torus_amplitudes(&run.solution, 16);
    json!({
        "case": format!("{:?}", run.case),
        "gate_satisfied": run.gate_satisfied,
        "converged": run.converged,
        "steps": run.steps.len(),
        "final_gnorm": run.steps.last().map(|r| r.gnorm_after),
        "pi0_measure": run.pi0_measure,
        "final_measure": run.final_measure,
        "parameter_set": run.solution.set.intervals(),
        "reality_defect": run.solution.reality_defect(),
        "sup_v": sup,
        "eps": run.solution.eps,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("warning: thread pool already initialized; --threads ignored");
        }
    }
    let out = std::env::var_os("QPTORUS_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| cli.out.clone());
    match dispatch(&cli, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli, out: &Path) -> Result<(), CliFailure> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliFailure::usage(format!("cannot create {}: {e}", out.display())))?;
    let started = Instant::now();
    let mut outputs: Vec<String> = Vec::new();
    let config_echo: serde_json::Value;

    match &cli.command {
        Command::Solve { spec, max_steps } => {
            let sys_spec = spec.resolve()?;
            config_echo = json!({"command": "solve", "spec": sys_spec, "max_steps": max_steps});
            let run = solve_system(&sys_spec, *max_steps).map_err(CliFailure::from)?;
            for (name, text) in [
                ("run_ledger.csv", run_ledger_csv(&run)),
                ("measure_ledger.csv", measure_ledger_csv(&run)),
                ("torus_coefficients.csv", torus_csv(&run)),
                (
                    "summary.json",
                    serde_json::to_string_pretty(&solution_summary(&run)).unwrap(),
                ),
            ] {
                write_file(out, name, &text)?;
                outputs.push(name.into());
            }
            println!(
                "solve: case {:?}, {} steps, converged = {}, final measure {:.6} of {:.6}",
                run.case,
                run.steps.len(),
                run.converged,
                run.final_measure,
                run.pi0_measure
            );
            if !run.converged {
                return Err(CliFailure::from(Error::ValidationFailure(
                    "iteration did not reach tolerance within the step budget".into(),
                )));
            }
        }
        Command::Vdp { eps, report_n, with_gap } => {
            let sys_spec = default_vdp_spec(*eps);
            config_echo =
                json!({"command": "vdp", "eps": eps, "report_n": report_n, "with_gap": with_gap});
            write_file(out, "vdp_spec.json", &serde_json::to_string_pretty(&sys_spec).unwrap())?;
            outputs.push("vdp_spec.json".into());
            let mut csv =
                String::from("a,omega0,tau0,b2,b3,b2_alt,b3_alt,duality_error,spectral_gap\n");
            for i in 0..*report_n {
                let a = 0.25 + (1.25 - 0.25) * i as f64 / (*report_n as f64 - 1.0);
                let basis = build_basis(a).map_err(CliFailure::from)?;
                let gap = if *with_gap {
                    spectrum_gap(a, -10.0, 1.0, 40.0).map_err(CliFailure::from)?.gap
                } else {
                    f64::NAN
                };
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{}",
                    fmt_f(a),
                    fmt_f(basis.omega0),
                    fmt_f(basis.tau0),
                    fmt_f(basis.b2),
                    fmt_f(basis.b3),
                    fmt_f(basis.b2_alt),
                    fmt_f(basis.b3_alt),
                    fmt_f(basis.duality_error()),
                    fmt_f(gap),
                );
            }
            write_file(out, "basis_report.csv", &csv)?;
            outputs.push("basis_report.csv".into());
            println!("vdp: wrote spec and {report_n}-row basis report");
        }
        Command::Verify { spec, max_steps, horizon, dde } => {
            let sys_spec = spec.resolve()?;
            config_echo = json!({
                "command": "verify", "spec": sys_spec, "max_steps": max_steps,
                "horizon": horizon, "dde": dde
            });
            let run = solve_system(&sys_spec, *max_steps).map_err(CliFailure::from)?;
            let defect = ode_defect(&run.solution, &sys_spec).map_err(CliFailure::from)?;
            let i = run
                .solution
                .embedding
                .iter()
                .position(|e| e.is_some())
                .ok_or_else(|| CliFailure::from(Error::ValidationFailure(
                    "no surviving grid point to verify".into(),
                )))?;
            let shadow =
                shadow_check_ode(&run.solution, &sys_spec, i, *horizon).map_err(CliFailure::from)?;
            // trajectory CSV for the shadowed grid point
            let omega = &run.solution.omega[i];
            let emb = run.solution.embedding[i].as_ref().unwrap();
            let mut traj_csv = String::from("t,v1,v2,v3\n");
            let samples = 1000;
            for sidx in 0..=samples {
                let t = shadow.horizon * sidx as f64 / samples as f64;
                let phi: Vec<f64> = omega.iter().map(|w| w * t).collect();
                let _ = writeln!(
                    traj_csv,
                    "{},{},{},{}",
                    fmt_f(t),
                    fmt_f(emb[0].eval(&phi).re),
                    fmt_f(emb[1].eval(&phi).re),
                    fmt_f(emb[2].eval(&phi).re),
                );
            }
            write_file(out, "torus_trajectory.csv", &traj_csv)?;
            outputs.push("torus_trajectory.csv".into());
            let dde_report = if *dde {
                match &sys_spec.model {
                    ModelSpec::Vdp(cfg) => Some(
                        shadow_check_dde(&run.solution, cfg, i, *horizon)
                            .map_err(CliFailure::from)?,
                    ),
                    _ => {
                        return Err(CliFailure::usage(
                            "--dde requires the van der Pol model".into(),
                        ))
                    }
                }
            } else {
                None
            };
            let report = json!({
                "grid_index": i,
                "a": run.solution.grid.value(i),
                "ode_defect": defect.defect,
                "ode_shadow": shadow,
                "dde_shadow": dde_report,
                "run": solution_summary(&run),
            });
            write_file(out, "verify_report.json", &serde_json::to_string_pretty(&report).unwrap())?;
            outputs.push("verify_report.json".into());
            println!(
                "verify: defect {:.3e}, ODE shadow {:.3e} over T = {:.1}{}",
                defect.defect,
                shadow.shadow_error,
                shadow.horizon,
                dde_report
                    .as_ref()
                    .map(|r| format!(
                        ", DDE transient {:.3e} / plateau {:.3e}",
                        r.transient_error, r.plateau_error
                    ))
                    .unwrap_or_default()
            );
        }
        Command::Measure { spec, halvings, kcut } => {
            let sys_spec = spec.resolve()?;
            config_echo = json!({
                "command": "measure", "spec": sys_spec, "halvings": halvings, "kcut": kcut
            });
            let sys = sys_spec.build().map_err(CliFailure::from)?;
            let data = ResonanceData {
                grid: sys.grid,
                omega: sys.omega.clone(),
                om2_im: sys.points.iter().map(|p| p.omega2).collect(),
            };
            let pi0 = ParameterSet::interval(sys.grid.a_min, sys.grid.a_max);
            let mut csv = String::from("gamma,removed_measure,retained_measure\n");
            let (mut lg, mut lr) = (Vec::new(), Vec::new());
            for j in 0..=*halvings {
                let gamma = sys_spec.gamma0 / 2f64.powi(j as i32);
                let (set, removed) =
                    exclude_melnikov(&pi0, &data, gamma, *kcut, None).map_err(CliFailure::from)?;
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    fmt_f(gamma),
                    fmt_f(removed),
                    fmt_f(set.measure())
                );
                if removed > 0.0 {
                    lg.push(gamma.ln());
                    lr.push(removed.ln());
                }
            }
            let slope = if lg.len() >= 2 { fit_slope(&lg, &lr) } else { f64::NAN };
            write_file(out, "measure_sweep.csv", &csv)?;
            outputs.push("measure_sweep.csv".into());
            write_file(
                out,
                "measure_summary.json",
                &serde_json::to_string_pretty(&json!({"slope": slope})).unwrap(),
            )?;
            outputs.push("measure_summary.json".into());
            println!("measure: removed-measure slope vs γ is {slope:.3}");
        }
        Command::Sweep { spec, eps_list, max_steps } => {
            let sys_spec = spec.resolve()?;
            config_echo = json!({
                "command": "sweep", "spec": sys_spec, "eps_list": eps_list,
                "max_steps": max_steps
            });
            let rows = scaling_sweep(&sys_spec, eps_list, *max_steps);
            let mut csv = String::from("eps,converged,sup_v1,sup_v2,sup_v3,sup_total\n");
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    fmt_f(r.eps),
                    r.converged,
                    fmt_f(r.sup_v[0]),
                    fmt_f(r.sup_v[1]),
                    fmt_f(r.sup_v[2]),
                    fmt_f(r.sup_total),
                );
            }
            write_file(out, "sweep.csv", &csv)?;
            outputs.push("sweep.csv".into());
            let good: Vec<_> = rows.iter().filter(|r| r.converged).collect();
            let slopes: Vec<f64> = (0..3)
                .map(|j| {
                    let x: Vec<f64> = good.iter().map(|r| r.eps.ln()).collect();
                    let y: Vec<f64> = good.iter().map(|r| r.sup_v[j].ln()).collect();
                    if x.len() >= 2 { fit_slope(&x, &y) } else { f64::NAN }
                })
                .collect();
            let x: Vec<f64> = good.iter().map(|r| r.eps.ln()).collect();
            let y: Vec<f64> = good.iter().map(|r| r.sup_total.ln()).collect();
            let total = if x.len() >= 2 { fit_slope(&x, &y) } else { f64::NAN };
            write_file(
                out,
                "sweep_summary.json",
                &serde_json::to_string_pretty(&json!({
                    "component_slopes": slopes,
                    "total_slope": total,
                }))
                .unwrap(),
            )?;
            outputs.push("sweep_summary.json".into());
            println!("sweep: total amplitude slope {total:.4}, per-component {slopes:?}");
        }
        Command::Diophantine { omega, gamma, iota, k } => {
            config_echo = json!({
                "command": "diophantine", "omega": omega, "gamma": gamma,
                "iota": iota, "K": k
            });
            let cert = check_diophantine(omega, *gamma, *iota, *k);
            write_file(
                out,
                "diophantine.json",
                &serde_json::to_string_pretty(&cert).unwrap(),
            )?;
            outputs.push("diophantine.json".into());
            println!(
                "diophantine: worst ratio {:.6e} at k = {:?} (need ≥ {:.3e}): {}",
                cert.worst_ratio,
                cert.worst_k,
                gamma,
                if cert.valid() { "pass" } else { "FAIL" }
            );
            if !cert.valid() {
                return Err(CliFailure::from(Error::ValidationFailure(format!(
                    "Diophantine bound fails at k = {:?}",
                    cert.worst_k
                ))));
            }
        }
    }

    let manifest = json!({
        "config": config_echo,
        "seed": cli.seed,
        "threads": cli.threads,
        "versions": {
            "qptorus": env!("CARGO_PKG_VERSION"),
        },
        "wall_time_s": started.elapsed().as_secs_f64(),
        "outputs": outputs,
    });
    write_file(out, "manifest.json", &serde_json::to_string_pretty(&manifest).unwrap())?;
    Ok(())
}
