//! The three subcommands: sample, synthesize, verify.
//!
//! Exit-code policy, reflected in [`CliError::code`]: configuration and
//! input problems exit 2, a search that certifies nothing exits 3, and a
//! verification that finds a broken certificate or failing audit exits 4.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use robsyn::model::LftSystem;
use robsyn::model::BoxRegion;
use robsyn::sampling::{infer_structure, sample_grid, InferredStructure, SampleSet};
use robsyn::synthesis::{SynthesisEvent, Synthesizer};
use robsyn::verify::{
    audit_trajectory, boundary_initial_states, check_certificate, simulate,
    write_phase_portrait_csv, SimOptions,
};
use serde::Serialize;

use crate::config::{executable_oracle, OracleKind, RunConfig};
use crate::report::{self, Report};

/// Relative tolerance below which a sampled response row is treated as
/// structurally zero when inferring channels.
const STRUCTURE_ZERO_TOL: f64 = 1e-12;
/// Norm at which a simulated trajectory is declared divergent.
const DIVERGENCE_NORM: f64 = 1e3;
/// Endpoint norm below which a trajectory counts as converged.
const CONVERGENCE_NORM: f64 = 1e-3;
/// Grid points per axis in the phase-portrait export.
const PHASE_GRID: usize = 25;

#[derive(Debug)]
pub enum CliError {
    /// Malformed flags or option values.
    Usage(String),
    /// Missing or inconsistent input files and configurations.
    Input(String),
    /// The search finished without certifying anything.
    Synthesis(String),
    /// A certificate check or trajectory audit failed.
    Verification(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Synthesis(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m)
            | CliError::Input(m)
            | CliError::Synthesis(m)
            | CliError::Verification(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", dir.display())))
}

/// Obtain the sample set for a configuration: evaluate the executable
/// nonlinearity on the grid, or load the recorded CSV for data systems.
fn obtain_samples(config: &RunConfig) -> Result<(SampleSet, String), CliError> {
    match &config.oracle {
        OracleKind::Data { samples } => {
            if !samples.exists() {
                return Err(CliError::Input(format!(
                    "samples file not found: {}",
                    samples.display()
                )));
            }
            let file = std::fs::File::open(samples)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", samples.display())))?;
            let set = SampleSet::read_csv(std::io::BufReader::new(file))
                .map_err(|e| CliError::Input(format!("{}: {e}", samples.display())))?;
            let desc = format!("loaded {} samples from {}", set.len(), samples.display());
            Ok((set, desc))
        }
        kind => {
            let oracle = kind
                .executable(config.nx())
                .expect("non-data oracles are executable");
            let x_box = BoxRegion::symmetric(&config.x_extent)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let u_box = BoxRegion::symmetric(&config.u_extent)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let (counts_x, counts_u) = config.grid_counts();
            let set = sample_grid(oracle.as_ref(), &x_box, &u_box, &counts_x, &counts_u)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let grid_desc: Vec<String> =
                config.grid.iter().map(|c| c.to_string()).collect();
            let desc =
                format!("sampled {} points over a {} grid", set.len(), grid_desc.join("x"));
            Ok((set, desc))
        }
    }
}

fn describe_structure(structure: &InferredStructure, nx: usize) -> String {
    let mut lines = vec![format!("inferred structure: n_w = {}", structure.n_channels())];
    for (i, &row) in structure.nonzero_rows.iter().enumerate() {
        let drivers: Vec<String> = structure.dependence[i]
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(c, _)| {
                if c < nx {
                    format!("x{}", c + 1)
                } else {
                    format!("u{}", c - nx + 1)
                }
            })
            .collect();
        let drivers = if drivers.is_empty() { "none".into() } else { drivers.join(", ") };
        lines.push(format!(
            "  channel {} -> state equation {}, drivers: {}",
            i + 1,
            row + 1,
            drivers
        ));
    }
    lines.join("\n")
}

pub fn cmd_sample(config: &RunConfig) -> Result<(), CliError> {
    ensure_out_dir(&config.out_dir)?;
    let (samples, desc) = obtain_samples(config)?;
    let structure = infer_structure(&samples, STRUCTURE_ZERO_TOL);

    let path = config.out_dir.join("samples.csv");
    let file = std::fs::File::create(&path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    samples
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;

    println!("{desc}");
    println!("{}", describe_structure(&structure, config.nx()));
    println!("wrote {}", path.display());
    Ok(())
}

fn assemble(config: &RunConfig, structure: &InferredStructure) -> Result<LftSystem, CliError> {
    structure
        .assemble_system(config.a.clone(), config.b1.clone(), config.x0.clone(), config.u0.clone())
        .map_err(|e| CliError::Input(format!("system assembly failed: {e}")))
}

pub fn cmd_synthesize(config: &RunConfig) -> Result<(), CliError> {
    ensure_out_dir(&config.out_dir)?;
    let (samples, desc) = obtain_samples(config)?;
    println!("{desc}");
    let structure = infer_structure(&samples, STRUCTURE_ZERO_TOL);
    println!("{}", describe_structure(&structure, config.nx()));
    let sys = assemble(config, &structure)?;

    let synthesizer = Synthesizer::new(&sys, &samples, &structure, config.synthesis.clone())
        .map_err(|e| CliError::Input(e.to_string()))?;

    let log_path = config.out_dir.join("run_log.jsonl");
    let log_file = std::fs::File::create(&log_path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", log_path.display())))?;
    let mut log = std::io::BufWriter::new(log_file);
    let mut log_error: Option<std::io::Error> = None;

    let outcome = {
        let mut on_event = |event: SynthesisEvent| {
            if log_error.is_none() {
                let line = serde_json::to_string(&event).expect("events serialize");
                if let Err(e) = writeln!(log, "{line}") {
                    log_error = Some(e);
                }
            }
            match &event {
                SynthesisEvent::SearchStarted { cap, constrained, budgets } => {
                    println!(
                        "search: {} budgets, scale cap {:.6}, input constraint {}",
                        budgets,
                        cap,
                        if *constrained { "on" } else { "off" }
                    );
                }
                SynthesisEvent::BudgetFinished { r, certified_alpha, attempts } => {
                    match certified_alpha {
                        Some(alpha) => {
                            println!("r = {r:.6}: certified alpha = {alpha:.6} ({attempts} attempts)")
                        }
                        None => println!("r = {r:.6}: nothing certified ({attempts} attempts)"),
                    }
                }
                _ => {}
            }
        };
        synthesizer
            .run_with_events(&mut on_event)
            .map_err(|e| CliError::Synthesis(e.to_string()))?
    };
    log.flush().ok();
    if let Some(e) = log_error {
        return Err(CliError::Input(format!("cannot write {}: {e}", log_path.display())));
    }

    let report = report::build(config, &sys, &outcome);
    let report_path = config.out_dir.join("report.json");
    report.write(&report_path)?;
    println!("wrote {}", report_path.display());
    println!("wrote {}", log_path.display());

    match &report.best {
        Some(best) => {
            println!(
                "best: r = {:.6}, alpha = {:.6}, tau = {:.6}, rounds = {}",
                best.r, best.alpha, best.tau, best.rounds
            );
            let gamma: Vec<String> = best.gamma.iter().map(|g| format!("{g:.6}")).collect();
            println!("gains gamma = [{}]", gamma.join(", "));
            let k_rows: Vec<String> = best
                .k
                .iter()
                .map(|row| {
                    let entries: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
                    format!("[{}]", entries.join(", "))
                })
                .collect();
            println!("feedback K = {}", k_rows.join(" "));
            Ok(())
        }
        None => {
            let mut failures = std::collections::BTreeMap::new();
            for rec in &report.records {
                for trial in &rec.trials {
                    *failures.entry(trial.outcome.clone()).or_insert(0usize) += 1;
                }
            }
            let detail: Vec<String> =
                failures.into_iter().map(|(k, v)| format!("{k} x{v}")).collect();
            Err(CliError::Synthesis(format!(
                "no (r, alpha) pair certified; attempt outcomes: {}; see {}",
                detail.join(", "),
                log_path.display()
            )))
        }
    }
}

#[derive(Debug, Serialize)]
struct TrajectorySummary {
    index: usize,
    initial: Vec<f64>,
    endpoint_norm: f64,
    nodes_in_region: usize,
    input_ok: bool,
    qc_ok: bool,
    decrease_ok: bool,
    diverged: bool,
    converged: bool,
    first_violation: Option<(f64, String)>,
    csv: String,
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    report: String,
    system: String,
    certificate_ok: bool,
    stability_ok: bool,
    lyapunov_ok: bool,
    input_block_ok: bool,
    multipliers_ok: bool,
    budget_ok: bool,
    trajectories: Vec<TrajectorySummary>,
    pass: bool,
}

pub fn cmd_verify(
    out_dir: &Path,
    report_path: Option<&Path>,
    expected_system: Option<&str>,
) -> Result<(), CliError> {
    let default_path = out_dir.join("report.json");
    let path: PathBuf = report_path.map_or(default_path, Path::to_path_buf);
    let report = Report::read(&path)?;

    // The report is authoritative; an explicit --system must agree with it.
    if let Some(expected) = expected_system {
        let stem = Path::new(expected)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| expected.to_string());
        if report.system.name != expected && report.system.name != stem {
            return Err(CliError::Input(format!(
                "report {} records system '{}', not '{expected}'",
                path.display(),
                report.system.name
            )));
        }
    }

    let sys = report.system()?;
    let cert = report.certificate()?.ok_or_else(|| {
        CliError::Input(format!(
            "{}: report has no certified solution to verify",
            path.display()
        ))
    })?;
    let Some(oracle) = executable_oracle(&report.system.oracle, sys.nx()) else {
        return Err(CliError::Input(format!(
            "system '{}' was synthesized from recorded samples; trajectory verification \
             needs an executable nonlinearity (builtin systems only)",
            report.system.name
        )));
    };
    ensure_out_dir(out_dir)?;

    let check = check_certificate(&sys, &cert).map_err(|e| CliError::Input(e.to_string()))?;
    let m = &check.margins;
    let line = |ok: bool| if ok { "pass" } else { "FAIL" };
    println!("certificate check:");
    println!(
        "  stability block: max eig = {:+.3e} (need <= -1e-8): {}",
        m.stability_max_eig,
        line(check.stability_ok)
    );
    println!(
        "  Lyapunov matrix: min eig = {:+.3e} (need > 0): {}",
        m.p_min_eig,
        line(check.lyapunov_ok)
    );
    println!(
        "  input-gain block: min eig = {:+.3e} (need >= -1e-8): {}",
        m.input_min_eig,
        line(check.input_block_ok)
    );
    println!(
        "  multipliers: min = {:+.3e} (need > 0): {}",
        m.lambda_min,
        line(check.multipliers_ok)
    );
    println!(
        "  input level: tau = {:.6}, budget r = {:.6}: {}",
        m.tau,
        cert.region.r(),
        line(check.budget_ok)
    );

    let opts = SimOptions {
        dt: report.settings.dt,
        t_final: report.settings.t_final,
        divergence_norm: DIVERGENCE_NORM,
    };
    let initial_states =
        boundary_initial_states(cert.region.w(), report.settings.initial_conditions);

    let mut summaries = Vec::with_capacity(initial_states.len());
    for (i, x0) in initial_states.iter().enumerate() {
        let traj = simulate(&sys, oracle.as_ref(), &cert.k, &cert.p, x0, &opts)
            .map_err(|e| CliError::Input(format!("simulation failed: {e}")))?;
        let audit = audit_trajectory(&sys, &cert, oracle.as_ref(), &traj)
            .map_err(|e| CliError::Input(format!("audit failed: {e}")))?;

        let csv_name = format!("trajectory_{:02}.csv", i + 1);
        let csv_path = out_dir.join(&csv_name);
        let file = std::fs::File::create(&csv_path)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", csv_path.display())))?;
        traj.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| CliError::Input(format!("{}: {e}", csv_path.display())))?;

        let converged = !audit.diverged && audit.endpoint_norm < CONVERGENCE_NORM;
        let ok = audit.all_ok() && converged;
        println!(
            "trajectory {:2}: |x(T)| = {:.3e}, in-region nodes = {}, audits {}{}",
            i + 1,
            audit.endpoint_norm,
            audit.nodes_in_region,
            line(ok),
            audit
                .first_violation
                .as_ref()
                .map(|(t, what)| format!(" (first violation at t = {t:.4}: {what})"))
                .unwrap_or_default()
        );
        summaries.push(TrajectorySummary {
            index: i + 1,
            initial: x0.iter().copied().collect(),
            endpoint_norm: audit.endpoint_norm,
            nodes_in_region: audit.nodes_in_region,
            input_ok: audit.input_ok,
            qc_ok: audit.qc_ok,
            decrease_ok: audit.decrease_ok,
            diverged: audit.diverged,
            converged,
            first_violation: audit.first_violation.clone(),
            csv: csv_name,
        });
    }

    let phase_path = out_dir.join("phase_portrait.csv");
    let file = std::fs::File::create(&phase_path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", phase_path.display())))?;
    write_phase_portrait_csv(
        &sys,
        oracle.as_ref(),
        &cert.k,
        &cert.region,
        PHASE_GRID,
        std::io::BufWriter::new(file),
    )
    .map_err(|e| CliError::Input(format!("{}: {e}", phase_path.display())))?;
    println!("wrote {}", phase_path.display());

    let all_trajectories_ok = summaries
        .iter()
        .all(|s| s.input_ok && s.qc_ok && s.decrease_ok && !s.diverged && s.converged);
    let pass = check.all_ok() && all_trajectories_ok;

    let summary = VerifySummary {
        report: path.display().to_string(),
        system: report.system.name.clone(),
        certificate_ok: check.all_ok(),
        stability_ok: check.stability_ok,
        lyapunov_ok: check.lyapunov_ok,
        input_block_ok: check.input_block_ok,
        multipliers_ok: check.multipliers_ok,
        budget_ok: check.budget_ok,
        trajectories: summaries,
        pass,
    };
    let summary_path = out_dir.join("verify_summary.json");
    let file = std::fs::File::create(&summary_path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", summary_path.display())))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &summary)
        .map_err(|e| CliError::Input(format!("cannot encode {}: {e}", summary_path.display())))?;
    println!("wrote {}", summary_path.display());

    if pass {
        println!("verification: PASS");
        Ok(())
    } else {
        println!("verification: FAIL");
        Err(CliError::Verification(if check.all_ok() {
            "trajectory audits failed; see verify_summary.json".into()
        } else {
            "certificate check failed; see verify_summary.json".into()
        }))
    }
}
