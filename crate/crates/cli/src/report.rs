//! Synthesis report: a versioned JSON document that records the system
//! realization, the search settings, the per-budget traces, and the best
//! certified solution with its full certificate. The verification command
//! reads exactly what the synthesis command wrote, so every matrix is
//! stored entry for entry (JSON floats round-trip `f64` exactly).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use robsyn::model::{Certificate, ConstrainInput, EllipsoidBallRegion, LftSystem};
use robsyn::synthesis::{CertificateMargins, CertifiedPoint, SynthesisOutcome};
use serde::{Deserialize, Serialize};

use crate::commands::CliError;
use crate::config::{self, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub system: SystemRecord,
    pub settings: SettingsRecord,
    /// Resolved input-constraint mode of the search.
    pub constrained: bool,
    /// Largest scale keeping the state ellipsoid inside the sampled box.
    pub alpha_cap: f64,
    pub records: Vec<BudgetRecordJson>,
    pub best: Option<BestRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SystemRecord {
    pub name: String,
    /// Nonlinearity id: example1, example2, zero, or data.
    pub oracle: String,
    pub a: Vec<Vec<f64>>,
    pub b1: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
    pub c: Vec<Vec<Vec<f64>>>,
    pub d: Vec<Vec<Vec<f64>>>,
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SettingsRecord {
    pub x_extent: Vec<f64>,
    pub u_extent: Vec<f64>,
    pub grid: Vec<usize>,
    pub r_grid: Vec<f64>,
    pub w0: Vec<Vec<f64>>,
    pub alpha0: Option<f64>,
    pub alpha_tol: f64,
    pub growth: f64,
    pub n_max: usize,
    /// Requested mode (auto may appear here; `constrained` is resolved).
    pub constrain_input: String,
    pub v_floor: f64,
    pub dt: f64,
    pub t_final: f64,
    pub initial_conditions: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BudgetRecordJson {
    pub r: f64,
    pub certified_alpha: Option<f64>,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub alpha: f64,
    pub outcome: String,
    pub certified: bool,
    pub tau: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BestRecord {
    pub r: f64,
    pub alpha: f64,
    /// Objective value of the final design stage.
    pub beta: f64,
    pub rounds: usize,
    pub gamma: Vec<f64>,
    pub tau: f64,
    pub k: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    /// Certified state-ellipsoid shape (already scaled by alpha).
    pub w: Vec<Vec<f64>>,
    /// Resolved mode the certificate was checked under: on or off.
    pub constrain_input: String,
    pub margins: MarginsRecord,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MarginsRecord {
    pub stability_max_eig: f64,
    pub p_min_eig: f64,
    pub input_min_eig: f64,
    pub lambda_min: f64,
    pub tau: f64,
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

impl From<&CertificateMargins> for MarginsRecord {
    fn from(m: &CertificateMargins) -> Self {
        Self {
            stability_max_eig: m.stability_max_eig,
            p_min_eig: m.p_min_eig,
            input_min_eig: m.input_min_eig,
            lambda_min: m.lambda_min,
            tau: m.tau,
        }
    }
}

fn best_record(r: f64, point: &CertifiedPoint) -> BestRecord {
    let cert = &point.certificate;
    BestRecord {
        r,
        alpha: point.alpha,
        beta: point.beta,
        rounds: point.rounds,
        gamma: cert.gamma.clone(),
        tau: cert.tau,
        k: matrix_rows(&cert.k),
        p: matrix_rows(&cert.p),
        lambda: cert.lambda.iter().copied().collect(),
        w: matrix_rows(cert.region.w()),
        constrain_input: config::constrain_input_id(cert.region.constrain_input).into(),
        margins: (&point.margins).into(),
    }
}

/// Assemble the report for a finished search.
pub fn build(config: &RunConfig, sys: &LftSystem, outcome: &SynthesisOutcome) -> Report {
    let records = outcome
        .records
        .iter()
        .map(|rec| BudgetRecordJson {
            r: rec.r,
            certified_alpha: rec.certified.as_ref().map(|c| c.alpha),
            trials: rec
                .trials
                .iter()
                .map(|t| TrialRecord {
                    alpha: t.alpha,
                    outcome: t.outcome.clone(),
                    certified: t.certified,
                    tau: t.tau,
                })
                .collect(),
        })
        .collect();
    let best = outcome
        .best_record()
        .and_then(|rec| rec.certified.as_ref().map(|point| best_record(rec.r, point)));

    Report {
        schema_version: SCHEMA_VERSION,
        system: SystemRecord {
            name: config.name.clone(),
            oracle: config.oracle.id().into(),
            a: matrix_rows(&config.a),
            b1: matrix_rows(&config.b1),
            b2: matrix_rows(&sys.b2),
            c: sys.c.iter().map(matrix_rows).collect(),
            d: sys.d.iter().map(matrix_rows).collect(),
            x0: config.x0.iter().copied().collect(),
            u0: config.u0.iter().copied().collect(),
        },
        settings: SettingsRecord {
            x_extent: config.x_extent.clone(),
            u_extent: config.u_extent.clone(),
            grid: config.grid.clone(),
            r_grid: config.synthesis.r_grid.clone(),
            w0: matrix_rows(&config.synthesis.w0),
            alpha0: config.synthesis.alpha0,
            alpha_tol: config.synthesis.alpha_rel_tol,
            growth: config.synthesis.alpha_growth,
            n_max: config.synthesis.n_max,
            constrain_input: config::constrain_input_id(config.synthesis.constrain_input).into(),
            v_floor: config.synthesis.v_floor,
            dt: config.sim.dt,
            t_final: config.sim.t_final,
            initial_conditions: config.sim.initial_conditions,
        },
        constrained: outcome.constrained,
        alpha_cap: outcome.cap,
        records,
        best,
    }
}

impl Report {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| CliError::Input(format!("cannot encode {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        if !path.exists() {
            return Err(CliError::Input(format!("report not found: {}", path.display())));
        }
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let report: Report = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "{}: schema version {} unsupported (expected {})",
                path.display(),
                report.schema_version,
                SCHEMA_VERSION
            )));
        }
        Ok(report)
    }

    fn to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
        config::rows_to_matrix(name, rows)
    }

    /// Rebuild the plant exactly as recorded.
    pub fn system(&self) -> Result<LftSystem, CliError> {
        let a = Self::to_matrix("a", &self.system.a)?;
        let b1 = Self::to_matrix("b1", &self.system.b1)?;
        // A plant with no channels has an nx x 0 selector, which the
        // strict matrix parser would reject as empty.
        let b2 = if self.system.c.is_empty() {
            DMatrix::zeros(a.nrows(), 0)
        } else {
            Self::to_matrix("b2", &self.system.b2)?
        };
        let c = self
            .system
            .c
            .iter()
            .map(|m| Self::to_matrix("c", m))
            .collect::<Result<Vec<_>, _>>()?;
        let d = self
            .system
            .d
            .iter()
            .map(|m| Self::to_matrix("d", m))
            .collect::<Result<Vec<_>, _>>()?;
        LftSystem::new(
            a,
            b1,
            b2,
            c,
            d,
            DVector::from_vec(self.system.x0.clone()),
            DVector::from_vec(self.system.u0.clone()),
        )
        .map_err(|e| CliError::Input(format!("report system is inconsistent: {e}")))
    }

    /// Rebuild the best certificate, if the search found one.
    pub fn certificate(&self) -> Result<Option<Certificate>, CliError> {
        let Some(best) = &self.best else {
            return Ok(None);
        };
        let w = Self::to_matrix("w", &best.w)?;
        let constrain = match best.constrain_input.as_str() {
            "on" => ConstrainInput::On,
            "off" => ConstrainInput::Off,
            other => {
                return Err(CliError::Input(format!(
                    "report certificate has unresolved constraint mode '{other}'"
                )))
            }
        };
        let region = EllipsoidBallRegion::new(w, best.r, constrain)
            .map_err(|e| CliError::Input(format!("report region is invalid: {e}")))?;
        Ok(Some(Certificate {
            p: Self::to_matrix("p", &best.p)?,
            k: Self::to_matrix("k", &best.k)?,
            lambda: DVector::from_vec(best.lambda.clone()),
            tau: best.tau,
            region,
            gamma: best.gamma.clone(),
        }))
    }
}
