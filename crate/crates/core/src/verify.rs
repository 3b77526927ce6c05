//! Closed-loop verification: simulation of the true nonlinear dynamics
//! under the synthesized gain, with pointwise audits of everything the
//! certificate asserts.
//!
//! The simulated system is `dx' = A dx + B1 u + delta(dx, du)` with
//! `u = K dx`, where `delta` is the actual nonlinearity (not its sampled
//! surrogate). Audits run at every recorded step while the state is inside
//! the certified region:
//!
//! - the input stays within the budget (constrained mode);
//! - each channel satisfies its quadratic gain bound;
//! - the Lyapunov function decreases.
//!
//! Because the empirical gains come from finitely many samples, these
//! audits are the honest check that the certificate's premises hold along
//! the trajectories the closed loop actually produces.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{region_membership, Certificate, ConstrainInput, LftSystem, ModelError};
use crate::sampling::DeltaOracle;
use crate::synthesis::{certificate_margins, CertificateMargins, SynthesisError};

/// Stability margin a certificate must show on direct re-assembly.
const STABILITY_EIG_TOL: f64 = 1e-8;
/// Allowed numerical slack on the input-gain block.
const INPUT_EIG_TOL: f64 = 1e-8;
/// Allowed slack on the realized input level against the budget.
const TAU_TOL: f64 = 1e-9;
/// Relative slack on the per-channel quadratic gain bound.
const QC_REL_SLACK: f64 = 1e-9;
/// Per-step Lyapunov decrease slack, relative to the peak value.
const DECREASE_REL_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("initial state has {got} entries, system has {expected} states")]
    InitialStateDim { expected: usize, got: usize },
    #[error("nonlinearity returned {got} entries, expected {expected}")]
    OracleOutput { expected: usize, got: usize },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Norm at which integration stops and the run is flagged divergent.
    pub divergence_norm: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dt: 1e-3, t_final: 30.0, divergence_norm: 1e3 }
    }
}

/// A fixed-step closed-loop run. All vectors have one entry per recorded
/// node, including the initial condition.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    /// Lyapunov values `x^T P x` along the run.
    pub lyapunov: Vec<f64>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn endpoint(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial node")
    }

    pub fn endpoint_norm(&self) -> f64 {
        self.endpoint().norm()
    }

    /// Plain CSV: `t`, states, inputs, Lyapunov value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), VerifyError> {
        let nx = self.states.first().map_or(0, |s| s.len());
        let nu = self.inputs.first().map_or(0, |u| u.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=nx).map(|i| format!("x_{i}")));
        header.extend((1..=nu).map(|i| format!("u_{i}")));
        header.push("V".into());
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = Vec::with_capacity(1 + nx + nu + 1);
            row.push(format!("{:.16e}", self.times[k]));
            row.extend(self.states[k].iter().map(|v| format!("{v:.16e}")));
            row.extend(self.inputs[k].iter().map(|v| format!("{v:.16e}")));
            row.push(format!("{:.16e}", self.lyapunov[k]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrate the closed loop with classical fourth-order Runge-Kutta.
///
/// The feedback is evaluated inside each stage, so the integrated field is
/// exactly the autonomous closed loop. `p` only scores the Lyapunov value
/// at the recorded nodes.
pub fn simulate(
    sys: &LftSystem,
    oracle: &dyn DeltaOracle,
    k: &DMatrix<f64>,
    p: &DMatrix<f64>,
    x0: &DVector<f64>,
    opts: &SimOptions,
) -> Result<Trajectory, VerifyError> {
    let nx = sys.nx();
    if x0.len() != nx {
        return Err(VerifyError::InitialStateDim { expected: nx, got: x0.len() });
    }

    let field = |x: &DVector<f64>| -> Result<DVector<f64>, VerifyError> {
        let u = k * x;
        let delta = oracle.eval(x, &u);
        if delta.len() != nx {
            return Err(VerifyError::OracleOutput { expected: nx, got: delta.len() });
        }
        Ok(&sys.a * x + &sys.b1 * u + delta)
    };

    let steps = (opts.t_final / opts.dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut lyapunov = Vec::with_capacity(steps + 1);
    let mut diverged = false;

    let mut x = x0.clone();
    let mut t = 0.0;
    let record =
        |x: &DVector<f64>,
         t: f64,
         times: &mut Vec<f64>,
         states: &mut Vec<DVector<f64>>,
         inputs: &mut Vec<DVector<f64>>,
         lyapunov: &mut Vec<f64>| {
            times.push(t);
            inputs.push(k * x);
            lyapunov.push((x.transpose() * p * x)[(0, 0)]);
            states.push(x.clone());
        };
    record(&x, t, &mut times, &mut states, &mut inputs, &mut lyapunov);

    let h = opts.dt;
    for step in 1..=steps {
        let k1 = field(&x)?;
        let k2 = field(&(&x + &k1 * (0.5 * h)))?;
        let k3 = field(&(&x + &k2 * (0.5 * h)))?;
        let k4 = field(&(&x + &k3 * h))?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t = step as f64 * h;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(VerifyError::NonFiniteState { t });
        }
        record(&x, t, &mut times, &mut states, &mut inputs, &mut lyapunov);
        if x.norm() > opts.divergence_norm {
            diverged = true;
            break;
        }
    }

    Ok(Trajectory { times, states, inputs, lyapunov, diverged })
}

/// Pointwise audit of a trajectory against a certificate.
#[derive(Debug, Clone)]
pub struct AuditReport {
    /// Nodes at which the state was inside the certified region.
    pub nodes_in_region: usize,
    /// Input stayed within the budget at every in-region node (always
    /// true when the certificate is unconstrained).
    pub input_ok: bool,
    /// Every channel satisfied its quadratic gain bound at every
    /// in-region node.
    pub qc_ok: bool,
    /// The Lyapunov value decreased across every in-region step.
    pub decrease_ok: bool,
    pub diverged: bool,
    pub endpoint_norm: f64,
    /// First audit violation, if any, as (time, description).
    pub first_violation: Option<(f64, String)>,
}

impl AuditReport {
    pub fn all_ok(&self) -> bool {
        self.input_ok && self.qc_ok && self.decrease_ok && !self.diverged
    }
}

/// Re-evaluate the certificate's premises along a recorded run.
///
/// `oracle` must be the same nonlinearity the trajectory was produced
/// with; it is re-queried at the recorded nodes to score the quadratic
/// constraints.
pub fn audit_trajectory(
    sys: &LftSystem,
    cert: &Certificate,
    oracle: &dyn DeltaOracle,
    traj: &Trajectory,
) -> Result<AuditReport, VerifyError> {
    let nx = sys.nx();
    let constrained = matches!(cert.region.constrain_input, ConstrainInput::On)
        || (matches!(cert.region.constrain_input, ConstrainInput::Auto)
            && ConstrainInput::Auto.resolved(sys));
    // Channel rows: the unit column of b2 locates each channel's equation.
    let rows: Vec<usize> = (0..sys.nw())
        .map(|i| (0..nx).find(|&r| sys.b2[(r, i)] != 0.0).expect("channel has a target row"))
        .collect();

    let v_max = traj.lyapunov.iter().fold(0.0f64, |m, &v| m.max(v));
    let decrease_tol = DECREASE_REL_SLACK * v_max.max(1e-300);

    let mut report = AuditReport {
        nodes_in_region: 0,
        input_ok: true,
        qc_ok: true,
        decrease_ok: true,
        diverged: traj.diverged,
        endpoint_norm: traj.endpoint_norm(),
        first_violation: None,
    };
    let note = |report: &mut AuditReport, t: f64, what: String| {
        if report.first_violation.is_none() {
            report.first_violation = Some((t, what));
        }
    };

    let mut prev_in_region = false;
    let mut prev_v = f64::NAN;
    for k in 0..traj.len() {
        let x = &traj.states[k];
        let u = &traj.inputs[k];
        let t = traj.times[k];
        let inside = region_membership(&cert.region, x, u);
        if inside {
            report.nodes_in_region += 1;
            if constrained && u.norm() > cert.region.r() + TAU_TOL {
                if report.input_ok {
                    note(&mut report, t, format!("input norm {} above budget", u.norm()));
                }
                report.input_ok = false;
            }
            let delta = oracle.eval(x, u);
            if delta.len() != nx {
                return Err(VerifyError::OracleOutput { expected: nx, got: delta.len() });
            }
            for (i, &row) in rows.iter().enumerate() {
                let w = delta[row];
                let v = &sys.c[i] * x + &sys.d[i] * u;
                let bound = cert.gamma[i] * cert.gamma[i] * v.norm_squared();
                if w * w > bound * (1.0 + QC_REL_SLACK) + f64::MIN_POSITIVE {
                    if report.qc_ok {
                        note(
                            &mut report,
                            t,
                            format!("channel {i}: w^2 = {:.6e} above gain bound {bound:.6e}", w * w),
                        );
                    }
                    report.qc_ok = false;
                }
            }
            if prev_in_region {
                let v_now = traj.lyapunov[k];
                if v_now - prev_v > decrease_tol {
                    if report.decrease_ok {
                        note(
                            &mut report,
                            t,
                            format!("Lyapunov value rose by {:.6e}", v_now - prev_v),
                        );
                    }
                    report.decrease_ok = false;
                }
            }
        }
        prev_in_region = inside;
        prev_v = traj.lyapunov[k];
    }
    Ok(report)
}

/// Pass/fail view of the certificate's inequalities, re-assembled from
/// scratch at the stored matrices.
#[derive(Debug, Clone)]
pub struct CertificateCheck {
    pub margins: CertificateMargins,
    pub stability_ok: bool,
    pub lyapunov_ok: bool,
    pub input_block_ok: bool,
    pub multipliers_ok: bool,
    /// Realized input level within budget; trivially true when the
    /// certificate is unconstrained.
    pub budget_ok: bool,
}

impl CertificateCheck {
    pub fn all_ok(&self) -> bool {
        self.stability_ok
            && self.lyapunov_ok
            && self.input_block_ok
            && self.multipliers_ok
            && self.budget_ok
    }
}

pub fn check_certificate(sys: &LftSystem, cert: &Certificate) -> Result<CertificateCheck, VerifyError> {
    let margins = certificate_margins(sys, cert)?;
    let constrained = matches!(cert.region.constrain_input, ConstrainInput::On);
    Ok(CertificateCheck {
        stability_ok: margins.stability_max_eig <= -STABILITY_EIG_TOL,
        lyapunov_ok: margins.p_min_eig > 0.0,
        input_block_ok: margins.input_min_eig >= -INPUT_EIG_TOL,
        multipliers_ok: margins.lambda_min > 0.0,
        budget_ok: !constrained || margins.tau <= cert.region.r() + TAU_TOL,
        margins,
    })
}

/// Equally spaced initial states on the boundary of the certified state
/// ellipsoid: images of unit directions under the shape matrix.
pub fn boundary_initial_states(w: &DMatrix<f64>, count: usize) -> Vec<DVector<f64>> {
    let nx = w.nrows();
    match nx {
        1 => {
            let mut out = Vec::new();
            for i in 0..count {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                out.push(w * DVector::from_element(1, sign));
            }
            out
        }
        2 => (0..count)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                w * DVector::from_vec(vec![theta.cos(), theta.sin()])
            })
            .collect(),
        _ => {
            // Deterministic low-discrepancy directions for higher
            // dimensions: golden-ratio strides through the angles.
            let phi = 0.5 * (1.0 + 5.0f64.sqrt());
            (0..count)
                .map(|i| {
                    let mut dir = DVector::from_fn(nx, |j, _| {
                        (phi * (i as f64 + 1.0) * (j as f64 + 1.0)).sin()
                    });
                    let n = dir.norm();
                    if n > 0.0 {
                        dir /= n;
                    } else {
                        dir[0] = 1.0;
                    }
                    w * dir
                })
                .collect()
        }
    }
}

/// Closed-loop vector field sampled on a regular grid over the certified
/// state ellipsoid, for phase-portrait plotting. Each row pairs a state
/// with the field value there: `x1, .., x_nx, dx1, .., dx_nx`. Grid points
/// outside the ellipsoid are skipped.
pub fn write_phase_portrait_csv<W: Write>(
    sys: &LftSystem,
    oracle: &dyn DeltaOracle,
    k: &DMatrix<f64>,
    region: &crate::model::EllipsoidBallRegion,
    per_axis: usize,
    mut out: W,
) -> Result<(), VerifyError> {
    let nx = sys.nx();
    let w = region.w();
    let w_inv = crate::linalg::sym_inverse(w, 1e14)
        .map_err(|e| VerifyError::Synthesis(SynthesisError::from(e)))?
        .0;
    // Tight bounding box of the ellipsoid: |x_j| <= ||row_j(W)||.
    let extents: Vec<f64> = (0..nx).map(|j| w.row(j).norm()).collect();
    let per_axis = per_axis.max(2);

    let mut header: Vec<String> = (1..=nx).map(|i| format!("x{i}")).collect();
    header.extend((1..=nx).map(|i| format!("dx{i}")));
    writeln!(out, "{}", header.join(","))?;

    let mut idx = vec![0usize; nx];
    loop {
        let x = DVector::from_fn(nx, |j, _| {
            extents[j] * (2.0 * idx[j] as f64 / (per_axis - 1) as f64 - 1.0)
        });
        if (&w_inv * &x).norm_squared() <= 1.0 + 1e-12 {
            let u = k * &x;
            let delta = oracle.eval(&x, &u);
            if delta.len() != nx {
                return Err(VerifyError::OracleOutput { expected: nx, got: delta.len() });
            }
            let dx = &sys.a * &x + &sys.b1 * &u + delta;
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            row.extend(dx.iter().map(|v| format!("{v:.16e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        // Odometer increment over the grid indices.
        let mut carry = true;
        for d in idx.iter_mut() {
            if carry {
                *d += 1;
                if *d == per_axis {
                    *d = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EllipsoidBallRegion;
    use crate::synthesis::{inner_iteration, solve_sdp2, InnerOutcome, StageOutcome};
    use crate::sdp::SolverOptions;
    use approx::assert_relative_eq;

    fn zero_oracle(nx: usize) -> impl DeltaOracle {
        move |_dx: &DVector<f64>, _du: &DVector<f64>| DVector::zeros(nx)
    }

    fn scalar_decay() -> LftSystem {
        LftSystem::new(
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            vec![DMatrix::from_row_slice(2, 1, &[1.0, 0.0])],
            vec![DMatrix::from_row_slice(2, 1, &[0.0, 0.0])],
            DVector::zeros(1),
            DVector::zeros(1),
        )
        .unwrap()
    }

    #[test]
    fn integrates_linear_decay_to_machine_level_accuracy() {
        let sys = scalar_decay();
        let k = DMatrix::zeros(1, 1);
        let p = DMatrix::identity(1, 1);
        let opts = SimOptions { dt: 1e-3, t_final: 1.0, divergence_norm: 1e3 };
        let traj = simulate(
            &sys,
            &zero_oracle(1),
            &k,
            &p,
            &DVector::from_element(1, 1.0),
            &opts,
        )
        .unwrap();
        assert_eq!(traj.len(), 1001);
        assert_relative_eq!(traj.states.last().unwrap()[0], (-1.0f64).exp(), epsilon = 1e-12);
        assert!(!traj.diverged);
    }

    #[test]
    fn halving_the_step_leaves_the_endpoint_unchanged() {
        // Nonlinear closed loop: convergence in dt means the recorded
        // endpoint is a property of the system, not the grid.
        let sys = scalar_decay();
        let k = DMatrix::from_row_slice(1, 1, &[-0.5]);
        let p = DMatrix::identity(1, 1);
        let oracle = |dx: &DVector<f64>, _du: &DVector<f64>| {
            DVector::from_vec(vec![0.2 * dx[0] * dx[0]])
        };
        let run = |dt: f64| {
            let opts = SimOptions { dt, t_final: 5.0, divergence_norm: 1e3 };
            simulate(&sys, &oracle, &k, &p, &DVector::from_element(1, 0.9), &opts)
                .unwrap()
                .states
                .last()
                .unwrap()[0]
        };
        assert!((run(1e-3) - run(5e-4)).abs() < 1e-6);
    }

    #[test]
    fn flags_divergence_and_stops() {
        let sys = LftSystem::new(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            vec![DMatrix::from_row_slice(2, 1, &[1.0, 0.0])],
            vec![DMatrix::from_row_slice(2, 1, &[0.0, 0.0])],
            DVector::zeros(1),
            DVector::zeros(1),
        )
        .unwrap();
        let traj = simulate(
            &sys,
            &zero_oracle(1),
            &DMatrix::zeros(1, 1),
            &DMatrix::identity(1, 1),
            &DVector::from_element(1, 1.0),
            &SimOptions::default(),
        )
        .unwrap();
        assert!(traj.diverged);
        assert!(traj.len() < 30001);
        assert!(traj.states.last().unwrap()[0] > 1e3);
    }

    /// Certificate for the scalar plant with the true nonlinearity
    /// 0.2 x^2 on |x| <= 1, gain bound 0.25.
    fn certified_scalar() -> (LftSystem, Certificate) {
        let sys = scalar_decay();
        let gamma = [0.25];
        let w = DMatrix::identity(1, 1);
        let opts = SolverOptions::default();
        let inner = match inner_iteration(&sys, &gamma, &w, 2.0, true, 20, &opts).unwrap() {
            InnerOutcome::Done(r) => r,
            InnerOutcome::Failed { stage, detail } => panic!("{stage}: {detail}"),
        };
        assert!(inner.achieved);
        let analysis = match solve_sdp2(&sys, &inner.k, &gamma, &w, &inner.r0, &opts).unwrap() {
            StageOutcome::Solved(p) => p,
            StageOutcome::Failed { stage, detail } => panic!("{stage}: {detail}"),
        };
        let region = EllipsoidBallRegion::new(w, 2.0, ConstrainInput::On).unwrap();
        let cert = Certificate {
            p: analysis.p,
            k: inner.k,
            lambda: analysis.lambda,
            tau: inner.tau,
            region,
            gamma: gamma.to_vec(),
        };
        (sys, cert)
    }

    #[test]
    fn certified_run_passes_every_audit() {
        let (sys, cert) = certified_scalar();
        let check = check_certificate(&sys, &cert).unwrap();
        assert!(check.all_ok(), "{check:?}");

        let oracle = |dx: &DVector<f64>, _du: &DVector<f64>| {
            DVector::from_vec(vec![0.2 * dx[0] * dx[0]])
        };
        for x0 in boundary_initial_states(cert.region.w(), 2) {
            let traj = simulate(&sys, &oracle, &cert.k, &cert.p, &x0, &SimOptions::default())
                .unwrap();
            let report = audit_trajectory(&sys, &cert, &oracle, &traj).unwrap();
            assert!(report.all_ok(), "{report:?}");
            assert!(report.nodes_in_region > 0);
            assert!(report.endpoint_norm < 1e-3, "endpoint {}", report.endpoint_norm);
        }
    }

    #[test]
    fn audit_catches_a_rising_lyapunov_value() {
        let (sys, cert) = certified_scalar();
        // Same certificate, but simulated open loop on a destabilizing
        // nonlinearity: V must rise inside the region.
        let bad_oracle = |dx: &DVector<f64>, _du: &DVector<f64>| {
            DVector::from_vec(vec![2.0 * dx[0]])
        };
        let traj = simulate(
            &sys,
            &bad_oracle,
            &DMatrix::zeros(1, 1),
            &cert.p,
            &DVector::from_element(1, 0.5),
            &SimOptions { dt: 1e-3, t_final: 2.0, divergence_norm: 1e3 },
        )
        .unwrap();
        let report = audit_trajectory(&sys, &cert, &bad_oracle, &traj).unwrap();
        assert!(!report.decrease_ok);
        assert!(!report.qc_ok);
        assert!(report.first_violation.is_some());
    }

    #[test]
    fn boundary_states_sit_on_the_ellipsoid() {
        let w = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.7]);
        let states = boundary_initial_states(&w, 12);
        assert_eq!(states.len(), 12);
        let w_inv = crate::linalg::sym_inverse(&w, 1e12).unwrap().0;
        for x in &states {
            assert_relative_eq!((&w_inv * x).norm(), 1.0, epsilon = 1e-12);
        }
        // Distinct directions.
        for i in 0..states.len() {
            for j in (i + 1)..states.len() {
                assert!((&states[i] - &states[j]).norm() > 1e-6);
            }
        }
    }

    #[test]
    fn trajectory_csv_has_one_row_per_node() {
        let sys = scalar_decay();
        let traj = simulate(
            &sys,
            &zero_oracle(1),
            &DMatrix::zeros(1, 1),
            &DMatrix::identity(1, 1),
            &DVector::from_element(1, 0.5),
            &SimOptions { dt: 0.1, t_final: 1.0, divergence_norm: 1e3 },
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1,u_1,V");
        assert_eq!(lines.len(), 1 + traj.len());
    }

    #[test]
    fn phase_portrait_samples_the_field_inside_the_ellipsoid() {
        let sys = scalar_decay();
        let region = EllipsoidBallRegion::new(
            DMatrix::from_element(1, 1, 0.8),
            1.0,
            ConstrainInput::Off,
        )
        .unwrap();
        let k = DMatrix::from_row_slice(1, 1, &[-0.5]);
        let oracle = |dx: &DVector<f64>, _du: &DVector<f64>| {
            DVector::from_vec(vec![0.2 * dx[0] * dx[0]])
        };
        let mut buf = Vec::new();
        write_phase_portrait_csv(&sys, &oracle, &k, &region, 5, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,dx1");
        assert_eq!(lines.len(), 1 + 5);
        // Endpoint row: x = 0.8, field = -0.8 - 0.5*0.8 + 0.2*0.64.
        let last: Vec<f64> = lines
            .last()
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_relative_eq!(last[0], 0.8, epsilon = 1e-12);
        assert_relative_eq!(last[1], -0.8 - 0.4 + 0.2 * 0.64, epsilon = 1e-12);
    }
}
