//! Controller synthesis: alternating semidefinite programs over a grid of
//! input budgets, with a scale search on the certified region.
//!
//! For a fixed region (state ellipsoid scale `alpha` times a base shape,
//! input ball of radius `r`) one attempt runs:
//!
//! 1. recompute the per-channel empirical gains over the region;
//! 2. stage 1: jointly pick a shape `R` and gain parameter `F` with unit
//!    multipliers, minimizing the gain-level surrogate;
//! 3. alternate stage 2 (multipliers and Lyapunov matrix for the current
//!    gain) and stage 3 (gain refit under the found multipliers), which
//!    in input-constrained mode runs until the realized input level
//!    `sigma_max(K W)` drops to `r` or the round budget is exhausted;
//! 4. re-solve stage 2 once more at the final gain and check the resulting
//!    certificate directly (strict stability margin, positive Lyapunov
//!    matrix, input level).
//!
//! The scale search per budget starts small, grows geometrically through
//! regions too small to contain usable samples, and once a certified and a
//! failed scale bracket each other, bisects to a relative width of
//! `alpha_rel_tol`. The best certified scale over the budget grid wins.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::lmi::{self, AffineBlock, BlockSense, DecisionSpace, LmiError, VarKind};
use crate::model::{
    Certificate, ConstrainInput, EllipsoidBallRegion, LftSystem, ModelError,
};
use crate::sampling::{self, InferredStructure, SampleSet, SamplingError};
use crate::sdp::{SdpError, SdpProblem, SdpSolution, SolverOptions};

/// Objective floor; keeps the minimized level away from exact zero.
const BETA_FLOOR: f64 = 1e-9;
/// Multiplier floor in stage 2.
const LAMBDA_FLOOR: f64 = 1e-9;
/// Eigenvalue floor on the shape matrices `R` and `P`.
const SHAPE_FLOOR: f64 = 1e-9;
/// Condition-number limit when inverting a recovered shape.
const COND_LIMIT: f64 = 1e10;
/// Relative strictness of negative definite blocks.
const EPS_SCALE: f64 = 1e-6;
/// A certificate must place the stability block at least this far into
/// the negative cone.
const STABILITY_MARGIN_REQ: f64 = 1e-8;
/// Hard cap on attempts per budget, against pathological oscillation.
const MAX_ATTEMPTS: usize = 200;
/// Give up shrinking once the scale falls below this fraction of the cap.
const SHRINK_FLOOR: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("budget grid is empty")]
    EmptyBudgetGrid,
    #[error("base shape is {got}x{got2}, state dimension is {nx}")]
    ShapeDimension { got: usize, got2: usize, nx: usize },
    #[error("system has {sys} channels, structure has {structure}")]
    ChannelMismatch { sys: usize, structure: usize },
    #[error("sample gain computation failed: {0}")]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    /// Base state-ellipsoid shape; the certified region uses `alpha * w0`.
    pub w0: DMatrix<f64>,
    /// Input budgets to try.
    pub r_grid: Vec<f64>,
    /// Starting scale; defaults to 5% of the largest scale that keeps the
    /// ellipsoid inside the sampled box.
    pub alpha0: Option<f64>,
    /// Relative width at which the scale bisection stops.
    pub alpha_rel_tol: f64,
    /// Geometric growth factor of the scale search.
    pub alpha_growth: f64,
    /// Refinement rounds: maximum in constrained mode, exact count
    /// otherwise.
    pub n_max: usize,
    pub constrain_input: ConstrainInput,
    /// Driver-norm floor when forming sample gain ratios.
    pub v_floor: f64,
    pub sdp: SolverOptions,
}

impl SynthesisConfig {
    pub fn new(w0: DMatrix<f64>, r_grid: Vec<f64>) -> Self {
        Self {
            w0,
            r_grid,
            alpha0: None,
            alpha_rel_tol: 0.02,
            alpha_growth: 1.3,
            n_max: 20,
            constrain_input: ConstrainInput::Auto,
            v_floor: 1e-9,
            sdp: SolverOptions::default(),
        }
    }
}

/// Shape/gain pair recovered from a design-form stage.
#[derive(Debug, Clone)]
pub struct DesignPoint {
    pub r: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub beta: f64,
}

/// Lyapunov/multiplier pair recovered from the analysis-form stage.
#[derive(Debug, Clone)]
pub struct AnalysisPoint {
    pub p: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub beta: f64,
}

/// Soft outcome of one stage: an infeasible or failed solve is data, not
/// an error, because the scale search reacts to it.
#[derive(Debug)]
pub enum StageOutcome<T> {
    Solved(T),
    Failed { stage: &'static str, detail: String },
}

impl<T> StageOutcome<T> {
    fn failed(stage: &'static str, sol: &SdpSolution) -> Self {
        StageOutcome::Failed {
            stage,
            detail: format!("{:?}: {} (iter {})", sol.status, sol.message, sol.iterations),
        }
    }
}

fn shape_floor_block(space: &DecisionSpace, var: &'static str) -> Result<AffineBlock, LmiError> {
    let n = match space.spec(var)?.kind {
        VarKind::Symmetric { n } => n,
        _ => unreachable!("shape variables are symmetric"),
    };
    AffineBlock::from_affine_fn(
        "shape-floor",
        space,
        &[var],
        BlockSense::PositiveSemidef,
        move |x| space.get_symmetric(x, var) - DMatrix::<f64>::identity(n, n) * SHAPE_FLOOR,
    )
}

fn lambda_floor_block(space: &DecisionSpace, var: &'static str) -> Result<AffineBlock, LmiError> {
    let n = space.spec(var)?.kind.len();
    AffineBlock::from_affine_fn(
        "multiplier-floor",
        space,
        &[var],
        BlockSense::PositiveSemidef,
        move |x| {
            let l = space.get_vector(x, var);
            DMatrix::from_fn(n, n, |p, q| {
                if p == q {
                    l[p] - LAMBDA_FLOOR
                } else {
                    0.0
                }
            })
        },
    )
}

/// Invert a recovered shape, treating ill conditioning as a soft failure.
fn guarded_inverse(
    m: &DMatrix<f64>,
    stage: &'static str,
) -> Result<DMatrix<f64>, StageOutcome<DesignPoint>> {
    match linalg::sym_inverse(m, COND_LIMIT) {
        Ok((inv, _)) => Ok(inv),
        Err(e) => Err(StageOutcome::Failed { stage, detail: e.to_string() }),
    }
}

/// Stage 1: initial shape and gain with unit multipliers.
pub fn solve_sdp1(
    sys: &LftSystem,
    gamma: &[f64],
    w: &DMatrix<f64>,
    opts: &SolverOptions,
) -> Result<StageOutcome<DesignPoint>, SynthesisError> {
    let nx = sys.nx();
    let nu = sys.nu();
    let mut space = DecisionSpace::new();
    space.add("beta", VarKind::Scalar)?;
    space.add("R", VarKind::Symmetric { n: nx })?;
    space.add("F", VarKind::Full { rows: nu, cols: nx })?;
    let stability = lmi::build_sdp1_stability(&space, sys, gamma, "R", "F", EPS_SCALE)?;
    let gain = lmi::build_sdp1_gain_lmi(&space, w, "beta", "R", "F")?;
    let floor = shape_floor_block(&space, "R")?;
    let mut prob = SdpProblem::minimizing(space, "beta")?;
    prob.push_block(stability);
    prob.push_block(gain);
    prob.push_block(floor);
    prob.add_lower_bound("beta", BETA_FLOOR)?;

    let sol = prob.solve(opts)?;
    if !sol.is_optimal() {
        return Ok(StageOutcome::failed("sdp1", &sol));
    }
    let r = prob.space.get_symmetric(&sol.x, "R");
    let f = prob.space.get_full(&sol.x, "F");
    let r_inv = match guarded_inverse(&r, "sdp1") {
        Ok(v) => v,
        Err(fail) => return Ok(fail),
    };
    let k = &f * r_inv;
    let beta = prob.space.get_scalar(&sol.x, "beta");
    Ok(StageOutcome::Solved(DesignPoint { r, f, k, beta }))
}

/// Stage 2: multipliers and Lyapunov matrix for a fixed gain, linearized
/// at the shape `r0`.
pub fn solve_sdp2(
    sys: &LftSystem,
    k: &DMatrix<f64>,
    gamma: &[f64],
    w: &DMatrix<f64>,
    r0: &DMatrix<f64>,
    opts: &SolverOptions,
) -> Result<StageOutcome<AnalysisPoint>, SynthesisError> {
    let nx = sys.nx();
    let n_w = sys.nw();
    let mut space = DecisionSpace::new();
    space.add("beta", VarKind::Scalar)?;
    space.add("P", VarKind::Symmetric { n: nx })?;
    space.add("lambda", VarKind::Vector { len: n_w })?;
    let stability = lmi::build_stability_lmi(&space, sys, k, gamma, "P", "lambda", EPS_SCALE)?;
    let gain = match lmi::build_sdp2_gain_lmi(&space, w, r0, k, "beta", "P") {
        Ok(b) => b,
        Err(LmiError::Linalg(e)) => {
            return Ok(StageOutcome::Failed { stage: "sdp2", detail: e.to_string() })
        }
        Err(e) => return Err(e.into()),
    };
    let p_floor = shape_floor_block(&space, "P")?;
    let l_floor = lambda_floor_block(&space, "lambda")?;
    let mut prob = SdpProblem::minimizing(space, "beta")?;
    prob.push_block(stability);
    prob.push_block(gain);
    prob.push_block(p_floor);
    prob.push_block(l_floor);
    prob.add_lower_bound("beta", BETA_FLOOR)?;

    let sol = prob.solve(opts)?;
    if !sol.is_optimal() {
        return Ok(StageOutcome::failed("sdp2", &sol));
    }
    Ok(StageOutcome::Solved(AnalysisPoint {
        p: prob.space.get_symmetric(&sol.x, "P"),
        lambda: prob.space.get_vector(&sol.x, "lambda"),
        beta: prob.space.get_scalar(&sol.x, "beta"),
    }))
}

/// Stage 3: gain refit under fixed multipliers, linearized at `r0`.
pub fn solve_sdp3(
    sys: &LftSystem,
    lambda: &DVector<f64>,
    gamma: &[f64],
    w: &DMatrix<f64>,
    r0: &DMatrix<f64>,
    opts: &SolverOptions,
) -> Result<StageOutcome<DesignPoint>, SynthesisError> {
    let nx = sys.nx();
    let nu = sys.nu();
    let mut space = DecisionSpace::new();
    space.add("beta", VarKind::Scalar)?;
    space.add("R", VarKind::Symmetric { n: nx })?;
    space.add("F", VarKind::Full { rows: nu, cols: nx })?;
    let stability = lmi::build_sdp3_stability(&space, sys, gamma, lambda, "R", "F", EPS_SCALE)?;
    let gain = lmi::build_sdp3_gain_lmi(&space, w, r0, "beta", "R", "F")?;
    let floor = shape_floor_block(&space, "R")?;
    let mut prob = SdpProblem::minimizing(space, "beta")?;
    prob.push_block(stability);
    prob.push_block(gain);
    prob.push_block(floor);
    prob.add_lower_bound("beta", BETA_FLOOR)?;

    let sol = prob.solve(opts)?;
    if !sol.is_optimal() {
        return Ok(StageOutcome::failed("sdp3", &sol));
    }
    let r = prob.space.get_symmetric(&sol.x, "R");
    let f = prob.space.get_full(&sol.x, "F");
    let r_inv = match guarded_inverse(&r, "sdp3") {
        Ok(v) => v,
        Err(fail) => return Ok(fail),
    };
    let k = &f * r_inv;
    let beta = prob.space.get_scalar(&sol.x, "beta");
    Ok(StageOutcome::Solved(DesignPoint { r, f, k, beta }))
}

/// Result of the alternating refinement at a fixed region.
#[derive(Debug, Clone)]
pub struct InnerResult {
    pub k: DMatrix<f64>,
    /// Shape at which the certificate solve is linearized.
    pub r0: DMatrix<f64>,
    /// Realized input level `sigma_max(K W)`.
    pub tau: f64,
    pub rounds: usize,
    pub beta: f64,
    /// In constrained mode, whether the input level reached the budget.
    pub achieved: bool,
}

#[derive(Debug)]
pub enum InnerOutcome {
    Done(InnerResult),
    Failed { stage: &'static str, detail: String },
}

/// Run stage 1 and the stage 2/3 alternation at a fixed region.
///
/// In constrained mode the alternation stops as soon as the input level
/// meets the budget; otherwise it runs exactly `n_max` rounds.
pub fn inner_iteration(
    sys: &LftSystem,
    gamma: &[f64],
    w: &DMatrix<f64>,
    budget: f64,
    constrained: bool,
    n_max: usize,
    opts: &SolverOptions,
) -> Result<InnerOutcome, SynthesisError> {
    let initial = match solve_sdp1(sys, gamma, w, opts)? {
        StageOutcome::Solved(p) => p,
        StageOutcome::Failed { stage, detail } => {
            return Ok(InnerOutcome::Failed { stage, detail })
        }
    };
    let mut k = initial.k;
    let mut r0 = initial.r;
    let mut beta = initial.beta;
    let mut tau = linalg::spectral_norm(&(&k * w));
    let mut rounds = 0;

    // A refinement round that fails numerically leaves the last complete
    // iterate in place rather than aborting the attempt: the subproblem
    // optimum degenerates as the alternation converges, and the caller
    // re-validates whatever design comes out.
    while rounds < n_max && (!constrained || tau > budget) {
        let analysis = match solve_sdp2(sys, &k, gamma, w, &r0, opts)? {
            StageOutcome::Solved(p) => p,
            StageOutcome::Failed { .. } => break,
        };
        let r_lin = match linalg::sym_inverse(&analysis.p, COND_LIMIT) {
            Ok((inv, _)) => inv,
            Err(_) => break,
        };
        let refit = match solve_sdp3(sys, &analysis.lambda, gamma, w, &r_lin, opts)? {
            StageOutcome::Solved(p) => p,
            StageOutcome::Failed { .. } => break,
        };
        rounds += 1;
        k = refit.k;
        r0 = refit.r;
        beta = refit.beta;
        tau = linalg::spectral_norm(&(&k * w));
    }

    let achieved = !constrained || tau <= budget;
    Ok(InnerOutcome::Done(InnerResult { k, r0, tau, rounds, beta, achieved }))
}

/// Direct margins of a certificate, computed from scratch.
#[derive(Debug, Clone)]
pub struct CertificateMargins {
    /// Largest eigenvalue of the assembled stability block (must be
    /// negative with margin).
    pub stability_max_eig: f64,
    /// Smallest eigenvalue of the Lyapunov matrix.
    pub p_min_eig: f64,
    /// Smallest eigenvalue of the input-gain block at `tau`.
    pub input_min_eig: f64,
    /// Smallest multiplier.
    pub lambda_min: f64,
    pub tau: f64,
}

pub fn certificate_margins(
    sys: &LftSystem,
    cert: &Certificate,
) -> Result<CertificateMargins, SynthesisError> {
    let stab = lmi::stability_matrix(sys, &cert.k, &cert.p, &cert.lambda, &cert.gamma);
    let input = lmi::build_input_bound_lmi(&cert.k, cert.region.w(), cert.tau * cert.tau)?;
    Ok(CertificateMargins {
        stability_max_eig: linalg::max_eig(&stab),
        p_min_eig: linalg::min_eig(&cert.p),
        input_min_eig: linalg::min_eig(&input),
        // No channels means no multipliers; the floor holds vacuously.
        lambda_min: if cert.lambda.is_empty() { LAMBDA_FLOOR } else { cert.lambda.min() },
        tau: cert.tau,
    })
}

/// Certified point at one (budget, scale) pair.
#[derive(Debug, Clone)]
pub struct CertifiedPoint {
    pub alpha: f64,
    pub beta: f64,
    pub rounds: usize,
    pub certificate: Certificate,
    pub margins: CertificateMargins,
}

/// Outcome of one attempt at a fixed (budget, scale) pair.
#[derive(Debug)]
pub enum AttemptOutcome {
    Certified(Box<CertifiedPoint>),
    /// The region contained no usable samples (too small for the grid).
    DataStarved { detail: String },
    StageFailed { stage: &'static str, detail: String },
    /// Constrained mode ran out of rounds above the budget.
    NotAchieved { tau: f64 },
    /// The alternation finished but the direct certificate check failed.
    CertificateRejected { detail: String },
}

impl AttemptOutcome {
    pub fn label(&self) -> String {
        match self {
            AttemptOutcome::Certified(_) => "certified".into(),
            AttemptOutcome::DataStarved { .. } => "data_starved".into(),
            AttemptOutcome::StageFailed { stage, .. } => format!("stage_failed:{stage}"),
            AttemptOutcome::NotAchieved { .. } => "not_achieved".into(),
            AttemptOutcome::CertificateRejected { .. } => "certificate_rejected".into(),
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, AttemptOutcome::Certified(_))
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            AttemptOutcome::Certified(c) => Some(c.certificate.tau),
            AttemptOutcome::NotAchieved { tau } => Some(*tau),
            _ => None,
        }
    }
}

/// One attempt recorded in a budget's search trace.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaTrial {
    pub alpha: f64,
    pub outcome: String,
    pub certified: bool,
    pub tau: Option<f64>,
}

/// Search trace and result for one input budget.
#[derive(Debug)]
pub struct BudgetRecord {
    pub r: f64,
    pub trials: Vec<AlphaTrial>,
    pub certified: Option<CertifiedPoint>,
}

#[derive(Debug)]
pub struct SynthesisOutcome {
    pub records: Vec<BudgetRecord>,
    /// Index of the record with the largest certified scale.
    pub best: Option<usize>,
    /// Resolved input-constraint mode.
    pub constrained: bool,
    /// Largest scale keeping the ellipsoid inside the sampled box.
    pub cap: f64,
}

impl SynthesisOutcome {
    pub fn best_record(&self) -> Option<&BudgetRecord> {
        self.best.map(|i| &self.records[i])
    }
}

/// Progress events, emitted for structured run logs.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SynthesisEvent {
    SearchStarted { cap: f64, constrained: bool, budgets: usize },
    BudgetStarted { r: f64, alpha_start: f64 },
    AttemptFinished { r: f64, alpha: f64, outcome: String, tau: Option<f64> },
    BudgetFinished { r: f64, certified_alpha: Option<f64>, attempts: usize },
    SearchFinished { best_r: Option<f64>, best_alpha: Option<f64> },
}

pub struct Synthesizer<'a> {
    sys: &'a LftSystem,
    samples: &'a SampleSet,
    structure: &'a InferredStructure,
    config: SynthesisConfig,
    constrained: bool,
}

impl<'a> Synthesizer<'a> {
    pub fn new(
        sys: &'a LftSystem,
        samples: &'a SampleSet,
        structure: &'a InferredStructure,
        config: SynthesisConfig,
    ) -> Result<Self, SynthesisError> {
        if config.r_grid.is_empty() {
            return Err(SynthesisError::EmptyBudgetGrid);
        }
        if config.w0.nrows() != sys.nx() || config.w0.ncols() != sys.nx() {
            return Err(SynthesisError::ShapeDimension {
                got: config.w0.nrows(),
                got2: config.w0.ncols(),
                nx: sys.nx(),
            });
        }
        if sys.nw() != structure.n_channels() {
            return Err(SynthesisError::ChannelMismatch {
                sys: sys.nw(),
                structure: structure.n_channels(),
            });
        }
        let constrained = config.constrain_input.resolved(sys);
        Ok(Self { sys, samples, structure, config, constrained })
    }

    pub fn constrained(&self) -> bool {
        self.constrained
    }

    /// Largest scale at which the state ellipsoid stays inside the
    /// sampled box: the ellipsoid's extent along axis `i` is
    /// `alpha * ||row_i(w0)||`.
    pub fn alpha_cap(&self) -> f64 {
        let x_box = self.samples.x_box();
        let mut cap = f64::INFINITY;
        for i in 0..self.config.w0.nrows() {
            let row_norm = self.config.w0.row(i).norm();
            if row_norm > 0.0 {
                cap = cap.min(x_box.half_extent(i) / row_norm);
            }
        }
        cap
    }

    /// One full attempt at a fixed (scale, budget) pair.
    pub fn attempt(&self, alpha: f64, budget: f64) -> Result<AttemptOutcome, SynthesisError> {
        let ci = if self.constrained { ConstrainInput::On } else { ConstrainInput::Off };
        let region = EllipsoidBallRegion::new(self.config.w0.clone() * alpha, budget, ci)?;
        let bounds =
            match sampling::compute_gamma(self.samples, self.structure, &region, self.config.v_floor)
            {
                Ok(b) => b,
                Err(e @ (SamplingError::EmptyRegion | SamplingError::NoRatioSamples { .. })) => {
                    return Ok(AttemptOutcome::DataStarved { detail: e.to_string() })
                }
                Err(e) => return Err(e.into()),
            };

        let w = region.w();
        let inner = match inner_iteration(
            self.sys,
            &bounds.gamma,
            w,
            budget,
            self.constrained,
            self.config.n_max,
            &self.config.sdp,
        )? {
            InnerOutcome::Done(r) => r,
            InnerOutcome::Failed { stage, detail } => {
                return Ok(AttemptOutcome::StageFailed { stage, detail })
            }
        };
        if !inner.achieved {
            return Ok(AttemptOutcome::NotAchieved { tau: inner.tau });
        }

        // Certificate solve: one more analysis stage at the final gain,
        // then direct checks on the assembled inequalities.
        let analysis =
            match solve_sdp2(self.sys, &inner.k, &bounds.gamma, w, &inner.r0, &self.config.sdp)? {
                StageOutcome::Solved(p) => p,
                StageOutcome::Failed { stage: _, detail } => {
                    return Ok(AttemptOutcome::CertificateRejected {
                        detail: format!("certificate solve failed: {detail}"),
                    })
                }
            };

        let tau = linalg::spectral_norm(&(&inner.k * w));
        if self.constrained && tau > budget {
            return Ok(AttemptOutcome::NotAchieved { tau });
        }
        let certificate = Certificate {
            p: analysis.p,
            k: inner.k,
            lambda: analysis.lambda,
            tau,
            region,
            gamma: bounds.gamma,
        };
        let margins = certificate_margins(self.sys, &certificate)?;
        if margins.stability_max_eig > -STABILITY_MARGIN_REQ {
            return Ok(AttemptOutcome::CertificateRejected {
                detail: format!(
                    "stability margin {:.3e} above -{STABILITY_MARGIN_REQ:.0e}",
                    margins.stability_max_eig
                ),
            });
        }
        if margins.p_min_eig <= 0.0 {
            return Ok(AttemptOutcome::CertificateRejected {
                detail: format!("Lyapunov matrix has min eigenvalue {:.3e}", margins.p_min_eig),
            });
        }
        Ok(AttemptOutcome::Certified(Box::new(CertifiedPoint {
            alpha,
            beta: inner.beta,
            rounds: inner.rounds,
            certificate,
            margins,
        })))
    }

    /// Scale search at one budget: grow from the starting scale through
    /// data-starved regions, bracket the feasibility boundary, bisect.
    fn search_budget(
        &self,
        budget: f64,
        cap: f64,
        on_event: &mut dyn FnMut(SynthesisEvent),
    ) -> Result<BudgetRecord, SynthesisError> {
        let alpha_start = self.config.alpha0.unwrap_or(0.05 * cap).min(cap);
        on_event(SynthesisEvent::BudgetStarted { r: budget, alpha_start });
        let mut trials: Vec<AlphaTrial> = Vec::new();
        let mut best: Option<CertifiedPoint> = None;

        let try_alpha = |alpha: f64,
                             best: &mut Option<CertifiedPoint>,
                             trials: &mut Vec<AlphaTrial>,
                             on_event: &mut dyn FnMut(SynthesisEvent)|
         -> Result<AttemptOutcome, SynthesisError> {
            let outcome = self.attempt(alpha, budget)?;
            trials.push(AlphaTrial {
                alpha,
                outcome: outcome.label(),
                certified: outcome.is_certified(),
                tau: outcome.tau(),
            });
            on_event(SynthesisEvent::AttemptFinished {
                r: budget,
                alpha,
                outcome: outcome.label(),
                tau: outcome.tau(),
            });
            if let AttemptOutcome::Certified(point) = &outcome {
                let replace = best.as_ref().map_or(true, |b| point.alpha > b.alpha);
                if replace {
                    *best = Some((**point).clone());
                }
            }
            Ok(outcome)
        };

        // Phase 1: find any certified scale. Data starvation means the
        // region is too small for the sample grid, so grow; any other
        // failure means the region is too ambitious, so shrink. Once a
        // starved scale and a failing scale are both known, bisect the
        // window between them instead of stepping by the growth factor,
        // so adjacent starved and failing scales cannot cycle forever.
        let mut alpha = alpha_start;
        let mut lo: Option<f64> = None;
        let mut hi: Option<f64> = None;
        let mut starved_hi: Option<f64> = None;
        let mut failed_lo: Option<f64> = None;
        while trials.len() < MAX_ATTEMPTS {
            let outcome = try_alpha(alpha, &mut best, &mut trials, on_event)?;
            match outcome {
                AttemptOutcome::Certified(_) => {
                    lo = Some(alpha);
                    break;
                }
                AttemptOutcome::DataStarved { .. } => {
                    starved_hi = Some(starved_hi.map_or(alpha, |s| alpha.max(s)));
                }
                _ => {
                    failed_lo = Some(failed_lo.map_or(alpha, |f| alpha.min(f)));
                    hi = Some(alpha);
                }
            }
            alpha = match (starved_hi, failed_lo) {
                (Some(s), Some(f)) if f - s > self.config.alpha_rel_tol * f => 0.5 * (s + f),
                // The window between starvation and failure is empty: no
                // scale works at this budget.
                (Some(_), Some(_)) => break,
                (Some(s), None) => {
                    if s >= cap {
                        break;
                    }
                    (s * self.config.alpha_growth).min(cap)
                }
                (None, Some(f)) => {
                    if f <= SHRINK_FLOOR * cap {
                        break;
                    }
                    f / self.config.alpha_growth
                }
                (None, None) => break,
            };
        }

        // Phase 2: grow the certified scale until it fails or hits the cap.
        if let Some(mut alpha_lo) = lo {
            while hi.is_none() && alpha_lo < cap && trials.len() < MAX_ATTEMPTS {
                let candidate = (alpha_lo * self.config.alpha_growth).min(cap);
                let outcome = try_alpha(candidate, &mut best, &mut trials, on_event)?;
                if outcome.is_certified() {
                    alpha_lo = candidate;
                } else {
                    hi = Some(candidate);
                }
            }
            // Phase 3: bisect the bracket down to the requested width.
            if let Some(mut alpha_hi) = hi {
                if alpha_hi > alpha_lo {
                    while (alpha_hi - alpha_lo) > self.config.alpha_rel_tol * alpha_hi
                        && trials.len() < MAX_ATTEMPTS
                    {
                        let mid = 0.5 * (alpha_lo + alpha_hi);
                        let outcome = try_alpha(mid, &mut best, &mut trials, on_event)?;
                        if outcome.is_certified() {
                            alpha_lo = mid;
                        } else {
                            alpha_hi = mid;
                        }
                    }
                }
            }
        }

        on_event(SynthesisEvent::BudgetFinished {
            r: budget,
            certified_alpha: best.as_ref().map(|b| b.alpha),
            attempts: trials.len(),
        });
        Ok(BudgetRecord { r: budget, trials, certified: best })
    }

    pub fn run(&self) -> Result<SynthesisOutcome, SynthesisError> {
        self.run_with_events(&mut |_| {})
    }

    pub fn run_with_events(
        &self,
        on_event: &mut dyn FnMut(SynthesisEvent),
    ) -> Result<SynthesisOutcome, SynthesisError> {
        let cap = self.alpha_cap();
        on_event(SynthesisEvent::SearchStarted {
            cap,
            constrained: self.constrained,
            budgets: self.config.r_grid.len(),
        });
        let mut records = Vec::with_capacity(self.config.r_grid.len());
        for &r in &self.config.r_grid {
            records.push(self.search_budget(r, cap, on_event)?);
        }
        let best = records
            .iter()
            .enumerate()
            .filter_map(|(i, rec)| rec.certified.as_ref().map(|c| (i, c.alpha)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        on_event(SynthesisEvent::SearchFinished {
            best_r: best.map(|i| records[i].r),
            best_alpha: best.and_then(|i| records[i].certified.as_ref().map(|c| c.alpha)),
        });
        Ok(SynthesisOutcome { records, best, constrained: self.constrained, cap })
    }
}
