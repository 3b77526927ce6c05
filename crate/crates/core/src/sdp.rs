//! Dense semidefinite programming by an infeasible-start primal-dual
//! path-following interior-point method.
//!
//! Problems have the linear-matrix-inequality form
//!
//! ```text
//!   minimize    c^T x
//!   subject to  G0_j + sum_i x_i G_ij >= 0    for every block j,
//! ```
//!
//! which is exactly the solver form of [`AffineBlock`]. The method keeps a
//! slack matrix `S_j` and a dual multiplier `Z_j` per block, scales each
//! block by its Nesterov-Todd point (the unique geometric mean under which
//! slack and multiplier coincide), reduces the Newton system to a dense
//! Schur complement in `x`, and takes Mehrotra predictor-corrector steps
//! damped to 98% of the distance to the cone boundary.
//!
//! The sizes here are small (tens of variables, blocks of dimension at
//! most a few dozen), so everything is dense and per-iteration cost is
//! irrelevant next to robustness.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::linalg;
use crate::lmi::{AffineBlock, DecisionSpace, VarKind};

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("problem has no decision variables")]
    NoVariables,
    #[error("objective has {got} entries, decision space has {expected}")]
    ObjectiveLength { expected: usize, got: usize },
    #[error("problem has no constraint blocks")]
    NoBlocks,
    #[error("lower bound target `{0}` is not a scalar variable")]
    BadLowerBound(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    /// Converged to the requested tolerance.
    Optimal,
    /// A dual improving ray was found: the constraints are inconsistent.
    Infeasible,
    /// Ran out of iterations; the iterate may still be nearly feasible.
    MaxIterations,
    /// Scaling or linear algebra broke down.
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Relative Frobenius residual of the slack equation.
    pub rel_primal: f64,
    /// Relative infinity-norm residual of the multiplier equation.
    pub rel_dual: f64,
    /// Relative primal-dual objective gap.
    pub rel_gap: f64,
    /// Average complementarity.
    pub mu: f64,
    pub message: String,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100 }
    }
}

/// Accuracy still accepted as optimal when the iteration ends early
/// (scaling breakdown or the iteration limit) without reaching `tol`.
/// Near-degenerate optima routinely stall around this level, and every
/// consumer re-checks the returned point directly.
const RELAXED_TOL: f64 = 1e-6;

/// Per-block margins of a candidate point, using the raw (unnormalized)
/// blocks, so values are in the caller's units.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub objective: f64,
    pub margins: Vec<(String, f64)>,
    pub min_margin: f64,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub space: DecisionSpace,
    pub c: DVector<f64>,
    pub blocks: Vec<AffineBlock>,
}

impl SdpProblem {
    pub fn new(space: DecisionSpace, c: DVector<f64>) -> Result<Self, SdpError> {
        if space.is_empty() {
            return Err(SdpError::NoVariables);
        }
        if c.len() != space.len() {
            return Err(SdpError::ObjectiveLength { expected: space.len(), got: c.len() });
        }
        Ok(Self { space, c, blocks: Vec::new() })
    }

    /// Problem minimizing a single scalar variable.
    pub fn minimizing(space: DecisionSpace, var: &str) -> Result<Self, SdpError> {
        let mut c = DVector::zeros(space.len());
        let spec = space.spec(var).map_err(|_| SdpError::UnknownVariable(var.into()))?;
        if spec.kind != VarKind::Scalar {
            return Err(SdpError::BadLowerBound(var.into()));
        }
        c[spec.offset] = 1.0;
        Self::new(space, c)
    }

    pub fn push_block(&mut self, block: AffineBlock) {
        // A zero-dimensional block constrains nothing; keeping it would
        // feed empty matrices into the eigensolvers.
        if block.dim > 0 {
            self.blocks.push(block);
        }
    }

    /// Add the 1x1 block `x_var - floor >= 0` for a scalar variable.
    pub fn add_lower_bound(&mut self, var: &str, floor: f64) -> Result<(), SdpError> {
        let spec = self.space.spec(var).map_err(|_| SdpError::UnknownVariable(var.into()))?;
        if spec.kind != VarKind::Scalar {
            return Err(SdpError::BadLowerBound(var.into()));
        }
        self.blocks.push(AffineBlock {
            name: format!("floor:{var}"),
            dim: 1,
            constant: DMatrix::from_element(1, 1, -floor),
            coeffs: vec![(spec.offset, DMatrix::from_element(1, 1, 1.0))],
            sense: crate::lmi::BlockSense::PositiveSemidef,
        });
        Ok(())
    }

    /// Evaluate all block margins at `x`.
    pub fn check(&self, x: &DVector<f64>) -> CheckReport {
        let margins: Vec<(String, f64)> =
            self.blocks.iter().map(|b| (b.name.clone(), b.cone_margin(x))).collect();
        let min_margin = margins.iter().map(|(_, m)| *m).fold(f64::INFINITY, f64::min);
        CheckReport { objective: self.c.dot(x), margins, min_margin }
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
        if self.blocks.is_empty() {
            return Err(SdpError::NoBlocks);
        }
        let m_vars = self.space.len();

        // Cone-form data, normalized per block so every block has unit
        // magnitude. Scaling a block by a positive constant leaves the
        // feasible set unchanged and keeps the Schur complement well
        // conditioned when raw blocks mix scales (for example 1/gamma^2
        // entries against unit entries).
        let data: Vec<BlockData> = self
            .blocks
            .iter()
            .map(|b| {
                let (g0, coeffs) = b.cone_form();
                let mut scale = g0.amax();
                for (_, a) in &coeffs {
                    scale = scale.max(a.amax());
                }
                let scale = scale.max(1e-12);
                BlockData {
                    n: b.dim,
                    g0: g0 / scale,
                    coeffs: coeffs.into_iter().map(|(i, a)| (i, a / scale)).collect(),
                }
            })
            .collect();

        let c_scale = 1.0 + self.c.amax();
        let total_dim: usize = data.iter().map(|d| d.n).sum();

        let mut x = DVector::<f64>::zeros(m_vars);
        let mut s: Vec<DMatrix<f64>> = data
            .iter()
            .map(|d| DMatrix::identity(d.n, d.n) * d.g0.amax().max(1.0))
            .collect();
        let mut z = s.clone();

        let mut stall = 0usize;
        let mut iter = 0usize;
        let mut best: Option<BestIterate> = None;
        let finish = |status, x: DVector<f64>, iterations, rp, rd, rg, mu, message: String| {
            let objective = self.c.dot(&x);
            Ok(SdpSolution {
                status,
                x,
                objective,
                iterations,
                rel_primal: rp,
                rel_dual: rd,
                rel_gap: rg,
                mu,
                message,
            })
        };

        let mut rel_primal = f64::NAN;
        let mut rel_dual = f64::NAN;
        let mut rel_gap = f64::NAN;
        let mut mu = f64::NAN;

        while iter < opts.max_iter {
            // Residuals at the current iterate.
            let mut e: Vec<DMatrix<f64>> = Vec::with_capacity(data.len());
            let mut atz = DVector::<f64>::zeros(m_vars);
            rel_primal = 0.0;
            for (j, d) in data.iter().enumerate() {
                let mut ej = &s[j] - &d.g0;
                for (i, a) in &d.coeffs {
                    if x[*i] != 0.0 {
                        ej -= a * x[*i];
                    }
                    atz[*i] += a.dot(&z[j]);
                }
                rel_primal = rel_primal.max(ej.norm() / (1.0 + d.g0.norm()));
                e.push(ej);
            }
            let r = &self.c - &atz;
            rel_dual = r.amax() / c_scale;
            let pobj = self.c.dot(&x);
            let dobj = -data.iter().zip(&z).map(|(d, zj)| d.g0.dot(zj)).sum::<f64>();
            rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            mu = s.iter().zip(&z).map(|(sj, zj)| sj.dot(zj)).sum::<f64>() / total_dim as f64;

            // Remember the most accurate iterate seen. The returned point is
            // x, so its quality is governed by primal feasibility and the
            // objective gap; the dual equality residual only loosens the
            // optimality certificate and is weighted accordingly.
            let metric = rel_primal.max(rel_gap).max(rel_dual / 100.0);
            if metric.is_finite() && best.as_ref().is_none_or(|b| metric < b.metric) {
                best = Some(BestIterate {
                    x: x.clone(),
                    metric,
                    rel_primal,
                    rel_dual,
                    rel_gap,
                    mu,
                });
            }

            if rel_primal <= opts.tol && rel_dual <= opts.tol && rel_gap <= opts.tol {
                return finish(
                    SdpStatus::Optimal,
                    x,
                    iter,
                    rel_primal,
                    rel_dual,
                    rel_gap,
                    mu,
                    "converged".into(),
                );
            }

            // Dual improving ray: the dual objective diverges while the
            // normalized multipliers nearly satisfy the homogeneous
            // constraint, certifying primal infeasibility.
            if dobj > 1e8 * c_scale && atz.amax() <= 1e-6 * dobj {
                return finish(
                    SdpStatus::Infeasible,
                    x,
                    iter,
                    rel_primal,
                    rel_dual,
                    rel_gap,
                    mu,
                    format!("dual ray with objective {dobj:.3e}"),
                );
            }

            // Nesterov-Todd scaling per block.
            let mut scales = Vec::with_capacity(data.len());
            for j in 0..data.len() {
                match nt_scale(&s[j], &z[j]) {
                    Some(sc) => scales.push(sc),
                    None => {
                        return finish_early(
                            &self.c,
                            best,
                            SdpStatus::NumericalFailure,
                            x,
                            iter,
                            [rel_primal, rel_dual, rel_gap, mu],
                            format!("scaling breakdown on block {j}"),
                        )
                    }
                }
            }

            // Scaled coefficients and residuals.
            let a_t: Vec<Vec<(usize, DMatrix<f64>)>> = data
                .iter()
                .zip(&scales)
                .map(|(d, sc)| {
                    d.coeffs
                        .iter()
                        .map(|(i, a)| (*i, linalg::sym_part(&(&sc.r_inv * a * sc.r_inv.transpose()))))
                        .collect()
                })
                .collect();
            let e_t: Vec<DMatrix<f64>> = e
                .iter()
                .zip(&scales)
                .map(|(ej, sc)| linalg::sym_part(&(&sc.r_inv * ej * sc.r_inv.transpose())))
                .collect();

            // Schur complement H_ik = sum_j <A~_ij, A~_kj>.
            let mut h = DMatrix::<f64>::zeros(m_vars, m_vars);
            for block in &a_t {
                for (pos, (i, ai)) in block.iter().enumerate() {
                    for (k, ak) in &block[..=pos] {
                        let v = ai.dot(ak);
                        h[(*i, *k)] += v;
                        if i != k {
                            h[(*k, *i)] += v;
                        }
                    }
                }
            }
            let h_chol = match chol_with_jitter(&h) {
                Some(c) => c,
                None => {
                    return finish_early(
                        &self.c,
                        best,
                        SdpStatus::NumericalFailure,
                        x,
                        iter,
                        [rel_primal, rel_dual, rel_gap, mu],
                        "Schur complement not positive definite".into(),
                    )
                }
            };

            // Predictor: pure Newton step toward complementarity zero.
            // The multiplier-direction term <A~, linv(-Lambda^2)> equals
            // -tr(A Z), which cancels against the dual residual, leaving
            // g_i = <A~, E~> - c_i.
            let mut g = DVector::<f64>::zeros(m_vars);
            for (j, block) in a_t.iter().enumerate() {
                for (i, ai) in block {
                    g[*i] += ai.dot(&e_t[j]);
                }
            }
            g -= &self.c;
            let dx_aff = h_chol.solve(&g);
            let mut ds_aff = Vec::with_capacity(data.len());
            let mut dz_aff = Vec::with_capacity(data.len());
            for (j, block) in a_t.iter().enumerate() {
                let mut dsj = -&e_t[j];
                for (i, ai) in block {
                    dsj += ai * dx_aff[*i];
                }
                let mut dzj = -&dsj;
                for k in 0..dzj.nrows() {
                    dzj[(k, k)] -= scales[j].lambda[k];
                }
                ds_aff.push(dsj);
                dz_aff.push(dzj);
            }
            // One shared step length for both cone variables. Unequal steps
            // let the complementarity gap collapse orders of magnitude below
            // a stalled residual, after which the scaled Newton system is too
            // ill conditioned to recover.
            let a_aff = step_limit(&scales, &ds_aff)
                .min(step_limit(&scales, &dz_aff))
                .min(1.0);

            // Centering weight from the predictor's projected gap.
            let mut gap_aff = 0.0;
            for (j, sc) in scales.iter().enumerate() {
                let lam = DMatrix::from_diagonal(&sc.lambda);
                let s_new = &lam + &ds_aff[j] * a_aff;
                let z_new = &lam + &dz_aff[j] * a_aff;
                gap_aff += s_new.dot(&z_new);
            }
            let mu_aff = gap_aff / total_dim as f64;
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

            // Corrector: recenter and compensate the second-order term.
            let mut q = Vec::with_capacity(data.len());
            for (j, sc) in scales.iter().enumerate() {
                let cross = linalg::sym_part(&(&ds_aff[j] * &dz_aff[j]));
                let mut rhs = -cross;
                for k in 0..rhs.nrows() {
                    rhs[(k, k)] += sigma * mu - sc.lambda[k] * sc.lambda[k];
                }
                q.push(linv(&rhs, &sc.lambda) + &e_t[j]);
            }
            let mut g = DVector::<f64>::zeros(m_vars);
            for (j, block) in a_t.iter().enumerate() {
                for (i, ai) in block {
                    g[*i] += ai.dot(&q[j]);
                }
            }
            g -= &r;
            let dx = h_chol.solve(&g);
            let mut ds_t = Vec::with_capacity(data.len());
            let mut dz_t = Vec::with_capacity(data.len());
            for (j, block) in a_t.iter().enumerate() {
                let mut dsj = -&e_t[j];
                for (i, ai) in block {
                    dsj += ai * dx[*i];
                }
                let dzj = &q[j] - &e_t[j] - &dsj;
                ds_t.push(dsj);
                dz_t.push(dzj);
            }
            let a = (0.98
                * step_limit(&scales, &ds_t).min(step_limit(&scales, &dz_t)))
            .min(1.0);

            x += &dx * a;
            for j in 0..data.len() {
                let sc = &scales[j];
                s[j] += linalg::sym_part(&(&sc.r * &ds_t[j] * sc.r.transpose())) * a;
                z[j] += linalg::sym_part(&(sc.r_inv.transpose() * &dz_t[j] * &sc.r_inv)) * a;
            }

            if a < 1e-10 {
                stall += 1;
                if stall >= 3 {
                    return finish_early(
                        &self.c,
                        best,
                        SdpStatus::NumericalFailure,
                        x,
                        iter,
                        [rel_primal, rel_dual, rel_gap, mu],
                        "step length collapsed".into(),
                    );
                }
            } else {
                stall = 0;
            }
            iter += 1;
        }

        finish_early(
            &self.c,
            best,
            SdpStatus::MaxIterations,
            x,
            iter,
            [rel_primal, rel_dual, rel_gap, mu],
            "iteration limit reached".into(),
        )
    }
}

/// Exit taken when the iteration cannot continue at full accuracy. Falls
/// back to the most accurate iterate seen when that iterate is good enough
/// to use, otherwise reports the failure as observed.
fn finish_early(
    c: &DVector<f64>,
    best: Option<BestIterate>,
    status: SdpStatus,
    x: DVector<f64>,
    iterations: usize,
    stats: [f64; 4],
    reason: String,
) -> Result<SdpSolution, SdpError> {
    if let Some(b) = best {
        if b.metric <= RELAXED_TOL {
            let objective = c.dot(&b.x);
            return Ok(SdpSolution {
                status: SdpStatus::Optimal,
                x: b.x,
                objective,
                iterations,
                rel_primal: b.rel_primal,
                rel_dual: b.rel_dual,
                rel_gap: b.rel_gap,
                mu: b.mu,
                message: format!("reduced accuracy ({:.1e}); {reason}", b.metric),
            });
        }
    }
    let objective = c.dot(&x);
    let [rel_primal, rel_dual, rel_gap, mu] = stats;
    Ok(SdpSolution {
        status,
        x,
        objective,
        iterations,
        rel_primal,
        rel_dual,
        rel_gap,
        mu,
        message: format!(
            "{reason} (primal {rel_primal:.1e}, dual {rel_dual:.1e}, gap {rel_gap:.1e}, \
             mu {mu:.1e})"
        ),
    })
}

struct BlockData {
    n: usize,
    g0: DMatrix<f64>,
    coeffs: Vec<(usize, DMatrix<f64>)>,
}

struct NtScale {
    /// Scaling factor: `R^-1 S R^-T = R^T Z R = diag(lambda)`.
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    lambda: DVector<f64>,
}

struct BestIterate {
    x: DVector<f64>,
    metric: f64,
    rel_primal: f64,
    rel_dual: f64,
    rel_gap: f64,
    mu: f64,
}

fn chol_with_jitter(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let n = m.nrows();
    let scale = m.diagonal().amax().max(1e-300);
    let mut delta = scale * 1e-14;
    for _ in 0..3 {
        if let Some(c) = Cholesky::new(m + DMatrix::<f64>::identity(n, n) * delta) {
            return Some(c);
        }
        delta *= 100.0;
    }
    None
}

/// Nesterov-Todd scaling of the pair (S, Z): factor `S = L L^T`, diagonalize
/// `L^T Z L = U diag(d) U^T`, and set `R = L U diag(d^-1/4)`. Then both
/// scaled variables equal `diag(sqrt(d))`.
fn nt_scale(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<NtScale> {
    let n = s.nrows();
    let chol = chol_with_jitter(s)?;
    let l = chol.l();
    let eig = nalgebra::SymmetricEigen::new(linalg::sym_part(&(l.transpose() * z * &l)));
    let d = eig.eigenvalues;
    if d.min() <= 0.0 || !d.iter().all(|v| v.is_finite()) {
        return None;
    }
    let u = eig.eigenvectors;
    let mut r = &l * &u;
    for j in 0..n {
        let f = d[j].powf(-0.25);
        r.column_mut(j).scale_mut(f);
    }
    let l_inv = l.solve_lower_triangular(&DMatrix::<f64>::identity(n, n))?;
    let mut r_inv = u.transpose() * l_inv;
    for k in 0..n {
        let f = d[k].powf(0.25);
        r_inv.row_mut(k).scale_mut(f);
    }
    let lambda = d.map(|v| v.sqrt());
    Some(NtScale { r, r_inv, lambda })
}

/// Inverse of the scaled symmetrized product operator: solve
/// `(1/2)(Lambda X + X Lambda) = D` entrywise.
fn linv(d: &DMatrix<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(d.nrows(), d.ncols(), |k, l| 2.0 * d[(k, l)] / (lambda[k] + lambda[l]))
}

/// Largest step keeping `diag(lambda) + alpha * dir` in the cone, over all
/// blocks.
fn step_limit(scales: &[NtScale], dirs: &[DMatrix<f64>]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (sc, dir) in scales.iter().zip(dirs) {
        let n = sc.lambda.len();
        let b = DMatrix::from_fn(n, n, |k, l| {
            dir[(k, l)] / (sc.lambda[k] * sc.lambda[l]).sqrt()
        });
        let e_min = linalg::min_eig(&b);
        if e_min < 0.0 {
            alpha = alpha.min(-1.0 / e_min);
        }
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::BlockSense;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn scalar_space() -> DecisionSpace {
        let mut sp = DecisionSpace::new();
        sp.add("x", VarKind::Scalar).unwrap();
        sp
    }

    fn block(name: &str, constant: DMatrix<f64>, coeffs: Vec<(usize, DMatrix<f64>)>) -> AffineBlock {
        let dim = constant.nrows();
        AffineBlock { name: name.into(), dim, constant, coeffs, sense: BlockSense::PositiveSemidef }
    }

    #[test]
    fn minimizes_a_schur_corner() {
        // min x s.t. [[x, 1], [1, 1]] >= 0, optimum x = 1.
        let space = scalar_space();
        let mut p = SdpProblem::minimizing(space, "x").unwrap();
        p.push_block(block(
            "corner",
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 1.0]),
            vec![(0, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]))],
        ));
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert!(sol.is_optimal(), "{sol:?}");
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-6);
        assert!(p.check(&sol.x).min_margin >= -1e-8);
    }

    #[test]
    fn solves_a_trace_minimal_lyapunov_problem() {
        // min tr(P) s.t. -A^T P - P A - I >= 0, P >= 0.1 I.
        let a_sys = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let mut space = DecisionSpace::new();
        space.add("P", VarKind::Symmetric { n: 2 }).unwrap();
        let decay = AffineBlock::from_affine_fn(
            "decay",
            &space,
            &["P"],
            BlockSense::PositiveSemidef,
            |xv| {
                let p = space_get(&space, xv);
                -(&a_sys.transpose() * &p) - &p * &a_sys - DMatrix::<f64>::identity(2, 2)
            },
        )
        .unwrap();
        let floor = AffineBlock::from_affine_fn(
            "floor",
            &space,
            &["P"],
            BlockSense::PositiveSemidef,
            |xv| space_get(&space, xv) - DMatrix::<f64>::identity(2, 2) * 0.1,
        )
        .unwrap();
        // tr(P) picks out the packed diagonal entries.
        let mut c = DVector::zeros(space.len());
        let off = space.indices("P").unwrap().start;
        c[off] = 1.0; // P11
        c[off + 2] = 1.0; // P22
        let mut prob = SdpProblem::new(space, c).unwrap();
        prob.push_block(decay);
        prob.push_block(floor);
        let sol = prob.solve(&SolverOptions::default()).unwrap();
        assert!(sol.is_optimal(), "{sol:?}");
        assert!(prob.check(&sol.x).min_margin >= -1e-8);

        // A feasible comparator: the solution of A^T P + P A = -2 I has
        // margin >= 0 on both blocks, so the optimum cannot exceed its
        // trace.
        let p_cmp = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0 - 0.5 / 3.0]);
        let lhs = -(&a_sys.transpose() * &p_cmp) - &p_cmp * &a_sys;
        if linalg::min_eig(&(lhs - DMatrix::<f64>::identity(2, 2))) >= 0.0 {
            assert!(sol.objective <= p_cmp.trace() + 1e-6);
        }
    }

    fn space_get(space: &DecisionSpace, x: &DVector<f64>) -> DMatrix<f64> {
        space.get_symmetric(x, "P")
    }

    #[test]
    fn detects_contradictory_scalar_bounds() {
        // x >= 1 and -x >= 0.
        let space = scalar_space();
        let mut p = SdpProblem::new(space, DVector::zeros(1)).unwrap();
        p.push_block(block(
            "ge1",
            DMatrix::from_element(1, 1, -1.0),
            vec![(0, DMatrix::from_element(1, 1, 1.0))],
        ));
        p.push_block(block(
            "le0",
            DMatrix::from_element(1, 1, 0.0),
            vec![(0, DMatrix::from_element(1, 1, -1.0))],
        ));
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible, "{sol:?}");
    }

    #[test]
    fn detects_an_indefinite_affine_pencil() {
        // [[x, 1], [1, -x]] has determinant -x^2 - 1 < 0 for every x.
        let space = scalar_space();
        let mut p = SdpProblem::minimizing(space, "x").unwrap();
        p.push_block(block(
            "pencil",
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            vec![(0, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]))],
        ));
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible, "{sol:?}");
    }

    #[test]
    fn detects_an_unstabilizable_decay_requirement() {
        // -2p - 1 >= 0 forces p <= -1/2, against p >= 0.1.
        let space = scalar_space();
        let mut p = SdpProblem::minimizing(space, "x").unwrap();
        p.push_block(block(
            "decay",
            DMatrix::from_element(1, 1, -1.0),
            vec![(0, DMatrix::from_element(1, 1, -2.0))],
        ));
        p.add_lower_bound("x", 0.1).unwrap();
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible, "{sol:?}");
    }

    #[test]
    fn matches_box_constrained_linear_optima() {
        // Interval problems with known corner solutions, dressed as one
        // diagonal block plus per-variable caps.
        let mut rng = StdRng::seed_from_u64(23);
        for trial in 0..10 {
            let n = rng.random_range(2..5usize);
            let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..-0.5)).collect();
            let hi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            let c: Vec<f64> = (0..n)
                .map(|_| {
                    let mag = rng.random_range(0.1..2.0);
                    if rng.random_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();

            let mut space = DecisionSpace::new();
            space.add("v", VarKind::Vector { len: n }).unwrap();
            let mut lower = DMatrix::zeros(n, n);
            for i in 0..n {
                lower[(i, i)] = -lo[i];
            }
            let coeffs: Vec<(usize, DMatrix<f64>)> = (0..n)
                .map(|i| {
                    let mut a = DMatrix::zeros(n, n);
                    a[(i, i)] = 1.0;
                    (i, a)
                })
                .collect();
            let mut prob = SdpProblem::new(space, DVector::from_vec(c.clone())).unwrap();
            prob.push_block(block("lower", lower, coeffs));
            for i in 0..n {
                prob.push_block(block(
                    &format!("upper{i}"),
                    DMatrix::from_element(1, 1, hi[i]),
                    vec![(i, DMatrix::from_element(1, 1, -1.0))],
                ));
            }
            let sol = prob.solve(&SolverOptions::default()).unwrap();
            assert!(sol.is_optimal(), "trial {trial}: {sol:?}");
            let expect: f64 =
                (0..n).map(|i| if c[i] > 0.0 { c[i] * lo[i] } else { c[i] * hi[i] }).sum();
            assert_relative_eq!(sol.objective, expect, epsilon = 1e-6 * (1.0 + expect.abs()));
            for i in 0..n {
                let want = if c[i] > 0.0 { lo[i] } else { hi[i] };
                assert_relative_eq!(sol.x[i], want, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn objective_is_stable_under_tiny_data_perturbation() {
        let solve_with = |shift: f64| {
            let space = scalar_space();
            let mut p = SdpProblem::minimizing(space, "x").unwrap();
            p.push_block(block(
                "corner",
                DMatrix::from_row_slice(2, 2, &[shift, 1.0, 1.0, 1.0]),
                vec![(0, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]))],
            ));
            p.solve(&SolverOptions::default()).unwrap().objective
        };
        let base = solve_with(0.0);
        let shifted = solve_with(1e-9);
        assert!((base - shifted).abs() < 1e-7);
    }

    #[test]
    fn rejects_malformed_problems() {
        assert!(matches!(
            SdpProblem::new(DecisionSpace::new(), DVector::zeros(0)),
            Err(SdpError::NoVariables)
        ));
        let space = scalar_space();
        assert!(matches!(
            SdpProblem::new(space, DVector::zeros(3)),
            Err(SdpError::ObjectiveLength { .. })
        ));
        let p = SdpProblem::minimizing(scalar_space(), "x").unwrap();
        assert!(matches!(p.solve(&SolverOptions::default()), Err(SdpError::NoBlocks)));
        let mut p = SdpProblem::minimizing(scalar_space(), "x").unwrap();
        assert!(p.add_lower_bound("y", 0.0).is_err());
    }

    #[test]
    fn solves_a_synthesis_shaped_problem() {
        // Stage-1 blocks for the scalar plant x' = -x + u + w, one channel
        // driven by (x, u), gain bound 0.5, shape W = 0.4.
        let sys = LftSystem::new(
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            vec![DMatrix::from_row_slice(2, 1, &[1.0, 0.0])],
            vec![DMatrix::from_row_slice(2, 1, &[0.0, 1.0])],
            DVector::zeros(1),
            DVector::zeros(1),
        )
        .unwrap();
        let gamma = [0.5];
        let w = DMatrix::from_element(1, 1, 0.4);
        let mut space = DecisionSpace::new();
        space.add("beta", VarKind::Scalar).unwrap();
        space.add("R", VarKind::Symmetric { n: 1 }).unwrap();
        space.add("F", VarKind::Full { rows: 1, cols: 1 }).unwrap();
        let stab =
            crate::lmi::build_sdp1_stability(&space, &sys, &gamma, "R", "F", 1e-6).unwrap();
        let gain = crate::lmi::build_sdp1_gain_lmi(&space, &w, "beta", "R", "F").unwrap();
        let mut prob = SdpProblem::minimizing(space, "beta").unwrap();
        prob.push_block(stab);
        prob.push_block(gain);
        prob.add_lower_bound("beta", 1e-9).unwrap();
        let delta_block = AffineBlock::from_affine_fn(
            "shape-floor",
            &prob.space,
            &["R"],
            BlockSense::PositiveSemidef,
            |xv| prob.space.get_symmetric(xv, "R") - DMatrix::<f64>::identity(1, 1) * 1e-6,
        )
        .unwrap();
        prob.push_block(delta_block);

        let sol = prob.solve(&SolverOptions::default()).unwrap();
        assert!(sol.is_optimal(), "{sol:?}");
        assert!(prob.check(&sol.x).min_margin >= -1e-8, "{:?}", prob.check(&sol.x));

        // The recovered gain must honor the level the surrogate certifies.
        let r = prob.space.get_symmetric(&sol.x, "R");
        let f = prob.space.get_full(&sol.x, "F");
        let beta = prob.space.get_scalar(&sol.x, "beta");
        let k = &f * linalg::sym_inverse(&r, 1e12).unwrap().0;
        let sigma = linalg::spectral_norm(&(&k * &w));
        assert!(sigma * sigma <= beta + 1e-6, "sigma^2 {} beta {}", sigma * sigma, beta);
    }

    use crate::model::LftSystem;
}
