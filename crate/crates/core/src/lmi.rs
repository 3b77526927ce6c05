//! Matrix-inequality blocks used by the synthesis stages.
//!
//! A feasibility problem is described by [`AffineBlock`]s over a flat
//! [`DecisionSpace`]: each block is an affine symmetric-matrix function of
//! the decision vector together with a cone sense (positive semidefinite,
//! or negative definite with an explicit strictness margin). Blocks are
//! assembled from plain numeric evaluators by probing the evaluator on
//! basis vectors, so the same code path that the solver optimizes is also
//! what certificates are checked against.
//!
//! Layout of the stability blocks (`n_k` = number of channels with a
//! nonzero gain bound, each contributing one driver block of width
//! `nx + nu`):
//!
//! ```text
//!   [ loop block      coupling   drivers ]      nx rows
//!   [ coupling^T      -diag(l)   0       ]      n_w rows
//!   [ drivers^T       0          -l/g^2 I]      n_k (nx+nu) rows
//! ```
//!
//! Channels whose gain bound is zero keep their multiplier column but
//! contribute no driver block: a zero gain means the channel vanishes on
//! the region, and the corresponding quadratic constraint degenerates.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::model::LftSystem;

#[derive(Debug, Error)]
pub enum LmiError {
    #[error("unknown decision variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate decision variable `{0}`")]
    DuplicateVariable(String),
    #[error("gamma has {got} entries, system has {expected} channels")]
    GammaCount { expected: usize, got: usize },
    #[error("gamma[{index}] = {value} must be nonnegative and finite")]
    BadGamma { index: usize, value: f64 },
    #[error("split {split} outside matrix of size {size}")]
    BadSplit { split: usize, size: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Shape of one named decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Scalar,
    Vector { len: usize },
    /// Symmetric matrix, stored as the upper triangle in row-major order.
    Symmetric { n: usize },
    /// General matrix, stored row-major.
    Full { rows: usize, cols: usize },
}

impl VarKind {
    pub fn len(self) -> usize {
        match self {
            VarKind::Scalar => 1,
            VarKind::Vector { len } => len,
            VarKind::Symmetric { n } => n * (n + 1) / 2,
            VarKind::Full { rows, cols } => rows * cols,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarSpec {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
}

/// Flat decision vector with named, shaped views.
#[derive(Debug, Clone, Default)]
pub struct DecisionSpace {
    vars: Vec<VarSpec>,
    len: usize,
}

impl DecisionSpace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a variable and return the index range it occupies.
    pub fn add(&mut self, name: &str, kind: VarKind) -> Result<Range<usize>, LmiError> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(LmiError::DuplicateVariable(name.into()));
        }
        let offset = self.len;
        self.vars.push(VarSpec { name: name.into(), kind, offset });
        self.len += kind.len();
        Ok(offset..self.len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn vars(&self) -> &[VarSpec] {
        &self.vars
    }

    pub fn spec(&self, name: &str) -> Result<&VarSpec, LmiError> {
        self.vars
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| LmiError::UnknownVariable(name.into()))
    }

    pub fn indices(&self, name: &str) -> Result<Range<usize>, LmiError> {
        let spec = self.spec(name)?;
        Ok(spec.offset..spec.offset + spec.kind.len())
    }

    pub fn zero_point(&self) -> DVector<f64> {
        DVector::zeros(self.len)
    }

    pub fn get_scalar(&self, x: &DVector<f64>, name: &str) -> f64 {
        let spec = self.spec(name).expect("known variable");
        debug_assert_eq!(spec.kind, VarKind::Scalar);
        x[spec.offset]
    }

    pub fn get_vector(&self, x: &DVector<f64>, name: &str) -> DVector<f64> {
        let spec = self.spec(name).expect("known variable");
        let len = spec.kind.len();
        DVector::from_iterator(len, (0..len).map(|i| x[spec.offset + i]))
    }

    pub fn get_symmetric(&self, x: &DVector<f64>, name: &str) -> DMatrix<f64> {
        let spec = self.spec(name).expect("known variable");
        let n = match spec.kind {
            VarKind::Symmetric { n } => n,
            other => panic!("variable `{name}` is {other:?}, not symmetric"),
        };
        let mut m = DMatrix::zeros(n, n);
        let mut pos = spec.offset;
        for p in 0..n {
            for q in p..n {
                m[(p, q)] = x[pos];
                m[(q, p)] = x[pos];
                pos += 1;
            }
        }
        m
    }

    pub fn get_full(&self, x: &DVector<f64>, name: &str) -> DMatrix<f64> {
        let spec = self.spec(name).expect("known variable");
        let (rows, cols) = match spec.kind {
            VarKind::Full { rows, cols } => (rows, cols),
            other => panic!("variable `{name}` is {other:?}, not a full matrix"),
        };
        let mut m = DMatrix::zeros(rows, cols);
        let mut pos = spec.offset;
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = x[pos];
                pos += 1;
            }
        }
        m
    }

    pub fn set_scalar(&self, x: &mut DVector<f64>, name: &str, v: f64) {
        let spec = self.spec(name).expect("known variable");
        debug_assert_eq!(spec.kind, VarKind::Scalar);
        x[spec.offset] = v;
    }

    pub fn set_vector(&self, x: &mut DVector<f64>, name: &str, v: &DVector<f64>) {
        let spec = self.spec(name).expect("known variable");
        debug_assert_eq!(spec.kind.len(), v.len());
        for i in 0..v.len() {
            x[spec.offset + i] = v[i];
        }
    }

    pub fn set_symmetric(&self, x: &mut DVector<f64>, name: &str, m: &DMatrix<f64>) {
        let spec = self.spec(name).expect("known variable");
        let n = match spec.kind {
            VarKind::Symmetric { n } => n,
            other => panic!("variable `{name}` is {other:?}, not symmetric"),
        };
        debug_assert_eq!(m.nrows(), n);
        let mut pos = spec.offset;
        for p in 0..n {
            for q in p..n {
                x[pos] = 0.5 * (m[(p, q)] + m[(q, p)]);
                pos += 1;
            }
        }
    }

    pub fn set_full(&self, x: &mut DVector<f64>, name: &str, m: &DMatrix<f64>) {
        let spec = self.spec(name).expect("known variable");
        let (rows, cols) = match spec.kind {
            VarKind::Full { rows, cols } => (rows, cols),
            other => panic!("variable `{name}` is {other:?}, not a full matrix"),
        };
        debug_assert_eq!((m.nrows(), m.ncols()), (rows, cols));
        let mut pos = spec.offset;
        for r in 0..rows {
            for c in 0..cols {
                x[pos] = m[(r, c)];
                pos += 1;
            }
        }
    }
}

/// Cone sense of a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockSense {
    /// `G(x) >= 0` (positive semidefinite).
    PositiveSemidef,
    /// `G(x) <= -eps I`: strict negative definiteness with an explicit
    /// margin, passed to the solver as `-G(x) - eps I >= 0`.
    NegativeDefinite { eps: f64 },
}

/// Affine symmetric-matrix constraint `constant + sum_i x_i coeff_i`.
#[derive(Debug, Clone)]
pub struct AffineBlock {
    pub name: String,
    pub dim: usize,
    pub constant: DMatrix<f64>,
    /// Sparse list of (decision index, symmetric coefficient).
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
    pub sense: BlockSense,
}

impl AffineBlock {
    /// Evaluate the raw affine map at `x` (without the sense transform).
    pub fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (idx, coeff) in &self.coeffs {
            let xi = x[*idx];
            if xi != 0.0 {
                m += coeff * xi;
            }
        }
        m
    }

    /// The block in solver form `G0 + sum_i x_i G_i >= 0`.
    pub fn cone_form(&self) -> (DMatrix<f64>, Vec<(usize, DMatrix<f64>)>) {
        match self.sense {
            BlockSense::PositiveSemidef => (self.constant.clone(), self.coeffs.clone()),
            BlockSense::NegativeDefinite { eps } => {
                let g0 = -&self.constant - DMatrix::<f64>::identity(self.dim, self.dim) * eps;
                let gs = self.coeffs.iter().map(|(i, c)| (*i, -c)).collect();
                (g0, gs)
            }
        }
    }

    /// Margin of `x` with respect to the cone: the smallest eigenvalue of
    /// the solver-form matrix (nonnegative means feasible).
    pub fn cone_margin(&self, x: &DVector<f64>) -> f64 {
        let (g0, gs) = self.cone_form();
        let mut m = g0;
        for (idx, coeff) in &gs {
            m += coeff * x[*idx];
        }
        linalg::min_eig(&m)
    }

    /// Build a block by probing an affine evaluator on the basis vectors
    /// of the listed variables. The evaluator must be affine in the
    /// decision vector and is symmetrized (and checked) on every probe.
    pub fn from_affine_fn<F>(
        name: &str,
        space: &DecisionSpace,
        vars: &[&str],
        sense: BlockSense,
        f: F,
    ) -> Result<Self, LmiError>
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64>,
    {
        let zero = space.zero_point();
        let constant = linalg::symmetrize_checked(&f(&zero), 1e-10)?;
        let dim = constant.nrows();
        let mut coeffs = Vec::new();
        let mut probe = zero;
        for var in vars {
            for idx in space.indices(var)? {
                probe[idx] = 1.0;
                let coeff = linalg::symmetrize_checked(&f(&probe), 1e-10)? - &constant;
                probe[idx] = 0.0;
                if coeff.amax() > 0.0 {
                    coeffs.push((idx, coeff));
                }
            }
        }
        Ok(Self { name: name.into(), dim, constant, coeffs, sense })
    }
}

fn check_gamma(sys: &LftSystem, gamma: &[f64]) -> Result<(), LmiError> {
    if gamma.len() != sys.nw() {
        return Err(LmiError::GammaCount { expected: sys.nw(), got: gamma.len() });
    }
    for (i, &g) in gamma.iter().enumerate() {
        if !(g.is_finite() && g >= 0.0) {
            return Err(LmiError::BadGamma { index: i, value: g });
        }
    }
    Ok(())
}

/// Strictness margin for a negative definite block: a fixed relative level
/// scaled by the largest constant-term entry, so blocks with large fixed
/// data (for example `1/gamma^2` terms) are held proportionally far from
/// singularity.
fn strictness(constant: &DMatrix<f64>, eps_scale: f64) -> f64 {
    eps_scale * constant.amax().max(1.0)
}

/// Analysis-form stability matrix: the closed-loop Lyapunov block in the
/// Lyapunov matrix `p` and channel multipliers `lambda`, with the gain
/// bounds `gamma` fixed and the feedback `k` given.
pub fn stability_matrix(
    sys: &LftSystem,
    k: &DMatrix<f64>,
    p: &DMatrix<f64>,
    lambda: &DVector<f64>,
    gamma: &[f64],
) -> DMatrix<f64> {
    let nx = sys.nx();
    let nu = sys.nu();
    let n_w = sys.nw();
    let kept: Vec<usize> = (0..n_w).filter(|&i| gamma[i] > 0.0).collect();
    let bw = nx + nu;
    let dim = nx + n_w + kept.len() * bw;
    let mut m = DMatrix::zeros(dim, dim);

    let acl = &sys.a + &sys.b1 * k;
    let loop_block = p * &acl;
    m.view_mut((0, 0), (nx, nx)).copy_from(&(&loop_block + loop_block.transpose()));
    let coupling = p * &sys.b2;
    m.view_mut((0, nx), (nx, n_w)).copy_from(&coupling);
    m.view_mut((nx, 0), (n_w, nx)).copy_from(&coupling.transpose());
    for i in 0..n_w {
        m[(nx + i, nx + i)] = -lambda[i];
    }
    for (slot, &i) in kept.iter().enumerate() {
        let col = nx + n_w + slot * bw;
        let phi = sys.phi(k, i) * lambda[i];
        m.view_mut((0, col), (nx, bw)).copy_from(&phi);
        m.view_mut((col, 0), (bw, nx)).copy_from(&phi.transpose());
        let scale = -lambda[i] / (gamma[i] * gamma[i]);
        for t in 0..bw {
            m[(col + t, col + t)] = scale;
        }
    }
    m
}

/// Design-form stability matrix: the congruence of [`stability_matrix`]
/// that is affine in `r = p^-1` and `f = k r`, with multipliers fixed.
pub fn design_stability_matrix(
    sys: &LftSystem,
    r: &DMatrix<f64>,
    f: &DMatrix<f64>,
    lambda: &DVector<f64>,
    gamma: &[f64],
) -> DMatrix<f64> {
    let nx = sys.nx();
    let nu = sys.nu();
    let n_w = sys.nw();
    let kept: Vec<usize> = (0..n_w).filter(|&i| gamma[i] > 0.0).collect();
    let bw = nx + nu;
    let dim = nx + n_w + kept.len() * bw;
    let mut m = DMatrix::zeros(dim, dim);

    let loop_block = &sys.a * r + &sys.b1 * f;
    m.view_mut((0, 0), (nx, nx)).copy_from(&(&loop_block + loop_block.transpose()));
    m.view_mut((0, nx), (nx, n_w)).copy_from(&sys.b2);
    m.view_mut((nx, 0), (n_w, nx)).copy_from(&sys.b2.transpose());
    for i in 0..n_w {
        m[(nx + i, nx + i)] = -lambda[i];
    }
    for (slot, &i) in kept.iter().enumerate() {
        let col = nx + n_w + slot * bw;
        let phi = (r * sys.c[i].transpose() + f.transpose() * sys.d[i].transpose()) * lambda[i];
        m.view_mut((0, col), (nx, bw)).copy_from(&phi);
        m.view_mut((col, 0), (bw, nx)).copy_from(&phi.transpose());
        let scale = -lambda[i] / (gamma[i] * gamma[i]);
        for t in 0..bw {
            m[(col + t, col + t)] = scale;
        }
    }
    m
}

/// Exact input-gain block `[[tau^2 I, K], [K^T, W^-1 W^-1]]`: positive
/// semidefinite exactly when `sigma_max(K W) <= tau`.
pub fn build_input_bound_lmi(
    k: &DMatrix<f64>,
    w: &DMatrix<f64>,
    tau_sq: f64,
) -> Result<DMatrix<f64>, LmiError> {
    let (w_inv, _) = linalg::sym_inverse(w, 1e12)?;
    let nu = k.nrows();
    let nx = k.ncols();
    let mut m = DMatrix::zeros(nu + nx, nu + nx);
    for i in 0..nu {
        m[(i, i)] = tau_sq;
    }
    m.view_mut((0, nu), (nu, nx)).copy_from(k);
    m.view_mut((nu, 0), (nx, nu)).copy_from(&k.transpose());
    m.view_mut((nu, nu), (nx, nx)).copy_from(&(&w_inv * &w_inv));
    Ok(m)
}

/// Stage-1 stability block: design form with unit multipliers, strict.
/// Decision variables: `r_var` (symmetric) and `f_var` (full).
pub fn build_sdp1_stability(
    space: &DecisionSpace,
    sys: &LftSystem,
    gamma: &[f64],
    r_var: &str,
    f_var: &str,
    eps_scale: f64,
) -> Result<AffineBlock, LmiError> {
    check_gamma(sys, gamma)?;
    let ones = DVector::from_element(sys.nw(), 1.0);
    let mut block = AffineBlock::from_affine_fn(
        "stability",
        space,
        &[r_var, f_var],
        BlockSense::NegativeDefinite { eps: 0.0 },
        |x| {
            design_stability_matrix(
                sys,
                &space.get_symmetric(x, r_var),
                &space.get_full(x, f_var),
                &ones,
                gamma,
            )
        },
    )?;
    block.sense = BlockSense::NegativeDefinite { eps: strictness(&block.constant, eps_scale) };
    Ok(block)
}

/// Stage-3 stability block: design form with the multipliers fixed to the
/// values found by stage 2, strict.
pub fn build_sdp3_stability(
    space: &DecisionSpace,
    sys: &LftSystem,
    gamma: &[f64],
    lambda: &DVector<f64>,
    r_var: &str,
    f_var: &str,
    eps_scale: f64,
) -> Result<AffineBlock, LmiError> {
    check_gamma(sys, gamma)?;
    let mut block = AffineBlock::from_affine_fn(
        "stability",
        space,
        &[r_var, f_var],
        BlockSense::NegativeDefinite { eps: 0.0 },
        |x| {
            design_stability_matrix(
                sys,
                &space.get_symmetric(x, r_var),
                &space.get_full(x, f_var),
                lambda,
                gamma,
            )
        },
    )?;
    block.sense = BlockSense::NegativeDefinite { eps: strictness(&block.constant, eps_scale) };
    Ok(block)
}

/// Analysis-form stability block for a fixed gain: affine in the Lyapunov
/// matrix `p_var` and the multipliers `lambda_var`, strict.
pub fn build_stability_lmi(
    space: &DecisionSpace,
    sys: &LftSystem,
    k: &DMatrix<f64>,
    gamma: &[f64],
    p_var: &str,
    lambda_var: &str,
    eps_scale: f64,
) -> Result<AffineBlock, LmiError> {
    check_gamma(sys, gamma)?;
    let mut block = AffineBlock::from_affine_fn(
        "stability",
        space,
        &[p_var, lambda_var],
        BlockSense::NegativeDefinite { eps: 0.0 },
        |x| {
            stability_matrix(
                sys,
                k,
                &space.get_symmetric(x, p_var),
                &space.get_vector(x, lambda_var),
                gamma,
            )
        },
    )?;
    block.sense = BlockSense::NegativeDefinite { eps: strictness(&block.constant, eps_scale) };
    Ok(block)
}

/// Gain-level surrogate matrix used by stage 1,
/// `[[beta I, F], [F^T, (W^-1 R)^T + W^-1 R - I]]`.
///
/// Positive semidefiniteness bounds `sigma_max(F R^-1 W)^2 <= beta`; the
/// bound is tight when `R = W`.
pub fn sdp1_gain_matrix(
    w_inv: &DMatrix<f64>,
    beta: f64,
    r: &DMatrix<f64>,
    f: &DMatrix<f64>,
) -> DMatrix<f64> {
    let nu = f.nrows();
    let nx = f.ncols();
    let mut m = DMatrix::zeros(nu + nx, nu + nx);
    for i in 0..nu {
        m[(i, i)] = beta;
    }
    m.view_mut((0, nu), (nu, nx)).copy_from(f);
    m.view_mut((nu, 0), (nx, nu)).copy_from(&f.transpose());
    let g = w_inv * r;
    let trailing = &g + g.transpose() - DMatrix::<f64>::identity(nx, nx);
    m.view_mut((nu, nu), (nx, nx)).copy_from(&trailing);
    m
}

/// Stage-1 gain block over (`beta_var`, `r_var`, `f_var`).
pub fn build_sdp1_gain_lmi(
    space: &DecisionSpace,
    w: &DMatrix<f64>,
    beta_var: &str,
    r_var: &str,
    f_var: &str,
) -> Result<AffineBlock, LmiError> {
    let (w_inv, _) = linalg::sym_inverse(w, 1e12)?;
    AffineBlock::from_affine_fn(
        "gain",
        space,
        &[beta_var, r_var, f_var],
        BlockSense::PositiveSemidef,
        |x| {
            sdp1_gain_matrix(
                &w_inv,
                space.get_scalar(x, beta_var),
                &space.get_symmetric(x, r_var),
                &space.get_full(x, f_var),
            )
        },
    )
}

/// Gain-level surrogate matrix used by stage 3: like the stage-1 form but
/// linearized at the previous shape `r0`, so the bound is tight at
/// `R = R0` instead of at `R = W`.
pub fn sdp3_gain_matrix(
    w_inv: &DMatrix<f64>,
    r0: &DMatrix<f64>,
    beta: f64,
    r: &DMatrix<f64>,
    f: &DMatrix<f64>,
) -> DMatrix<f64> {
    let nu = f.nrows();
    let nx = f.ncols();
    let mut m = DMatrix::zeros(nu + nx, nu + nx);
    for i in 0..nu {
        m[(i, i)] = beta;
    }
    m.view_mut((0, nu), (nu, nx)).copy_from(f);
    m.view_mut((nu, 0), (nx, nu)).copy_from(&f.transpose());
    let g = w_inv * r;
    let g0 = w_inv * r0;
    let trailing = g.transpose() * &g0 + g0.transpose() * &g - g0.transpose() * &g0;
    m.view_mut((nu, nu), (nx, nx)).copy_from(&trailing);
    m
}

/// Stage-3 gain block over (`beta_var`, `r_var`, `f_var`).
pub fn build_sdp3_gain_lmi(
    space: &DecisionSpace,
    w: &DMatrix<f64>,
    r0: &DMatrix<f64>,
    beta_var: &str,
    r_var: &str,
    f_var: &str,
) -> Result<AffineBlock, LmiError> {
    let (w_inv, _) = linalg::sym_inverse(w, 1e12)?;
    let r0 = r0.clone();
    AffineBlock::from_affine_fn(
        "gain",
        space,
        &[beta_var, r_var, f_var],
        BlockSense::PositiveSemidef,
        |x| {
            sdp3_gain_matrix(
                &w_inv,
                &r0,
                space.get_scalar(x, beta_var),
                &space.get_symmetric(x, r_var),
                &space.get_full(x, f_var),
            )
        },
    )
}

/// Gain-level surrogate matrix used by stage 2, in the Lyapunov matrix
/// `p` with the gain `k` fixed and linearization shape `r0`:
///
/// ```text
/// [ beta I   K                          0                ]
/// [ K^T      W^-2 R0 P + P R0 W^-2      P                ]
/// [ 0        P                          R0^-1 W^2 R0^-1  ]
/// ```
///
/// Positive semidefiniteness bounds `sigma_max(K W)^2 <= beta`; the bound
/// is tight at `P = R0^-1`.
pub fn sdp2_gain_matrix(
    w_inv: &DMatrix<f64>,
    w: &DMatrix<f64>,
    r0: &DMatrix<f64>,
    r0_inv: &DMatrix<f64>,
    beta: f64,
    k: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let nu = k.nrows();
    let nx = k.ncols();
    let mut m = DMatrix::zeros(nu + 2 * nx, nu + 2 * nx);
    for i in 0..nu {
        m[(i, i)] = beta;
    }
    m.view_mut((0, nu), (nu, nx)).copy_from(k);
    m.view_mut((nu, 0), (nx, nu)).copy_from(&k.transpose());
    let scaled = w_inv * w_inv * r0 * p;
    let middle = &scaled + scaled.transpose();
    m.view_mut((nu, nu), (nx, nx)).copy_from(&middle);
    m.view_mut((nu, nu + nx), (nx, nx)).copy_from(p);
    m.view_mut((nu + nx, nu), (nx, nx)).copy_from(p);
    let corner = r0_inv * w * w * r0_inv;
    m.view_mut((nu + nx, nu + nx), (nx, nx)).copy_from(&corner);
    m
}

/// Stage-2 gain block over (`beta_var`, `p_var`) with `k` fixed.
///
/// Rejects linearization shapes `r0` with condition number above 1e10:
/// past that point the inverted corner block is numerically meaningless.
pub fn build_sdp2_gain_lmi(
    space: &DecisionSpace,
    w: &DMatrix<f64>,
    r0: &DMatrix<f64>,
    k: &DMatrix<f64>,
    beta_var: &str,
    p_var: &str,
) -> Result<AffineBlock, LmiError> {
    let (w_inv, _) = linalg::sym_inverse(w, 1e12)?;
    let (r0_inv, _) = linalg::sym_inverse(r0, 1e10)?;
    let w = w.clone();
    let r0 = r0.clone();
    AffineBlock::from_affine_fn(
        "gain",
        space,
        &[beta_var, p_var],
        BlockSense::PositiveSemidef,
        |x| {
            sdp2_gain_matrix(
                &w_inv,
                &w,
                &r0,
                &r0_inv,
                space.get_scalar(x, beta_var),
                k,
                &space.get_symmetric(x, p_var),
            )
        },
    )
}

/// Result of checking positive definiteness of `[[A, B], [B^T, D]]` both
/// directly and through the complement `A - B D^-1 B^T`.
#[derive(Debug, Clone)]
pub struct SchurReport {
    pub direct: bool,
    pub via_complement: bool,
    pub min_eig: f64,
    pub trailing_min_eig: f64,
    /// Smallest eigenvalue of the complement; meaningful only when the
    /// trailing block is positive definite.
    pub complement_min_eig: f64,
}

impl SchurReport {
    pub fn agree(&self) -> bool {
        self.direct == self.via_complement
    }
}

/// Check positive definiteness of a symmetric matrix split after `split`
/// rows by the two equivalent routes.
pub fn schur_complement_check(m: &DMatrix<f64>, split: usize) -> Result<SchurReport, LmiError> {
    let n = m.nrows();
    if split == 0 || split >= n {
        return Err(LmiError::BadSplit { split, size: n });
    }
    let m = linalg::symmetrize_checked(m, 1e-10)?;
    let min_eig = linalg::min_eig(&m);

    let a = m.view((0, 0), (split, split)).into_owned();
    let b = m.view((0, split), (split, n - split)).into_owned();
    let d = m.view((split, split), (n - split, n - split)).into_owned();
    let trailing_min_eig = linalg::min_eig(&d);
    let (via_complement, complement_min_eig) = if trailing_min_eig > 0.0 {
        let (d_inv, _) = linalg::sym_inverse(&d, f64::INFINITY)?;
        let comp = a - &b * d_inv * b.transpose();
        let c_min = linalg::min_eig(&comp);
        (c_min > 0.0, c_min)
    } else {
        (false, f64::NAN)
    };

    Ok(SchurReport {
        direct: min_eig > 0.0,
        via_complement,
        min_eig,
        trailing_min_eig,
        complement_min_eig,
    })
}
