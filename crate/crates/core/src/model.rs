//! Plant description, synthesis regions, and the certificate produced by a
//! successful synthesis run.
//!
//! The plant is written as `x' = A x + B1 u + B2 w` with `w_i = f_i(v_i)`
//! and `v_i = C_i x + D_i u`. All coordinates are deviations from the
//! equilibrium `(x0, u0)`. `B2` and the `(C_i, D_i)` pairs are 0/1
//! selector matrices: `B2` records which state equation each channel
//! enters, and `C_i`/`D_i` record which state and input coordinates drive
//! channel `i`. Each `v_i` lives in `R^(nx+nu)`, with rows `0..nx`
//! reserved for states and rows `nx..nx+nu` for inputs.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("region shape matrix: {0}")]
    RegionShape(#[from] linalg::LinalgError),
    #[error("ball radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("box bounds must satisfy lower < 0 < upper in every coordinate (coordinate {0})")]
    BadBoxBounds(usize),
}

/// Whether the synthesis region constrains the input deviation.
///
/// `Auto` resolves against the system: the input is constrained exactly
/// when some nonlinearity is driven by an input coordinate (some `D_i`
/// nonzero). When every channel depends on the state alone, bounding the
/// input adds nothing to the validity of the sampled gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstrainInput {
    Auto,
    On,
    Off,
}

impl ConstrainInput {
    /// Resolve `Auto` against a concrete system.
    pub fn resolved(self, sys: &LftSystem) -> bool {
        match self {
            ConstrainInput::On => true,
            ConstrainInput::Off => false,
            ConstrainInput::Auto => sys.d.iter().any(|d| d.iter().any(|&e| e != 0.0)),
        }
    }
}

/// Plant with isolated nonlinear channels.
#[derive(Debug, Clone)]
pub struct LftSystem {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: Vec<DMatrix<f64>>,
    pub d: Vec<DMatrix<f64>>,
    pub x0: DVector<f64>,
    pub u0: DVector<f64>,
}

impl LftSystem {
    /// Build a system, checking dimensional consistency only. Structural
    /// properties of the selector matrices are reported by
    /// [`validate_system`] so that partially formed systems can still be
    /// inspected.
    pub fn new(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        c: Vec<DMatrix<f64>>,
        d: Vec<DMatrix<f64>>,
        x0: DVector<f64>,
        u0: DVector<f64>,
    ) -> Result<Self, ModelError> {
        let nx = a.nrows();
        if a.ncols() != nx {
            return Err(ModelError::Dimension {
                what: "A",
                expected: format!("{nx}x{nx}"),
                got: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        if b1.nrows() != nx {
            return Err(ModelError::Dimension {
                what: "B1",
                expected: format!("{nx} rows"),
                got: format!("{} rows", b1.nrows()),
            });
        }
        let nu = b1.ncols();
        if b2.nrows() != nx {
            return Err(ModelError::Dimension {
                what: "B2",
                expected: format!("{nx} rows"),
                got: format!("{} rows", b2.nrows()),
            });
        }
        let nw = b2.ncols();
        if c.len() != nw || d.len() != nw {
            return Err(ModelError::Dimension {
                what: "selector families",
                expected: format!("{nw} pairs"),
                got: format!("{} C, {} D", c.len(), d.len()),
            });
        }
        for (i, ci) in c.iter().enumerate() {
            if ci.nrows() != nx + nu || ci.ncols() != nx {
                return Err(ModelError::Dimension {
                    what: "C_i",
                    expected: format!("{}x{nx} (channel {i})", nx + nu),
                    got: format!("{}x{}", ci.nrows(), ci.ncols()),
                });
            }
        }
        for (i, di) in d.iter().enumerate() {
            if di.nrows() != nx + nu || di.ncols() != nu {
                return Err(ModelError::Dimension {
                    what: "D_i",
                    expected: format!("{}x{nu} (channel {i})", nx + nu),
                    got: format!("{}x{}", di.nrows(), di.ncols()),
                });
            }
        }
        if x0.len() != nx || u0.len() != nu {
            return Err(ModelError::Dimension {
                what: "equilibrium",
                expected: format!("x0 len {nx}, u0 len {nu}"),
                got: format!("x0 len {}, u0 len {}", x0.len(), u0.len()),
            });
        }
        Ok(Self { a, b1, b2, c, d, x0, u0 })
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b1.ncols()
    }

    pub fn nw(&self) -> usize {
        self.b2.ncols()
    }

    /// `Phi_i = C_i^T + K^T D_i^T`, the map sending the state deviation to
    /// the driver vector of channel `i` under feedback `u = K x`.
    /// Dimensions `nx x (nx + nu)`.
    pub fn phi(&self, k: &DMatrix<f64>, i: usize) -> DMatrix<f64> {
        self.c[i].transpose() + k.transpose() * self.d[i].transpose()
    }
}

/// One failed structural invariant, reported by [`validate_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantViolation {
    /// Short machine-friendly label, e.g. `"b2-column"`.
    pub invariant: &'static str,
    /// Channel or column index the violation refers to, when meaningful.
    pub index: Option<usize>,
    pub detail: String,
}

/// Check the selector-structure invariants of a dimensionally consistent
/// system. Returns an empty list exactly when all invariants hold.
pub fn validate_system(sys: &LftSystem) -> Vec<InvariantViolation> {
    let mut out = Vec::new();
    let is_binary = |m: &DMatrix<f64>| m.iter().all(|&e| e == 0.0 || e == 1.0);

    if !is_binary(&sys.b2) {
        out.push(InvariantViolation {
            invariant: "b2-binary",
            index: None,
            detail: "B2 entries must be 0 or 1".into(),
        });
    }
    for j in 0..sys.nw() {
        let ones = sys.b2.column(j).iter().filter(|&&e| e == 1.0).count();
        let nonzeros = sys.b2.column(j).iter().filter(|&&e| e != 0.0).count();
        if ones != 1 || nonzeros != 1 {
            out.push(InvariantViolation {
                invariant: "b2-column",
                index: Some(j),
                detail: format!("B2 column {j} must contain exactly one 1, found {nonzeros} nonzeros"),
            });
        }
    }
    for i in 0..sys.nw() {
        let ci = &sys.c[i];
        let di = &sys.d[i];
        if !is_binary(ci) || !is_binary(di) {
            out.push(InvariantViolation {
                invariant: "selector-binary",
                index: Some(i),
                detail: format!("C_{i} / D_{i} entries must be 0 or 1"),
            });
        }
        for row in 0..ci.nrows() {
            let nnz = ci.row(row).iter().filter(|&&e| e != 0.0).count()
                + di.row(row).iter().filter(|&&e| e != 0.0).count();
            if nnz > 1 {
                out.push(InvariantViolation {
                    invariant: "selector-row",
                    index: Some(i),
                    detail: format!(
                        "row {row} of (C_{i}, D_{i}) selects {nnz} coordinates, at most one allowed"
                    ),
                });
            }
        }
        if ci.iter().all(|&e| e == 0.0) && di.iter().all(|&e| e == 0.0) {
            out.push(InvariantViolation {
                invariant: "selector-empty",
                index: Some(i),
                detail: format!("channel {i} has no driving coordinate (C_{i} and D_{i} both zero)"),
            });
        }
    }
    out
}

/// Axis-aligned box with the equilibrium strictly inside. Used both as the
/// sampling extent and as the outer bound that caps the certified region.
#[derive(Debug, Clone)]
pub struct BoxRegion {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxRegion {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, ModelError> {
        if lower.len() != upper.len() {
            return Err(ModelError::Dimension {
                what: "box bounds",
                expected: format!("{} entries", lower.len()),
                got: format!("{} entries", upper.len()),
            });
        }
        for i in 0..lower.len() {
            if !(lower[i] < 0.0 && 0.0 < upper[i]) {
                return Err(ModelError::BadBoxBounds(i));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-h, h]^n`.
    pub fn symmetric(half_widths: &[f64]) -> Result<Self, ModelError> {
        let h = DVector::from_row_slice(half_widths);
        Self::new(-h.clone(), h)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// Distance from the origin to the nearer face along coordinate `i`.
    pub fn half_extent(&self, i: usize) -> f64 {
        (-self.lower[i]).min(self.upper[i])
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        assert_eq!(x.len(), self.dim(), "box membership: dimension mismatch");
        (0..x.len()).all(|i| self.lower[i] <= x[i] && x[i] <= self.upper[i])
    }
}

/// Candidate region `D = E(W) x rB`: states in the ellipsoid
/// `{x : ||W^-1 x|| <= 1}`, inputs in the Euclidean ball of radius `r`
/// (when the input constraint is active).
#[derive(Debug, Clone)]
pub struct EllipsoidBallRegion {
    w: DMatrix<f64>,
    r: f64,
    pub constrain_input: ConstrainInput,
}

impl EllipsoidBallRegion {
    /// Build a region. `w` is symmetrized on construction; inputs whose
    /// relative asymmetry exceeds 1e-10 are rejected, as are shape
    /// matrices that are not positive definite.
    pub fn new(w: DMatrix<f64>, r: f64, constrain_input: ConstrainInput) -> Result<Self, ModelError> {
        let w = linalg::symmetrize_checked(&w, 1e-10)?;
        let min = linalg::eig_range(&w).0;
        if min <= 0.0 {
            return Err(ModelError::RegionShape(
                linalg::LinalgError::NotPositiveDefinite { min_eig: min },
            ));
        }
        if !(r > 0.0) {
            return Err(ModelError::NonPositiveRadius(r));
        }
        Ok(Self { w, r, constrain_input })
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn nx(&self) -> usize {
        self.w.nrows()
    }
}

/// Membership test for `D`, boundaries inclusive (up to a 1e-12 relative
/// guard so that points constructed exactly on the boundary are kept under
/// floating-point roundoff). With the input constraint off (or still
/// unresolved), only the state ellipsoid is tested; `Auto` is treated as
/// constrained, which is the conservative reading.
pub fn region_membership(region: &EllipsoidBallRegion, dx: &DVector<f64>, du: &DVector<f64>) -> bool {
    assert_eq!(dx.len(), region.nx(), "region membership: state dimension mismatch");
    let y = linalg::spd_solve(&region.w, dx).expect("region shape matrix is positive definite");
    if y.norm_squared() > 1.0 + 1e-12 {
        return false;
    }
    match region.constrain_input {
        ConstrainInput::Off => true,
        ConstrainInput::On | ConstrainInput::Auto => {
            du.norm_squared() <= region.r * region.r * (1.0 + 1e-12)
        }
    }
}

/// Everything needed to check a certified design after the fact: the
/// Lyapunov matrix, the gain, the multipliers, the input-gain level
/// `tau >= sigma_max(K W)`, the region, and the per-channel gains the
/// design was certified against.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub tau: f64,
    pub region: EllipsoidBallRegion,
    pub gamma: Vec<f64>,
}
