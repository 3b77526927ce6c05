//! Robust state-feedback synthesis for systems with sampled nonlinearities.
//!
//! The plant is `x' = A x + B1 u + B2 w` where each channel `w_i` is an
//! unknown static function of `v_i = C_i x + D_i u`, known only through
//! point evaluations. The pipeline samples the nonlinearity on a grid
//! ([`sampling`]), bounds each channel by an empirical gain ([`sampling::compute_gamma`]),
//! and searches for the largest ellipsoidal region on which a linear
//! state feedback is certified by a quadratic Lyapunov function
//! ([`synthesis`]). The matrix-inequality feasibility problems are solved
//! by the self-contained semidefinite solver in [`sdp`], and certified
//! designs can be replayed against the true nonlinearity in [`verify`].

pub mod linalg;
pub mod lmi;
pub mod model;
pub mod sampling;
pub mod sdp;
pub mod synthesis;
pub mod verify;
