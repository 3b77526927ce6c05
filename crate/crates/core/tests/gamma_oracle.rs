//! Checks of the empirical gain estimator against a brute-force
//! enumeration that shares nothing with the estimator but the sample set,
//! plus the monotonicity the scale search relies on.

use nalgebra::{DMatrix, DVector};
use robsyn::model::{BoxRegion, ConstrainInput, EllipsoidBallRegion};
use robsyn::sampling::{compute_gamma, infer_structure, sample_grid, SampleSet};

const V_FLOOR: f64 = 1e-9;

fn quadratic_oracle(dx: &DVector<f64>, du: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![
        -dx[0] * dx[1] + du[0] * du[0],
        dx[0] * dx[0] - du[0] * du[0],
    ])
}

fn quadratic_samples() -> SampleSet {
    let x_box = BoxRegion::symmetric(&[0.75, 0.75]).unwrap();
    let u_box = BoxRegion::symmetric(&[0.55]).unwrap();
    sample_grid(&quadratic_oracle, &x_box, &u_box, &[31, 31], &[31]).unwrap()
}

/// Channel 2 carries x1^2 - u^2 and is driven by (x1, u) alone. The
/// brute force recomputes its worst ratio by direct enumeration of the
/// sample list, reimplementing membership and the ratio arithmetic from
/// the raw definitions.
#[test]
fn estimator_matches_brute_force_enumeration_on_channel_two() {
    let samples = quadratic_samples();
    let structure = infer_structure(&samples, 1e-12);
    assert_eq!(structure.n_channels(), 2);

    let w = DMatrix::from_partial_diagonal(2, 2, &[0.5, 0.75]);
    let r = 0.5;
    let region = EllipsoidBallRegion::new(w, r, ConstrainInput::On).unwrap();

    let mut brute = 0.0f64;
    let mut used = 0usize;
    for p in samples.points() {
        let inside_state =
            (p.dx[0] / 0.5).powi(2) + (p.dx[1] / 0.75).powi(2) <= 1.0 + 1e-12;
        let inside_input = p.du[0] * p.du[0] <= r * r * (1.0 + 1e-12);
        if !(inside_state && inside_input) {
            continue;
        }
        let v = (p.dx[0] * p.dx[0] + p.du[0] * p.du[0]).sqrt();
        let w2 = (p.dx[0] * p.dx[0] - p.du[0] * p.du[0]).abs();
        if v >= V_FLOOR {
            brute = brute.max(w2 / v);
            used += 1;
        }
    }
    assert!(used > 0);

    let bounds = compute_gamma(&samples, &structure, &region, V_FLOOR).unwrap();
    assert_eq!(bounds.n_used[1], used, "estimator retained a different sample set");
    assert!(
        (bounds.gamma[1] - brute).abs() <= 1e-12,
        "estimator {} vs brute force {brute}",
        bounds.gamma[1]
    );
}

/// Shrinking the region can only discard candidate ratios, so the gain
/// estimate is monotone in the scale, channel by channel.
#[test]
fn gain_estimates_are_monotone_over_nested_regions() {
    let samples = quadratic_samples();
    let structure = infer_structure(&samples, 1e-12);
    let w0 = DMatrix::from_partial_diagonal(2, 2, &[0.75, 0.75]);

    let mut previous: Option<Vec<f64>> = None;
    for k in 0..20 {
        let alpha = 0.25 + 0.75 * (k as f64) / 19.0;
        let region =
            EllipsoidBallRegion::new(&w0 * alpha, 0.55, ConstrainInput::On).unwrap();
        let bounds = compute_gamma(&samples, &structure, &region, V_FLOOR).unwrap();
        if let Some(prev) = &previous {
            for (i, (&small, &big)) in prev.iter().zip(&bounds.gamma).enumerate() {
                assert!(
                    big >= small,
                    "channel {i}: gain fell from {small} to {big} as the region grew"
                );
            }
        }
        previous = Some(bounds.gamma);
    }
}
