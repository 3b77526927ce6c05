//! Solver checks against problems whose optima are known in closed form,
//! plus hand-built infeasible instances and a regression on the hardest
//! synthesis instance the solver has tripped over.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use robsyn::linalg;
use robsyn::lmi::{AffineBlock, BlockSense, DecisionSpace, VarKind};
use robsyn::model::LftSystem;
use robsyn::sdp::{SdpProblem, SdpStatus, SolverOptions};
use robsyn::synthesis::{inner_iteration, solve_sdp2, InnerOutcome, StageOutcome};

fn psd_block(name: &str, constant: DMatrix<f64>, coeffs: Vec<(usize, DMatrix<f64>)>) -> AffineBlock {
    let dim = constant.nrows();
    AffineBlock { name: name.into(), dim, constant, coeffs, sense: BlockSense::PositiveSemidef }
}

fn random_orthogonal(rng: &mut StdRng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

/// Box problems min c^T x over a_i <= x_i <= b_i, stated as one dense PSD
/// block by rotating the diagonal slack matrix with a fixed orthogonal
/// congruence (which preserves the feasible set exactly). The optimum is
/// the vertex picked coordinatewise by the sign of c.
#[test]
fn fifty_random_rotated_box_problems_match_their_vertex_optima() {
    let mut rng = StdRng::seed_from_u64(21);
    let opts = SolverOptions::default();
    for case in 0..50 {
        let m = rng.random_range(2..6usize);
        let lo: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..-0.2)).collect();
        let hi: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..3.0)).collect();
        let c: Vec<f64> = (0..m)
            .map(|_| {
                let mag = rng.random_range(0.05..2.0);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let expected: f64 =
            (0..m).map(|i| c[i] * if c[i] > 0.0 { lo[i] } else { hi[i] }).sum();

        let mut space = DecisionSpace::new();
        let names: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
        for name in &names {
            space.add(name, VarKind::Scalar).unwrap();
        }
        let q = random_orthogonal(&mut rng, 2 * m);
        let mut constant = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            constant[(2 * i, 2 * i)] = -lo[i];
            constant[(2 * i + 1, 2 * i + 1)] = hi[i];
        }
        let constant = &q * constant * q.transpose();
        let coeffs = (0..m)
            .map(|i| {
                let mut g = DMatrix::zeros(2 * m, 2 * m);
                g[(2 * i, 2 * i)] = 1.0;
                g[(2 * i + 1, 2 * i + 1)] = -1.0;
                (i, &q * g * q.transpose())
            })
            .collect();
        let mut prob = SdpProblem::new(space, DVector::from_vec(c)).unwrap();
        prob.push_block(psd_block("rotated-box", constant, coeffs));

        let sol = prob.solve(&opts).unwrap();
        assert!(
            sol.is_optimal(),
            "case {case}: status {:?} ({})",
            sol.status,
            sol.message
        );
        let err = (sol.objective - expected).abs() / (1.0 + expected.abs());
        assert!(
            err <= 1e-6,
            "case {case}: objective {} vs analytic {expected} (rel err {err:.2e})",
            sol.objective
        );
    }
}

#[test]
fn contradictory_scalar_bounds_are_reported_infeasible() {
    let mut space = DecisionSpace::new();
    space.add("x", VarKind::Scalar).unwrap();
    let mut prob = SdpProblem::minimizing(space, "x").unwrap();
    prob.push_block(psd_block(
        "x-above-one",
        DMatrix::from_element(1, 1, -1.0),
        vec![(0, DMatrix::from_element(1, 1, 1.0))],
    ));
    prob.push_block(psd_block(
        "x-below-zero",
        DMatrix::zeros(1, 1),
        vec![(0, DMatrix::from_element(1, 1, -1.0))],
    ));
    let sol = prob.solve(&SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible, "{}", sol.message);
}

#[test]
fn contradictory_diagonal_block_is_reported_infeasible() {
    let mut space = DecisionSpace::new();
    space.add("x", VarKind::Scalar).unwrap();
    let mut prob = SdpProblem::minimizing(space, "x").unwrap();
    prob.push_block(psd_block(
        "diag(x - 1, -x - 1)",
        DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
        vec![(0, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]))],
    ));
    let sol = prob.solve(&SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible, "{}", sol.message);
}

#[test]
fn zero_corner_with_offdiagonal_one_is_reported_infeasible() {
    // [[0, 1], [1, x]] >= 0 fails for every x: the zero corner forces the
    // whole first row to vanish.
    let mut space = DecisionSpace::new();
    space.add("x", VarKind::Scalar).unwrap();
    let mut prob = SdpProblem::minimizing(space, "x").unwrap();
    prob.push_block(psd_block(
        "zero-corner",
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        vec![(0, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]))],
    ));
    let sol = prob.solve(&SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible, "{}", sol.message);
}

/// Pendulum-about-upright instance at the largest certifiable scale. The
/// sector bound here sits exactly on the feasibility rim, which used to
/// break the Nesterov-Todd scaling mid-iteration; the stages must now
/// come back with a usable design and a checkable certificate.
#[test]
fn pendulum_rim_instance_survives_the_alternation() {
    let sys = LftSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 9.8, -0.01]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        vec![DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])],
        vec![DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 0.0])],
        DVector::zeros(2),
        DVector::zeros(1),
    )
    .unwrap();
    let alpha = 2.0f64.sqrt();
    // Worst sector ratio of 9.8 (sin a - a) over the disk of radius alpha.
    let gamma = 9.8 * (alpha - alpha.sin()) / alpha;
    let w = DMatrix::identity(2, 2) * alpha;
    let opts = SolverOptions::default();

    let inner = match inner_iteration(&sys, &[gamma], &w, 30.0, false, 20, &opts).unwrap() {
        InnerOutcome::Done(r) => r,
        InnerOutcome::Failed { stage, detail } => panic!("{stage} failed: {detail}"),
    };
    assert!(inner.rounds >= 1, "no refinement round survived");

    let analysis = match solve_sdp2(&sys, &inner.k, &[gamma], &w, &inner.r0, &opts).unwrap() {
        StageOutcome::Solved(p) => p,
        StageOutcome::Failed { stage, detail } => panic!("{stage} failed: {detail}"),
    };
    let stab = robsyn::lmi::stability_matrix(&sys, &inner.k, &analysis.p, &analysis.lambda, &[gamma]);
    assert!(
        linalg::max_eig(&stab) < -1e-8,
        "certificate not strictly stable: max eig {}",
        linalg::max_eig(&stab)
    );
    assert!(linalg::min_eig(&analysis.p) > 0.0);
    // The loop must actually use feedback: the open pendulum is unstable.
    let acl = &sys.a + &sys.b1 * &inner.k;
    let stable = acl.complex_eigenvalues().iter().all(|e| e.re < 0.0);
    assert!(stable, "closed loop not Hurwitz: K = {:?}", inner.k);
}
