//! Acceptance gate: one test (one pass/fail line) per criterion.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sbp_adaptive::lsq::numerical_rank;
use sbp_adaptive::*;

fn monomial(op: &SbpOperator, m: u32) -> (DVector<f64>, DVector<f64>) {
    let x = DVector::from_fn(op.n + 1, |i, _| i as f64 * op.dx);
    let u = x.map(|v| v.powi(m as i32));
    let du = x.map(|v| if m == 0 { 0.0 } else { m as f64 * v.powi(m as i32 - 1) });
    (op.apply_d(&u), du)
}

fn boundary_matrix(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n + 1, n + 1);
    b[(0, 0)] = -1.0;
    b[(n, n)] = 1.0;
    b
}

fn random_smooth(rng: &mut ChaCha8Rng, x: &DVector<f64>) -> DVector<f64> {
    let mut u = DVector::zeros(x.len());
    for freq in 1..=4 {
        let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let w = 2.0 * std::f64::consts::PI * freq as f64;
        u += x.map(|v| a * (w * v).sin() + b * (w * v).cos());
    }
    u
}

/// SBP(4,2) exact on 1, x, x^2 at all rows and x^3, x^4 at interior rows;
/// block-norm target exact on 1, x, x^2, x^3 at all rows.
#[test]
fn criterion_1_operator_exactness() {
    let n = 40;
    let dx = 1.0 / n as f64;
    let sbp42 = make_sbp42(n, dx).unwrap();
    for m in 0..=2u32 {
        let (got, want) = monomial(&sbp42, m);
        let scale = want.amax().max(1.0);
        assert!((got - want).amax() <= 1e-12 * scale, "SBP(4,2) degree {m}");
    }
    for m in 3..=4u32 {
        let (got, want) = monomial(&sbp42, m);
        let scale = want.amax().max(1.0);
        for i in 4..=n - 4 {
            assert!(
                (got[i] - want[i]).abs() <= 1e-12 * scale,
                "SBP(4,2) interior degree {m} row {i}"
            );
        }
    }
    let target = make_blocknorm_target(n, dx).unwrap();
    for m in 0..=3u32 {
        let (got, want) = monomial(&target, m);
        let scale = want.amax().max(1.0);
        assert!((got - want).amax() <= 1e-9 * scale, "target degree {m}");
    }
}

/// max|Q + Q^T - B| <= 1e-14 for SBP(4,2), the target, and 100 random
/// assembled adaptive Q's.
#[test]
fn criterion_2_sbp_identity() {
    let n = 24;
    let b = boundary_matrix(n);
    let sbp42 = make_sbp42(n, 1.0 / n as f64).unwrap();
    let target = make_blocknorm_target(n, 1.0 / n as f64).unwrap();
    assert!((&sbp42.q + sbp42.q.transpose() - &b).amax() <= 1e-14, "SBP(4,2)");
    assert!((&target.q + target.q.transpose() - &b).amax() <= 1e-14, "target");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..100 {
        let mut w = StencilVector::zeros();
        for c in w.0.iter_mut() {
            *c = rng.gen_range(-2.0..2.0);
        }
        let q = assemble_q(&w, n);
        assert!((&q + q.transpose() - &b).amax() <= 1e-14, "random Q {trial}");
    }
}

/// |2 sum u^T P rhs + theta sum jumps^2| <= 1e-11 over 100 random states
/// with K in {1, 3, 4} and theta in {0, 1, 2}.
#[test]
fn criterion_3_energy_identity() {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = 0;
    'outer: loop {
        for &k in &[1usize, 3, 4] {
            for &theta in &[0.0f64, 1.0, 2.0] {
                let grid = BlockGrid::unit(k, n).unwrap();
                let base = make_sbp42(n, grid.dx).unwrap();
                let ops = vec![base.clone(); k];
                let mut state = MultiBlockState::sample(&grid, 0.0, |_| 0.0);
                for block in state.blocks.iter_mut() {
                    for v in block.iter_mut() {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                }
                let (lhs, rhs_val) = energy_rate_identity(&state, &ops, theta).unwrap();
                assert!(
                    (lhs - rhs_val).abs() <= 1e-11,
                    "K={k} theta={theta}: lhs={lhs:.3e} rhs={rhs_val:.3e}"
                );
                cases += 1;
                if cases >= 100 {
                    break 'outer;
                }
            }
        }
    }
}

/// optimize_block_operator on u = x^2 reproduces the SBP(4,2) Q to 1e-8.
#[test]
fn criterion_4_oracle_recovery() {
    let n = 40;
    let grid = BlockGrid::unit(1, n).unwrap();
    let base = make_sbp42(n, grid.dx).unwrap();
    let target = make_blocknorm_target(n, grid.dx).unwrap();
    let config = OptimizerConfig::with_anchor(base.stencil().unwrap());
    let x = grid.block_coords(0);
    let u = x.map(|v| v * v);
    let op = optimize_block_operator(&u, &x, &base, &target, &config).unwrap();
    assert!((&op.q - &base.q).amax() <= 1e-8);
}

/// Numerical rank of A(u) stays below 14 at relative cutoff 1e-8 for 20
/// random smooth profiles at N = 40.
#[test]
fn criterion_5_rank_deficiency() {
    let n = 40;
    let grid = BlockGrid::unit(1, n).unwrap();
    let base = make_sbp42(n, grid.dx).unwrap();
    let target = make_blocknorm_target(n, grid.dx).unwrap();
    let x = grid.block_coords(0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..20 {
        let u = random_smooth(&mut rng, &x);
        let v = target.apply_d(&u);
        let stage = build_stage(&u, &v, &base.p).unwrap();
        let rank = numerical_rank(&stage.a, 1e-8);
        assert!(rank < 14, "trial {trial}: rank {rank}");
    }
}

/// Headline superconvergence at K=4, N in {20, 40, 80, 160}: conventional
/// last-pair rate 3.0 +- 0.3, adaptive 4.0 +- 0.4, and the adaptive N=160
/// error at most a tenth of the conventional one.
#[test]
fn criterion_6_headline_superconvergence() {
    let n_list = [20, 40, 80, 160];
    let conv = convergence_study(&SolverConfig::new(Mode::Conventional, 1.0), 4, &n_list).unwrap();
    let adap = convergence_study(&SolverConfig::new(Mode::Adaptive, 1.0), 4, &n_list).unwrap();
    let conv_rate = conv.last().unwrap().rate.unwrap();
    let adap_rate = adap.last().unwrap().rate.unwrap();
    assert!(
        (conv_rate - 3.0).abs() <= 0.3,
        "conventional rate {conv_rate:.3}"
    );
    assert!((adap_rate - 4.0).abs() <= 0.4, "adaptive rate {adap_rate:.3}");
    let ratio = adap.last().unwrap().error / conv.last().unwrap().error;
    assert!(ratio <= 0.1, "error ratio {ratio:.4}");
}

/// Single-block variant: K=1, N in {80, 160, 320}, adaptive rate 4.0 +- 0.4.
#[test]
fn criterion_7_single_block() {
    let records =
        convergence_study(&SolverConfig::new(Mode::Adaptive, 1.0), 1, &[80, 160, 320]).unwrap();
    let rate = records.last().unwrap().rate.unwrap();
    assert!((rate - 4.0).abs() <= 0.4, "adaptive rate {rate:.3}");
}

/// Halving the integrator tolerances changes the N=40 final error by < 1%.
#[test]
fn criterion_8_time_integration_negligibility() {
    let config = SolverConfig::new(Mode::Adaptive, 1.0);
    let mut tight = config.clone();
    tight.abs_tol /= 2.0;
    tight.rel_tol /= 2.0;
    let grid = BlockGrid::unit(4, 40).unwrap();
    let e0 = run(&config, &grid, |x| exact_solution(x, 0.0))
        .unwrap()
        .series
        .last()
        .unwrap()
        .1;
    let e1 = run(&tight, &grid, |x| exact_solution(x, 0.0))
        .unwrap()
        .series
        .last()
        .unwrap()
        .1;
    assert!(
        (e0 - e1).abs() / e0 < 0.01,
        "relative change {:.3e}",
        (e0 - e1).abs() / e0
    );
}
