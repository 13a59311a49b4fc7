//! Self-checks behind the CLI `validate` study: operator identities, energy
//! algebra and optimizer properties on seeded random data.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::blocknorm::make_blocknorm_target;
use crate::grid::BlockGrid;
use crate::lsq::{build_stage, numerical_rank, optimize_block_operator, OptimizerConfig};
use crate::operator::{make_sbp42, validate_sbp};
use crate::solver::{energy_rate_identity, MultiBlockState};
use crate::stencil::{assemble_q, StencilVector};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

/// Runs the full property suite and returns one line per check.
pub fn run_validation() -> Vec<CheckResult> {
    let mut results = Vec::new();
    let n = 16;
    let dx = 1.0 / n as f64;

    let sbp42 = make_sbp42(n, dx).unwrap();
    let report = validate_sbp(&sbp42);
    results.push(check(
        "sbp42 identity residual",
        report.sbp_identity_residual == 0.0,
        format!("residual = {:e}", report.sbp_identity_residual),
    ));
    results.push(check(
        "sbp42 norm SPD",
        report.norm_spd,
        String::new(),
    ));
    let boundary_ok = (0..=n).all(|i| {
        let want = if (4..=n - 4).contains(&i) { 4 } else { 2 };
        report.exactness_degrees[i] == Some(want)
    });
    results.push(check(
        "sbp42 exactness degrees (2 boundary / 4 interior)",
        boundary_ok,
        format!("{:?}", report.exactness_degrees),
    ));

    match make_blocknorm_target(n, dx) {
        Ok(target) => {
            let report = validate_sbp(&target);
            let ok = (0..=n).all(|i| report.exactness_degrees[i] >= Some(3));
            results.push(check(
                "block-norm target exact through degree 3",
                ok && report.norm_spd && report.sbp_identity_residual <= 1e-14,
                format!(
                    "residual = {:e}, spd = {}",
                    report.sbp_identity_residual, report.norm_spd
                ),
            ));
        }
        Err(e) => results.push(check(
            "block-norm target exact through degree 3",
            false,
            e.to_string(),
        )),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5BAD);

    // Randomly assembled adaptive Q always satisfies the SBP identity.
    let max_res = (0..100)
        .map(|_| {
            let mut w = StencilVector::zeros();
            for c in w.0.iter_mut() {
                *c = rng.gen::<f64>() * 4.0 - 2.0;
            }
            let q = assemble_q(&w, n);
            let mut s = &q + q.transpose();
            s[(0, 0)] += 1.0;
            s[(n, n)] -= 1.0;
            s.amax()
        })
        .fold(0.0f64, f64::max);
    results.push(check(
        "assembled Q identity (100 random w)",
        max_res <= 1e-14,
        format!("max residual = {max_res:e}"),
    ));

    // Energy rate identity over random states.
    let mut worst = 0.0f64;
    for &kk in &[1usize, 3, 4] {
        for &theta in &[0.0, 1.0, 2.0] {
            let grid = BlockGrid::unit(kk, 12).unwrap();
            let ops = vec![make_sbp42(12, grid.dx).unwrap(); kk];
            for _ in 0..12 {
                let state = MultiBlockState {
                    t: 0.0,
                    blocks: (0..kk)
                        .map(|_| DVector::from_fn(13, |_, _| rng.gen::<f64>() * 2.0 - 1.0))
                        .collect(),
                };
                let (lhs, rhs_val) = energy_rate_identity(&state, &ops, theta).unwrap();
                worst = worst.max((lhs - rhs_val).abs() / (1.0 + rhs_val.abs()));
            }
        }
    }
    results.push(check(
        "energy rate identity (random states, K in {1,3,4})",
        worst <= 1e-11,
        format!("worst scaled mismatch = {worst:e}"),
    ));

    // Optimizer recovers SBP(4,2) from quadratic data and keeps P intact.
    let target = make_blocknorm_target(n, dx).unwrap();
    let x = DVector::from_fn(n + 1, |i, _| i as f64 * dx);
    let cfg = OptimizerConfig::with_anchor(sbp42.stencil().unwrap());
    match optimize_block_operator(&x.map(|v| v * v), &x, &sbp42, &target, &cfg) {
        Ok(adapted) => {
            let dev = (&adapted.q - &sbp42.q).amax();
            results.push(check(
                "optimizer recovers SBP(4,2) on quadratic data",
                dev <= 1e-8,
                format!("max deviation = {dev:e}"),
            ));
            results.push(check(
                "optimizer preserves P",
                adapted.p.approx_eq(&sbp42.p, 0.0),
                String::new(),
            ));
        }
        Err(e) => results.push(check(
            "optimizer recovers SBP(4,2) on quadratic data",
            false,
            e.to_string(),
        )),
    }

    // Rank deficiency of the data stage.
    let n_rank = 40;
    let dx_rank = 1.0 / n_rank as f64;
    let op = make_sbp42(n_rank, dx_rank).unwrap();
    let xr = DVector::from_fn(n_rank + 1, |i, _| i as f64 * dx_rank);
    let mut all_deficient = true;
    let mut max_rank = 0;
    for _ in 0..20 {
        let a: f64 = rng.gen::<f64>() * 3.0 + 0.5;
        let b: f64 = rng.gen::<f64>() * 6.0;
        let u = xr.map(|v| (a * std::f64::consts::TAU * v + b).sin() + 0.3 * a * v);
        let v = op.apply_d(&u);
        let s = build_stage(&u, &v, &op.p).unwrap();
        let r = numerical_rank(&s.a, 1e-8);
        max_rank = max_rank.max(r);
        all_deficient &= r < 14;
    }
    results.push(check(
        "data stage rank deficient (20 random smooth u, N = 40)",
        all_deficient,
        format!("max numerical rank = {max_rank}"),
    ));

    results
}
