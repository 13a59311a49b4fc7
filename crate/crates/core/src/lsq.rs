use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::norm::NormMatrix;
use crate::operator::{OperatorLabel, SbpOperator};
use crate::stencil::{assemble_q, placements, StencilVector, NUM_COEFFS};

/// One least-squares problem A w = b in the sequential minimization.
/// Column j of A is the action of unknown j's placement pattern in Q on the
/// data vector u; b absorbs the norm-weighted target derivative and the
/// fixed corner entries of Q.
#[derive(Debug, Clone)]
pub struct LsStage {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LsStage {
    pub fn residual(&self, w: &StencilVector) -> f64 {
        let wv = DVector::from_row_slice(&w.0);
        (&self.a * wv - &self.b).norm()
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Relative singular value cutoff for the numerical rank per stage.
    pub rank_tol: f64,
    /// Reference coefficients used to resolve any freedom left after the
    /// last stage.
    pub fallback_anchor: StencilVector,
}

impl OptimizerConfig {
    pub fn with_anchor(anchor: StencilVector) -> Self {
        Self {
            rank_tol: 1e-10,
            fallback_anchor: anchor,
        }
    }
}

/// Builds the stage minimizing ||Q(w) u - P v|| over the 14 unknowns:
/// b = P v - Q_fixed u, where Q_fixed holds only the corners -1/2, +1/2.
pub fn build_stage(u: &DVector<f64>, v: &DVector<f64>, p: &NormMatrix) -> Result<LsStage> {
    let rows = p.size();
    if u.len() != rows || v.len() != rows {
        return Err(Error::ShapeMismatch {
            expected: rows,
            got: u.len().max(v.len()),
        });
    }
    let n = rows - 1;
    let mut a = DMatrix::zeros(rows, NUM_COEFFS);
    for (slot, positions) in placements(n).iter().enumerate() {
        for &(i, j, sign) in positions {
            a[(i, slot)] += sign * u[j];
        }
    }
    let mut b = p.apply(v);
    b[0] += 0.5 * u[0];
    b[n] -= 0.5 * u[n];
    Ok(LsStage { a, b })
}

/// Conventional accuracy condition of degree m on the block's physical
/// abscissae: m = 0 is A(1) w = b(1, 0), m = 1 is A(x) w = b(x, 1).
pub fn accuracy_stage(m: usize, coords: &DVector<f64>, p: &NormMatrix) -> Result<LsStage> {
    match m {
        0 => build_stage(
            &DVector::from_element(coords.len(), 1.0),
            &DVector::zeros(coords.len()),
            p,
        ),
        1 => build_stage(coords, &DVector::from_element(coords.len(), 1.0), p),
        _ => Err(Error::UnsupportedDegree { degree: m }),
    }
}

/// Solves the ordered sequence of least-squares problems: each stage is
/// minimized over the solution set of its predecessors, parametrized through
/// the SVD nullspace. Freedom surviving the last stage is resolved by
/// minimizing the distance to the anchor.
pub fn lexicographic_lsq(stages: &[LsStage], config: &OptimizerConfig) -> StencilVector {
    assert!(!stages.is_empty());
    let mut w0 = DVector::zeros(NUM_COEFFS);
    let mut basis = DMatrix::identity(NUM_COEFFS, NUM_COEFFS);

    for stage in stages {
        if basis.ncols() == 0 {
            break;
        }
        // Restrict to the current feasible set w = w0 + Z y.
        let a_red = &stage.a * &basis;
        let b_red = &stage.b - &stage.a * &w0;
        // Pad with zero rows so the SVD carries a full V (nullspace basis).
        let a_pad = if a_red.nrows() < a_red.ncols() {
            let mut m = DMatrix::zeros(a_red.ncols(), a_red.ncols());
            m.rows_mut(0, a_red.nrows()).copy_from(&a_red);
            m
        } else {
            a_red.clone()
        };
        let b_pad = if a_red.nrows() < a_red.ncols() {
            let mut v = DVector::zeros(a_red.ncols());
            v.rows_mut(0, b_red.len()).copy_from(&b_red);
            v
        } else {
            b_red.clone()
        };
        let svd = a_pad.clone().svd(true, true);
        let sigma = &svd.singular_values;
        let sigma_max = sigma.max();
        // Split directions by magnitude, not position: the SVD output order
        // is not relied upon.
        let keep: Vec<bool> = sigma
            .iter()
            .map(|&s| sigma_max > 0.0 && s >= config.rank_tol * sigma_max)
            .collect();
        let rank = keep.iter().filter(|&&k| k).count();
        let u_mat = svd.u.as_ref().expect("svd U");
        let v_t = svd.v_t.as_ref().expect("svd V^T");

        // Minimum-norm minimizer within the reduced coordinates. The SVD
        // factors can carry an inconsistent dominant triple (||A v - s u||
        // well above roundoff), so apply the truncated pseudo-inverse
        // iteratively: each pass contracts the residual as long as the
        // factorization error stays below 1 in relative terms.
        let mut y: DVector<f64> = DVector::zeros(basis.ncols());
        let mut res = b_pad.clone();
        for _ in 0..20 {
            let mut dy: DVector<f64> = DVector::zeros(basis.ncols());
            for (i, &kept) in keep.iter().enumerate() {
                if kept {
                    let coef = u_mat.column(i).dot(&res) / sigma[i];
                    dy += coef * v_t.row(i).transpose();
                }
            }
            if dy.norm() <= 1e-15 * y.norm().max(1.0) {
                break;
            }
            y += &dy;
            res = &b_pad - &a_pad * &y;
        }
        w0 += &basis * y;

        // Remaining freedom: the right singular vectors below the cutoff.
        let free = basis.ncols() - rank;
        if free == 0 {
            basis = DMatrix::zeros(NUM_COEFFS, 0);
        } else {
            let mut null = DMatrix::zeros(basis.ncols(), free);
            let mut c = 0;
            for (i, &kept) in keep.iter().enumerate() {
                if !kept {
                    null.set_column(c, &v_t.row(i).transpose());
                    c += 1;
                }
            }
            basis = &basis * null;
        }
    }

    if basis.ncols() > 0 {
        let anchor = DVector::from_row_slice(&config.fallback_anchor.0);
        let y = basis.transpose() * (anchor - &w0);
        w0 += &basis * y;
    }

    let mut w = StencilVector::zeros();
    w.0.copy_from_slice(w0.as_slice());
    w
}

/// Numerical rank of a stage matrix at the given relative cutoff.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s >= rel_tol * smax)
        .count()
}

/// Singular values of a stage matrix, descending (diagnostic output).
pub fn stage_singular_values(stage: &LsStage) -> Vec<f64> {
    let svd = stage.a.clone().svd(false, false);
    svd.singular_values.iter().copied().collect()
}

/// Re-optimizes the stencil for the data `u` on one block: the target
/// operator supplies v ~ u_x, then the coefficient vector solves the staged
/// problem [A(u) w = b(u, v), A(1) w = b(1, 0), A(x) w = b(x, 1)].
/// P is taken unchanged from the base operator, which keeps the energy
/// estimate intact across the operator swap.
pub fn optimize_block_operator(
    u: &DVector<f64>,
    coords: &DVector<f64>,
    base: &SbpOperator,
    target: &SbpOperator,
    config: &OptimizerConfig,
) -> Result<SbpOperator> {
    debug_assert_eq!(base.n, target.n);
    debug_assert_eq!(base.dx, target.dx);
    let v = target.apply_d(u);
    let stages = [
        build_stage(u, &v, &base.p)?,
        accuracy_stage(0, coords, &base.p)?,
        accuracy_stage(1, coords, &base.p)?,
    ];
    let w = lexicographic_lsq(&stages, config);
    Ok(SbpOperator {
        n: base.n,
        dx: base.dx,
        p: base.p.clone(),
        q: assemble_q(&w, base.n),
        label: OperatorLabel::Adaptive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::make_sbp42;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn coords(n: usize, dx: f64) -> DVector<f64> {
        DVector::from_fn(n + 1, |i, _| i as f64 * dx)
    }

    #[test]
    fn stage_shape_is_rows_by_14() {
        let op = make_sbp42(11, 1.0).unwrap();
        let u = DVector::from_element(12, 1.0);
        let v = DVector::zeros(12);
        let s = build_stage(&u, &v, &op.p).unwrap();
        assert_eq!(s.a.shape(), (12, 14));
    }

    #[test]
    fn zero_data_gives_zero_stage() {
        let op = make_sbp42(10, 1.0).unwrap();
        let z = DVector::zeros(11);
        let s = build_stage(&z, &z, &op.p).unwrap();
        assert_eq!(s.a.amax(), 0.0);
        assert_eq!(s.b.amax(), 0.0);
    }

    #[test]
    fn stage_is_linear_in_data() {
        let n = 12;
        let op = make_sbp42(n, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = DVector::from_fn(n + 1, |_, _| rng.gen::<f64>() - 0.5);
        let v = DVector::from_fn(n + 1, |_, _| rng.gen::<f64>() - 0.5);
        let s1 = build_stage(&u, &v, &op.p).unwrap();
        let s2 = build_stage(&(3.0 * &u), &(3.0 * &v), &op.p).unwrap();
        assert!((&s2.a - 3.0 * &s1.a).amax() <= 1e-14);
        assert!((&s2.b - 3.0 * &s1.b).amax() <= 1e-14);
    }

    #[test]
    fn sbp42_is_exact_on_quadratic_stage() {
        let n = 16;
        let dx = 1.0 / n as f64;
        let op = make_sbp42(n, dx).unwrap();
        let x = coords(n, dx);
        let s = build_stage(&x.map(|v| v * v), &x.map(|v| 2.0 * v), &op.p).unwrap();
        let w = op.stencil().unwrap();
        assert!(s.residual(&w) <= 1e-12 * s.b.norm().max(1.0));
    }

    #[test]
    fn sbp42_is_exact_on_accuracy_stages() {
        let n = 16;
        let dx = 1.0 / n as f64;
        let op = make_sbp42(n, dx).unwrap();
        let x = coords(n, dx);
        let w = op.stencil().unwrap();
        for m in 0..2 {
            let s = accuracy_stage(m, &x, &op.p).unwrap();
            assert!(s.residual(&w) <= 1e-12, "degree {m}");
        }
    }

    #[test]
    fn constant_stage_rhs_has_corner_entries_only() {
        let n = 10;
        let op = make_sbp42(n, 1.0).unwrap();
        let s = accuracy_stage(0, &coords(n, 1.0), &op.p).unwrap();
        assert_eq!(s.b[0], 0.5);
        assert_eq!(s.b[n], -0.5);
        assert_eq!(s.b.rows(1, n - 1).amax(), 0.0);
    }

    fn anchor_config(anchor: StencilVector) -> OptimizerConfig {
        OptimizerConfig::with_anchor(anchor)
    }

    #[test]
    fn forced_coordinates_and_anchor_fill() {
        // A pins w1 = 1, w2 = 3; the rest comes from the anchor.
        let mut a = DMatrix::zeros(14, 14);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        let mut b = DVector::zeros(14);
        b[0] = 1.0;
        b[1] = 3.0;
        let mut anchor = StencilVector::zeros();
        anchor.0[5] = -2.5;
        let w = lexicographic_lsq(&[LsStage { a, b }], &anchor_config(anchor.clone()));
        assert!((w.0[0] - 1.0).abs() <= 1e-12);
        assert!((w.0[1] - 3.0).abs() <= 1e-12);
        assert!((w.0[5] + 2.5).abs() <= 1e-12);
        for i in [2, 3, 4, 6, 7, 8, 9, 10, 11, 12, 13] {
            assert!(w.0[i].abs() <= 1e-12, "slot {i}");
        }
    }

    #[test]
    fn non_interacting_stages_compose() {
        let mut a1 = DMatrix::zeros(14, 14);
        a1[(0, 0)] = 1.0;
        let mut b1 = DVector::zeros(14);
        b1[0] = 1.0;
        let mut a2 = DMatrix::zeros(14, 14);
        a2[(0, 1)] = 1.0;
        let mut b2 = DVector::zeros(14);
        b2[0] = 3.0;
        let w = lexicographic_lsq(
            &[LsStage { a: a1, b: b1 }, LsStage { a: a2, b: b2 }],
            &anchor_config(StencilVector::zeros()),
        );
        assert!((w.0[0] - 1.0).abs() <= 1e-12);
        assert!((w.0[1] - 3.0).abs() <= 1e-12);
        assert!(w.0[2..].iter().all(|&x| x.abs() <= 1e-12));
    }

    #[test]
    fn minimum_norm_resolution_splits_symmetric_constraint() {
        // w0 + w1 = 2 with zero anchor resolves to (1, 1).
        let mut a = DMatrix::zeros(14, 14);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 1.0;
        let mut b = DVector::zeros(14);
        b[0] = 2.0;
        let w = lexicographic_lsq(
            &[LsStage { a, b }],
            &anchor_config(StencilVector::zeros()),
        );
        assert!((w.0[0] - 1.0).abs() <= 1e-12);
        assert!((w.0[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn stage_one_optimality_beats_random_and_sbp42() {
        let n = 16;
        let dx = 1.0 / n as f64;
        let base = make_sbp42(n, dx).unwrap();
        let target = crate::blocknorm::make_blocknorm_target(n, dx).unwrap();
        let x = coords(n, dx);
        let u = x.map(|v| (2.0 * std::f64::consts::PI * v).sin());
        let cfg = anchor_config(base.stencil().unwrap());
        let adapted = optimize_block_operator(&u, &x, &base, &target, &cfg).unwrap();
        let w_star = adapted.stencil().unwrap();
        let v = target.apply_d(&u);
        let stage1 = build_stage(&u, &v, &base.p).unwrap();
        let best = stage1.residual(&w_star);

        assert!(best <= stage1.residual(&base.stencil().unwrap()) + 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let mut w = StencilVector::zeros();
            for c in w.0.iter_mut() {
                *c = rng.gen::<f64>() * 2.0 - 1.0;
            }
            assert!(best <= stage1.residual(&w) + 1e-10);
        }
    }

    #[test]
    fn appending_stages_never_degrades_earlier_residuals() {
        let n = 14;
        let dx = 1.0 / n as f64;
        let base = make_sbp42(n, dx).unwrap();
        let target = crate::blocknorm::make_blocknorm_target(n, dx).unwrap();
        let x = coords(n, dx);
        let u = x.map(|v| (3.0 * v).cos() + 0.5 * v);
        let v = target.apply_d(&u);
        let stages = [
            build_stage(&u, &v, &base.p).unwrap(),
            accuracy_stage(0, &x, &base.p).unwrap(),
            accuracy_stage(1, &x, &base.p).unwrap(),
        ];
        let cfg = anchor_config(base.stencil().unwrap());
        let mut prev: Vec<f64> = Vec::new();
        for k in 1..=3 {
            let w = lexicographic_lsq(&stages[..k], &cfg);
            for (i, r) in prev.iter().enumerate() {
                assert!(
                    stages[i].residual(&w) <= r + 1e-12,
                    "stage {i} degraded after appending stage {k}"
                );
            }
            prev = (0..k).map(|i| stages[i].residual(&w)).collect();
        }
    }

    #[test]
    fn stage_matrix_is_rank_deficient_for_smooth_data() {
        let n = 20;
        let dx = 1.0 / n as f64;
        let op = make_sbp42(n, dx).unwrap();
        let x = coords(n, dx);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let c1: f64 = rng.gen::<f64>() * 2.0;
            let c2: f64 = rng.gen::<f64>() * 5.0;
            let u = x.map(|v| (c2 * v + c1).sin() + c1 * v);
            let v = op.apply_d(&u);
            let s = build_stage(&u, &v, &op.p).unwrap();
            assert!(numerical_rank(&s.a, 1e-8) < 14);
        }
    }

    #[test]
    fn quadratic_data_recovers_sbp42() {
        let n = 16;
        let dx = 1.0 / n as f64;
        let base = make_sbp42(n, dx).unwrap();
        let target = crate::blocknorm::make_blocknorm_target(n, dx).unwrap();
        let x = coords(n, dx);
        let cfg = anchor_config(base.stencil().unwrap());
        let adapted =
            optimize_block_operator(&x.map(|v| v * v), &x, &base, &target, &cfg).unwrap();
        assert!((&adapted.q - &base.q).amax() <= 1e-8);
        assert!(adapted.p.approx_eq(&base.p, 0.0), "P must be untouched");
    }

    #[test]
    fn constant_data_keeps_sbp_identity() {
        let n = 12;
        let dx = 0.1;
        let base = make_sbp42(n, dx).unwrap();
        let target = crate::blocknorm::make_blocknorm_target(n, dx).unwrap();
        let x = coords(n, dx);
        let cfg = anchor_config(base.stencil().unwrap());
        let u = DVector::from_element(n + 1, 1.0);
        let adapted = optimize_block_operator(&u, &x, &base, &target, &cfg).unwrap();
        assert!(adapted.sbp_identity_residual() <= 1e-14);
        assert!(adapted.p.approx_eq(&base.p, 0.0));
    }

    #[test]
    fn stage_one_scale_equivariance() {
        let n = 14;
        let dx = 1.0 / n as f64;
        let base = make_sbp42(n, dx).unwrap();
        let target = crate::blocknorm::make_blocknorm_target(n, dx).unwrap();
        let x = coords(n, dx);
        let u = x.map(|v| (5.0 * v).sin());
        let v = target.apply_d(&u);
        let cfg = anchor_config(base.stencil().unwrap());
        let alpha = 3.5;
        let s = build_stage(&u, &v, &base.p).unwrap();
        let s_scaled = build_stage(&(alpha * &u), &(alpha * &v), &base.p).unwrap();
        let w = lexicographic_lsq(
            &[
                s.clone(),
                accuracy_stage(0, &x, &base.p).unwrap(),
                accuracy_stage(1, &x, &base.p).unwrap(),
            ],
            &cfg,
        );
        let r = s.residual(&w);
        let r_scaled = s_scaled.residual(&w);
        assert!((r_scaled - alpha * r).abs() <= 1e-10 * (1.0 + alpha * r));
    }
}
