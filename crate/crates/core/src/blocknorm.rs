use nalgebra::{DMatrix, DVector, Matrix4};

use crate::error::{Error, Result};
use crate::norm::NormMatrix;
use crate::operator::{OperatorLabel, SbpOperator, SBP42_A};
use crate::stencil::{assemble_q, StencilVector, UPPER_PAIRS};

/// Block-norm target operator: Q has the SBP(4,2) sparsity pattern with the
/// interior band fixed at (2/3, -1/12); P carries a symmetric 4x4 block at
/// each corner. The boundary coefficients are pinned by requiring D to
/// differentiate 1, x, x^2, x^3 exactly at rows 0..=3, which yields third
/// order boundary accuracy.
pub fn make_blocknorm_target(n: usize, dx: f64) -> Result<SbpOperator> {
    if n < 8 {
        return Err(Error::GridTooSmall { n });
    }
    let (corner_unit, q_block) = solve_boundary_block()?;

    let mut w = StencilVector::zeros();
    for i in 0..6 {
        w.0[i] = q_block[i];
        w.0[6 + i] = q_block[i]; // mirror map makes r coincide with q
    }
    w.0[12] = SBP42_A[0];
    w.0[13] = SBP42_A[1];

    let p = NormMatrix::Block {
        corner: corner_unit * dx,
        interior: dx,
        size: n + 1,
    };
    Ok(SbpOperator {
        n,
        dx,
        p,
        q: assemble_q(&w, n),
        label: OperatorLabel::BlockNormTarget,
    })
}

/// Solves the 16x16 exactness system in unit grid coordinates x_i = i.
/// Unknowns: the 10 entries of the symmetric P corner block (scaled by dx
/// afterwards) and the 6 upper-triangle Q block entries. Equations: row i of
/// Q x^m = m P x^{m-1} for i, m in 0..=3. The system is dx-independent, so
/// the coefficients are universal constants.
fn solve_boundary_block() -> Result<(Matrix4<f64>, [f64; 6])> {
    const P_PAIRS: [(usize, usize); 10] = [
        (0, 0),
        (0, 1),
        (0, 2),
        (0, 3),
        (1, 1),
        (1, 2),
        (1, 3),
        (2, 2),
        (2, 3),
        (3, 3),
    ];
    let n_unk = 16;
    let mut a: DMatrix<f64> = DMatrix::zeros(16, n_unk);
    let mut b: DVector<f64> = DVector::zeros(16);

    // Q entries fixed outside the 4x4 block: the corner and the band tails.
    // (row, col, value) with unit-coordinate columns 4 and 5.
    let fixed_q = [
        (0usize, 0usize, -0.5),
        (2, 4, SBP42_A[1]),
        (3, 4, SBP42_A[0]),
        (3, 5, SBP42_A[1]),
    ];

    let xpow = |j: usize, m: i32| -> f64 {
        if m < 0 {
            0.0 // multiplied by m = 0 in that case
        } else if j == 0 && m == 0 {
            1.0
        } else {
            (j as f64).powi(m)
        }
    };

    // One exactness equation for (degree m, row): fills one row of the
    // (matrix, rhs) pair passed in.
    let fill_eq = |a: &mut DMatrix<f64>, b: &mut DVector<f64>, eq: usize, m: i32, row: usize| {
        // sum_j Q[row,j] x_j^m  -  m * sum_j P[row,j] x_j^{m-1}  =  0
        for (slot, &(i, j)) in UPPER_PAIRS.iter().enumerate() {
            if row == i {
                a[(eq, 10 + slot)] += xpow(j, m);
            } else if row == j {
                a[(eq, 10 + slot)] -= xpow(i, m);
            }
        }
        for (slot, &(i, j)) in P_PAIRS.iter().enumerate() {
            if row == i {
                a[(eq, slot)] -= m as f64 * xpow(j, m - 1);
            }
            if row == j && i != j {
                a[(eq, slot)] -= m as f64 * xpow(i, m - 1);
            }
        }
        for &(r, c, v) in &fixed_q {
            if r == row {
                b[eq] -= v * xpow(c, m);
            }
        }
    };

    let mut eq = 0;
    for m in 0..4i32 {
        for row in 0..4usize {
            fill_eq(&mut a, &mut b, eq, m, row);
            eq += 1;
        }
    }

    let svd = a.clone().svd(true, true);
    let sigma = &svd.singular_values;
    let sigma_max = sigma.max();
    // Order-agnostic split of the spectrum at the cutoff.
    let keep: Vec<bool> = sigma.iter().map(|&s| s >= 1e-10 * sigma_max).collect();
    let u_mat = svd.u.as_ref().expect("svd U");
    let v_t = svd.v_t.as_ref().expect("svd V^T");
    let mut sol: DVector<f64> = DVector::zeros(n_unk);
    for (i, &kept) in keep.iter().enumerate() {
        if kept {
            let coef = u_mat.column(i).dot(&b) / sigma[i];
            sol += coef * v_t.row(i).transpose();
        }
    }
    // The system is rank deficient (two free parameters). The minimum-norm
    // solution yields an indefinite P block, so the freedom is resolved
    // toward the SBP(4,2) coefficients instead, which lands safely in SPD
    // territory.
    let mut anchor: DVector<f64> = DVector::zeros(n_unk);
    for (slot, &(i, j)) in P_PAIRS.iter().enumerate() {
        if i == j {
            anchor[slot] = crate::operator::SBP42_P[i];
        }
    }
    for slot in 0..6 {
        anchor[10 + slot] = crate::operator::SBP42_Q[slot];
    }
    for (i, &kept) in keep.iter().enumerate() {
        if !kept {
            let dir = v_t.row(i).transpose();
            let coef = dir.dot(&(&anchor - &sol));
            sol += coef * dir;
        }
    }
    let residual = (&a * &sol - &b).norm();
    if residual > 1e-10 * b.norm().max(1.0) {
        return Err(Error::ExactnessResidual { residual });
    }

    let mut corner = Matrix4::zeros();
    for (slot, &(i, j)) in P_PAIRS.iter().enumerate() {
        corner[(i, j)] = sol[slot];
        corner[(j, i)] = sol[slot];
    }
    let min_eig = corner.symmetric_eigen().eigenvalues.min();
    if min_eig <= 0.0 {
        return Err(Error::NormNotSpd { min_eig });
    }
    let mut q_block = [0.0; 6];
    for slot in 0..6 {
        q_block[slot] = sol[10 + slot];
    }
    Ok((corner, q_block))
}
