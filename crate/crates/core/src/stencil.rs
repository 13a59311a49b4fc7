use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Number of free coefficients in the adaptive Q: six per boundary block
/// plus the two interior band values.
pub const NUM_COEFFS: usize = 14;

/// Upper-triangle index pairs of a 4x4 boundary block, in layout order.
pub const UPPER_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// The 14 free coefficients of the adaptive Q, laid out as
/// (q01, q02, q03, q12, q13, q23 | r01, r02, r03, r12, r13, r23 | a1, a2),
/// where q fills the left boundary block, r the right block under the
/// mirror index map, and (a1, a2) the interior band.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilVector(pub [f64; NUM_COEFFS]);

impl StencilVector {
    pub fn zeros() -> Self {
        StencilVector([0.0; NUM_COEFFS])
    }

    pub fn a1(&self) -> f64 {
        self.0[12]
    }

    pub fn a2(&self) -> f64 {
        self.0[13]
    }
}

/// Positions (row, col, sign) of each free coefficient in Q. Every entry of
/// the sparsity pattern except the fixed corners -1/2, +1/2 appears exactly
/// once across all lists, and entries come in antisymmetric +/- pairs.
pub fn placements(n: usize) -> [Vec<(usize, usize, f64)>; NUM_COEFFS] {
    assert!(n >= 8, "closures overlap for N < 8");
    let mut out: [Vec<(usize, usize, f64)>; NUM_COEFFS] = Default::default();

    // Left boundary block: q_{ij} at (i, j), -q_{ij} at (j, i).
    for (slot, &(i, j)) in UPPER_PAIRS.iter().enumerate() {
        out[slot].push((i, j, 1.0));
        out[slot].push((j, i, -1.0));
    }
    // Right boundary block: r_{ij} at (N-j, N-i), -r_{ij} at (N-i, N-j).
    for (slot, &(i, j)) in UPPER_PAIRS.iter().enumerate() {
        out[6 + slot].push((n - j, n - i, 1.0));
        out[6 + slot].push((n - i, n - j, -1.0));
    }
    // a1: transition row 3, interior rows 4..=N-4, mirrored transition row N-3.
    let a1 = &mut out[12];
    a1.push((3, 4, 1.0));
    for i in 4..=n - 4 {
        a1.push((i, i + 1, 1.0));
        a1.push((i, i - 1, -1.0));
    }
    a1.push((n - 3, n - 4, -1.0));
    // a2: transition rows 2, 3 and their mirrors, plus the wide band.
    let a2 = &mut out[13];
    a2.push((2, 4, 1.0));
    a2.push((3, 5, 1.0));
    for i in 4..=n - 4 {
        a2.push((i, i + 2, 1.0));
        a2.push((i, i - 2, -1.0));
    }
    a2.push((n - 3, n - 5, -1.0));
    a2.push((n - 2, n - 4, -1.0));

    out
}

/// Assembles Q from the coefficient vector. Corners are the fixed constants
/// Q[0,0] = -1/2 and Q[N,N] = +1/2; everything else comes from `w` placed in
/// antisymmetric pairs, so Q + Q^T = diag(-1, 0, ..., 0, 1) holds for any w.
pub fn assemble_q(w: &StencilVector, n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n + 1, n + 1);
    q[(0, 0)] = -0.5;
    q[(n, n)] = 0.5;
    for (slot, positions) in placements(n).iter().enumerate() {
        for &(i, j, sign) in positions {
            debug_assert_eq!(q[(i, j)], 0.0, "double placement at ({i},{j})");
            q[(i, j)] = sign * w.0[slot];
        }
    }
    q
}

/// Reads the coefficient vector back out of a pattern-conforming Q.
/// Fails if any entry lies outside the sparsity pattern (tolerance 1e-14).
pub fn extract_w(q: &DMatrix<f64>, n: usize) -> Result<StencilVector> {
    assert_eq!(q.nrows(), n + 1);
    let mut w = StencilVector::zeros();
    for (slot, &(i, j)) in UPPER_PAIRS.iter().enumerate() {
        w.0[slot] = q[(i, j)];
        w.0[6 + slot] = q[(n - j, n - i)];
    }
    // Any interior row carries the band; take one well inside.
    let mid = (n / 2).clamp(4, n - 4);
    w.0[12] = q[(mid, mid + 1)];
    w.0[13] = q[(mid, mid + 2)];

    let rebuilt = assemble_q(&w, n);
    for i in 0..=n {
        for j in 0..=n {
            let d = q[(i, j)] - rebuilt[(i, j)];
            if d.abs() > 1e-14 {
                return Err(Error::PatternViolation {
                    row: i,
                    col: j,
                    value: q[(i, j)],
                });
            }
        }
    }
    Ok(w)
}
