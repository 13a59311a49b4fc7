use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::norm::NormMatrix;
use crate::stencil::{self, StencilVector};

/// Diagonal norm weights of SBP(4,2): (p0, p1, p2, p3) with interior 1.
pub const SBP42_P: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

/// Interior band of the fourth order central stencil.
pub const SBP42_A: [f64; 2] = [2.0 / 3.0, -1.0 / 12.0];

/// SBP(4,2) boundary block coefficients in layout order
/// (q01, q02, q03, q12, q13, q23).
pub const SBP42_Q: [f64; 6] = [
    59.0 / 96.0,
    -1.0 / 12.0,
    -1.0 / 32.0,
    59.0 / 96.0,
    0.0,
    59.0 / 96.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorLabel {
    Sbp42,
    BlockNormTarget,
    Adaptive,
}

/// First-derivative SBP operator D = P^{-1} Q on one block.
#[derive(Debug, Clone)]
pub struct SbpOperator {
    /// Number of grid intervals; matrices are (N+1) x (N+1).
    pub n: usize,
    pub dx: f64,
    pub p: NormMatrix,
    pub q: DMatrix<f64>,
    pub label: OperatorLabel,
}

impl SbpOperator {
    /// D u = P^{-1} Q u
    pub fn apply_d(&self, u: &DVector<f64>) -> DVector<f64> {
        self.p.solve(&(&self.q * u))
    }

    pub fn stencil(&self) -> Result<StencilVector> {
        stencil::extract_w(&self.q, self.n)
    }

    /// max |Q + Q^T - diag(-1, 0, ..., 0, 1)|
    pub fn sbp_identity_residual(&self) -> f64 {
        let mut s = &self.q + self.q.transpose();
        s[(0, 0)] += 1.0;
        s[(self.n, self.n)] -= 1.0;
        s.amax()
    }

    /// Writes P and Q as dense CSV (row-major, 17 significant digits).
    pub fn dump_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        for m in [&self.p.dense(), &self.q] {
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
                writeln!(out, "{}", row.join(","))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// The conventional diagonal-norm SBP(4,2) operator.
pub fn make_sbp42(n: usize, dx: f64) -> Result<SbpOperator> {
    if n < 8 {
        return Err(Error::GridTooSmall { n });
    }
    let mut diag = DVector::from_element(n + 1, dx);
    for (i, &p) in SBP42_P.iter().enumerate() {
        diag[i] = dx * p;
        diag[n - i] = dx * p;
    }
    let mut w = StencilVector::zeros();
    for i in 0..6 {
        w.0[i] = SBP42_Q[i];
        // Mirror symmetry Q[N-i, N-j] = -Q[i, j] makes r coincide with q.
        w.0[6 + i] = SBP42_Q[i];
    }
    w.0[12] = SBP42_A[0];
    w.0[13] = SBP42_A[1];
    Ok(SbpOperator {
        n,
        dx,
        p: NormMatrix::Diagonal { diag },
        q: stencil::assemble_q(&w, n),
        label: OperatorLabel::Sbp42,
    })
}

/// Per-row exactness report of `validate_sbp`.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub sbp_identity_residual: f64,
    pub norm_spd: bool,
    /// For each row, the largest degree m such that D differentiates all
    /// monomials 1, x, ..., x^m exactly; None if even constants fail.
    pub exactness_degrees: Vec<Option<usize>>,
}

const EXACTNESS_REL_TOL: f64 = 1e-9;
const MAX_TEST_DEGREE: usize = 6;

/// Checks the SBP definition and classifies per-row polynomial exactness
/// on the block coordinates x_i = i*dx, degrees 0..=6.
pub fn validate_sbp(op: &SbpOperator) -> ValidationReport {
    let n = op.n;
    let coords = DVector::from_fn(n + 1, |i, _| i as f64 * op.dx);
    let mut exact = vec![vec![false; MAX_TEST_DEGREE + 1]; n + 1];
    for m in 0..=MAX_TEST_DEGREE {
        let u = coords.map(|x| x.powi(m as i32));
        let du = if m == 0 {
            DVector::zeros(n + 1)
        } else {
            coords.map(|x| m as f64 * x.powi(m as i32 - 1))
        };
        let got = op.apply_d(&u);
        let scale = du.amax().max(1.0);
        for i in 0..=n {
            exact[i][m] = (got[i] - du[i]).abs() <= EXACTNESS_REL_TOL * scale;
        }
    }
    let exactness_degrees = exact
        .iter()
        .map(|row| {
            let mut deg = None;
            for (m, &ok) in row.iter().enumerate() {
                if ok {
                    deg = Some(m);
                } else {
                    break;
                }
            }
            deg
        })
        .collect();
    ValidationReport {
        sbp_identity_residual: op.sbp_identity_residual(),
        norm_spd: op.p.is_spd(),
        exactness_degrees,
    }
}
