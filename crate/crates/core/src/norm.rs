use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

/// SBP norm matrix P. Either diagonal (robust stability) or with dense
/// symmetric 4x4 corner blocks (higher boundary accuracy). Interior weights
/// are exactly `dx` in both cases.
#[derive(Debug, Clone)]
pub enum NormMatrix {
    Diagonal {
        diag: DVector<f64>,
    },
    Block {
        /// Corner block acting on rows/cols 0..=3. The right corner is its
        /// mirror image P[N-i, N-j] = P[i, j].
        corner: Matrix4<f64>,
        interior: f64,
        size: usize,
    },
}

impl NormMatrix {
    pub fn size(&self) -> usize {
        match self {
            NormMatrix::Diagonal { diag } => diag.len(),
            NormMatrix::Block { size, .. } => *size,
        }
    }

    /// P v
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            NormMatrix::Diagonal { diag } => diag.component_mul(v),
            NormMatrix::Block {
                corner,
                interior,
                size,
            } => {
                let n = size - 1;
                let mut out = v * *interior;
                let lo = corner * Vector4::new(v[0], v[1], v[2], v[3]);
                let hi = corner * Vector4::new(v[n], v[n - 1], v[n - 2], v[n - 3]);
                for i in 0..4 {
                    out[i] = lo[i];
                    out[n - i] = hi[i];
                }
                out
            }
        }
    }

    /// P^{-1} v
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            NormMatrix::Diagonal { diag } => v.component_div(diag),
            NormMatrix::Block {
                corner,
                interior,
                size,
            } => {
                let n = size - 1;
                let inv = corner.try_inverse().expect("corner block is invertible");
                let mut out = v / *interior;
                let lo = inv * Vector4::new(v[0], v[1], v[2], v[3]);
                let hi = inv * Vector4::new(v[n], v[n - 1], v[n - 2], v[n - 3]);
                for i in 0..4 {
                    out[i] = lo[i];
                    out[n - i] = hi[i];
                }
                out
            }
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        match self {
            NormMatrix::Diagonal { diag } => DMatrix::from_diagonal(diag),
            NormMatrix::Block {
                corner,
                interior,
                size,
            } => {
                let n = size - 1;
                let mut m = DMatrix::from_diagonal_element(*size, *size, *interior);
                for i in 0..4 {
                    for j in 0..4 {
                        m[(i, j)] = corner[(i, j)];
                        m[(n - i, n - j)] = corner[(i, j)];
                    }
                }
                m
            }
        }
    }

    /// Symmetric positive definiteness check. For the block kind this is the
    /// spectrum of the corner block; the interior weight must be positive.
    pub fn is_spd(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            NormMatrix::Diagonal { diag } => diag.min(),
            NormMatrix::Block {
                corner, interior, ..
            } => {
                let eig = corner.symmetric_eigen();
                eig.eigenvalues.min().min(*interior)
            }
        }
    }

    /// Entrywise equality to the given tolerance (the transmission check).
    pub fn approx_eq(&self, other: &NormMatrix, tol: f64) -> bool {
        if self.size() != other.size() {
            return false;
        }
        match (self, other) {
            (NormMatrix::Diagonal { diag: a }, NormMatrix::Diagonal { diag: b }) => {
                a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
            }
            _ => {
                let a = self.dense();
                let b = other.dense();
                (a - b).amax() <= tol
            }
        }
    }
}
