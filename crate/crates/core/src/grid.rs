use nalgebra::DVector;

use crate::error::{Error, Result};

/// Multiblock grid: `K` non-overlapping blocks, each with `N+1` uniformly
/// spaced points. Interface points are shared in coordinate but duplicated
/// as degrees of freedom.
#[derive(Debug, Clone)]
pub struct BlockGrid {
    pub blocks: usize,
    pub intervals: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub dx: f64,
}

impl BlockGrid {
    pub fn new(blocks: usize, intervals: usize, x_left: f64, x_right: f64) -> Result<Self> {
        if blocks < 1 {
            return Err(Error::InvalidGrid {
                reason: "need at least one block".into(),
            });
        }
        if intervals < 8 {
            return Err(Error::GridTooSmall { n: intervals });
        }
        if !(x_right > x_left) {
            return Err(Error::InvalidGrid {
                reason: format!("empty domain [{x_left}, {x_right}]"),
            });
        }
        let dx = (x_right - x_left) / (blocks * intervals) as f64;
        Ok(Self {
            blocks,
            intervals,
            x_left,
            x_right,
            dx,
        })
    }

    /// Unit interval domain, the default for the periodic advection problem.
    pub fn unit(blocks: usize, intervals: usize) -> Result<Self> {
        Self::new(blocks, intervals, 0.0, 1.0)
    }

    /// Physical abscissae of block `k`: x_i = x_L + (k*N + i) dx.
    pub fn block_coords(&self, k: usize) -> DVector<f64> {
        assert!(k < self.blocks);
        let n = self.intervals;
        DVector::from_fn(n + 1, |i, _| self.x_left + ((k * n + i) as f64) * self.dx)
    }
}
