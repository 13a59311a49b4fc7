use std::io::Write;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::BlockGrid;
use crate::solver::{exact_solution, run, RunResult, SolverConfig};

/// One row of a grid refinement study.
#[derive(Debug, Clone)]
pub struct ConvergenceRecord {
    pub blocks: usize,
    pub intervals: usize,
    pub dx: f64,
    pub error: f64,
    /// Observed order against the previous row; None for the first row.
    pub rate: Option<f64>,
}

/// Observed order between consecutive refinements:
/// rate = log(e_prev / e_cur) / log(N_cur / N_prev).
pub fn observed_rate(e_prev: f64, e_cur: f64, n_prev: usize, n_cur: usize) -> f64 {
    (e_prev / e_cur).ln() / (n_cur as f64 / n_prev as f64).ln()
}

/// Runs one full solve per N and tabulates final errors with pairwise rates.
pub fn convergence_study(
    config: &SolverConfig,
    blocks: usize,
    n_list: &[usize],
) -> Result<Vec<ConvergenceRecord>> {
    assert!(
        n_list.windows(2).all(|w| w[0] < w[1]),
        "N list must be strictly increasing"
    );
    let case = |&n: &usize| -> Result<(usize, f64, f64)> {
        let grid = BlockGrid::unit(blocks, n).map_err(|e| Error::StudyCase {
            n,
            source: Box::new(e),
        })?;
        let result = run(config, &grid, |x| exact_solution(x, 0.0)).map_err(|e| {
            Error::StudyCase {
                n,
                source: Box::new(e),
            }
        })?;
        Ok((n, grid.dx, result.series.last().unwrap().1))
    };
    #[cfg(feature = "parallel")]
    let cases: Result<Vec<_>> = n_list.par_iter().map(case).collect();
    #[cfg(not(feature = "parallel"))]
    let cases: Result<Vec<_>> = n_list.iter().map(case).collect();
    let cases = cases?;

    let mut records = Vec::with_capacity(cases.len());
    for (i, &(n, dx, error)) in cases.iter().enumerate() {
        let rate = if i > 0 {
            let (n_prev, _, e_prev) = cases[i - 1];
            Some(observed_rate(e_prev, error, n_prev, n))
        } else {
            None
        };
        records.push(ConvergenceRecord {
            blocks,
            intervals: n,
            dx,
            error,
            rate,
        });
    }
    Ok(records)
}

/// One run at fixed N; the error series is the deliverable.
pub fn time_error_study(config: &SolverConfig, blocks: usize, n: usize) -> Result<RunResult> {
    let grid = BlockGrid::unit(blocks, n)?;
    run(config, &grid, |x| exact_solution(x, 0.0))
}

pub fn write_convergence_csv<W: Write>(out: &mut W, records: &[ConvergenceRecord]) -> Result<()> {
    writeln!(out, "K,N,dx,error,rate")?;
    for r in records {
        let rate = r.rate.map(|p| format!("{p:.16e}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{:.16e},{:.16e},{}",
            r.blocks, r.intervals, r.dx, r.error, rate
        )?;
    }
    Ok(())
}

pub fn write_series_csv<W: Write>(out: &mut W, series: &[(f64, f64)]) -> Result<()> {
    writeln!(out, "t,l2_error")?;
    for &(t, e) in series {
        writeln!(out, "{t:.16e},{e:.16e}")?;
    }
    Ok(())
}
