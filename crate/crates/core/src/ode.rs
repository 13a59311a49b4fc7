use nalgebra::DVector;

use crate::error::{Error, Result};

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth order weights coincide with the last A row (FSAL).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// b5 - b4: drives the embedded error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const ORDER_EXPONENT: f64 = 0.2; // 1/5

/// Outcome of one integration segment: the state at `t_end` and the last
/// accepted step size, reusable as the initial step of the next segment.
pub struct Dp45Output {
    pub y: DVector<f64>,
    pub last_h: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

fn error_norm(err: &DVector<f64>, y: &DVector<f64>, y_new: &DVector<f64>, abs_tol: f64, rel_tol: f64) -> f64 {
    let n = err.len();
    let mut acc = 0.0;
    for i in 0..n {
        let scale = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
        let r = err[i] / scale;
        acc += r * r;
    }
    (acc / n as f64).sqrt()
}

/// Hairer-style starting step selection.
fn initial_step<F>(
    f: &F,
    t0: f64,
    y0: &DVector<f64>,
    f0: &DVector<f64>,
    t_end: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> f64
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let span = t_end - t0;
    let n = y0.len() as f64;
    let sc = |y: &DVector<f64>, v: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..y.len() {
            let s = abs_tol + rel_tol * y[i].abs();
            let r = v[i] / s;
            acc += r * r;
        }
        (acc / n).sqrt()
    };
    let d0 = sc(y0, y0);
    let d1 = sc(y0, f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1 = y0 + h0 * f0;
    let f1 = f(t0 + h0, &y1);
    let d2 = sc(y0, &(f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(ORDER_EXPONENT)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates y' = f(t, y) from `t0` to `t_end` with the embedded 5(4)
/// Dormand-Prince pair and a mixed absolute/relative weighted RMS error
/// criterion. The last step is clipped to land exactly on `t_end`.
pub fn dp45_integrate<F>(
    f: F,
    t0: f64,
    y0: DVector<f64>,
    t_end: f64,
    abs_tol: f64,
    rel_tol: f64,
    h_init: Option<f64>,
) -> Result<Dp45Output>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    assert!(t_end >= t0, "integration runs forward");
    let mut y = y0;
    let mut t = t0;
    if t_end == t0 {
        return Ok(Dp45Output {
            y,
            last_h: h_init.unwrap_or(0.0),
            steps_accepted: 0,
            steps_rejected: 0,
        });
    }
    let span = t_end - t0;
    let mut k1 = f(t, &y);
    let mut h = match h_init {
        Some(h) if h > 0.0 => h.min(span),
        _ => initial_step(&f, t0, &y, &k1, t_end, abs_tol, rel_tol),
    };
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut last_h = h;

    while t < t_end {
        let rem = t_end - t;
        if rem <= 1e-13 * t_end.abs().max(1.0) {
            break; // within roundoff of the endpoint
        }
        let clipped = h >= rem;
        let h_step = if clipped { rem } else { h };
        if h_step <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h: h_step });
        }

        let mut k = Vec::with_capacity(7);
        k.push(k1.clone());
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[s - 1][j];
                if a != 0.0 {
                    ys += h_step * a * kj;
                }
            }
            k.push(f(t + C[s] * h_step, &ys));
        }
        let mut y_new = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                y_new += h_step * B5[j] * kj;
            }
        }
        let mut err_vec = DVector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err_vec += h_step * E[j] * kj;
            }
        }
        if !y_new.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        let err = error_norm(&err_vec, &y, &y_new, abs_tol, rel_tol);

        if err <= 1.0 {
            t = if clipped { t_end } else { t + h_step };
            y = y_new;
            k1 = k.pop().unwrap(); // FSAL: k7 = f(t + h, y_new)
            last_h = h_step;
            accepted += 1;
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-ORDER_EXPONENT)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h = h_step * factor;
        } else {
            rejected += 1;
            let factor = (SAFETY * err.powf(-ORDER_EXPONENT)).clamp(MIN_FACTOR, 1.0);
            h = h_step * factor;
        }
    }

    Ok(Dp45Output {
        y,
        last_h,
        steps_accepted: accepted,
        steps_rejected: rejected,
    })
}
