//! Quadrature on equispaced grids over `[-1, 1]`.
//!
//! Gregory rules keep the trapezoidal interior weight and correct `m` weights
//! at each end. The corrections `d_j` satisfy the Euler-Maclaurin moment
//! conditions `sum_j d_j j^s = -zeta(-s) - [s = 0]` for `s < m`, solved in
//! double-double arithmetic.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dd::{Dd, Real};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GregoryRule {
    pub n: usize,
    pub order: usize,
    /// Weights including the grid spacing: `integral ~ sum_j weights[j] f_j`.
    pub weights: Vec<f64>,
}

/// Bernoulli numbers `B_2, B_4, .., B_16` as exact ratios.
const BERNOULLI_EVEN: [(i64, i64); 8] = [
    (1, 6),
    (-1, 30),
    (1, 42),
    (-1, 30),
    (5, 66),
    (-691, 2730),
    (7, 6),
    (-3617, 510),
];

/// Number of corrected weights per end. Odd orders take one extra point so
/// that monomials up to degree `order - 1` are integrated exactly.
pub fn correction_width(order: usize) -> usize {
    if order % 2 == 0 {
        order - 1
    } else {
        order
    }
}

fn moment_rhs(s: usize) -> Dd {
    match s {
        0 => Dd::from(-0.5),
        _ if s % 2 == 0 => Dd::ZERO,
        _ => {
            let (num, den) = BERNOULLI_EVEN[(s + 1) / 2 - 1];
            Dd::from_ratio(num, den * (s as i64 + 1))
        }
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_dd(mut a: Vec<Vec<Dd>>, mut b: Vec<Dd>) -> Result<Vec<Dd>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].hi.abs().total_cmp(&a[j][col].hi.abs()))
            .unwrap_or(col);
        if a[piv][col].hi == 0.0 {
            return Err(Error::Numeric("singular moment system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let t = a[col][k];
                a[row][k] -= f * t;
            }
            let t = b[col];
            b[row] -= f * t;
        }
    }
    let mut x = vec![Dd::ZERO; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// End corrections `d_0 .. d_{m-1}` relative to unit interior weights.
pub(crate) fn end_corrections(order: usize) -> Result<Vec<Dd>> {
    let m = correction_width(order);
    let a: Vec<Vec<Dd>> = (0..m)
        .map(|s| {
            (0..m)
                .map(|j| {
                    let mut v = Dd::ONE;
                    for _ in 0..s {
                        v *= Dd::from(j as f64);
                    }
                    v
                })
                .collect()
        })
        .collect();
    let b = (0..m).map(moment_rhs).collect();
    solve_dd(a, b)
}

pub fn gregory_weights(n: usize, order: usize) -> Result<GregoryRule> {
    if !(2..=16).contains(&order) {
        return Err(Error::param(format!("Gregory order {order} outside 2..=16")));
    }
    let m = correction_width(order);
    if n < 2 * m || n < 2 {
        return Err(Error::param(format!(
            "{n} nodes cannot carry order-{order} end corrections ({m} per end)"
        )));
    }
    let h = Dd::from(2.0) / Dd::from((n - 1) as f64);
    let d = end_corrections(order)?;
    let mut weights = vec![h.to_f64(); n];
    for (j, dj) in d.iter().enumerate() {
        let w = (h * (Dd::ONE + *dj)).to_f64();
        weights[j] = w;
        weights[n - 1 - j] = w;
    }
    Ok(GregoryRule { n, order, weights })
}

/// Band-limited interpolation of one period of samples onto a grid refined by
/// `factor`, via zero padding of the FFT. An even-length Nyquist mode is split
/// evenly between the two padded positions so real input stays real.
pub fn fourier_interpolate(samples: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor < 1 {
        return Err(Error::param("refinement factor must be at least 1"));
    }
    let len = samples.len();
    if factor == 1 || len == 0 {
        return Ok(samples.to_vec());
    }
    let fine = len * factor;
    let mut planner = FftPlanner::new();
    let mut spec: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut spec);
    let mut padded = vec![Complex64::new(0.0, 0.0); fine];
    let half = len / 2;
    for k in 0..len {
        let kk = if k <= half { k as i64 } else { k as i64 - len as i64 };
        if len % 2 == 0 && k == half {
            padded[half] += spec[k] * 0.5;
            padded[fine - half] += spec[k] * 0.5;
        } else {
            padded[kk.rem_euclid(fine as i64) as usize] = spec[k];
        }
    }
    planner.plan_fft_inverse(fine).process(&mut padded);
    let scale = 1.0 / len as f64;
    Ok(padded.iter().map(|c| c.re * scale).collect())
}

pub fn integrate_on_reference(f_samples: &[f64], rule: &GregoryRule) -> Result<f64> {
    Error::check_len(rule.n, f_samples.len())?;
    Ok(f_samples.iter().zip(&rule.weights).map(|(f, w)| f * w).sum())
}
