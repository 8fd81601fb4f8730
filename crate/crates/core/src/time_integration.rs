//! Explicit time stepping: truncated Taylor series for linear autonomous
//! systems `u' = A u`, and classical RK4 for forced or nonlinear ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Taylor,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorScheme {
    /// Number of Taylor terms `N_t` beyond `u` itself.
    pub order: usize,
    pub dt: f64,
}

fn check_finite(u: &[f64], time: f64) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { time })
    }
}

/// Reusable buffers for Taylor steps of a fixed system size.
#[derive(Clone, Debug)]
pub struct TaylorStepper {
    pub scheme: TaylorScheme,
    term: Vec<f64>,
    next: Vec<f64>,
}

impl TaylorStepper {
    pub fn new(scheme: TaylorScheme, len: usize) -> Result<Self> {
        if !(scheme.dt > 0.0) || !scheme.dt.is_finite() {
            return Err(Error::param(format!("time step {} must be positive", scheme.dt)));
        }
        Ok(TaylorStepper {
            scheme,
            term: vec![0.0; len],
            next: vec![0.0; len],
        })
    }

    /// `u <- sum_{k <= N_t} (dt^k / k!) A^k u`, with `apply(x, y)` writing `A x`
    /// into `y`. `time` is only used in the divergence report.
    pub fn step(&mut self, u: &mut [f64], time: f64, mut apply: impl FnMut(&[f64], &mut [f64])) -> Result<()> {
        Error::check_len(self.term.len(), u.len())?;
        self.term.copy_from_slice(u);
        for k in 1..=self.scheme.order {
            apply(&self.term, &mut self.next);
            let c = self.scheme.dt / k as f64;
            for (t, n) in self.term.iter_mut().zip(&self.next) {
                *t = c * n;
            }
            for (v, t) in u.iter_mut().zip(&self.term) {
                *v += t;
            }
        }
        check_finite(u, time + self.scheme.dt)
    }
}

/// One Taylor step returning the new state.
pub fn taylor_step(state: &[f64], apply: impl FnMut(&[f64], &mut [f64]), scheme: TaylorScheme) -> Result<Vec<f64>> {
    let mut u = state.to_vec();
    TaylorStepper::new(scheme, u.len())?.step(&mut u, 0.0, apply)?;
    Ok(u)
}

/// Reusable stage buffers for classical RK4.
#[derive(Clone, Debug)]
pub struct Rk4Stepper {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Rk4Stepper {
    pub fn new(len: usize) -> Self {
        Rk4Stepper {
            k: std::array::from_fn(|_| vec![0.0; len]),
            stage: vec![0.0; len],
        }
    }

    /// Advances `u` from `t` to `t + dt`; `rhs(t, x, y)` writes `f(t, x)` into `y`.
    pub fn step(
        &mut self,
        u: &mut [f64],
        t: f64,
        dt: f64,
        mut rhs: impl FnMut(f64, &[f64], &mut [f64]),
    ) -> Result<()> {
        Error::check_len(self.stage.len(), u.len())?;
        let [k1, k2, k3, k4] = &mut self.k;
        rhs(t, u, k1);
        for ((s, x), k) in self.stage.iter_mut().zip(u.iter()).zip(k1.iter()) {
            *s = x + 0.5 * dt * k;
        }
        rhs(t + 0.5 * dt, &self.stage, k2);
        for ((s, x), k) in self.stage.iter_mut().zip(u.iter()).zip(k2.iter()) {
            *s = x + 0.5 * dt * k;
        }
        rhs(t + 0.5 * dt, &self.stage, k3);
        for ((s, x), k) in self.stage.iter_mut().zip(u.iter()).zip(k3.iter()) {
            *s = x + dt * k;
        }
        rhs(t + dt, &self.stage, k4);
        for (i, x) in u.iter_mut().enumerate() {
            *x += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        check_finite(u, t + dt)
    }
}

pub fn rk4_step(state: &[f64], rhs: impl FnMut(f64, &[f64], &mut [f64]), t: f64, dt: f64) -> Result<Vec<f64>> {
    let mut u = state.to_vec();
    Rk4Stepper::new(u.len()).step(&mut u, t, dt, rhs)?;
    Ok(u)
}

/// Coefficients of `(|R(i theta)|^2 - 1) (n!)^2` in powers of `theta^2`, where
/// `R` is the degree-`n` Taylor polynomial of the exponential. Exact in `i128`
/// for `n <= 20`.
fn amplification_poly(n: usize) -> Vec<i128> {
    let fact: i128 = (1..=n as i128).product();
    // a_k = n!/k!, so R(x) n! = sum_k a_k x^k.
    let mut a = vec![0i128; n + 1];
    a[n] = 1;
    for k in (0..n).rev() {
        a[k] = a[k + 1] * (k as i128 + 1);
    }
    // Real part: sum over even k of (-1)^{k/2} a_k theta^k; imaginary part over odd k.
    let mut re = vec![0i128; n + 1];
    let mut im = vec![0i128; n + 1];
    for k in 0..=n {
        let sign = if (k / 2) % 2 == 0 { 1 } else { -1 };
        if k % 2 == 0 {
            re[k] = sign * a[k];
        } else {
            im[k] = sign * a[k];
        }
    }
    let mut sq = vec![0i128; 2 * n + 1];
    for i in 0..=n {
        for j in 0..=n {
            sq[i + j] += re[i] * re[j] + im[i] * im[j];
        }
    }
    sq[0] -= fact * fact;
    // Only even powers survive.
    sq.iter().step_by(2).copied().collect()
}

/// Whether `|R(i theta)| <= 1` on some interval `(0, theta*]`. Decided from
/// the sign of the lowest nonvanishing coefficient of `|R(i theta)|^2 - 1`.
pub fn stability_includes_imaginary_axis(order: usize) -> bool {
    assert!((1..=20).contains(&order), "order {order} outside 1..=20");
    amplification_poly(order)
        .into_iter()
        .find(|&c| c != 0)
        .is_some_and(|c| c < 0)
}

/// `|R(i theta)|` for the Taylor polynomial of degree `order`.
pub fn amplification_on_imaginary_axis(order: usize, theta: f64) -> f64 {
    let mut term = num_complex::Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..=order {
        term *= num_complex::Complex64::new(0.0, theta) / k as f64;
        sum += term;
    }
    sum.norm()
}

/// Largest `theta*` such that `|R(i theta)| <= 1` on `(0, theta*]`, found by
/// bisection; `None` when the imaginary axis is not included near zero.
pub fn imaginary_stability_limit(order: usize) -> Option<f64> {
    if !stability_includes_imaginary_axis(order) {
        return None;
    }
    let g = |t: f64| amplification_on_imaginary_axis(order, t) - 1.0;
    let step = 1e-3;
    let mut lo = step;
    loop {
        let hi = lo + step;
        if g(hi) > 1e-14 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if g(mid) > 1e-14 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return Some(a);
        }
        lo = hi;
        if lo > 10.0 * order as f64 {
            return None;
        }
    }
}
