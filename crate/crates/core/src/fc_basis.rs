//! Fourier-continuation nodal basis.
//!
//! Samples on the uniform grid `z_l = -1 + l h`, `h = 2/(N-1)`, are extended to
//! a smooth discrete periodic function in three steps:
//!
//! 1. polynomial extrapolation of the `p` left-most (right-most) samples onto
//!    `M` extra grid points on each side,
//! 2. multiplication by a smooth window that is one on `[-1, 1]` and zero
//!    outside `[-b, b]`, `b = 1 + M h`,
//! 3. folding with index period `N + M`.
//!
//! The folded samples are interpolated by a trigonometric polynomial with
//! period `T = (N + M) h`. Applying the extension to the unit vectors `e_i`
//! gives the nodal basis `phi_i`, stored as Fourier coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dd::{unit_roots, Dd, Real};
use crate::error::{Error, Result};

/// Arithmetic used while constructing the extension and its spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    #[default]
    Extended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FcParams {
    /// Number of samples `N` on `[-1, 1]`.
    pub n_points: usize,
    /// Extrapolation stencil size `p` (polynomial degree `p - 1`).
    pub poly_points: usize,
    /// Extension samples `M` on each side.
    pub ext_points: usize,
    pub precision: Precision,
}

impl FcParams {
    pub fn new(n_points: usize, poly_points: usize, ext_points: usize) -> Result<Self> {
        let params = FcParams {
            n_points,
            poly_points,
            ext_points,
            precision: Precision::Extended,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.poly_points < 2 {
            return Err(Error::param(format!(
                "stencil size p = {} must be at least 2",
                self.poly_points
            )));
        }
        if self.ext_points < 1 {
            return Err(Error::param("extension length M must be at least 1"));
        }
        if self.n_points < 2 * self.poly_points {
            return Err(Error::param(format!(
                "N = {} is smaller than 2p = {}; extrapolation stencils would overlap",
                self.n_points,
                2 * self.poly_points
            )));
        }
        Ok(())
    }

    /// Grid spacing `h = 2/(N-1)`.
    pub fn spacing(&self) -> f64 {
        2.0 / (self.n_points as f64 - 1.0)
    }

    /// Half-width `b = 1 + 2M/(N-1)` of the extended interval.
    pub fn extended_half_width(&self) -> f64 {
        1.0 + 2.0 * self.ext_points as f64 / (self.n_points as f64 - 1.0)
    }

    /// Index period `N + M`.
    pub fn period_points(&self) -> usize {
        self.n_points + self.ext_points
    }

    /// Continuous period `T = 2(N+M)/(N-1)`.
    pub fn period_len(&self) -> f64 {
        2.0 * self.period_points() as f64 / (self.n_points as f64 - 1.0)
    }

    /// Highest retained mode `W = floor((N+M)/2)`.
    pub fn max_mode(&self) -> usize {
        self.period_points() / 2
    }
}

/// One index period of the discrete periodic extension.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicExtension {
    pub samples: Vec<f64>,
    pub period_len: f64,
}

pub fn uniform_grid(params: &FcParams) -> Result<Vec<f64>> {
    params.validate()?;
    let n = params.n_points;
    Ok((0..n)
        .map(|l| -1.0 + 2.0 * l as f64 / (n as f64 - 1.0))
        .collect())
}

/// Lagrange weights extrapolating the left-most `p` samples to grid indices
/// `-1, -2, ..., -M`. Row `j` holds the weights for index `-(j+1)`; the right
/// side uses the same rows with the stencil reversed.
pub(crate) fn extrapolation_weights<T: Real>(p: usize, m: usize) -> Vec<Vec<T>> {
    (1..=m)
        .map(|dist| {
            let t = -(dist as i64);
            (0..p as i64)
                .map(|j| {
                    let mut num = T::one();
                    let mut den = T::one();
                    for k in 0..p as i64 {
                        if k != j {
                            num *= T::from_i64(t - k);
                            den *= T::from_i64(j - k);
                        }
                    }
                    num / den
                })
                .collect()
        })
        .collect()
}

fn extrapolate_generic<T: Real>(samples: &[T], params: &FcParams) -> Vec<T> {
    let (n, p, m) = (params.n_points, params.poly_points, params.ext_points);
    let weights = extrapolation_weights::<T>(p, m);
    let mut out = vec![T::zero(); n + 2 * m];
    out[m..m + n].copy_from_slice(samples);
    for (dist, row) in weights.iter().enumerate() {
        let mut left = T::zero();
        let mut right = T::zero();
        for (j, &w) in row.iter().enumerate() {
            left += w * samples[j];
            right += w * samples[n - 1 - j];
        }
        out[m - 1 - dist] = left;
        out[m + n + dist] = right;
    }
    out
}

/// Free half of the discrete step used on the extension.
///
/// At distance `d = 1..=M` beyond `z = 1` the right extrapolant is weighted by
/// `w_d` and the folded left extrapolant by `w_{M+1-d}`. Pairs obey
/// `w_d + w_{M+1-d} = 1`, so constants fold exactly and only the values
/// `w_1 .. w_{M/2}` are free (the middle one of an odd `M` is `1/2`).
///
/// The free values are fitted by least squares on a reference grid so that the
/// trigonometric interpolant of every blended monomial of degree `< p` matches
/// the monomial on `[-1, 1]`.
pub(crate) fn step_head(p: usize, m: usize) -> Vec<f64> {
    let free = m / 2;
    if free == 0 {
        return Vec::new();
    }
    let n_ref = (2 * m).max(2 * p).max(8);
    let len = n_ref + m;
    let h = 2.0 / (n_ref as f64 - 1.0);
    let period = len as f64 * h;
    let omega = 2.0 * std::f64::consts::PI / period;
    let n_fine = 30 * n_ref;
    let fine: Vec<f64> = (0..=n_fine).map(|r| -1.0 + 2.0 * r as f64 / n_fine as f64).collect();
    let grid: Vec<f64> = (0..len).map(|l| -1.0 + l as f64 * h).collect();
    let top = len / 2;
    // Cardinal functions of trigonometric interpolation on `len` points.
    let cardinal = DMatrix::from_fn(fine.len(), len, |r, l| {
        let x = omega * (fine[r] - grid[l]);
        let mut acc = 1.0;
        for k in 1..=top {
            let c = (k as f64 * x).cos();
            acc += if 2 * k == len { c } else { 2.0 * c };
        }
        acc / len as f64
    });

    let ext: Vec<usize> = (1..=m).map(|d| n_ref - 1 + d).collect();
    let rows = (p - 1) * fine.len();
    let mut a = DMatrix::<f64>::zeros(rows, free);
    let mut rhs = nalgebra::DVector::<f64>::zeros(rows);
    for deg in 1..p {
        let pow = |x: f64| x.powi(deg as i32);
        let mut base: Vec<f64> = grid.iter().map(|&z| pow(z)).collect();
        let mut jump = vec![0.0; m];
        for (d, &l) in ext.iter().enumerate() {
            base[l] = pow(grid[l] - period);
            jump[d] = pow(grid[l]) - base[l];
        }
        let mut block = DMatrix::<f64>::zeros(fine.len(), m);
        for r in 0..fine.len() {
            for (d, &l) in ext.iter().enumerate() {
                block[(r, d)] = cardinal[(r, l)] * jump[d];
            }
        }
        let scale = 1.0 / block.amax().max(1.0);
        let off = (deg - 1) * fine.len();
        for r in 0..fine.len() {
            let interp: f64 = (0..len).map(|l| cardinal[(r, l)] * base[l]).sum::<f64>()
                + 0.5 * block.row(r).sum();
            rhs[off + r] = scale * (pow(fine[r]) - interp);
            for j in 0..free {
                a[(off + r, j)] = scale * (block[(r, j)] - block[(r, m - 1 - j)]);
            }
        }
    }
    let svd = a.svd(true, true);
    let cutoff = svd.singular_values.max() * f64::EPSILON * rows as f64;
    let v = svd.solve(&rhs, cutoff).expect("SVD factors were requested");
    v.iter().map(|x| 0.5 + x).collect()
}

/// Step weights `w_1 .. w_M` in the arithmetic `T`, complements formed in `T`.
fn step_generic<T: Real>(head: &[f64], m: usize) -> Vec<T> {
    (1..=m)
        .map(|d| {
            if d <= head.len() {
                T::from_f64(head[d - 1])
            } else if 2 * d == m + 1 {
                T::from_f64(0.5)
            } else {
                T::one() - T::from_f64(head[m - d])
            }
        })
        .collect()
}

fn window_generic<T: Real>(params: &FcParams, step: &[T]) -> Vec<T> {
    let (n, m) = (params.n_points, params.ext_points);
    let mut out = vec![T::one(); n + 2 * m];
    for (i, &w) in step.iter().enumerate() {
        let dist = i + 1;
        out[m - dist] = w;
        out[m + n - 1 + dist] = w;
    }
    out
}

fn fold_generic<T: Real>(windowed: &[T], params: &FcParams) -> Vec<T> {
    let (n, m) = (params.n_points, params.ext_points);
    let mut out = windowed[m..m + n + m].to_vec();
    // Left extension indices -M..-1 land on N..N+M-1 after one period shift.
    for (j, v) in out[n..].iter_mut().enumerate() {
        *v += windowed[j];
    }
    out
}

fn extension_generic<T: Real>(samples: &[T], params: &FcParams, window: &[T]) -> Vec<T> {
    let mut ext = extrapolate_generic(samples, params);
    for (v, &w) in ext.iter_mut().zip(window) {
        *v *= w;
    }
    fold_generic(&ext, params)
}

/// Direct DFT returning modes `-W..=W` as `(re, im)` pairs; an even-length
/// period splits the Nyquist coefficient evenly between `+-W`.
fn dft_generic<T: Real>(samples: &[T], roots: &[(T, T)]) -> Vec<(T, T)> {
    let len = samples.len();
    let w = (len / 2) as i64;
    let scale = T::one() / T::from_usize(len);
    let mut out: Vec<(T, T)> = (-w..=w)
        .map(|k| {
            let mut re = T::zero();
            let mut im = T::zero();
            for (l, &f) in samples.iter().enumerate() {
                let idx = (k * l as i64).rem_euclid(len as i64) as usize;
                let (c, s) = roots[idx];
                re += f * c;
                im -= f * s;
            }
            (re * scale, im * scale)
        })
        .collect();
    if len % 2 == 0 {
        let half = T::from_f64(0.5);
        let last = out.len() - 1;
        out[0] = (out[0].0 * half, out[0].1 * half);
        out[last] = (out[last].0 * half, out[last].1 * half);
    }
    out
}

fn to_working<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64()).collect()
}

fn to_generic<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::from_f64(x)).collect()
}

fn window_in<T: Real>(params: &FcParams) -> Vec<T> {
    let head = step_head(params.poly_points, params.ext_points);
    window_generic(params, &step_generic::<T>(&head, params.ext_points))
}

pub fn extrapolate_ends(samples: &[f64], params: &FcParams) -> Result<Vec<f64>> {
    params.validate()?;
    Error::check_len(params.n_points, samples.len())?;
    Ok(match params.precision {
        Precision::Double => extrapolate_generic(samples, params),
        Precision::Extended => to_working(&extrapolate_generic(&to_generic::<Dd>(samples), params)),
    })
}

/// Window sampled on the extended grid `z_{-M} .. z_{N+M-1}`.
pub fn window_values(params: &FcParams) -> Result<Vec<f64>> {
    params.validate()?;
    Ok(match params.precision {
        Precision::Double => window_in::<f64>(params),
        Precision::Extended => to_working(&window_in::<Dd>(params)),
    })
}

pub fn periodic_extension(samples: &[f64], params: &FcParams) -> Result<PeriodicExtension> {
    params.validate()?;
    Error::check_len(params.n_points, samples.len())?;
    let folded = match params.precision {
        Precision::Double => extension_generic(samples, params, &window_in::<f64>(params)),
        Precision::Extended => to_working(&extension_generic(
            &to_generic::<Dd>(samples),
            params,
            &window_in::<Dd>(params),
        )),
    };
    Ok(PeriodicExtension {
        samples: folded,
        period_len: params.period_len(),
    })
}

/// Fourier coefficients `a_k`, `k = -W..=W`, stored at index `k + W`, such
/// that `sum_k a_k exp(2 pi i k (z+1)/T)` interpolates the extension samples.
pub fn fc_coefficients(ext: &PeriodicExtension) -> Vec<Complex64> {
    let len = ext.samples.len();
    let mut buf: Vec<Complex64> = ext.samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let w = len / 2;
    let scale = 1.0 / len as f64;
    let mut out: Vec<Complex64> = (-(w as i64)..=(w as i64))
        .map(|k| buf[k.rem_euclid(len as i64) as usize] * scale)
        .collect();
    if len % 2 == 0 {
        let last = out.len() - 1;
        out[0] *= 0.5;
        out[last] *= 0.5;
    }
    out
}

/// Fourier coefficients of every basis function, entry `i` for `phi_i`,
/// computed entirely in the arithmetic `T`.
pub(crate) fn modal_coefficients<T: Real>(params: &FcParams) -> Vec<Vec<(T, T)>> {
    let n = params.n_points;
    let roots = unit_roots::<T>(params.period_points());
    let window = window_in::<T>(params);
    (0..n)
        .map(|i| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            dft_generic(&extension_generic(&e, params, &window), &roots)
        })
        .collect()
}

/// FC nodal basis stored as Fourier coefficients.
///
/// Basis functions reach magnitudes of order `1e8` on the extension, so
/// coefficients built in extended precision keep their rounding residual in
/// `coeffs_lo` and evaluation is carried out in double-double arithmetic.
#[derive(Clone, Debug)]
pub struct FcBasis {
    /// `coeffs[(k + W, i)]` is the coefficient of mode `k` in basis function `i`.
    pub coeffs: DMatrix<Complex64>,
    /// Residual `exact - coeffs`; zero for a double-precision build.
    pub coeffs_lo: DMatrix<Complex64>,
    pub params: FcParams,
    pub period_len: f64,
    /// Window samples on the extended grid.
    pub window: Vec<f64>,
}

fn split(x: Dd) -> (f64, f64) {
    (x.hi, x.lo)
}

pub fn build_basis(params: &FcParams) -> Result<FcBasis> {
    params.validate()?;
    let n = params.n_points;
    let modes = 2 * params.max_mode() + 1;
    let mut coeffs = DMatrix::<Complex64>::zeros(modes, n);
    let mut coeffs_lo = DMatrix::<Complex64>::zeros(modes, n);
    match params.precision {
        Precision::Extended => {
            for (i, col) in modal_coefficients::<Dd>(params).into_iter().enumerate() {
                for (k, (re, im)) in col.into_iter().enumerate() {
                    let (re_hi, re_lo) = split(re);
                    let (im_hi, im_lo) = split(im);
                    coeffs[(k, i)] = Complex64::new(re_hi, im_hi);
                    coeffs_lo[(k, i)] = Complex64::new(re_lo, im_lo);
                }
            }
        }
        Precision::Double => {
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let a = fc_coefficients(&periodic_extension(&e, params)?);
                for (k, v) in a.into_iter().enumerate() {
                    coeffs[(k, i)] = v;
                }
            }
        }
    }
    Ok(FcBasis {
        coeffs,
        coeffs_lo,
        params: *params,
        period_len: params.period_len(),
        window: window_values(params)?,
    })
}

impl FcBasis {
    pub fn n_basis(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn max_mode(&self) -> usize {
        (self.coeffs.nrows() - 1) / 2
    }

    fn extended(&self) -> bool {
        self.params.precision == Precision::Extended
    }

    /// Coefficient of mode row `row` in basis function `i` as a double-double pair.
    pub(crate) fn coeff_dd(&self, row: usize, i: usize) -> (Dd, Dd) {
        let (a, b) = (self.coeffs[(row, i)], self.coeffs_lo[(row, i)]);
        (Dd::new(a.re, b.re), Dd::new(a.im, b.im))
    }

    /// Angular frequency `2 pi / T = pi (N-1)/(N+M)` in double-double.
    pub(crate) fn omega_dd(&self) -> Dd {
        Dd::PI * Dd::from((self.params.n_points - 1) as f64) / Dd::from(self.params.period_points() as f64)
    }

    /// Coefficients of the trigonometric interpolant of nodal values `f`.
    pub fn coefficients_of(&self, f: &[f64]) -> Vec<Complex64> {
        (0..self.coeffs.nrows())
            .map(|row| {
                let mut re = Dd::ZERO;
                let mut im = Dd::ZERO;
                for (i, &v) in f.iter().enumerate() {
                    let (a, b) = self.coeff_dd(row, i);
                    re += a * Dd::from(v);
                    im += b * Dd::from(v);
                }
                Complex64::new(re.to_f64(), im.to_f64())
            })
            .collect()
    }
}

/// `e^{i k theta}` for `k = -W..=W` in double-double.
pub(crate) fn phases_dd(theta: Dd, w: usize) -> Vec<(Dd, Dd)> {
    let (s, c) = theta.sin_cos();
    let mut pos = Vec::with_capacity(w + 1);
    let (mut re, mut im) = (Dd::ONE, Dd::ZERO);
    for _ in 0..=w {
        pos.push((re, im));
        let next = re * c - im * s;
        im = re * s + im * c;
        re = next;
    }
    let mut out: Vec<(Dd, Dd)> = pos[1..].iter().rev().map(|&(r, i)| (r, -i)).collect();
    out.extend(pos);
    out
}

/// Real and imaginary parts of every basis function at `points`.
fn evaluate_parts(basis: &FcBasis, points: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let w = basis.max_mode();
    let n = basis.n_basis();
    let mut re = DMatrix::<f64>::zeros(points.len(), n);
    let mut im = DMatrix::<f64>::zeros(points.len(), n);
    if basis.extended() {
        let omega = basis.omega_dd();
        for (m, &z) in points.iter().enumerate() {
            let phase = phases_dd(omega * (Dd::from(z) + Dd::ONE), w);
            for i in 0..n {
                let mut acc_re = Dd::ZERO;
                let mut acc_im = Dd::ZERO;
                for (row, &(c, s)) in phase.iter().enumerate() {
                    let (a, b) = basis.coeff_dd(row, i);
                    acc_re += a * c - b * s;
                    acc_im += a * s + b * c;
                }
                re[(m, i)] = acc_re.to_f64();
                im[(m, i)] = acc_im.to_f64();
            }
        }
    } else {
        let omega = 2.0 * std::f64::consts::PI / basis.period_len;
        let mut phase = vec![Complex64::new(0.0, 0.0); basis.coeffs.nrows()];
        for (m, &z) in points.iter().enumerate() {
            for (slot, k) in phase.iter_mut().zip(-(w as i64)..=w as i64) {
                let (s, c) = (omega * k as f64 * (z + 1.0)).sin_cos();
                *slot = Complex64::new(c, s);
            }
            for i in 0..n {
                let v: Complex64 = basis.coeffs.column(i).iter().zip(&phase).map(|(a, e)| a * e).sum();
                re[(m, i)] = v.re;
                im[(m, i)] = v.im;
            }
        }
    }
    (re, im)
}

/// Entry `(m, i)` is `phi_i(points[m])`.
pub fn evaluate_basis(basis: &FcBasis, points: &[f64]) -> DMatrix<f64> {
    evaluate_parts(basis, points).0
}

/// Imaginary part of the basis evaluation; zero up to rounding for a valid basis.
pub fn evaluate_basis_imag(basis: &FcBasis, points: &[f64]) -> DMatrix<f64> {
    evaluate_parts(basis, points).1
}

/// Spectral derivative `d/dz`: mode `k` is scaled by `2 pi i k / T`.
pub fn differentiate_basis(basis: &FcBasis) -> FcBasis {
    let w = basis.max_mode() as i64;
    let mut out = basis.clone();
    if basis.extended() {
        let omega = basis.omega_dd();
        for (row, k) in (-w..=w).enumerate() {
            let f = omega * Dd::from(k as f64);
            for i in 0..basis.n_basis() {
                let (a, b) = basis.coeff_dd(row, i);
                let (re_hi, re_lo) = split(-(b * f));
                let (im_hi, im_lo) = split(a * f);
                out.coeffs[(row, i)] = Complex64::new(re_hi, im_hi);
                out.coeffs_lo[(row, i)] = Complex64::new(re_lo, im_lo);
            }
        }
    } else {
        let omega = 2.0 * std::f64::consts::PI / basis.period_len;
        for (row, k) in (-w..=w).enumerate() {
            let factor = Complex64::new(0.0, omega * k as f64);
            for i in 0..basis.n_basis() {
                out.coeffs[(row, i)] *= factor;
            }
        }
    }
    out
}
