//! Bloch-wave dispersion relations and spectra of the semidiscrete
//! transport operator `u_t + u_x = 0`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dg1d::{FluxKind, Mesh1D, Transport1D};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::operators::ElementOperators;

/// Semidiscrete operator of one reference element (`J = 1`, unit speed)
/// whose neighbours carry the phase `e^{-i theta}` (left) and `e^{i theta}`
/// (right).
pub fn bloch_matrix(ops: &ElementOperators, flux: FluxKind, theta: f64) -> DMatrix<Complex64> {
    let n = ops.n_dofs();
    let (ml, mr) = ops.inv_mass_lifts();
    let back = Complex64::from_polar(1.0, -theta);
    let fwd = Complex64::from_polar(1.0, theta);
    let c = |v: f64| Complex64::new(v, 0.0);
    // rows expressing u*_L and u*_R in terms of the element coefficients
    let (star_l, star_r): (Vec<Complex64>, Vec<Complex64>) = (0..n)
        .map(|j| {
            let (tl, tr) = (ops.lift_left[j], ops.lift_right[j]);
            match flux {
                FluxKind::Upwind | FluxKind::Alternating => (back * tr, c(tr)),
                FluxKind::Centered => (0.5 * (back * tr + tl), 0.5 * (c(tr) + fwd * tl)),
            }
        })
        .unzip();
    DMatrix::from_fn(n, n, |i, j| {
        c(ops.inv_mass_stiffness[(i, j)]) + ml[i] * star_l[j] - mr[i] * star_r[j]
    })
}

fn eigen(a: &DMatrix<Complex64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let schur = a.clone().try_schur(1e-14, 10_000).ok_or_else(|| Error::Numeric("Schur iteration failed".into()))?;
    let (q, t) = schur.unpack();
    let n = t.nrows();
    let lambdas: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    // eigenvectors of the triangular factor by back substitution
    let mut y = DMatrix::zeros(n, n);
    let tiny = 1e-14 * t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    for k in 0..n {
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let mut d = t[(i, i)] - lambdas[k];
            if d.norm() < tiny {
                d = Complex64::new(tiny, 0.0);
            }
            y[(i, k)] = -s / d;
        }
    }
    let mut v = q * y;
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        col /= Complex64::new(norm, 0.0);
    }
    Ok((lambdas, v))
}

/// Eigenvalues of a real or complex square matrix.
pub fn eigenvalues(a: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    Ok(eigen(a)?.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionPoint {
    /// Wavenumber times node gap.
    pub k: f64,
    /// Wavenumber times element width over the number of dofs.
    pub k_per_dof: f64,
    /// `omega * gap / alpha`, possibly complex.
    pub omega: Complex64,
    /// Normalized overlap of the selected eigenvector with the Fourier mode.
    pub projection: f64,
    /// Set when the branch choice is not clear cut.
    pub ambiguous: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionResult {
    pub label: String,
    pub flux: FluxKind,
    pub points: Vec<DispersionPoint>,
}

impl DispersionResult {
    /// Largest sampled `K` such that every sample up to it has
    /// `|Omega - K| <= tol K`, using the chosen normalization.
    pub fn accurate_range(&self, tol: f64, per_dof: bool) -> f64 {
        let mut last = 0.0;
        for p in &self.points {
            let k = if per_dof { p.k_per_dof } else { p.k };
            let omega = if per_dof { p.omega * (p.k_per_dof / p.k.max(1e-300)) } else { p.omega };
            if p.k == 0.0 {
                continue;
            }
            if (omega - Complex64::new(k, 0.0)).norm() > tol * k {
                break;
            }
            last = k;
        }
        last
    }
}

/// Numerical dispersion relation sampled at wavenumbers `k_samples`
/// (in units of the node gap).
pub fn dispersion_relation(disc: &Discretization, flux: FluxKind, k_samples: &[f64]) -> Result<DispersionResult> {
    let gap = disc.node_gap();
    let n = disc.n_dofs();
    let mut points = Vec::with_capacity(k_samples.len());
    for &k in k_samples {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::param("wavenumbers must be non-negative"));
        }
        // element width 2, so the phase per element is k * 2 / gap
        let theta = 2.0 * k / gap;
        let wavenumber = k / gap;
        let (lambdas, vecs) = eigen(&bloch_matrix(&disc.ops, flux, theta))?;
        let mode: Vec<Complex64> = disc.nodes.iter().map(|&z| Complex64::from_polar(1.0, wavenumber * z)).collect();
        let mode_norm = (mode.len() as f64).sqrt();
        let mut scores: Vec<(f64, usize)> = (0..n)
            .map(|c| {
                let v = vecs.column(c);
                let nodal = nodal_complex(disc, v.as_slice());
                let nn = nodal.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let dot: Complex64 = nodal.iter().zip(&mode).map(|(a, b)| a.conj() * b).sum();
                (dot.norm() / (nn * mode_norm).max(1e-300), c)
            })
            .collect();
        scores.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (best, idx) = scores[0];
        let runner_up = scores.get(1).map_or(0.0, |s| s.0);
        let omega = Complex64::new(0.0, 1.0) * lambdas[idx] * gap;
        points.push(DispersionPoint {
            k,
            k_per_dof: wavenumber * 2.0 / n as f64,
            omega,
            projection: best,
            ambiguous: best < 0.5 || (best - runner_up).abs() < 1e-3,
        });
    }
    Ok(DispersionResult {
        label: disc.spec.label(),
        flux,
        points,
    })
}

fn nodal_complex(disc: &Discretization, coeffs: &[Complex64]) -> Vec<Complex64> {
    let re: Vec<f64> = coeffs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = coeffs.iter().map(|z| z.im).collect();
    let re = disc.to_nodal(&re).expect("length matches");
    let im = disc.to_nodal(&im).expect("length matches");
    re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    /// Eigenvalues scaled by the physical node gap.
    pub eigenvalues: Vec<Complex64>,
    pub spectral_radius: f64,
    pub max_imag: f64,
}

impl SpectrumResult {
    fn from_eigenvalues(eigenvalues: Vec<Complex64>) -> Self {
        let spectral_radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
        let max_imag = eigenvalues.iter().map(|l| l.im.abs()).fold(0.0, f64::max);
        SpectrumResult {
            eigenvalues,
            spectral_radius,
            max_imag,
        }
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Spectrum of the periodic global operator with unit speed on `mesh`.
pub fn operator_spectrum(disc: &Discretization, mesh: &Mesh1D, flux: FluxKind) -> Result<SpectrumResult> {
    let op = Transport1D::new(&disc.ops, mesh.clone(), 1.0, flux)?;
    if op.len() > 4000 {
        return Err(Error::param(format!("global operator of size {} is too large for a dense solve", op.len())));
    }
    let a = op.operator_matrix();
    let gaps: Vec<f64> = mesh.jacobians.iter().map(|j| j * disc.node_gap()).collect();
    let gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let ev = a.complex_eigenvalues();
    Ok(SpectrumResult::from_eigenvalues(ev.iter().map(|l| l * gap).collect()))
}

/// Union of Bloch spectra at `theta = 2 pi m / n_el`, on the same scale as
/// [`operator_spectrum`] for a uniform mesh.
pub fn bloch_spectrum(disc: &Discretization, flux: FluxKind, n_el: usize) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(n_el * disc.n_dofs());
    for m in 0..n_el {
        let theta = 2.0 * std::f64::consts::PI * m as f64 / n_el as f64;
        out.extend(eigenvalues(&bloch_matrix(&disc.ops, flux, theta))?.into_iter().map(|l| l * disc.node_gap()));
    }
    Ok(out)
}

/// Largest distance from any point of `a` to its nearest unused partner in `b`.
pub fn spectrum_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].im.total_cmp(&a[j].im));
    for i in order {
        let (mut best, mut idx) = (f64::INFINITY, 0);
        for (j, bj) in b.iter().enumerate() {
            if !used[j] && (a[i] - bj).norm() < best {
                best = (a[i] - bj).norm();
                idx = j;
            }
        }
        used[idx] = true;
        worst = worst.max(best);
    }
    worst
}

/// Real part of `A` as a complex matrix.
pub fn complexify(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|v| Complex64::new(v, 0.0))
}
