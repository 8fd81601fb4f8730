//! Configuration-driven experiments: convergence sweeps with least-squares
//! rate fits, long-time error tracking, and CSV output.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{DispersionResult, SpectrumResult};
use crate::dg1d::{solve_transport_1d, FluxKind, Transport1dConfig};
use crate::discretization::{BasisSpec, Discretization};
use crate::error::{Error, Result};
use crate::fc_basis::{build_basis, evaluate_basis, FcParams};
use crate::legendre::LegendreBasis;
use crate::line_dg2d::{solve_transport_2d, Transport2dConfig};
use crate::maxwell2d::{solve_maxwell_2d, Maxwell2dConfig, Snapshot};
use crate::operators::QuadConfig;

/// A row counts as saturated once its error exceeds the extrapolated
/// prediction by this factor.
pub const PLATEAU_FACTOR: f64 = 10.0;

/// Fixed-width float formatting used by every CSV writer (17 significant digits).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fit_rate(h: &[f64], err: &[f64]) -> Result<f64> {
    Error::check_len(h.len(), err.len())?;
    if h.len() < 2 {
        return Err(Error::param("a rate fit needs at least two points"));
    }
    if h.iter().chain(err).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Numeric("rate fit needs positive finite mesh sizes and errors".into()));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::param("rate fit needs distinct mesh sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n_el: usize,
    /// Element length.
    pub h: f64,
    pub l2_error: f64,
    pub plateau: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Slope fitted on the rows before the plateau.
    pub rate: f64,
    /// Geometric mean of the plateau errors, when a plateau was detected.
    pub saturation: Option<f64>,
}

impl ConvergenceReport {
    /// Splits rows into the asymptotic range and the plateau.
    ///
    /// Row `i` (with at least two rows before it) starts the plateau when its
    /// error exceeds `PLATEAU_FACTOR` times `e_{i-1} (h_i / h_{i-1})^r`, `r`
    /// fitted on the preceding rows.
    pub fn from_samples(samples: &[(usize, f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::param("a convergence study needs at least two sweep points"));
        }
        if samples.windows(2).any(|w| w[1].1 >= w[0].1) {
            return Err(Error::param("mesh sizes must be strictly decreasing across the sweep"));
        }
        let h: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let e: Vec<f64> = samples.iter().map(|s| s.2).collect();
        let mut plateau_from = samples.len();
        for i in 2..samples.len() {
            let r = fit_rate(&h[..i], &e[..i])?;
            let predicted = e[i - 1] * (h[i] / h[i - 1]).powf(r);
            if !(e[i] <= PLATEAU_FACTOR * predicted) {
                plateau_from = i;
                break;
            }
        }
        if plateau_from < 2 {
            return Err(Error::Numeric("fewer than two rows before the plateau".into()));
        }
        let rate = fit_rate(&h[..plateau_from], &e[..plateau_from])?;
        let tail = &e[plateau_from..];
        let saturation = (!tail.is_empty()).then(|| (tail.iter().map(|v| v.ln()).sum::<f64>() / tail.len() as f64).exp());
        let rows = samples
            .iter()
            .enumerate()
            .map(|(i, &(n_el, h, l2_error))| ConvergenceRow {
                n_el,
                h,
                l2_error,
                plateau: i >= plateau_from,
            })
            .collect();
        Ok(ConvergenceReport { rows, rate, saturation })
    }

    /// Smallest error in the sweep.
    pub fn best_error(&self) -> f64 {
        self.rows.iter().map(|r| r.l2_error).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Transport1d,
    Transport2d,
    Maxwell2d,
}

/// A solver problem with its own configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Transport1d(Transport1dConfig),
    Transport2d(Transport2dConfig),
    Maxwell2d(Maxwell2dConfig),
}

impl Problem {
    pub fn basis(&self) -> BasisSpec {
        match self {
            Problem::Transport1d(c) => c.basis,
            Problem::Transport2d(c) => c.basis,
            Problem::Maxwell2d(c) => c.basis,
        }
    }

    /// Copy with `n_el` elements per direction.
    pub fn with_elements(&self, n_el: usize) -> Problem {
        match self {
            Problem::Transport1d(c) => Problem::Transport1d(Transport1dConfig { n_el, ..c.clone() }),
            Problem::Transport2d(c) => Problem::Transport2d(Transport2dConfig {
                n_el_x: n_el,
                n_el_y: n_el,
                ..c.clone()
            }),
            Problem::Maxwell2d(c) => Problem::Maxwell2d(Maxwell2dConfig {
                n_el_x: n_el,
                n_el_y: n_el,
                ..c.clone()
            }),
        }
    }

    /// Element length along x.
    pub fn element_size(&self) -> f64 {
        match self {
            Problem::Transport1d(c) => (c.domain[1] - c.domain[0]) / c.n_el as f64,
            Problem::Transport2d(c) => (c.domain[1] - c.domain[0]) / c.n_el_x as f64,
            Problem::Maxwell2d(c) => (c.domain[1] - c.domain[0]) / c.n_el_x as f64,
        }
    }

    /// L2 error against the analytic solution at the final time.
    pub fn final_error(&self, disc: &Discretization) -> Result<f64> {
        match self {
            Problem::Transport1d(c) => Ok(solve_transport_1d(c, disc)?.final_error()),
            Problem::Transport2d(c) => Ok(solve_transport_2d(c, disc)?.l2_error),
            Problem::Maxwell2d(c) => solve_maxwell_2d(c, disc)?
                .hz_error
                .ok_or_else(|| Error::Config("maxwell problem has no analytic solution to compare with".into())),
        }
    }
}

/// Experiment file: `experiment`, an `n_el` sweep, and a `[problem]` table
/// holding the solver configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub experiment: ExperimentKind,
    /// Element counts per direction for convergence sweeps.
    #[serde(default)]
    pub n_el: Vec<usize>,
    /// Error sampling interval for long-time runs; `t_final / 100` if absent.
    #[serde(default)]
    pub record_every: Option<f64>,
    #[serde(default)]
    pub quadrature: QuadConfig,
    pub problem: toml::Table,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses the `[problem]` table; a missing element count is taken from
    /// the first sweep entry.
    pub fn problem(&self) -> Result<Problem> {
        let mut table = self.problem.clone();
        let fill = |table: &mut toml::Table, key: &str| {
            if let Some(&n) = self.n_el.first() {
                table.entry(key).or_insert(toml::Value::Integer(n as i64));
            }
        };
        let value = |t: toml::Table| toml::Value::Table(t);
        let parsed = match self.experiment {
            ExperimentKind::Transport1d => {
                fill(&mut table, "n_el");
                Problem::Transport1d(value(table).try_into().map_err(config_err)?)
            }
            ExperimentKind::Transport2d => {
                fill(&mut table, "n_el_x");
                fill(&mut table, "n_el_y");
                Problem::Transport2d(value(table).try_into().map_err(config_err)?)
            }
            ExperimentKind::Maxwell2d => {
                fill(&mut table, "n_el_x");
                fill(&mut table, "n_el_y");
                Problem::Maxwell2d(value(table).try_into().map_err(config_err)?)
            }
        };
        Ok(parsed)
    }
}

fn config_err(e: toml::de::Error) -> Error {
    Error::Config(format!("[problem]: {e}"))
}

pub fn run_convergence_study(cfg: &StudyConfig, cache_dir: Option<&Path>) -> Result<ConvergenceReport> {
    if cfg.n_el.is_empty() {
        return Err(Error::Config("convergence study needs a non-empty `n_el` sweep".into()));
    }
    let problem = cfg.problem()?;
    if let Problem::Maxwell2d(c) = &problem {
        if c.initial.omega(&c.material).is_none() || c.duffing.is_some() || c.forcing.is_some_and(|f| f.enabled) {
            return Err(Error::Config("convergence study needs an unforced standing-mode problem".into()));
        }
    }
    let disc = Discretization::new(problem.basis(), &cfg.quadrature, cache_dir)?;
    convergence_sweep(&problem, &cfg.n_el, &disc)
}

/// Runs `problem` once per entry of `sweep` and analyses the errors.
pub fn convergence_sweep(problem: &Problem, sweep: &[usize], disc: &Discretization) -> Result<ConvergenceReport> {
    let mut samples = Vec::with_capacity(sweep.len());
    for &n_el in sweep {
        let point = problem.with_elements(n_el);
        let err = point
            .final_error(disc)
            .map_err(|e| Error::SweepPoint { n_el, source: Box::new(e) })?;
        samples.push((n_el, point.element_size(), err));
    }
    ConvergenceReport::from_samples(&samples)
}

/// `(t, L2 error)` rows of a 1-D transport run.
pub fn run_long_time_study(cfg: &StudyConfig, cache_dir: Option<&Path>) -> Result<Vec<(f64, f64)>> {
    let Problem::Transport1d(mut problem) = cfg.problem()? else {
        return Err(Error::Config("long-time studies support the transport1d experiment".into()));
    };
    problem.record_every = cfg
        .record_every
        .or(problem.record_every)
        .or(Some(problem.t_final / 100.0))
        .filter(|r| *r > 0.0);
    let disc = Discretization::new(problem.basis, &cfg.quadrature, cache_dir)?;
    Ok(solve_transport_1d(&problem, &disc)?.history)
}

fn default_flux() -> FluxKind {
    FluxKind::Upwind
}
fn default_k_max() -> f64 {
    std::f64::consts::PI
}
fn default_samples() -> usize {
    200
}
fn default_domain() -> [f64; 2] {
    [-1.0, 1.0]
}

/// Bloch-wave dispersion sweep over `K = k_max * i / samples`, `i = 0..=samples`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    pub basis: BasisSpec,
    #[serde(default = "default_flux")]
    pub flux: FluxKind,
    #[serde(default = "default_k_max")]
    pub k_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub quadrature: QuadConfig,
}

impl DispersionConfig {
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.samples.max(1);
        (0..=n).map(|i| self.k_max * i as f64 / n as f64).collect()
    }
}

/// Spectrum of the periodic operator on a uniform 1-D mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub basis: BasisSpec,
    pub n_el: usize,
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
    #[serde(default = "default_flux")]
    pub flux: FluxKind,
    #[serde(default)]
    pub quadrature: QuadConfig,
}

/// Basis selection for `assemble` and `basis-dump`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub basis: BasisSpec,
    /// Evaluation points on `[-1, 1]` for dumps.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub quadrature: QuadConfig,
}

/// Basis functions at `points`; entry `(m, j)` is `phi_j(points[m])`.
pub fn basis_values(spec: BasisSpec, points: &[f64]) -> Result<DMatrix<f64>> {
    match spec {
        BasisSpec::Fc { n, p, m } => Ok(evaluate_basis(&build_basis(&FcParams::new(n, p, m)?)?, points)),
        BasisSpec::Legendre { q } => Ok(LegendreBasis::new(q)?.evaluate(points)),
    }
}

pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn write_history_csv(mut w: impl Write, rows: &[(f64, f64)], header: &str) -> Result<()> {
    writeln!(w, "{header}")?;
    for &(a, b) in rows {
        writeln!(w, "{},{}", fmt_float(a), fmt_float(b))?;
    }
    Ok(())
}

pub fn write_convergence_csv(mut w: impl Write, report: &ConvergenceReport) -> Result<()> {
    writeln!(w, "n_el,h,l2_error,plateau")?;
    for r in &report.rows {
        writeln!(w, "{},{},{},{}", r.n_el, fmt_float(r.h), fmt_float(r.l2_error), r.plateau as u8)?;
    }
    Ok(())
}

/// One-row summary: fitted rate, saturation (empty when none), rows used in the fit.
pub fn write_fit_csv(mut w: impl Write, report: &ConvergenceReport) -> Result<()> {
    writeln!(w, "rate,saturation,fit_rows")?;
    let used = report.rows.iter().filter(|r| !r.plateau).count();
    let sat = report.saturation.map(fmt_float).unwrap_or_default();
    writeln!(w, "{},{},{}", fmt_float(report.rate), sat, used)?;
    Ok(())
}

pub fn write_dispersion_csv(mut w: impl Write, result: &DispersionResult) -> Result<()> {
    writeln!(w, "k,re_omega,im_omega,k_per_dof,projection,ambiguous")?;
    for p in &result.points {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_float(p.k),
            fmt_float(p.omega.re),
            fmt_float(p.omega.im),
            fmt_float(p.k_per_dof),
            fmt_float(p.projection),
            p.ambiguous as u8
        )?;
    }
    Ok(())
}

/// Eigenvalues sorted by imaginary then real part.
pub fn write_spectrum_csv(mut w: impl Write, result: &SpectrumResult) -> Result<()> {
    let mut sorted: Vec<Complex64> = result.eigenvalues.clone();
    sorted.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    writeln!(w, "re_lambda,im_lambda")?;
    for l in sorted {
        writeln!(w, "{},{}", fmt_float(l.re), fmt_float(l.im))?;
    }
    Ok(())
}

pub fn write_snapshot_csv(mut w: impl Write, snap: &Snapshot) -> Result<()> {
    writeln!(w, "x,y,hz,ex,ey")?;
    for (i, &(x, y)) in snap.coords.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_float(x),
            fmt_float(y),
            fmt_float(snap.hz[i]),
            fmt_float(snap.ex[i]),
            fmt_float(snap.ey[i])
        )?;
    }
    Ok(())
}

/// First column `z`, then one column per basis function.
pub fn write_basis_csv(mut w: impl Write, points: &[f64], values: &DMatrix<f64>) -> Result<()> {
    let header: Vec<String> = std::iter::once("z".to_string())
        .chain((0..values.ncols()).map(|j| format!("phi_{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (m, &z) in points.iter().enumerate() {
        let row: Vec<String> = std::iter::once(z).chain(values.row(m).iter().copied()).map(fmt_float).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
