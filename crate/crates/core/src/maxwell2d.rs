//! TE-mode Maxwell equations `(Hz, Ex, Ey)` with line-based DG, PEC cavity
//! walls, a localized source and polarization models (Lorentz, polynomial
//! Maxwell-Duffing) carried as auxiliary ODEs at the nodes.

use serde::{Deserialize, Serialize};

use crate::dg1d::{default_taylor_order, step_plan, FluxKind};
use crate::discretization::{BasisSpec, Discretization};
use crate::error::{Error, Result};
use crate::line_dg2d::{nodal_field, project_field, LineBoundary, LineDg, Mesh2D};
use crate::time_integration::{Integrator, Rk4Stepper, TaylorScheme, TaylorStepper};

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxwellParams {
    #[serde(default = "unit")]
    pub mu0: f64,
    #[serde(default = "unit")]
    pub eps0: f64,
    #[serde(default = "unit")]
    pub eps_inf: f64,
}

impl Default for MaxwellParams {
    fn default() -> Self {
        MaxwellParams {
            mu0: 1.0,
            eps0: 1.0,
            eps_inf: 1.0,
        }
    }
}

impl MaxwellParams {
    pub fn validate(&self) -> Result<()> {
        if [self.mu0, self.eps0, self.eps_inf].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::param("mu0, eps0 and eps_inf must be positive"))
        }
    }

    pub fn wave_speed(&self) -> f64 {
        1.0 / (self.mu0 * self.eps0 * self.eps_inf).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuffingParams {
    pub omega0: f64,
    pub omega_p: f64,
    pub tau_inv: f64,
    /// `lambda_0, lambda_2, ..., lambda_{2 N_PMD}`.
    pub lambdas: Vec<f64>,
}

impl DuffingParams {
    pub fn n_pmd(&self) -> usize {
        self.lambdas.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pmd() < 1 {
            return Err(Error::param("Duffing polynomial needs lambda_0 and at least lambda_2"));
        }
        if ![self.omega0, self.omega_p, self.tau_inv].iter().chain(&self.lambdas).all(|v| v.is_finite())
            || self.tau_inv < 0.0
        {
            return Err(Error::param("Duffing parameters must be finite with tau_inv >= 0"));
        }
        Ok(())
    }

    /// `F(P) = sum_l lambda_{2l} |P|^{2l}` at `|P|^2 = p2`.
    pub fn f_pmd(&self, p2: f64) -> f64 {
        self.lambdas.iter().rev().fold(0.0, |acc, l| acc * p2 + l)
    }
}

/// `(dP/dt, d^2P/dt^2)` for `P'' + P'/tau + omega0^2 P F(P) = omega_p^2 E`.
pub fn duffing_rhs(p: [f64; 2], pdot: [f64; 2], e: [f64; 2], dp: &DuffingParams) -> ([f64; 2], [f64; 2]) {
    let f = dp.f_pmd(p[0] * p[0] + p[1] * p[1]);
    let w0 = dp.omega0 * dp.omega0;
    let wp = dp.omega_p * dp.omega_p;
    let acc = |c: usize| wp * e[c] - dp.tau_inv * pdot[c] - w0 * p[c] * f;
    (pdot, [acc(0), acc(1)])
}

/// Linear Lorentz oscillator `P'' + P'/tau + omega0^2 P = omega_p^2 E`, one component.
pub fn lorentz_rhs(p: f64, pdot: f64, e: f64, omega0: f64, omega_p: f64, tau_inv: f64) -> (f64, f64) {
    (pdot, omega_p.powi(2) * e - tau_inv * pdot - omega0.powi(2) * p)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Polarization {
    Lorentz { omega0: f64, omega_p: f64, tau_inv: f64 },
    Duffing(DuffingParams),
}

fn default_amplitude() -> f64 {
    2500.0
}
fn default_frequency() -> f64 {
    100.0
}
fn default_width() -> f64 {
    36.0
}
fn enabled() -> bool {
    true
}

/// `f(x, y, t) = A sin(omega t) exp(-w ((x-x0)^2 + (y-y0)^2))`, entering the
/// `E` equations as `f (y - y0)` and `f (x - x0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    #[serde(default = "enabled")]
    pub enabled: bool,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_frequency")]
    pub frequency: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    pub x0: f64,
    pub y0: f64,
}

impl ForcingSpec {
    pub fn at(x0: f64, y0: f64) -> Self {
        ForcingSpec {
            enabled: true,
            amplitude: default_amplitude(),
            frequency: default_frequency(),
            width: default_width(),
            x0,
            y0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(Error::param("forcing width must be positive"));
        }
        Ok(())
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        let r2 = (x - self.x0).powi(2) + (y - self.y0).powi(2);
        self.amplitude * (self.frequency * t).sin() * (-self.width * r2).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmBoundary {
    Periodic,
    #[default]
    PecCavity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WallKind {
    /// Tangential electric field at a conducting wall.
    PecTangential,
    /// Any other field: even extension.
    Neumann,
}

/// Ghost value seen across an exterior wall.
pub fn apply_em_boundary(interior: f64, kind: WallKind) -> f64 {
    match kind {
        WallKind::PecTangential => -interior,
        WallKind::Neumann => interior,
    }
}

fn ghost_sign(kind: WallKind) -> f64 {
    apply_em_boundary(1.0, kind)
}

/// Views of a stacked state `[Hz, Ex, Ey, (Px, Py, Jx, Jy)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxwellState {
    pub data: Vec<f64>,
    pub field_len: usize,
}

impl MaxwellState {
    pub fn zeros(field_len: usize, with_polarization: bool) -> Self {
        let blocks = if with_polarization { 7 } else { 3 };
        MaxwellState {
            data: vec![0.0; blocks * field_len],
            field_len,
        }
    }

    pub fn block(&self, b: usize) -> &[f64] {
        &self.data[b * self.field_len..(b + 1) * self.field_len]
    }

    pub fn block_mut(&mut self, b: usize) -> &mut [f64] {
        &mut self.data[b * self.field_len..(b + 1) * self.field_len]
    }

    pub fn hz(&self) -> &[f64] {
        self.block(0)
    }

    pub fn ex(&self) -> &[f64] {
        self.block(1)
    }

    pub fn ey(&self) -> &[f64] {
        self.block(2)
    }

    pub fn has_polarization(&self) -> bool {
        self.data.len() == 7 * self.field_len
    }
}

#[derive(Clone, Debug)]
pub struct Maxwell2D {
    pub line: LineDg,
    pub params: MaxwellParams,
    pub flux: FluxKind,
    pub forcing: Option<ForcingSpec>,
    pub polarization: Option<Polarization>,
    /// Node coordinates in field layout; forcing and polarization act here.
    coords: Vec<(f64, f64)>,
}

impl Maxwell2D {
    pub fn new(
        disc: &Discretization,
        mesh: Mesh2D,
        params: MaxwellParams,
        flux: FluxKind,
        bc: EmBoundary,
        forcing: Option<ForcingSpec>,
        polarization: Option<Polarization>,
    ) -> Result<Self> {
        params.validate()?;
        if flux == FluxKind::Upwind {
            return Err(Error::param("Maxwell solver supports centered and alternating fluxes"));
        }
        let forcing = forcing.filter(|f| f.enabled);
        if let Some(f) = &forcing {
            f.validate()?;
        }
        if let Some(Polarization::Duffing(d)) = &polarization {
            d.validate()?;
        }
        let pointwise = forcing.is_some() || polarization.is_some();
        if pointwise && !matches!(disc.spec, BasisSpec::Fc { .. }) {
            return Err(Error::param("forcing and polarization are applied at nodes and need the nodal FC basis"));
        }
        let boundary = match bc {
            EmBoundary::Periodic => LineBoundary::Periodic,
            EmBoundary::PecCavity => LineBoundary::Walls,
        };
        let coords = mesh.node_coordinates(&disc.nodes);
        Ok(Maxwell2D {
            line: LineDg::new(&disc.ops, mesh, boundary, boundary),
            params,
            flux,
            forcing,
            polarization,
            coords,
        })
    }

    pub fn field_len(&self) -> usize {
        self.line.len()
    }

    pub fn state_len(&self) -> usize {
        self.field_len() * if self.polarization.is_some() { 7 } else { 3 }
    }

    pub fn is_linear_autonomous(&self) -> bool {
        self.forcing.is_none() && !matches!(self.polarization, Some(Polarization::Duffing(_)))
    }

    fn e_rule(&self) -> impl Fn(f64, f64, bool) -> f64 {
        let flux = self.flux;
        move |a, b, wall| match flux {
            FluxKind::Alternating if !wall => a,
            _ => 0.5 * (a + b),
        }
    }

    fn h_rule(&self) -> impl Fn(f64, f64, bool) -> f64 {
        let flux = self.flux;
        move |a, b, wall| match flux {
            FluxKind::Alternating if !wall => b,
            _ => 0.5 * (a + b),
        }
    }

    pub fn rhs(&self, t: f64, u: &[f64], out: &mut [f64]) -> Result<()> {
        let len = self.field_len();
        Error::check_len(self.state_len(), u.len())?;
        Error::check_len(self.state_len(), out.len())?;
        let (hz, ex, ey) = (&u[..len], &u[len..2 * len], &u[2 * len..3 * len]);
        let (o_hz, rest) = out.split_at_mut(len);
        let (o_ex, rest) = rest.split_at_mut(len);
        let (o_ey, o_pol) = rest.split_at_mut(len);
        let tangential = ghost_sign(WallKind::PecTangential);
        let even = ghost_sign(WallKind::Neumann);

        let mut d = vec![0.0; len];
        self.line.derivative_x(ey, tangential, self.e_rule(), &mut d)?;
        o_hz.iter_mut().zip(&d).for_each(|(o, v)| *o = -v);
        self.line.derivative_y(ex, tangential, self.e_rule(), &mut d)?;
        let inv_mu = 1.0 / self.params.mu0;
        o_hz.iter_mut().zip(&d).for_each(|(o, v)| *o = (*o + v) * inv_mu);
        self.line.derivative_y(hz, even, self.h_rule(), o_ex)?;
        self.line.derivative_x(hz, even, self.h_rule(), o_ey)?;
        o_ey.iter_mut().for_each(|v| *v = -*v);

        if let Some(f) = &self.forcing {
            for (k, &(x, y)) in self.coords.iter().enumerate() {
                let s = f.value(x, y, t);
                o_ex[k] += s * (y - f.y0);
                o_ey[k] += s * (x - f.x0);
            }
        }

        let eps = self.params.eps0 * self.params.eps_inf;
        if let Some(pol) = &self.polarization {
            let (px, py, jx, jy) = (
                &u[3 * len..4 * len],
                &u[4 * len..5 * len],
                &u[5 * len..6 * len],
                &u[6 * len..7 * len],
            );
            let (o_px, rest) = o_pol.split_at_mut(len);
            let (o_py, rest) = rest.split_at_mut(len);
            let (o_jx, o_jy) = rest.split_at_mut(len);
            for k in 0..len {
                o_ex[k] -= self.params.eps0 * jx[k];
                o_ey[k] -= self.params.eps0 * jy[k];
                match pol {
                    Polarization::Lorentz {
                        omega0,
                        omega_p,
                        tau_inv,
                    } => {
                        (o_px[k], o_jx[k]) = lorentz_rhs(px[k], jx[k], ex[k], *omega0, *omega_p, *tau_inv);
                        (o_py[k], o_jy[k]) = lorentz_rhs(py[k], jy[k], ey[k], *omega0, *omega_p, *tau_inv);
                    }
                    Polarization::Duffing(dp) => {
                        let (pd, pdd) = duffing_rhs([px[k], py[k]], [jx[k], jy[k]], [ex[k], ey[k]], dp);
                        (o_px[k], o_py[k], o_jx[k], o_jy[k]) = (pd[0], pd[1], pdd[0], pdd[1]);
                    }
                }
            }
        }
        o_ex.iter_mut().chain(o_ey.iter_mut()).for_each(|v| *v /= eps);
        Ok(())
    }

    /// `1/2 int mu0 Hz^2 + eps0 eps_inf (Ex^2 + Ey^2)` by the tensor trapezoid
    /// rule on nodal values.
    pub fn energy_trapezoid(&self, disc: &Discretization, u: &[f64]) -> Result<f64> {
        let len = self.field_len();
        let w = self.line.trapezoid_weights(&disc.nodes);
        let eps = self.params.eps0 * self.params.eps_inf;
        let mut total = 0.0;
        for (b, coef) in [(0, self.params.mu0), (1, eps), (2, eps)] {
            let vals = nodal_field(disc, &u[b * len..(b + 1) * len])?;
            total += coef * vals.iter().zip(&w).map(|(v, wt)| wt * v * v).sum::<f64>();
        }
        Ok(0.5 * total)
    }

    /// Same energy in the discrete (mass-matrix) norm.
    pub fn energy(&self, disc: &Discretization, u: &[f64]) -> f64 {
        let len = self.field_len();
        let eps = self.params.eps0 * self.params.eps_inf;
        let m = &disc.ops.mass;
        0.5 * (self.params.mu0 * self.line.mass_norm_sq(&u[..len], m)
            + eps * self.line.mass_norm_sq(&u[len..2 * len], m)
            + eps * self.line.mass_norm_sq(&u[2 * len..3 * len], m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaxwellInitial {
    /// `Hz = sin(kx x) sin(ky y)`, `E = 0`.
    StandingMode { kx: f64, ky: f64 },
    /// All fields zero.
    Quiescent,
    /// `Hz = exp(-a ((x-x0)^2 + (y-y0)^2))`, `E = 0`.
    Gaussian { a: f64, x0: f64, y0: f64 },
}

impl MaxwellInitial {
    fn hz(&self, x: f64, y: f64) -> f64 {
        match *self {
            MaxwellInitial::StandingMode { kx, ky } => (kx * x).sin() * (ky * y).sin(),
            MaxwellInitial::Quiescent => 0.0,
            MaxwellInitial::Gaussian { a, x0, y0 } => (-a * ((x - x0).powi(2) + (y - y0).powi(2))).exp(),
        }
    }

    /// Angular frequency of the standing mode.
    pub fn omega(&self, params: &MaxwellParams) -> Option<f64> {
        match *self {
            MaxwellInitial::StandingMode { kx, ky } => Some((kx * kx + ky * ky).sqrt() * params.wave_speed()),
            _ => None,
        }
    }
}

fn default_cfl() -> f64 {
    0.2
}
fn default_maxwell_flux() -> FluxKind {
    FluxKind::Centered
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Maxwell2dConfig {
    pub basis: BasisSpec,
    pub n_el_x: usize,
    pub n_el_y: usize,
    /// `[x0, x1, y0, y1]`.
    pub domain: [f64; 4],
    #[serde(default = "default_maxwell_flux")]
    pub flux: FluxKind,
    #[serde(default)]
    pub bc: EmBoundary,
    #[serde(default)]
    pub material: MaxwellParams,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// End time; alternatively `periods` of the standing mode.
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub periods: Option<f64>,
    pub initial: MaxwellInitial,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    #[serde(default)]
    pub duffing: Option<DuffingParams>,
    /// Defaults to Taylor for linear unforced runs and RK4 otherwise.
    #[serde(default)]
    pub integrator: Option<Integrator>,
    #[serde(default = "default_taylor_order")]
    pub taylor_order: usize,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    /// Interval of energy records; endpoints only when absent.
    #[serde(default)]
    pub energy_every: Option<f64>,
}

impl Maxwell2dConfig {
    pub fn standing_mode(basis: BasisSpec, n_el: usize, flux: FluxKind) -> Self {
        let half = 1.5 * std::f64::consts::PI;
        Maxwell2dConfig {
            basis,
            n_el_x: n_el,
            n_el_y: n_el,
            domain: [-half, half, -half, half],
            flux,
            bc: EmBoundary::PecCavity,
            material: MaxwellParams::default(),
            cfl: default_cfl(),
            t_final: None,
            periods: Some(1.0),
            initial: MaxwellInitial::StandingMode { kx: 5.0, ky: 5.0 },
            forcing: None,
            duffing: None,
            integrator: None,
            taylor_order: default_taylor_order(),
            snapshots: Vec::new(),
            energy_every: None,
        }
    }

    pub fn end_time(&self) -> Result<f64> {
        match (self.t_final, self.periods) {
            (Some(t), None) => Ok(t),
            (None, Some(p)) => {
                let omega = self
                    .initial
                    .omega(&self.material)
                    .ok_or_else(|| Error::Config("`periods` needs a standing-mode initial condition".into()))?;
                Ok(p * 2.0 * std::f64::consts::PI / omega)
            }
            _ => Err(Error::Config("set exactly one of `t_final` and `periods`".into())),
        }
    }

    pub fn integrator(&self) -> Integrator {
        let forced = self.forcing.is_some_and(|f| f.enabled);
        self.integrator.unwrap_or(if forced || self.duffing.is_some() {
            Integrator::Rk4
        } else {
            Integrator::Taylor
        })
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.end_time()?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::param("end time must be a non-negative number"));
        }
        if self.n_el_x == 0 || self.n_el_y == 0 {
            return Err(Error::param("element counts must be positive"));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::param("cfl must be positive"));
        }
        if self.domain[1] <= self.domain[0] || self.domain[3] <= self.domain[2] {
            return Err(Error::param("domain must be a non-empty rectangle"));
        }
        let nonlinear = self.forcing.is_some_and(|f| f.enabled) || self.duffing.is_some();
        if nonlinear && self.integrator() == Integrator::Taylor {
            return Err(Error::Config(
                "Taylor stepping needs a linear autonomous system; use rk4 with forcing or Duffing".into(),
            ));
        }
        if self.snapshots.iter().any(|&s| !(0.0..=t).contains(&s)) {
            return Err(Error::param("snapshot times must lie in [0, end time]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub coords: Vec<(f64, f64)>,
    pub hz: Vec<f64>,
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxwellRun {
    pub state: MaxwellState,
    pub snapshots: Vec<Snapshot>,
    /// `(t, energy)` rows, discrete norm.
    pub energy: Vec<(f64, f64)>,
    /// L2 error of `Hz` against the standing-mode solution.
    pub hz_error: Option<f64>,
    pub steps: usize,
}

pub fn solve_maxwell_2d(cfg: &Maxwell2dConfig, disc: &Discretization) -> Result<MaxwellRun> {
    cfg.validate()?;
    if disc.spec != cfg.basis {
        return Err(Error::Config(format!(
            "discretization {} does not match configured basis {}",
            disc.spec.label(),
            cfg.basis.label()
        )));
    }
    let t_end = cfg.end_time()?;
    let mesh = Mesh2D::uniform(cfg.domain, cfg.n_el_x, cfg.n_el_y)?;
    let op = Maxwell2D::new(
        disc,
        mesh.clone(),
        cfg.material,
        cfg.flux,
        cfg.bc,
        cfg.forcing,
        cfg.duffing.clone().map(Polarization::Duffing),
    )?;
    let len = op.field_len();
    let mut state = MaxwellState::zeros(len, op.polarization.is_some());
    state.block_mut(0).copy_from_slice(&project_field(disc, &mesh, |x, y| cfg.initial.hz(x, y))?);

    let jmin = mesh.x.jacobians.iter().chain(&mesh.y.jacobians).cloned().fold(f64::INFINITY, f64::min);
    let mut dt_max = cfg.cfl * disc.node_gap() * jmin / (2.0 * cfg.material.wave_speed());
    if let Some(d) = &cfg.duffing {
        dt_max = dt_max.min(1.0 / (d.omega0.abs() + d.tau_inv).max(1e-300));
    }

    // Step in segments that end exactly on every snapshot and energy record.
    let mut marks: Vec<f64> = cfg.snapshots.clone();
    if let Some(every) = cfg.energy_every.filter(|e| *e > 0.0) {
        let count = (t_end / every).floor() as usize;
        marks.extend((1..=count).map(|k| k as f64 * every));
    }
    marks.push(t_end);
    marks.retain(|m| *m > 0.0 && *m <= t_end);
    marks.sort_by(f64::total_cmp);
    marks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end.max(1.0));

    let snapshot = |state: &MaxwellState, time: f64| -> Result<Snapshot> {
        Ok(Snapshot {
            time,
            coords: mesh.node_coordinates(&disc.nodes),
            hz: nodal_field(disc, state.hz())?,
            ex: nodal_field(disc, state.ex())?,
            ey: nodal_field(disc, state.ey())?,
        })
    };
    let is_snapshot = |t: f64| cfg.snapshots.iter().any(|s| (s - t).abs() <= 1e-12 * t_end.max(1.0));

    let mut snapshots = Vec::new();
    if is_snapshot(0.0) {
        snapshots.push(snapshot(&state, 0.0)?);
    }
    let mut energy = vec![(0.0, op.energy(disc, &state.data))];
    let integrator = cfg.integrator();
    let mut rk4 = Rk4Stepper::new(state.data.len());
    let mut t = 0.0;
    let mut steps = 0;
    for &mark in &marks {
        let (n, dt) = step_plan(mark - t, dt_max);
        if n > 0 {
            match integrator {
                Integrator::Taylor => {
                    let scheme = TaylorScheme {
                        order: cfg.taylor_order,
                        dt,
                    };
                    let mut stepper = TaylorStepper::new(scheme, state.data.len())?;
                    for s in 0..n {
                        let ts = t + s as f64 * dt;
                        stepper.step(&mut state.data, ts, |v, w| op.rhs(ts, v, w).expect("sizes match"))?;
                    }
                }
                Integrator::Rk4 => {
                    for s in 0..n {
                        let ts = t + s as f64 * dt;
                        rk4.step(&mut state.data, ts, dt, |tt, v, w| op.rhs(tt, v, w).expect("sizes match"))?;
                    }
                }
            }
        }
        steps += n;
        t = mark;
        energy.push((t, op.energy(disc, &state.data)));
        if is_snapshot(t) {
            snapshots.push(snapshot(&state, t)?);
        }
    }

    let hz_error = match cfg.initial.omega(&cfg.material) {
        Some(omega) if cfg.forcing.is_none_or(|f| !f.enabled) && cfg.duffing.is_none() => {
            let weights = op.line.trapezoid_weights(&disc.nodes);
            let exact: Vec<f64> = mesh
                .node_coordinates(&disc.nodes)
                .iter()
                .map(|&(x, y)| cfg.initial.hz(x, y) * (omega * t_end).cos())
                .collect();
            Some(crate::line_dg2d::weighted_l2(&nodal_field(disc, state.hz())?, &exact, &weights)?)
        }
        _ => None,
    };
    Ok(MaxwellRun {
        state,
        snapshots,
        energy,
        hz_error,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::QuadConfig;

    fn fc(n: usize) -> Discretization {
        Discretization::new(BasisSpec::fc(n), &QuadConfig::default(), None).unwrap()
    }

    fn cavity(d: &Discretization, n_el: usize, flux: FluxKind, bc: EmBoundary) -> Maxwell2D {
        let half = 1.5 * std::f64::consts::PI;
        let mesh = Mesh2D::uniform([-half, half, -half, half], n_el, n_el).unwrap();
        Maxwell2D::new(d, mesh, MaxwellParams::default(), flux, bc, None, None).unwrap()
    }

    #[test]
    fn boundary_ghosts() {
        assert_eq!(apply_em_boundary(2.0, WallKind::PecTangential), -2.0);
        assert_eq!(apply_em_boundary(2.0, WallKind::Neumann), 2.0);
        assert_eq!(apply_em_boundary(-0.5, WallKind::Neumann), -0.5);
    }

    #[test]
    fn duffing_polynomial() {
        let lin = DuffingParams {
            omega0: 2.0,
            omega_p: 3.0,
            tau_inv: 0.5,
            lambdas: vec![1.0, 0.0],
        };
        assert_eq!(duffing_rhs([0.0; 2], [0.0; 2], [0.0; 2], &lin), ([0.0; 2], [0.0; 2]));
        let (pd, pdd) = duffing_rhs([0.3, -0.2], [0.1, 0.4], [1.0, -2.0], &lin);
        assert_eq!(pd, [0.1, 0.4]);
        let (_, ax) = lorentz_rhs(0.3, 0.1, 1.0, 2.0, 3.0, 0.5);
        let (_, ay) = lorentz_rhs(-0.2, 0.4, -2.0, 2.0, 3.0, 0.5);
        assert_eq!(pdd, [ax, ay]);

        let quartic = DuffingParams {
            lambdas: vec![1.0, 1.0],
            ..lin.clone()
        };
        assert_eq!(quartic.f_pmd(0.25), 1.25);
        let (_, pdd) = duffing_rhs([0.5, 0.0], [0.2, 0.0], [1.5, 0.0], &quartic);
        assert!((pdd[0] - (9.0 * 1.5 - 0.5 * 0.2 - 1.25 * 4.0 * 0.5)).abs() < 1e-15);
        assert!(DuffingParams { lambdas: vec![1.0], ..lin }.validate().is_err());
    }

    #[test]
    fn zero_state_and_free_stream() {
        let d = fc(20);
        let op = cavity(&d, 2, FluxKind::Centered, EmBoundary::PecCavity);
        let u = vec![0.0; op.state_len()];
        let mut out = vec![1.0; op.state_len()];
        op.rhs(0.3, &u, &mut out).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
        let op = cavity(&d, 2, FluxKind::Alternating, EmBoundary::Periodic);
        let mut u = vec![0.0; op.state_len()];
        u[..op.field_len()].iter_mut().for_each(|v| *v = 4.0);
        op.rhs(0.0, &u, &mut out).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn curl_of_standing_mode() {
        let d = fc(40);
        let op = cavity(&d, 3, FluxKind::Centered, EmBoundary::PecCavity);
        let len = op.field_len();
        let mut u = vec![0.0; op.state_len()];
        u[..len].copy_from_slice(&project_field(&d, &op.line.mesh, |x, y| (5.0 * x).sin() * (5.0 * y).sin()).unwrap());
        let mut out = vec![0.0; u.len()];
        op.rhs(0.0, &u, &mut out).unwrap();
        let coords = op.line.mesh.node_coordinates(&d.nodes);
        let mut worst: f64 = 0.0;
        for (k, &(x, y)) in coords.iter().enumerate() {
            worst = worst.max((out[len + k] - 5.0 * (5.0 * x).sin() * (5.0 * y).cos()).abs());
            worst = worst.max((out[2 * len + k] + 5.0 * (5.0 * x).cos() * (5.0 * y).sin()).abs());
            worst = worst.max(out[k].abs());
        }
        assert!(worst < 1e-5, "{worst:e}");
    }

    #[test]
    fn unsupported_choices_are_rejected() {
        let d = fc(20);
        let mesh = Mesh2D::uniform([0.0, 1.0, 0.0, 1.0], 1, 1).unwrap();
        let p = MaxwellParams::default();
        assert!(Maxwell2D::new(&d, mesh.clone(), p, FluxKind::Upwind, EmBoundary::Periodic, None, None).is_err());
        let leg = Discretization::new(BasisSpec::Legendre { q: 4 }, &QuadConfig::default(), None).unwrap();
        let f = Some(ForcingSpec::at(0.5, 0.5));
        assert!(Maxwell2D::new(&leg, mesh, p, FluxKind::Centered, EmBoundary::PecCavity, f, None).is_err());

        let mut cfg = Maxwell2dConfig::standing_mode(BasisSpec::fc(20), 2, FluxKind::Centered);
        cfg.forcing = Some(ForcingSpec::at(0.0, 0.0));
        cfg.periods = None;
        cfg.t_final = Some(0.1);
        cfg.integrator = Some(Integrator::Taylor);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.t_final = None;
        cfg.integrator = None;
        cfg.initial = MaxwellInitial::Quiescent;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn energy_is_conserved_with_both_fluxes() {
        let d = fc(20);
        for (flux, bc) in [
            (FluxKind::Centered, EmBoundary::Periodic),
            (FluxKind::Alternating, EmBoundary::Periodic),
            (FluxKind::Centered, EmBoundary::PecCavity),
            (FluxKind::Alternating, EmBoundary::PecCavity),
        ] {
            let mut cfg = Maxwell2dConfig::standing_mode(BasisSpec::fc(20), 3, flux);
            cfg.bc = bc;
            cfg.domain = [0.0, 2.0, 0.0, 2.0];
            cfg.periods = None;
            cfg.t_final = Some(2.0);
            cfg.initial = MaxwellInitial::Gaussian {
                a: 20.0,
                x0: 0.8,
                y0: 1.1,
            };
            let run = solve_maxwell_2d(&cfg, &d).unwrap();
            let (e0, e1) = (run.energy[0].1, run.energy.last().unwrap().1);
            assert!(((e1 - e0) / e0).abs() < 1e-8, "{flux:?} {bc:?}: {:e}", (e1 - e0) / e0);
        }
    }

    #[test]
    fn linear_in_amplitude() {
        let d = fc(20);
        let op = cavity(&d, 2, FluxKind::Alternating, EmBoundary::PecCavity);
        let len = op.field_len();
        let hz0 = project_field(&d, &op.line.mesh, |x, y| (5.0 * x).sin() * (5.0 * y).sin()).unwrap();
        let mut u = vec![0.0; op.state_len()];
        u[..len].copy_from_slice(&hz0);
        let mut v: Vec<f64> = u.iter().map(|x| -3.5 * x).collect();
        let dt = 0.01;
        let mut stepper = TaylorStepper::new(TaylorScheme { order: 8, dt }, u.len()).unwrap();
        for s in 0..40 {
            stepper.step(&mut u, s as f64 * dt, |a, b| op.rhs(0.0, a, b).unwrap()).unwrap();
            stepper.step(&mut v, s as f64 * dt, |a, b| op.rhs(0.0, a, b).unwrap()).unwrap();
        }
        let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in u.iter().zip(&v) {
            assert!((3.5 * x + y).abs() < 1e-12 * 3.5 * scale);
        }
    }

    #[test]
    fn duffing_with_unit_polynomial_matches_lorentz() {
        let d = fc(20);
        let mesh = Mesh2D::uniform([0.0, 1.0, 0.0, 1.0], 2, 2).unwrap();
        let p = MaxwellParams::default();
        let forcing = Some(ForcingSpec::at(0.4, 0.6));
        let duff = Polarization::Duffing(DuffingParams {
            omega0: 3.0,
            omega_p: 2.0,
            tau_inv: 0.7,
            lambdas: vec![1.0, 0.0],
        });
        let lor = Polarization::Lorentz {
            omega0: 3.0,
            omega_p: 2.0,
            tau_inv: 0.7,
        };
        let a = Maxwell2D::new(&d, mesh.clone(), p, FluxKind::Centered, EmBoundary::PecCavity, forcing, Some(duff)).unwrap();
        let b = Maxwell2D::new(&d, mesh, p, FluxKind::Centered, EmBoundary::PecCavity, forcing, Some(lor)).unwrap();
        let mut ua = vec![0.0; a.state_len()];
        let mut ub = ua.clone();
        let mut sa = Rk4Stepper::new(ua.len());
        let mut sb = Rk4Stepper::new(ub.len());
        let dt = 2e-4;
        for s in 0..200 {
            let t = s as f64 * dt;
            sa.step(&mut ua, t, dt, |tt, v, w| a.rhs(tt, v, w).unwrap()).unwrap();
            sb.step(&mut ub, t, dt, |tt, v, w| b.rhs(tt, v, w).unwrap()).unwrap();
            let diff = ua.iter().zip(&ub).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(diff <= 1e-10, "step {s}: {diff:e}");
        }
        assert!(ua.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn forced_cavity_stays_finite_and_records_snapshots() {
        let d = fc(20);
        let cfg = Maxwell2dConfig {
            n_el_x: 2,
            n_el_y: 2,
            domain: [0.0, 1.0, 0.0, 1.0],
            periods: None,
            t_final: Some(0.05),
            initial: MaxwellInitial::Quiescent,
            forcing: Some(ForcingSpec::at(0.5, 0.5)),
            snapshots: vec![0.0, 0.02, 0.05],
            ..Maxwell2dConfig::standing_mode(BasisSpec::fc(20), 2, FluxKind::Centered)
        };
        let run = solve_maxwell_2d(&cfg, &d).unwrap();
        assert_eq!(run.snapshots.len(), 3);
        assert_eq!(run.snapshots[1].time, 0.02);
        assert!(run.state.data.iter().all(|v| v.is_finite()));
        assert!(run.energy.last().unwrap().1 > 0.0);
        assert!(run.hz_error.is_none());
    }
}
