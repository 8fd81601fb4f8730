//! One-dimensional DG transport `u_t + c u_x = 0` on periodic meshes.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::{BasisSpec, Discretization};
use crate::error::{Error, Result};
use crate::operators::ElementOperators;
use crate::time_integration::{Integrator, Rk4Stepper, TaylorScheme, TaylorStepper};

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1D {
    pub domain: (f64, f64),
    pub element_bounds: Vec<f64>,
    /// `J_k = (x_{k+1} - x_k) / 2`.
    pub jacobians: Vec<f64>,
}

impl Mesh1D {
    pub fn uniform(a: f64, b: f64, n_el: usize) -> Result<Self> {
        if n_el == 0 {
            return Err(Error::param("mesh needs at least one element"));
        }
        let h = (b - a) / n_el as f64;
        let mut bounds: Vec<f64> = (0..=n_el).map(|k| a + k as f64 * h).collect();
        bounds[n_el] = b;
        Self::from_bounds(bounds)
    }

    pub fn from_bounds(element_bounds: Vec<f64>) -> Result<Self> {
        if element_bounds.len() < 2 {
            return Err(Error::param("mesh needs at least one element"));
        }
        if !element_bounds.iter().all(|x| x.is_finite()) || element_bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("element bounds must be finite and strictly increasing"));
        }
        let jacobians = element_bounds.windows(2).map(|w| 0.5 * (w[1] - w[0])).collect();
        Ok(Mesh1D {
            domain: (element_bounds[0], element_bounds[element_bounds.len() - 1]),
            element_bounds,
            jacobians,
        })
    }

    pub fn n_el(&self) -> usize {
        self.jacobians.len()
    }

    pub fn length(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    /// Physical coordinates of the reference `nodes` in every element, element by element.
    pub fn node_coordinates(&self, nodes: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(nodes.len() * self.n_el());
        for (k, &jac) in self.jacobians.iter().enumerate() {
            let mid = self.element_bounds[k] + jac;
            x.extend(nodes.iter().map(|z| mid + jac * z));
        }
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FluxKind {
    #[default]
    Upwind,
    Centered,
    Alternating,
}

/// Interface value `u*` from the traces on the left (`u_l`) and right (`u_r`)
/// of an interface. Scalar transport has a single variable, so `Alternating`
/// takes the left trace.
pub fn numerical_flux(u_l: f64, u_r: f64, kind: FluxKind, speed: f64) -> f64 {
    match kind {
        FluxKind::Upwind => {
            if speed >= 0.0 {
                u_l
            } else {
                u_r
            }
        }
        FluxKind::Centered => 0.5 * (u_l + u_r),
        FluxKind::Alternating => u_l,
    }
}

/// Weak derivative on the reference element:
/// `r = M^{-1} (L_R u*_R - L_L u*_L - S u)`.
#[derive(Clone, Debug)]
pub struct DgDerivative {
    /// `M^{-1} S`.
    pub dmat: DMatrix<f64>,
    pub inv_lift_left: DVector<f64>,
    pub inv_lift_right: DVector<f64>,
    pub trace_left: DVector<f64>,
    pub trace_right: DVector<f64>,
}

impl DgDerivative {
    pub fn new(ops: &ElementOperators) -> Self {
        let (inv_lift_left, inv_lift_right) = ops.inv_mass_lifts();
        DgDerivative {
            dmat: ops.inv_mass_stiffness.clone(),
            inv_lift_left,
            inv_lift_right,
            trace_left: ops.lift_left.clone(),
            trace_right: ops.lift_right.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.dmat.nrows()
    }

    pub fn left_trace(&self, u: &[f64]) -> f64 {
        self.trace_left.iter().zip(u).map(|(a, b)| a * b).sum()
    }

    pub fn right_trace(&self, u: &[f64]) -> f64 {
        self.trace_right.iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// Derivative of one line given its interface values.
    pub fn apply(&self, u: &[f64], star_left: f64, star_right: f64, out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.dmat[(i, j)] * u[j];
            }
            out[i] = self.inv_lift_right[i] * star_right - self.inv_lift_left[i] * star_left - s;
        }
    }

    /// Derivative along the first index of an `N x K` block of lines stored
    /// column by column; `star_left[c]`, `star_right[c]` belong to column `c`.
    pub fn apply_columns(
        &self,
        u: DMatrixView<f64>,
        star_left: &[f64],
        star_right: &[f64],
        mut out: DMatrixViewMut<f64>,
    ) {
        out.gemm(-1.0, &self.dmat, &u, 0.0);
        for (c, mut col) in out.column_iter_mut().enumerate() {
            col.axpy(star_right[c], &self.inv_lift_right, 1.0);
            col.axpy(-star_left[c], &self.inv_lift_left, 1.0);
        }
    }

    /// Derivative along the second index of a `K x N` block (lines are rows).
    pub fn apply_rows(&self, u: DMatrixView<f64>, star_left: &[f64], star_right: &[f64], mut out: DMatrixViewMut<f64>) {
        out.gemm(-1.0, &u, &self.dmat.transpose(), 0.0);
        let n = self.n();
        for j in 0..n {
            let (ll, lr) = (self.inv_lift_left[j], self.inv_lift_right[j]);
            let mut col = out.column_mut(j);
            for (r, v) in col.iter_mut().enumerate() {
                *v += lr * star_right[r] - ll * star_left[r];
            }
        }
    }
}

/// Semidiscrete periodic transport operator acting on the stacked element
/// coefficients.
#[derive(Clone, Debug)]
pub struct Transport1D {
    pub deriv: DgDerivative,
    pub mesh: Mesh1D,
    pub speed: f64,
    pub flux: FluxKind,
    mass: DMatrix<f64>,
}

impl Transport1D {
    pub fn new(ops: &ElementOperators, mesh: Mesh1D, speed: f64, flux: FluxKind) -> Result<Self> {
        if !speed.is_finite() {
            return Err(Error::param("wave speed must be finite"));
        }
        Ok(Transport1D {
            deriv: DgDerivative::new(ops),
            mesh,
            speed,
            flux,
            mass: ops.mass.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.deriv.n() * self.mesh.n_el()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interface values; entry `k` sits at the left end of element `k`.
    fn interface_values(&self, u: &[f64]) -> Vec<f64> {
        let n = self.deriv.n();
        let n_el = self.mesh.n_el();
        (0..n_el)
            .map(|k| {
                let prev = (k + n_el - 1) % n_el;
                let u_l = self.deriv.right_trace(&u[prev * n..(prev + 1) * n]);
                let u_r = self.deriv.left_trace(&u[k * n..(k + 1) * n]);
                numerical_flux(u_l, u_r, self.flux, self.speed)
            })
            .collect()
    }

    /// `out = du/dt`.
    pub fn rhs(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        Error::check_len(self.len(), u.len())?;
        Error::check_len(self.len(), out.len())?;
        let n = self.deriv.n();
        let n_el = self.mesh.n_el();
        let stars = self.interface_values(u);
        for k in 0..n_el {
            let o = &mut out[k * n..(k + 1) * n];
            self.deriv.apply(&u[k * n..(k + 1) * n], stars[k], stars[(k + 1) % n_el], o);
            let scale = -self.speed / self.mesh.jacobians[k];
            o.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(())
    }

    /// Dense global operator `A` with `du/dt = A u`.
    pub fn operator_matrix(&self) -> DMatrix<f64> {
        let len = self.len();
        let mut a = DMatrix::zeros(len, len);
        let mut e = vec![0.0; len];
        let mut col = vec![0.0; len];
        for c in 0..len {
            e[c] = 1.0;
            self.rhs(&e, &mut col).expect("sizes match");
            a.column_mut(c).copy_from_slice(&col);
            e[c] = 0.0;
        }
        a
    }

    /// `sum_k J_k u_k^T M u_k`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let n = self.deriv.n();
        self.mesh
            .jacobians
            .iter()
            .enumerate()
            .map(|(k, jac)| {
                let v = DVector::from_column_slice(&u[k * n..(k + 1) * n]);
                jac * v.dot(&(&self.mass * &v))
            })
            .sum()
    }

    /// `int u dx` of the discrete solution, given the coefficients of the
    /// constant 1 in this basis.
    pub fn integral(&self, u: &[f64], one: &[f64]) -> f64 {
        let n = self.deriv.n();
        let w = &self.mass * DVector::from_column_slice(one);
        self.mesh
            .jacobians
            .iter()
            .enumerate()
            .map(|(k, jac)| jac * w.iter().zip(&u[k * n..(k + 1) * n]).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }
}

/// Root of the trapezoid-rule integral of `(numeric - exact)^2`, applied
/// element by element to consecutive blocks of `element_len` nodes.
pub fn l2_error(numeric: &[f64], exact: &[f64], x: &[f64], element_len: usize) -> Result<f64> {
    Error::check_len(numeric.len(), exact.len())?;
    Error::check_len(numeric.len(), x.len())?;
    if element_len < 2 || x.len() % element_len != 0 {
        return Err(Error::param("element blocks need at least two nodes and must tile the input"));
    }
    let mut total = 0.0;
    for start in (0..x.len()).step_by(element_len) {
        for i in start..start + element_len - 1 {
            let d0 = numeric[i] - exact[i];
            let d1 = numeric[i + 1] - exact[i + 1];
            total += 0.5 * (x[i + 1] - x[i]) * (d0 * d0 + d1 * d1);
        }
    }
    Ok(total.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    /// `sin(k pi x)`.
    Sine { k: f64 },
    /// `exp(-a x^2)`.
    Gaussian { a: f64 },
}

impl InitialData {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialData::Sine { k } => (k * std::f64::consts::PI * x).sin(),
            InitialData::Gaussian { a } => (-a * x * x).exp(),
        }
    }
}

fn default_domain() -> [f64; 2] {
    [-1.0, 1.0]
}
fn default_speed() -> f64 {
    1.0
}
fn default_cfl() -> f64 {
    0.2
}
pub(crate) fn default_taylor_order() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transport1dConfig {
    pub basis: BasisSpec,
    pub n_el: usize,
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default)]
    pub flux: FluxKind,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_final: f64,
    pub initial: InitialData,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_taylor_order")]
    pub taylor_order: usize,
    /// Time between error records; only the endpoints when absent.
    #[serde(default)]
    pub record_every: Option<f64>,
}

impl Transport1dConfig {
    pub fn new(basis: BasisSpec, n_el: usize, t_final: f64, initial: InitialData) -> Self {
        Transport1dConfig {
            basis,
            n_el,
            domain: default_domain(),
            speed: default_speed(),
            flux: FluxKind::Upwind,
            cfl: default_cfl(),
            t_final,
            initial,
            integrator: Integrator::Taylor,
            taylor_order: default_taylor_order(),
            record_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_el == 0 {
            return Err(Error::param("n_el must be positive"));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::param("t_final must be a non-negative number"));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::param("cfl must be positive"));
        }
        if self.speed == 0.0 || !self.speed.is_finite() {
            return Err(Error::param("speed must be finite and non-zero"));
        }
        if let Some(r) = self.record_every {
            if !(r > 0.0) {
                return Err(Error::param("record_every must be positive"));
            }
        }
        if self.domain[1] <= self.domain[0] {
            return Err(Error::param("domain must be an increasing interval"));
        }
        Ok(())
    }
}

/// Fixed step count for `t_final` with `dt <= cfl * gap / speed`.
pub(crate) fn step_plan(t_final: f64, dt_max: f64) -> (usize, f64) {
    if t_final == 0.0 {
        return (0, 0.0);
    }
    let steps = (t_final / dt_max - 1e-9).ceil().max(1.0) as usize;
    (steps, t_final / steps as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportRun {
    pub coeffs: Vec<f64>,
    /// `(t, L2 error)` rows.
    pub history: Vec<(f64, f64)>,
    pub steps: usize,
    pub dt: f64,
}

impl TransportRun {
    pub fn final_error(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.1)
    }
}

fn wrap(x: f64, a: f64, len: f64) -> f64 {
    if (a..=a + len).contains(&x) {
        return x;
    }
    a + (x - a).rem_euclid(len)
}

pub fn solve_transport_1d(cfg: &Transport1dConfig, disc: &Discretization) -> Result<TransportRun> {
    cfg.validate()?;
    if disc.spec != cfg.basis {
        return Err(Error::Config(format!(
            "discretization {} does not match configured basis {}",
            disc.spec.label(),
            cfg.basis.label()
        )));
    }
    let mesh = Mesh1D::uniform(cfg.domain[0], cfg.domain[1], cfg.n_el)?;
    let op = Transport1D::new(&disc.ops, mesh.clone(), cfg.speed, cfg.flux)?;
    let n = disc.n_dofs();
    let x = mesh.node_coordinates(&disc.nodes);
    let (a, len) = (cfg.domain[0], mesh.length());

    let mut u = Vec::with_capacity(op.len());
    for k in 0..mesh.n_el() {
        let (mid, jac) = (mesh.element_bounds[k] + mesh.jacobians[k], mesh.jacobians[k]);
        u.extend(disc.project(|z| cfg.initial.eval(mid + jac * z))?);
    }

    let error_at = |u: &[f64], t: f64| -> Result<f64> {
        let mut numeric = Vec::with_capacity(x.len());
        for k in 0..mesh.n_el() {
            numeric.extend(disc.to_nodal(&u[k * n..(k + 1) * n])?);
        }
        let exact: Vec<f64> = x.iter().map(|&xi| cfg.initial.eval(wrap(xi - cfg.speed * t, a, len))).collect();
        l2_error(&numeric, &exact, &x, disc.nodes.len())
    };

    let gap = disc.node_gap() * mesh.jacobians.iter().cloned().fold(f64::INFINITY, f64::min);
    let (steps, dt) = step_plan(cfg.t_final, cfg.cfl * gap / cfg.speed.abs());
    let stride = cfg.record_every.map(|r| ((r / dt).round() as usize).max(1));

    let mut history = vec![(0.0, error_at(&u, 0.0)?)];
    let mut taylor = match cfg.integrator {
        Integrator::Taylor if steps > 0 => Some(TaylorStepper::new(
            TaylorScheme {
                order: cfg.taylor_order,
                dt,
            },
            u.len(),
        )?),
        _ => None,
    };
    let mut rk4 = Rk4Stepper::new(u.len());
    for s in 1..=steps {
        let t0 = (s - 1) as f64 * dt;
        match taylor.as_mut() {
            Some(stepper) => stepper.step(&mut u, t0, |v, w| op.rhs(v, w).expect("sizes match"))?,
            None => rk4.step(&mut u, t0, dt, |_, v, w| op.rhs(v, w).expect("sizes match"))?,
        }
        let on_record = stride.is_some_and(|st| s % st == 0);
        if on_record || s == steps {
            let t = if s == steps { cfg.t_final } else { s as f64 * dt };
            history.push((t, error_at(&u, t)?));
        }
    }
    Ok(TransportRun {
        coeffs: u,
        history,
        steps,
        dt,
    })
}
