//! Line-based DG on tensor-product quadrilateral meshes: derivatives are
//! recovered one coordinate line at a time with the 1-D DG derivative.
//!
//! A field stores `N x N` values per element, elements ordered
//! `e = ex + n_el_x * ey` and local entries `i + N j` with `i` along x.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use serde::{Deserialize, Serialize};

use crate::dg1d::{default_taylor_order, numerical_flux, step_plan, DgDerivative, FluxKind, Mesh1D};
use crate::discretization::{BasisSpec, Discretization};
use crate::error::{Error, Result};
use crate::operators::ElementOperators;
use crate::time_integration::{Integrator, Rk4Stepper, TaylorScheme, TaylorStepper};

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh2D {
    pub x: Mesh1D,
    pub y: Mesh1D,
}

impl Mesh2D {
    /// Uniform mesh of `[x0, x1] x [y0, y1]`.
    pub fn uniform(domain: [f64; 4], n_el_x: usize, n_el_y: usize) -> Result<Self> {
        Ok(Mesh2D {
            x: Mesh1D::uniform(domain[0], domain[1], n_el_x)?,
            y: Mesh1D::uniform(domain[2], domain[3], n_el_y)?,
        })
    }

    pub fn n_el(&self) -> usize {
        self.x.n_el() * self.y.n_el()
    }

    pub fn element(&self, e: usize) -> (usize, usize) {
        (e % self.x.n_el(), e / self.x.n_el())
    }

    /// Physical `(x, y)` of every node, in field layout.
    pub fn node_coordinates(&self, nodes: &[f64]) -> Vec<(f64, f64)> {
        let n = nodes.len();
        let xs = self.x.node_coordinates(nodes);
        let ys = self.y.node_coordinates(nodes);
        let mut out = Vec::with_capacity(self.n_el() * n * n);
        for e in 0..self.n_el() {
            let (ex, ey) = self.element(e);
            for j in 0..n {
                for i in 0..n {
                    out.push((xs[ex * n + i], ys[ey * n + j]));
                }
            }
        }
        out
    }
}

/// Exterior treatment in one direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineBoundary {
    Periodic,
    /// Ghost traces mirror the interior trace with a per-variable sign.
    Walls,
}

/// Interface value from the traces left and right of an interface; `wall`
/// marks exterior interfaces where the right-hand (or left-hand) value is a
/// mirrored ghost.
pub trait InterfaceRule: Fn(f64, f64, bool) -> f64 {}
impl<T: Fn(f64, f64, bool) -> f64> InterfaceRule for T {}

/// Line derivatives on a 2-D mesh with one boundary treatment per direction.
#[derive(Clone, Debug)]
pub struct LineDg {
    pub deriv: DgDerivative,
    pub mesh: Mesh2D,
    pub boundary_x: LineBoundary,
    pub boundary_y: LineBoundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    X,
    Y,
}

impl LineDg {
    pub fn new(ops: &ElementOperators, mesh: Mesh2D, boundary_x: LineBoundary, boundary_y: LineBoundary) -> Self {
        LineDg {
            deriv: DgDerivative::new(ops),
            mesh,
            boundary_x,
            boundary_y,
        }
    }

    pub fn n(&self) -> usize {
        self.deriv.n()
    }

    pub fn len(&self) -> usize {
        self.n() * self.n() * self.mesh.n_el()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn block<'a>(&self, u: &'a [f64], e: usize) -> DMatrixView<'a, f64> {
        let nn = self.n() * self.n();
        DMatrixView::from_slice(&u[e * nn..(e + 1) * nn], self.n(), self.n())
    }

    /// Left and right traces of every line along `axis`, indexed `e * N + line`.
    fn traces(&self, u: &[f64], axis: Axis) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut left = vec![0.0; self.mesh.n_el() * n];
        let mut right = vec![0.0; self.mesh.n_el() * n];
        for e in 0..self.mesh.n_el() {
            let b = self.block(u, e);
            let (l, r) = match axis {
                Axis::X => (b.tr_mul(&self.deriv.trace_left), b.tr_mul(&self.deriv.trace_right)),
                Axis::Y => (b * &self.deriv.trace_left, b * &self.deriv.trace_right),
            };
            left[e * n..(e + 1) * n].copy_from_slice(l.as_slice());
            right[e * n..(e + 1) * n].copy_from_slice(r.as_slice());
        }
        (left, right)
    }

    fn neighbours(&self, e: usize, axis: Axis) -> (Option<usize>, Option<usize>) {
        let (ex, ey) = self.mesh.element(e);
        let (nx, ny) = (self.mesh.x.n_el(), self.mesh.y.n_el());
        let (pos, count, bnd) = match axis {
            Axis::X => (ex, nx, self.boundary_x),
            Axis::Y => (ey, ny, self.boundary_y),
        };
        let at = |p: usize| match axis {
            Axis::X => p + nx * ey,
            Axis::Y => ex + nx * p,
        };
        let periodic = bnd == LineBoundary::Periodic;
        let prev = if pos > 0 {
            Some(at(pos - 1))
        } else if periodic {
            Some(at(count - 1))
        } else {
            None
        };
        let next = if pos + 1 < count {
            Some(at(pos + 1))
        } else if periodic {
            Some(at(0))
        } else {
            None
        };
        (prev, next)
    }

    /// Interface values at both ends of every line along `axis`.
    fn interface_values(&self, u: &[f64], axis: Axis, ghost_sign: f64, rule: &impl InterfaceRule) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let (tl, tr) = self.traces(u, axis);
        let mut star_l = vec![0.0; tl.len()];
        let mut star_r = vec![0.0; tl.len()];
        for e in 0..self.mesh.n_el() {
            let (prev, next) = self.neighbours(e, axis);
            for line in 0..n {
                let k = e * n + line;
                star_l[k] = match prev {
                    Some(p) => rule(tr[p * n + line], tl[k], false),
                    None => rule(ghost_sign * tl[k], tl[k], true),
                };
                star_r[k] = match next {
                    Some(q) => rule(tr[k], tl[q * n + line], false),
                    None => rule(tr[k], ghost_sign * tr[k], true),
                };
            }
        }
        (star_l, star_r)
    }

    fn derivative(&self, u: &[f64], axis: Axis, ghost_sign: f64, rule: &impl InterfaceRule, out: &mut [f64]) {
        let n = self.n();
        let nn = n * n;
        let (star_l, star_r) = self.interface_values(u, axis, ghost_sign, rule);
        for e in 0..self.mesh.n_el() {
            let (ex, ey) = self.mesh.element(e);
            let ub = self.block(u, e);
            let sl = &star_l[e * n..(e + 1) * n];
            let sr = &star_r[e * n..(e + 1) * n];
            let ob = DMatrixViewMut::from_slice(&mut out[e * nn..(e + 1) * nn], n, n);
            let jac = match axis {
                Axis::X => {
                    self.deriv.apply_columns(ub, sl, sr, ob);
                    self.mesh.x.jacobians[ex]
                }
                Axis::Y => {
                    self.deriv.apply_rows(ub, sl, sr, ob);
                    self.mesh.y.jacobians[ey]
                }
            };
            out[e * nn..(e + 1) * nn].iter_mut().for_each(|v| *v /= jac);
        }
    }

    /// Physical `d/dx` of `u`. At walls the ghost trace is `ghost_sign` times
    /// the interior one.
    pub fn derivative_x(&self, u: &[f64], ghost_sign: f64, rule: impl InterfaceRule, out: &mut [f64]) -> Result<()> {
        Error::check_len(self.len(), u.len())?;
        Error::check_len(self.len(), out.len())?;
        self.derivative(u, Axis::X, ghost_sign, &rule, out);
        Ok(())
    }

    /// Physical `d/dy` of `u`.
    pub fn derivative_y(&self, u: &[f64], ghost_sign: f64, rule: impl InterfaceRule, out: &mut [f64]) -> Result<()> {
        Error::check_len(self.len(), u.len())?;
        Error::check_len(self.len(), out.len())?;
        self.derivative(u, Axis::Y, ghost_sign, &rule, out);
        Ok(())
    }

    /// Tensor trapezoid weights of every node, in field layout.
    pub fn trapezoid_weights(&self, nodes: &[f64]) -> Vec<f64> {
        let n = nodes.len();
        let wz = trapezoid_weights(nodes);
        let mut out = Vec::with_capacity(self.len());
        for e in 0..self.mesh.n_el() {
            let (ex, ey) = self.mesh.element(e);
            let (jx, jy) = (self.mesh.x.jacobians[ex], self.mesh.y.jacobians[ey]);
            for j in 0..n {
                for i in 0..n {
                    out.push(jx * jy * wz[i] * wz[j]);
                }
            }
        }
        out
    }

    /// `sum_e J_x J_y u_e^T (M x M) u_e`.
    pub fn mass_norm_sq(&self, u: &[f64], mass: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        for e in 0..self.mesh.n_el() {
            let (ex, ey) = self.mesh.element(e);
            let b = self.block(u, e);
            let mu = mass * b * mass;
            total += self.mesh.x.jacobians[ex] * self.mesh.y.jacobians[ey] * b.dot(&mu);
        }
        total
    }
}

/// Trapezoid weights for a sorted node set.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; x.len()];
    for i in 0..x.len().saturating_sub(1) {
        let half = 0.5 * (x[i + 1] - x[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    w
}

/// Root of the weighted sum of squared differences.
pub fn weighted_l2(numeric: &[f64], exact: &[f64], weights: &[f64]) -> Result<f64> {
    Error::check_len(numeric.len(), exact.len())?;
    Error::check_len(numeric.len(), weights.len())?;
    Ok(numeric
        .iter()
        .zip(exact)
        .zip(weights)
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Periodic 2-D transport `u_t + alpha u_x + beta u_y = 0`.
#[derive(Clone, Debug)]
pub struct Transport2D {
    pub line: LineDg,
    pub alpha: f64,
    pub beta: f64,
    pub flux: FluxKind,
}

impl Transport2D {
    pub fn new(ops: &ElementOperators, mesh: Mesh2D, alpha: f64, beta: f64, flux: FluxKind) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::param("wave speeds must be finite"));
        }
        Ok(Transport2D {
            line: LineDg::new(ops, mesh, LineBoundary::Periodic, LineBoundary::Periodic),
            alpha,
            beta,
            flux,
        })
    }

    pub fn len(&self) -> usize {
        self.line.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rhs(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        Error::check_len(self.len(), out.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut d = vec![0.0; self.len()];
        for (speed, axis) in [(self.alpha, Axis::X), (self.beta, Axis::Y)] {
            if speed == 0.0 {
                continue;
            }
            let rule = |a: f64, b: f64, _: bool| numerical_flux(a, b, self.flux, speed);
            match axis {
                Axis::X => self.line.derivative_x(u, 1.0, rule, &mut d)?,
                Axis::Y => self.line.derivative_y(u, 1.0, rule, &mut d)?,
            }
            out.iter_mut().zip(&d).for_each(|(o, v)| *o -= speed * v);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData2D {
    /// `sin(k pi x) + sin(k pi y)`.
    SineSum { k: f64 },
    /// `exp(-a ((x - x0)^2 + (y - y0)^2))`.
    Gaussian { a: f64, x0: f64, y0: f64 },
}

impl InitialData2D {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            InitialData2D::SineSum { k } => {
                let w = k * std::f64::consts::PI;
                (w * x).sin() + (w * y).sin()
            }
            InitialData2D::Gaussian { a, x0, y0 } => (-a * ((x - x0).powi(2) + (y - y0).powi(2))).exp(),
        }
    }
}

fn default_domain() -> [f64; 4] {
    [0.0, 1.0, 0.0, 1.0]
}
fn unit() -> f64 {
    1.0
}
fn default_cfl() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transport2dConfig {
    pub basis: BasisSpec,
    pub n_el_x: usize,
    pub n_el_y: usize,
    /// `[x0, x1, y0, y1]`.
    #[serde(default = "default_domain")]
    pub domain: [f64; 4],
    #[serde(default = "unit")]
    pub alpha: f64,
    #[serde(default = "unit")]
    pub beta: f64,
    #[serde(default)]
    pub flux: FluxKind,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_final: f64,
    pub initial: InitialData2D,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_taylor_order")]
    pub taylor_order: usize,
}

impl Transport2dConfig {
    pub fn new(basis: BasisSpec, n_el: usize, t_final: f64, initial: InitialData2D) -> Self {
        Transport2dConfig {
            basis,
            n_el_x: n_el,
            n_el_y: n_el,
            domain: default_domain(),
            alpha: 1.0,
            beta: 1.0,
            flux: FluxKind::Upwind,
            cfl: default_cfl(),
            t_final,
            initial,
            integrator: Integrator::Taylor,
            taylor_order: default_taylor_order(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_el_x == 0 || self.n_el_y == 0 {
            return Err(Error::param("element counts must be positive"));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::param("t_final must be a non-negative number"));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::param("cfl must be positive"));
        }
        if !(self.alpha.abs() + self.beta.abs() > 0.0) {
            return Err(Error::param("at least one wave speed must be non-zero"));
        }
        if self.domain[1] <= self.domain[0] || self.domain[3] <= self.domain[2] {
            return Err(Error::param("domain must be a non-empty rectangle"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transport2dRun {
    pub coeffs: Vec<f64>,
    pub l2_error: f64,
    pub steps: usize,
    pub dt: f64,
}

/// Coefficients of `f` on every element of `mesh`.
pub fn project_field(disc: &Discretization, mesh: &Mesh2D, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let mut u = Vec::with_capacity(mesh.n_el() * disc.n_dofs().pow(2));
    for e in 0..mesh.n_el() {
        let (ex, ey) = mesh.element(e);
        let (jx, jy) = (mesh.x.jacobians[ex], mesh.y.jacobians[ey]);
        let (mx, my) = (mesh.x.element_bounds[ex] + jx, mesh.y.element_bounds[ey] + jy);
        u.extend(disc.project_2d(|zx, zy| f(mx + jx * zx, my + jy * zy))?);
    }
    Ok(u)
}

/// Nodal values of a whole field.
pub fn nodal_field(disc: &Discretization, u: &[f64]) -> Result<Vec<f64>> {
    let nn = disc.n_dofs().pow(2);
    let mut out = Vec::with_capacity(u.len());
    for chunk in u.chunks(nn) {
        out.extend(disc.to_nodal_2d(chunk)?);
    }
    Ok(out)
}

fn wrap(v: f64, a: f64, len: f64) -> f64 {
    if (a..=a + len).contains(&v) {
        v
    } else {
        a + (v - a).rem_euclid(len)
    }
}

pub fn solve_transport_2d(cfg: &Transport2dConfig, disc: &Discretization) -> Result<Transport2dRun> {
    cfg.validate()?;
    if disc.spec != cfg.basis {
        return Err(Error::Config(format!(
            "discretization {} does not match configured basis {}",
            disc.spec.label(),
            cfg.basis.label()
        )));
    }
    let mesh = Mesh2D::uniform(cfg.domain, cfg.n_el_x, cfg.n_el_y)?;
    let op = Transport2D::new(&disc.ops, mesh.clone(), cfg.alpha, cfg.beta, cfg.flux)?;
    let mut u = project_field(disc, &mesh, |x, y| cfg.initial.eval(x, y))?;

    let jmin = mesh.x.jacobians.iter().chain(&mesh.y.jacobians).cloned().fold(f64::INFINITY, f64::min);
    let gap = disc.node_gap() * jmin;
    let (steps, dt) = step_plan(cfg.t_final, cfg.cfl * gap / (cfg.alpha.abs() + cfg.beta.abs()));
    match cfg.integrator {
        Integrator::Taylor if steps > 0 => {
            let scheme = TaylorScheme {
                order: cfg.taylor_order,
                dt,
            };
            let mut stepper = TaylorStepper::new(scheme, u.len())?;
            for s in 0..steps {
                stepper.step(&mut u, s as f64 * dt, |v, w| op.rhs(v, w).expect("sizes match"))?;
            }
        }
        _ => {
            let mut stepper = Rk4Stepper::new(u.len());
            for s in 0..steps {
                stepper.step(&mut u, s as f64 * dt, dt, |_, v, w| op.rhs(v, w).expect("sizes match"))?;
            }
        }
    }

    let (lx, ly) = (cfg.domain[1] - cfg.domain[0], cfg.domain[3] - cfg.domain[2]);
    let t = cfg.t_final;
    let exact: Vec<f64> = mesh
        .node_coordinates(&disc.nodes)
        .into_iter()
        .map(|(x, y)| {
            cfg.initial
                .eval(wrap(x - cfg.alpha * t, cfg.domain[0], lx), wrap(y - cfg.beta * t, cfg.domain[2], ly))
        })
        .collect();
    let weights = op.line.trapezoid_weights(&disc.nodes);
    let l2_error = weighted_l2(&nodal_field(disc, &u)?, &exact, &weights)?;
    Ok(Transport2dRun {
        coeffs: u,
        l2_error,
        steps,
        dt,
    })
}

/// Line-local derivative of a single line with explicit interface values,
/// on the reference element.
pub fn line_derivative(deriv: &DgDerivative, u_line: &[f64], star_left: f64, star_right: f64) -> Result<Vec<f64>> {
    Error::check_len(deriv.n(), u_line.len())?;
    let mut out = vec![0.0; u_line.len()];
    deriv.apply(u_line, star_left, star_right, &mut out);
    Ok(out)
}
