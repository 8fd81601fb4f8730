//! Modal Legendre basis on Legendre-Gauss-Lobatto nodes, the polynomial
//! baseline the FC basis is compared against.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::{BasisId, ElementOperators};

/// `P_0(z) .. P_q(z)` by the three-term recurrence.
pub fn legendre_values(q: usize, z: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(q + 1);
    p.push(1.0);
    if q >= 1 {
        p.push(z);
    }
    for k in 1..q {
        let kf = k as f64;
        p.push(((2.0 * kf + 1.0) * z * p[k] - kf * p[k - 1]) / (kf + 1.0));
    }
    p
}

/// `(P_q(z), P_q'(z))`.
fn legendre_with_derivative(q: usize, z: f64) -> (f64, f64) {
    let p = legendre_values(q, z);
    let pq = p[q];
    if q == 0 {
        return (pq, 0.0);
    }
    let dp = if (1.0 - z * z).abs() < 1e-300 {
        // P_q'(+-1) = (+-1)^{q+1} q(q+1)/2
        let v = (q * (q + 1)) as f64 / 2.0;
        if z > 0.0 || q % 2 == 1 {
            v
        } else {
            -v
        }
    } else {
        q as f64 * (p[q - 1] - z * pq) / (1.0 - z * z)
    };
    (pq, dp)
}

/// Legendre-Gauss-Lobatto nodes (sorted ascending) and weights for degree `q`.
pub fn lgl_nodes_weights(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q < 1 {
        return Err(Error::param("LGL rule needs degree q >= 1"));
    }
    let qf = q as f64;
    let mut nodes = vec![-1.0; q + 1];
    nodes[q] = 1.0;
    // Interior nodes are the roots of P_q'. Newton uses
    // (1 - z^2) P_q'' = 2 z P_q' - q (q+1) P_q.
    for j in 1..q {
        let mut z = -(std::f64::consts::PI * j as f64 / qf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(q, z);
            let ddp = (2.0 * z * dp - qf * (qf + 1.0) * p) / (1.0 - z * z);
            let step = dp / ddp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[j] = z;
    }
    // Enforce exact symmetry.
    for j in 0..=q / 2 {
        let s = 0.5 * (nodes[q - j] - nodes[j]);
        nodes[j] = -s;
        nodes[q - j] = s;
    }
    if q % 2 == 0 {
        nodes[q / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&z| {
            let p = legendre_values(q, z)[q];
            2.0 / (qf * (qf + 1.0) * p * p)
        })
        .collect();
    Ok((nodes, weights))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LegendreBasis {
    pub degree: usize,
    pub lgl_nodes: Vec<f64>,
    pub lgl_weights: Vec<f64>,
}

impl LegendreBasis {
    pub fn new(degree: usize) -> Result<Self> {
        let (lgl_nodes, lgl_weights) = lgl_nodes_weights(degree)?;
        Ok(LegendreBasis {
            degree,
            lgl_nodes,
            lgl_weights,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.degree + 1
    }

    /// Entry `(m, j)` is `P_j(points[m])`.
    pub fn evaluate(&self, points: &[f64]) -> DMatrix<f64> {
        let rows: Vec<Vec<f64>> = points.iter().map(|&z| legendre_values(self.degree, z)).collect();
        DMatrix::from_fn(points.len(), self.n_dofs(), |m, j| rows[m][j])
    }
}

/// Modal operators: `M = diag(2/(2j+1))`, `S_ij = 2` when `i > j` and `i + j`
/// is odd, lifts `P_j(-1) = (-1)^j` and `P_j(1) = 1`.
pub fn legendre_operators(q: usize) -> Result<ElementOperators> {
    if q < 1 {
        return Err(Error::param("Legendre basis needs degree q >= 1"));
    }
    let n = q + 1;
    let mass = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 / (2 * j + 1) as f64 } else { 0.0 });
    let stiffness = DMatrix::from_fn(n, n, |i, j| if i > j && (i + j) % 2 == 1 { 2.0 } else { 0.0 });
    let lift_left = DVector::from_fn(n, |j, _| if j % 2 == 0 { 1.0 } else { -1.0 });
    let lift_right = DVector::from_element(n, 1.0);
    ElementOperators::from_parts(mass, stiffness, lift_left, lift_right, BasisId::legendre(q))
}

/// Element-wise L2 projection onto `P_0 .. P_q`. The integrals use the LGL
/// rule with `q + 2` nodes, exact for the degree-`2q` products that arise
/// when `f` is itself a polynomial of degree `q`.
pub fn l2_project(f: impl Fn(f64) -> f64, q: usize) -> Result<DVector<f64>> {
    let (nodes, weights) = lgl_nodes_weights(q + 1)?;
    let mut out = DVector::zeros(q + 1);
    for (&z, &w) in nodes.iter().zip(&weights) {
        let fz = f(z);
        for (j, p) in legendre_values(q, z).into_iter().enumerate() {
            out[j] += w * fz * p;
        }
    }
    for j in 0..=q {
        out[j] *= (2 * j + 1) as f64 / 2.0;
    }
    Ok(out)
}

/// `sum_j coeffs[j] P_j(z)`.
pub fn evaluate_expansion(coeffs: &[f64], z: f64) -> f64 {
    let q = coeffs.len().saturating_sub(1);
    legendre_values(q, z).iter().zip(coeffs).map(|(p, c)| p * c).sum()
}
