//! Basis selection shared by the solvers: element operators plus the maps
//! between functions, basis coefficients and reported nodal values.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fc_basis::{uniform_grid, FcParams};
use crate::legendre::{legendre_operators, legendre_values, lgl_nodes_weights, LegendreBasis};
use crate::operators::{fc_operators_cached, ElementOperators, QuadConfig};

fn default_poly_points() -> usize {
    10
}

fn default_ext_points() -> usize {
    25
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BasisSpec {
    Fc {
        n: usize,
        #[serde(default = "default_poly_points")]
        p: usize,
        #[serde(default = "default_ext_points")]
        m: usize,
    },
    Legendre {
        q: usize,
    },
}

impl BasisSpec {
    pub fn fc(n: usize) -> Self {
        BasisSpec::Fc {
            n,
            p: default_poly_points(),
            m: default_ext_points(),
        }
    }

    pub fn n_dofs(&self) -> usize {
        match *self {
            BasisSpec::Fc { n, .. } => n,
            BasisSpec::Legendre { q } => q + 1,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            BasisSpec::Fc { n, p, m } => format!("fc N={n} p={p} M={m}"),
            BasisSpec::Legendre { q } => format!("legendre q={q}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Discretization {
    pub spec: BasisSpec,
    pub ops: ElementOperators,
    /// Reference nodes at which nodal values are reported.
    pub nodes: Vec<f64>,
    /// Coefficients to nodal values; `None` when the basis is nodal.
    vandermonde: Option<DMatrix<f64>>,
}

impl Discretization {
    pub fn new(spec: BasisSpec, quad: &QuadConfig, cache_dir: Option<&Path>) -> Result<Self> {
        match spec {
            BasisSpec::Fc { n, p, m } => {
                let params = FcParams::new(n, p, m)?;
                Ok(Discretization {
                    spec,
                    ops: fc_operators_cached(&params, quad, cache_dir)?,
                    nodes: uniform_grid(&params)?,
                    vandermonde: None,
                })
            }
            BasisSpec::Legendre { q } => {
                let basis = LegendreBasis::new(q)?;
                Ok(Discretization {
                    spec,
                    ops: legendre_operators(q)?,
                    vandermonde: Some(basis.evaluate(&basis.lgl_nodes)),
                    nodes: basis.lgl_nodes,
                })
            }
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.ops.n_dofs()
    }

    /// Mean gap between reference nodes.
    pub fn node_gap(&self) -> f64 {
        2.0 / (self.nodes.len() - 1) as f64
    }

    /// Coefficients of `f` on the reference element: nodal samples for FC,
    /// L2 projection for Legendre.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        match self.spec {
            BasisSpec::Fc { .. } => Ok(self.nodes.iter().map(|&z| f(z)).collect()),
            BasisSpec::Legendre { q } => Ok(crate::legendre::l2_project(f, q)?.as_slice().to_vec()),
        }
    }

    /// Tensor-product version of [`Self::project`]; entry `i + N j` belongs to
    /// `phi_i(x) phi_j(y)`.
    pub fn project_2d(&self, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        let n = self.n_dofs();
        match self.spec {
            BasisSpec::Fc { .. } => {
                let mut out = vec![0.0; n * n];
                for (j, &y) in self.nodes.iter().enumerate() {
                    for (i, &x) in self.nodes.iter().enumerate() {
                        out[i + n * j] = f(x, y);
                    }
                }
                Ok(out)
            }
            BasisSpec::Legendre { q } => {
                let (z, w) = lgl_nodes_weights(q + 1)?;
                let p: Vec<Vec<f64>> = z.iter().map(|&s| legendre_values(q, s)).collect();
                let mut out = vec![0.0; n * n];
                for (b, (&y, &wy)) in z.iter().zip(&w).enumerate() {
                    for (a, (&x, &wx)) in z.iter().zip(&w).enumerate() {
                        let fw = f(x, y) * wx * wy;
                        for j in 0..n {
                            for i in 0..n {
                                out[i + n * j] += fw * p[a][i] * p[b][j];
                            }
                        }
                    }
                }
                for j in 0..n {
                    for i in 0..n {
                        out[i + n * j] *= (2 * i + 1) as f64 * (2 * j + 1) as f64 / 4.0;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Nodal values at [`Self::nodes`] of one element's coefficients.
    pub fn to_nodal(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.n_dofs(), coeffs.len())?;
        Ok(match &self.vandermonde {
            None => coeffs.to_vec(),
            Some(v) => (v * DVector::from_column_slice(coeffs)).as_slice().to_vec(),
        })
    }

    /// Nodal values on the tensor grid, same layout as [`Self::project_2d`].
    pub fn to_nodal_2d(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_dofs();
        Error::check_len(n * n, coeffs.len())?;
        Ok(match &self.vandermonde {
            None => coeffs.to_vec(),
            Some(v) => {
                let c = DMatrix::from_column_slice(n, n, coeffs);
                (v * c * v.transpose()).as_slice().to_vec()
            }
        })
    }
}
