//! Reference-element operators on `[-1, 1]` and their on-disk cache.
//!
//! For a basis `phi_0 .. phi_{N-1}` the mass matrix is `M_ij = int phi_i phi_j`,
//! the stiffness matrix `S_ij = int phi_i' phi_j`, and the lifts hold the
//! basis values at `z = -1` and `z = 1`. Integration by parts gives
//! `S + S^T = L_R L_R^T - L_L L_L^T`, which is checked after assembly and on
//! every cache load.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fc_basis::{build_basis, differentiate_basis, evaluate_basis, FcParams};
use crate::quadrature::{correction_width, gregory_weights};

const MAGIC: &[u8; 4] = b"FCDG";
const VERSION: u32 = 1;

/// Environment variable naming the operator cache directory.
pub const CACHE_ENV: &str = "FCDG_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    #[default]
    Fc,
    Legendre,
}

impl BasisKind {
    fn code(self) -> u8 {
        match self {
            BasisKind::Fc => 0,
            BasisKind::Legendre => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BasisKind::Fc),
            1 => Some(BasisKind::Legendre),
            _ => None,
        }
    }
}

/// Identifies the basis an operator set was built for. Legendre sets leave
/// `poly_points`, `ext_points` and `quad_order` at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisId {
    pub kind: BasisKind,
    pub n_dofs: u32,
    pub poly_points: u32,
    pub ext_points: u32,
    pub quad_order: u32,
}

impl BasisId {
    pub fn fc(params: &FcParams, quad: &QuadConfig) -> Self {
        BasisId {
            kind: BasisKind::Fc,
            n_dofs: params.n_points as u32,
            poly_points: params.poly_points as u32,
            ext_points: params.ext_points as u32,
            quad_order: quad.order as u32,
        }
    }

    pub fn legendre(degree: usize) -> Self {
        BasisId {
            kind: BasisKind::Legendre,
            n_dofs: degree as u32 + 1,
            poly_points: 0,
            ext_points: 0,
            quad_order: 0,
        }
    }

    /// Cache file name, unique per identifier.
    pub fn file_name(&self) -> String {
        match self.kind {
            BasisKind::Fc => format!(
                "fc_n{}_p{}_m{}_q{}.ops",
                self.n_dofs, self.poly_points, self.ext_points, self.quad_order
            ),
            BasisKind::Legendre => format!("legendre_n{}.ops", self.n_dofs),
        }
    }
}

/// Oversampled Gregory quadrature used for FC assembly: the element grid is
/// refined `refine` times and integrated with a rule of order `order`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    pub refine: usize,
    pub order: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { refine: 32, order: 16 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementOperators {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub lift_left: DVector<f64>,
    pub lift_right: DVector<f64>,
    /// `M^{-1} S`.
    pub inv_mass_stiffness: DMatrix<f64>,
    pub basis_id: BasisId,
}

impl ElementOperators {
    /// Builds the operator set from its integrals and validates it.
    pub fn from_parts(
        mass: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        lift_left: DVector<f64>,
        lift_right: DVector<f64>,
        basis_id: BasisId,
    ) -> Result<Self> {
        let n = mass.nrows();
        for (r, c) in [mass.shape(), stiffness.shape()] {
            Error::check_len(n, r)?;
            Error::check_len(n, c)?;
        }
        Error::check_len(n, lift_left.len())?;
        Error::check_len(n, lift_right.len())?;
        let inv_mass_stiffness = mass
            .clone()
            .lu()
            .solve(&stiffness)
            .ok_or_else(|| Error::Numeric("mass matrix is singular".into()))?;
        let ops = ElementOperators {
            mass,
            stiffness,
            lift_left,
            lift_right,
            inv_mass_stiffness,
            basis_id,
        };
        ops.validate()?;
        Ok(ops)
    }

    pub fn n_dofs(&self) -> usize {
        self.mass.nrows()
    }

    /// Checks symmetry and definiteness of the mass matrix, the
    /// integration-by-parts identity, nodality of FC lifts and the cached
    /// `M^{-1} S`.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_dofs();
        let asym = (&self.mass - self.mass.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::Integrity(format!("mass asymmetry {asym:.3e}")));
        }
        if self.mass.clone().cholesky().is_none() {
            return Err(Error::Integrity("mass matrix is not positive definite".into()));
        }
        let sbp = &self.stiffness + self.stiffness.transpose() - &self.lift_right * self.lift_right.transpose()
            + &self.lift_left * self.lift_left.transpose();
        if sbp.amax() > 1e-9 {
            return Err(Error::Integrity(format!(
                "S + S^T differs from the boundary term by {:.3e}",
                sbp.amax()
            )));
        }
        if self.basis_id.kind == BasisKind::Fc {
            let mut e0 = DVector::zeros(n);
            e0[0] = 1.0;
            let mut e1 = DVector::zeros(n);
            e1[n - 1] = 1.0;
            let dev = (&self.lift_left - e0).amax().max((&self.lift_right - e1).amax());
            if dev > 1e-11 {
                return Err(Error::Integrity(format!("FC lifts deviate from unit vectors by {dev:.3e}")));
            }
        }
        let resid = (&self.mass * &self.inv_mass_stiffness - &self.stiffness).amax();
        if resid > 1e-10 * self.stiffness.amax() {
            return Err(Error::Integrity(format!("cached M^-1 S residual {resid:.3e}")));
        }
        Ok(())
    }

    /// `M^{-1} L_L` and `M^{-1} L_R`.
    pub fn inv_mass_lifts(&self) -> (DVector<f64>, DVector<f64>) {
        let lu = self.mass.clone().lu();
        let left = lu.solve(&self.lift_left).expect("mass validated as definite");
        let right = lu.solve(&self.lift_right).expect("mass validated as definite");
        (left, right)
    }
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Shape {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let sv = m.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo <= hi * f64::EPSILON {
        return Err(Error::Numeric("matrix is numerically singular".into()));
    }
    Ok(hi / lo)
}

pub fn assemble_fc_operators(params: &FcParams, quad: &QuadConfig) -> Result<ElementOperators> {
    params.validate()?;
    if quad.refine < 1 {
        return Err(Error::param("quadrature refinement must be at least 1"));
    }
    let n = params.n_points;
    let n_q = (n - 1) * quad.refine + 1;
    let mut order = quad.order;
    if n_q < 2 * correction_width(order) {
        order = 8;
    }
    let rule = gregory_weights(n_q, order)?;
    let pts: Vec<f64> = (0..n_q).map(|j| -1.0 + 2.0 * j as f64 / (n_q - 1) as f64).collect();

    let basis = build_basis(params)?;
    let phi = evaluate_basis(&basis, &pts);
    let dphi = evaluate_basis(&differentiate_basis(&basis), &pts);
    let weighted = DMatrix::from_fn(n_q, n, |q, j| rule.weights[q] * phi[(q, j)]);
    let mut mass = phi.transpose() * &weighted;
    // Symmetrize the rounding.
    mass = (&mass + mass.transpose()) * 0.5;
    let stiffness = dphi.transpose() * &weighted;

    let ends = evaluate_basis(&basis, &[-1.0, 1.0]);
    let lift_left = ends.row(0).transpose();
    let lift_right = ends.row(1).transpose();
    ElementOperators::from_parts(
        mass,
        stiffness,
        lift_left,
        lift_right,
        BasisId::fc(params, &QuadConfig { refine: quad.refine, order }),
    )
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn push_matrix(buf: &mut Vec<u8>, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            buf.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
}

pub fn store_cache(ops: &ElementOperators, path: &Path) -> Result<()> {
    let id = &ops.basis_id;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(id.kind.code());
    for v in [id.n_dofs, id.poly_points, id.ext_points, id.quad_order] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let start = buf.len();
    push_matrix(&mut buf, &ops.mass);
    push_matrix(&mut buf, &ops.stiffness);
    for v in ops.lift_left.iter().chain(ops.lift_right.iter()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    push_matrix(&mut buf, &ops.inv_mass_stiffness);
    let sum = fnv1a(&buf[start..]);
    buf.extend_from_slice(&sum.to_le_bytes());

    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                reason: "file is truncated".into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, n: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = self.f64()?;
            }
        }
        Ok(m)
    }

    fn vector(&mut self, n: usize) -> Result<DVector<f64>> {
        (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>().map(DVector::from_vec)
    }
}

pub fn load_cache(path: &Path) -> Result<ElementOperators> {
    let bytes = fs::read(path)?;
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    let mut rd = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if rd.take(4)? != MAGIC {
        return Err(bad("bad magic"));
    }
    if rd.u32()? != VERSION {
        return Err(bad("unsupported version"));
    }
    let kind = BasisKind::from_code(rd.take(1)?[0]).ok_or_else(|| bad("unknown basis kind"))?;
    let id = BasisId {
        kind,
        n_dofs: rd.u32()?,
        poly_points: rd.u32()?,
        ext_points: rd.u32()?,
        quad_order: rd.u32()?,
    };
    let n = id.n_dofs as usize;
    if n == 0 {
        return Err(bad("empty operator set"));
    }
    let start = rd.pos;
    let mass = rd.matrix(n)?;
    let stiffness = rd.matrix(n)?;
    let lift_left = rd.vector(n)?;
    let lift_right = rd.vector(n)?;
    let inv_mass_stiffness = rd.matrix(n)?;
    let end = rd.pos;
    let stored = u64::from_le_bytes(rd.take(8)?.try_into().unwrap());
    if rd.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    if fnv1a(&bytes[start..end]) != stored {
        return Err(bad("checksum mismatch"));
    }
    let ops = ElementOperators {
        mass,
        stiffness,
        lift_left,
        lift_right,
        inv_mass_stiffness,
        basis_id: id,
    };
    ops.validate()?;
    Ok(ops)
}

/// Loads a cached operator set and checks that it was built for `expected`.
pub fn load_cache_for(path: &Path, expected: &BasisId) -> Result<ElementOperators> {
    let ops = load_cache(path)?;
    if &ops.basis_id != expected {
        return Err(Error::Integrity(format!(
            "cache {} holds {:?}, requested {:?}",
            path.display(),
            ops.basis_id,
            expected
        )));
    }
    Ok(ops)
}

/// Cache directory from the environment, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// FC operators, reusing (or filling) the cache in `cache_dir` when given.
pub fn fc_operators_cached(params: &FcParams, quad: &QuadConfig, cache_dir: Option<&Path>) -> Result<ElementOperators> {
    let Some(dir) = cache_dir else {
        return assemble_fc_operators(params, quad);
    };
    let id = BasisId::fc(params, quad);
    let path = dir.join(id.file_name());
    if path.exists() {
        if let Ok(ops) = load_cache_for(&path, &id) {
            return Ok(ops);
        }
    }
    let ops = assemble_fc_operators(params, quad)?;
    if ops.basis_id == id {
        store_cache(&ops, &path)?;
    }
    Ok(ops)
}
