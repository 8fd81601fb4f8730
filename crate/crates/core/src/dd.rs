//! Double-double arithmetic (~32 significant digits).
//!
//! Used for the offline parts of basis construction and operator assembly,
//! where the Fourier-continuation basis functions reach magnitudes far above
//! one on the extension region and plain `f64` loses too many digits.
//!
//! The representation is the unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
//! Addition and multiplication follow the classic error-free transformations
//! (two-sum, fused-multiply-add based two-product).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Scalar type the generic construction routines are written against.
pub trait Real:
    Copy
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Returns `(sin x, cos x)`.
    fn sin_cos(self) -> (Self, Self);
    fn pi() -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }
    fn from_i64(n: i64) -> Self {
        Self::from_f64(n as f64)
    }
    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
}

#[derive(Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };
    pub const FRAC_PI_2: Dd = Dd {
        hi: std::f64::consts::FRAC_PI_2,
        lo: 6.123_233_995_736_766e-17,
    };

    #[inline]
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    #[inline]
    pub fn from_ratio(num: i64, den: i64) -> Self {
        Dd::from(num as f64) / Dd::from(den as f64)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    /// Multiplication by an exact power of two.
    #[inline]
    pub fn ldexp(self, e: i32) -> Self {
        let s = 2f64.powi(e);
        Dd::new(self.hi * s, self.lo * s)
    }

    pub fn sqr(self) -> Self {
        self * self
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        // One Newton step from the f64 estimate doubles the correct digits.
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = ((self.hi - p) - e + self.lo) / (2.0 * x);
        let (s, t) = quick_two_sum(x, r);
        Dd::new(s, t)
    }

    pub fn round(self) -> Self {
        let hi = self.hi.round();
        if hi == self.hi {
            let lo = self.lo.round();
            let (s, e) = quick_two_sum(hi, lo);
            Dd::new(s, e)
        } else if (hi - self.hi).abs() == 0.5 && self.lo != 0.0 {
            // Tie in hi broken by the sign of lo.
            let hi = if self.lo > 0.0 && hi < self.hi {
                hi + 1.0
            } else if self.lo < 0.0 && hi > self.hi {
                hi - 1.0
            } else {
                hi
            };
            Dd::new(hi, 0.0)
        } else {
            Dd::new(hi, 0.0)
        }
    }

    fn sin_cos_impl(self) -> (Self, Self) {
        let j = (self / Dd::FRAC_PI_2).round();
        let r = self - Dd::FRAC_PI_2 * j;
        let (s, c) = sin_cos_taylor(r);
        let q = (j.hi.rem_euclid(4.0)) as i32;
        match q {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

/// Taylor series on `|r| <= pi/4`.
fn sin_cos_taylor(r: Dd) -> (Dd, Dd) {
    let r2 = r * r;
    let mut term = r;
    let mut s = r;
    let mut n = 1.0;
    loop {
        term = -term * r2 / Dd::from((n + 1.0) * (n + 2.0));
        s += term;
        n += 2.0;
        if term.hi.abs() < 1e-35 || n > 60.0 {
            break;
        }
    }
    let mut term = Dd::ONE;
    let mut c = Dd::ONE;
    let mut n = 0.0;
    loop {
        term = -term * r2 / Dd::from((n + 1.0) * (n + 2.0));
        c += term;
        n += 2.0;
        if term.hi.abs() < 1e-35 || n > 60.0 {
            break;
        }
    }
    (s, c)
}

impl From<f64> for Dd {
    #[inline]
    fn from(x: f64) -> Self {
        Dd::new(x, 0.0)
    }
}

impl From<Dd> for f64 {
    #[inline]
    fn from(x: Dd) -> Self {
        x.hi + x.lo
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.hi + self.lo)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd::new(-self.hi, -self.lo)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd::new(hi, lo)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd::new(hi, lo)
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd::new(q1, q2) + Dd::from(q3)
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl SubAssign for Dd {
    #[inline]
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}

impl MulAssign for Dd {
    #[inline]
    fn mul_assign(&mut self, b: Dd) {
        *self = *self * b;
    }
}

impl Real for Dd {
    fn from_f64(x: f64) -> Self {
        Dd::from(x)
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn sin_cos(self) -> (Self, Self) {
        self.sin_cos_impl()
    }
    fn pi() -> Self {
        Dd::PI
    }
    fn from_usize(n: usize) -> Self {
        Dd::from(n as f64)
    }
    fn from_i64(n: i64) -> Self {
        let hi = n as f64;
        let lo = (n - hi as i64) as f64;
        Dd::new(hi, 0.0) + Dd::from(lo)
    }
}

/// `e^{2 pi i m / n}` for `m = 0..n`, computed in the requested precision.
pub fn unit_roots<T: Real>(n: usize) -> Vec<(T, T)> {
    let two_pi = T::pi() * T::from_f64(2.0);
    (0..n)
        .map(|m| {
            let (s, c) = (two_pi * T::from_usize(m) / T::from_usize(n)).sin_cos();
            (c, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Dd, b: Dd) -> f64 {
        ((a - b).to_f64() / b.to_f64()).abs()
    }

    #[test]
    fn arithmetic_carries_extra_digits() {
        let third = Dd::ONE / Dd::from(3.0);
        let back = third * Dd::from(3.0);
        assert!((back - Dd::ONE).to_f64().abs() < 1e-31);
        let a = Dd::from(1.0) + Dd::from(1e-20);
        assert!(((a - Dd::ONE).to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn sqrt_squares_back() {
        let two = Dd::from(2.0);
        let r = two.sqrt();
        assert!((r * r - two).to_f64().abs() < 1e-31);
    }

    #[test]
    fn sin_cos_identities() {
        for &x in &[0.1, 0.7, 1.3, 2.9, 5.5, -4.2, 31.0] {
            let (s, c) = Dd::from(x).sin_cos();
            let one = s * s + c * c;
            assert!((one - Dd::ONE).to_f64().abs() < 1e-30, "x={x}");
            assert!((s.to_f64() - x.sin()).abs() < 1e-15);
            assert!((c.to_f64() - x.cos()).abs() < 1e-15);
        }
        let (s, _) = Dd::PI.sin_cos();
        assert!(s.to_f64().abs() < 1e-31);
    }

    // Reference digits from a 40-digit evaluation.
    #[test]
    fn sin_matches_reference() {
        let (s, c) = Dd::from(0.7).sin_cos();
        let s_ref = Dd::new(0.644_217_687_237_691, 2.874_056_792_733_875_5e-18);
        let c_ref = Dd::new(0.764_842_187_284_488_5, -4.013_780_434_022_238e-17);
        assert!(rel(s, s_ref) < 1e-30, "{s:?}");
        assert!(rel(c, c_ref) < 1e-30, "{c:?}");
    }

    #[test]
    fn unit_roots_close_the_circle() {
        let roots = unit_roots::<Dd>(45);
        for (c, s) in roots {
            assert!((c * c + s * s - Dd::ONE).to_f64().abs() < 1e-30);
        }
    }
}
