//! Scalar abstraction shared by the linear algebra and chain code.
//!
//! Weights are complex in general, but most chains in practice are real and
//! the combinatorial identities are checked over exact rationals, so the
//! dense routines are written once against [`Scalar`].

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_complex::{Complex, Complex32, Complex64};
use num_rational::BigRational;
use num_traits::{NumAssign, ToPrimitive, Zero};

pub trait Scalar: Clone + Debug + PartialEq + Send + Sync + 'static + NumAssign + Neg<Output = Self> {
    /// Magnitude used for pivot selection and tolerance checks.
    fn modulus(&self) -> f64;
    fn conj(&self) -> Self;
    fn from_f64(x: f64) -> Self;
    /// `None` when the value cannot be represented (imaginary part on a real type).
    fn from_complex(z: Complex64) -> Option<Self>;
    fn to_complex(&self) -> Complex64;

    /// True when arithmetic is exact, so equality checks need no tolerance.
    fn is_exact() -> bool {
        false
    }

    fn is_real(&self) -> bool {
        self.to_complex().im == 0.0
    }
}

impl Scalar for f64 {
    fn modulus(&self) -> f64 {
        self.abs()
    }
    fn conj(&self) -> Self {
        *self
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_complex(z: Complex64) -> Option<Self> {
        (z.im == 0.0).then_some(z.re)
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
}

impl Scalar for f32 {
    fn modulus(&self) -> f64 {
        self.abs() as f64
    }
    fn conj(&self) -> Self {
        *self
    }
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn from_complex(z: Complex64) -> Option<Self> {
        (z.im == 0.0).then_some(z.re as f32)
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(*self as f64, 0.0)
    }
}

impl Scalar for Complex64 {
    fn modulus(&self) -> f64 {
        self.norm()
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn from_complex(z: Complex64) -> Option<Self> {
        Some(z)
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
}

impl Scalar for Complex32 {
    fn modulus(&self) -> f64 {
        self.norm() as f64
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn from_f64(x: f64) -> Self {
        Complex32::new(x as f32, 0.0)
    }
    fn from_complex(z: Complex64) -> Option<Self> {
        Some(Complex32::new(z.re as f32, z.im as f32))
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }
}

impl Scalar for BigRational {
    fn modulus(&self) -> f64 {
        self.to_f64().map_or(f64::INFINITY, f64::abs)
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    /// Exact binary expansion of `x`; non-finite input maps to zero.
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
    }
    fn from_complex(z: Complex64) -> Option<Self> {
        (z.im == 0.0).then(|| Self::from_f64(z.re))
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(self.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    fn is_exact() -> bool {
        true
    }
    fn is_real(&self) -> bool {
        true
    }
}

/// Rational `num/den` as an exact scalar.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Relative distance `|a - b| / max(1, |b|)`, the comparison used by identity checks.
pub fn rel_diff<S: Scalar>(a: &S, b: &S) -> f64 {
    let d = (a.clone() - b.clone()).modulus();
    d / b.modulus().max(1.0)
}
