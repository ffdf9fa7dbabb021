//! Coefficient arithmetic shared by the exact and the high-precision paths.
//!
//! Every algebraic routine is generic over [`Scalar`]. Two implementations
//! exist: [`RBig`] (exact rationals) and [`Hp`] (binary floats with a fixed
//! working precision). Constants are always created with [`Scalar::lift`] on an
//! existing value so that the working precision propagates automatically.

use std::fmt;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::IBig;
pub use dashu_ratio::RBig;

/// Binary float type used for all high-precision work.
pub type Float = FBig<HalfEven, 2>;

pub trait Scalar: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    /// A constant with the same kind and precision as `self`.
    fn lift(&self, r: &RBig) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn is_zero(&self) -> bool;
    /// Natural logarithm, `None` when the result is not representable
    /// (irrational in exact mode, or a non-positive argument).
    fn ln(&self) -> Option<Self>;
    fn to_hp(&self, bits: usize) -> Hp;
    fn to_f64(&self) -> f64;
    /// Working precision in bits, `None` for exact values.
    fn precision(&self) -> Option<usize>;

    fn zero_like(&self) -> Self {
        self.lift(&RBig::ZERO)
    }
    fn one_like(&self) -> Self {
        self.lift(&RBig::ONE)
    }
    fn mul_int(&self, k: i64) -> Self {
        self.mul(&self.lift(&RBig::from(k)))
    }
    fn div_int(&self, k: i64) -> Self {
        self.div(&self.lift(&RBig::from(k)))
    }
    fn powi(&self, e: i32) -> Self {
        let mut acc = self.one_like();
        let mut base = if e < 0 {
            self.one_like().div(self)
        } else {
            self.clone()
        };
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }
    fn abs(&self) -> Self {
        if self.to_f64() < 0.0 {
            self.neg()
        } else {
            self.clone()
        }
    }
}

impl Scalar for RBig {
    fn lift(&self, r: &RBig) -> Self {
        r.clone()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_zero(&self) -> bool {
        *self == RBig::ZERO
    }
    fn ln(&self) -> Option<Self> {
        if *self == RBig::ONE {
            Some(RBig::ZERO)
        } else {
            None
        }
    }
    fn to_hp(&self, bits: usize) -> Hp {
        Hp(self.to_float::<HalfEven, 2>(bits).value())
    }
    fn to_f64(&self) -> f64 {
        RBig::to_f64(self).value()
    }
    fn precision(&self) -> Option<usize> {
        None
    }
}

/// High-precision binary float. The precision of a result is the larger of
/// its operands' precisions.
#[derive(Clone, PartialEq)]
pub struct Hp(pub Float);

impl Hp {
    pub fn from_rbig(r: &RBig, bits: usize) -> Self {
        Hp(r.to_float::<HalfEven, 2>(bits).value())
    }
    pub fn from_f64(x: f64, bits: usize) -> Self {
        let f = Float::try_from(x).expect("finite f64");
        Hp(f.with_precision(bits).value())
    }
    pub fn from_i64(x: i64, bits: usize) -> Self {
        Hp(Float::from(x).with_precision(bits).value())
    }
    pub fn bits(&self) -> usize {
        self.0.precision()
    }
    pub fn exp(&self) -> Self {
        Hp(self.0.exp())
    }
    pub fn sqrt(&self) -> Self {
        Hp(self.0.sqrt())
    }
    /// Base-2 exponent estimate of the magnitude; `None` for zero.
    pub fn log2_abs(&self) -> Option<f64> {
        if self.0.repr().significand().is_zero() {
            return None;
        }
        let sig = self.0.repr().significand();
        let e = self.0.repr().exponent();
        let bits = {
            use dashu_int::ops::BitTest;
            sig.bit_len()
        };
        let shift = bits.saturating_sub(60);
        let top: IBig = sig >> shift;
        let top = i128::try_from(&top).unwrap_or(0) as f64;
        Some(top.abs().log2() + (shift as isize + e) as f64)
    }
    pub fn cmp_abs(&self, o: &Hp) -> std::cmp::Ordering {
        let a = self.abs();
        let b = o.abs();
        a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal)
    }
}

impl fmt::Debug for Hp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl Scalar for Hp {
    fn lift(&self, r: &RBig) -> Self {
        Hp::from_rbig(r, self.bits())
    }
    fn add(&self, o: &Self) -> Self {
        Hp(&self.0 + &o.0)
    }
    fn sub(&self, o: &Self) -> Self {
        Hp(&self.0 - &o.0)
    }
    fn mul(&self, o: &Self) -> Self {
        Hp(&self.0 * &o.0)
    }
    fn div(&self, o: &Self) -> Self {
        Hp(&self.0 / &o.0)
    }
    fn neg(&self) -> Self {
        Hp(-&self.0)
    }
    fn is_zero(&self) -> bool {
        self.0.repr().significand().is_zero()
    }
    fn ln(&self) -> Option<Self> {
        if self.to_f64() > 0.0 {
            Some(Hp(self.0.ln()))
        } else {
            None
        }
    }
    fn to_hp(&self, bits: usize) -> Hp {
        Hp(self.0.clone().with_precision(bits).value())
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }
    fn precision(&self) -> Option<usize> {
        Some(self.bits())
    }
    fn abs(&self) -> Self {
        if self.0.repr().significand() < &IBig::ZERO {
            self.neg()
        } else {
            self.clone()
        }
    }
}

/// Parses a decimal (`"0.1"`, `"2.5e-3"`) or fraction (`"1/3"`) string exactly.
pub fn parse_rational(s: &str) -> Option<RBig> {
    let s = s.trim();
    if s.contains('/') {
        s.parse::<RBig>().ok()
    } else {
        RBig::from_str_decimal(s).ok()
    }
}

/// Exact rational equal to the shortest decimal that round-trips `x`.
pub fn rational_from_f64(x: f64) -> Option<RBig> {
    if !x.is_finite() {
        return None;
    }
    parse_rational(&format!("{x:e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_strings_are_exact() {
        assert_eq!(
            parse_rational("0.1").unwrap(),
            RBig::from_parts(1.into(), 10u8.into())
        );
        assert_eq!(
            parse_rational("-3/6").unwrap(),
            RBig::from_parts((-1).into(), 2u8.into())
        );
        assert_eq!(
            rational_from_f64(0.1).unwrap(),
            parse_rational("0.1").unwrap()
        );
    }

    #[test]
    fn hp_keeps_precision() {
        let x = Hp::from_i64(1, 200);
        let third = x.div_int(3);
        assert_eq!(third.bits(), 200);
        let back = third.mul_int(3).sub(&x);
        assert!(back.to_f64().abs() < 1e-55);
        assert!(
            (x.lift(&RBig::from(2)).ln().unwrap().to_f64() - std::f64::consts::LN_2).abs() < 1e-16
        );
    }

    #[test]
    fn log2_estimate() {
        let x = Hp::from_f64(1024.0 * 3.0, 128);
        assert!((x.log2_abs().unwrap() - (3072f64).log2()).abs() < 1e-9);
    }
}
