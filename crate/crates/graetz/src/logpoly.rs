//! Finite sums `Σ c · r^s · ln(r/ρ)^q` and their piecewise counterparts.
//!
//! The logarithm is taken relative to an origin `ρ` (the left end of the
//! compartment the function lives on). This keeps the lower-limit constants of
//! the inverse operator rational, since `ln(ρ/ρ) = 0`.

use std::collections::BTreeMap;

use crate::domain::Geometry;
use crate::error::{Error, Result};
use crate::scalar::{Hp, RBig, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct LogPoly<S> {
    origin: RBig,
    terms: BTreeMap<(i32, u32), S>,
}

impl<S: Scalar> LogPoly<S> {
    pub fn zero() -> Self {
        LogPoly {
            origin: RBig::ONE,
            terms: BTreeMap::new(),
        }
    }

    /// `c · r^s · ln(r/origin)^q`.
    pub fn monomial(c: S, s: i32, q: u32, origin: RBig) -> Self {
        let mut p = LogPoly {
            origin,
            terms: BTreeMap::new(),
        };
        p.insert(s, q, c);
        p
    }

    pub fn constant(c: S) -> Self {
        Self::monomial(c, 0, 0, RBig::ONE)
    }

    /// Polynomial from coefficients, lowest power first.
    pub fn from_poly(coeffs: &[S]) -> Self {
        let mut p = Self::zero();
        for (k, c) in coeffs.iter().enumerate() {
            p.insert(k as i32, 0, c.clone());
        }
        p
    }

    pub fn from_terms(origin: RBig, terms: impl IntoIterator<Item = ((i32, u32), S)>) -> Self {
        let mut p = LogPoly {
            origin,
            terms: BTreeMap::new(),
        };
        for ((s, q), c) in terms {
            p.insert(s, q, c);
        }
        p
    }

    pub fn origin(&self) -> &RBig {
        &self.origin
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(i32, u32), &S)> {
        self.terms.iter()
    }

    pub fn coeff(&self, s: i32, q: u32) -> Option<&S> {
        self.terms.get(&(s, q))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_logs(&self) -> bool {
        self.terms.keys().any(|&(_, q)| q > 0)
    }

    pub fn max_log_power(&self) -> u32 {
        self.terms.keys().map(|&(_, q)| q).max().unwrap_or(0)
    }

    pub fn min_exponent(&self) -> Option<i32> {
        self.terms.keys().map(|&(s, _)| s).min()
    }

    pub fn max_exponent(&self) -> Option<i32> {
        self.terms.keys().map(|&(s, _)| s).max()
    }

    fn insert(&mut self, s: i32, q: u32, c: S) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&(s, q)) {
            Some(old) => {
                let sum = old.add(&c);
                if !sum.is_zero() {
                    self.terms.insert((s, q), sum);
                }
            }
            None => {
                self.terms.insert((s, q), c);
            }
        }
    }

    fn joint_origin(&self, o: &Self) -> RBig {
        match (self.has_logs(), o.has_logs()) {
            (true, true) => {
                assert_eq!(self.origin, o.origin, "log origins differ");
                self.origin.clone()
            }
            (true, false) => self.origin.clone(),
            (false, true) => o.origin.clone(),
            (false, false) => self.origin.clone(),
        }
    }

    pub fn with_origin(mut self, origin: RBig) -> Self {
        assert!(
            !self.has_logs() || self.origin == origin,
            "cannot move the origin of a log term"
        );
        self.origin = origin;
        self
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = LogPoly {
            origin: self.joint_origin(o),
            terms: self.terms.clone(),
        };
        for (&(s, q), c) in &o.terms {
            out.insert(s, q, c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = LogPoly {
            origin: self.origin.clone(),
            terms: BTreeMap::new(),
        };
        for (&(s, q), v) in &self.terms {
            out.insert(s, q, v.mul(c));
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = v.neg();
        }
        out
    }

    /// Multiplies by `r^k`.
    pub fn shift(&self, k: i32) -> Self {
        LogPoly {
            origin: self.origin.clone(),
            terms: self
                .terms
                .iter()
                .map(|(&(s, q), c)| ((s + k, q), c.clone()))
                .collect(),
        }
    }

    /// Multiplies by the polynomial `Σ p_k r^k`.
    pub fn mul_poly(&self, p: &[S]) -> Self {
        let mut out = LogPoly {
            origin: self.origin.clone(),
            terms: BTreeMap::new(),
        };
        for (k, pk) in p.iter().enumerate() {
            if pk.is_zero() {
                continue;
            }
            for (&(s, q), c) in &self.terms {
                out.insert(s + k as i32, q, c.mul(pk));
            }
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = LogPoly {
            origin: self.joint_origin(o),
            terms: BTreeMap::new(),
        };
        for (&(s1, q1), c1) in &self.terms {
            for (&(s2, q2), c2) in &o.terms {
                out.insert(s1 + s2, q1 + q2, c1.mul(c2));
            }
        }
        out
    }

    /// `d/dr`, using `d/dr ln(r/ρ) = 1/r`.
    pub fn differentiate(&self) -> Self {
        let mut out = LogPoly {
            origin: self.origin.clone(),
            terms: BTreeMap::new(),
        };
        for (&(s, q), c) in &self.terms {
            if s != 0 {
                out.insert(s - 1, q, c.mul_int(s as i64));
            }
            if q > 0 {
                out.insert(s - 1, q - 1, c.mul_int(q as i64));
            }
        }
        out
    }

    /// Transverse operator: `f'' + f'/r - n² f/r²` (cylindrical) or `f''` (planar).
    pub fn laplacian(&self, n: u32, geometry: Geometry) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let d1 = self.differentiate();
        let d2 = d1.differentiate();
        match geometry {
            Geometry::Planar => d2,
            Geometry::Cylindrical => {
                let mut out = d2.add(&d1.shift(-1));
                if n > 0 {
                    out = out.add(
                        &self
                            .shift(-2)
                            .scale(&self.witness().lift(&RBig::from(-((n * n) as i64)))),
                    );
                }
                out
            }
        }
    }

    fn witness(&self) -> S {
        self.terms
            .values()
            .next()
            .cloned()
            .expect("non-empty log-polynomial")
    }

    /// The antiderivative vanishing at `lower`.
    pub fn antiderivative_from(&self, lower: &RBig) -> Result<Self> {
        if self.is_zero() {
            return Ok(self.clone());
        }
        let origin = if self.has_logs() {
            self.origin.clone()
        } else {
            lower.clone()
        };
        let mut out = LogPoly {
            origin,
            terms: BTreeMap::new(),
        };
        let at_zero = *lower == RBig::ZERO;
        for (&(m, q), c) in &self.terms {
            if at_zero && (q > 0 || m <= -1) {
                return Err(Error::DivergentIntegral {
                    exponent: m,
                    log_power: q,
                    lower: "0".into(),
                });
            }
            if m == -1 {
                out.insert(0, q + 1, c.div_int(q as i64 + 1));
                continue;
            }
            // y^{m+1} Σ_j (-1)^j q!/(q-j)! L^{q-j} / (m+1)^{j+1}
            let mp1 = RBig::from(m as i64 + 1);
            let mut falling = RBig::ONE;
            let mut denom = mp1.clone();
            for j in 0..=q {
                let sign = if j % 2 == 0 { RBig::ONE } else { -RBig::ONE };
                let factor = sign * &falling / &denom;
                out.insert(m + 1, q - j, c.mul(&c.lift(&factor)));
                falling *= RBig::from((q - j) as i64);
                denom *= &mp1;
            }
        }
        if !at_zero {
            let w = self.witness();
            let at = out.evaluate(&w.lift(lower))?;
            out.insert(0, 0, at.neg());
        }
        Ok(out)
    }

    /// The inverse transverse operator with zero data at `lower`.
    ///
    /// Cylindrical: `r^n ∫_lower^r x^{-(2n+1)} ∫_lower^x y^{n+1} f(y) dy dx`.
    /// Planar: the plain double antiderivative (`n` must be 0).
    pub fn apply_f(&self, n: u32, lower: &RBig, geometry: Geometry) -> Result<Self> {
        match geometry {
            Geometry::Planar => {
                if n != 0 {
                    return Err(Error::UnsupportedIndex(n));
                }
                if let Some((&(s, q), _)) = self.terms.iter().find(|(&(s, q), _)| s < 0 || q > 0) {
                    return Err(Error::UnsupportedTerm(s, q));
                }
                self.antiderivative_from(lower)?.antiderivative_from(lower)
            }
            Geometry::Cylindrical => {
                let n = n as i32;
                let inner = self.shift(n + 1).antiderivative_from(lower)?;
                let outer = inner.shift(-2 * n - 1).antiderivative_from(lower)?;
                Ok(outer.shift(n))
            }
        }
    }

    pub fn evaluate(&self, r: &S) -> Result<S> {
        let mut it = self.terms.iter();
        let Some((&(s0, _), c0)) = it.next() else {
            return Ok(r.zero_like());
        };
        let zero_point = r.is_zero();
        if zero_point {
            if self.has_logs() || s0 < 0 {
                return Err(Error::EvaluationAtSingularity(format!("{:?}", r.to_f64())));
            }
            return Ok(match self.terms.get(&(0, 0)) {
                Some(c) => c.clone(),
                None => c0.zero_like(),
            });
        }
        let maxq = self.max_log_power();
        let mut logs = vec![r.one_like()];
        if maxq > 0 {
            let l = r
                .div(&r.lift(&self.origin))
                .ln()
                .ok_or(if r.precision().is_none() {
                    Error::Irrational
                } else {
                    Error::EvaluationAtSingularity(format!("{:?}", r.to_f64()))
                })?;
            for k in 1..=maxq as usize {
                let next = logs[k - 1].mul(&l);
                logs.push(next);
            }
        }
        let mut cur_s = s0;
        let mut pw = r.powi(s0);
        let mut acc = r.zero_like();
        for (&(s, q), c) in &self.terms {
            if s != cur_s {
                pw = pw.mul(&r.powi(s - cur_s));
                cur_s = s;
            }
            let mut t = c.mul(&pw);
            if q > 0 {
                t = t.mul(&logs[q as usize]);
            }
            acc = acc.add(&t);
        }
        Ok(acc)
    }

    pub fn evaluate_derivative(&self, r: &S) -> Result<S> {
        self.differentiate().evaluate(r)
    }

    /// `∫_a^b`, exactly when the scalar type permits.
    pub fn integral(&self, a: &RBig, b: &RBig) -> Result<S> {
        if self.is_zero() {
            return Err(Error::ZeroDenominator(
                "integral of an empty log-polynomial has no scalar witness",
            ));
        }
        let w = self.witness();
        self.antiderivative_from(a)?.evaluate(&w.lift(b))
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> LogPoly<T> {
        LogPoly {
            origin: self.origin.clone(),
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (*k, f(c)))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
        }
    }

    pub fn to_hp(&self, bits: usize) -> LogPoly<Hp> {
        self.map(|c| c.to_hp(bits))
    }

    pub fn eval_f64(&self, r: f64, bits: usize) -> Result<f64> {
        Ok(self.to_hp(bits).evaluate(&Hp::from_f64(r, bits))?.to_f64())
    }
}

/// One log-polynomial per compartment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLogPoly<S> {
    pub breakpoints: Vec<RBig>,
    pub pieces: Vec<LogPoly<S>>,
}

impl<S: Scalar> PiecewiseLogPoly<S> {
    pub fn new(breakpoints: Vec<RBig>, pieces: Vec<LogPoly<S>>) -> Self {
        assert_eq!(breakpoints.len(), pieces.len() + 1);
        PiecewiseLogPoly {
            breakpoints,
            pieces,
        }
    }

    /// Index of the compartment containing `x` (left-closed, last one closed).
    pub fn piece_index(&self, x: f64) -> Option<usize> {
        let lo = self.breakpoints[0].to_f64().value();
        let hi = self.breakpoints.last().unwrap().to_f64().value();
        let tol = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        if x < lo - tol || x > hi + tol {
            return None;
        }
        for j in 0..self.pieces.len() {
            if x <= self.breakpoints[j + 1].to_f64().value() {
                return Some(j);
            }
        }
        Some(self.pieces.len() - 1)
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> PiecewiseLogPoly<T> {
        PiecewiseLogPoly {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.map(f)).collect(),
        }
    }

    pub fn to_hp(&self, bits: usize) -> PiecewiseLogPoly<Hp> {
        self.map(|c| c.to_hp(bits))
    }

    pub fn differentiate(&self) -> Self {
        PiecewiseLogPoly {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.differentiate()).collect(),
        }
    }

    pub fn max_log_power(&self) -> u32 {
        self.pieces
            .iter()
            .map(|p| p.max_log_power())
            .max()
            .unwrap_or(0)
    }
}

impl PiecewiseLogPoly<Hp> {
    pub fn eval(&self, x: f64) -> Result<f64> {
        let j = self.piece_index(x).ok_or(Error::OutOfDomain(x))?;
        let p = &self.pieces[j];
        let bits = p.terms().next().map(|(_, c)| c.bits()).unwrap_or(64);
        Ok(p.evaluate(&Hp::from_f64(x, bits))?.to_f64())
    }

    /// One-sided values at compartment boundary `i`: (left piece, right piece).
    pub fn two_sided(&self, i: usize, derivative: bool) -> Result<(Hp, Hp)> {
        let x = &self.breakpoints[i];
        let left = &self.pieces[i - 1];
        let right = &self.pieces[i];
        let bits = left
            .terms()
            .chain(right.terms())
            .next()
            .map(|(_, c)| c.bits())
            .unwrap_or(64);
        let xh = Hp::from_rbig(x, bits);
        let f = |p: &LogPoly<Hp>| {
            if derivative {
                p.evaluate_derivative(&xh)
            } else {
                p.evaluate(&xh)
            }
        };
        Ok((f(left)?, f(right)?))
    }
}
