//! Closure functions `t_p`: the coefficients of the eigen-profile
//! `T_λ(r) = Σ t_p(r) λ^p`, built by inverting the transverse operator layer
//! by layer.

use std::fmt::Write as _;

use crate::domain::{BoundaryKind, DomainSpec, Geometry};
use crate::error::{Error, Result};
use crate::logpoly::{LogPoly, PiecewiseLogPoly};
use crate::scalar::{Hp, RBig, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    /// Exact rationals; fails with [`Error::Irrational`] if a logarithm of a
    /// non-unit ratio is needed during the construction.
    Exact,
    Float {
        bits: usize,
    },
    /// Exact when possible, otherwise floats.
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub struct ClosureOptions {
    pub arithmetic: Arithmetic,
    /// Precision used for boundary values and for the float fallback.
    pub bits: usize,
    /// Seed family for planar domains: Neumann `t_0 = 1`, Dirichlet `t_0 = x + R`.
    pub planar_family: BoundaryKind,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions {
            arithmetic: Arithmetic::Auto,
            bits: 256,
            planar_family: BoundaryKind::Neumann,
        }
    }
}

pub const DEFAULT_ORDER: usize = 60;

#[derive(Debug, Clone)]
pub struct ClosureTable<S> {
    pub n: u32,
    pub order: usize,
    pub geometry: Geometry,
    pub planar_family: BoundaryKind,
    pub t: Vec<PiecewiseLogPoly<S>>,
    /// `t_p(R)` at the working precision.
    pub c_value: Vec<Hp>,
    /// `t_p'(R)` at the working precision.
    pub c_deriv: Vec<Hp>,
    /// `max(sup |v/k|, 1)`.
    pub velocity_bound: f64,
    pub bits: usize,
    pub spec: DomainSpec,
}

/// A table in whichever arithmetic the build ended up using.
#[derive(Debug, Clone)]
pub enum Closure {
    Exact(ClosureTable<RBig>),
    Float(ClosureTable<Hp>),
}

impl Closure {
    pub fn to_hp(&self) -> ClosureTable<Hp> {
        match self {
            Closure::Exact(t) => t.to_hp(t.bits),
            Closure::Float(t) => t.clone(),
        }
    }
    pub fn is_exact(&self) -> bool {
        matches!(self, Closure::Exact(_))
    }
}

pub fn build_closure(
    spec: &DomainSpec,
    n: u32,
    order: usize,
    opts: ClosureOptions,
) -> Result<Closure> {
    match opts.arithmetic {
        Arithmetic::Exact => Ok(Closure::Exact(build_generic(
            spec,
            n,
            order,
            RBig::ONE,
            opts,
        )?)),
        Arithmetic::Float { bits } => Ok(Closure::Float(build_generic(
            spec,
            n,
            order,
            Hp::from_i64(1, bits),
            ClosureOptions { bits, ..opts },
        )?)),
        Arithmetic::Auto => match build_generic(spec, n, order, RBig::ONE, opts) {
            Ok(t) => Ok(Closure::Exact(t)),
            Err(Error::Irrational) => Ok(Closure::Float(build_generic(
                spec,
                n,
                order,
                Hp::from_i64(1, opts.bits),
                opts,
            )?)),
            Err(e) => Err(e),
        },
    }
}

/// Exact-rational build; convenience wrapper for tests and symbolic checks.
pub fn build_exact(spec: &DomainSpec, n: u32, order: usize) -> Result<ClosureTable<RBig>> {
    build_generic(spec, n, order, RBig::ONE, ClosureOptions::default())
}

pub fn build_generic<S: Scalar>(
    spec: &DomainSpec,
    n: u32,
    order: usize,
    unit: S,
    opts: ClosureOptions,
) -> Result<ClosureTable<S>> {
    let geometry = spec.geometry;
    if geometry == Geometry::Planar && n > 0 {
        return Err(Error::UnsupportedIndex(n));
    }
    let bp = spec.breakpoints();
    let m = spec.compartments();
    let weights: Vec<Vec<S>> = spec
        .layers
        .iter()
        .map(|l| l.velocity_over_k().iter().map(|c| unit.lift(c)).collect())
        .collect();
    let cond: Vec<RBig> = spec.layers.iter().map(|l| l.conductivity.clone()).collect();

    let first_seed = match geometry {
        Geometry::Cylindrical => LogPoly::monomial(unit.clone(), n as i32, 0, bp[0].clone()),
        Geometry::Planar => match opts.planar_family {
            BoundaryKind::Neumann => LogPoly::constant(unit.clone()),
            BoundaryKind::Dirichlet => LogPoly::from_poly(&[unit.lift(&(-&bp[0])), unit.clone()]),
        },
    };

    let mut t: Vec<PiecewiseLogPoly<S>> = Vec::with_capacity(order + 1);
    for p in 0..=order {
        let mut pieces: Vec<LogPoly<S>> = Vec::with_capacity(m);
        for j in 0..m {
            let particular = if p == 0 {
                LogPoly::zero()
            } else {
                let prev = &t[p - 1].pieces[j];
                let mut f = prev.mul_poly(&weights[j]);
                if p >= 2 {
                    f = f.sub(&t[p - 2].pieces[j]);
                }
                f.apply_f(n, &bp[j], geometry)?
            };
            let piece = if j == 0 {
                if p == 0 {
                    first_seed.clone()
                } else {
                    particular
                }
            } else {
                let left: &LogPoly<S> = &pieces[j - 1];
                let x = unit.lift(&bp[j]);
                let val = left.evaluate(&x)?;
                let der = left
                    .evaluate_derivative(&x)?
                    .mul(&unit.lift(&(&cond[j - 1] / &cond[j])));
                let (psi1, psi2) = basis(&unit, n, geometry, &bp[j]);
                let (a, b) = solve_2x2(&psi1, &psi2, &x, &val, &der)
                    .ok_or(Error::SingularInterfaceSystem(j))?;
                psi1.scale(&a).add(&psi2.scale(&b)).add(&particular)
            };
            pieces.push(piece.with_origin_if_logfree(&bp[j]));
        }
        let pw = PiecewiseLogPoly::new(bp.clone(), pieces);
        t.push(pw);
    }

    let bits = unit.precision().unwrap_or(opts.bits);
    let r_out = Hp::from_rbig(&spec.outer_radius(), bits);
    let mut c_value = Vec::with_capacity(order + 1);
    let mut c_deriv = Vec::with_capacity(order + 1);
    for tp in &t {
        let last = tp.pieces.last().unwrap().to_hp(bits);
        c_value.push(last.evaluate(&r_out)?);
        c_deriv.push(last.evaluate_derivative(&r_out)?);
    }
    Ok(ClosureTable {
        n,
        order,
        geometry,
        planar_family: opts.planar_family,
        t,
        c_value,
        c_deriv,
        velocity_bound: spec.velocity_bound(),
        bits,
        spec: spec.clone(),
    })
}

/// Homogeneous solutions on a compartment starting at `a`.
fn basis<S: Scalar>(unit: &S, n: u32, geometry: Geometry, a: &RBig) -> (LogPoly<S>, LogPoly<S>) {
    match geometry {
        Geometry::Planar => (
            LogPoly::constant(unit.clone()),
            LogPoly::monomial(unit.clone(), 1, 0, a.clone()),
        ),
        Geometry::Cylindrical => {
            let psi1 = LogPoly::monomial(unit.clone(), n as i32, 0, a.clone());
            let psi2 = if n == 0 {
                LogPoly::monomial(unit.clone(), 0, 1, a.clone())
            } else {
                LogPoly::monomial(unit.clone(), -(n as i32), 0, a.clone())
            };
            (psi1, psi2)
        }
    }
}

fn solve_2x2<S: Scalar>(
    psi1: &LogPoly<S>,
    psi2: &LogPoly<S>,
    x: &S,
    val: &S,
    der: &S,
) -> Option<(S, S)> {
    let a11 = psi1.evaluate(x).ok()?;
    let a12 = psi2.evaluate(x).ok()?;
    let a21 = psi1.evaluate_derivative(x).ok()?;
    let a22 = psi2.evaluate_derivative(x).ok()?;
    let det = a11.mul(&a22).sub(&a12.mul(&a21));
    if det.is_zero() {
        return None;
    }
    let a = val.mul(&a22).sub(&a12.mul(der)).div(&det);
    let b = a11.mul(der).sub(&a21.mul(val)).div(&det);
    Some((a, b))
}

impl<S: Scalar> LogPoly<S> {
    fn with_origin_if_logfree(self, a: &RBig) -> Self {
        if self.has_logs() {
            self
        } else {
            self.with_origin(a.clone())
        }
    }
}

impl<S: Scalar> ClosureTable<S> {
    /// Converts to floats at `bits`, re-evaluating the boundary values at the
    /// new precision.
    pub fn to_hp(&self, bits: usize) -> ClosureTable<Hp> {
        let t: Vec<PiecewiseLogPoly<Hp>> = self.t.iter().map(|p| p.to_hp(bits)).collect();
        let r_out = Hp::from_rbig(&self.spec.outer_radius(), bits);
        let zero = Hp::from_i64(0, bits);
        let at = |p: &PiecewiseLogPoly<Hp>, d: bool| {
            let last = p.pieces.last().unwrap();
            let v = if d {
                last.evaluate_derivative(&r_out)
            } else {
                last.evaluate(&r_out)
            };
            v.unwrap_or_else(|_| zero.clone())
        };
        let c_value = t.iter().map(|p| at(p, false)).collect();
        let c_deriv = t.iter().map(|p| at(p, true)).collect();
        ClosureTable {
            n: self.n,
            order: self.order,
            geometry: self.geometry,
            planar_family: self.planar_family,
            t,
            c_value,
            c_deriv,
            velocity_bound: self.velocity_bound,
            bits,
            spec: self.spec.clone(),
        }
    }

    /// Table restricted to orders `0..=order`.
    pub fn truncated(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let mut out = self.clone();
        out.order = order;
        out.t.truncate(order + 1);
        out.c_value.truncate(order + 1);
        out.c_deriv.truncate(order + 1);
        out
    }

    /// True when the majorant tail is a proven bound rather than an estimate:
    /// uniform conductivity makes every `t_p` a single global inverse of the
    /// transverse operator, so the positivity argument covers the whole domain.
    pub fn tail_is_rigorous(&self) -> bool {
        self.spec.uniform_conductivity()
    }

    /// Closed-form bound `Σ_{p > from_order} α_p λ^p` with
    /// `α_p = (2M)^p K_{i-1} ρ^{n+2i}` for `p = 2i, 2i+1`, `ρ = max(R, 1)`
    /// (`K_{-1} := 1`). A proven bound for `R ≤ 1`, an indicator otherwise.
    pub fn tail_bound(&self, abs_lambda: f64, from_order: usize) -> f64 {
        closed_form_tail(
            self.n,
            self.velocity_bound,
            self.spec.outer_radius().to_f64().value(),
            abs_lambda,
            from_order,
        )
    }

    /// Whether [`Self::tail_bound`] is a proof (`R ≤ 1`) or only a heuristic.
    pub fn tail_bound_is_heuristic(&self) -> bool {
        self.spec.outer_radius() > RBig::ONE
    }

    /// Sharp tail estimate from the majorant recursion: returns bounds for the
    /// truncation error of `T(R)` and `T'(R)` at `|λ|`.
    pub fn majorant_tail(&self, abs_lambda: f64) -> (f64, f64) {
        majorant_tail(
            &self.spec,
            self.n,
            self.planar_family,
            self.velocity_bound,
            abs_lambda,
            self.order,
        )
    }

    /// CSV rows `p,compartment,exponent,log_power,coefficient`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,compartment,exponent,log_power,coefficient\n");
        for (p, tp) in self.t.iter().enumerate() {
            for (j, piece) in tp.pieces.iter().enumerate() {
                for (&(s, q), c) in piece.terms() {
                    let _ = writeln!(out, "{p},{j},{s},{q},{}", crate::fmt_sci(c.to_f64()));
                }
            }
        }
        out
    }

    /// LaTeX `align` block listing every closure function.
    pub fn to_latex(&self) -> String {
        let mut out = String::from("\\begin{align*}\n");
        let var = if self.geometry == Geometry::Planar {
            "x"
        } else {
            "r"
        };
        for (p, tp) in self.t.iter().enumerate() {
            for (j, piece) in tp.pieces.iter().enumerate() {
                let _ = write!(out, "t_{{{p}}}^{{({})}}({var}) &= ", j + 1);
                if piece.is_zero() {
                    out.push('0');
                }
                for (k, (&(s, q), c)) in piece.terms().enumerate() {
                    let v = c.to_f64();
                    if k > 0 {
                        out.push_str(if v < 0.0 { " - " } else { " + " });
                    } else if v < 0.0 {
                        out.push('-');
                    }
                    let _ = write!(out, "{:.6e}", v.abs());
                    if s != 0 {
                        let _ = write!(out, "\\,{var}^{{{s}}}");
                    }
                    if q > 0 {
                        let org = piece.origin().to_f64().value();
                        let _ = write!(out, "\\ln^{{{q}}}({var}/{org})");
                    }
                }
                out.push_str(" \\\\\n");
            }
        }
        out.push_str("\\end{align*}\n");
        out
    }
}

impl ClosureTable<RBig> {
    /// Exact `t_p(R)` when no logarithm of a non-unit ratio is involved.
    pub fn exact_values(&self) -> Result<Vec<RBig>> {
        let r = self.spec.outer_radius();
        self.t
            .iter()
            .map(|tp| tp.pieces.last().unwrap().evaluate(&r))
            .collect()
    }

    pub fn exact_derivatives(&self) -> Result<Vec<RBig>> {
        let r = self.spec.outer_radius();
        self.t
            .iter()
            .map(|tp| tp.pieces.last().unwrap().evaluate_derivative(&r))
            .collect()
    }
}

/// `K_i` with `F^(i)[r^n] = K_i r^(n+2i)`: `1 / (4^i i! (n+1)(n+2)...(n+i))`,
/// the relative coefficient of the `J_n` power series. `K_{-1} = 1`.
pub fn k_coefficient(n: u32, i: i64) -> f64 {
    if i < 0 {
        return 1.0;
    }
    let mut ln = 0.0;
    for k in 1..=i {
        ln -= (4.0 * k as f64).ln() + ((n as i64 + k) as f64).ln();
    }
    ln.exp()
}

pub fn k_coefficient_exact(n: u32, i: u32) -> RBig {
    let mut d = RBig::ONE;
    for k in 1..=i {
        d *= RBig::from(4 * k * (n + k));
    }
    RBig::ONE / d
}

fn closed_form_tail(n: u32, m: f64, r: f64, lam: f64, from: usize) -> f64 {
    if lam == 0.0 {
        return 0.0;
    }
    let rho = r.max(1.0);
    let mut sum = 0.0;
    let mut p = from + 1;
    loop {
        let i = (p / 2) as i64;
        let ln_term = p as f64 * (2.0 * m * lam).ln()
            + k_coefficient(n, i - 1).ln()
            + (n as f64 + 2.0 * i as f64) * rho.ln();
        let term = ln_term.exp();
        sum += term;
        if p > from + 8 && (term <= sum * 1e-17 || term == 0.0) && p as f64 > 2.0 * m * lam * rho {
            break;
        }
        if p > from + 100_000 {
            break;
        }
        p += 1;
    }
    sum
}

/// Majorant recursion with constant speed bound `M`: the functions
/// `u_p = F[M u_{p-1} + u_{p-2}]` dominate `|t_p|` and `|t_p'|` pointwise.
/// Evaluated directly with the factor `λ^p` folded in to avoid overflow.
/// Returns the tails `Σ_{p > from} u_p(R) λ^p` and `Σ_{p > from} u_p'(R) λ^p`.
pub fn majorant_tail(
    spec: &DomainSpec,
    n: u32,
    family: BoundaryKind,
    m: f64,
    lam: f64,
    from: usize,
) -> (f64, f64) {
    if lam == 0.0 {
        return (0.0, 0.0);
    }
    let (s0, x) = match spec.geometry {
        Geometry::Cylindrical => (n as f64, spec.outer_radius().to_f64().value()),
        Geometry::Planar => (
            if family == BoundaryKind::Dirichlet {
                1.0
            } else {
                0.0
            },
            2.0 * spec.outer_radius().to_f64().value(),
        ),
    };
    // a[k]: coefficient of x^{s0+2k} times λ^p, stored as value at x (already multiplied by x^{s0+2k})
    let denom = |k: usize| -> f64 {
        let s = s0 + 2.0 * k as f64;
        match spec.geometry {
            Geometry::Cylindrical => (s + 2.0) * (s + 2.0) - (n as f64) * (n as f64),
            Geometry::Planar => (s + 1.0) * (s + 2.0),
        }
    };
    let x2 = x * x;
    let mut prev2: Vec<f64> = Vec::new();
    let mut prev1: Vec<f64> = vec![x.powf(s0)];
    let mut tail = (0.0, 0.0);
    let mut peak: f64 = prev1[0];
    let mut p = 0usize;
    loop {
        p += 1;
        let len = prev1.len().max(prev2.len()) + 1;
        let mut cur = vec![0.0; len];
        for k in 0..len - 1 {
            let a = prev1.get(k).copied().unwrap_or(0.0) * m * lam;
            let b = prev2.get(k).copied().unwrap_or(0.0) * lam * lam;
            cur[k + 1] = (a + b) * x2 / denom(k);
        }
        let val: f64 = cur.iter().sum();
        let der: f64 = cur
            .iter()
            .enumerate()
            .map(|(k, c)| c * (s0 + 2.0 * k as f64) / x)
            .sum();
        peak = peak.max(val);
        if p > from {
            tail.0 += val;
            tail.1 += der;
        }
        let done = p > from + 4
            && val <= 1e-18 * tail.0.max(f64::MIN_POSITIVE)
            && cur.iter().rposition(|c| *c > 0.0).map_or(true, |k| {
                // terms have started to shrink in k as well
                let s = s0 + 2.0 * k as f64;
                s * s > 4.0 * m * lam * x2
            });
        if done || p > from + 20_000 || !val.is_finite() {
            break;
        }
        prev2 = prev1;
        prev1 = cur;
    }
    let _ = peak;
    tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{builtin, Builtin, LayerSpec};

    fn i(n: i64) -> RBig {
        RBig::from(n)
    }

    fn solid(r: i64) -> DomainSpec {
        DomainSpec {
            geometry: Geometry::Cylindrical,
            interfaces: vec![i(r)],
            layers: vec![LayerSpec::solid(i(1))],
        }
    }

    #[test]
    fn bessel_j0_series() {
        let t = build_exact(&solid(1), 0, 12).unwrap();
        let mut fact = RBig::ONE;
        for p in 0..=12usize {
            let piece = &t.t[p].pieces[0];
            if p % 2 == 1 {
                assert!(piece.is_zero());
                continue;
            }
            let k = (p / 2) as u32;
            if k > 0 {
                fact *= i(k as i64);
            }
            let sign = if k % 2 == 0 { i(1) } else { i(-1) };
            let expect = sign / (RBig::from(4u64.pow(k)) * &fact * &fact);
            assert_eq!(piece.len(), 1);
            assert_eq!(piece.coeff(p as i32, 0), Some(&expect));
        }
    }

    #[test]
    fn heated_pipe_first_order() {
        let pe = i(10);
        let (spec, _) = builtin(&Builtin::HeatedPipe { pe: pe.clone() }).unwrap();
        let t = build_exact(&spec, 0, 3).unwrap();
        let fluid = &t.t[1].pieces[0];
        assert_eq!(fluid.coeff(2, 0), Some(&(&pe / i(4))));
        assert_eq!(fluid.coeff(4, 0), Some(&(-&pe / i(16))));
        // solid piece: constant plus log, matched at r = 1
        let wall = &t.t[1].pieces[1];
        assert_eq!(
            wall.evaluate(&i(1)).unwrap(),
            fluid.evaluate(&i(1)).unwrap()
        );
        assert_eq!(
            wall.evaluate_derivative(&i(1)).unwrap(),
            fluid.evaluate_derivative(&i(1)).unwrap()
        );
        assert_eq!(wall.coeff(0, 1), Some(&(&pe / i(4))));
    }

    #[test]
    fn tail_bound_examples() {
        let t = build_exact(&solid(1), 0, 20).unwrap();
        assert_eq!(t.tail_bound(0.0, 20), 0.0);
        let a = t.tail_bound(3.0, 20);
        let b = t.tail_bound(3.0, 40);
        assert!(b < a && b > 0.0);
        // direct summation of 2^p K_{floor(p/2)-1} 3^p
        let mut direct = 0.0;
        for p in 21..400usize {
            direct +=
                2f64.powi(p as i32) * k_coefficient(0, (p / 2) as i64 - 1) * 3f64.powi(p as i32);
        }
        assert!((a - direct).abs() <= 1e-12 * direct);
    }
}
