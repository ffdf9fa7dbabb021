//! Eigenvalues as real zeros of the truncated boundary series
//! `Σ c_p λ^p`, and eigen-profiles `T_λ = Σ t_p λ^p`.
//!
//! Positive eigenvalues are upstream modes (they decay as `z → -∞`),
//! negative ones are downstream modes.

use std::fmt::Write as _;

use nalgebra::{DMatrix, Schur};

use crate::closure::{build_closure, Closure, ClosureOptions, ClosureTable, DEFAULT_ORDER};
use crate::domain::{BoundaryKind, DomainSpec, Geometry};
use crate::error::{Error, Result};
use crate::logpoly::{LogPoly, PiecewiseLogPoly};
use crate::scalar::{Hp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeClass {
    Upstream,
    Downstream,
}

impl ModeClass {
    pub fn of(lambda: f64) -> Self {
        if lambda > 0.0 {
            ModeClass::Upstream
        } else {
            ModeClass::Downstream
        }
    }
    pub fn label(self) -> &'static str {
        match self {
            ModeClass::Upstream => "upstream",
            ModeClass::Downstream => "downstream",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootDiagnostics {
    /// `|Σ c_p λ^p| / max_p |c_p λ^p|` after polishing.
    pub polish_residual: f64,
    /// Relative move of the root when the series is truncated four orders lower.
    pub stability_gap: f64,
    /// Truncation error estimate `tail(|λ|) / |f'(λ)|`.
    pub error_estimate: f64,
    /// Imaginary part of the polished complex root.
    pub imag: f64,
    pub polished: bool,
    pub unstable: bool,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub n: u32,
    pub bc: BoundaryKind,
    pub eigenvalues: Vec<f64>,
    pub eigenvalues_hp: Vec<Hp>,
    pub diagnostics: Vec<RootDiagnostics>,
    pub order: usize,
    pub trust_radius: f64,
    /// Whether the truncation tail used for the trust radius is a proof.
    pub tail_rigorous: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchInterval {
    pub lambda_min: f64,
    /// `None` searches the whole trust disc.
    pub lambda_max: Option<f64>,
}

impl SearchInterval {
    pub fn trusted() -> Self {
        SearchInterval {
            lambda_min: 0.0,
            lambda_max: None,
        }
    }
    pub fn up_to(lambda_max: f64) -> Self {
        SearchInterval {
            lambda_min: 0.0,
            lambda_max: Some(lambda_max),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Trust criterion: tail below `trust * Σ |c_p λ^p|`.
    pub trust: f64,
    /// Relative imaginary part above which a polished root is complex.
    pub imag: f64,
    /// Relative move under truncation change above which a root is flagged.
    pub stability: f64,
    /// Maximum relative truncation error estimate for a reported root.
    pub certify: f64,
    /// Roots closer than this to zero belong to the kernel.
    pub zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            trust: 1e-12,
            imag: 1e-9,
            stability: 1e-9,
            certify: 1e-11,
            zero: 1e-8,
        }
    }
}

/// `(c_0, ..., c_P)`: boundary values (Dirichlet) or derivatives (Neumann).
pub fn series_polynomial(table: &ClosureTable<Hp>, bc: BoundaryKind) -> Vec<Hp> {
    match bc {
        BoundaryKind::Dirichlet => table.c_value.clone(),
        BoundaryKind::Neumann => table.c_deriv.clone(),
    }
}

fn horner(c: &[Hp], x: &Hp) -> (Hp, Hp) {
    let mut f = c.last().unwrap().zero_like();
    let mut d = f.clone();
    for cp in c.iter().rev() {
        d = d.mul(x).add(&f);
        f = f.mul(x).add(cp);
    }
    (f, d)
}

/// `Σ |c_p| λ^p` and `max_p |c_p λ^p|`.
fn magnitudes(c: &[Hp], lam: f64) -> (f64, f64) {
    let bits = c[0].bits();
    let x = Hp::from_f64(lam.abs(), bits);
    let mut pw = x.one_like();
    let mut sum = x.zero_like();
    let mut mx = x.zero_like();
    for cp in c {
        let t = cp.abs().mul(&pw);
        sum = sum.add(&t);
        if t.cmp_abs(&mx) == std::cmp::Ordering::Greater {
            mx = t;
        }
        pw = pw.mul(&x);
    }
    (sum.to_f64(), mx.to_f64())
}

fn tail_at(table: &ClosureTable<Hp>, bc: BoundaryKind, lam: f64, order: usize) -> f64 {
    let (v, d) = crate::closure::majorant_tail(
        &table.spec,
        table.n,
        table.planar_family,
        table.velocity_bound,
        lam.abs(),
        order,
    );
    match bc {
        BoundaryKind::Dirichlet => v,
        BoundaryKind::Neumann => d,
    }
}

/// Absolute truncation tail allowed inside the trust radius, per unit of
/// `R^n` (the size of the seed `r^n` at the wall).
pub const ABSOLUTE_TAIL: f64 = 1e-9;

/// Largest `|λ|` for which the truncation tail stays below `tol · Σ |c_p λ^p|`
/// and below [`ABSOLUTE_TAIL`] for both the wall value and the wall derivative
/// (the latter divided by `max(1, |λ|)`). The relative test alone lets the
/// absolute error grow with the cancellation in the sum.
pub fn trust_radius(table: &ClosureTable<Hp>, bc: BoundaryKind, tol: f64) -> f64 {
    let c = series_polynomial(table, bc);
    let unit = table
        .spec
        .outer_radius()
        .to_f64()
        .value()
        .max(1.0)
        .powi(table.n as i32);
    let ok = |lam: f64| {
        let (sum, _) = magnitudes(&c, lam);
        let tail = tail_at(table, bc, lam, table.order);
        let (v, d) = crate::closure::majorant_tail(
            &table.spec,
            table.n,
            table.planar_family,
            table.velocity_bound,
            lam,
            table.order,
        );
        let absolute = v.max(d / lam.max(1.0));
        tail.is_finite() && sum.is_finite() && tail < tol * sum && absolute < ABSOLUTE_TAIL * unit
    };
    let mut lo = 0.0;
    let mut hi = 0.05;
    while ok(hi) {
        lo = hi;
        hi *= 1.25;
        if hi > 1e4 {
            return lo;
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 * hi {
            break;
        }
    }
    lo
}

#[derive(Clone)]
struct Chp {
    re: Hp,
    im: Hp,
}

impl Chp {
    fn add(&self, o: &Chp) -> Chp {
        Chp {
            re: self.re.add(&o.re),
            im: self.im.add(&o.im),
        }
    }
    fn mul(&self, o: &Chp) -> Chp {
        Chp {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }
    fn div(&self, o: &Chp) -> Chp {
        let den = o.re.mul(&o.re).add(&o.im.mul(&o.im));
        let re = self.re.mul(&o.re).add(&self.im.mul(&o.im)).div(&den);
        let im = self.im.mul(&o.re).sub(&self.re.mul(&o.im)).div(&den);
        Chp { re, im }
    }
    fn sub(&self, o: &Chp) -> Chp {
        Chp {
            re: self.re.sub(&o.re),
            im: self.im.sub(&o.im),
        }
    }
    fn norm_f64(&self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }
}

fn horner_c(c: &[Hp], x: &Chp) -> (Chp, Chp) {
    let z = c[0].zero_like();
    let mut f = Chp {
        re: z.clone(),
        im: z.clone(),
    };
    let mut d = f.clone();
    for cp in c.iter().rev() {
        d = d.mul(x).add(&f);
        f = f.mul(x).add(&Chp {
            re: cp.clone(),
            im: z.clone(),
        });
    }
    (f, d)
}

/// Complex Newton iteration with step halving; `None` if it stalls.
fn polish_complex(c: &[Hp], re: f64, im: f64) -> Option<Chp> {
    let bits = c[0].bits();
    let mut x = Chp {
        re: Hp::from_f64(re, bits),
        im: Hp::from_f64(im, bits),
    };
    let (mut f, mut d) = horner_c(c, &x);
    let stop = 2f64.powi(-(bits as i32) + 24);
    for _ in 0..200 {
        if d.norm_f64() == 0.0 {
            return None;
        }
        let step = f.div(&d);
        let mut scale = Chp {
            re: x.re.one_like(),
            im: x.re.zero_like(),
        };
        let half = Chp {
            re: Hp::from_f64(0.5, bits),
            im: x.re.zero_like(),
        };
        let mut accepted = false;
        for _ in 0..30 {
            let cand = x.sub(&step.mul(&scale));
            let (fc, dc) = horner_c(c, &cand);
            if fc.norm_f64() < f.norm_f64() || fc.norm_f64() == 0.0 {
                x = cand;
                f = fc;
                d = dc;
                accepted = true;
                break;
            }
            scale = scale.mul(&half);
        }
        let size = x.norm_f64().max(1e-300);
        if !accepted || step.norm_f64() <= stop * size {
            return Some(x);
        }
    }
    Some(x)
}

/// Real Newton polishing on a given coefficient list.
fn polish_real(c: &[Hp], x0: &Hp) -> Option<Hp> {
    let bits = c[0].bits();
    let stop = 2f64.powi(-(bits as i32) + 24);
    let mut x = x0.clone();
    let (mut f, mut d) = horner(c, &x);
    for _ in 0..200 {
        if d.is_zero() {
            return None;
        }
        let step = f.div(&d);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = x.sub(&step.mul(&Hp::from_f64(scale, bits)));
            let (fc, dc) = horner(c, &cand);
            if fc.cmp_abs(&f) == std::cmp::Ordering::Less || fc.is_zero() {
                x = cand;
                f = fc;
                d = dc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || step.to_f64().abs() <= stop * x.to_f64().abs().max(1e-300) {
            return Some(x);
        }
    }
    None
}

/// Coefficients of `μ ↦ f(ρ (μ + δ))`, rounded to f64.
fn scaled_shifted(c: &[Hp], rho: f64, delta: f64) -> Vec<f64> {
    let bits = c[0].bits();
    let r = Hp::from_f64(rho, bits);
    let mut pw = r.one_like();
    let mut a: Vec<Hp> = c
        .iter()
        .map(|cp| {
            let v = cp.mul(&pw);
            pw = pw.mul(&r);
            v
        })
        .collect();
    if delta != 0.0 {
        // Taylor shift by repeated synthetic division
        let d = Hp::from_f64(delta, bits);
        let deg = a.len() - 1;
        for k in 0..deg {
            for j in (k..deg).rev() {
                let t = a[j + 1].mul(&d);
                a[j] = a[j].add(&t);
            }
        }
    }
    a.iter().map(|v| v.to_f64()).collect()
}

fn companion_eigenvalues(scaled: &[f64]) -> Option<Vec<(f64, f64)>> {
    let mx = scaled.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if mx == 0.0 {
        return Some(Vec::new());
    }
    let mut hi = scaled.len() - 1;
    while hi > 0 && scaled[hi].abs() < 1e-22 * mx {
        hi -= 1;
    }
    let mut lo = 0;
    while lo < hi && scaled[lo] == 0.0 {
        lo += 1;
    }
    let mut roots = vec![(0.0, 0.0); lo];
    let deg = hi - lo;
    if deg == 0 {
        return Some(roots);
    }
    let a: Vec<f64> = scaled[lo..=hi].iter().map(|v| v / scaled[hi]).collect();
    let mut m = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -a[i];
    }
    let s = Schur::try_new(m, 1e-15, 2_000)?;
    roots.extend(s.complex_eigenvalues().iter().map(|z| (z.re, z.im)));
    Some(roots)
}

/// Companion-matrix roots of `c` in units of `rho`. The variable is shifted
/// off the origin first: spectra symmetric under `λ → -λ` stall the QR sweep.
fn companion_roots(c: &[Hp], rho: f64) -> Vec<(f64, f64)> {
    for delta in [0.0137, -0.0291, 0.0523] {
        if let Some(roots) = companion_eigenvalues(&scaled_shifted(c, rho, delta)) {
            return roots
                .into_iter()
                .map(|(re, im)| ((re + delta) * rho, im * rho))
                .collect();
        }
    }
    Vec::new()
}

/// Zeros of the truncated series inside the trust radius.
pub fn find_eigenvalues(
    coeffs: &[Hp],
    table: &ClosureTable<Hp>,
    bc: BoundaryKind,
    search: SearchInterval,
    tol: Tolerances,
) -> Result<Spectrum> {
    let rho = trust_radius(table, bc, tol.trust);
    let upper = match search.lambda_max {
        Some(m) if m > rho => {
            return Err(Error::TrustRadiusTooSmall {
                requested: m,
                radius: rho,
            })
        }
        Some(m) => m,
        None => rho,
    };
    let bits = coeffs[0].bits();
    // roots at λ = 0 are divided out so they cannot mask small neighbours
    let lead = coeffs
        .iter()
        .take_while(|c| c.is_zero())
        .count()
        .min(coeffs.len() - 1);
    let work = &coeffs[lead..];
    let short: Vec<Hp> = work[..work.len().saturating_sub(4).max(1)].to_vec();

    let mut candidates: Vec<Hp> = Vec::new();
    let mut imag_of: Vec<f64> = Vec::new();
    for (re, im) in companion_roots(work, rho) {
        if (re * re + im * im).sqrt() > 1.05 * upper || re.abs() < 0.5 * tol.zero {
            continue;
        }
        if im.abs() > 0.05 * rho {
            continue;
        }
        let Some(z) = polish_complex(work, re, im) else {
            continue;
        };
        let (zr, zi) = (z.re.to_f64(), z.im.to_f64());
        if zi.abs() > tol.imag * zr.abs().max(1.0) {
            continue;
        }
        candidates.push(z.re);
        imag_of.push(zi);
    }
    // sign-change sweep as a safety net for roots the companion step missed
    let grid = 600;
    let mut prev: Option<(f64, Hp)> = None;
    for k in 0..=grid {
        let x = -upper + 2.0 * upper * k as f64 / grid as f64;
        let xh = Hp::from_f64(x, bits);
        let (f, _) = horner(work, &xh);
        if let Some((px, pf)) = &prev {
            if pf.to_f64().signum() * f.to_f64().signum() < 0.0 {
                let (a, b) = (*px, x);
                let known = candidates.iter().any(|c| {
                    let v = c.to_f64();
                    v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12
                });
                if !known {
                    if let Some(r) = bisect_then_newton(work, a, b) {
                        candidates.push(r);
                        imag_of.push(0.0);
                    }
                }
            }
        }
        prev = Some((x, f));
    }

    let mut found: Vec<(Hp, RootDiagnostics)> = Vec::new();
    for (cand, im) in candidates.into_iter().zip(imag_of) {
        let polished = polish_real(work, &cand);
        let ok = polished.is_some();
        let x = polished.unwrap_or(cand);
        let lam = x.to_f64();
        if lam.abs() < tol.zero || lam.abs() < search.lambda_min || lam.abs() >= upper {
            continue;
        }
        if found
            .iter()
            .any(|(y, _)| (y.to_f64() - lam).abs() <= 1e-13 * lam.abs())
        {
            continue;
        }
        let (f, d) = horner(coeffs, &x);
        let (_, mx) = magnitudes(coeffs, lam);
        let residual = if mx > 0.0 { f.to_f64().abs() / mx } else { 0.0 };
        let err = tail_at(table, bc, lam, table.order) / d.to_f64().abs();
        if !(err <= tol.certify * lam.abs().max(1.0)) {
            continue;
        }
        let gap = match polish_real(&short, &x) {
            Some(y) => (y.to_f64() - lam).abs() / lam.abs(),
            None => f64::INFINITY,
        };
        found.push((
            x,
            RootDiagnostics {
                polish_residual: residual,
                stability_gap: gap,
                error_estimate: err,
                imag: im,
                polished: ok,
                unstable: !(gap <= tol.stability),
            },
        ));
    }
    found.sort_by(|a, b| a.0.to_f64().partial_cmp(&b.0.to_f64()).unwrap());
    Ok(Spectrum {
        n: table.n,
        bc,
        eigenvalues: found.iter().map(|(x, _)| x.to_f64()).collect(),
        eigenvalues_hp: found.iter().map(|(x, _)| x.clone()).collect(),
        diagnostics: found.into_iter().map(|(_, d)| d).collect(),
        order: table.order,
        trust_radius: rho,
        tail_rigorous: table.tail_is_rigorous(),
    })
}

fn bisect_then_newton(c: &[Hp], a: f64, b: f64) -> Option<Hp> {
    let bits = c[0].bits();
    let (mut lo, mut hi) = (a, b);
    let flo = horner(c, &Hp::from_f64(lo, bits)).0.to_f64().signum();
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = horner(c, &Hp::from_f64(mid, bits)).0.to_f64().signum();
        if fm == flo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    polish_real(c, &Hp::from_f64(0.5 * (lo + hi), bits))
}

impl Spectrum {
    pub fn upstream(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .copied()
            .filter(|l| *l > 0.0)
            .collect()
    }
    pub fn downstream(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self
            .eigenvalues
            .iter()
            .copied()
            .filter(|l| *l < 0.0)
            .collect();
        d.reverse();
        d
    }

    /// CSV: `n,i,lambda,class,residual,stability_gap`, with `i` counting away
    /// from zero within each class.
    pub fn to_csv_rows(&self, out: &mut String) {
        let mut up = 0;
        let mut down = self.eigenvalues.iter().filter(|l| **l < 0.0).count();
        for (lam, d) in self.eigenvalues.iter().zip(&self.diagnostics) {
            let i = if *lam > 0.0 {
                up += 1;
                up
            } else {
                let i = down;
                down -= 1;
                i
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.n,
                i,
                crate::fmt_sci(*lam),
                ModeClass::of(*lam).label(),
                crate::fmt_sci(d.polish_residual),
                crate::fmt_sci(d.stability_gap)
            );
        }
    }
}

pub fn spectra_csv(list: &[Spectrum]) -> String {
    let mut out = String::from("n,i,lambda,class,residual,stability_gap\n");
    for s in list {
        s.to_csv_rows(&mut out);
    }
    out
}

#[derive(Debug, Clone)]
pub struct ModeDiagnostics {
    /// `max |Δ_n T + λ² T - λ (v/k) T| / max |T|` over the sample grid.
    pub ode_residual: f64,
    /// Largest relative jump of `T` across an interface.
    pub value_jump: f64,
    /// Largest relative jump of `k T'` across an interface.
    pub flux_jump: f64,
}

#[derive(Debug, Clone)]
pub struct EigenMode {
    pub lambda: f64,
    pub lambda_hp: Hp,
    pub n: u32,
    pub geometry: Geometry,
    pub profile: PiecewiseLogPoly<Hp>,
    pub diagnostics: Option<ModeDiagnostics>,
}

/// `Σ_p t_p λ^p` as a piecewise log-polynomial, with residual diagnostics on
/// `samples` points.
pub fn eigenmode(table: &ClosureTable<Hp>, lambda: &Hp, samples: usize) -> Result<EigenMode> {
    let rho = trust_radius(table, BoundaryKind::Dirichlet, 1e-12).max(trust_radius(
        table,
        BoundaryKind::Neumann,
        1e-12,
    ));
    eigenmode_within(table, lambda, rho, samples)
}

/// [`eigenmode`] with a precomputed trust radius; `samples = 0` skips the
/// diagnostics.
pub fn eigenmode_within(
    table: &ClosureTable<Hp>,
    lambda: &Hp,
    trust_radius: f64,
    samples: usize,
) -> Result<EigenMode> {
    let lam = lambda.to_f64();
    if lam != 0.0 && lam.abs() >= trust_radius {
        return Err(Error::TrustRadiusTooSmall {
            requested: lam.abs(),
            radius: trust_radius,
        });
    }
    let m = table.t[0].pieces.len();
    let mut pieces = Vec::with_capacity(m);
    for j in 0..m {
        let mut acc: LogPoly<Hp> = LogPoly::zero();
        for tp in table.t.iter().rev() {
            acc = acc.scale(lambda).add(&tp.pieces[j]);
        }
        pieces.push(acc);
    }
    let profile = PiecewiseLogPoly::new(table.t[0].breakpoints.clone(), pieces);
    let diagnostics = if samples > 0 {
        Some(mode_diagnostics(table, &profile, lambda, samples)?)
    } else {
        None
    };
    Ok(EigenMode {
        lambda: lam,
        lambda_hp: lambda.clone(),
        n: table.n,
        geometry: table.geometry,
        profile,
        diagnostics,
    })
}

fn mode_diagnostics(
    table: &ClosureTable<Hp>,
    profile: &PiecewiseLogPoly<Hp>,
    lambda: &Hp,
    samples: usize,
) -> Result<ModeDiagnostics> {
    let spec = &table.spec;
    let bits = lambda.bits();
    let lam2 = lambda.mul(lambda);
    let bp = &profile.breakpoints;
    let lo = bp[0].to_f64().value();
    let hi = bp.last().unwrap().to_f64().value();
    let mut residuals = Vec::new();
    for (j, piece) in profile.pieces.iter().enumerate() {
        let w: Vec<Hp> = spec.layers[j]
            .velocity_over_k()
            .iter()
            .map(|c| Hp::from_rbig(c, bits))
            .collect();
        let mut res = piece
            .laplacian(table.n, table.geometry)
            .add(&piece.scale(&lam2));
        if !w.is_empty() {
            res = res.sub(&piece.mul_poly(&w).scale(lambda));
        }
        residuals.push(res);
    }
    let mut max_t: f64 = 0.0;
    let mut max_r: f64 = 0.0;
    for i in 0..samples.max(2) {
        let mut x = lo + (hi - lo) * (i as f64 + 0.5) / samples.max(2) as f64;
        if table.geometry == Geometry::Cylindrical && x == 0.0 {
            x = 1e-3 * hi;
        }
        let j = profile.piece_index(x).ok_or(Error::OutOfDomain(x))?;
        let xh = Hp::from_f64(x, bits);
        max_t = max_t.max(profile.pieces[j].evaluate(&xh)?.to_f64().abs());
        max_r = max_r.max(residuals[j].evaluate(&xh)?.to_f64().abs());
    }
    let mut value_jump: f64 = 0.0;
    let mut flux_jump: f64 = 0.0;
    for i in 1..profile.pieces.len() {
        let (a, b) = profile.two_sided(i, false)?;
        value_jump = value_jump.max(a.sub(&b).to_f64().abs() / max_t.max(f64::MIN_POSITIVE));
        let (da, db) = profile.two_sided(i, true)?;
        let kl = spec.layers[i - 1].conductivity.to_f64().value();
        let kr = spec.layers[i].conductivity.to_f64().value();
        let fl = da.to_f64() * kl;
        let fr = db.to_f64() * kr;
        let scale = fl.abs().max(fr.abs()).max(max_t / (hi - lo));
        flux_jump = flux_jump.max(
            (da.mul(&Hp::from_f64(kl, bits))
                .sub(&db.mul(&Hp::from_f64(kr, bits))))
            .to_f64()
            .abs()
                / scale,
        );
    }
    Ok(ModeDiagnostics {
        ode_residual: max_r / max_t.max(f64::MIN_POSITIVE),
        value_jump,
        flux_jump,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// Fixed truncation order; `None` raises the order from the default until
    /// the trust radius covers `lambda_max`.
    pub order: Option<usize>,
    pub lambda_max: Option<f64>,
    pub max_order: usize,
    pub bits: usize,
    pub tol: Tolerances,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            order: None,
            lambda_max: None,
            max_order: 240,
            bits: 256,
            tol: Tolerances::default(),
        }
    }
}

/// Closure table and spectrum for one azimuthal index.
pub fn compute_spectrum(
    spec: &DomainSpec,
    bc: BoundaryKind,
    n: u32,
    opts: SpectrumOptions,
) -> Result<(ClosureTable<Hp>, Spectrum)> {
    let copts = ClosureOptions {
        bits: opts.bits,
        planar_family: bc,
        ..ClosureOptions::default()
    };
    let mut order = opts.order.unwrap_or(DEFAULT_ORDER);
    if let (None, Some(m)) = (opts.order, opts.lambda_max) {
        // the absolute part of the trust test needs no closure table
        let velocity = spec.velocity_bound();
        let unit = spec.outer_radius().to_f64().value().max(1.0).powi(n as i32);
        while order < opts.max_order {
            let (v, d) = crate::closure::majorant_tail(spec, n, bc, velocity, m * 1.001, order);
            if v.max(d / m.max(1.0)) < ABSOLUTE_TAIL * unit {
                break;
            }
            order = (order + 20).min(opts.max_order);
        }
    }
    loop {
        let closure = build_closure(spec, n, order, copts)?;
        let table = hp_table(&closure, opts.bits);
        let rho = trust_radius(&table, bc, opts.tol.trust);
        let enough = match (opts.order, opts.lambda_max) {
            (Some(_), _) | (None, None) => true,
            (None, Some(m)) => rho > m,
        };
        if enough || order >= opts.max_order {
            let search = match opts.lambda_max {
                Some(m) if m < rho => SearchInterval::up_to(m),
                _ => SearchInterval::trusted(),
            };
            let c = series_polynomial(&table, bc);
            let s = find_eigenvalues(&c, &table, bc, search, opts.tol)?;
            return Ok((table, s));
        }
        order = (order + 20).min(opts.max_order);
    }
}

fn hp_table(closure: &Closure, bits: usize) -> ClosureTable<Hp> {
    match closure {
        Closure::Exact(t) => t.to_hp(bits),
        Closure::Float(t) => t.clone(),
    }
}

/// Spectra for `n = 0..=n_max`, each limited to `count_per_n` roots per class.
pub fn full_spectrum(
    spec: &DomainSpec,
    bc: BoundaryKind,
    n_max: u32,
    count_per_n: usize,
    opts: SpectrumOptions,
) -> Result<Vec<(u32, Spectrum)>> {
    if spec.geometry == Geometry::Planar && n_max > 0 {
        return Err(Error::UnsupportedIndex(n_max));
    }
    let indices: Vec<u32> = (0..=n_max).collect();
    crate::par_map(&indices, |&n| {
        let (_, mut s) = compute_spectrum(spec, bc, n, opts)?;
        keep_per_class(&mut s, count_per_n);
        Ok((n, s))
    })
    .into_iter()
    .collect()
}

/// Keeps the `count` eigenvalues closest to zero in each class.
pub fn keep_per_class(s: &mut Spectrum, count: usize) {
    let up: Vec<f64> = s.upstream().into_iter().take(count).collect();
    let down: Vec<f64> = s.downstream().into_iter().take(count).collect();
    let keep: Vec<bool> = s
        .eigenvalues
        .iter()
        .map(|l| up.contains(l) || down.contains(l))
        .collect();
    let mut k = keep.iter();
    s.diagnostics.retain(|_| *k.next().unwrap());
    let mut k = keep.iter();
    s.eigenvalues_hp.retain(|_| *k.next().unwrap());
    let mut k = keep.iter();
    s.eigenvalues.retain(|_| *k.next().unwrap());
}

/// All `(n, λ)` pairs sorted by `λ`.
pub fn merged(list: &[(u32, Spectrum)]) -> Vec<(u32, f64)> {
    let mut all: Vec<(u32, f64)> = list
        .iter()
        .flat_map(|(n, s)| s.eigenvalues.iter().map(move |l| (*n, *l)))
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    all
}
