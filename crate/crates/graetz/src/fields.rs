//! Assembled temperature fields `T(x, z)` driven by a lateral wall source.
//!
//! Three families share one shape, a closed-form baseline plus a truncated
//! mode sum `Σ α_i c_i(z) T_i(x) e^{λ_i z}`:
//!
//! * prescribed wall temperature: baseline `g(z)`;
//! * prescribed wall flux with net axial flow `Q ≠ 0`: baseline `(P/Q) G(z)`;
//! * prescribed wall flux with `Q = 0`: baseline `a 𝒢(z) + G(z) (a T_0 + b)`.
//!
//! Upstream modes carry `c(z) = ∫_z^∞ g e^{-λξ}`, downstream ones
//! `c(z) = -∫_{-∞}^z g e^{-λξ}`, so the field vanishes far upstream.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::closure::ClosureTable;
use crate::domain::{BoundaryKind, BoundarySpec, DomainSpec, Geometry, SourceSpec};
use crate::error::{Error, Result};
use crate::logpoly::{LogPoly, PiecewiseLogPoly};
use crate::scalar::{Hp, RBig, Scalar};
use crate::spectrum::{
    compute_spectrum, eigenmode_within, keep_per_class, trust_radius, ModeClass, Spectrum,
    SpectrumOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    DirichletLateral,
    NeumannNonEquilibrated,
    NeumannEquilibrated,
}

impl Family {
    /// The family dictated by the boundary kind and the net flow.
    pub fn for_problem(spec: &DomainSpec, kind: BoundaryKind) -> Family {
        match kind {
            BoundaryKind::Dirichlet => Family::DirichletLateral,
            BoundaryKind::Neumann if spec.reduced_flux() == RBig::ZERO => {
                Family::NeumannEquilibrated
            }
            BoundaryKind::Neumann => Family::NeumannNonEquilibrated,
        }
    }
}

/// How eigen-profiles are scaled before the amplitude formulas are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `∫ k T² dΩ + λ^{-2} ∫ k |T'|² dΩ = 1`.
    #[default]
    Energy,
    /// Raw series profile, `T ~ r^n` at the axis (or the planar seed).
    Seed,
}

#[derive(Debug, Clone)]
pub struct KernelT0 {
    pub profile: PiecewiseLogPoly<Hp>,
    /// Same profile with rational coefficients when no logarithm had to be
    /// evaluated at an irrational point.
    pub exact: Option<PiecewiseLogPoly<RBig>>,
    pub gauge: &'static str,
}

const ZERO_MEAN: &str = "zero mean over the cross-section; odd whenever the velocity is odd";

fn weighted<S: Scalar>(p: &LogPoly<S>, geometry: Geometry) -> LogPoly<S> {
    match geometry {
        Geometry::Cylindrical => p.shift(1),
        Geometry::Planar => p.clone(),
    }
}

fn integrate<S: Scalar>(p: &LogPoly<S>, a: &RBig, b: &RBig, unit: &S) -> Result<S> {
    if p.is_zero() {
        Ok(unit.zero_like())
    } else {
        p.integral(a, b)
    }
}

fn eval_at<S: Scalar>(p: &LogPoly<S>, x: &RBig, unit: &S) -> Result<S> {
    p.evaluate(&unit.lift(x))
}

fn kernel_generic<S: Scalar>(spec: &DomainSpec, unit: &S) -> Result<PiecewiseLogPoly<S>> {
    let bp = spec.breakpoints();
    let mut flux = unit.zero_like();
    let mut start = unit.zero_like();
    let mut pieces = Vec::with_capacity(spec.layers.len());
    for (j, layer) in spec.layers.iter().enumerate() {
        let v: Vec<S> = layer.velocity.iter().map(|c| unit.lift(c)).collect();
        let vw = weighted(&LogPoly::from_poly(&v), spec.geometry);
        let cumulative = vw
            .antiderivative_from(&bp[j])?
            .add(&LogPoly::constant(flux.clone()));
        let inv_k = unit.lift(&(RBig::ONE / &layer.conductivity));
        let slope = match spec.geometry {
            Geometry::Cylindrical => cumulative.shift(-1),
            Geometry::Planar => cumulative,
        }
        .scale(&inv_k);
        let piece = slope
            .antiderivative_from(&bp[j])?
            .add(&LogPoly::constant(start.clone()))
            .with_origin_kept(&bp[j]);
        start = eval_at(&piece, &bp[j + 1], unit)?;
        flux = flux.add(&integrate(&vw, &bp[j], &bp[j + 1], unit)?);
        pieces.push(piece);
    }
    let mut mass = unit.zero_like();
    let mut volume = unit.zero_like();
    for (j, piece) in pieces.iter().enumerate() {
        mass = mass.add(&integrate(
            &weighted(piece, spec.geometry),
            &bp[j],
            &bp[j + 1],
            unit,
        )?);
        let one = weighted(&LogPoly::constant(unit.one_like()), spec.geometry);
        volume = volume.add(&integrate(&one, &bp[j], &bp[j + 1], unit)?);
    }
    let shift = LogPoly::constant(mass.div(&volume).neg());
    let pieces = pieces.into_iter().map(|p| p.add(&shift)).collect();
    Ok(PiecewiseLogPoly::new(bp, pieces))
}

trait KeepOrigin {
    fn with_origin_kept(self, a: &RBig) -> Self;
}

impl<S: Scalar> KeepOrigin for LogPoly<S> {
    fn with_origin_kept(self, a: &RBig) -> Self {
        if self.has_logs() {
            self
        } else {
            self.with_origin(a.clone())
        }
    }
}

/// Solution of `div(k ∇T_0) = v` with insulated walls, in the zero-mean gauge.
pub fn adiabatic_kernel(spec: &DomainSpec, bits: usize) -> Result<KernelT0> {
    if spec.reduced_flux() != RBig::ZERO {
        return Err(Error::NotEquilibrated(spec.total_flux()));
    }
    match kernel_generic(spec, &RBig::ONE) {
        Ok(exact) => Ok(KernelT0 {
            profile: exact.to_hp(bits),
            exact: Some(exact),
            gauge: ZERO_MEAN,
        }),
        Err(Error::Irrational) => {
            let profile = kernel_generic(spec, &Hp::from_i64(1, bits))?;
            Ok(KernelT0 {
                profile,
                exact: None,
                gauge: ZERO_MEAN,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct ExchangeConstants {
    pub a: f64,
    pub b: f64,
    pub exact: Option<(RBig, RBig)>,
}

fn exchange_generic<S: Scalar>(
    spec: &DomainSpec,
    kernel: &PiecewiseLogPoly<S>,
    unit: &S,
) -> Result<(S, S)> {
    let bp = spec.breakpoints();
    let mut denom = unit.zero_like();
    let mut energy = unit.zero_like();
    for (j, layer) in spec.layers.iter().enumerate() {
        let v: Vec<S> = layer.velocity.iter().map(|c| unit.lift(c)).collect();
        let k = unit.lift(&layer.conductivity);
        let t0 = &kernel.pieces[j];
        let vt = if v.is_empty() {
            LogPoly::zero()
        } else {
            t0.mul_poly(&v)
        };
        let kc = LogPoly::constant(k.clone());
        denom = denom.add(&integrate(
            &weighted(&vt.sub(&kc), spec.geometry),
            &bp[j],
            &bp[j + 1],
            unit,
        )?);
        let two_k = LogPoly::constant(k.mul_int(2));
        energy = energy.add(&integrate(
            &weighted(&two_k.sub(&vt).mul(t0), spec.geometry),
            &bp[j],
            &bp[j + 1],
            unit,
        )?);
    }
    if denom.is_zero() {
        return Err(Error::ZeroDenominator("∫(v T_0 - k)"));
    }
    let last = kernel.pieces.last().unwrap();
    let r = spec.outer_radius();
    Ok(match spec.geometry {
        Geometry::Cylindrical => {
            let rr = unit.lift(&r);
            let a = rr.div(&denom);
            let b = a
                .mul(&a)
                .div(&rr)
                .mul(&energy)
                .add(&a.mul(&eval_at(last, &r, unit)?));
            (a, b)
        }
        Geometry::Planar => {
            let a = unit.lift(&RBig::from(2)).div(&denom);
            let walls = eval_at(&kernel.pieces[0], &bp[0], unit)?.add(&eval_at(last, &r, unit)?);
            let b = a
                .mul(&a)
                .div_int(2)
                .mul(&energy)
                .add(&a.mul(&walls).div_int(2));
            (a, b)
        }
    })
}

/// Constants `a`, `b` of the equilibrated family.
pub fn exchange_constants(spec: &DomainSpec, kernel: &KernelT0) -> Result<ExchangeConstants> {
    if let Some(exact) = &kernel.exact {
        match exchange_generic(spec, exact, &RBig::ONE) {
            Ok((a, b)) => {
                return Ok(ExchangeConstants {
                    a: a.to_f64().value(),
                    b: b.to_f64().value(),
                    exact: Some((a, b)),
                });
            }
            Err(Error::Irrational) => {}
            Err(e) => return Err(e),
        }
    }
    let bits = kernel
        .profile
        .pieces
        .iter()
        .flat_map(|p| p.terms().map(|(_, c)| c.bits()))
        .next()
        .unwrap_or(256);
    let (a, b) = exchange_generic(spec, &kernel.profile, &Hp::from_i64(1, bits))?;
    Ok(ExchangeConstants {
        a: a.to_f64(),
        b: b.to_f64(),
        exact: None,
    })
}

/// Closed form of `c(z) e^{λz}` for the class of `lambda`.
///
/// With `derivative_source` the wall data `g` is replaced by `g'`, as needed
/// by the prescribed-temperature family.
pub fn weighted_convolution(
    source: &SourceSpec,
    lambda: f64,
    derivative_source: bool,
    z: f64,
) -> Result<f64> {
    if !(lambda != 0.0 && lambda.is_finite()) {
        return Err(Error::DivergentConvolution(lambda));
    }
    let SourceSpec::RaisedCosineWindow {
        amplitude,
        center,
        half_width,
    } = *source
    else {
        return Ok(0.0);
    };
    let w = PI / half_width;
    let den = lambda * lambda + w * w;
    let u = z - center;
    // antiderivative in the window variable of the integrand times e^{λ(z - ξ)}
    let prim = |s: f64| -> f64 {
        let e = (lambda * (u - s)).exp();
        let (c, sn) = ((w * s).cos(), (w * s).sin());
        if derivative_source {
            -amplitude * w * e * (-lambda * sn - w * c) / den
        } else {
            amplitude * e * (-1.0 / lambda + (-lambda * c + w * sn) / den)
        }
    };
    let h = half_width;
    if lambda > 0.0 {
        if u >= h {
            return Ok(0.0);
        }
        let lo = u.max(-h);
        Ok(prim(h) - prim(lo))
    } else {
        if u <= -h {
            return Ok(0.0);
        }
        let hi = u.min(h);
        Ok(-(prim(hi) - prim(-h)))
    }
}

/// `c(z)` itself; overflows for large `|λ z|`, prefer [`weighted_convolution`].
pub fn source_convolution(
    source: &SourceSpec,
    lambda: f64,
    derivative_source: bool,
    z: f64,
) -> Result<f64> {
    Ok(weighted_convolution(source, lambda, derivative_source, z)? * (-lambda * z).exp())
}

#[derive(Debug, Clone)]
pub struct FieldMode {
    pub lambda: f64,
    pub alpha: f64,
    pub class: ModeClass,
    pub profile: PiecewiseLogPoly<Hp>,
    /// `∫ k T dΩ` and `∫ v T dΩ` of the scaled profile.
    pub k_moment: f64,
    pub v_moment: f64,
    /// Factor applied to the raw series profile.
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub enum Baseline {
    Wall,
    Ratio {
        p_over_q: f64,
    },
    Equilibrated {
        a: f64,
        b: f64,
        kernel: KernelT0,
        k_moment: f64,
        v_moment: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SolutionField {
    pub family: Family,
    pub baseline: Baseline,
    pub modes: Vec<FieldMode>,
    pub source: SourceSpec,
    pub spec: DomainSpec,
    pub normalization: Normalization,
}

struct Moments {
    k: f64,
    v: f64,
    norm: f64,
}

fn moments(spec: &DomainSpec, profile: &PiecewiseLogPoly<Hp>, lambda: &Hp) -> Result<Moments> {
    let bits = lambda.bits();
    let unit = Hp::from_i64(1, bits);
    let bp = &profile.breakpoints;
    let mut k_m = unit.zero_like();
    let mut v_m = unit.zero_like();
    let mut norm = unit.zero_like();
    let inv_l2 = unit.div(&lambda.mul(lambda));
    for (j, layer) in spec.layers.iter().enumerate() {
        let t = &profile.pieces[j];
        let k = unit.lift(&layer.conductivity);
        let v: Vec<Hp> = layer.velocity.iter().map(|c| unit.lift(c)).collect();
        k_m = k_m.add(&integrate(&weighted(t, spec.geometry), &bp[j], &bp[j + 1], &unit)?.mul(&k));
        if !v.is_empty() {
            v_m = v_m.add(&integrate(
                &weighted(&t.mul_poly(&v), spec.geometry),
                &bp[j],
                &bp[j + 1],
                &unit,
            )?);
        }
        let d = t.differentiate();
        let dens = t.mul(t).add(&d.mul(&d).scale(&inv_l2));
        norm = norm
            .add(&integrate(&weighted(&dens, spec.geometry), &bp[j], &bp[j + 1], &unit)?.mul(&k));
    }
    let m = spec.measure_factor();
    Ok(Moments {
        k: m * k_m.to_f64(),
        v: m * v_m.to_f64(),
        norm: m * norm.to_f64(),
    })
}

fn amplitude(
    spec: &DomainSpec,
    kind: BoundaryKind,
    profile: &PiecewiseLogPoly<Hp>,
    lambda: f64,
) -> Result<f64> {
    let n = profile.pieces.len();
    let k_out = spec.layers[n - 1].conductivity.to_f64().value();
    let k_in = spec.layers[0].conductivity.to_f64().value();
    let r = spec.outer_radius().to_f64().value();
    let bits = profile.pieces[n - 1]
        .terms()
        .next()
        .map(|(_, c)| c.bits())
        .unwrap_or(256);
    let at = |j: usize, x: &RBig, d: bool| -> Result<f64> {
        let xh = Hp::from_rbig(x, bits);
        let p = &profile.pieces[j];
        Ok(if d {
            p.evaluate_derivative(&xh)?
        } else {
            p.evaluate(&xh)?
        }
        .to_f64())
    };
    let outer = spec.outer_radius();
    let inner = &profile.breakpoints[0];
    Ok(match (spec.geometry, kind) {
        (Geometry::Cylindrical, BoundaryKind::Dirichlet) => {
            -2.0 * PI * r * k_out * at(n - 1, &outer, true)? / (lambda * lambda)
        }
        (Geometry::Cylindrical, BoundaryKind::Neumann) => {
            2.0 * PI * r * at(n - 1, &outer, false)? / lambda
        }
        // outward normal derivative on both walls
        (Geometry::Planar, BoundaryKind::Dirichlet) => {
            -(k_out * at(n - 1, &outer, true)? - k_in * at(0, inner, true)?) / (lambda * lambda)
        }
        (Geometry::Planar, BoundaryKind::Neumann) => {
            (at(n - 1, &outer, false)? + at(0, inner, false)?) / lambda
        }
    })
}

/// Builds the field from an `n = 0` spectrum, keeping `mode_count` modes per class.
pub fn assemble(
    spec: &DomainSpec,
    boundary: &BoundarySpec,
    table: &ClosureTable<Hp>,
    spectrum: &Spectrum,
    mode_count: usize,
    family: Option<Family>,
    normalization: Normalization,
) -> Result<SolutionField> {
    let expected = Family::for_problem(spec, boundary.kind);
    if let Some(f) = family {
        if f != expected {
            return Err(Error::FamilyMismatch(format!(
                "{f:?} requested, configuration needs {expected:?}"
            )));
        }
    }
    if spectrum.n != 0 || table.n != 0 {
        return Err(Error::InvalidParameter(
            "fields are assembled from the n = 0 spectrum".into(),
        ));
    }
    if spectrum.bc != boundary.kind {
        return Err(Error::FamilyMismatch(format!(
            "spectrum computed for {:?} walls",
            spectrum.bc
        )));
    }
    let mut kept = spectrum.clone();
    keep_per_class(&mut kept, mode_count);
    let rho = trust_radius(table, spectrum.bc, 1e-12);
    let modes = crate::par_map(&kept.eigenvalues_hp, |lam| -> Result<FieldMode> {
        let mode = eigenmode_within(table, lam, rho.max(kept.trust_radius), 0)?;
        let mom = moments(spec, &mode.profile, lam)?;
        let scale = match normalization {
            Normalization::Energy => 1.0 / mom.norm.sqrt(),
            Normalization::Seed => 1.0,
        };
        let sh = Hp::from_f64(scale, lam.bits());
        let profile = PiecewiseLogPoly::new(
            mode.profile.breakpoints.clone(),
            mode.profile.pieces.iter().map(|p| p.scale(&sh)).collect(),
        );
        let lambda = lam.to_f64();
        let alpha = amplitude(spec, boundary.kind, &profile, lambda)?;
        Ok(FieldMode {
            lambda,
            alpha,
            class: ModeClass::of(lambda),
            profile,
            k_moment: mom.k * scale,
            v_moment: mom.v * scale,
            scale,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let baseline = match expected {
        Family::DirichletLateral => Baseline::Wall,
        Family::NeumannNonEquilibrated => Baseline::Ratio {
            p_over_q: spec.perimeter() / spec.total_flux(),
        },
        Family::NeumannEquilibrated => {
            let kernel = adiabatic_kernel(spec, table.bits)?;
            let ab = exchange_constants(spec, &kernel)?;
            let mom = kernel_moments(spec, &kernel)?;
            Baseline::Equilibrated {
                a: ab.a,
                b: ab.b,
                kernel,
                k_moment: mom.0,
                v_moment: mom.1,
            }
        }
    };
    Ok(SolutionField {
        family: expected,
        baseline,
        modes,
        source: boundary.source,
        spec: spec.clone(),
        normalization,
    })
}

fn kernel_moments(spec: &DomainSpec, kernel: &KernelT0) -> Result<(f64, f64)> {
    let bits = kernel
        .profile
        .pieces
        .iter()
        .flat_map(|p| p.terms().map(|(_, c)| c.bits()))
        .next()
        .unwrap_or(256);
    let unit = Hp::from_i64(1, bits);
    let bp = spec.breakpoints();
    let (mut km, mut vm) = (unit.zero_like(), unit.zero_like());
    for (j, layer) in spec.layers.iter().enumerate() {
        let t = &kernel.profile.pieces[j];
        let v: Vec<Hp> = layer.velocity.iter().map(|c| unit.lift(c)).collect();
        km = km.add(
            &integrate(&weighted(t, spec.geometry), &bp[j], &bp[j + 1], &unit)?
                .mul(&unit.lift(&layer.conductivity)),
        );
        if !v.is_empty() {
            vm = vm.add(&integrate(
                &weighted(&t.mul_poly(&v), spec.geometry),
                &bp[j],
                &bp[j + 1],
                &unit,
            )?);
        }
    }
    let m = spec.measure_factor();
    Ok((m * km.to_f64(), m * vm.to_f64()))
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub mode_count: usize,
    /// Largest `|λ|` included in the mode sum.
    pub lambda_max: f64,
    pub bits: usize,
    pub normalization: Normalization,
    pub order: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode_count: 40,
            lambda_max: 20.0,
            bits: 256,
            normalization: Normalization::Energy,
            order: None,
        }
    }
}

/// Spectrum plus assembly in one call.
pub fn solve(
    spec: &DomainSpec,
    boundary: &BoundarySpec,
    opts: SolveOptions,
) -> Result<SolutionField> {
    let sopts = SpectrumOptions {
        order: opts.order,
        lambda_max: Some(opts.lambda_max),
        bits: opts.bits,
        ..SpectrumOptions::default()
    };
    let (table, spectrum) = compute_spectrum(spec, boundary.kind, 0, sopts)?;
    assemble(
        spec,
        boundary,
        &table,
        &spectrum,
        opts.mode_count,
        None,
        opts.normalization,
    )
}

/// Mode profiles evaluated at fixed transverse stations, reused across `z`.
pub struct StationCache {
    pub stations: Vec<f64>,
    mode_values: Vec<Vec<f64>>,
    kernel_values: Vec<f64>,
}

impl SolutionField {
    fn derivative_source(&self) -> bool {
        self.family == Family::DirichletLateral
    }

    pub fn cache(&self, stations: &[f64]) -> Result<StationCache> {
        let mut mode_values = Vec::with_capacity(stations.len());
        let mut kernel_values = Vec::with_capacity(stations.len());
        for &x in stations {
            if self.spec.compartment_of(x).is_none() {
                return Err(Error::OutOfDomain(x));
            }
            let vals = self
                .modes
                .iter()
                .map(|m| m.profile.eval(x))
                .collect::<Result<Vec<_>>>()?;
            mode_values.push(vals);
            kernel_values.push(match &self.baseline {
                Baseline::Equilibrated { kernel, .. } => kernel.profile.eval(x)?,
                _ => 0.0,
            });
        }
        Ok(StationCache {
            stations: stations.to_vec(),
            mode_values,
            kernel_values,
        })
    }

    fn baseline_value(&self, kernel_value: f64, z: f64) -> f64 {
        let s = &self.source;
        match &self.baseline {
            Baseline::Wall => s.value(z),
            Baseline::Ratio { p_over_q } => p_over_q * s.primitive(z),
            Baseline::Equilibrated { a, b, .. } => {
                a * s.second_primitive(z) + s.primitive(z) * (a * kernel_value + b)
            }
        }
    }

    fn value_cached(&self, cache: &StationCache, i: usize, z: f64) -> Result<f64> {
        let mut t = self.baseline_value(cache.kernel_values[i], z);
        let ds = self.derivative_source();
        for (m, tv) in self.modes.iter().zip(&cache.mode_values[i]) {
            t += m.alpha * weighted_convolution(&self.source, m.lambda, ds, z)? * tv;
        }
        Ok(t)
    }

    /// `T(stations[i], z)` for a cache built by [`SolutionField::cache`].
    pub fn evaluate_cached(&self, cache: &StationCache, i: usize, z: f64) -> Result<f64> {
        self.value_cached(cache, i, z)
    }

    pub fn evaluate(&self, x: f64, z: f64) -> Result<f64> {
        let cache = self.cache(&[x])?;
        self.value_cached(&cache, 0, z)
    }

    /// Rows of `(z, T(x_1, z), ..., T(x_m, z))`.
    pub fn profile(&self, stations: &[f64], zs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let cache = self.cache(stations)?;
        zs.iter()
            .map(|&z| {
                let mut row = vec![z];
                for i in 0..stations.len() {
                    row.push(self.value_cached(&cache, i, z)?);
                }
                Ok(row)
            })
            .collect()
    }

    /// Cross-section heat flux `∫ (v T - k ∂_z T) dΩ` at `z`.
    pub fn flux(&self, z: f64) -> Result<f64> {
        let s = &self.source;
        let (g, dg) = (s.value(z), s.derivative(z));
        let q = self.spec.total_flux();
        let k_total = self.conduction_area();
        let mut f = match &self.baseline {
            Baseline::Wall => g * q - dg * k_total,
            Baseline::Ratio { p_over_q } => p_over_q * (q * s.primitive(z) - k_total * g),
            Baseline::Equilibrated {
                a,
                b,
                k_moment,
                v_moment,
                ..
            } => {
                let big_g = s.primitive(z);
                big_g * (a * v_moment + b * q) + a * s.second_primitive(z) * q
                    - (a * big_g * k_total + g * (a * k_moment + b * k_total))
            }
        };
        let ds = self.derivative_source();
        let forcing = if ds { dg } else { g };
        for m in &self.modes {
            let e = weighted_convolution(s, m.lambda, ds, z)?;
            f += m.alpha * (e * (m.v_moment - m.lambda * m.k_moment) + forcing * m.k_moment);
        }
        Ok(f)
    }

    /// `∫ k dΩ`.
    pub fn conduction_area(&self) -> f64 {
        let bp = self.spec.breakpoints();
        let mut total = RBig::ZERO;
        for (j, layer) in self.spec.layers.iter().enumerate() {
            let (a, b) = (&bp[j], &bp[j + 1]);
            let len = match self.spec.geometry {
                Geometry::Cylindrical => (b * b - a * a) / RBig::from(2),
                Geometry::Planar => b - a,
            };
            total += &layer.conductivity * len;
        }
        self.spec.measure_factor() * total.to_f64().value()
    }

    /// Far-field values `(T(-∞), T(+∞))`; `None` where the field grows linearly.
    pub fn plateaus(&self) -> (f64, Option<f64>) {
        match &self.baseline {
            Baseline::Wall => (0.0, Some(0.0)),
            Baseline::Ratio { p_over_q } => (0.0, Some(p_over_q * self.source.total())),
            Baseline::Equilibrated { a, .. } => {
                let total = self.source.total();
                (
                    0.0,
                    if *a == 0.0 || total == 0.0 {
                        Some(0.0)
                    } else {
                        None
                    },
                )
            }
        }
    }

    pub fn min_downstream_rate(&self) -> Option<f64> {
        self.modes
            .iter()
            .filter(|m| m.lambda < 0.0)
            .map(|m| -m.lambda)
            .reduce(f64::min)
    }

    pub fn min_upstream_rate(&self) -> Option<f64> {
        self.modes
            .iter()
            .filter(|m| m.lambda > 0.0)
            .map(|m| m.lambda)
            .reduce(f64::min)
    }

    /// Heat balance `dF/dz = perimeter · g` checked with central differences
    /// of step `h` at every grid point; returns the largest mismatch relative
    /// to `max |perimeter · g|`.
    pub fn balance_defect(&self, zs: &[f64], h: f64) -> Result<f64> {
        let per = self.spec.perimeter();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &z in zs {
            let d = (self.flux(z + h)? - self.flux(z - h)?) / (2.0 * h);
            let target = per * self.source.value(z);
            worst = worst.max((d - target).abs());
            scale = scale.max(target.abs());
        }
        Ok(if scale > 0.0 { worst / scale } else { worst })
    }

    /// Cumulative form: `F(z) - perimeter · G(z)` relative to `perimeter · ∫g`.
    pub fn cumulative_balance_defect(&self, zs: &[f64]) -> Result<f64> {
        let per = self.spec.perimeter();
        let scale = (per * self.source.total()).abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for &z in zs {
            worst = worst.max((self.flux(z)? - per * self.source.primitive(z)).abs());
        }
        Ok(worst / scale)
    }
}

/// Default balance grid: 400 points over `[z0 - 5, z0 + 5/min|λ|]`.
pub fn balance_grid(field: &SolutionField) -> Vec<f64> {
    let z0 = match field.source {
        SourceSpec::RaisedCosineWindow { center, .. } => center,
        SourceSpec::Zero => 0.0,
    };
    let rate = field
        .modes
        .iter()
        .map(|m| m.lambda.abs())
        .reduce(f64::min)
        .unwrap_or(1.0);
    linspace(z0 - 5.0, z0 + 5.0 / rate, 400)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Default stations `{0, r_0/2, r_0, (r_0 + R)/2, R}` with `r_0` the first
/// interface (planar: the same fractions of `[-R, R]` measured from the centre).
pub fn default_stations(spec: &DomainSpec) -> Vec<f64> {
    let r = spec.outer_radius().to_f64().value();
    let r0 = match spec.geometry {
        Geometry::Cylindrical => spec.interfaces[0].to_f64().value(),
        Geometry::Planar => spec
            .interfaces
            .iter()
            .map(|x| x.to_f64().value())
            .find(|x| *x > 0.0)
            .unwrap_or(r),
    };
    vec![0.0, 0.5 * r0, r0, 0.5 * (r0 + r), r]
}

pub fn profile_csv(stations: &[f64], rows: &[Vec<f64>]) -> String {
    let mut out = String::from("z");
    for s in stations {
        let _ = write!(out, ",T@{}", crate::fmt_sci(*s));
    }
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| crate::fmt_sci(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct FieldSummary {
    pub upstream_plateau: f64,
    pub downstream_plateau: Option<f64>,
    /// Largest wall value on the scan grid and its location.
    pub hot_spot: (f64, f64),
    pub modes: usize,
}

pub fn summarize(field: &SolutionField, zs: &[f64]) -> Result<FieldSummary> {
    let r = field.spec.outer_radius().to_f64().value();
    let rows = field.profile(&[r], zs)?;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for row in &rows {
        if row[1] > best.1 {
            best = (row[0], row[1]);
        }
    }
    let (up, down) = field.plateaus();
    Ok(FieldSummary {
        upstream_plateau: up,
        downstream_plateau: down,
        hot_spot: best,
        modes: field.modes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{builtin, Builtin};

    fn r(s: &str) -> RBig {
        crate::scalar::parse_rational(s).unwrap()
    }

    #[test]
    fn double_pass_constants_are_exact() {
        for pe in ["1/10", "1", "10", "50"] {
            let b = Builtin::DoublePass {
                pe: r(pe),
                x0: r("1"),
                r: r("2"),
            };
            let (spec, _) = builtin(&b).unwrap();
            let k = adiabatic_kernel(&spec, 128).unwrap();
            let ab = exchange_constants(&spec, &k).unwrap();
            let (a, b) = ab.exact.unwrap();
            let pe = r(pe);
            let want = RBig::from(-35) / (RBig::from(13) * &pe * &pe + RBig::from(70));
            assert_eq!(a, want);
            assert_eq!(b, RBig::ZERO);
        }
    }

    #[test]
    fn pure_conduction_plate_kernel_is_constant() {
        let spec = DomainSpec {
            geometry: Geometry::Planar,
            interfaces: vec![r("-3"), r("3")],
            layers: vec![crate::domain::LayerSpec::solid(RBig::ONE)],
        };
        let k = adiabatic_kernel(&spec, 128).unwrap();
        assert!(k.exact.as_ref().unwrap().pieces[0].is_zero());
        let ab = exchange_constants(&spec, &k).unwrap();
        assert_eq!(ab.exact.unwrap().0, RBig::from(-1) / RBig::from(3));
    }

    #[test]
    fn kernel_rejects_net_flow() {
        let (spec, _) = builtin(&Builtin::heated_pipe(1.0).unwrap()).unwrap();
        assert!(matches!(
            adiabatic_kernel(&spec, 128),
            Err(Error::NotEquilibrated(_))
        ));
    }

    #[test]
    fn convolutions_match_quadrature() {
        let src = SourceSpec::unit_window(0.5);
        for &lam in &[1.7, -0.4, 3.0, -2.2] {
            for &z in &[-1.0, 0.2, 0.5, 0.93, 2.0] {
                for ds in [false, true] {
                    let f = |xi: f64| if ds { src.derivative(xi) } else { src.value(xi) } * (lam * (z - xi)).exp();
                    let (a, b, sign) = if lam > 0.0 {
                        (z.max(0.0), 1.0, 1.0)
                    } else {
                        (0.0, z.min(1.0), -1.0)
                    };
                    let mut q = 0.0;
                    if b > a {
                        let m = 4000;
                        let hh = (b - a) / m as f64;
                        for i in 0..m {
                            let x = a + (i as f64 + 0.5) * hh;
                            q += f(x) * hh;
                        }
                    }
                    let c = weighted_convolution(&src, lam, ds, z).unwrap();
                    assert!(
                        (c - sign * q).abs() < 1e-6,
                        "{lam} {z} {ds}: {c} vs {}",
                        sign * q
                    );
                }
            }
        }
        assert!(matches!(
            weighted_convolution(&src, 0.0, false, 0.0),
            Err(Error::DivergentConvolution(_))
        ));
    }

    #[test]
    fn downstream_convolution_is_constant_past_window() {
        let src = SourceSpec::unit_window(0.5);
        let lam = -1.3;
        let c1 = source_convolution(&src, lam, false, 1.5).unwrap();
        let c2 = source_convolution(&src, lam, false, 3.0).unwrap();
        assert!((c1 - c2).abs() < 1e-12 * c1.abs());
    }
}
