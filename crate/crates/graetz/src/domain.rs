//! Layered duct geometry, per-layer properties, lateral boundary data and the
//! two built-in configurations.
//!
//! All geometric and material numbers are exact rationals so that the closure
//! recursion can run in exact arithmetic. Decimal input is converted exactly
//! (`0.1` becomes `1/10`).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Deserialize;

use crate::error::{Error, Result, Violation};
use crate::scalar::{parse_rational, rational_from_f64, RBig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Cylindrical,
    Planar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub conductivity: RBig,
    /// Velocity polynomial coefficients, lowest power first. Empty means solid.
    pub velocity: Vec<RBig>,
}

impl LayerSpec {
    pub fn solid(conductivity: RBig) -> Self {
        LayerSpec {
            conductivity,
            velocity: Vec::new(),
        }
    }

    pub fn is_solid(&self) -> bool {
        self.velocity.iter().all(|c| *c == RBig::ZERO)
    }

    /// Coefficients of `v / k`.
    pub fn velocity_over_k(&self) -> Vec<RBig> {
        self.velocity
            .iter()
            .map(|c| c / &self.conductivity)
            .collect()
    }
}

/// Cylindrical interfaces are `r_1 < ... < r_m = R` (the axis is implicit);
/// planar interfaces are `-R = x_0 < x_1 < ... < x_m = R`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub geometry: Geometry,
    pub interfaces: Vec<RBig>,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    Zero,
    /// `amplitude * (1 + cos(pi (z - center) / half_width))` on the window
    /// `[center - half_width, center + half_width]`, zero outside. This is the
    /// continuous bump peaking at `center`; with `half_width = 1/2` it equals
    /// `1 - cos(2 pi (z - (center - 1/2)))`.
    RaisedCosineWindow {
        amplitude: f64,
        center: f64,
        half_width: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub source: SourceSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    HeatedPipe { pe: RBig },
    DoublePass { pe: RBig, x0: RBig, r: RBig },
}

impl DomainSpec {
    /// Compartment boundaries: `[0, r_1, ..., R]` or `[-R, ..., R]`.
    pub fn breakpoints(&self) -> Vec<RBig> {
        match self.geometry {
            Geometry::Cylindrical => {
                let mut b = vec![RBig::ZERO];
                b.extend(self.interfaces.iter().cloned());
                b
            }
            Geometry::Planar => self.interfaces.clone(),
        }
    }

    pub fn compartments(&self) -> usize {
        self.layers.len()
    }

    pub fn outer_radius(&self) -> RBig {
        self.interfaces.last().cloned().unwrap_or(RBig::ZERO)
    }

    /// Inner wall coordinate: `0` (axis) or `-R`.
    pub fn inner_end(&self) -> RBig {
        match self.geometry {
            Geometry::Cylindrical => RBig::ZERO,
            Geometry::Planar => self.interfaces.first().cloned().unwrap_or(RBig::ZERO),
        }
    }

    pub fn compartment_of(&self, x: f64) -> Option<usize> {
        let b = self.breakpoints();
        let lo = b.first()?.to_f64().value();
        let hi = b.last()?.to_f64().value();
        let tol = 1e-12 * (1.0 + hi.abs());
        if x < lo - tol || x > hi + tol {
            return None;
        }
        for j in 0..self.layers.len() {
            if x <= b[j + 1].to_f64().value() {
                return Some(j);
            }
        }
        Some(self.layers.len() - 1)
    }

    /// `2 pi` for cylinders (axisymmetric measure `2 pi r dr`), `1` for plates.
    pub fn measure_factor(&self) -> f64 {
        match self.geometry {
            Geometry::Cylindrical => 2.0 * PI,
            Geometry::Planar => 1.0,
        }
    }

    /// Heated boundary length per unit depth: `2 pi R` or two walls.
    pub fn perimeter(&self) -> f64 {
        match self.geometry {
            Geometry::Cylindrical => 2.0 * PI * self.outer_radius().to_f64().value(),
            Geometry::Planar => 2.0,
        }
    }

    /// `∫ v w dx` with `w = r` (cylindrical) or `1` (planar); multiply by
    /// [`Self::measure_factor`] to obtain the total convective flux.
    pub fn reduced_flux(&self) -> RBig {
        let weight_shift = match self.geometry {
            Geometry::Cylindrical => 1,
            Geometry::Planar => 0,
        };
        let b = self.breakpoints();
        let mut total = RBig::ZERO;
        for (j, layer) in self.layers.iter().enumerate() {
            for (p, c) in layer.velocity.iter().enumerate() {
                let e = p + weight_shift + 1;
                let hi = pow_r(&b[j + 1], e);
                let lo = pow_r(&b[j], e);
                total += c * (hi - lo) / RBig::from(e as u64);
            }
        }
        total
    }

    pub fn total_flux(&self) -> f64 {
        self.measure_factor() * self.reduced_flux().to_f64().value()
    }

    /// `sup |v/k|` over the domain, bounded below by one.
    pub fn velocity_bound(&self) -> f64 {
        let b = self.breakpoints();
        let mut m: f64 = 1.0;
        for (j, layer) in self.layers.iter().enumerate() {
            let w: Vec<f64> = layer
                .velocity_over_k()
                .iter()
                .map(|c| c.to_f64().value())
                .collect();
            if w.is_empty() {
                continue;
            }
            let lo = b[j].to_f64().value();
            let hi = b[j + 1].to_f64().value();
            // sampled maximum plus a derivative-based cover of the gaps
            let samples = 512;
            let h = (hi - lo) / samples as f64;
            let dw: f64 = w
                .iter()
                .enumerate()
                .skip(1)
                .map(|(p, c)| (p as f64) * c.abs() * lo.abs().max(hi.abs()).powi(p as i32 - 1))
                .sum();
            for i in 0..=samples {
                let x = lo + h * i as f64;
                let val: f64 = w.iter().rev().fold(0.0, |acc, c| acc * x + c);
                m = m.max(val.abs() + 0.5 * h * dw);
            }
        }
        m
    }

    pub fn uniform_conductivity(&self) -> bool {
        self.layers
            .windows(2)
            .all(|w| w[0].conductivity == w[1].conductivity)
    }

    pub fn velocity_at(&self, x: f64) -> f64 {
        match self.compartment_of(x) {
            Some(j) => self.layers[j]
                .velocity
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * x + c.to_f64().value()),
            None => 0.0,
        }
    }

    pub fn conductivity_at(&self, x: f64) -> f64 {
        match self.compartment_of(x) {
            Some(j) => self.layers[j].conductivity.to_f64().value(),
            None => f64::NAN,
        }
    }
}

fn pow_r(x: &RBig, e: usize) -> RBig {
    let mut acc = RBig::ONE;
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Returns the domain unchanged when every invariant holds.
pub fn validate(spec: DomainSpec) -> Result<DomainSpec> {
    let mut v = Vec::new();
    if spec.layers.is_empty() || spec.interfaces.is_empty() {
        v.push(Violation::EmptyDomain);
        return Err(Error::InvalidDomain(v));
    }
    if spec.interfaces.windows(2).any(|w| w[0] >= w[1]) {
        v.push(Violation::NonIncreasingInterfaces);
    }
    match spec.geometry {
        Geometry::Cylindrical => {
            if spec.interfaces[0] <= RBig::ZERO {
                v.push(Violation::BadOuterCoordinates);
            }
        }
        Geometry::Planar => {
            let first = &spec.interfaces[0];
            let last = spec.interfaces.last().unwrap();
            if spec.interfaces.len() < 2 || *first != -last || *last <= RBig::ZERO {
                v.push(Violation::BadOuterCoordinates);
            }
        }
    }
    let compartments = match spec.geometry {
        Geometry::Cylindrical => spec.interfaces.len(),
        Geometry::Planar => spec.interfaces.len().saturating_sub(1),
    };
    if compartments != spec.layers.len() {
        v.push(Violation::LayerCountMismatch {
            layers: spec.layers.len(),
            compartments,
        });
    }
    for (j, layer) in spec.layers.iter().enumerate() {
        if layer.conductivity <= RBig::ZERO {
            v.push(Violation::NonPositiveConductivity { layer: j });
        }
    }
    if v.is_empty() {
        Ok(spec)
    } else {
        Err(Error::InvalidDomain(v))
    }
}

/// The heated pipe (cylindrical, Neumann) and the double-pass exchanger
/// (planar, equilibrated, Neumann).
pub fn builtin(name: &Builtin) -> Result<(DomainSpec, BoundarySpec)> {
    let zero = RBig::ZERO;
    match name {
        Builtin::HeatedPipe { pe } => {
            if *pe <= zero {
                return Err(Error::InvalidParameter("Pe must be positive".into()));
            }
            let one = RBig::ONE;
            let fluid = LayerSpec {
                conductivity: one.clone(),
                velocity: vec![pe.clone(), zero.clone(), -pe],
            };
            let spec = DomainSpec {
                geometry: Geometry::Cylindrical,
                interfaces: vec![RBig::ONE, RBig::from(2u8)],
                layers: vec![fluid, LayerSpec::solid(one)],
            };
            let bc = BoundarySpec {
                kind: BoundaryKind::Neumann,
                source: SourceSpec::RaisedCosineWindow {
                    amplitude: 1.0,
                    center: 0.5,
                    half_width: 0.5,
                },
            };
            Ok((validate(spec)?, bc))
        }
        Builtin::DoublePass { pe, x0, r } => {
            if *pe <= zero || *x0 <= zero || x0 >= r {
                return Err(Error::InvalidParameter("need Pe > 0 and 0 < x0 < R".into()));
            }
            let six_pe = RBig::from(6u8) * pe;
            let lin = &six_pe / x0;
            let quad = &six_pe / (x0 * x0);
            let one = RBig::ONE;
            let upper = LayerSpec {
                conductivity: one.clone(),
                velocity: vec![zero.clone(), lin.clone(), -&quad],
            };
            let lower = LayerSpec {
                conductivity: one.clone(),
                velocity: vec![zero.clone(), lin, quad],
            };
            let spec = DomainSpec {
                geometry: Geometry::Planar,
                interfaces: vec![-r, -x0, zero.clone(), x0.clone(), r.clone()],
                layers: vec![
                    LayerSpec::solid(one.clone()),
                    lower,
                    upper,
                    LayerSpec::solid(one),
                ],
            };
            let bc = BoundarySpec {
                kind: BoundaryKind::Neumann,
                source: SourceSpec::RaisedCosineWindow {
                    amplitude: 1.0,
                    center: 0.0,
                    half_width: 0.5,
                },
            };
            Ok((validate(spec)?, bc))
        }
    }
}

impl Builtin {
    pub fn heated_pipe(pe: f64) -> Result<Builtin> {
        Ok(Builtin::HeatedPipe { pe: num(pe)? })
    }
    pub fn double_pass(pe: f64, x0: f64, r: f64) -> Result<Builtin> {
        Ok(Builtin::DoublePass {
            pe: num(pe)?,
            x0: num(x0)?,
            r: num(r)?,
        })
    }

    /// Parses `heated-pipe[:pe=V]` or `double-pass[:pe=V,x0=V,r=V]`.
    pub fn parse(s: &str) -> Result<Builtin> {
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h, a),
            None => (s, ""),
        };
        let mut kv = BTreeMap::new();
        for part in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::Config(format!("expected key=value in builtin argument '{part}'"))
            })?;
            let v = parse_rational(v).ok_or_else(|| Error::Config(format!("bad number '{v}'")))?;
            kv.insert(k.trim().to_ascii_lowercase(), v);
        }
        let mut take =
            |key: &str, default: u32| kv.remove(key).unwrap_or_else(|| RBig::from(default));
        let b = match head.trim().to_ascii_lowercase().as_str() {
            "heated-pipe" | "heatedpipe" => Builtin::HeatedPipe { pe: take("pe", 1) },
            "double-pass" | "doublepass" => Builtin::DoublePass {
                pe: take("pe", 1),
                x0: take("x0", 1),
                r: take("r", 2),
            },
            other => return Err(Error::Config(format!("unknown builtin '{other}'"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(Error::Config(format!("unknown builtin parameter '{k}'")));
        }
        Ok(b)
    }
}

fn num(x: f64) -> Result<RBig> {
    rational_from_f64(x).ok_or_else(|| Error::InvalidParameter(format!("not a finite number: {x}")))
}

impl SourceSpec {
    pub fn unit_window(center: f64) -> Self {
        SourceSpec::RaisedCosineWindow {
            amplitude: 1.0,
            center,
            half_width: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceSpec::Zero => Ok(()),
            SourceSpec::RaisedCosineWindow {
                amplitude,
                center,
                half_width,
            } => {
                if !(half_width > 0.0) || !amplitude.is_finite() || !center.is_finite() {
                    Err(Error::InvalidParameter(
                        "raised cosine needs finite data and half_width > 0".into(),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Support `[lo, hi]`, or `None` for the zero source.
    pub fn window(&self) -> Option<(f64, f64)> {
        match *self {
            SourceSpec::Zero => None,
            SourceSpec::RaisedCosineWindow {
                center, half_width, ..
            } => Some((center - half_width, center + half_width)),
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        match *self {
            SourceSpec::Zero => 0.0,
            SourceSpec::RaisedCosineWindow {
                amplitude,
                center,
                half_width,
            } => {
                let u = z - center;
                if u.abs() > half_width {
                    0.0
                } else {
                    amplitude * (1.0 + (PI * u / half_width).cos())
                }
            }
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            SourceSpec::Zero => 0.0,
            SourceSpec::RaisedCosineWindow {
                amplitude,
                center,
                half_width,
            } => {
                let u = z - center;
                if u.abs() > half_width {
                    0.0
                } else {
                    let w = PI / half_width;
                    -amplitude * w * (w * u).sin()
                }
            }
        }
    }

    /// `∫ g` over the whole line.
    pub fn total(&self) -> f64 {
        match *self {
            SourceSpec::Zero => 0.0,
            SourceSpec::RaisedCosineWindow {
                amplitude,
                half_width,
                ..
            } => 2.0 * amplitude * half_width,
        }
    }

    /// `G(z) = ∫_{-∞}^z g`.
    pub fn primitive(&self, z: f64) -> f64 {
        match *self {
            SourceSpec::Zero => 0.0,
            SourceSpec::RaisedCosineWindow {
                amplitude,
                center,
                half_width,
            } => {
                let u = z - center;
                let w = PI / half_width;
                if u <= -half_width {
                    0.0
                } else if u >= half_width {
                    self.total()
                } else {
                    amplitude * (u + half_width + (w * u).sin() / w)
                }
            }
        }
    }

    /// Second primitive `∫_{-∞}^z G`.
    pub fn second_primitive(&self, z: f64) -> f64 {
        match *self {
            SourceSpec::Zero => 0.0,
            SourceSpec::RaisedCosineWindow {
                amplitude,
                center,
                half_width,
            } => {
                let w = PI / half_width;
                let inner = |u: f64| {
                    amplitude * (0.5 * (u + half_width).powi(2) - ((w * u).cos() + 1.0) / (w * w))
                };
                let u = z - center;
                if u <= -half_width {
                    0.0
                } else if u <= half_width {
                    inner(u)
                } else {
                    inner(half_width) + self.total() * (u - half_width)
                }
            }
        }
    }
}

// ----- configuration file -----

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    fn rational(&self) -> Result<RBig> {
        match self {
            Num::Int(i) => Ok(RBig::from(*i)),
            Num::Float(f) => num(*f),
            Num::Text(s) => {
                parse_rational(s).ok_or_else(|| Error::Config(format!("bad number '{s}'")))
            }
        }
    }
    fn float(&self) -> Result<f64> {
        Ok(self.rational()?.to_f64().value())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    conductivity: Num,
    #[serde(default)]
    velocity: Vec<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceFile {
    kind: String,
    #[serde(default)]
    amplitude: Option<Num>,
    #[serde(default)]
    center: Option<Num>,
    #[serde(default)]
    half_width: Option<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    geometry: String,
    interfaces: Vec<Num>,
    #[serde(rename = "layer")]
    layers: Vec<LayerFile>,
    boundary: String,
    source: Option<SourceFile>,
}

/// Parses the TOML configuration format documented in the README.
pub fn parse_config(text: &str) -> Result<(DomainSpec, BoundarySpec)> {
    let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let geometry = match cfg.geometry.to_ascii_lowercase().as_str() {
        "cylindrical" => Geometry::Cylindrical,
        "planar" => Geometry::Planar,
        g => return Err(Error::Config(format!("unknown geometry '{g}'"))),
    };
    let interfaces = cfg
        .interfaces
        .iter()
        .map(Num::rational)
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::new();
    for l in &cfg.layers {
        layers.push(LayerSpec {
            conductivity: l.conductivity.rational()?,
            velocity: l
                .velocity
                .iter()
                .map(Num::rational)
                .collect::<Result<Vec<_>>>()?,
        });
    }
    let kind = match cfg.boundary.to_ascii_lowercase().as_str() {
        "dirichlet" => BoundaryKind::Dirichlet,
        "neumann" => BoundaryKind::Neumann,
        b => return Err(Error::Config(format!("unknown boundary kind '{b}'"))),
    };
    let source = match cfg.source {
        None => SourceSpec::Zero,
        Some(s) => match s.kind.to_ascii_lowercase().as_str() {
            "zero" => SourceSpec::Zero,
            "raised-cosine" => SourceSpec::RaisedCosineWindow {
                amplitude: s.amplitude.map(|n| n.float()).transpose()?.unwrap_or(1.0),
                center: s.center.map(|n| n.float()).transpose()?.unwrap_or(0.0),
                half_width: s.half_width.map(|n| n.float()).transpose()?.unwrap_or(0.5),
            },
            k => return Err(Error::Config(format!("unknown source kind '{k}'"))),
        },
    };
    source.validate()?;
    let spec = validate(DomainSpec {
        geometry,
        interfaces,
        layers,
    })?;
    Ok((spec, BoundarySpec { kind, source }))
}
