//! Independent numerical checks: adaptive shooting for the transverse eigen
//! equation, nested quadrature for the inverse operator, and Bessel series.
//!
//! Nothing here touches the log-polynomial or closure code paths; all work is
//! plain `f64`.

use crate::domain::{BoundaryKind, DomainSpec, Geometry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingResult {
    pub lambda: f64,
    pub value_at_r: f64,
    pub derivative_at_r: f64,
    /// Combined integrator and start-point error estimate.
    pub estimated_error: f64,
    /// `max |T|` and `max |T'|` along the trajectory.
    pub value_scale: f64,
    pub derivative_scale: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    /// Start radius as a fraction of the first interface (cylindrical only).
    pub start_fraction: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Planar family: picks the seed at the lower wall.
    pub planar_family: BoundaryKind,
    /// Repeat with half the start radius and fold the change into the error.
    pub richardson: bool,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            start_fraction: 1e-6,
            rtol: 1e-10,
            atol: 1e-300,
            planar_family: BoundaryKind::Neumann,
            richardson: true,
        }
    }
}

struct Layer {
    lo: f64,
    hi: f64,
    k: f64,
    w: Vec<f64>,
}

fn layers(spec: &DomainSpec) -> Vec<Layer> {
    let bp: Vec<f64> = spec
        .breakpoints()
        .iter()
        .map(|b| b.to_f64().value())
        .collect();
    spec.layers
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let k = l.conductivity.to_f64().value();
            Layer {
                lo: bp[j],
                hi: bp[j + 1],
                k,
                w: l.velocity.iter().map(|c| c.to_f64().value() / k).collect(),
            }
        })
        .collect()
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// Regular series `Σ a_m r^{n+m}` of the first layer, `a_0 = 1`, evaluated at `r`.
fn frobenius_start(n: u32, lambda: f64, w: &[f64], r: f64) -> (f64, f64) {
    let n = n as f64;
    let mut a: Vec<f64> = vec![1.0];
    let (mut t, mut dt) = (r.powf(n), if n == 0.0 { 0.0 } else { n * r.powf(n - 1.0) });
    for m in 1..60usize {
        let mut rhs = 0.0;
        if m >= 2 {
            rhs -= lambda * lambda * a[m - 2];
            for (k, wk) in w.iter().enumerate() {
                if m >= 2 + k {
                    rhs += lambda * wk * a[m - 2 - k];
                }
            }
        }
        let e = n + m as f64;
        let am = rhs / (e * e - n * n);
        a.push(am);
        let term = am * r.powf(e);
        t += term;
        dt += am * e * r.powf(e - 1.0);
        if m > 4 && term.abs() < 1e-18 * t.abs() {
            break;
        }
    }
    (t, dt)
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Integration {
    y: [f64; 2],
    error: f64,
    max_t: f64,
    max_dt: f64,
}

/// Adaptive Dormand–Prince integration of a two-component system on `[a, b]`.
fn dopri(
    f: &dyn Fn(f64, [f64; 2]) -> [f64; 2],
    a: f64,
    b: f64,
    y0: [f64; 2],
    rtol: f64,
    atol: f64,
) -> Result<Integration> {
    let mut x = a;
    let mut y = y0;
    let mut h = (b - a) * 1e-3;
    let mut err_total = 0.0;
    let mut max_t = y[0].abs();
    let mut max_dt = y[1].abs();
    let mut steps = 0usize;
    while x < b {
        if x + h > b {
            h = b - x;
        }
        let mut k = [[0.0; 2]; 7];
        for s in 0..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                for c in 0..2 {
                    ys[c] += h * A[s][j] * kj[c];
                }
            }
            k[s] = f(x + C[s] * h, ys);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        let mut d = [0.0; 2];
        for c in 0..2 {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][c];
                d4 += B4[s] * k[s][c];
            }
            y5[c] += h * d5;
            d[c] = (h * (d5 - d4)).abs();
        }
        let size = y[0].abs().max(y[1].abs()).max(y5[0].abs()).max(y5[1].abs());
        let sc = atol + rtol * size;
        err = err.max(d[0].max(d[1]) / sc);
        if err <= 1.0 {
            x += h;
            let scale_now = rtol * y5[0].abs().max(y5[1].abs()) + atol;
            err_total += err * scale_now;
            y = y5;
            max_t = max_t.max(y[0].abs());
            max_dt = max_dt.max(y[1].abs());
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        steps += 1;
        if h.abs() < 1e-14 * (b - a).abs().max(1e-300) || steps > 2_000_000 || !y[0].is_finite() {
            return Err(Error::StepFailure(x));
        }
    }
    Ok(Integration {
        y,
        error: err_total,
        max_t,
        max_dt,
    })
}

fn shoot_once(
    spec: &DomainSpec,
    n: u32,
    lambda: f64,
    opts: &ShootOptions,
    start_fraction: f64,
) -> Result<ShootingResult> {
    let ls = layers(spec);
    let nf = n as f64;
    let (mut y, start) = match spec.geometry {
        Geometry::Cylindrical => {
            let eps = start_fraction * ls[0].hi;
            let (t, dt) = frobenius_start(n, lambda, &ls[0].w, eps);
            ([t, dt], eps)
        }
        Geometry::Planar => {
            if n != 0 {
                return Err(Error::UnsupportedIndex(n));
            }
            let y = match opts.planar_family {
                BoundaryKind::Neumann => [1.0, 0.0],
                BoundaryKind::Dirichlet => [0.0, 1.0],
            };
            (y, ls[0].lo)
        }
    };
    let mut error = 0.0;
    let mut max_t = y[0].abs();
    let mut max_dt = y[1].abs();
    for (j, l) in ls.iter().enumerate() {
        if j > 0 {
            y[1] *= ls[j - 1].k / l.k;
        }
        let a = if j == 0 { start } else { l.lo };
        let cyl = spec.geometry == Geometry::Cylindrical;
        let rhs = |x: f64, u: [f64; 2]| -> [f64; 2] {
            let mut d2 = -lambda * lambda * u[0] + lambda * poly(&l.w, x) * u[0];
            if cyl {
                d2 += -u[1] / x + nf * nf * u[0] / (x * x);
            }
            [u[1], d2]
        };
        let out = dopri(&rhs, a, l.hi, y, opts.rtol, opts.atol)?;
        y = out.y;
        error += out.error;
        max_t = max_t.max(out.max_t);
        max_dt = max_dt.max(out.max_dt);
    }
    Ok(ShootingResult {
        lambda,
        value_at_r: y[0],
        derivative_at_r: y[1],
        estimated_error: error,
        value_scale: max_t,
        derivative_scale: max_dt,
    })
}

/// Shoots the regular solution (`~ r^n` at the axis, or the planar seed at
/// the lower wall) to the outer boundary.
pub fn shoot(spec: &DomainSpec, n: u32, lambda: f64, opts: ShootOptions) -> Result<ShootingResult> {
    let mut res = shoot_once(spec, n, lambda, &opts, opts.start_fraction)?;
    if opts.richardson && spec.geometry == Geometry::Cylindrical {
        let half = shoot_once(spec, n, lambda, &opts, 0.5 * opts.start_fraction)?;
        let gap = (half.value_at_r - res.value_at_r)
            .abs()
            .max((half.derivative_at_r - res.derivative_at_r).abs());
        res.estimated_error += gap;
    }
    Ok(res)
}

/// Boundary functional at `lambda`: the wall value (Dirichlet) or slope (Neumann).
pub fn boundary_functional(
    spec: &DomainSpec,
    n: u32,
    bc: BoundaryKind,
    lambda: f64,
) -> Result<f64> {
    let opts = ShootOptions {
        planar_family: bc,
        richardson: false,
        ..ShootOptions::default()
    };
    let r = shoot(spec, n, lambda, opts)?;
    Ok(match bc {
        BoundaryKind::Dirichlet => r.value_at_r,
        BoundaryKind::Neumann => r.derivative_at_r,
    })
}

/// Eigenvalues in `[lo, hi]` (excluding a neighbourhood of zero) by a sign
/// scan of the shooting functional followed by bisection.
pub fn shooting_eigenvalues(
    spec: &DomainSpec,
    n: u32,
    bc: BoundaryKind,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<Vec<f64>> {
    let f = |l: f64| boundary_functional(spec, n, bc, l);
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = f(x0)?;
    while x0 < hi {
        let x1 = (x0 + step).min(hi);
        let f1 = f(x1)?;
        if f0 == 0.0 && x0.abs() > 1e-8 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = f(m)?;
                if fm * fa <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
                if b - a < 1e-14 * m.abs().max(1.0) {
                    break;
                }
            }
            let root = 0.5 * (a + b);
            if root.abs() > 1e-8 {
                roots.push(root);
            }
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(roots)
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS[7] * fc;
    let mut g = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Option<f64> {
        let (v, e) = gk15(f, a, b);
        if e <= tol || (e <= 1e-15 * v.abs()) {
            return Some(v);
        }
        if depth == 0 || !v.is_finite() {
            return None;
        }
        let m = 0.5 * (a + b);
        Some(rec(f, a, m, 0.5 * tol, depth - 1)? + rec(f, m, b, 0.5 * tol, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    rec(f, a, b, tol, 40).ok_or(Error::QuadratureFailure(a, b))
}

/// Nested quadrature of the inverse transverse operator: cylindrical
/// `r^n ∫_lower^r x^{-(2n+1)} ∫_lower^x y^{n+1} f(y) dy dx`, planar
/// `∫_lower^r ∫_lower^x f`.
pub fn quad_f(
    f: &dyn Fn(f64) -> f64,
    n: u32,
    lower: f64,
    r: f64,
    geometry: Geometry,
) -> Result<f64> {
    let tol = 1e-11;
    let span = (r - lower).abs().max(1e-300);
    match geometry {
        Geometry::Planar => {
            // ∫_lower^r (r - y) f(y) dy
            integrate(&|y| (r - y) * f(y), lower, r, tol)
        }
        Geometry::Cylindrical => {
            let ni = n as i32;
            let failed = std::cell::Cell::new(false);
            let inner = |x: f64| -> f64 {
                if x == 0.0 {
                    return 0.0;
                }
                match integrate(&|y| y.powi(ni + 1) * f(y), lower, x, tol * 1e-2 / span) {
                    Ok(v) => v * x.powi(-(2 * ni + 1)),
                    Err(_) => {
                        failed.set(true);
                        0.0
                    }
                }
            };
            let outer = integrate(&inner, lower, r, tol)?;
            if failed.get() {
                return Err(Error::QuadratureFailure(lower, r));
            }
            Ok(r.powi(ni) * outer)
        }
    }
}

/// `J_n(x)` by its power series with compensated summation.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    let q = -half * half;
    for k in 0..400u32 {
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        term *= q / ((k + 1) as f64 * (k + 1 + n) as f64);
        if term.abs() < 1e-20 * sum.abs().max(1e-300) && k > 2 {
            break;
        }
    }
    sum
}

/// `d/dx J_n(x)`.
pub fn bessel_j_prime(n: u32, x: f64) -> f64 {
    if n == 0 {
        -bessel_j(1, x)
    } else {
        0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
    }
}

/// First `count` positive zeros of `f` found by a scan of step `step` and bisection.
pub fn zeros_by_bisection(f: &dyn Fn(f64) -> f64, start: f64, step: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut a = start;
    let mut fa = f(a);
    while out.len() < count && a < 1e4 {
        let b = a + step;
        let fb = f(b);
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                let fm = f(m);
                if fm * flo <= 0.0 {
                    hi = m;
                } else {
                    lo = m;
                    flo = fm;
                }
                if hi - lo <= 4.0 * f64::EPSILON * m {
                    break;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    out
}

/// Positive zeros of `J_n`.
pub fn bessel_zeros(n: u32, count: usize) -> Vec<f64> {
    zeros_by_bisection(&|x| bessel_j(n, x), 0.5, 0.05, count)
}

/// Positive zeros of `J_n'` (the zero at the origin excluded).
pub fn bessel_prime_zeros(n: u32, count: usize) -> Vec<f64> {
    zeros_by_bisection(&|x| bessel_j_prime(n, x), 0.5, 0.05, count)
}
