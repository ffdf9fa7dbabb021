use std::fmt::Write as _;

use graetz::domain::{BoundaryKind, BoundarySpec, DomainSpec, Geometry};
use graetz::oracle::{shoot, ShootOptions};
use graetz::scalar::{Hp, Scalar};
use graetz::spectrum::{compute_spectrum, eigenmode, trust_radius, SpectrumOptions};
use graetz::Result;

pub struct Report {
    pub text: String,
    pub passed: bool,
}

const SERIES_TOL: f64 = 1e-6;
const ROOT_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-8;
const JUMP_TOL: f64 = 1e-10;

fn line(out: &mut String, ok: bool, what: &str, worst: f64, tol: f64) {
    let _ = writeln!(
        out,
        "{} {what}: worst {worst:.3e} (tol {tol:.0e})",
        if ok { "PASS" } else { "FAIL" }
    );
}

/// Series against shooting on a λ grid, shooting functional at every root,
/// and eigenmode residuals.
pub fn run(
    spec: &DomainSpec,
    bc: &BoundarySpec,
    opts: &SpectrumOptions,
    n_max: u32,
) -> Result<Report> {
    let mut text = String::new();
    let mut passed = true;
    let n_max = if spec.geometry == Geometry::Planar {
        0
    } else {
        n_max
    };
    for n in 0..=n_max {
        let (table, s) = compute_spectrum(spec, bc.kind, n, *opts)?;
        let rho = trust_radius(&table, bc.kind, opts.tol.trust);
        let shoot_opts = ShootOptions {
            planar_family: bc.kind,
            ..ShootOptions::default()
        };
        let bits = table.bits;

        let mut worst: f64 = 0.0;
        for i in 0..20 {
            let lam = -0.95 * rho + 1.9 * rho * (i as f64 + 0.5) / 20.0;
            let x = Hp::from_f64(lam, bits);
            let (mut v, mut d) = (x.zero_like(), x.zero_like());
            for p in (0..=table.order).rev() {
                v = v.mul(&x).add(&table.c_value[p]);
                d = d.mul(&x).add(&table.c_deriv[p]);
            }
            let sh = shoot(spec, n, lam, shoot_opts)?;
            worst = worst.max((v.to_f64() - sh.value_at_r).abs() / sh.value_scale);
            worst = worst.max((d.to_f64() - sh.derivative_at_r).abs() / sh.derivative_scale);
        }
        let ok = worst < SERIES_TOL;
        passed &= ok;
        line(
            &mut text,
            ok,
            &format!("n={n} series vs shooting (20 points, |lambda| < {rho:.3})"),
            worst,
            SERIES_TOL,
        );

        let mut worst_root: f64 = 0.0;
        let mut worst_res: f64 = 0.0;
        let mut worst_jump: f64 = 0.0;
        for lam in &s.eigenvalues_hp {
            let sh = shoot(spec, n, lam.to_f64(), shoot_opts)?;
            let g = match bc.kind {
                BoundaryKind::Dirichlet => sh.value_at_r / sh.value_scale,
                BoundaryKind::Neumann => sh.derivative_at_r / sh.derivative_scale,
            };
            worst_root = worst_root.max(g.abs());
            let mode = eigenmode(&table, lam, 50)?;
            if let Some(d) = mode.diagnostics {
                worst_res = worst_res.max(d.ode_residual);
                worst_jump = worst_jump.max(d.value_jump).max(d.flux_jump);
            }
        }
        let count = s.eigenvalues.len();
        let ok = worst_root < ROOT_TOL;
        passed &= ok;
        line(
            &mut text,
            ok,
            &format!("n={n} shooting functional at {count} eigenvalues"),
            worst_root,
            ROOT_TOL,
        );
        let ok = worst_res < RESIDUAL_TOL;
        passed &= ok;
        line(
            &mut text,
            ok,
            &format!("n={n} eigenmode ODE residual"),
            worst_res,
            RESIDUAL_TOL,
        );
        let ok = worst_jump < JUMP_TOL;
        passed &= ok;
        line(
            &mut text,
            ok,
            &format!("n={n} interface jumps"),
            worst_jump,
            JUMP_TOL,
        );
        let flagged = s.diagnostics.iter().filter(|d| d.unstable).count();
        let _ = writeln!(
            text,
            "INFO n={n} order {} trust radius {rho:.6} roots {count} flagged unstable {flagged}",
            s.order
        );
    }
    let _ = writeln!(
        text,
        "{}",
        if passed {
            "all checks passed"
        } else {
            "some checks failed"
        }
    );
    Ok(Report { text, passed })
}
