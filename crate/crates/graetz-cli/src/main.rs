use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graetz::domain::{builtin, parse_config, BoundarySpec, Builtin, DomainSpec};
use graetz::fields::{self, Baseline, Normalization, SolveOptions};
use graetz::spectrum::{self, SpectrumOptions, Tolerances};
use graetz::{fmt_sci, Error};

mod validate;

#[derive(Parser)]
#[command(
    name = "graetz",
    version,
    about = "Mesh-less generalized Graetz solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue CSV: n,i,lambda,class,residual,stability_gap
    Spectrum(Common),
    /// Eigen-profiles sampled on a transverse grid
    Modes {
        #[command(flatten)]
        common: Common,
        /// Number of transverse sample points
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Field summary: plateaus and wall hot spot
    Solve(Common),
    /// Temperature table over z at transverse stations
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        z_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        z_max: Option<f64>,
        #[arg(long, default_value_t = 400)]
        z_points: usize,
        /// Comma-separated transverse stations
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        stations: Option<Vec<f64>>,
    },
    /// Oracle cross-checks with a pass/fail report
    Validate(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    config: Option<PathBuf>,
    /// heated-pipe:pe=<v> or double-pass:pe=<v>,x0=<v>,r=<v>
    #[arg(long)]
    builtin: Option<String>,
    #[arg(long, default_value_t = 0)]
    n_max: u32,
    /// Fixed truncation order (default: raised until the trust radius covers --lambda-max)
    #[arg(long)]
    order: Option<usize>,
    /// Modes kept per class and per index
    #[arg(long)]
    modes: Option<usize>,
    /// Largest |lambda| searched or used in fields
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long, default_value_t = 256)]
    bits: usize,
    /// Trust criterion: tail below this fraction of the series magnitude
    #[arg(long, default_value_t = 1e-12)]
    trust_tol: f64,
    /// Relative order-change move above which a root is flagged
    #[arg(long, default_value_t = 1e-9)]
    stability_tol: f64,
    #[arg(long, value_enum, default_value_t = NormArg::Energy)]
    normalization: NormArg,
    /// Output file (default: standard output)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy)]
enum NormArg {
    Energy,
    Seed,
}

enum Failure {
    Config(String),
    Computation(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Computation(_) => 3,
            Failure::Validation(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Computation(m) | Failure::Validation(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidDomain(_) | Error::InvalidParameter(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Computation(e.to_string()),
        }
    }
}

fn load(c: &Common) -> Result<(DomainSpec, BoundarySpec), Failure> {
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Ok(parse_config(&text)?)
    } else {
        let name = c.builtin.as_deref().unwrap_or_default();
        Ok(builtin(&Builtin::parse(name)?)?)
    }
}

fn spectrum_options(c: &Common) -> SpectrumOptions {
    SpectrumOptions {
        order: c.order,
        lambda_max: c.lambda_max,
        bits: c.bits,
        tol: Tolerances {
            trust: c.trust_tol,
            stability: c.stability_tol,
            ..Tolerances::default()
        },
        ..SpectrumOptions::default()
    }
}

fn solve_options(c: &Common) -> SolveOptions {
    let d = SolveOptions::default();
    SolveOptions {
        mode_count: c.modes.unwrap_or(d.mode_count),
        lambda_max: c.lambda_max.unwrap_or(d.lambda_max),
        bits: c.bits,
        normalization: match c.normalization {
            NormArg::Energy => Normalization::Energy,
            NormArg::Seed => Normalization::Seed,
        },
        order: c.order,
    }
}

fn emit(c: &Common, text: &str) -> Result<(), Failure> {
    match &c.out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Spectrum(c) => {
            let (spec, bc) = load(&c)?;
            let list = spectrum::full_spectrum(
                &spec,
                bc.kind,
                c.n_max,
                c.modes.unwrap_or(usize::MAX),
                spectrum_options(&c),
            )?;
            let spectra: Vec<_> = list.into_iter().map(|(_, s)| s).collect();
            emit(&c, &spectrum::spectra_csv(&spectra))
        }
        Command::Modes { common: c, points } => {
            let (spec, bc) = load(&c)?;
            let mut out = String::from("n,i,lambda,x,T\n");
            for n in 0..=c.n_max {
                let (table, mut s) =
                    spectrum::compute_spectrum(&spec, bc.kind, n, spectrum_options(&c))?;
                spectrum::keep_per_class(&mut s, c.modes.unwrap_or(usize::MAX));
                let lo = table.t[0].breakpoints[0].to_f64().value();
                let hi = spec.outer_radius().to_f64().value();
                let grid = fields::linspace(lo, hi, points.max(2));
                let (mut up, mut down) = (0, s.downstream().len());
                for lam in &s.eigenvalues_hp {
                    let mode = spectrum::eigenmode(&table, lam, 0)?;
                    let i = if mode.lambda > 0.0 {
                        up += 1;
                        up
                    } else {
                        down -= 1;
                        down + 1
                    };
                    for &x in &grid {
                        let v = mode.profile.eval(x)?;
                        let _ = writeln!(
                            out,
                            "{n},{i},{},{},{}",
                            fmt_sci(mode.lambda),
                            fmt_sci(x),
                            fmt_sci(v)
                        );
                    }
                }
            }
            emit(&c, &out)
        }
        Command::Solve(c) => {
            let (spec, bc) = load(&c)?;
            let field = fields::solve(&spec, &bc, solve_options(&c))?;
            let zs = fields::balance_grid(&field);
            let s = fields::summarize(&field, &zs)?;
            let mut out = String::new();
            let _ = writeln!(out, "family: {:?}", field.family);
            let _ = writeln!(out, "modes: {}", s.modes);
            let _ = writeln!(out, "T(-inf): {}", fmt_sci(s.upstream_plateau));
            match s.downstream_plateau {
                Some(v) => {
                    let _ = writeln!(out, "T(+inf): {}", fmt_sci(v));
                }
                None => {
                    let _ = writeln!(out, "T(+inf): unbounded (linear growth)");
                }
            }
            if let Baseline::Equilibrated { a, b, .. } = &field.baseline {
                let _ = writeln!(out, "a: {}\nb: {}", fmt_sci(*a), fmt_sci(*b));
            }
            let _ = writeln!(
                out,
                "hot spot: z = {}, T = {}",
                fmt_sci(s.hot_spot.0),
                fmt_sci(s.hot_spot.1)
            );
            let _ = writeln!(
                out,
                "heat balance defect: {}",
                fmt_sci(field.balance_defect(&zs, 1e-3)?)
            );
            emit(&c, &out)
        }
        Command::Profile {
            common: c,
            z_min,
            z_max,
            z_points,
            stations,
        } => {
            let (spec, bc) = load(&c)?;
            let field = fields::solve(&spec, &bc, solve_options(&c))?;
            let grid = fields::balance_grid(&field);
            let lo = z_min.unwrap_or(grid[0]);
            let hi = z_max.unwrap_or(*grid.last().unwrap());
            let stations = stations.unwrap_or_else(|| fields::default_stations(&spec));
            let rows = field.profile(&stations, &fields::linspace(lo, hi, z_points.max(1)))?;
            emit(&c, &fields::profile_csv(&stations, &rows))
        }
        Command::Validate(c) => {
            let (spec, bc) = load(&c)?;
            let report = validate::run(&spec, &bc, &spectrum_options(&c), c.n_max)?;
            emit(&c, &report.text)?;
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Validation("oracle cross-checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("graetz: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
