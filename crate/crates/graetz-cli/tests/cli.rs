use std::path::PathBuf;
use std::process::{Command, Output};

fn graetz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graetz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn spectrum_of_pure_diffusion_starts_at_first_bessel_zero() {
    let o = graetz(&[
        "spectrum",
        "--config",
        &config("pure_diffusion.toml"),
        "--lambda-max",
        "6",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,i,lambda,class,residual,stability_gap")
    );
    let lambdas: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let closest_up = lambdas
        .iter()
        .copied()
        .filter(|l| *l > 0.0)
        .fold(f64::INFINITY, f64::min);
    let closest_down = lambdas
        .iter()
        .copied()
        .filter(|l| *l < 0.0)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((closest_up - 2.4048256).abs() < 1e-7, "{closest_up}");
    assert!((closest_down + 2.4048256).abs() < 1e-7, "{closest_down}");
}

#[test]
fn solve_reports_heated_pipe_plateau() {
    let o = graetz(&[
        "solve",
        "--builtin",
        "heated-pipe:pe=1",
        "--lambda-max",
        "8",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let line = text
        .lines()
        .find(|l| l.starts_with("T(+inf):"))
        .expect("plateau line");
    let value: f64 = line.trim_start_matches("T(+inf):").trim().parse().unwrap();
    assert_eq!(value, 8.0);
    assert!(text.contains("hot spot:"));
}

#[test]
fn validate_passes_on_builtins() {
    for b in ["heated-pipe:pe=10", "double-pass:pe=1,x0=1,r=2"] {
        let o = graetz(&["validate", "--builtin", b, "--order", "60"]);
        let text = stdout(&o);
        assert!(o.status.success(), "{b}: {text}");
        assert!(text.contains("all checks passed"));
        assert!(!text.contains("FAIL"));
    }
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let o = graetz(&["spectrum", "--config", "/nonexistent/graetz.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = graetz(&["spectrum", "--builtin", "heated-pipe:pe=-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = graetz(&["spectrum", "--builtin", "no-such-case"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "geometry = \"cylindrical\"\ninterfaces = [\"2\", \"1\"]\n",
    )
    .unwrap();
    let o = graetz(&["spectrum", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let spectrum = dir.path().join(format!("spectrum{k}.csv"));
        let profile = dir.path().join(format!("profile{k}.csv"));
        let o = graetz(&[
            "spectrum",
            "--builtin",
            "heated-pipe:pe=1",
            "--n-max",
            "1",
            "--out",
            spectrum.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        let o = graetz(&[
            "profile",
            "--builtin",
            "heated-pipe:pe=1",
            "--lambda-max",
            "8",
            "--z-min",
            "-2",
            "--z-max",
            "4",
            "--z-points",
            "25",
            "--out",
            profile.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        outputs.push((
            std::fs::read(&spectrum).unwrap(),
            std::fs::read(&profile).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let profile = String::from_utf8(outputs[0].1.clone()).unwrap();
    let header = profile.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 6);
    assert!(header.starts_with("z,T@"));
    assert_eq!(profile.lines().count(), 26);
}

#[test]
fn modes_are_sampled_on_the_requested_grid() {
    let o = graetz(&[
        "modes",
        "--config",
        &config("pure_diffusion.toml"),
        "--lambda-max",
        "6",
        "--points",
        "11",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("n,i,lambda,x,T"));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len() % 11, 0);
    // J0 profile vanishes at the wall for the prescribed-temperature family
    for r in rows.iter().filter(|r| r[3] == 1.0) {
        assert!(r[4].abs() < 1e-9, "{r:?}");
    }
}
