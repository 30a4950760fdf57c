use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use optsel_cli::config;

const TABLE1: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/table1.toml");

fn optsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optsel"))
        .args(args)
        .env_remove("OPTSEL_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_echoes_the_file() {
    let o = optsel(&["validate", TABLE1]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let echoed = config::parse(&stdout(&o), &[]).unwrap();
    assert_eq!(echoed, config::load(Path::new(TABLE1), &[]).unwrap());
}

#[test]
fn overrides_change_only_their_lines() {
    let a = stdout(&optsel(&["validate", TABLE1]));
    let b = stdout(&optsel(&["validate", TABLE1, "--override", "market.rho=-0.4"]));
    let diff: Vec<_> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
    assert_eq!(diff, vec![("rho = 0.4", "rho = -0.4")]);
}

#[test]
fn log_utility_is_a_config_error() {
    let o = optsel(&["validate", TABLE1, "--override", "market.gamma=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CRRA"), "{}", stderr(&o));
}

#[test]
fn missing_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = optsel(&["run", "/nonexistent/config.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_named_and_nothing_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = optsel(&["run", TABLE1, "--override", "numeric.bogus=3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("numeric.bogus"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn eta_study_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eta");
    let o = optsel(&["run", TABLE1, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("0.083333") && summary.contains("0.116667"), "{summary}");
    let csv = fs::read_to_string(out.join("eta.csv")).unwrap();
    assert!(csv.starts_with("eta1,eta2,cer,incomplete_cer\n"));
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.starts_with(&format!("# optsel {}", env!("CARGO_PKG_VERSION"))));
    let mut again = config::parse(&manifest, &[]).unwrap();
    again.output = config::load(Path::new(TABLE1), &[]).unwrap().output;
    assert_eq!(again, config::load(Path::new(TABLE1), &[]).unwrap());
}

#[test]
fn numeric_failure_exits_three_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail");
    let o = optsel(&[
        "run",
        TABLE1,
        "--override",
        "study=basket-region",
        "--override",
        "numeric.slot1_strike=1e6",
        "--override",
        "numeric.region_points=2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("selection_engine:"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn basket_region_override_matches_library_output() {
    use optsel_core::allocation::merton_eta;
    use optsel_core::numerics::lin_space;
    use optsel_core::pricing::PricingContext;
    use optsel_core::selection::{basket_region_map, Slot1Mode};

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("basket");
    let small = [
        "study=basket-region",
        "market.rho=-0.4",
        "numeric.region_points=4",
        "numeric.mc_paths=20000",
        "numeric.tree_steps=200",
    ];
    let mut args = vec!["run", TABLE1, "--out", out.to_str().unwrap()];
    for s in &small {
        args.extend(["--override", s]);
    }
    let o = optsel(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("basket_region.csv")).unwrap();

    let cfg = config::load(Path::new(TABLE1), &small.map(String::from)).unwrap();
    let n = &cfg.numeric;
    let ctx = PricingContext::new(cfg.market, n.pricing()).unwrap();
    let map = basket_region_map(
        &lin_space(n.ra_min, n.ra_max, n.region_points),
        &lin_space(n.rb_min, n.rb_max, n.region_points),
        Slot1Mode::Fixed(n.slot1_strike),
        &ctx,
        &merton_eta(&cfg.market).unwrap(),
    )
    .unwrap();
    assert_eq!(csv, map.to_csv());
}

#[test]
fn zero_threads_is_rejected() {
    let o = optsel(&["validate", TABLE1, "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
