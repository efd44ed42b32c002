use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duplex-sim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn duplex-sim")
}

#[test]
fn closed_form_sweep_writes_csv_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "--scheme",
            "TDD-1,MDD-1(7)",
            "--velocities",
            "40:120:40",
            "--trials",
            "2",
            "--seed",
            "5",
            "--mode",
            "closed-form",
            "--emit-plots",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rates = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let mut lines = rates.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scheme,velocity_kmh,user,symbol_index,subcarrier_class,metric,value,trials,seed"
    );
    for v in ["40.0", "80.0", "120.0"] {
        assert!(rates.contains(&format!("TDD-1,{v},1,9,DL,rate_closed,")));
    }
    assert!(rates.lines().skip(1).all(|l| l.ends_with(",2,5")));
    for f in ["frame_average.csv", "rate_vs_symbol.svg", "avg_rate_vs_velocity.svg"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn single_velocity_still_gets_a_velocity_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "--scheme",
            "MDD-1",
            "--velocities",
            "90",
            "--trials",
            "1",
            "--mode",
            "closed-form",
            "--emit-plots",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(dir.path().join("avg_rate_vs_velocity.svg").exists());
}

#[test]
fn bad_arguments_fail_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--scheme", "FDD", "--velocities", "50", "--mode", "closed-form"][..],
        &["--scheme", "TDD-1", "--velocities", "fast", "--mode", "closed-form"][..],
        &[
            "--scheme",
            "TDD-1",
            "--velocities",
            "100:20:10",
            "--mode",
            "closed-form",
        ][..],
        &[
            "--scheme",
            "TDD-1",
            "--velocities",
            "50",
            "--trials",
            "0",
            "--mode",
            "closed-form",
        ][..],
        &["--config", "/nonexistent/config.toml"][..],
    ] {
        let out = run(args, dir.path());
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("duplex-sim: "), "{args:?}: {err}");
    }
    let out = run(&["--trials", "many"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn print_schedule_lists_every_symbol() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--scheme", "TDD-2", "--print-schedule"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("TDD-2 (T = 28)"));
    assert_eq!(text.trim_end().lines().count(), 2 + 28);
}
