use std::process::{Command, Output};

fn distill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distill"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

#[test]
fn step_reports_werner_values() {
    let o = distill(&["step", "0.75", "0.0833333333333333", "0.0833333333333333", "0.0833333333333334"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(field(&text, "p_success"), "0.722222222222");
    assert_eq!(field(&text, "fidelity_success"), "0.788461538462");
    assert!(field(&text, "n_min_locc").ends_with("(even: 4)"));
    assert!(!text.contains("note:"));
}

#[test]
fn step_flags_undistillable_input() {
    let o = distill(&["step", "0.3", "0.3", "0.2", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(field(&text, "distillable"), "false");
    assert!(text.contains("note: not distillable"));
}

#[test]
fn step_rejects_bad_input() {
    for args in [
        &["step", "0.5", "0.5", "0.1", "-0.1"][..],
        &["step", "0.5", "0.5", "0.1", "0.1"],
        &["step", "0.5", "0.5", "x", "0"],
        &["step", "0.5", "0.5"],
    ] {
        assert_eq!(distill(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn step_renormalizes_small_drift_with_warning() {
    let o = distill(&["step", "0.7", "0.1", "0.1", "0.1000000001"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("renormalized"));
}

#[test]
fn nmin_emits_csv() {
    let o = distill(&["nmin", "--start", "0.55", "--stop", "0.6", "--step", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.ends_with('\n'));
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(
        lines[0],
        "A,nmin_locc,nmin_locc_even,nmin_conditional,nmin_conditional_even"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
}

#[test]
fn iterate_exact() {
    let text = stdout(&distill(&["iterate", "--n", "5", "--a0", "0.75"]));
    assert_eq!(field(&text, "mean_fidelity"), "0.820216049383");
    let text = stdout(&distill(&["iterate", "--n", "1", "--a0", "0.75"]));
    assert_eq!(field(&text, "mean_fidelity"), "0.750000000000");
}

#[test]
fn iterate_exact_cap_is_a_resource_error() {
    let o = distill(&["iterate", "--n", "5000", "--a0", "0.75"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--method mc"));
}

#[test]
fn iterate_mc_is_reproducible_across_thread_counts() {
    let run = |threads: &str| {
        stdout(&distill(&[
            "iterate", "--n", "9", "--a0", "0.7", "--method", "mc", "--trials", "5000", "--seed", "17",
            "--threads", threads,
        ]))
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    assert_eq!(field(&one, "trials"), "5000");
    let exact = stdout(&distill(&["iterate", "--n", "9", "--a0", "0.7"]));
    let m: f64 = field(&one, "mean_fidelity").parse().unwrap();
    let se: f64 = field(&one, "std_error").parse().unwrap();
    let e: f64 = field(&exact, "mean_fidelity").parse().unwrap();
    assert!((m - e).abs() < 4.0 * se, "{m} vs {e} (se {se})");
}

#[test]
fn verify_oracle_passes_and_detects_faults() {
    let o = distill(&["verify-oracle", "--samples", "30"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "result"), "PASS");

    let o = distill(&["verify-oracle", "--samples", "0", "--state", "1 0 0 0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "samples"), "1");

    let o = distill(&["verify-oracle", "--samples", "10", "--inject-fault", "1e-6"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert_eq!(field(&text, "result"), "FAIL");
    assert!(text.contains("worst_state"));
}

#[test]
fn figure_tables_have_expected_columns() {
    let text = stdout(&distill(&["fig3", "--n-list", "4,5", "--start", "0.6", "--stop", "0.7", "--step", "0.1"]));
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "A0,ratio_N4,ratio_N5");
    assert_eq!(lines.len(), 3);

    let text = stdout(&distill(&["fig4", "--n-start", "3", "--n-stop", "6"]));
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "N,nobackup,backup,fully_successful");
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("5,"));
    assert!(lines[3].contains("0.820216049383"));
}

#[test]
fn out_flag_writes_to_file() {
    let path = std::env::temp_dir().join(format!("distill-cli-{}.csv", std::process::id()));
    let o = distill(&["fig4", "--n-start", "3", "--n-stop", "4", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert!(written.starts_with("N,nobackup,backup,fully_successful\n"));
    assert_eq!(written.lines().count(), 3);
}
