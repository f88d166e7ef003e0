use std::path::PathBuf;

use vacuumlab::runner::{
    parse_config, read_summary, run_scenario, time_shift_replay, verify_hypotheses, RunError, Theorem,
};

const BASE: &str = r#"
name = "mini"

[grid]
domain = "lipschitz_box"
lower = [-1.0]
upper = [1.0]
cells = [64]
t_final = 0.5

[velocity]
id = "sine_zero_trace"

[initial.rho]
kind = "smooth_bump"
center = [0.0]
radius = 0.5
base = 0.5

[solver]
outputs = 16
"#;

const WITH_R: &str = r#"
[initial.R]
kind = "vacuum_ball"
center = [0.1]
radius = 0.25

[exponents]
p = "inf"
q = "inf"
alpha = "inf"
beta = "inf"
gamma = "2"
gamma_tilde = "2"
"#;

fn scenario_file(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name].iter().collect();
    std::fs::read_to_string(path).unwrap()
}

fn with_r(extra: &str) -> String {
    // [initial.R] has to follow [initial.rho] before [solver] closes the table.
    let mut text = BASE.replace("[solver]", &format!("{WITH_R}\n[solver]"));
    text.push_str(extra);
    text
}

#[test]
fn minimal_config_without_analyses_runs() {
    let s = parse_config(BASE).unwrap();
    let bundle = run_scenario(&s).unwrap();
    let summary = bundle.summary.unwrap();
    assert!(summary.passed(), "{}", summary.render());
}

#[test]
fn unknown_key_is_located() {
    let text = BASE.replace("t_final = 0.5", "t_final = 0.5\nt_finale = 1.0");
    let e = parse_config(&text).unwrap_err();
    assert!(e.to_string().contains("t_finale"), "{e}");
    assert!(e.to_string().contains("line"), "{e}");
}

#[test]
fn unknown_velocity_is_named() {
    let text = BASE.replace("sine_zero_trace", "vortex_sheet");
    let e = parse_config(&text).unwrap_err();
    assert!(e.to_string().contains("vortex_sheet"), "{e}");
}

#[test]
fn endpoint_exponents_fail_the_inclusion_gate() {
    let text = with_r("\n[[analysis]]\nkind = \"hypothesis_check\"\ntheorem = \"vacuum_inclusion\"\n")
        .replace("q = \"inf\"", "q = \"1\"");
    let e = parse_config(&text).unwrap_err();
    assert!(e.to_string().contains("(q,β) ≠ (1,∞)"), "{e}");
}

#[test]
fn runs_are_bitwise_deterministic() {
    let text = with_r("\n[[analysis]]\nkind = \"vacuum_report\"\ncheck_inclusion = true\n");
    let s = parse_config(&text).unwrap();
    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&s).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bundled_vacuum_scenario_passes() {
    let s = parse_config(&scenario_file("sine-vacuum-1d.toml")).unwrap();
    let summary = run_scenario(&s).unwrap().summary.unwrap();
    assert!(summary.passed(), "{}", summary.render());
}

#[test]
fn hypotheses_report_lists_declared_theorems() {
    let s = parse_config(&scenario_file("product-1d.toml")).unwrap();
    let r = verify_hypotheses(&s).unwrap();
    assert!(r.passed());
    assert!(r.verdicts.iter().any(|v| v.theorem == Theorem::ProductSolution));
    assert_eq!(r.requested, vec![Theorem::ProductSolution]);
}

#[test]
fn single_window_replay_matches_the_plain_product_deviation() {
    let text = with_r("\n[[analysis]]\nkind = \"vacuum_report\"\n");
    let s = parse_config(&text).unwrap();
    let summary = run_scenario(&s).unwrap().summary.unwrap();
    let base = summary.criteria.iter().find(|c| c.name.ends_with("product_deviation")).unwrap().value;
    let r = time_shift_replay(&s, 0.5, 0.5, 0.0).unwrap();
    assert_eq!(r.segments.len(), 1);
    assert!((r.stitched_deviation - base).abs() <= 1e-14, "{} vs {base}", r.stitched_deviation);
}

#[test]
fn stitched_replay_is_bounded_by_its_segments() {
    let s = parse_config(&with_r("")).unwrap();
    let r = time_shift_replay(&s, 0.125, 0.25, 0.0).unwrap();
    assert_eq!(r.segments.len(), 2);
    assert!(r.stitched_deviation <= 2.0 * r.max_segment_deviation + 1e-15);
    assert_eq!(r.max_inclusion_defect, 0.0);
    assert!(r.stitched_deviation < 2e-2);
}

#[test]
fn replay_rejects_bad_inputs() {
    let s = parse_config(&with_r("")).unwrap();
    assert!(matches!(time_shift_replay(&s, 0.0, 0.25, 0.0), Err(RunError::Config(_))));
    assert!(matches!(time_shift_replay(&s, 0.3, 0.25, 0.0), Err(RunError::Config(_))));
    assert!(matches!(time_shift_replay(&s, 0.1, 0.25, 0.0), Err(RunError::Config(_))));
    let no_r = parse_config(BASE).unwrap();
    assert!(matches!(time_shift_replay(&no_r, 0.25, 0.25, 0.0), Err(RunError::Config(_))));

    let text = r#"
name = "spin"
[grid]
domain = "periodic_box"
lower = [0.0, 0.0]
upper = [1.0, 1.0]
cells = [16, 16]
t_final = 0.5
[velocity]
id = "shear"
params = { omega = 2.0 }
[initial.rho]
kind = "constant"
value = 1.0
[initial.R]
kind = "constant"
value = 1.0
"#;
    let s = parse_config(text).unwrap();
    let e = time_shift_replay(&s, 0.25, 0.25, 0.0).unwrap_err();
    assert!(e.to_string().contains("time dependent"), "{e}");
}

#[test]
fn bundle_round_trips_through_disk() {
    let text = with_r("\n[[analysis]]\nkind = \"vacuum_report\"\n");
    let s = parse_config(&text).unwrap();
    let bundle = run_scenario(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bundle.write(dir.path()).unwrap();
    assert_eq!(read_summary(dir.path()).unwrap(), bundle.summary.unwrap());
    for name in bundle.files.keys() {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
}
