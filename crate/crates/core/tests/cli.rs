mod common;

use std::path::Path;
use std::process::{Command, Output};

use markov_girsanov::cli::{cmd_estimate, cmd_validate, cmd_verify, Payoff, Suite, EXIT_FAIL, EXIT_OK, EXIT_USAGE};
use markov_girsanov::config::{load_raw, Experiment, Model};
use markov_girsanov::likelihood::direct_estimate_discrete;
use markov_girsanov::{build_quadratic, ctmc_marginal_oracle};

use common::{bundled, fixture, indicator};

fn girsanov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_girsanov"))
        .args(args)
        .output()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn validate(path: &Path) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cmd_validate(path, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap() + &String::from_utf8(err).unwrap())
}

fn verify(path: &Path, suite: Suite) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cmd_verify(path, suite, &mut out, &mut err);
    assert!(err.is_empty(), "{}", String::from_utf8_lossy(&err));
    (code, String::from_utf8(out).unwrap())
}

fn estimate(path: &Path, payoff: &str, seed: u64, samples: usize) -> (i32, f64, f64) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cmd_estimate(
        path,
        &payoff.parse::<Payoff>().unwrap(),
        seed,
        samples,
        &mut out,
        &mut err,
    );
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    if code != EXIT_OK {
        return (code, f64::NAN, f64::NAN);
    }
    assert_eq!(lines.next(), Some("estimate,std_error,samples,seed"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[2], samples.to_string());
    assert_eq!(fields[3], seed.to_string());
    (code, fields[0].parse().unwrap(), fields[1].parse().unwrap())
}

fn line<'a>(report: &'a str, name: &str) -> Vec<&'a str> {
    report
        .lines()
        .find(|l| l.split('\t').next() == Some(name))
        .unwrap_or_else(|| panic!("no `{name}` line in\n{report}"))
        .split('\t')
        .collect()
}

#[test]
fn validate_exit_codes() {
    for name in ["discrete.toml", "ctmc.toml", "ctmc_table.toml"] {
        let (code, text) = validate(&bundled(name));
        assert_eq!(code, EXIT_OK, "{text}");
    }
    let (code, text) = validate(&fixture("row_sum.toml"));
    assert_eq!(code, EXIT_FAIL);
    assert!(text.contains("control.matrix\trow 2 sums to 1.1"), "{text}");
    assert!(text.lines().last().unwrap().ends_with("FAIL"));

    assert_eq!(validate(&fixture("does_not_exist.toml")).0, EXIT_USAGE);
    assert_eq!(validate(&fixture("broken.toml")).0, EXIT_USAGE);
}

#[test]
fn invalid_config_is_usage_error_for_other_commands() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(
        cmd_verify(&fixture("row_sum.toml"), Suite::All, &mut out, &mut err),
        EXIT_USAGE
    );
    assert!(out.is_empty());
    assert!(String::from_utf8(err).unwrap().contains("row 2"));
}

#[test]
fn bundled_discrete_passes_all_suites() {
    let (code, report) = verify(&bundled("discrete.toml"), Suite::All);
    assert_eq!(code, EXIT_OK, "{report}");
    let last = report.lines().last().unwrap();
    assert!(last.starts_with("summary\t") && last.ends_with("\tPASS"));
    for l in report.lines() {
        assert_eq!(l.split('\t').count(), 4, "{l}");
    }
}

#[test]
fn bundled_ctmc_passes_all_suites() {
    for name in ["ctmc.toml", "ctmc_table.toml"] {
        let (code, report) = verify(&bundled(name), Suite::All);
        assert_eq!(code, EXIT_OK, "{report}");
    }
}

#[test]
fn mismatched_reference_fails_pathwise_check() {
    let (code, report) = verify(&fixture("mismatched_p0.toml"), Suite::Girsanov);
    assert_eq!(code, EXIT_FAIL);
    assert_eq!(line(&report, "pathwise-likelihood")[3], "FAIL");
    // The honest configuration passes the same suite.
    let (code, report) = verify(&fixture("small.toml"), Suite::Girsanov);
    assert_eq!(code, EXIT_OK, "{report}");
}

#[test]
fn mismatched_control_fails_indicator_martingale() {
    let (code, report) = verify(&fixture("mismatched_control.toml"), Suite::Martingale);
    assert_eq!(code, EXIT_FAIL);
    let l = line(&report, "indicator-martingale[state=1]");
    assert_eq!(l[3], "FAIL");
    let residual: f64 = l[1].parse().unwrap();
    assert!((residual - 0.01).abs() < 1e-12);
    assert_eq!(line(&report, "z-mean-one")[3], "PASS");
}

#[test]
fn representation_suite_dispatches_on_mode() {
    let (code, report) = verify(&fixture("ctmc_identity.toml"), Suite::Representation);
    assert_eq!(code, EXIT_OK, "{report}");
    assert_eq!(line(&report, "hadamard-round-trip")[3], "PASS");
    assert!(!report.contains("representation-round-trip"));

    let (code, report) = verify(&fixture("small.toml"), Suite::Representation);
    assert_eq!(code, EXIT_OK, "{report}");
    assert!(!report.contains("hadamard"));
    assert_eq!(line(&report, "representation-round-trip")[3], "PASS");
}

#[test]
fn estimate_matches_plain_monte_carlo_when_target_is_reference() {
    let path = fixture("matched.toml");
    let (code, est, se) = estimate(&path, "indicator:1", 17, 50_000);
    assert_eq!(code, EXIT_OK);
    let exp = Experiment::validate(&load_raw(&path).unwrap()).0.unwrap();
    let Model::Discrete { p0, steps, .. } = &exp.model else {
        unreachable!()
    };
    let plain = direct_estimate_discrete(&indicator(2, 0), &exp.nu, p0, *steps, 50_000, 18).unwrap();
    let sigma = (se * se + plain.std_error * plain.std_error).sqrt();
    assert!(
        (est - plain.estimate).abs() <= 3.0 * sigma,
        "{est} vs {}",
        plain.estimate
    );
}

#[test]
fn estimate_matches_semigroup_for_quadratic_target() {
    let path = bundled("ctmc.toml");
    let exp = Experiment::validate(&load_raw(&path).unwrap()).0.unwrap();
    let Model::Ctmc {
        q0,
        control: Some(c),
        horizon,
    } = &exp.model
    else {
        unreachable!()
    };
    let target = build_quadratic(q0, c.constant().unwrap()).unwrap();
    let oracle = ctmc_marginal_oracle(&target, &exp.nu, *horizon).unwrap();
    for j in 1..=3 {
        let (code, est, se) = estimate(&path, &format!("indicator:{j}"), 99, 100_000);
        assert_eq!(code, EXIT_OK);
        assert!(
            (est - oracle.prob(j - 1)).abs() <= 3.0 * se,
            "state {j}: {est} vs {}",
            oracle.prob(j - 1)
        );
    }
}

#[test]
fn estimate_rejects_single_sample_and_bad_payoff() {
    assert_eq!(estimate(&fixture("small.toml"), "indicator:1", 1, 1).0, EXIT_USAGE);
    assert_eq!(estimate(&fixture("small.toml"), "indicator:3", 1, 100).0, EXIT_USAGE);
    assert_eq!(estimate(&fixture("small.toml"), "vector:1,2,3", 1, 100).0, EXIT_USAGE);
}

#[test]
fn estimate_is_deterministic() {
    let a = estimate(&fixture("small.toml"), "vector:0.5,2", 4, 1000);
    let b = estimate(&fixture("small.toml"), "vector:0.5,2", 4, 1000);
    assert_eq!(a.1.to_bits(), b.1.to_bits());
    assert_eq!(a.2.to_bits(), b.2.to_bits());
}

#[test]
fn simulate_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty.csv");
    let status = girsanov(&[
        "simulate",
        path_str(&fixture("small.toml")),
        "--out",
        path_str(&out),
        "--seed",
        "1",
        "--samples",
        "0",
    ]);
    assert!(status.status.success());
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "sample_index,terminal_state,terminal_log_z\n"
    );

    let out = dir.path().join("ctmc.csv");
    let status = girsanov(&[
        "simulate",
        path_str(&fixture("ctmc_identity.toml")),
        "--out",
        path_str(&out),
        "--seed",
        "3",
        "--samples",
        "500",
    ]);
    assert!(status.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample_index,terminal_state,terminal_log_z,n_jumps"));
    for (idx, l) in lines.enumerate() {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[0], idx.to_string());
        assert!(f[1] == "1" || f[1] == "2");
        assert_eq!(f[2], "0");
        f[3].parse::<usize>().unwrap();
    }
}

#[test]
fn simulate_matched_discrete_has_zero_log_likelihood() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let status = girsanov(&[
        "simulate",
        path_str(&fixture("matched.toml")),
        "--out",
        path_str(&out),
        "--seed",
        "9",
        "--samples",
        "200",
    ]);
    assert!(status.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = girsanov(&[
            "simulate",
            path_str(&fixture("small.toml")),
            "--out",
            path_str(&out),
            "--seed",
            "5",
            "--samples",
            "3000",
        ]);
        assert!(status.status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn binary_exit_codes() {
    let small = fixture("small.toml");
    assert_eq!(girsanov(&["validate", path_str(&small)]).status.code(), Some(0));
    assert_eq!(
        girsanov(&["validate", path_str(&fixture("row_sum.toml"))])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(girsanov(&["validate", "no/such/file.toml"]).status.code(), Some(2));
    assert_eq!(
        girsanov(&[
            "verify",
            path_str(&fixture("mismatched_p0.toml")),
            "--suite",
            "girsanov"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        girsanov(&["verify", path_str(&small), "--suite", "bogus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        girsanov(&[
            "estimate",
            path_str(&small),
            "--payoff",
            "indicator:x",
            "--seed",
            "1",
            "--samples",
            "10"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        girsanov(&["simulate", path_str(&small), "--seed", "1", "--samples", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(girsanov(&[]).status.code(), Some(2));

    let out = girsanov(&["verify", path_str(&small), "--suite", "martingale"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().starts_with("summary\t"));
}
