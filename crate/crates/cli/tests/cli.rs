//! End-to-end checks of the command-line surface: exit codes, deterministic
//! output, input plumbing, and round-tripping between emitted documents and
//! the library that produced them.

use closure_forge_core::exponent::Exp;
use closure_forge_core::format::{series_from_json, series_poly_from_json};
use closure_forge_core::gfield::FieldTower;
use closure_forge_core::hahn::{hs_poly_eval, FqRing, HahnSeries};
use serde_json::Value;
use std::io::Write;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_closure-forge"))
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn run_with_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary should spawn");
    child
        .stdin
        .as_mut()
        .expect("stdin requested")
        .write_all(input)
        .expect("writing stdin");
    child.wait_with_output().expect("binary should finish")
}

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert!(help.status.success());
    let text = String::from_utf8(help.stdout).unwrap();
    for sub in [
        "solve-series",
        "solve-padic",
        "solve-witt",
        "recur",
        "analyze",
        "lampert",
        "selfcheck",
    ] {
        assert!(text.contains(sub), "help should list `{sub}`");
    }

    let version = run(&["--version"]);
    assert!(version.status.success());
    assert!(String::from_utf8(version.stdout)
        .unwrap()
        .contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_and_input_errors_exit_one() {
    let unknown = run(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(!unknown.stderr.is_empty(), "usage errors should explain");

    let bad_json = run_with_stdin(&["solve-series", "--target", "4"], b"{ not json");
    assert_eq!(bad_json.status.code(), Some(1));
    assert!(!bad_json.stderr.is_empty(), "parse errors should explain");

    let bad_prime = run_with_stdin(
        &["solve-series", "--p", "4", "--target", "4"],
        b"{\"ring\":\"F(4)((t^Q))\",\"coeffs\":[]}",
    );
    assert_eq!(bad_prime.status.code(), Some(1));
    let msg = String::from_utf8(bad_prime.stderr).unwrap();
    assert!(msg.contains("prime"), "should reject a composite modulus");
}

#[test]
fn selfcheck_reports_every_suite() {
    let out = run(&["selfcheck"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines()
            .filter(|l| l.split_whitespace().next() == Some("ok"))
            .count(),
        7,
        "each built-in suite should report one ok line:\n{text}"
    );
    assert!(text.trim_end().ends_with("all 7 suites passed"));
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "solve-series",
        "--in",
        &fixture("artin_schreier.json"),
        "--target",
        "12",
        "--json",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout, "same input, same bytes");
}

#[test]
fn stdin_and_file_input_agree() {
    let path = fixture("artin_schreier.json");
    let body = std::fs::read(&path).unwrap();
    let by_file = run(&["solve-series", "--in", &path, "--target", "8", "--json"]);
    let by_stdin = run_with_stdin(&["solve-series", "--target", "8", "--json"], &body);
    assert!(by_file.status.success());
    assert_eq!(by_file.stdout, by_stdin.stdout);
}

#[test]
fn output_file_matches_stdout() {
    let path = fixture("artin_schreier.json");
    let to_stdout = run(&["solve-series", "--in", &path, "--target", "8", "--json"]);
    assert!(to_stdout.status.success());

    let out_path = format!("{}/cli_out.json", env!("CARGO_TARGET_TMPDIR"));
    let to_file = run(&[
        "solve-series",
        "--in",
        &path,
        "--target",
        "8",
        "--json",
        "--out",
        &out_path,
    ]);
    assert!(to_file.status.success());
    let written = std::fs::read(&out_path).unwrap();
    assert_eq!(written, to_stdout.stdout);
}

/// Feeding an emitted root back through the document parser and substituting
/// its literal digits into the input polynomial must reproduce the
/// certificate exactly: the residual's valuation is the certified one.
#[test]
fn emitted_roots_substitute_to_their_certificates() {
    let path = fixture("artin_schreier.json");
    let out = run(&["solve-series", "--in", &path, "--target", "12", "--json"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();

    let ring = FqRing::new(FieldTower::new(2, 1).unwrap());
    let input: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let poly = series_poly_from_json(&ring, &input).unwrap();

    let roots = doc["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 2, "x^2 + x + t splits into two simple roots");
    let target = Exp::new(12, 1);
    for root in roots {
        assert_eq!(root["exhausted"], Value::Bool(false));
        let value = series_from_json(&ring, &root["value"]).unwrap();
        // The certificate speaks about the digits themselves, so substitute
        // them as an exact series rather than at the reported precision.
        let literal = HahnSeries::new(&ring, value.terms().to_vec(), None).unwrap();
        let residual = hs_poly_eval(&ring, &poly, &literal).unwrap();

        let cert = &root["certificate"];
        let v = Exp::parse(cert["v"].as_str().unwrap()).unwrap();
        assert!(v >= target, "certificate must reach the target");
        match cert["kind"].as_str().unwrap() {
            "exact" => {
                let (lead, _) = residual.terms().first().expect("visible residual");
                assert_eq!(lead, &v, "residual valuation must equal the certificate");
            }
            "at_least" => {
                assert!(residual.terms().is_empty());
                assert_eq!(residual.prec(), Some(&v));
            }
            other => panic!("unexpected certificate kind {other}"),
        }
    }
}

/// A solve that runs out of steps must say so twice — exit code 2 and the
/// exhaustion flags — while still reporting the digits it did pin down.
#[test]
fn exhausted_solves_exit_two_with_partial_report() {
    let out = run(&[
        "solve-witt",
        "--in",
        &fixture("witt_wild_quadratic.json"),
        "--target",
        "4",
        "--max-steps",
        "6",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["exhausted"], Value::Bool(true));
    let roots = doc["roots"].as_array().unwrap();
    assert!(!roots.is_empty());
    for root in roots {
        assert_eq!(root["exhausted"], Value::Bool(true));
        assert!(
            !root["value"]["terms"].as_array().unwrap().is_empty(),
            "partial digits should still be reported"
        );
    }
}
