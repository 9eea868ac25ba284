//! `closure-forge`: one-shot jobs over the exact series and Witt-vector
//! solvers, with reproducible JSON input and output.
//!
//! Every run emits a single document (JSON with `--json`, a text summary
//! otherwise) stamped with the schema version and the PRNG seed; identical
//! configuration and seed produce byte-identical output. Solver output
//! always embeds a substitution certificate: the valuation of the input
//! polynomial evaluated at the emitted digits taken literally.
//!
//! Exit codes: 0 success, 1 invalid input, 2 precision exhausted (partial
//! results are still emitted), 3 internal oracle failure.

mod selfcheck;

use std::fs;
use std::io::Read as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use closure_forge_core::error::Error;
use closure_forge_core::exponent::{Exp, Valuation};
use closure_forge_core::format::{
    self, digit_series_from_json, digit_series_to_json, gr_from_string, gr_to_string,
    recurrence_from_json, recurrence_to_json, series_poly_from_json, series_to_json,
    witt_poly_from_json, witt_poly_to_json, SCHEMA,
};
use closure_forge_core::galois::{GaloisTower, GrElem};
use closure_forge_core::gfield::FieldTower;
use closure_forge_core::hahn::{FqRing, HahnSeries};
use closure_forge_core::newton::{root_certificate, solve_roots};
use closure_forge_core::padic::{lampert_polynomial, solve_over_witt, GrRing};
use closure_forge_core::twistrec::{
    check_recurrence, combine_product, combine_sum, digit_periodicity, from_components, sab_fit,
    solve_semilinear, to_components, WindowVerdict,
};

// ---------------------------------------------------------------------------
// Command-line surface.
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "closure-forge",
    version,
    about = "Exact root solvers and digit analyzers for generalized power series fields\nand their p-adic analogues."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every job. A job reads at most one input document
/// (`--in`, stdin otherwise) and writes one output document (`--out`,
/// stdout otherwise).
#[derive(Args, Clone)]
struct CommonOpts {
    /// Coefficient characteristic; must be prime.
    #[arg(long, default_value_t = 2)]
    p: u64,

    /// Exponent the solve or analysis runs out to, as "n" or "n/d".
    #[arg(long, visible_alias = "prec", value_name = "N/D")]
    target: Option<String>,

    /// Step budget for the iterative solvers. Expansions that keep creeping
    /// (shrinking slope gains per digit) are cut off here and flagged as
    /// exhausted rather than run to enormous depth.
    #[arg(long, default_value_t = 24, value_name = "K")]
    max_steps: u32,

    /// PRNG seed; recorded in the output for reproducibility.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Emit the full JSON document instead of the text summary.
    #[arg(long)]
    json: bool,

    /// Input path; stdin when omitted.
    #[arg(long = "in", visible_alias = "input", value_name = "FILE")]
    input: Option<PathBuf>,

    /// Output path; stdout when omitted.
    #[arg(long = "out", value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Roots of a polynomial over F_p((t^Q)), reported out to the target.
    SolveSeries(CommonOpts),

    /// Roots of a polynomial with canonical digit-series coefficients over
    /// the mixed-characteristic series field.
    SolvePadic(CommonOpts),

    /// Roots of a polynomial whose coefficients are series over a truncated
    /// Witt ring at an explicit digit depth.
    SolveWitt(CommonOpts),

    /// Twist-recurrence operations on Witt-ring sequences.
    #[command(subcommand)]
    Recur(RecurCommand),

    /// Digit-support and digit-periodicity analyzers.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),

    /// The degree-p experiment: x^p - p^(p-1) x - p^(p-1) over the mixed
    /// field, with a support-class fit of every root found.
    Lampert(CommonOpts),

    /// Runs the built-in oracle suites and reports one line per suite.
    Selfcheck(CommonOpts),
}

#[derive(Subcommand)]
enum RecurCommand {
    /// Solution-module basis of a relation.
    Solve(CommonOpts),

    /// Combine two relations into one annihilating sums or products of
    /// their solutions. Input: a JSON array of two relations.
    Combine(CombineOpts),

    /// Check a sequence window against a relation. Input: {"relation": ...,
    /// "sequence": [...]}.
    Check(CommonOpts),

    /// Split a relation into digit-component relations and recombine them.
    Split(CommonOpts),
}

#[derive(Args)]
struct CombineOpts {
    #[command(flatten)]
    common: CommonOpts,

    /// Which derived sequences the combined relation must annihilate.
    #[arg(long, value_parser = ["sum", "product"])]
    op: String,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Fit a digit expansion's support into the least S_{a,b} class.
    Support(SupportOpts),

    /// Periodicity of digit samples along the expansion's support tails.
    Periodicity(PeriodicityOpts),
}

#[derive(Args)]
struct SupportOpts {
    #[command(flatten)]
    common: CommonOpts,

    /// Largest support-class multiplier tried.
    #[arg(long, default_value_t = 16)]
    a_max: u64,

    /// Largest digit-sum bound tried.
    #[arg(long, default_value_t = 16)]
    b_max: u64,
}

#[derive(Args)]
struct PeriodicityOpts {
    #[command(flatten)]
    common: CommonOpts,

    /// Window head size: how many leading fractional digits of each support
    /// point are frozen before the sliding pattern starts.
    #[arg(long, default_value_t = 1)]
    window: usize,

    /// Cap on the reported pre-period.
    #[arg(long, default_value_t = 64)]
    cap_start: u64,

    /// Cap on the reported period.
    #[arg(long, default_value_t = 64)]
    cap_period: u64,
}

// ---------------------------------------------------------------------------
// Failure plumbing and the output writer.
// ---------------------------------------------------------------------------

/// A job failure, separated by which exit code it maps to. Precision
/// exhaustion is not a failure: exhausted jobs still emit their document
/// and exit 2.
enum Failure {
    /// Bad input or configuration; exit 1.
    Invalid(String),
    /// An internal consistency check tripped; exit 3.
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Internal(msg) => Failure::Internal(msg),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

/// One finished job: the JSON document, its text rendering, and the flags
/// that pick the exit code.
struct Report {
    doc: Value,
    text: String,
    exhausted: bool,
    failed_oracle: bool,
}

impl Report {
    fn ok(doc: Value, text: String) -> Self {
        Report {
            doc,
            text,
            exhausted: false,
            failed_oracle: false,
        }
    }
}

fn emit(opts: &CommonOpts, report: &Report) -> Result<(), Failure> {
    let body = if opts.json {
        let mut s = serde_json::to_string_pretty(&report.doc)
            .map_err(|e| Failure::Internal(format!("cannot serialize output: {e}")))?;
        s.push('\n');
        s
    } else {
        let mut s = report.text.clone();
        if !s.ends_with('\n') {
            s.push('\n');
        }
        s
    };
    match &opts.out {
        Some(path) => fs::write(path, body)
            .map_err(|e| invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn read_input(opts: &CommonOpts) -> Result<Value, Failure> {
    let raw = match &opts.input {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?,
        None => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| invalid(format!("cannot read stdin: {e}")))?;
            s
        }
    };
    serde_json::from_str(&raw).map_err(|e| invalid(format!("input is not valid JSON: {e}")))
}

fn parse_target(opts: &CommonOpts, default: Option<&str>) -> Result<Exp, Failure> {
    let s = opts
        .target
        .as_deref()
        .or(default)
        .ok_or_else(|| invalid("this command needs --target (alias --prec)"))?;
    let e = Exp::parse(s)?;
    if e.is_negative() || e.is_zero() {
        return Err(invalid("the precision target must be positive"));
    }
    Ok(e)
}

fn envelope(command: &str, p: u64, seed: u64) -> Map<String, Value> {
    let mut doc = Map::new();
    doc.insert("command".into(), Value::from(command));
    doc.insert("p".into(), Value::from(p));
    doc.insert("schema".into(), Value::from(SCHEMA));
    doc.insert("seed".into(), Value::from(seed));
    doc
}

fn valuation_json(v: &Valuation) -> Value {
    match v {
        Valuation::Finite(e) => json!({ "kind": "exact", "v": e.to_string() }),
        Valuation::AtLeast(e) => json!({ "kind": "at_least", "v": e.to_string() }),
    }
}

fn valuation_text(v: &Valuation) -> String {
    match v {
        Valuation::Finite(e) => format!("= {e}"),
        Valuation::AtLeast(e) => format!(">= {e}"),
    }
}

/// Substitution certificates: `None` records that the evaluation is exactly
/// zero, `Some(v)` the valuation it was pinned to.
fn certificate_json(c: &Option<Valuation>) -> Value {
    match c {
        None => Value::String("zero".into()),
        Some(v) => valuation_json(v),
    }
}

fn certificate_text(c: &Option<Valuation>) -> String {
    match c {
        None => "exactly zero".into(),
        Some(v) => format!("v_p {}", valuation_text(v)),
    }
}

// ---------------------------------------------------------------------------
// Solvers.
// ---------------------------------------------------------------------------

fn cmd_solve_series(opts: &CommonOpts) -> Result<Report, Failure> {
    let target = parse_target(opts, None)?;
    let input = read_input(opts)?;
    let field = FieldTower::new(opts.p, opts.seed)?;
    let ring = FqRing::new(field);
    let poly = series_poly_from_json(&ring, &input)?;
    let report = solve_roots(&ring, &poly, &target, opts.max_steps)?;

    let mut roots_json = Vec::new();
    let mut lines = vec![format!(
        "solve-series p={} target={} seed={}",
        opts.p, target, opts.seed
    )];
    for (i, root) in report.roots.iter().enumerate() {
        // Certify the emitted digits taken literally as an exact finite sum.
        let literal = HahnSeries::new(&ring, root.value.terms().to_vec(), None)?;
        let cert = root_certificate(&ring, &poly, &literal)?;
        roots_json.push(json!({
            "certificate": certificate_json(&cert),
            "exhausted": root.exhausted,
            "multiplicity": root.multiplicity,
            "slope_reached": valuation_json(&root.slope_reached),
            "value": series_to_json(opts.p, &root.value),
        }));
        let terms: Vec<String> = root
            .value
            .terms()
            .iter()
            .map(|(e, c)| format!("{e} -> {}", format::fq_to_string(opts.p, c)))
            .collect();
        lines.push(format!(
            "root {}: multiplicity {}, slope {}, certificate {}{}",
            i + 1,
            root.multiplicity,
            valuation_text(&root.slope_reached),
            certificate_text(&cert),
            if root.exhausted { " (exhausted)" } else { "" },
        ));
        lines.push(format!("  terms: {}", terms.join("; ")));
    }
    lines.push(format!("steps used: {}", report.steps_used));

    let mut doc = envelope("solve-series", opts.p, opts.seed);
    doc.insert("exhausted".into(), Value::from(report.any_exhausted));
    doc.insert("max_steps".into(), Value::from(opts.max_steps));
    doc.insert("roots".into(), Value::from(roots_json));
    doc.insert("steps_used".into(), Value::from(report.steps_used));
    doc.insert("target".into(), Value::from(target.to_string()));
    Ok(Report {
        doc: Value::Object(doc),
        text: lines.join("\n"),
        exhausted: report.any_exhausted,
        failed_oracle: false,
    })
}

fn mixed_roots_json(p: u64, roots: &[closure_forge_core::padic::MixedRoot]) -> Vec<Value> {
    roots
        .iter()
        .map(|root| {
            json!({
                "certificate": certificate_json(&root.certificate),
                "digits": digit_series_to_json(p, &root.digits),
                "exhausted": root.exhausted,
                "multiplicity": root.multiplicity,
                "slope_reached": valuation_json(&root.slope_reached),
            })
        })
        .collect()
}

fn mixed_roots_text(p: u64, roots: &[closure_forge_core::padic::MixedRoot]) -> Vec<String> {
    let mut lines = Vec::new();
    for (i, root) in roots.iter().enumerate() {
        lines.push(format!(
            "root {}: multiplicity {}, slope {}, certificate {}{}",
            i + 1,
            root.multiplicity,
            valuation_text(&root.slope_reached),
            certificate_text(&root.certificate),
            if root.exhausted { " (exhausted)" } else { "" },
        ));
        let terms: Vec<String> = root
            .digits
            .terms()
            .iter()
            .map(|(e, c)| format!("{e} -> {}", format::fq_to_string(p, c)))
            .collect();
        lines.push(format!("  digits: {}", terms.join("; ")));
    }
    lines
}

fn cmd_solve_padic(opts: &CommonOpts) -> Result<Report, Failure> {
    let target = parse_target(opts, None)?;
    let input = read_input(opts)?;
    let field = FieldTower::new(opts.p, opts.seed)?;
    let w = GaloisTower::new(field.clone());
    let poly = witt_poly_from_json(&field, &input)?;
    let report = solve_over_witt(&w, &poly, &target, opts.max_steps)?;

    let mut lines = vec![format!(
        "solve-padic p={} target={} seed={} working depth {}",
        opts.p, target, opts.seed, report.working_m
    )];
    lines.extend(mixed_roots_text(opts.p, &report.roots));
    lines.push(format!("steps used: {}", report.steps_used));

    let mut doc = envelope("solve-padic", opts.p, opts.seed);
    doc.insert("exhausted".into(), Value::from(report.any_exhausted));
    doc.insert("max_steps".into(), Value::from(opts.max_steps));
    doc.insert(
        "roots".into(),
        Value::from(mixed_roots_json(opts.p, &report.roots)),
    );
    doc.insert("steps_used".into(), Value::from(report.steps_used));
    doc.insert("target".into(), Value::from(target.to_string()));
    doc.insert("working_m".into(), Value::from(report.working_m));
    Ok(Report {
        doc: Value::Object(doc),
        text: lines.join("\n"),
        exhausted: report.any_exhausted,
        failed_oracle: false,
    })
}

/// Series with Witt-ring coefficients:
/// `{"prec": ..., "terms": [["n/d", "W(p,m,d):[...]"], ...]}`.
fn gr_series_to_json(p: u64, x: &HahnSeries<GrRing>) -> Value {
    let terms: Vec<Value> = x
        .terms()
        .iter()
        .map(|(e, c)| json!([e.to_string(), gr_to_string(p, c)]))
        .collect();
    let prec = match x.prec() {
        Some(e) => Value::String(e.to_string()),
        None => Value::Null,
    };
    json!({ "prec": prec, "terms": terms })
}

type GrSeriesData = (Vec<(Exp, GrElem)>, Option<Exp>);

fn gr_series_terms_from_json(w: &GaloisTower, v: &Value) -> Result<GrSeriesData, Failure> {
    let obj = v
        .as_object()
        .ok_or_else(|| invalid("series: expected a JSON object"))?;
    let prec = match obj.get("prec") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(Exp::parse(s)?),
        Some(_) => return Err(invalid("series: prec must be a string \"n/d\" or null")),
    };
    let terms_v = obj
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid("series: missing array field \"terms\""))?;
    let mut terms = Vec::new();
    for t in terms_v {
        let pair = t
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| invalid("series: each term must be [exponent, coeff]"))?;
        let e = Exp::parse(
            pair[0]
                .as_str()
                .ok_or_else(|| invalid("series: exponent must be a string"))?,
        )?;
        let c = gr_from_string(
            w,
            pair[1]
                .as_str()
                .ok_or_else(|| invalid("series: coefficient must be a string"))?,
        )?;
        terms.push((e, c));
    }
    Ok((terms, prec))
}

fn cmd_solve_witt(opts: &CommonOpts) -> Result<Report, Failure> {
    let target = parse_target(opts, None)?;
    let input = read_input(opts)?;
    let field = FieldTower::new(opts.p, opts.seed)?;
    let w = GaloisTower::new(field);

    let obj = input
        .as_object()
        .ok_or_else(|| invalid("polynomial: expected a JSON object"))?;
    let coeffs_v = obj
        .get("coeffs")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid("polynomial: missing array field \"coeffs\""))?;
    let mut parsed = Vec::new();
    for c in coeffs_v {
        parsed.push(gr_series_terms_from_json(&w, c)?);
    }

    // The working ring is the smallest one containing every coefficient:
    // least common level, least digit depth.
    let mut level = 1u32;
    let mut depth: Option<u32> = None;
    for (terms, _) in &parsed {
        for (_, c) in terms {
            level = lcm_u32(level, c.level());
            depth = Some(match depth {
                Some(m) => m.min(c.m()),
                None => c.m(),
            });
        }
    }
    let depth = depth.ok_or_else(|| invalid("polynomial has no visible coefficients"))?;
    let ring = GrRing::new(w.clone(), level, depth)?;
    let mut poly = Vec::with_capacity(parsed.len());
    for (terms, prec) in parsed {
        let terms = terms
            .into_iter()
            .map(|(e, c)| {
                let c = w.truncate(&c, depth)?;
                Ok((e, w.embed_level(&c, level)?))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        poly.push(HahnSeries::new(&ring, terms, prec)?);
    }

    let report = solve_roots(&ring, &poly, &target, opts.max_steps)?;
    let mut roots_json = Vec::new();
    let mut lines = vec![format!(
        "solve-witt p={} target={} seed={} ring W({},{},{})",
        opts.p, target, opts.seed, opts.p, depth, level
    )];
    for (i, root) in report.roots.iter().enumerate() {
        let literal = HahnSeries::new(&ring, root.value.terms().to_vec(), None)?;
        let cert = root_certificate(&ring, &poly, &literal)?;
        roots_json.push(json!({
            "certificate": certificate_json(&cert),
            "exhausted": root.exhausted,
            "multiplicity": root.multiplicity,
            "slope_reached": valuation_json(&root.slope_reached),
            "value": gr_series_to_json(opts.p, &root.value),
        }));
        lines.push(format!(
            "root {}: multiplicity {}, slope {}, certificate {}{}",
            i + 1,
            root.multiplicity,
            valuation_text(&root.slope_reached),
            certificate_text(&cert),
            if root.exhausted { " (exhausted)" } else { "" },
        ));
        let terms: Vec<String> = root
            .value
            .terms()
            .iter()
            .map(|(e, c)| format!("{e} -> {}", format::gr_to_string(opts.p, c)))
            .collect();
        lines.push(format!("  terms: {}", terms.join("; ")));
    }
    lines.push(format!("steps used: {}", report.steps_used));

    let mut doc = envelope("solve-witt", opts.p, opts.seed);
    doc.insert("exhausted".into(), Value::from(report.any_exhausted));
    doc.insert("level".into(), Value::from(level));
    doc.insert("m".into(), Value::from(depth));
    doc.insert("max_steps".into(), Value::from(opts.max_steps));
    doc.insert("roots".into(), Value::from(roots_json));
    doc.insert("steps_used".into(), Value::from(report.steps_used));
    doc.insert("target".into(), Value::from(target.to_string()));
    Ok(Report {
        doc: Value::Object(doc),
        text: lines.join("\n"),
        exhausted: report.any_exhausted,
        failed_oracle: false,
    })
}

fn lcm_u32(a: u32, b: u32) -> u32 {
    let g = gcd_u32(a, b);
    a / g * b
}

fn gcd_u32(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

// ---------------------------------------------------------------------------
// Recurrence jobs.
// ---------------------------------------------------------------------------

fn cmd_recur_solve(opts: &CommonOpts) -> Result<Report, Failure> {
    let input = read_input(opts)?;
    let field = FieldTower::new(opts.p, opts.seed)?;
    let w = GaloisTower::new(field);
    let r = recurrence_from_json(&w, &input)?;
    let sol = solve_semilinear(&w, &r)?;

    let basis: Vec<Value> = sol
        .basis
        .iter()
        .map(|z| Value::String(gr_to_string(opts.p, z)))
        .collect();
    let mut lines = vec![format!(
        "recur solve p={} order={} depth={} seed={}",
        opts.p,
        r.order(),
        r.depth(),
        opts.seed
    )];
    for (i, z) in sol.basis.iter().enumerate() {
        lines.push(format!("basis {}: {}", i + 1, gr_to_string(opts.p, z)));
    }
    lines.push(format!(
        "solution module: free of rank {} over Z/{}^{}",
        sol.basis.len(),
        opts.p,
        sol.m
    ));

    let mut doc = envelope("recur-solve", opts.p, opts.seed);
    doc.insert("basis".into(), Value::from(basis));
    doc.insert("level".into(), Value::from(sol.level));
    doc.insert("m".into(), Value::from(sol.m));
    doc.insert("order".into(), Value::from(r.order() as u64));
    doc.insert("relation".into(), recurrence_to_json(&w, &r)?);
    Ok(Report::ok(Value::Object(doc), lines.join("\n")))
}

fn cmd_recur_combine(opts: &CombineOpts) -> Result<Report, Failure> {
    let common = &opts.common;
    let input = read_input(common)?;
    let field = FieldTower::new(common.p, common.seed)?;
    let w = GaloisTower::new(field);
    let pair = input
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| invalid("combine expects a JSON array of exactly two relations"))?;
    let r1 = recurrence_from_json(&w, &pair[0])?;
    let r2 = recurrence_from_json(&w, &pair[1])?;
    let combined = match opts.op.as_str() {
        "sum" => combine_sum(&w, &r1, &r2)?,
        _ => combine_product(&w, &r1, &r2)?,
    };

    let mut doc = envelope("recur-combine", common.p, common.seed);
    doc.insert("combined".into(), recurrence_to_json(&w, &combined)?);
    doc.insert("op".into(), Value::from(opts.op.clone()));
    doc.insert("orders".into(), json!([r1.order(), r2.order()]));
    let text = format!(
        "recur combine op={} p={} seed={}\norders {} + {} -> {}\ncombined: {}",
        opts.op,
        common.p,
        common.seed,
        r1.order(),
        r2.order(),
        combined.order(),
        serde_json::to_string(&recurrence_to_json(&w, &combined)?)
            .map_err(|e| Failure::Internal(e.to_string()))?,
    );
    Ok(Report::ok(Value::Object(doc), text))
}

fn cmd_recur_check(opts: &CommonOpts) -> Result<Report, Failure> {
    let input = read_input(opts)?;
    let field = FieldTower::new(opts.p, opts.seed)?;
    let w = GaloisTower::new(field);
    let obj = input
        .as_object()
        .ok_or_else(|| invalid("check expects {\"relation\": ..., \"sequence\": [...]}"))?;
    let r = recurrence_from_json(
        &w,
        obj.get("relation")
            .ok_or_else(|| invalid("check input is missing \"relation\""))?,
    )?;
    let seq_v = obj
        .get("sequence")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid("check input is missing the \"sequence\" array"))?;
    let seq = seq_v
        .iter()
        .map(|s| {
            gr_from_string(
                &w,
                s.as_str()
                    .ok_or(Error::Parse("sequence entries must be strings".into()))?,
            )
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let holds = check_recurrence(&w, &seq, &r)?;

    let mut doc = envelope("recur-check", opts.p, opts.seed);
    doc.insert("holds".into(), Value::from(holds));
    doc.insert("order".into(), Value::from(r.order() as u64));
    doc.insert("window".into(), Value::from(seq.len() as u64));
    let text = format!(
        "recur check p={} order={} window={}\nrelation {} on the given window",
        opts.p,
        r.order(),
        seq.len(),
        if holds { "holds" } else { "is violated" },
    );
    Ok(Report::ok(Value::Object(doc), text))
}

fn cmd_recur_split(opts: &CommonOpts) -> Result<Report, Failure> {
    let input = read_input(opts)?;
    let field = FieldTower::new(opts.p, opts.seed)?;
    let w = GaloisTower::new(field);
    let r = recurrence_from_json(&w, &input)?;
    let comps = to_components(&w, &r)?;
    let recombined = from_components(&w, &comps)?;

    let comps_json = comps
        .iter()
        .map(|c| recurrence_to_json(&w, c))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut lines = vec![format!(
        "recur split p={} order={} depth={} -> {} digit components",
        opts.p,
        r.order(),
        r.depth(),
        comps.len()
    )];
    for (i, c) in comps.iter().enumerate() {
        lines.push(format!("component {}: order {}", i, c.order()));
    }
    lines.push(format!("recombined order: {}", recombined.order()));

    let mut doc = envelope("recur-split", opts.p, opts.seed);
    doc.insert("components".into(), Value::from(comps_json));
    doc.insert("depth".into(), Value::from(r.depth()));
    doc.insert("recombined".into(), recurrence_to_json(&w, &recombined)?);
    Ok(Report::ok(Value::Object(doc), lines.join("\n")))
}

// ---------------------------------------------------------------------------
// Analyzers.
// ---------------------------------------------------------------------------

fn cmd_analyze_support(opts: &SupportOpts) -> Result<Report, Failure> {
    let common = &opts.common;
    let input = read_input(common)?;
    let field = FieldTower::new(common.p, common.seed)?;
    let ds = digit_series_from_json(&field, &input)?;
    let support = ds.support();
    let fit = sab_fit(common.p, &support, opts.a_max, opts.b_max);

    let support_json: Vec<Value> = support
        .iter()
        .map(|e| Value::String(e.to_string()))
        .collect();
    let fit_json = match &fit {
        Some(f) => json!({ "a": f.a, "b": f.b }),
        None => Value::Null,
    };
    let mut lines = vec![format!(
        "analyze support p={} points={} precision={}",
        common.p,
        support.len(),
        ds.prec()
    )];
    lines.push(match &fit {
        Some(f) => format!("least covering class: S_{{{},{}}}", f.a, f.b),
        None => format!(
            "no covering class with a <= {} and b <= {}",
            opts.a_max, opts.b_max
        ),
    });

    let mut doc = envelope("analyze-support", common.p, common.seed);
    doc.insert("a_max".into(), Value::from(opts.a_max));
    doc.insert("b_max".into(), Value::from(opts.b_max));
    doc.insert("fit".into(), fit_json);
    doc.insert("prec".into(), Value::from(ds.prec().to_string()));
    doc.insert("support".into(), Value::from(support_json));
    Ok(Report::ok(Value::Object(doc), lines.join("\n")))
}

fn cmd_analyze_periodicity(opts: &PeriodicityOpts) -> Result<Report, Failure> {
    let common = &opts.common;
    let input = read_input(common)?;
    let field = FieldTower::new(common.p, common.seed)?;
    let ds = digit_series_from_json(&field, &input)?;
    let reports = digit_periodicity(
        &field,
        ds.terms(),
        ds.prec(),
        opts.window,
        opts.cap_start,
        opts.cap_period,
    )?;

    let mut windows_json = Vec::new();
    let mut lines = vec![format!(
        "analyze periodicity p={} windows={} head-size={}",
        common.p,
        reports.len(),
        opts.window
    )];
    for r in &reports {
        let verdict_json = match &r.verdict {
            WindowVerdict::Periodic { start, period } => {
                json!({ "kind": "periodic", "period": period, "start": start })
            }
            WindowVerdict::AperiodicWithinPrecision => {
                json!({ "kind": "aperiodic_within_precision" })
            }
        };
        windows_json.push(json!({
            "head": r.head.to_string(),
            "head_digits": r.head_digits,
            "pattern": r.pattern,
            "samples": r.samples,
            "verdict": verdict_json,
        }));
        let verdict_text = match &r.verdict {
            WindowVerdict::Periodic { start, period } => {
                format!("periodic from {start} with period {period}")
            }
            WindowVerdict::AperiodicWithinPrecision => "aperiodic within precision".into(),
        };
        lines.push(format!(
            "window head {} pattern {:?}: {} samples, {}",
            r.head, r.pattern, r.samples, verdict_text
        ));
    }

    let mut doc = envelope("analyze-periodicity", common.p, common.seed);
    doc.insert("cap_period".into(), Value::from(opts.cap_period));
    doc.insert("cap_start".into(), Value::from(opts.cap_start));
    doc.insert("window".into(), Value::from(opts.window as u64));
    doc.insert("windows".into(), Value::from(windows_json));
    Ok(Report::ok(Value::Object(doc), lines.join("\n")))
}

// ---------------------------------------------------------------------------
// The degree-p experiment.
// ---------------------------------------------------------------------------

fn cmd_lampert(opts: &CommonOpts) -> Result<Report, Failure> {
    let target = parse_target(opts, Some("6"))?;
    let field = FieldTower::new(opts.p, opts.seed)?;
    let w = GaloisTower::new(field);
    let poly = lampert_polynomial(&w, &target)?;
    let report = solve_over_witt(&w, &poly, &target, opts.max_steps)?;

    let mut roots_json = Vec::new();
    let mut lines = vec![format!(
        "lampert p={} target={} max-steps={} working depth {}",
        opts.p, target, opts.max_steps, report.working_m
    )];
    for (i, root) in report.roots.iter().enumerate() {
        let support = root.digits.support();
        let fit = sab_fit(opts.p, &support, 16, 16);
        let fit_json = match &fit {
            Some(f) => json!({ "a": f.a, "b": f.b }),
            None => Value::Null,
        };
        roots_json.push(json!({
            "certificate": certificate_json(&root.certificate),
            "digits": digit_series_to_json(opts.p, &root.digits),
            "exhausted": root.exhausted,
            "fit": fit_json,
            "multiplicity": root.multiplicity,
            "slope_reached": valuation_json(&root.slope_reached),
            "support": support.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        }));
        lines.push(format!(
            "root {}: multiplicity {}, {} digits, slope {}, certificate {}{}",
            i + 1,
            root.multiplicity,
            root.digits.terms().len(),
            valuation_text(&root.slope_reached),
            certificate_text(&root.certificate),
            if root.exhausted { " (exhausted)" } else { "" },
        ));
        let shown: Vec<String> = support.iter().map(|e| e.to_string()).collect();
        lines.push(format!("  support: {}", shown.join(", ")));
        lines.push(match &fit {
            Some(f) => format!("  support-class fit: S_{{{},{}}}", f.a, f.b),
            None => "  support-class fit: none within a,b <= 16".into(),
        });
    }
    lines.push(format!("steps used: {}", report.steps_used));

    let mut doc = envelope("lampert", opts.p, opts.seed);
    doc.insert("exhausted".into(), Value::from(report.any_exhausted));
    doc.insert("max_steps".into(), Value::from(opts.max_steps));
    doc.insert(
        "polynomial".into(),
        witt_poly_to_json(opts.p, &poly),
    );
    doc.insert("roots".into(), Value::from(roots_json));
    doc.insert("steps_used".into(), Value::from(report.steps_used));
    doc.insert("target".into(), Value::from(target.to_string()));
    doc.insert("working_m".into(), Value::from(report.working_m));
    Ok(Report {
        doc: Value::Object(doc),
        text: lines.join("\n"),
        exhausted: report.any_exhausted,
        failed_oracle: false,
    })
}

// ---------------------------------------------------------------------------
// Selfcheck.
// ---------------------------------------------------------------------------

fn cmd_selfcheck(opts: &CommonOpts) -> Result<Report, Failure> {
    let outcomes = selfcheck::run_all(opts.seed);
    let mut suites_json = Vec::new();
    let mut lines = vec![format!("selfcheck seed={}", opts.seed)];
    let mut failed = false;
    for (name, result) in &outcomes {
        match result {
            Ok(()) => {
                suites_json.push(json!({ "detail": Value::Null, "name": name, "status": "ok" }));
                lines.push(format!("ok      {name}"));
            }
            Err(detail) => {
                failed = true;
                suites_json
                    .push(json!({ "detail": detail, "name": name, "status": "failed" }));
                lines.push(format!("FAILED  {name}: {detail}"));
            }
        }
    }
    lines.push(if failed {
        "selfcheck FAILED".into()
    } else {
        format!("all {} suites passed", outcomes.len())
    });

    let mut doc = envelope("selfcheck", opts.p, opts.seed);
    doc.insert("suites".into(), Value::from(suites_json));
    Ok(Report {
        doc: Value::Object(doc),
        text: lines.join("\n"),
        exhausted: false,
        failed_oracle: failed,
    })
}

// ---------------------------------------------------------------------------
// Dispatch.
// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let (report, common) = match &cli.command {
        Command::SolveSeries(o) => (cmd_solve_series(o)?, o),
        Command::SolvePadic(o) => (cmd_solve_padic(o)?, o),
        Command::SolveWitt(o) => (cmd_solve_witt(o)?, o),
        Command::Recur(RecurCommand::Solve(o)) => (cmd_recur_solve(o)?, o),
        Command::Recur(RecurCommand::Combine(o)) => (cmd_recur_combine(o)?, &o.common),
        Command::Recur(RecurCommand::Check(o)) => (cmd_recur_check(o)?, o),
        Command::Recur(RecurCommand::Split(o)) => (cmd_recur_split(o)?, o),
        Command::Analyze(AnalyzeCommand::Support(o)) => (cmd_analyze_support(o)?, &o.common),
        Command::Analyze(AnalyzeCommand::Periodicity(o)) => {
            (cmd_analyze_periodicity(o)?, &o.common)
        }
        Command::Lampert(o) => (cmd_lampert(o)?, o),
        Command::Selfcheck(o) => (cmd_selfcheck(o)?, o),
    };
    emit(common, &report)?;
    Ok(if report.failed_oracle {
        ExitCode::from(3)
    } else if report.exhausted {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version render on stdout and exit clean; usage errors
            // are invalid input.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal check failed: {msg}");
            ExitCode::from(3)
        }
    }
}
