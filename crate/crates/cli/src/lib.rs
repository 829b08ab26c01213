//! Command-line front end: argument grammar, JSON run reports and exit codes.
//!
//! Exit codes: 0 success, 1 property failure or input outside the class,
//! 2 malformed input.

pub mod file;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use leibniz_core::algebra::{
    algebra_class, nilradical_check, AlgebraClass, NilradicalCertificate, Subspace,
};
use leibniz_core::derivations::nil_independence_rank;
use leibniz_core::families::{
    canonical_branches, canonical_samples, instantiate_family, sample_params, FamilySpec, Label,
};
use leibniz_core::invariants::invariant_profile;
use leibniz_core::normalizer::{classify_algebra, round_trip, ScrambleProfile};
use leibniz_core::scalar::{fmt_scalar, parse_scalar};
use leibniz_core::{Algebra, AlgebraError, Scalar};

use crate::file::{AlgebraFile, FileError};

/// Environment variable supplying the default seed for `fuzz` and `catalog`.
pub const SEED_ENV: &str = "LEIBNIZ_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "leibniz",
    version,
    about = "Exact tools for solvable Leibniz algebras with abelian nilradical"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the Leibniz identity and the nilpotent/solvable class
    Verify {
        file: PathBuf,
        /// 0-based basis indices spanning the nilradical candidate
        #[arg(long, value_delimiter = ',')]
        nilradical: Option<Vec<usize>>,
    },
    /// Instantiate a family table as an algebra file
    Generate {
        label: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: Option<usize>,
        /// Comma-separated rationals p/q; delta matrices row-major
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        params: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce to the general form and identify the canonical family
    Classify {
        file: PathBuf,
        #[arg(long, value_delimiter = ',')]
        nilradical: Option<Vec<usize>>,
    },
    /// Basis-independent invariant profile
    Invariants { file: PathBuf },
    /// Scramble, classify and compare against the normalized input
    Fuzz {
        #[arg(long)]
        label: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Profile::NilradicalPreserving)]
        profile: Profile,
    },
    /// Branches canonical representatives fall into
    ListFamilies {
        #[arg(long)]
        k: usize,
    },
    /// Write sampled canonical families with certificates to a directory
    Catalog {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        draws: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Profile {
    NilradicalPreserving,
    General,
}

impl From<Profile> for ScrambleProfile {
    fn from(p: Profile) -> Self {
        match p {
            Profile::NilradicalPreserving => ScrambleProfile::NilradicalPreserving,
            Profile::General => ScrambleProfile::General,
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Input(String),
    #[error("{0:#}")]
    Io(anyhow::Error),
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Kernel(#[from] AlgebraError),
}

impl Failure {
    fn code(&self) -> &'static str {
        match self {
            Failure::Input(_) => "E_INPUT",
            Failure::Io(_) => "E_IO",
            Failure::File(_) => "E_FILE",
            Failure::Kernel(e) => e.code(),
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            Failure::Kernel(
                AlgebraError::Parse(_)
                | AlgebraError::Dimension { .. }
                | AlgebraError::Shape(_)
                | AlgebraError::NotSquare { .. },
            ) => 2,
            Failure::Kernel(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub input_digest: String,
    pub outcome: Value,
    pub seed: Option<u64>,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Outcome of one subcommand: JSON body and whether every checked property
/// held.
struct Done {
    outcome: Value,
    ok: bool,
}

struct RunContext {
    digest: String,
    seed: Option<u64>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn strs(v: &[Scalar]) -> Vec<String> {
    v.iter().map(fmt_scalar).collect()
}

fn class_name(c: &AlgebraClass) -> String {
    match c {
        AlgebraClass::Nilpotent { class } => format!("nilpotent({class})"),
        AlgebraClass::SolvableNotNilpotent { derived_length } => {
            format!("solvable_not_nilpotent({derived_length})")
        }
        AlgebraClass::Neither => "neither".into(),
    }
}

fn certificate_json(c: &NilradicalCertificate) -> Value {
    json!({
        "is_nilpotent_ideal": c.is_nilpotent_ideal,
        "one_dim_extension_maximal": c.one_dim_extension_maximal,
        "failing_witness": c.failing_witness.as_deref().map(strs),
        "passed": c.passed(),
    })
}

fn spec_json(s: &FamilySpec) -> Value {
    json!({ "spec": s.to_string(), "label": s.label.name(), "k": s.k, "t": s.t, "params": strs(&s.params) })
}

fn parse_params(text: &str) -> Result<Vec<Scalar>, Failure> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    Ok(text
        .split(',')
        .map(|p| parse_scalar(p.trim()))
        .collect::<Result<Vec<_>, _>>()?)
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Input(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn read_algebra(path: &Path, ctx: &mut RunContext) -> Result<Algebra, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Io)?;
    ctx.digest = sha256_hex(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| Failure::Input(format!("{} is not UTF-8", path.display())))?;
    Ok(AlgebraFile::parse(&text)?.to_algebra()?)
}

fn nilradical_hint(a: &Algebra, indices: &Option<Vec<usize>>) -> Result<Option<Subspace>, Failure> {
    let Some(idx) = indices else { return Ok(None) };
    if let Some(bad) = idx.iter().find(|&&i| i >= a.dim()) {
        return Err(Failure::Input(format!(
            "nilradical index {bad} out of range for dim {}",
            a.dim()
        )));
    }
    Ok(Some(Subspace::coordinate(a.dim(), idx)))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Io)
}

fn verify(
    path: &Path,
    nilradical: &Option<Vec<usize>>,
    ctx: &mut RunContext,
) -> Result<Done, Failure> {
    let a = read_algebra(path, ctx)?;
    let violations = a.check_leibniz();
    let mut ok = violations.is_empty();
    let first = violations.first().map(
        |v| json!({ "triple": [v.triple.0, v.triple.1, v.triple.2], "defect": strs(&v.defect) }),
    );
    let mut outcome = json!({
        "dim": a.dim(),
        "leibniz": { "pass": violations.is_empty(), "violations": violations.len(), "first_violation": first },
        "class": class_name(&algebra_class(&a)?),
    });
    if let Some(n) = nilradical_hint(&a, nilradical)? {
        let cert = nilradical_check(&a, &n)?;
        ok &= cert.passed();
        outcome["nilradical"] = certificate_json(&cert);
    }
    Ok(Done { outcome, ok })
}

fn generate(
    label: &str,
    k: usize,
    t: Option<usize>,
    params: &str,
    out: &Option<PathBuf>,
) -> Result<Done, Failure> {
    let spec = FamilySpec::new(label.parse::<Label>()?, k, t, parse_params(params)?)?;
    let a = instantiate_family(&spec)?;
    let file = AlgebraFile::from_algebra(&a);
    let mut outcome = spec_json(&spec);
    outcome["dim"] = json!(a.dim());
    outcome["nonzero_products"] = json!(file.products.len());
    match out {
        Some(path) => {
            write_file(path, &(file.to_json() + "\n"))?;
            outcome["written"] = json!(path.display().to_string());
        }
        None => outcome["algebra"] = serde_json::to_value(&file).expect("plain data serializes"),
    }
    Ok(Done { outcome, ok: true })
}

fn classify(
    path: &Path,
    nilradical: &Option<Vec<usize>>,
    ctx: &mut RunContext,
) -> Result<Done, Failure> {
    let a = read_algebra(path, ctx)?;
    let hint = nilradical_hint(&a, nilradical)?;
    let (form, result) = classify_algebra(&a, hint.as_ref())?;
    let mut outcome = spec_json(&result.spec.spec);
    outcome["theorem_spec"] = json!(result.theorem_spec.to_string());
    outcome["general_form_t"] = json!(form.t);
    outcome["case_trace"] = json!(result.case_trace);
    outcome["log"] = json!(result.change.log);
    outcome["change"] = json!(result
        .change
        .matrix
        .to_rows()
        .iter()
        .map(|r| strs(r))
        .collect::<Vec<_>>());
    Ok(Done { outcome, ok: true })
}

fn invariants(path: &Path, ctx: &mut RunContext) -> Result<Done, Failure> {
    let a = read_algebra(path, ctx)?;
    let p = invariant_profile(&a)?;
    let spectrum: Vec<Value> = p
        .right_spectrum_multiset
        .iter()
        .map(|(v, c)| json!({ "value": fmt_scalar(v), "count": c }))
        .collect();
    let outcome = json!({
        "dim": p.dim,
        "lcs_dims": p.lcs_dims,
        "ds_dims": p.ds_dims,
        "ann_r_dim": p.ann_r_dim,
        "ann_l_dim": p.ann_l_dim,
        "center_dim": p.center_dim,
        "der_dim": p.der_dim,
        "squared_dim": p.squared_dim,
        "spectrum_available": p.spectrum_available,
        "right_spectrum_multiset": spectrum,
    });
    Ok(Done { outcome, ok: true })
}

struct Fuzz<'a> {
    label: &'a str,
    k: usize,
    t: Option<usize>,
    trials: usize,
    profile: Profile,
}

fn fuzz(f: &Fuzz<'_>, seed: u64) -> Result<Done, Failure> {
    let label: Label = f.label.parse()?;
    let ts = match f.t {
        Some(t) => vec![t],
        None => label.admissible_t(f.k),
    };
    if ts.is_empty() {
        return Err(
            AlgebraError::Shape(format!("{label} has no admissible t at k = {}", f.k)).into(),
        );
    }
    // validate the grammar once before spawning trials
    FamilySpec::new(
        label,
        f.k,
        Some(ts[0]),
        vec![Scalar::from_integer(0.into()); label.param_len(f.k)],
    )?;
    let params = sample_params(label, f.k, f.trials, seed);
    let outcomes: Vec<(usize, Option<Value>)> = (0..f.trials)
        .into_par_iter()
        .map(|i| {
            let trial_seed = seed.wrapping_add(i as u64);
            let counterexample = |spec: &FamilySpec, reason: String| {
                Some(json!({ "trial": i, "trial_seed": trial_seed, "spec": spec.to_string(), "reason": reason }))
            };
            let spec = match FamilySpec::new(label, f.k, Some(ts[i % ts.len()]), params[i].clone()) {
                Ok(s) => s,
                Err(e) => return (i, Some(json!({ "trial": i, "reason": e.to_string() }))),
            };
            let verdict = match round_trip(&spec, trial_seed, f.profile.into()) {
                Ok(r) if r.passed() => None,
                Ok(r) => counterexample(&spec, format!("classified {} expected {}", r.classified, r.expected)),
                Err(e) => counterexample(&spec, format!("{}: {e}", e.code())),
            };
            (i, verdict)
        })
        .collect();
    let failed: Vec<&(usize, Option<Value>)> =
        outcomes.iter().filter(|(_, v)| v.is_some()).collect();
    let first = failed
        .iter()
        .min_by_key(|(i, _)| *i)
        .and_then(|(_, v)| v.clone());
    let outcome = json!({
        "label": label.name(),
        "k": f.k,
        "t": f.t,
        "profile": ScrambleProfile::from(f.profile).to_string(),
        "trials": f.trials,
        "passed": f.trials - failed.len(),
        "failed": failed.len(),
        "first_counterexample": first,
    });
    Ok(Done {
        outcome,
        ok: failed.is_empty(),
    })
}

fn list_families(k: usize) -> Result<Done, Failure> {
    if k < 2 {
        return Err(Failure::Input(format!("k must be at least 2, got {k}")));
    }
    let branches: Vec<Value> = canonical_branches(k)
        .iter()
        .map(|b| json!({ "label": b.label.name(), "t": b.t, "pattern": b.pattern }))
        .collect();
    Ok(Done {
        outcome: json!({ "k": k, "count": branches.len(), "branches": branches }),
        ok: true,
    })
}

fn catalog(k: usize, out: &Path, draws: usize, seed: u64) -> Result<Done, Failure> {
    if k < 2 {
        return Err(Failure::Input(format!("k must be at least 2, got {k}")));
    }
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(Failure::Io)?;
    let mut entries = Vec::new();
    let mut ok = true;
    for (i, spec) in canonical_samples(k, draws, seed)?.iter().enumerate() {
        let a = instantiate_family(spec)?;
        let n = Subspace::coordinate(a.dim(), &(0..k).collect::<Vec<_>>());
        let q: Vec<Vec<Scalar>> = (k..a.dim()).map(|j| a.unit(j)).collect();
        let violations = a.check_leibniz().len();
        let cert = nilradical_check(&a, &n)?;
        let indep = nil_independence_rank(&a, &n, &q)?;
        let class = algebra_class(&a)?;
        let passed = violations == 0
            && cert.passed()
            && indep.independent
            && matches!(class, AlgebraClass::SolvableNotNilpotent { .. });
        ok &= passed;
        let stem = format!("{i:03}-{}-t{}", spec.label.name(), spec.t);
        let certificate = json!({
            "family": spec_json(spec),
            "leibniz_violations": violations,
            "class": class_name(&class),
            "nilradical": certificate_json(&cert),
            "nil_independence": { "rank": indep.rank, "independent": indep.independent },
            "passed": passed,
        });
        write_file(
            &out.join(format!("{stem}.json")),
            &(AlgebraFile::from_algebra(&a).to_json() + "\n"),
        )?;
        write_file(
            &out.join(format!("{stem}.cert.json")),
            &(serde_json::to_string_pretty(&certificate).expect("plain data serializes") + "\n"),
        )?;
        entries.push(json!({ "file": stem, "spec": spec.to_string(), "passed": passed }));
    }
    Ok(Done {
        outcome: json!({ "k": k, "draws": draws, "count": entries.len(), "entries": entries }),
        ok,
    })
}

fn execute(command: &Command, ctx: &mut RunContext) -> Result<Done, Failure> {
    match command {
        Command::Verify { file, nilradical } => verify(file, nilradical, ctx),
        Command::Generate {
            label,
            k,
            t,
            params,
            out,
        } => generate(label, *k, *t, params, out),
        Command::Classify { file, nilradical } => classify(file, nilradical, ctx),
        Command::Invariants { file } => invariants(file, ctx),
        Command::Fuzz {
            label,
            k,
            t,
            trials,
            seed,
            profile,
        } => {
            let seed = resolve_seed(*seed)?;
            ctx.seed = Some(seed);
            fuzz(
                &Fuzz {
                    label,
                    k: *k,
                    t: *t,
                    trials: *trials,
                    profile: *profile,
                },
                seed,
            )
        }
        Command::ListFamilies { k } => list_families(*k),
        Command::Catalog {
            k,
            out,
            draws,
            seed,
        } => {
            let seed = resolve_seed(*seed)?;
            ctx.seed = Some(seed);
            catalog(*k, out, *draws, seed)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Verify { .. } => "verify",
        Command::Generate { .. } => "generate",
        Command::Classify { .. } => "classify",
        Command::Invariants { .. } => "invariants",
        Command::Fuzz { .. } => "fuzz",
        Command::ListFamilies { .. } => "list-families",
        Command::Catalog { .. } => "catalog",
    }
}

/// Parses `argv` (program name first), runs the subcommand and renders the
/// JSON report.
pub fn run_command<I, T>(argv: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Output {
                    code: 0,
                    stdout: text,
                    stderr: String::new(),
                },
                _ => Output {
                    code: 2,
                    stdout: String::new(),
                    stderr: text,
                },
            };
        }
    };
    let joined: Vec<u8> = args
        .iter()
        .skip(1)
        .flat_map(|a| {
            a.to_string_lossy()
                .into_owned()
                .into_bytes()
                .into_iter()
                .chain([0])
        })
        .collect();
    let mut ctx = RunContext {
        digest: sha256_hex(&joined),
        seed: None,
    };
    let (outcome, code, stderr) = match execute(&cli.command, &mut ctx) {
        Ok(done) => (done.outcome, if done.ok { 0 } else { 1 }, String::new()),
        Err(f) => {
            let msg = f.to_string();
            (
                json!({ "error": { "code": f.code(), "message": msg } }),
                f.exit_code(),
                format!("error: {msg}\n"),
            )
        }
    };
    let report = RunReport {
        command: command_name(&cli.command).to_string(),
        input_digest: ctx.digest,
        outcome,
        seed: ctx.seed,
        exact: true,
    };
    let stdout = serde_json::to_string_pretty(&report).expect("plain data serializes") + "\n";
    Output {
        code,
        stdout,
        stderr,
    }
}
