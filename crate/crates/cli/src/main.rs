//! Command line front end: fixture generation, full analysis reports,
//! suite verification, and the pairing-only view.
//!
//! Exit codes: 0 all applicable verdicts pass, 1 verification failure,
//! 2 input error. Errors print as JSON objects
//! `{"error":{"kind":...,"message":...}}` on stdout. Reports are
//! byte-identical across runs for fixed inputs and seed; timing goes to
//! stderr.
//!
//! Hand-authoring schema for `verify --data` files (also written by
//! `analyze --emit-data`): a JSON object with `absolute`, `relative`, and
//! `boundary` complexes, each `{"generators": [[label, ...] per degree],
//! "differential": [{"degree", "row", "col", "value"}, ...]}` with `value`
//! an integer string, plus `twist`, a list of the same entry shape pinning
//! the extension block. Missing twist entries are solved for; differentials
//! must satisfy the boundary-squared law or the file is rejected as data.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use morsebound::extract::extract_morse_data_reseeded;
use morsebound::field::{field_to_csv, parse_field_csv, Field};
use morsebound::fixtures::fixture;
use morsebound::mesh::{parse_off, to_off, Mesh};
use morsebound::morse::DEFAULT_RETRIES;
use morsebound::report::parse_bundle;
use morsebound::{
    analyze, check_hand_data, morse_data_from_json, morse_data_to_json, Aggregate, AggregateEntry,
    AnalyzeOptions, Error, Int,
};

/// Named fixtures: family and pinned resolution.
const PINNED: [(&str, &str, usize); 4] = [
    ("DISK1", "disk", 16),
    ("ANN1", "annulus", 16),
    ("MOB1", "mobius", 16),
    ("G2B1", "genus2", 48),
];

#[derive(Parser)]
#[command(name = "morsebound", version, about = "Morse complexes on surfaces with boundary, verified against a simplicial oracle")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a fixture as an OFF mesh and a CSV field.
    Gen(GenArgs),
    /// Run the full pipeline on one input and emit a report.
    Analyze(AnalyzeArgs),
    /// Run the fixture suite (plus any data files) and aggregate verdicts.
    Verify(VerifyArgs),
    /// Run the pipeline but report only the duality section.
    Pairing(AnalyzeArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Fixture name (DISK1, ANN1, MOB1, G2B1) or family (disk, annulus,
    /// mobius, genus2).
    shape: String,
    /// Required for families; ignored for pinned names.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Basename for the two files; defaults to the shape name.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Fixture name (DISK1, ANN1, MOB1, G2B1) or family with --resolution.
    #[arg(long)]
    fixture: Option<String>,
    /// OFF mesh file; needs --field.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// CSV field file (lines `vertex_id,value`, exact values); needs --mesh.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Single-file JSON input with mesh, field, and optional orientation
    /// assertion.
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["json", "text"], default_value = "json")]
    format: String,
    /// Skip the duality and geometric checks.
    #[arg(long)]
    no_pairing: bool,
    /// Also re-extract from the negated field and compare reversed homology.
    #[arg(long)]
    cross_check: bool,
    /// Export the extracted Morse data in the hand-authoring schema.
    #[arg(long)]
    emit_data: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Fixture names to run; defaults to the full built-in suite.
    #[arg(long = "fixture")]
    fixtures: Vec<String>,
    /// Hand-authored Morse data files to check alongside the suite.
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    /// Run no fixtures unless named explicitly.
    #[arg(long)]
    no_default_suite: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["json", "text"], default_value = "json")]
    format: String,
    #[arg(long)]
    no_pairing: bool,
    #[arg(long)]
    cross_check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.cmd {
        Cmd::Gen(args) => run_gen(args),
        Cmd::Analyze(args) => run_analyze(args, false),
        Cmd::Pairing(args) => run_analyze(args, true),
        Cmd::Verify(args) => run_verify(args),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            println!(
                "{}",
                serde_json::json!({"error": {"kind": kind(&e), "message": e.to_string()}})
            );
            ExitCode::from(if input_error(&e) { 2 } else { 1 })
        }
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Parse(_) => "ParseError",
        Error::NotManifold(_) => "NotManifold",
        Error::InvalidComplex { .. } => "InvalidComplex",
        Error::NotAChainMap { .. } => "NotAChainMap",
        Error::NotExact { .. } => "NotExact",
        Error::TwistNotCompatible { .. } => "TwistNotCompatible",
        Error::BirthPairMissing { .. } => "BirthPairMissing",
        Error::NotOrientable => "NotOrientable",
        Error::EtaMismatch { .. } => "EtaMismatch",
        Error::NotQuasiIso { .. } => "NotQuasiIso",
        Error::DescentViolated { .. } => "DescentViolated",
        Error::TransversalityFailure(_) => "TransversalityFailure",
        Error::AcyclicityViolation { .. } => "AcyclicityViolation",
        Error::NoAdmissibleCofacet { .. } => "NoAdmissibleCofacet",
        Error::DegenerateBoundaryVertex { .. } => "DegenerateBoundaryVertex",
        Error::InvariantViolation { .. } => "InvariantViolation",
        Error::BadParameters(_) => "BadParameters",
        Error::Io(_) => "IoError",
    }
}

fn input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse(_)
            | Error::NotManifold(_)
            | Error::BadParameters(_)
            | Error::DegenerateBoundaryVertex { .. }
            | Error::NotOrientable
            | Error::Io(_)
    )
}

fn pinned(name: &str) -> Option<(&'static str, usize)> {
    PINNED
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|&(_, family, res)| (family, res))
}

fn run_gen(args: GenArgs) -> Result<u8, Error> {
    let (family, res) = match pinned(&args.shape) {
        Some(p) => p,
        None => {
            let res = args.resolution.ok_or_else(|| {
                Error::BadParameters(format!(
                    "--resolution is required for shape family `{}`",
                    args.shape
                ))
            })?;
            (args.shape.as_str(), res)
        }
    };
    let (mesh, field) = fixture(family, res)?;
    let name = args.name.clone().unwrap_or_else(|| args.shape.clone());
    fs::create_dir_all(&args.out_dir)?;
    let off_path = args.out_dir.join(format!("{}.off", name));
    let csv_path = args.out_dir.join(format!("{}.csv", name));
    fs::write(&off_path, to_off(&mesh))?;
    fs::write(&csv_path, field_to_csv(&field))?;
    println!("{}", off_path.display());
    println!("{}", csv_path.display());
    Ok(0)
}

/// Resolves the one input an analyze-style command names.
fn load_input(args: &AnalyzeArgs) -> Result<(Mesh, Field, Option<String>, Option<usize>), Error> {
    let picks = usize::from(args.fixture.is_some())
        + usize::from(args.bundle.is_some())
        + usize::from(args.mesh.is_some() || args.field.is_some());
    if picks != 1 {
        return Err(Error::BadParameters(
            "give exactly one input: --fixture, --bundle, or --mesh with --field".to_string(),
        ));
    }
    if let Some(name) = &args.fixture {
        let (family, res) = match pinned(name) {
            Some((family, res)) => (family, args.resolution.unwrap_or(res)),
            None => {
                let res = args.resolution.ok_or_else(|| {
                    Error::BadParameters(format!(
                        "--resolution is required for fixture family `{}`",
                        name
                    ))
                })?;
                (name.as_str(), res)
            }
        };
        let (mesh, field) = fixture(family, res)?;
        return Ok((mesh, field, Some(name.clone()), Some(res)));
    }
    if let Some(path) = &args.bundle {
        let text = fs::read_to_string(path)?;
        let (mesh, field) = parse_bundle(&text)?;
        return Ok((mesh, field, None, None));
    }
    let (Some(mesh_path), Some(field_path)) = (&args.mesh, &args.field) else {
        return Err(Error::BadParameters(
            "--mesh and --field go together".to_string(),
        ));
    };
    let mesh = parse_off(&fs::read_to_string(mesh_path)?)?;
    let field = parse_field_csv(&fs::read_to_string(field_path)?, mesh.n_vertices())?;
    Ok((mesh, field, None, None))
}

fn emit(out: &Option<PathBuf>, body: String) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, body)?,
        None => print!("{}", body),
    }
    Ok(())
}

fn run_analyze(args: AnalyzeArgs, pairing_only: bool) -> Result<u8, Error> {
    let (mesh, field, name, resolution) = load_input(&args)?;
    if pairing_only && !mesh.is_orientable() {
        return Err(Error::NotOrientable);
    }
    let opts = AnalyzeOptions {
        name,
        resolution,
        seed: args.seed,
        pairing: !args.no_pairing,
        cross_check: args.cross_check,
    };
    let t0 = Instant::now();
    let report = analyze(&mesh, &field, &opts)?;
    eprintln!("timing: analysis took {:.3}s", t0.elapsed().as_secs_f64());
    if let Some(path) = &args.emit_data {
        let data = extract_morse_data_reseeded::<Int>(&mesh, &field, args.seed, DEFAULT_RETRIES)?;
        fs::write(path, morse_data_to_json(&mesh, &data)?)?;
    }
    let (body, pass) = if pairing_only {
        let view = report.pairing_view();
        let body = match args.format.as_str() {
            "text" => view.to_text(),
            _ => view.to_json(),
        };
        (body, view.pass)
    } else {
        let body = match args.format.as_str() {
            "text" => report.to_text(),
            _ => report.to_json(),
        };
        (body, report.pass)
    };
    emit(&args.out, body)?;
    Ok(if pass { 0 } else { 1 })
}

fn run_verify(args: VerifyArgs) -> Result<u8, Error> {
    let names: Vec<String> = if !args.fixtures.is_empty() {
        args.fixtures.clone()
    } else if args.no_default_suite {
        Vec::new()
    } else {
        PINNED.iter().map(|(n, _, _)| n.to_string()).collect()
    };

    let mut entries = Vec::new();
    for name in names {
        let t0 = Instant::now();
        let entry = match pinned(&name) {
            None => AggregateEntry::failed(
                name.clone(),
                "fixture",
                format!("unknown fixture `{}`; expected one of DISK1, ANN1, MOB1, G2B1", name),
            ),
            Some((family, res)) => match fixture(family, res).and_then(|(mesh, field)| {
                let opts = AnalyzeOptions {
                    name: Some(name.clone()),
                    resolution: Some(res),
                    seed: args.seed,
                    pairing: !args.no_pairing,
                    cross_check: args.cross_check,
                };
                analyze(&mesh, &field, &opts)
            }) {
                Ok(report) => AggregateEntry::fixture(name.clone(), report),
                Err(e) => AggregateEntry::failed(name.clone(), "fixture", e.to_string()),
            },
        };
        eprintln!("timing: {} took {:.3}s", name, t0.elapsed().as_secs_f64());
        entries.push(entry);
    }
    for path in &args.data {
        let name = path.display().to_string();
        let entry = match fs::read_to_string(path)
            .map_err(Error::from)
            .and_then(|text| morse_data_from_json(&text))
        {
            Ok(hd) => AggregateEntry::data(name, check_hand_data(&hd)),
            Err(e) => AggregateEntry::failed(name, "data", e.to_string()),
        };
        entries.push(entry);
    }

    let agg = Aggregate::new(entries);
    let body = match args.format.as_str() {
        "text" => agg.to_text(),
        _ => agg.to_json(),
    };
    emit(&args.out, body)?;
    Ok(if agg.pass { 0 } else { 1 })
}
