//! Command line front end: fitting, rotation, scoring and the Monte
//! Carlo study over CSV files.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical
//! non-convergence. All outputs are deterministic for a fixed seed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use spfa::extraction::{
    minres_fit, spfa_fit, FactorSolution, FitOptions, LoadingMatrix, Method,
};
use spfa::fmt::sig6;
use spfa::linalg::{sample_moment_matrix, MomentMode, SymMatrix};
use spfa::rotation::{rotate, Criterion, Mode, RotationOpts, RotationSolution};
use spfa::scores::{predictor_weights, score_rows, validity_report, Family};
use spfa::simulation::{
    emit_report, parse_config, run_grid, ConditionResult, GridConfig, ReportFormat, RotationTag,
};
use spfa::table2;
use spfa::{Error, Result};

#[derive(Parser)]
#[command(
    name = "spfa",
    version,
    about = "Score predictor factor analysis: fitting, rotation, scoring and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit factor loadings to a data CSV
    Fit(FitArgs),
    /// Rotate a loading matrix CSV
    Rotate(RotateArgs),
    /// Compute factor scores and validity diagnostics
    Scores(ScoresArgs),
    /// Run the Monte Carlo recovery study
    Simulate(SimulateArgs),
    /// Compare simulation results against the published reference table
    Report(ReportArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Data CSV with a header row of variable names
    #[arg(long)]
    input: PathBuf,
    /// Number of factors
    #[arg(long)]
    q: usize,
    /// cfm, spfa or both
    #[arg(long, default_value = "both")]
    method: String,
    /// varimax, parsimax or infomax
    #[arg(long, default_value = "varimax")]
    rotation: String,
    /// orthogonal or oblique
    #[arg(long, default_value = "orthogonal")]
    mode: String,
    /// correlation or covariance
    #[arg(long, default_value = "correlation")]
    moment: String,
    /// Prefix for output files; defaults to the input path without extension
    #[arg(long)]
    out_prefix: Option<PathBuf>,
    /// Objective-change convergence tolerance
    #[arg(long)]
    tol_objective: Option<f64>,
    /// Gradient convergence tolerance
    #[arg(long)]
    tol_gradient: Option<f64>,
    /// Iteration limit
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct RotateArgs {
    /// Loadings CSV (variable column, then one column per factor)
    #[arg(long)]
    input: PathBuf,
    /// varimax, parsimax, infomax or target
    #[arg(long, default_value = "varimax")]
    rotation: String,
    /// orthogonal or oblique
    #[arg(long, default_value = "orthogonal")]
    mode: String,
    /// Target loadings CSV, required for target rotation
    #[arg(long)]
    target: Option<PathBuf>,
    /// Output CSV for the rotated pattern
    #[arg(long)]
    output: Option<PathBuf>,
    /// Optional output CSV for the factor correlations
    #[arg(long)]
    phi_output: Option<PathBuf>,
}

#[derive(Args)]
struct ScoresArgs {
    /// Data CSV with a header row of variable names
    #[arg(long)]
    input: PathBuf,
    /// Number of factors
    #[arg(long)]
    q: usize,
    /// cfm or spfa
    #[arg(long, default_value = "spfa")]
    method: String,
    /// Comma-separated predictor families: best_linear, takeuchi,
    /// krijnen, bartlett, harman
    #[arg(long, default_value = "best_linear")]
    family: String,
    /// varimax, parsimax or infomax
    #[arg(long, default_value = "varimax")]
    rotation: String,
    /// orthogonal or oblique
    #[arg(long, default_value = "orthogonal")]
    mode: String,
    /// correlation or covariance
    #[arg(long, default_value = "correlation")]
    moment: String,
    /// Prefix for output files; defaults to the input path without extension
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Key-value configuration file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated salient loadings
    #[arg(long)]
    sl: Option<String>,
    /// Comma-separated factor counts
    #[arg(long)]
    q: Option<String>,
    /// Comma-separated sample sizes
    #[arg(long)]
    n: Option<String>,
    /// Replications per cell
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated methods (cfm, spfa)
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated rotations (varimax, parsimax, infomax, target)
    #[arg(long)]
    rotations: Option<String>,
    /// Base seed; SPFA_SEED env is the fallback when omitted
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores
    #[arg(long)]
    threads: Option<usize>,
    /// Run the full published design: 1000 replications over the
    /// complete grid
    #[arg(long)]
    full: bool,
    /// Results CSV path
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Optional JSON mirror path
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV produced by simulate
    #[arg(long)]
    input: PathBuf,
    /// Reference data set to compare against; only "table2" is available
    #[arg(long, default_value = "table2")]
    compare: String,
    /// Output path; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::EigenFailed { .. } => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Rotate(args) => cmd_rotate(args),
        Command::Scores(args) => cmd_scores(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "orthogonal" => Ok(Mode::Orthogonal),
        "oblique" => Ok(Mode::Oblique),
        other => Err(Error::Input(format!(
            "unknown mode {other:?}; expected orthogonal or oblique"
        ))),
    }
}

fn parse_moment(s: &str) -> Result<MomentMode> {
    match s {
        "correlation" => Ok(MomentMode::Correlation),
        "covariance" => Ok(MomentMode::Covariance),
        other => Err(Error::Input(format!(
            "unknown moment mode {other:?}; expected correlation or covariance"
        ))),
    }
}

fn parse_analytic_criterion(s: &str) -> Result<Criterion> {
    match s {
        "varimax" => Ok(Criterion::Varimax),
        "parsimax" => Ok(Criterion::Parsimax),
        "infomax" => Ok(Criterion::Infomax),
        other => Err(Error::Input(format!(
            "unknown rotation {other:?}; expected varimax, parsimax or infomax"
        ))),
    }
}

fn parse_list<T: FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(T::from_str)
        .collect()
}

fn out_prefix(explicit: &Option<PathBuf>, input: &Path) -> PathBuf {
    explicit
        .clone()
        .unwrap_or_else(|| input.with_extension(""))
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Read a numeric data CSV with a header row, reporting the offending
/// row and column on parse failure.
fn read_data_csv(path: &Path) -> Result<(DMatrix<f64>, Vec<String>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let names: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Input(format!("{}: empty header row", path.display())));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::Input(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 2,
                record.len(),
                names.len()
            )));
        }
        let mut row = Vec::with_capacity(names.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Input(format!(
                    "{}: row {}, column {:?}: not a number: {field:?}",
                    path.display(),
                    i + 2,
                    names[j]
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    let data = DMatrix::from_fn(rows.len(), names.len(), |i, j| rows[i][j]);
    Ok((data, names))
}

fn read_loadings_csv(path: &Path) -> Result<LoadingMatrix> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.len() < 2 {
        return Err(Error::Input(format!(
            "{}: loadings CSV needs a variable column plus factor columns",
            path.display()
        )));
    }
    let cols = headers[1..].to_vec();
    let mut names = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Input(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 2,
                record.len(),
                headers.len()
            )));
        }
        names.push(record[0].trim().to_string());
        let mut row = Vec::with_capacity(cols.len());
        for (j, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Input(format!(
                    "{}: row {}, column {:?}: not a number: {field:?}",
                    path.display(),
                    i + 2,
                    cols[j]
                ))
            })?;
            row.push(v);
        }
        values.push(row);
    }
    if values.is_empty() {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    let matrix = DMatrix::from_fn(values.len(), cols.len(), |i, j| values[i][j]);
    LoadingMatrix::with_labels(matrix, names, cols)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn loadings_csv_text(loadings: &LoadingMatrix) -> String {
    let mut out = String::from("variable");
    for c in loadings.col_labels() {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    let m = loadings.matrix();
    for i in 0..loadings.p() {
        out.push_str(&loadings.row_labels()[i]);
        for j in 0..loadings.q() {
            out.push(',');
            out.push_str(&sig6(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

fn square_csv_text(labels: &[String], m: &DMatrix<f64>) -> String {
    let mut out = String::from("factor");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for i in 0..m.nrows() {
        out.push_str(&labels[i]);
        for j in 0..m.ncols() {
            out.push(',');
            out.push_str(&sig6(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

fn fit_one(
    method: Method,
    s: &SymMatrix,
    q: usize,
    opts: &FitOptions,
) -> Result<FactorSolution> {
    match method {
        Method::Cfm => minres_fit(s, q, opts),
        Method::Spfa => spfa_fit(s, q, opts),
    }
}

fn solution_json(
    solution: &FactorSolution,
    rotation: &RotationSolution,
    moment: &str,
) -> serde_json::Value {
    let labels = solution.loadings.row_labels();
    let uniqueness: serde_json::Map<String, serde_json::Value> = labels
        .iter()
        .zip(solution.uniqueness.iter())
        .map(|(name, &u)| (name.clone(), serde_json::json!(u)))
        .collect();
    serde_json::json!({
        "method": solution.method.to_string(),
        "q": solution.loadings.q(),
        "moment": moment,
        "objective": solution.objective,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "condition": solution.condition,
        "heywood": solution.heywood.iter().map(|&i| labels[i].clone()).collect::<Vec<_>>(),
        "uniqueness": uniqueness,
        "rotation": {
            "criterion": rotation.criterion,
            "mode": rotation.mode.to_string(),
            "criterion_value": rotation.criterion_value,
            "converged": rotation.converged,
            "random_start_index": rotation.random_start_index,
        },
    })
}

fn cmd_fit(args: FitArgs) -> Result<u8> {
    if args.q < 1 {
        return Err(Error::Input("q must be at least 1".into()));
    }
    let methods: Vec<Method> = match args.method.as_str() {
        "both" => vec![Method::Cfm, Method::Spfa],
        other => vec![other.parse()?],
    };
    let criterion = parse_analytic_criterion(&args.rotation)?;
    let mode = parse_mode(&args.mode)?;
    let moment = parse_moment(&args.moment)?;
    let (data, names) = read_data_csv(&args.input)?;
    let s = sample_moment_matrix(&data, moment, Some(&names))?;
    let mut opts = FitOptions::default();
    if let Some(t) = args.tol_objective {
        opts.tol_objective = t;
    }
    if let Some(t) = args.tol_gradient {
        opts.tol_gradient = t;
    }
    if let Some(m) = args.max_iter {
        opts.max_iter = m;
    }
    let prefix = out_prefix(&args.out_prefix, &args.input);
    let mut all_converged = true;
    for method in methods {
        let solution = fit_one(method, &s, args.q, &opts)?;
        let rotation = rotate(&solution.loadings, &criterion, mode, &RotationOpts::default())?;
        all_converged &= solution.converged && rotation.converged;
        let tag = method.to_string();
        write_text(
            &prefixed(&prefix, &format!(".{tag}.loadings.csv")),
            &loadings_csv_text(&solution.loadings),
        )?;
        write_text(
            &prefixed(&prefix, &format!(".{tag}.rotated.csv")),
            &loadings_csv_text(&rotation.pattern),
        )?;
        let mut json = serde_json::to_string_pretty(&solution_json(&solution, &rotation, &args.moment))?;
        json.push('\n');
        write_text(&prefixed(&prefix, &format!(".{tag}.json")), &json)?;
        println!(
            "{tag}: objective {}, {} iterations, converged: {}",
            sig6(solution.objective),
            solution.iterations,
            solution.converged
        );
    }
    Ok(if all_converged { 0 } else { 2 })
}

fn cmd_rotate(args: RotateArgs) -> Result<u8> {
    let loadings = read_loadings_csv(&args.input)?;
    let mode = parse_mode(&args.mode)?;
    let criterion = if args.rotation == "target" {
        let target_path = args.target.as_ref().ok_or_else(|| {
            Error::Input("target rotation needs --target with a loadings CSV".into())
        })?;
        let target = read_loadings_csv(target_path)?;
        Criterion::Target(target.matrix().clone())
    } else {
        parse_analytic_criterion(&args.rotation)?
    };
    let solution = rotate(&loadings, &criterion, mode, &RotationOpts::default())?;
    let out = args
        .output
        .unwrap_or_else(|| args.input.with_extension("rotated.csv"));
    write_text(&out, &loadings_csv_text(&solution.pattern))?;
    if let Some(phi_path) = &args.phi_output {
        write_text(
            phi_path,
            &square_csv_text(solution.pattern.col_labels(), solution.phi.matrix()),
        )?;
    }
    println!(
        "{}: criterion value {}, converged: {}",
        solution.criterion,
        sig6(solution.criterion_value),
        solution.converged
    );
    Ok(if solution.converged { 0 } else { 2 })
}

fn cmd_scores(args: ScoresArgs) -> Result<u8> {
    if args.q < 1 {
        return Err(Error::Input("q must be at least 1".into()));
    }
    let method: Method = args.method.parse()?;
    let families: Vec<Family> = parse_list(&args.family)?;
    if families.is_empty() {
        return Err(Error::Input("at least one predictor family is required".into()));
    }
    let criterion = parse_analytic_criterion(&args.rotation)?;
    let mode = parse_mode(&args.mode)?;
    let moment = parse_moment(&args.moment)?;
    let (data, names) = read_data_csv(&args.input)?;
    let s = sample_moment_matrix(&data, moment, Some(&names))?;
    let solution = fit_one(method, &s, args.q, &FitOptions::default())?;
    let rotation = rotate(&solution.loadings, &criterion, mode, &RotationOpts::default())?;
    let prefix = out_prefix(&args.out_prefix, &args.input);
    let mut reports = serde_json::Map::new();
    for family in &families {
        let predictor = predictor_weights(&solution, &rotation, *family, &s)?;
        let scores = score_rows(&predictor, &data, moment)?;
        let mut csv = rotation
            .pattern
            .col_labels()
            .join(",");
        csv.push('\n');
        for i in 0..scores.nrows() {
            let row: Vec<String> = (0..scores.ncols()).map(|j| sig6(scores[(i, j)])).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        write_text(&prefixed(&prefix, &format!(".scores.{family}.csv")), &csv)?;
        let report = validity_report(&predictor, &rotation, &s)?;
        let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        reports.insert(
            family.to_string(),
            serde_json::json!({
                "determinacy": report.determinacy,
                "cross_correlations": to_rows(&report.cross_correlations),
                "predictor_intercorrelations": to_rows(&report.predictor_intercorrelations),
                "phi": to_rows(&report.phi),
                "structural_residual": report.structural_residual,
            }),
        );
        let shown: Vec<String> = report.determinacy.iter().map(|d| sig6(*d)).collect();
        println!("{family}: determinacy {}", shown.join(" "));
    }
    let mut json = serde_json::to_string_pretty(&serde_json::Value::Object(reports))?;
    json.push('\n');
    write_text(&prefixed(&prefix, ".validity.json"), &json)?;
    Ok(if solution.converged && rotation.converged { 0 } else { 2 })
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8> {
    let mut config = match &args.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => GridConfig::default(),
    };
    if args.full {
        config.replications = 1000;
    }
    if let Some(sl) = &args.sl {
        config.sl_list = sl
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Input(format!("--sl: not a number: {v:?}")))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(q) = &args.q {
        config.q_list = q
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Input(format!("--q: not an integer: {v:?}")))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(n) = &args.n {
        config.n_list = n
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Input(format!("--n: not an integer: {v:?}")))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    if let Some(methods) = &args.methods {
        config.methods = parse_list(methods)?;
    }
    if let Some(rotations) = &args.rotations {
        config.rotations = parse_list(rotations)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    } else if let Ok(env_seed) = std::env::var("SPFA_SEED") {
        config.seed = env_seed
            .parse()
            .map_err(|_| Error::Input(format!("SPFA_SEED: not an integer: {env_seed:?}")))?;
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    config.validate()?;
    let results = run_grid(&config, |msg| eprintln!("{msg}"))?;
    emit_report(&results, ReportFormat::Csv, &args.out)?;
    if let Some(json_path) = &args.json {
        emit_report(&results, ReportFormat::Json, json_path)?;
    }
    println!("{} result rows written to {}", results.len(), args.out.display());
    Ok(0)
}

fn read_results_csv(path: &Path) -> Result<Vec<ConditionResult>> {
    let mut reader = csv::Reader::from_path(path)?;
    let expected = [
        "sl", "q", "n", "method", "rotation", "replications", "mean_congruence", "hit05",
        "hit10", "failures",
    ];
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    if headers != expected {
        return Err(Error::Input(format!(
            "{}: unexpected results columns {headers:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |j: usize| -> &str { record.get(j).unwrap_or("") };
        let parse_err = |j: usize| {
            Error::Input(format!(
                "{}: row {}, column {:?}: invalid value {:?}",
                path.display(),
                i + 2,
                expected[j],
                field(j)
            ))
        };
        out.push(ConditionResult {
            sl: field(0).parse().map_err(|_| parse_err(0))?,
            q: field(1).parse().map_err(|_| parse_err(1))?,
            n: field(2).parse().map_err(|_| parse_err(2))?,
            method: field(3).parse()?,
            rotation: field(4).parse()?,
            replications: field(5).parse().map_err(|_| parse_err(5))?,
            mean_congruence: field(6).parse().map_err(|_| parse_err(6))?,
            hit05: field(7).parse().map_err(|_| parse_err(7))?,
            hit10: field(8).parse().map_err(|_| parse_err(8))?,
            failures: field(9).parse().map_err(|_| parse_err(9))?,
        });
    }
    Ok(out)
}

fn cmd_report(args: ReportArgs) -> Result<u8> {
    if args.compare != "table2" {
        return Err(Error::Input(format!(
            "unknown reference data set {:?}; only table2 is available",
            args.compare
        )));
    }
    let results = read_results_csv(&args.input)?;
    if results.is_empty() {
        return Err(Error::Input(format!("{}: no result rows", args.input.display())));
    }
    let mut out =
        String::from("sl,q,n,method,hit05,ref_hit05,diff05,hit10,ref_hit10,diff10\n");
    let mut matched = 0usize;
    let mut skipped = 0usize;
    for r in &results {
        if r.rotation != RotationTag::Varimax {
            skipped += 1;
            continue;
        }
        let Some(reference) = table2::lookup(r.sl, r.q, r.n) else {
            skipped += 1;
            continue;
        };
        let (ref05, ref10) = match r.method {
            Method::Cfm => (reference.cfm_05, reference.cfm_10),
            Method::Spfa => (reference.spfa_05, reference.spfa_10),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            sig6(r.sl),
            r.q,
            r.n,
            r.method,
            sig6(r.hit05),
            sig6(ref05),
            sig6((r.hit05 - ref05).abs()),
            sig6(r.hit10),
            sig6(ref10),
            sig6((r.hit10 - ref10).abs()),
        ));
        matched += 1;
    }
    if matched == 0 {
        return Err(Error::Input(
            "no rows matched the reference grid (varimax rotation, published conditions)".into(),
        ));
    }
    if skipped > 0 {
        eprintln!("{skipped} rows outside the reference grid were skipped");
    }
    match &args.output {
        Some(path) => write_text(path, &out)?,
        None => print!("{out}"),
    }
    Ok(0)
}
