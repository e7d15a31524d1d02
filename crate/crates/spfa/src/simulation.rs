//! Monte Carlo recovery study for single-item indicators.
//!
//! Populations have one salient loading and two small loadings of .30
//! per factor, samples are drawn by Box-Muller composition of common
//! and unique factors, both extraction methods are fitted to every
//! sample, rotated, aligned to the population, and scored for Tucker
//! congruence and single-item hit rates.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extraction::{minres_fit, spfa_fit, FitOptions, LoadingMatrix, Method};
use crate::fmt::sig6;
use crate::linalg::{sample_moment_matrix, MomentMode, SymMatrix};
use crate::rng::{derive_seed, Rng};
use crate::rotation::{rotate, Criterion, Mode, RotationOpts};

const SMALL_LOADING: f64 = 0.30;

/// Population loading structure for one simulation condition.
#[derive(Debug, Clone)]
pub struct PopulationSpec {
    pub q: usize,
    pub sl: f64,
    /// p x q block pattern with p = 10q.
    pub loadings: LoadingMatrix,
    /// Row index of the salient loading of each factor.
    pub salient_index: Vec<usize>,
    /// False when sl does not exceed the small loadings, in which case
    /// the salient variable is not identifiable by margin.
    pub salient_dominant: bool,
}

/// Block population: factor j owns variables 10j+1..10(j+1), with the
/// salient loading on the block's first variable and .30 on the next
/// two.
pub fn build_population(q: usize, sl: f64) -> Result<PopulationSpec> {
    if q < 1 {
        return Err(Error::Input("factor count must be at least 1".into()));
    }
    if !(sl > 0.0 && sl < 1.0) {
        return Err(Error::Input(format!(
            "salient loading must lie in (0, 1), got {sl}"
        )));
    }
    let p = 10 * q;
    let mut lambda = DMatrix::zeros(p, q);
    let mut salient_index = Vec::with_capacity(q);
    for j in 0..q {
        let base = 10 * j;
        lambda[(base, j)] = sl;
        lambda[(base + 1, j)] = SMALL_LOADING;
        lambda[(base + 2, j)] = SMALL_LOADING;
        salient_index.push(base);
    }
    Ok(PopulationSpec {
        q,
        sl,
        loadings: LoadingMatrix::new(lambda)?,
        salient_index,
        salient_dominant: sl > SMALL_LOADING,
    })
}

/// Implied population moment matrix ΛΛ' + Ψ² with unit diagonal.
pub fn population_moment(spec: &PopulationSpec) -> Result<SymMatrix> {
    let l = spec.loadings.matrix();
    let mut m = l * l.transpose();
    for i in 0..m.nrows() {
        m[(i, i)] = 1.0;
    }
    SymMatrix::from_matrix(m)
}

/// Draw an n x p sample x = Λf + Ψu with standard normal f and u.
pub fn generate_sample(spec: &PopulationSpec, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    generate_sample_with_factors(spec, n, seed).map(|(data, _)| data)
}

/// Sample plus the common factor scores that generated it, for
/// validation against known factors.
pub fn generate_sample_with_factors(
    spec: &PopulationSpec,
    n: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if n < 2 {
        return Err(Error::Input("sample size must be at least 2".into()));
    }
    let l = spec.loadings.matrix();
    let (p, q) = (l.nrows(), l.ncols());
    let mut psi = Vec::with_capacity(p);
    for i in 0..p {
        let h2: f64 = l.row(i).iter().map(|v| v * v).sum();
        if h2 >= 1.0 {
            return Err(Error::Input(format!(
                "communality of variable {} is not below 1",
                i + 1
            )));
        }
        psi.push((1.0 - h2).sqrt());
    }
    let mut rng = Rng::seed_from(seed);
    let mut data = DMatrix::zeros(n, p);
    let mut factors = DMatrix::zeros(n, q);
    let mut f = vec![0.0; q];
    for row in 0..n {
        for (j, fj) in f.iter_mut().enumerate() {
            *fj = rng.next_normal();
            factors[(row, j)] = *fj;
        }
        for i in 0..p {
            let common: f64 = (0..q).map(|j| l[(i, j)] * f[j]).sum();
            data[(row, i)] = common + psi[i] * rng.next_normal();
        }
    }
    Ok((data, factors))
}

/// Tucker congruence of two loading columns; 0 for a zero column.
pub fn tucker_congruence(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na <= 0.0 || nb <= 0.0 {
        return 0.0;
    }
    num / (na * nb).sqrt()
}

fn col(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let p = m.nrows();
    &m.as_slice()[j * p..(j + 1) * p]
}

/// Column matching of a sample pattern to a reference pattern.
///
/// `permutation[j]` is the sample column assigned to reference factor
/// j, `signs[j]` the reflection applied to it, and `congruences[j]` the
/// resulting absolute Tucker congruence.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    pub congruences: Vec<f64>,
}

impl Alignment {
    /// Reorder and reflect the columns of `m` into reference order.
    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let p = m.nrows();
        let q = self.permutation.len();
        DMatrix::from_fn(p, q, |i, j| self.signs[j] * m[(i, self.permutation[j])])
    }
}

/// Optimal one-to-one column assignment maximizing the sum of absolute
/// Tucker congruences, found by subset dynamic programming.
pub fn align_columns(sample: &DMatrix<f64>, reference: &DMatrix<f64>) -> Alignment {
    let q = reference.ncols();
    debug_assert_eq!(sample.ncols(), q);
    debug_assert_eq!(sample.nrows(), reference.nrows());
    let mut c = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            c[(i, j)] = tucker_congruence(col(sample, i), col(reference, j));
        }
    }
    // dp over subsets of sample columns assigned to the first k
    // reference factors, k = popcount(mask)
    let full = 1usize << q;
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        let j = mask.count_ones() as usize;
        if j == q {
            continue;
        }
        for i in 0..q {
            let bit = 1usize << i;
            if mask & bit != 0 {
                continue;
            }
            let cand = best[mask] + c[(i, j)].abs();
            if cand > best[mask | bit] {
                best[mask | bit] = cand;
                choice[mask | bit] = i;
            }
        }
    }
    let mut permutation = vec![0usize; q];
    let mut mask = full - 1;
    for j in (0..q).rev() {
        let i = choice[mask];
        permutation[j] = i;
        mask &= !(1usize << i);
    }
    let mut signs = Vec::with_capacity(q);
    let mut congruences = Vec::with_capacity(q);
    for j in 0..q {
        let v = c[(permutation[j], j)];
        signs.push(if v < 0.0 { -1.0 } else { 1.0 });
        congruences.push(v.abs());
    }
    Alignment {
        permutation,
        signs,
        congruences,
    }
}

/// Convenience wrapper aligning a fitted pattern to the population.
pub fn align_to_population(pattern: &LoadingMatrix, spec: &PopulationSpec) -> Alignment {
    align_columns(pattern.matrix(), spec.loadings.matrix())
}

/// Single-item hit per factor: the salient variable's loading must
/// exceed all other loadings in its column and in its row by at least
/// `delta`. The row condition is vacuous for q = 1.
pub fn single_item_hit(aligned: &DMatrix<f64>, spec: &PopulationSpec, delta: f64) -> Vec<bool> {
    let (p, q) = (aligned.nrows(), aligned.ncols());
    let mut hits = Vec::with_capacity(q);
    for j in 0..q {
        let star = spec.salient_index[j];
        let own = aligned[(star, j)].abs();
        let mut col_rival: f64 = 0.0;
        for i in 0..p {
            if i != star {
                col_rival = col_rival.max(aligned[(i, j)].abs());
            }
        }
        let mut row_rival: f64 = 0.0;
        for k in 0..q {
            if k != j {
                row_rival = row_rival.max(aligned[(star, k)].abs());
            }
        }
        let col_ok = own - col_rival >= delta;
        let row_ok = q == 1 || own - row_rival >= delta;
        hits.push(col_ok && row_ok);
    }
    hits
}

/// Rotation criteria available in the study grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationTag {
    Varimax,
    Parsimax,
    Infomax,
    Target,
}

impl std::fmt::Display for RotationTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            RotationTag::Varimax => "varimax",
            RotationTag::Parsimax => "parsimax",
            RotationTag::Infomax => "infomax",
            RotationTag::Target => "target",
        };
        write!(f, "{tag}")
    }
}

impl std::str::FromStr for RotationTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "varimax" => Ok(RotationTag::Varimax),
            "parsimax" => Ok(RotationTag::Parsimax),
            "infomax" => Ok(RotationTag::Infomax),
            "target" => Ok(RotationTag::Target),
            other => Err(Error::Input(format!(
                "unknown rotation {other:?}; expected varimax, parsimax, infomax or target"
            ))),
        }
    }
}

/// Full study configuration.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub sl_list: Vec<f64>,
    pub q_list: Vec<usize>,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub rotations: Vec<RotationTag>,
    pub delta_list: Vec<f64>,
    pub seed: u64,
    /// 0 uses all available cores.
    pub threads: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            sl_list: vec![0.50, 0.60, 0.70, 0.80],
            q_list: vec![2, 5, 8],
            n_list: vec![200, 400, 1000],
            replications: 200,
            methods: vec![Method::Cfm, Method::Spfa],
            rotations: vec![RotationTag::Varimax],
            delta_list: vec![0.05, 0.10],
            seed: 42,
            threads: 0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sl_list.is_empty() || self.q_list.is_empty() || self.n_list.is_empty() {
            return Err(Error::Input("sl_list, q_list and n_list must be non-empty".into()));
        }
        if self.replications < 1 {
            return Err(Error::Input("replications must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Input("methods must be non-empty".into()));
        }
        if self.rotations.is_empty() {
            return Err(Error::Input("rotations must be non-empty".into()));
        }
        for &d in &self.delta_list {
            if (d - 0.05).abs() > 1e-12 && (d - 0.10).abs() > 1e-12 {
                return Err(Error::Input(format!(
                    "delta_list supports only 0.05 and 0.10, got {d}"
                )));
            }
        }
        for &sl in &self.sl_list {
            if !(sl > 0.0 && sl < 1.0) {
                return Err(Error::Input(format!("sl_list entry {sl} outside (0, 1)")));
            }
        }
        for &q in &self.q_list {
            if q < 1 {
                return Err(Error::Input("q_list entries must be at least 1".into()));
            }
        }
        for &n in &self.n_list {
            if n < 2 {
                return Err(Error::Input("n_list entries must be at least 2".into()));
            }
        }
        Ok(())
    }
}

/// Aggregated outcome of one grid cell for one method and rotation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub sl: f64,
    pub q: usize,
    pub n: usize,
    pub method: Method,
    pub rotation: RotationTag,
    pub replications: usize,
    pub mean_congruence: f64,
    pub hit05: f64,
    pub hit10: f64,
    pub failures: usize,
}

#[derive(Clone)]
struct ComboOutcome {
    congruence_sum: f64,
    factor_count: usize,
    hits05: usize,
    hits10: usize,
    failed: bool,
}

impl ComboOutcome {
    fn empty_failed() -> Self {
        Self {
            congruence_sum: 0.0,
            factor_count: 0,
            hits05: 0,
            hits10: 0,
            failed: true,
        }
    }
}

fn replicate_once(
    spec: &PopulationSpec,
    n: usize,
    seed: u64,
    methods: &[Method],
    rotations: &[RotationTag],
) -> Vec<ComboOutcome> {
    let combos = methods.len() * rotations.len();
    let fail_all = || vec![ComboOutcome::empty_failed(); combos];
    let data = match generate_sample(spec, n, seed) {
        Ok(d) => d,
        Err(_) => return fail_all(),
    };
    let s = match sample_moment_matrix(&data, MomentMode::Correlation, None) {
        Ok(s) => s,
        Err(_) => return fail_all(),
    };
    let q = spec.q;
    let minres = minres_fit(&s, q, &FitOptions::default()).ok();
    let mut out = Vec::with_capacity(combos);
    for method in methods {
        let solution = match method {
            Method::Cfm => minres.clone(),
            Method::Spfa => {
                let opts = FitOptions {
                    start: minres.as_ref().map(|m| m.loadings.matrix().clone()),
                    ..FitOptions::default()
                };
                spfa_fit(&s, q, &opts).ok()
            }
        };
        for tag in rotations {
            let Some(solution) = solution.as_ref() else {
                out.push(ComboOutcome::empty_failed());
                continue;
            };
            let criterion = match tag {
                RotationTag::Varimax => Criterion::Varimax,
                RotationTag::Parsimax => Criterion::Parsimax,
                RotationTag::Infomax => Criterion::Infomax,
                RotationTag::Target => Criterion::Target(spec.loadings.matrix().clone()),
            };
            let rot = match rotate(
                &solution.loadings,
                &criterion,
                Mode::Orthogonal,
                &RotationOpts::default(),
            ) {
                Ok(r) => r,
                Err(_) => {
                    out.push(ComboOutcome::empty_failed());
                    continue;
                }
            };
            let alignment = align_to_population(&rot.pattern, spec);
            let aligned = alignment.apply(rot.pattern.matrix());
            let hits05 = single_item_hit(&aligned, spec, 0.05);
            let hits10 = single_item_hit(&aligned, spec, 0.10);
            out.push(ComboOutcome {
                congruence_sum: alignment.congruences.iter().sum(),
                factor_count: q,
                hits05: hits05.iter().filter(|h| **h).count(),
                hits10: hits10.iter().filter(|h| **h).count(),
                failed: !solution.converged || !rot.converged,
            });
        }
    }
    out
}

/// Run one (sl, q, n) cell: `replications` samples, every requested
/// method and rotation scored on each sample. Replication r draws its
/// seed from (base seed, condition, r), so methods always see identical
/// data and the thread count never changes the result.
pub fn run_cell(
    sl: f64,
    q: usize,
    n: usize,
    replications: usize,
    methods: &[Method],
    rotations: &[RotationTag],
    base_seed: u64,
) -> Result<Vec<ConditionResult>> {
    let spec = build_population(q, sl)?;
    let sl_key = (sl * 1000.0).round() as u64;
    let per_rep: Vec<Vec<ComboOutcome>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(base_seed, &[sl_key, q as u64, n as u64, r as u64]);
            replicate_once(&spec, n, seed, methods, rotations)
        })
        .collect();
    let combos = methods.len() * rotations.len();
    let mut results = Vec::with_capacity(combos);
    for (mi, method) in methods.iter().enumerate() {
        for (ri, rotation) in rotations.iter().enumerate() {
            let idx = mi * rotations.len() + ri;
            let mut congruence_sum = 0.0;
            let mut factor_count = 0usize;
            let mut hits05 = 0usize;
            let mut hits10 = 0usize;
            let mut failures = 0usize;
            for rep in &per_rep {
                let c = &rep[idx];
                congruence_sum += c.congruence_sum;
                factor_count += c.factor_count;
                hits05 += c.hits05;
                hits10 += c.hits10;
                if c.failed {
                    failures += 1;
                }
            }
            let denom = factor_count.max(1) as f64;
            results.push(ConditionResult {
                sl,
                q,
                n,
                method: *method,
                rotation: *rotation,
                replications,
                mean_congruence: congruence_sum / denom,
                hit05: 100.0 * hits05 as f64 / denom,
                hit10: 100.0 * hits10 as f64 / denom,
                failures,
            });
        }
    }
    Ok(results)
}

/// Run the whole grid; `progress` is called once per finished cell.
pub fn run_grid(
    config: &GridConfig,
    mut progress: impl FnMut(&str) + Send,
) -> Result<Vec<ConditionResult>> {
    config.validate()?;
    let run = |results: &mut Vec<ConditionResult>, progress: &mut dyn FnMut(&str)| -> Result<()> {
        for &sl in &config.sl_list {
            for &q in &config.q_list {
                for &n in &config.n_list {
                    let cell = run_cell(
                        sl,
                        q,
                        n,
                        config.replications,
                        &config.methods,
                        &config.rotations,
                        config.seed,
                    )?;
                    progress(&format!(
                        "cell sl={} q={q} n={n}: {} result rows",
                        sig6(sl),
                        cell.len()
                    ));
                    results.extend(cell);
                }
            }
        }
        Ok(())
    };
    let mut results = Vec::new();
    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Input(format!("cannot build thread pool: {e}")))?;
        pool.install(|| run(&mut results, &mut progress))?;
    } else {
        run(&mut results, &mut progress)?;
    }
    sort_results(&mut results);
    Ok(results)
}

fn sort_results(results: &mut [ConditionResult]) {
    results.sort_by(|a, b| {
        a.sl
            .partial_cmp(&b.sl)
            .unwrap()
            .then(a.q.cmp(&b.q))
            .then(a.n.cmp(&b.n))
            .then(a.method.to_string().cmp(&b.method.to_string()))
            .then(a.rotation.cmp(&b.rotation))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Serialize results to CSV or a JSON mirror with identical fields.
pub fn emit_report(
    results: &[ConditionResult],
    format: ReportFormat,
    out_path: &Path,
) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Input("no results to report".into()));
    }
    let mut sorted = results.to_vec();
    sort_results(&mut sorted);
    let text = match format {
        ReportFormat::Csv => results_csv(&sorted),
        ReportFormat::Json => {
            let rows: Vec<serde_json::Value> = sorted.iter().map(result_json).collect();
            let mut s = serde_json::to_string_pretty(&rows)?;
            s.push('\n');
            s
        }
    };
    let mut file = std::fs::File::create(out_path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

fn result_json(r: &ConditionResult) -> serde_json::Value {
    serde_json::json!({
        "sl": r.sl,
        "q": r.q,
        "n": r.n,
        "method": r.method.to_string(),
        "rotation": r.rotation.to_string(),
        "replications": r.replications,
        "mean_congruence": r.mean_congruence,
        "hit05": r.hit05,
        "hit10": r.hit10,
        "failures": r.failures,
    })
}

/// Render results as the fixed-column CSV text.
pub fn results_csv(results: &[ConditionResult]) -> String {
    let mut out = String::from("sl,q,n,method,rotation,replications,mean_congruence,hit05,hit10,failures\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            sig6(r.sl),
            r.q,
            r.n,
            r.method,
            r.rotation,
            r.replications,
            sig6(r.mean_congruence),
            sig6(r.hit05),
            sig6(r.hit10),
            r.failures
        ));
    }
    out
}

/// Parse a flat key-value study configuration.
///
/// One `key = value` pair per line; `#` starts a comment; lists are
/// comma-separated. Unknown keys are hard errors.
pub fn parse_config(text: &str) -> Result<GridConfig> {
    let mut config = GridConfig::default();
    let mut seen = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Input(format!("line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::Input(format!("duplicate key {key:?}")));
        }
        let items = || value.split(',').map(str::trim).filter(|v| !v.is_empty());
        let bad = |what: &str| Error::Input(format!("key {key}: invalid {what} {value:?}"));
        match key {
            "sl_list" => {
                config.sl_list = items()
                    .map(|v| v.parse::<f64>().map_err(|_| bad("number")))
                    .collect::<Result<_>>()?;
            }
            "q_list" => {
                config.q_list = items()
                    .map(|v| v.parse::<usize>().map_err(|_| bad("integer")))
                    .collect::<Result<_>>()?;
            }
            "n_list" => {
                config.n_list = items()
                    .map(|v| v.parse::<usize>().map_err(|_| bad("integer")))
                    .collect::<Result<_>>()?;
            }
            "replications" => {
                config.replications = value.parse().map_err(|_| bad("integer"))?;
            }
            "methods" => {
                config.methods = items().map(str::parse).collect::<Result<_>>()?;
            }
            "rotations" => {
                config.rotations = items().map(str::parse).collect::<Result<_>>()?;
            }
            "delta_list" => {
                config.delta_list = items()
                    .map(|v| v.parse::<f64>().map_err(|_| bad("number")))
                    .collect::<Result<_>>()?;
            }
            "seed" => {
                config.seed = value.parse().map_err(|_| bad("integer"))?;
            }
            "threads" => {
                config.threads = value.parse().map_err(|_| bad("integer"))?;
            }
            other => {
                return Err(Error::Input(format!("unknown configuration key {other:?}")));
            }
        }
    }
    config.validate()?;
    Ok(config)
}
