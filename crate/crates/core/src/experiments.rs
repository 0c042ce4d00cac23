//! Random instances, seeded trial sweeps, result tables and figure data.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certificates::RangePartition;
use crate::error::{Error, Result};
use crate::matrix::{angular_distance, l12_norm, polar_decompose, DenseMatrix, PolarMatrix, Subspace, SupportSet};
use crate::operators::MeasurementOp;
use crate::recovery::{column_streamline_prepared, nast_prepared, NastConfig, StreamlineConfig};
use crate::rng::{derive_seed, standard_normal_vec, stream_rng, GENERATOR_NAME};
use crate::solvers::{solve_l1, solve_nuclear_on_support, PreparedOp, SolverConfig};
use crate::statdim::{m_soft, mu_colstream, ConeParams};

/// Relative Frobenius error below which a trial counts as a success.
pub const SUCCESS_TOL: f64 = 1e-3;
/// Looser error level reported alongside successes.
pub const NEAR_SUCCESS_TOL: f64 = 1e-2;
/// Environment variable holding the default number of worker threads.
pub const JOBS_ENV: &str = "COLSPARSE_JOBS";

const MAX_DRAWS: u64 = 16;
const DEGENERATE_REL: f64 = 1e-10;
const OPERATOR_LABEL: u64 = 0x6f70;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub k: usize,
    pub n: usize,
    pub s: usize,
    pub r: usize,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::InvalidParameter("k and n must be positive".into()));
        }
        if self.s == 0 || self.s > self.n {
            return Err(Error::InvalidParameter(format!("need 1 ≤ s ≤ n, got s={}, n={}", self.s, self.n)));
        }
        let max = self.k.min(self.s);
        if self.r == 0 || self.r > max {
            return Err(Error::RankOutOfRange { rank: self.r, max });
        }
        Ok(())
    }

    /// Hex SHA-256 of `k,n,s,r,seed`.
    pub fn hash(&self) -> String {
        let text = format!("{},{},{},{},{}", self.k, self.n, self.s, self.r, self.seed);
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub matrix: DenseMatrix,
    pub polar: PolarMatrix,
    pub support: SupportSet,
    pub range: Subspace,
    pub partition: RangePartition,
}

/// Draws `Z₀ = Σ_{j≤r} h_j w_jᵀ` with `h_j` uniform on the sphere and the `w_j`
/// sharing one uniformly random support of size `s` with standard normal
/// entries. Draws with a vanishing support column are repeated on the next
/// stream of the same seed.
pub fn generate_instance(spec: &InstanceSpec) -> Result<Instance> {
    spec.validate()?;
    for draw in 0..MAX_DRAWS {
        if let Some(inst) = draw_instance(spec, draw)? {
            return Ok(inst);
        }
    }
    Err(Error::InvalidParameter(format!("no nondegenerate draw in {MAX_DRAWS} attempts")))
}

fn draw_instance(spec: &InstanceSpec, draw: u64) -> Result<Option<Instance>> {
    let InstanceSpec { k, n, s, r, .. } = *spec;
    let mut rng = stream_rng(spec.seed, draw);
    let mut support = sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut dirs = Vec::with_capacity(r);
    for _ in 0..r {
        let h = DVector::from_vec(standard_normal_vec(&mut rng, k));
        let norm = h.norm();
        if norm == 0.0 {
            return Ok(None);
        }
        dirs.push(h / norm);
    }
    let h = DMatrix::from_columns(&dirs);
    let w = DMatrix::from_vec(r, s, standard_normal_vec(&mut rng, r * s));
    let block = &h * w;
    let norms: Vec<f64> = block.column_iter().map(|c| c.norm()).collect();
    let top = norms.iter().cloned().fold(0.0, f64::max);
    if norms.iter().any(|&v| v <= DEGENERATE_REL * top) {
        return Ok(None);
    }
    let mut z = DMatrix::zeros(k, n);
    for (j, &i) in support.iter().enumerate() {
        z.set_column(i, &block.column(j));
    }
    let matrix = DenseMatrix::from_dmatrix(z)?;
    let polar = polar_decompose(&matrix);
    let range = Subspace::span_of(k, &dirs)?;
    if range.dim() != r {
        return Ok(None);
    }
    let Ok(partition) = RangePartition::from_polar(&polar, &range) else {
        return Ok(None);
    };
    Ok(Some(Instance {
        matrix,
        support: SupportSet::new(n, support)?,
        polar,
        range,
        partition,
    }))
}

/// The Gaussian operator with `m` measurements paired with `spec`.
pub fn measurement_op(spec: &InstanceSpec, m: usize) -> Result<MeasurementOp> {
    MeasurementOp::sample_gaussian(spec.k, spec.n, m, derive_seed(spec.seed, &[OPERATOR_LABEL]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    L12,
    Nast,
    Streamline,
    /// Nuclear norm over all columns (control).
    Nuclear,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::L12, Algorithm::Nast, Algorithm::Streamline, Algorithm::Nuclear];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::L12 => "l12",
            Algorithm::Nast => "nast",
            Algorithm::Streamline => "streamline",
            Algorithm::Nuclear => "nuclear",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}

/// Solver settings shared by every trial of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSettings {
    pub solver: SolverConfig,
    pub nast_tau: f64,
    pub streamline_iters: usize,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            nast_tau: 0.95,
            streamline_iters: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub spec_hash: String,
    pub k: usize,
    pub n: usize,
    pub s: usize,
    pub r: usize,
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub rel_error: f64,
    pub success: bool,
    pub wall_time: f64,
    pub iterations: usize,
    /// `ω(ĥ_i, h⁰_i)` for `i ∈ S` in support order (π for a vanished column).
    pub angular_errors: Vec<f64>,
    /// `‖Ẑ_{S^c}‖₁,₂ / ‖Ẑ‖₁,₂`.
    pub off_support_mass: f64,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn within(&self, tol: f64) -> bool {
        self.rel_error < tol
    }
}

pub const TRIAL_COLUMNS: [&str; 15] = [
    "spec_hash",
    "k",
    "n",
    "s",
    "r",
    "m",
    "trial",
    "seed",
    "algorithm",
    "rel_error",
    "success",
    "iterations",
    "off_support_mass",
    "angular_errors",
    "error",
];

/// Runs `algorithm` on the instance of `spec` measured by `m` Gaussian
/// measurements. Solver failures are recorded in `error`.
pub fn run_trial(spec: &InstanceSpec, m: usize, trial: usize, algorithm: Algorithm, settings: &TrialSettings) -> TrialRecord {
    let start = Instant::now();
    let outcome = generate_instance(spec).and_then(|inst| {
        let op = measurement_op(spec, m)?;
        let prep = PreparedOp::new(&op);
        solve_with(&prep, &inst, algorithm, spec, settings).map(|(z, it)| (inst, z, it))
    });
    let mut rec = TrialRecord {
        spec_hash: spec.hash(),
        k: spec.k,
        n: spec.n,
        s: spec.s,
        r: spec.r,
        m,
        trial,
        seed: spec.seed,
        algorithm,
        rel_error: f64::NAN,
        success: false,
        wall_time: 0.0,
        iterations: 0,
        angular_errors: Vec::new(),
        off_support_mass: f64::NAN,
        error: None,
    };
    match outcome {
        Ok((inst, z, iterations)) => {
            rec.rel_error = z.relative_error(&inst.matrix);
            rec.success = rec.rel_error < SUCCESS_TOL;
            rec.iterations = iterations;
            rec.angular_errors = angular_errors(&z, &inst);
            rec.off_support_mass = off_support_mass(&z, &inst.support);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    rec
}

fn solve_with(
    prep: &PreparedOp,
    inst: &Instance,
    algorithm: Algorithm,
    spec: &InstanceSpec,
    settings: &TrialSettings,
) -> Result<(DenseMatrix, usize)> {
    let b = prep.op().apply(&inst.matrix)?;
    match algorithm {
        Algorithm::L12 => {
            let res = prep.solve_l12(&b, &settings.solver)?;
            Ok((res.solution, res.iterations))
        }
        Algorithm::Nast => {
            let cfg = NastConfig {
                s: spec.s,
                tau_thresh: settings.nast_tau,
                solver: settings.solver.clone(),
            };
            let out = nast_prepared(prep, &b, &cfg)?;
            let it = out.diagnostics.l12_iterations + out.diagnostics.nuclear_iterations;
            Ok((out.solution, it))
        }
        Algorithm::Streamline => {
            let mut cfg = StreamlineConfig::new(spec.r);
            cfg.max_iters = Some(settings.streamline_iters);
            cfg.solver = settings.solver.clone();
            let out = column_streamline_prepared(prep, &b, &cfg)?;
            let it = out.history.iter().map(|h| h.iterations).sum();
            Ok((out.solution, it))
        }
        Algorithm::Nuclear => {
            let res = solve_nuclear_on_support(prep.op(), &b, &SupportSet::full(spec.n), &settings.solver)?;
            Ok((res.solution, res.iterations))
        }
    }
}

fn angular_errors(z: &DenseMatrix, inst: &Instance) -> Vec<f64> {
    inst.support
        .indices()
        .iter()
        .map(|&i| {
            let col = z.column(i).into_owned();
            let h0 = inst.polar.direction(i).expect("support columns have directions");
            if col.norm() == 0.0 {
                PI
            } else {
                angular_distance(&col, h0).unwrap_or(PI)
            }
        })
        .collect()
}

fn off_support_mass(z: &DenseMatrix, support: &SupportSet) -> f64 {
    let total = l12_norm(z);
    if total == 0.0 {
        return 0.0;
    }
    let norms = z.column_norms();
    support.complement().indices().iter().map(|&i| norms[i]).sum::<f64>() / total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub algorithms: Vec<Algorithm>,
    pub k: usize,
    pub n: usize,
    pub s: usize,
    pub ranks: Vec<usize>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    /// Worker threads; `None` reads [`JOBS_ENV`], then uses all cores.
    pub jobs: Option<usize>,
    pub settings: TrialSettings,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.ranks.is_empty() || self.m_values.is_empty() {
            return Err(Error::InvalidParameter("algorithms, ranks and m values must be nonempty".into()));
        }
        if self.m_values.contains(&0) {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        for &r in &self.ranks {
            self.instance(r, self.m_values[0], 0).validate()?;
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidParameter("jobs must be positive".into()));
        }
        self.settings.solver.validate()
    }

    /// The instance of trial `trial` at rank `r` and `m` measurements.
    pub fn instance(&self, r: usize, m: usize, trial: usize) -> InstanceSpec {
        let seed = derive_seed(
            self.master_seed,
            &[self.k as u64, self.n as u64, self.s as u64, r as u64, m as u64, trial as u64],
        );
        InstanceSpec {
            k: self.k,
            n: self.n,
            s: self.s,
            r,
            seed,
        }
    }
}

/// Worker count from the environment, falling back to the core count.
pub fn default_jobs() -> usize {
    std::env::var(JOBS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every `(rank, m, trial)` instance through every algorithm. Records are
/// sorted by `(r, m, trial, algorithm)` regardless of scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let jobs = cfg.jobs.unwrap_or_else(default_jobs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut tasks = Vec::new();
    for &r in &cfg.ranks {
        for &m in &cfg.m_values {
            for t in 0..cfg.trials {
                tasks.push((r, m, t));
            }
        }
    }
    let mut records: Vec<TrialRecord> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|&(r, m, t)| {
                let spec = cfg.instance(r, m, t);
                cfg.algorithms.iter().map(move |&a| run_trial(&spec, m, t, a, &cfg.settings))
            })
            .collect()
    });
    records.sort_by_key(|rec| (rec.r, rec.m, rec.trial, rec.algorithm));
    Ok(records)
}

/// Writes `results.csv`, `results.jsonl` and `metadata.json` into `dir`.
/// The CSV omits wall times so that reruns are byte-identical.
pub fn write_sweep(dir: &Path, cfg: &SweepConfig, records: &[TrialRecord]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let table = ResultTable::from_trials(records);
    table.write_csv(std::fs::File::create(dir.join("results.csv"))?)?;
    write_jsonl(std::fs::File::create(dir.join("results.jsonl"))?, records)?;
    let meta = serde_json::json!({
        "master_seed": cfg.master_seed,
        "generator": GENERATOR_NAME,
        "config": cfg,
    });
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Column-named table of strings, as read from or written to CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::InvalidParameter(format!(
                "row has {} fields, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn from_trials(records: &[TrialRecord]) -> Self {
        let mut t = Self::new(TRIAL_COLUMNS.iter().map(|s| s.to_string()).collect());
        for rec in records {
            let angles: Vec<String> = rec.angular_errors.iter().map(|a| a.to_string()).collect();
            t.rows.push(vec![
                rec.spec_hash.clone(),
                rec.k.to_string(),
                rec.n.to_string(),
                rec.s.to_string(),
                rec.r.to_string(),
                rec.m.to_string(),
                rec.trial.to_string(),
                rec.seed.to_string(),
                rec.algorithm.name().to_string(),
                rec.rel_error.to_string(),
                rec.success.to_string(),
                rec.iterations.to_string(),
                rec.off_support_mass.to_string(),
                angles.join(";"),
                rec.error.clone().unwrap_or_default(),
            ]);
        }
        t
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.iter().map(|s| s.to_string()).collect();
        let mut t = Self::new(header);
        for rec in rdr.records() {
            t.rows.push(rec?.iter().map(|s| s.to_string()).collect());
        }
        Ok(t)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn require(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.column_index(n)).collect()
    }
}

fn parse<T: std::str::FromStr>(field: &str, column: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad value `{field}` in column `{column}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Figure {
    pub const ALL: [Figure; 6] = [Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Fig7, Figure::Fig8];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
        }
    }

    /// Whether the figure is built from trial records rather than thresholds.
    pub fn is_empirical(self) -> bool {
        matches!(self, Figure::Fig6 | Figure::Fig7)
    }

    /// Sweep reproducing an empirical figure at `trials` trials per point.
    pub fn sweep(self, trials: usize, master_seed: u64) -> Option<SweepConfig> {
        let (algorithms, ranks, m_values) = match self {
            Figure::Fig6 => (vec![Algorithm::L12, Algorithm::Nast], vec![1, 2, 5], (100..=300).step_by(5).collect()),
            Figure::Fig7 => (vec![Algorithm::Nast, Algorithm::Streamline], vec![2], (100..=140).collect()),
            _ => return None,
        };
        Some(SweepConfig {
            algorithms,
            k: 10,
            n: 100,
            s: 10,
            ranks,
            m_values,
            trials,
            master_seed,
            jobs: None,
            settings: TrialSettings::default(),
        })
    }
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown figure `{s}`")))
    }
}

/// The two column types: `z_{i*} = ‖z‖₁/s` and `z_{i*} = 0.9‖z‖₁`.
pub fn column_ratio(column: &str, s: usize) -> Result<f64> {
    match column {
        "average" => Ok(1.0 / s as f64),
        "large" => Ok(0.9),
        other => Err(Error::InvalidParameter(format!("unknown column type `{other}`"))),
    }
}

const COLUMNS: [&str; 2] = ["average", "large"];
const THRESHOLD_COLUMNS: [&str; 8] = ["k", "s", "n", "alpha", "column", "ratio", "tau_star", "m_value"];
const MU_COLUMNS: [&str; 6] = ["k", "s", "n", "rank", "tau_star", "m_value"];

/// `α ∈ {0, π/40, …, 19π/40}`.
pub fn alpha_grid() -> Vec<f64> {
    (0..20).map(|j| j as f64 * PI / 40.0).collect()
}

fn threshold_row(t: &mut ResultTable, k: usize, s: usize, n: usize, alpha: f64, column: &str) -> Result<()> {
    let ratio = column_ratio(column, s)?;
    let res = m_soft(&ConeParams::new(k, s, n, alpha, ratio)?);
    t.push(vec![
        k.to_string(),
        s.to_string(),
        n.to_string(),
        alpha.to_string(),
        column.to_string(),
        ratio.to_string(),
        res.tau_star.to_string(),
        res.m_value.to_string(),
    ])
}

/// Threshold table behind a non-empirical figure (`n = 100` throughout):
/// fig3 `k, s ∈ {2, 4, …, 30}` at `α = π/10`; fig4 `k = 10`,
/// `s ∈ {5, 10, 15, 20}` over [`alpha_grid`]; fig5 `k = s = 10` over
/// [`alpha_grid`]; fig8 `μ` for `r = 1`, `k, s ∈ {5, …, 30}`.
pub fn threshold_table(fig: Figure) -> Result<ResultTable> {
    let n = 100;
    let header = |cols: &[&str]| cols.iter().map(|s| s.to_string()).collect();
    match fig {
        Figure::Fig3 => {
            let mut t = ResultTable::new(header(&THRESHOLD_COLUMNS));
            for column in COLUMNS {
                for k in (2..=30).step_by(2) {
                    for s in (2..=30).step_by(2) {
                        threshold_row(&mut t, k, s, n, PI / 10.0, column)?;
                    }
                }
            }
            Ok(t)
        }
        Figure::Fig4 | Figure::Fig5 => {
            let s_values = if fig == Figure::Fig4 { vec![5, 10, 15, 20] } else { vec![10] };
            let mut t = ResultTable::new(header(&THRESHOLD_COLUMNS));
            for column in COLUMNS {
                for &s in &s_values {
                    for alpha in alpha_grid() {
                        threshold_row(&mut t, 10, s, n, alpha, column)?;
                    }
                }
            }
            Ok(t)
        }
        Figure::Fig8 => {
            let mut t = ResultTable::new(header(&MU_COLUMNS));
            for k in 5..=30 {
                for s in 5..=30 {
                    let res = mu_colstream(k, s, n, 1)?;
                    t.push(vec![
                        k.to_string(),
                        s.to_string(),
                        n.to_string(),
                        "1".into(),
                        res.tau_star.to_string(),
                        res.m_value.to_string(),
                    ])?;
                }
            }
            Ok(t)
        }
        Figure::Fig6 | Figure::Fig7 => Err(Error::InvalidParameter(format!(
            "{} is built from trial records",
            fig.name()
        ))),
    }
}

/// Writes the data file of `fig` derived from `table`:
///
/// * fig3: `column,k,s,m_value` (heat grid in long form);
/// * fig4: `column,s,alpha,m_value,m_exact,quotient`;
/// * fig5: `column,alpha,m_value,m_exact`;
/// * fig6, fig7: `algorithm,r,m,trials,success,near_success,rate,isotonic_rate`;
/// * fig8: `k,s,mu`.
///
/// `m_exact` is the `α = 0` value of the same column type and `s`.
pub fn emit_figure_data<W: Write>(table: &ResultTable, fig: Figure, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    match fig {
        Figure::Fig3 => {
            let idx = table.require(&["column", "k", "s", "m_value"])?;
            out.write_record(["column", "k", "s", "m_value"])?;
            for row in table.rows() {
                out.write_record(idx.iter().map(|&i| row[i].as_str()))?;
            }
        }
        Figure::Fig4 | Figure::Fig5 => {
            let idx = table.require(&["column", "s", "alpha", "m_value"])?;
            let exact = exact_values(table, &idx)?;
            if fig == Figure::Fig4 {
                out.write_record(["column", "s", "alpha", "m_value", "m_exact", "quotient"])?;
            } else {
                out.write_record(["column", "alpha", "m_value", "m_exact"])?;
            }
            for row in table.rows() {
                let key = (row[idx[0]].clone(), row[idx[1]].clone());
                let m: f64 = parse(&row[idx[3]], "m_value")?;
                let m0 = *exact
                    .get(&key)
                    .ok_or_else(|| Error::InvalidParameter(format!("no alpha = 0 row for {key:?}")))?;
                if fig == Figure::Fig4 {
                    out.write_record([
                        &row[idx[0]],
                        &row[idx[1]],
                        &row[idx[2]],
                        &row[idx[3]],
                        &m0.to_string(),
                        &(m / m0).to_string(),
                    ])?;
                } else {
                    out.write_record([&row[idx[0]], &row[idx[2]], &row[idx[3]], &m0.to_string()])?;
                }
            }
        }
        Figure::Fig6 | Figure::Fig7 => {
            let idx = table.require(&["algorithm", "r", "m", "rel_error"])?;
            out.write_record(["algorithm", "r", "m", "trials", "success", "near_success", "rate", "isotonic_rate"])?;
            for c in success_counts(table, &idx)? {
                out.write_record([
                    c.algorithm.clone(),
                    c.r.to_string(),
                    c.m.to_string(),
                    c.trials.to_string(),
                    c.success.to_string(),
                    c.near_success.to_string(),
                    c.rate().to_string(),
                    c.isotonic_rate.to_string(),
                ])?;
            }
        }
        Figure::Fig8 => {
            let idx = table.require(&["k", "s", "m_value"])?;
            out.write_record(["k", "s", "mu"])?;
            for row in table.rows() {
                out.write_record(idx.iter().map(|&i| row[i].as_str()))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn exact_values(table: &ResultTable, idx: &[usize]) -> Result<BTreeMap<(String, String), f64>> {
    let mut exact = BTreeMap::new();
    for row in table.rows() {
        let alpha: f64 = parse(&row[idx[2]], "alpha")?;
        if alpha == 0.0 {
            exact.insert((row[idx[0]].clone(), row[idx[1]].clone()), parse(&row[idx[3]], "m_value")?);
        }
    }
    Ok(exact)
}

/// Success counts of one algorithm at one `(r, m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessCount {
    pub algorithm: String,
    pub r: usize,
    pub m: usize,
    pub trials: usize,
    /// Trials with error `< 1e-3`.
    pub success: usize,
    /// Trials with error `< 1e-2`.
    pub near_success: usize,
    /// Nondecreasing least-squares fit of the success rate over `m`.
    pub isotonic_rate: f64,
}

impl SuccessCount {
    pub fn rate(&self) -> f64 {
        self.success as f64 / self.trials as f64
    }
}

/// Aggregates a trial table by `(algorithm, r, m)`, sorted.
pub fn success_table(table: &ResultTable) -> Result<Vec<SuccessCount>> {
    let idx = table.require(&["algorithm", "r", "m", "rel_error"])?;
    success_counts(table, &idx)
}

fn success_counts(table: &ResultTable, idx: &[usize]) -> Result<Vec<SuccessCount>> {
    let mut groups: BTreeMap<(String, usize, usize), (usize, usize, usize)> = BTreeMap::new();
    for row in table.rows() {
        let r: usize = parse(&row[idx[1]], "r")?;
        let m: usize = parse(&row[idx[2]], "m")?;
        // NaN (failed trial) counts as a failure
        let err: f64 = parse(&row[idx[3]], "rel_error")?;
        let g = groups.entry((row[idx[0]].clone(), r, m)).or_default();
        g.0 += 1;
        g.1 += usize::from(err < SUCCESS_TOL);
        g.2 += usize::from(err < NEAR_SUCCESS_TOL);
    }
    let mut counts: Vec<SuccessCount> = groups
        .into_iter()
        .map(|((algorithm, r, m), (trials, success, near_success))| SuccessCount {
            algorithm,
            r,
            m,
            trials,
            success,
            near_success,
            isotonic_rate: 0.0,
        })
        .collect();
    let mut start = 0;
    while start < counts.len() {
        let end = start
            + counts[start..]
                .iter()
                .take_while(|c| c.algorithm == counts[start].algorithm && c.r == counts[start].r)
                .count();
        let rates: Vec<f64> = counts[start..end].iter().map(|c| c.rate()).collect();
        let weights: Vec<f64> = counts[start..end].iter().map(|c| c.trials as f64).collect();
        for (c, v) in counts[start..end].iter_mut().zip(isotonic_fit(&rates, &weights)) {
            c.isotonic_rate = v;
        }
        start = end;
    }
    Ok(counts)
}

/// Weighted least-squares nondecreasing fit (pool adjacent violators).
pub fn isotonic_fit(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len(), "one weight per value");
    // blocks of (mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            let mean = if w > 0.0 { (m1 * w1 + m2 * w2) / w } else { (m1 + m2) / 2.0 };
            *blocks.last_mut().unwrap() = (mean, w, c1 + c2);
        }
    }
    blocks.into_iter().flat_map(|(m, _, c)| std::iter::repeat_n(m, c)).collect()
}

/// One instance of the vector ℓ₁ experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1AlternativeRecord {
    pub n: usize,
    pub s: usize,
    pub m: usize,
    pub seed: u64,
    pub rel_error: f64,
    /// `min_{i∈S} |ẑ_i| / ‖ẑ‖_∞`.
    pub min_support_ratio: f64,
    /// `rel_error ≤ 1e-2` or `min_support_ratio < 1e-3`.
    pub holds: bool,
}

/// Solves `min ‖z‖₁ s.t. Az = Az₀` for an `s`-sparse Gaussian `z₀` and a
/// Gaussian `m × n` matrix `A`, and checks that the minimizer either recovers
/// `z₀` or vanishes somewhere on its support.
pub fn l1_alternative_trial(n: usize, s: usize, m: usize, seed: u64, cfg: &SolverConfig) -> Result<L1AlternativeRecord> {
    if s == 0 || s > n || m == 0 {
        return Err(Error::InvalidParameter(format!("need 1 ≤ s ≤ n and m ≥ 1, got n={n}, s={s}, m={m}")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut support = sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let vals = standard_normal_vec(&mut rng, s);
    let mut z0 = DVector::zeros(n);
    for (&i, v) in support.iter().zip(vals) {
        z0[i] = v;
    }
    let a = DMatrix::from_vec(m, n, standard_normal_vec(&mut rng, m * n));
    let b = &a * &z0;
    let res = solve_l1(&a, &b, cfg, false)?;
    let z = DVector::from_vec(res.solution);
    let rel_error = (&z - &z0).norm() / z0.norm();
    let top = z.amax();
    let min_support_ratio = if top == 0.0 {
        0.0
    } else {
        support.iter().map(|&i| z[i].abs()).fold(f64::INFINITY, f64::min) / top
    };
    Ok(L1AlternativeRecord {
        n,
        s,
        m,
        seed,
        rel_error,
        min_support_ratio,
        holds: rel_error <= 1e-2 || min_support_ratio < 1e-3,
    })
}

#[cfg(test)]
mod tests;
