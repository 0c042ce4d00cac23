//! Two-stage heuristics for matrices that are column-sparse and low-rank:
//! NAST (ℓ₁,₂ solve, support thresholding, nuclear norm on the support) and
//! Column Streamlining (repeated ℓ₁,₂ solves penalizing mass outside the
//! current leading left singular subspace).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{principal_angle_sin, singular_values, top_r_left_subspace, DenseMatrix, Subspace, SupportSet};
use crate::operators::{MeasurementOp, MeasurementVector};
use crate::solvers::{solve_nuclear_on_support, PreparedOp, SolveResult, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NastConfig {
    /// Minimum size of the selected support.
    pub s: usize,
    /// Fraction of ℓ₁,₂ mass the selected columns must carry, in `(0, 1)`.
    pub tau_thresh: f64,
    pub solver: SolverConfig,
}

impl NastConfig {
    pub fn new(s: usize) -> Self {
        Self {
            s,
            tau_thresh: 0.95,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.tau_thresh > 0.0 && self.tau_thresh < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_thresh must lie in (0, 1), got {}",
                self.tau_thresh
            )));
        }
        if self.s == 0 || self.s > n {
            return Err(Error::InvalidParameter(format!("s must lie in 1..={n}, got {}", self.s)));
        }
        self.solver.validate()
    }
}

/// Per-stage solver reports of one NAST run.
#[derive(Debug, Clone, Serialize)]
pub struct NastDiagnostics {
    pub l12_objective: f64,
    pub l12_iterations: usize,
    pub l12_converged: bool,
    pub selected: Vec<usize>,
    /// `‖Ẑ_Ŝ‖₁,₂ / ‖Ẑ‖₁,₂` (1 when `Ẑ = 0`).
    pub selected_mass: f64,
    pub nuclear_objective: f64,
    pub nuclear_iterations: usize,
    pub nuclear_converged: bool,
}

#[derive(Debug, Clone)]
pub struct NastOutcome {
    pub solution: DenseMatrix,
    pub support: SupportSet,
    /// The first-stage ℓ₁,₂ minimizer.
    pub l12: SolveResult,
    pub diagnostics: NastDiagnostics,
}

/// Shortest prefix of the columns sorted by norm (descending, ties by
/// ascending index) with at least `s` entries and mass fraction `≥ tau`.
pub fn select_support(z: &DenseMatrix, s: usize, tau: f64) -> Result<SupportSet> {
    let n = z.cols();
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!("s must lie in 1..={n}, got {s}")));
    }
    let norms = z.column_norms();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    // summing in sorted order makes the full prefix equal the total exactly
    let total: f64 = order.iter().map(|&i| norms[i]).sum();
    let mut mass = 0.0;
    let mut len = n;
    for (j, &i) in order.iter().enumerate() {
        mass += norms[i];
        if j + 1 >= s && mass >= tau * total {
            len = j + 1;
            break;
        }
    }
    SupportSet::from_unsorted(n, order[..len].to_vec())
}

/// Nuclear norm After Soft-recovery Thresholding.
pub fn nast(a: &MeasurementOp, b: &MeasurementVector, cfg: &NastConfig) -> Result<NastOutcome> {
    nast_prepared(&PreparedOp::new(a), b, cfg)
}

pub fn nast_prepared(prep: &PreparedOp, b: &MeasurementVector, cfg: &NastConfig) -> Result<NastOutcome> {
    let a = prep.op();
    cfg.validate(a.n())?;
    let l12 = prep.solve_l12(b, &cfg.solver)?;
    let support = select_support(&l12.solution, cfg.s, cfg.tau_thresh)?;
    let nuclear = solve_nuclear_on_support(a, b, &support, &cfg.solver)?;
    let norms = l12.solution.column_norms();
    let total: f64 = norms.iter().sum();
    let picked: f64 = support.indices().iter().map(|&i| norms[i]).sum();
    let diagnostics = NastDiagnostics {
        l12_objective: l12.objective,
        l12_iterations: l12.iterations,
        l12_converged: l12.converged,
        selected: support.indices().to_vec(),
        selected_mass: if total > 0.0 { picked / total } else { 1.0 },
        nuclear_objective: nuclear.objective,
        nuclear_iterations: nuclear.iterations,
        nuclear_converged: nuclear.converged,
    };
    Ok(NastOutcome {
        solution: nuclear.solution,
        support,
        l12,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamlineConfig {
    /// Rank of the tracked subspace, `1 ≤ r < k`.
    pub r: usize,
    pub max_iters: Option<usize>,
    /// Stop when `‖Y_q − Y_{q−1}‖_F ≤ ε ‖Y_{q−1}‖_F`.
    pub change_eps: Option<f64>,
    /// Stop when `σ_{r+1}(Y_q) ≤ ε σ_1(Y_q)`.
    pub sv_eps: Option<f64>,
    /// `(s, ε)`: stop when the `(s+1)`-st largest column norm is `≤ ε` times
    /// the largest.
    pub column_eps: Option<(usize, f64)>,
    /// Finish with a nuclear-norm solve once at most this many columns exceed
    /// `capture_threshold` times the largest column norm.
    pub early_capture: Option<usize>,
    pub capture_threshold: f64,
    pub solver: SolverConfig,
}

impl StreamlineConfig {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            max_iters: Some(10),
            change_eps: Some(1e-6),
            sv_eps: None,
            column_eps: None,
            early_capture: None,
            capture_threshold: 1e-3,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self, k: usize, n: usize) -> Result<()> {
        if self.r == 0 || self.r >= k || self.r > n {
            return Err(Error::RankOutOfRange {
                rank: self.r,
                max: (k - 1).min(n),
            });
        }
        let any_rule = self.max_iters.is_some_and(|m| m > 0)
            || self.change_eps.is_some()
            || self.sv_eps.is_some()
            || self.column_eps.is_some()
            || self.early_capture.is_some();
        if !any_rule {
            return Err(Error::InvalidParameter("at least one stopping rule is required".into()));
        }
        if let Some((s, _)) = self.column_eps {
            if s >= n {
                return Err(Error::InvalidParameter(format!("column rule needs s < n, got {s}")));
            }
        }
        if self.early_capture == Some(0) {
            return Err(Error::InvalidParameter("early capture size must be positive".into()));
        }
        if !(self.capture_threshold > 0.0 && self.capture_threshold < 1.0) {
            return Err(Error::InvalidParameter("capture threshold must lie in (0, 1)".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    IterateChange,
    SingularValue,
    ColumnNorm,
    EarlyCapture,
}

/// One streamlining iterate (`q = 0` is the plain ℓ₁,₂ solve).
#[derive(Debug, Clone, Serialize)]
pub struct StreamlineStep {
    pub q: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `sin∠(V_q, V_{q−1})`; absent for `q = 0`.
    pub drift: Option<f64>,
    pub rel_change: Option<f64>,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamlineOutcome {
    #[serde(skip)]
    pub solution: DenseMatrix,
    pub history: Vec<StreamlineStep>,
    pub stop: StopReason,
    /// Columns handed to the nuclear finish, if it ran.
    pub captured: Option<Vec<usize>>,
}

impl StreamlineOutcome {
    /// Diagnostics (history, stop reason, captured support) as JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("history serializes")
    }
}

/// Column Streamlining started from the plain ℓ₁,₂ minimizer.
pub fn column_streamline(a: &MeasurementOp, b: &MeasurementVector, cfg: &StreamlineConfig) -> Result<StreamlineOutcome> {
    column_streamline_prepared(&PreparedOp::new(a), b, cfg)
}

pub fn column_streamline_prepared(
    prep: &PreparedOp,
    b: &MeasurementVector,
    cfg: &StreamlineConfig,
) -> Result<StreamlineOutcome> {
    let a = prep.op();
    cfg.validate(a.k(), a.n())?;
    let y0 = prep.solve_l12(b, &cfg.solver)?;
    let v0 = top_r_left_subspace(&y0.solution, cfg.r)?;
    let first = StreamlineStep {
        q: 0,
        objective: y0.objective,
        iterations: y0.iterations,
        converged: y0.converged,
        drift: None,
        rel_change: None,
        singular_values: singular_values(&y0.solution),
    };
    iterate(prep, b, cfg, y0.solution, v0, vec![first])
}

/// Column Streamlining from a given initial subspace `V₀`.
pub fn column_streamline_from(
    prep: &PreparedOp,
    b: &MeasurementVector,
    v0: &Subspace,
    cfg: &StreamlineConfig,
) -> Result<StreamlineOutcome> {
    let a = prep.op();
    cfg.validate(a.k(), a.n())?;
    if v0.ambient_dim() != a.k() {
        return Err(crate::error::shape(format!("subspace of R^{}", a.k()), format!("R^{}", v0.ambient_dim())));
    }
    iterate(prep, b, cfg, DenseMatrix::zeros(a.k(), a.n()), v0.clone(), Vec::new())
}

fn iterate(
    prep: &PreparedOp,
    b: &MeasurementVector,
    cfg: &StreamlineConfig,
    mut y: DenseMatrix,
    mut v: Subspace,
    mut history: Vec<StreamlineStep>,
) -> Result<StreamlineOutcome> {
    let a = prep.op();
    let mut q = history.last().map_or(0, |s| s.q);
    let limit = cfg.max_iters.map_or(usize::MAX, |m| q + m);
    loop {
        if q >= limit {
            return Ok(done(y, history, StopReason::MaxIters, None));
        }
        q += 1;
        let res = prep.solve_streamlined(b, &v, &cfg.solver)?;
        let next_v = top_r_left_subspace(&res.solution, cfg.r)?;
        let prev_norm = y.frobenius_norm();
        let diff = DenseMatrix::from_dmatrix(res.solution.as_dmatrix() - y.as_dmatrix())?.frobenius_norm();
        let change = if diff == 0.0 { 0.0 } else { diff / prev_norm.max(f64::MIN_POSITIVE) };
        let sv = singular_values(&res.solution);
        history.push(StreamlineStep {
            q,
            objective: res.objective,
            iterations: res.iterations,
            converged: res.converged,
            drift: Some(principal_angle_sin(&next_v, &v)?),
            rel_change: Some(change),
            singular_values: sv.clone(),
        });
        y = res.solution;
        v = next_v;

        let norms = y.column_norms();
        let mut sorted = norms.clone();
        sorted.sort_by(|x, z| z.total_cmp(x));
        let top = sorted.first().copied().unwrap_or(0.0);
        if let Some(size) = cfg.early_capture {
            let big: Vec<usize> = (0..a.n()).filter(|&i| norms[i] > cfg.capture_threshold * top).collect();
            if !big.is_empty() && big.len() <= size {
                let support = SupportSet::new(a.n(), big.clone())?;
                let fin = solve_nuclear_on_support(a, b, &support, &cfg.solver)?;
                return Ok(done(fin.solution, history, StopReason::EarlyCapture, Some(big)));
            }
        }
        if cfg.change_eps.is_some_and(|e| change <= e) {
            return Ok(done(y, history, StopReason::IterateChange, None));
        }
        if let Some(e) = cfg.sv_eps {
            if sv.get(cfg.r).is_none_or(|&s| s <= e * sv[0]) {
                return Ok(done(y, history, StopReason::SingularValue, None));
            }
        }
        if let Some((s, e)) = cfg.column_eps {
            if sorted[s] <= e * top {
                return Ok(done(y, history, StopReason::ColumnNorm, None));
            }
        }
    }
}

fn done(solution: DenseMatrix, history: Vec<StreamlineStep>, stop: StopReason, captured: Option<Vec<usize>>) -> StreamlineOutcome {
    StreamlineOutcome {
        solution,
        history,
        stop,
        captured,
    }
}

#[cfg(test)]
mod tests;
