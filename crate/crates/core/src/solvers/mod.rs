//! Equality-constrained convex programs `min f(Z) s.t. 𝒜(Z) = b` for the
//! ℓ₁,₂ norm, the support-restricted nuclear norm, the streamlined norm
//! `‖Z‖₁,₂ + ‖Π_{V⊥}Z‖₁,₂`, and vector ℓ₁ (optionally nonnegative).
//!
//! The default engine is over-relaxed Douglas–Rachford splitting with an exact
//! projection onto the affine constraint (Gram factorization cached per
//! operator); a relaxed primal-dual hybrid-gradient engine is also available.

mod affine;
mod engine;
mod prox;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::matrix::{DenseMatrix, Subspace, SupportSet};
use crate::operators::{MeasurementOp, MeasurementVector};

pub(crate) use affine::AffineProjector;
pub(crate) use engine::{admm, Constraint};
pub(crate) use prox::Objective;

/// Iteration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Douglas–Rachford / ADMM with exact affine projection.
    Admm,
    /// Primal-dual hybrid gradient (proximal step on `f`, multiplier ascent on
    /// the constraint).
    Pdhg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// ADMM: residual-balanced penalty. PDHG: `σ = τ = √0.95 / ‖𝒜‖`, the norm
    /// taken from power iteration on `𝒜𝒜*`.
    Auto,
    /// ADMM uses `primal` as the fixed proximal step `1/ρ` and ignores `dual`.
    Fixed { primal: f64, dual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step: StepSize,
    /// Bound on `‖𝒜(Z) − b‖ / ‖b‖` at convergence.
    pub eps_feas: f64,
    /// Bound on the relative change of successive iterates at convergence.
    pub eps_rel: f64,
    /// Over-relaxation factor in `[1, 2)`.
    pub relaxation: f64,
    pub engine: Engine,
    /// Record the objective after every iteration.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            step: StepSize::Auto,
            eps_feas: 1e-6,
            eps_rel: 1e-8,
            relaxation: 1.5,
            engine: Engine::Admm,
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if !(self.eps_feas > 0.0 && self.eps_rel > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(1.0..2.0).contains(&self.relaxation) {
            return Err(Error::InvalidParameter("relaxation must lie in [1, 2)".into()));
        }
        if let StepSize::Fixed { primal, dual } = self.step {
            if !(primal > 0.0 && dual > 0.0) {
                return Err(Error::InvalidParameter("step sizes must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of one matrix solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    #[serde(serialize_with = "serialize_matrix")]
    pub solution: DenseMatrix,
    pub objective: f64,
    /// `‖𝒜(Z) − b‖₂ / ‖b‖₂` (absolute when `b = 0`).
    pub feasibility: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rel_change: f64,
    /// Dual vector `p` with `𝒜*p` the least-squares fit of the final multiplier.
    #[serde(serialize_with = "serialize_vector")]
    pub dual: MeasurementVector,
    /// `⟨p, b⟩`.
    pub dual_value: f64,
    /// Objective after every iteration, when requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

impl SolveResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solve results are always serializable")
    }

    /// `objective − ⟨p, b⟩`, meaningful once `p` is dual feasible.
    pub fn duality_gap(&self) -> f64 {
        self.objective - self.dual_value
    }
}

/// Outcome of a vector ℓ₁ solve.
#[derive(Debug, Clone, Serialize)]
pub struct VectorSolveResult {
    pub solution: Vec<f64>,
    pub objective: f64,
    pub feasibility: f64,
    pub iterations: usize,
    pub converged: bool,
    pub dual: Vec<f64>,
}

fn serialize_matrix<S: serde::Serializer>(m: &DenseMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Flat<'a> {
        rows: usize,
        cols: usize,
        column_major: &'a [f64],
    }
    Flat {
        rows: m.rows(),
        cols: m.cols(),
        column_major: m.as_slice(),
    }
    .serialize(s)
}

fn serialize_vector<S: serde::Serializer>(
    v: &MeasurementVector,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

/// Operator with its constraint projector factored once, for repeated solves.
#[derive(Debug, Clone)]
pub struct PreparedOp {
    op: MeasurementOp,
    proj: AffineProjector,
}

impl PreparedOp {
    pub fn new(op: &MeasurementOp) -> Self {
        Self {
            proj: AffineProjector::new(op.flat().clone()),
            op: op.clone(),
        }
    }

    pub fn op(&self) -> &MeasurementOp {
        &self.op
    }

    pub fn solve_l12(&self, b: &MeasurementVector, cfg: &SolverConfig) -> Result<SolveResult> {
        let f = prox::L12 { k: self.op.k() };
        self.solve_full(&f, b, cfg)
    }

    pub fn solve_streamlined(
        &self,
        b: &MeasurementVector,
        v: &Subspace,
        cfg: &SolverConfig,
    ) -> Result<SolveResult> {
        if v.ambient_dim() != self.op.k() {
            return Err(shape(format!("subspace of R^{}", self.op.k()), format!("R^{}", v.ambient_dim())));
        }
        let f = prox::Streamlined {
            k: self.op.k(),
            basis: v.basis().clone(),
        };
        self.solve_full(&f, b, cfg)
    }

    fn solve_full(
        &self,
        f: &dyn Objective,
        b: &MeasurementVector,
        cfg: &SolverConfig,
    ) -> Result<SolveResult> {
        check_rhs(self.op.m(), b)?;
        cfg.validate()?;
        let out = engine::run(f, &self.proj, b.values(), cfg, cfg.trace);
        let solution = DenseMatrix::from_dmatrix(DMatrix::from_column_slice(
            self.op.k(),
            self.op.n(),
            out.x.as_slice(),
        ))?;
        let p = self.proj.dual_from(&out.multiplier);
        finish(f, out, solution, p, b)
    }
}

fn finish(
    f: &dyn Objective,
    out: engine::EngineOutput,
    solution: DenseMatrix,
    p: DVector<f64>,
    b: &MeasurementVector,
) -> Result<SolveResult> {
    let dual_value = p.dot(b.values());
    Ok(SolveResult {
        objective: f.value(out.x.as_slice()),
        feasibility: out.feasibility,
        iterations: out.iterations,
        converged: out.converged,
        rel_change: out.rel_change,
        dual: MeasurementVector::from_dvector(p)?,
        dual_value,
        objective_trace: out.trace,
        solution,
    })
}

fn check_rhs(m: usize, b: &MeasurementVector) -> Result<()> {
    if b.len() != m {
        return Err(shape(format!("b of length {m}"), format!("{}", b.len())));
    }
    if b.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// `min ‖Z‖₁,₂ s.t. 𝒜(Z) = b`.
pub fn solve_l12(a: &MeasurementOp, b: &MeasurementVector, cfg: &SolverConfig) -> Result<SolveResult> {
    PreparedOp::new(a).solve_l12(b, cfg)
}

/// `min ‖Z‖_* s.t. supp Z ⊆ Ŝ, 𝒜(Z) = b`; off-support columns are exactly zero.
pub fn solve_nuclear_on_support(
    a: &MeasurementOp,
    b: &MeasurementVector,
    support: &SupportSet,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    if support.n() != a.n() {
        return Err(shape(format!("support over {} columns", a.n()), format!("{}", support.n())));
    }
    if support.is_empty() {
        return Err(Error::InvalidParameter("support must be nonempty".into()));
    }
    check_rhs(a.m(), b)?;
    cfg.validate()?;
    let k = a.k();
    let restricted = a.restrict(support)?;
    let proj = AffineProjector::new(restricted.flat().clone());
    let f = prox::Nuclear { k };
    let out = engine::run(&f, &proj, b.values(), cfg, cfg.trace);
    let mut full = DMatrix::zeros(k, a.n());
    for (j, &i) in support.indices().iter().enumerate() {
        full.column_mut(i)
            .copy_from_slice(&out.x.as_slice()[j * k..(j + 1) * k]);
    }
    let p = proj.dual_from(&out.multiplier);
    finish(&f, out, DenseMatrix::from_dmatrix(full)?, p, b)
}

/// `min ‖Z‖₁,₂ + ‖Π_{V⊥}Z‖₁,₂ s.t. 𝒜(Z) = b`.
pub fn solve_streamlined(
    a: &MeasurementOp,
    b: &MeasurementVector,
    v: &Subspace,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    PreparedOp::new(a).solve_streamlined(b, v, cfg)
}

/// `min ‖z‖₁ s.t. Az = b` (and `z ≥ 0` when `nonneg`).
pub fn solve_l1(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    cfg: &SolverConfig,
    nonneg: bool,
) -> Result<VectorSolveResult> {
    if a.nrows() != b.len() {
        return Err(shape(format!("b of length {}", a.nrows()), format!("{}", b.len())));
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    cfg.validate()?;
    let proj = AffineProjector::new(a.clone());
    let f = prox::L1 { nonneg };
    let out = engine::run(&f, &proj, b, cfg, false);
    let dual = proj.dual_from(&out.multiplier);
    Ok(VectorSolveResult {
        objective: f.value(out.x.as_slice()),
        solution: out.x.as_slice().to_vec(),
        feasibility: out.feasibility,
        iterations: out.iterations,
        converged: out.converged,
        dual: dual.as_slice().to_vec(),
    })
}
