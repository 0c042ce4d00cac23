//! Iteration loops for `min f(x) s.t. Mx = c`.

use nalgebra::DVector;

use super::affine::AffineProjector;
use super::prox::Objective;
use super::{Engine, SolverConfig, StepSize};

pub(crate) struct EngineOutput {
    pub x: DVector<f64>,
    /// Multiplier estimate `w ≈ Mᵀp` with `w ∈ ∂f(x)` (ADMM) or `-Mᵀy` (PDHG).
    pub multiplier: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub feasibility: f64,
    pub rel_change: f64,
    /// Objective value sampled every iteration (for trend diagnostics).
    pub trace: Vec<f64>,
}

/// Closed convex set with an exact Euclidean projection.
pub(crate) trait Constraint {
    fn project(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Scale-free violation of `x`.
    fn residual(&self, x: &DVector<f64>) -> f64;
}

struct Affine<'a> {
    proj: &'a AffineProjector,
    c: &'a DVector<f64>,
}

impl Constraint for Affine<'_> {
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.proj.project_affine(v, self.c)
    }

    fn residual(&self, x: &DVector<f64>) -> f64 {
        feasibility(self.proj, x, self.c)
    }
}

pub(crate) fn run(
    f: &dyn Objective,
    proj: &AffineProjector,
    c: &DVector<f64>,
    cfg: &SolverConfig,
    record_trace: bool,
) -> EngineOutput {
    let dim = proj.mat().ncols();
    let c_norm = c.norm();
    if c_norm == 0.0 {
        return EngineOutput {
            x: DVector::zeros(dim),
            multiplier: DVector::zeros(dim),
            iterations: 0,
            converged: true,
            feasibility: 0.0,
            rel_change: 0.0,
            trace: Vec::new(),
        };
    }
    // all objectives are positively homogeneous, so solve at unit scale
    let x_ln = proj.least_norm(c);
    let scale = x_ln.norm().max(f64::MIN_POSITIVE);
    let c_unit = c / scale;
    let mut out = match cfg.engine {
        Engine::Admm => {
            let set = Affine { proj, c: &c_unit };
            admm(f, &set, &(x_ln / scale), cfg, record_trace, None)
        }
        Engine::Pdhg => pdhg(f, proj, &c_unit, cfg, record_trace),
    };
    out.x *= scale;
    for v in out.trace.iter_mut() {
        *v *= scale;
    }
    out
}

fn feasibility(proj: &AffineProjector, x: &DVector<f64>, c: &DVector<f64>) -> f64 {
    (proj.apply(x) - c).norm() / c.norm()
}

fn rel_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    let n = new.norm();
    if n == 0.0 {
        return (new - old).norm();
    }
    (new - old).norm() / n
}

pub(crate) type StopFn<'a> = &'a dyn Fn(&DVector<f64>) -> bool;

/// Douglas–Rachford splitting (ADMM on `f(z) + ι(Mx = c)`, `x = z`) with
/// over-relaxation and residual-balanced penalty.
///
/// `stop` is polled every 10 iterations with the current `z` and ends the
/// loop early (reported as converged) when it returns true.
pub(crate) fn admm(
    f: &dyn Objective,
    set: &dyn Constraint,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
    record_trace: bool,
    stop: Option<StopFn<'_>>,
) -> EngineOutput {
    let dim = x0.len();
    let alpha = cfg.relaxation;
    let (mut rho, adaptive) = match cfg.step {
        StepSize::Auto => ((dim as f64).sqrt(), true),
        StepSize::Fixed { primal, .. } => (1.0 / primal, false),
    };
    let mut z = x0.clone();
    let mut z_prev = z.clone();
    let mut u = DVector::<f64>::zeros(dim);
    let mut v = DVector::<f64>::zeros(dim);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut feas = f64::INFINITY;
    let mut change = f64::INFINITY;
    let adapt_until = cfg.max_iters / 2;

    for it in 1..=cfg.max_iters {
        iterations = it;
        let x = set.project(&(&z - &u));
        let x_hat = alpha * &x + (1.0 - alpha) * &z;
        std::mem::swap(&mut z_prev, &mut z);
        v.copy_from(&x_hat);
        v += &u;
        f.prox(v.as_slice(), 1.0 / rho, z.as_mut_slice());
        u += &x_hat;
        u -= &z;
        if record_trace {
            trace.push(f.value(z.as_slice()));
        }

        if it % 10 == 0 || it == cfg.max_iters {
            let primal = (&x - &z).norm();
            let dual = rho * (&z - &z_prev).norm();
            change = rel_change(&z, &z_prev);
            if change <= cfg.eps_rel && primal <= cfg.eps_feas {
                feas = set.residual(&z);
                if feas <= cfg.eps_feas {
                    converged = true;
                    break;
                }
            }
            if stop.is_some_and(|g| g(&z)) {
                feas = set.residual(&z);
                converged = true;
                break;
            }
            if adaptive && it <= adapt_until {
                if primal > 10.0 * dual {
                    rho *= 2.0;
                    u /= 2.0;
                } else if dual > 10.0 * primal {
                    rho /= 2.0;
                    u *= 2.0;
                }
            }
        }
    }
    if !converged {
        feas = set.residual(&z);
        change = rel_change(&z, &z_prev);
    }
    EngineOutput {
        multiplier: rho * u,
        x: z,
        iterations,
        converged,
        feasibility: feas,
        rel_change: change,
        trace,
    }
}

/// Relaxed primal-dual hybrid gradient.
fn pdhg(
    f: &dyn Objective,
    proj: &AffineProjector,
    c: &DVector<f64>,
    cfg: &SolverConfig,
    record_trace: bool,
) -> EngineOutput {
    let m = proj.mat();
    let dim = m.ncols();
    let (tau, sigma) = match cfg.step {
        StepSize::Auto => {
            let l = crate::operators::largest_eigenvalue_psd(&(m * m.transpose())).sqrt();
            let t = (0.95f64).sqrt() / l.max(f64::MIN_POSITIVE);
            (t, t)
        }
        StepSize::Fixed { primal, dual } => (primal, dual),
    };
    let rho = cfg.relaxation;
    let mut x = DVector::<f64>::zeros(dim);
    let mut y = DVector::<f64>::zeros(m.nrows());
    let mut x_new = DVector::<f64>::zeros(dim);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut feas = f64::INFINITY;
    let mut change = f64::INFINITY;

    for it in 1..=cfg.max_iters {
        iterations = it;
        let grad = &x - tau * m.tr_mul(&y);
        f.prox(grad.as_slice(), tau, x_new.as_mut_slice());
        let extrap = 2.0 * &x_new - &x;
        let y_new = &y + sigma * (m * extrap - c);
        change = rel_change(&x_new, &x);
        x = &x + rho * (&x_new - &x);
        y = &y + rho * (y_new - &y);
        if record_trace {
            trace.push(f.value(x.as_slice()));
        }
        if it % 10 == 0 && change <= cfg.eps_rel {
            feas = feasibility(proj, &x, c);
            if feas <= cfg.eps_feas {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        feas = feasibility(proj, &x, c);
    }
    EngineOutput {
        multiplier: -m.tr_mul(&y),
        x,
        iterations,
        converged,
        feasibility: feas,
        rel_change: change,
        trace,
    }
}
