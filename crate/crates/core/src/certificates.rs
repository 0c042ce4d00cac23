//! Dual certificates for ℓ₁,₂ minimization and the bounds they imply.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{shape, Error, Result};
use crate::matrix::{PolarMatrix, Subspace, SupportSet};
use crate::operators::{MeasurementOp, MeasurementVector};
use crate::solvers::{admm, AffineProjector, Constraint, Objective, SolverConfig};

/// Tolerance used by the certificate checks.
pub const CERT_TOL: f64 = 1e-9;

/// Angular clustering tolerance for [`RangePartition::from_polar`].
pub const PARTITION_ANGLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ExactCertReport {
    /// `max_{i∈S} ‖A_iᵀp − h_i⁰‖₂`.
    pub on_support_dev: f64,
    /// `max_{i∉S} ‖A_iᵀp‖₂` (zero when `S = [n]`).
    pub off_support_max: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoftCertReport {
    #[serde(serialize_with = "ser_vector")]
    pub p: MeasurementVector,
    pub i_star: usize,
    pub alpha: f64,
    /// `Σ_{i∈S} z_i⁰⟨h_i⁰, V(i)⟩ − ‖z⁰‖₁`.
    pub cond1_value: f64,
    /// `max_{i≠i*} ‖V(i)‖₂`.
    pub cond2_max_offnorm: f64,
    /// Angle between `V(i*)` and `h_{i*}⁰` (π when `V(i*) = 0`).
    pub cond3_angle: f64,
    /// `‖V(i*)‖₂ cos α − 1`.
    pub cond4_value: f64,
    /// `max_{i∉S} ‖V(i)‖₂`.
    pub gamma_max: f64,
    pub satisfied: bool,
}

impl SoftCertReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn ser_vector<S: serde::Serializer>(v: &MeasurementVector, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.as_slice().iter())
}

fn check_inputs(a: &MeasurementOp, z0: &PolarMatrix, support: &SupportSet) -> Result<()> {
    if z0.n() != a.n() || z0.k() != a.k() {
        return Err(shape(format!("{} × {} signal", a.k(), a.n()), format!("{} × {}", z0.k(), z0.n())));
    }
    if support.n() != a.n() {
        return Err(shape(format!("support in [{}]", a.n()), format!("[{}]", support.n())));
    }
    if !z0.support().is_subset_of(support) {
        return Err(Error::InvalidParameter("signal is not supported on S".into()));
    }
    for &i in support.indices() {
        if z0.direction(i).is_none() {
            return Err(Error::AbsentDirection(i));
        }
    }
    Ok(())
}

fn column_norms(v: &[f64], k: usize) -> Vec<f64> {
    v.chunks(k).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
}

/// Checks `A_iᵀp = h_i⁰` on `S` and `‖A_iᵀp‖₂ ≤ 1` off `S`.
pub fn check_exact_cert(
    a: &MeasurementOp,
    z0: &PolarMatrix,
    support: &SupportSet,
    p: &MeasurementVector,
) -> Result<ExactCertReport> {
    check_inputs(a, z0, support)?;
    if p.len() != a.m() {
        return Err(shape(format!("length {}", a.m()), format!("{}", p.len())));
    }
    let v = a.adjoint_flat(p.values());
    let k = a.k();
    let mut on = 0.0f64;
    let mut off = 0.0f64;
    for i in 0..a.n() {
        let col = DVector::from_column_slice(&v.as_slice()[i * k..(i + 1) * k]);
        if support.contains(i) {
            let h = z0.direction(i).expect("checked");
            on = on.max((col - h).norm());
        } else {
            off = off.max(col.norm());
        }
    }
    Ok(ExactCertReport {
        on_support_dev: on,
        off_support_max: off,
        passed: on <= CERT_TOL && off <= 1.0 + CERT_TOL,
    })
}

/// `A_Sᵀ` stacked: the `ks × m` interpolation matrix and its target `vec H_S`.
fn interpolation_system(a: &MeasurementOp, z0: &PolarMatrix, support: &SupportSet) -> (DMatrix<f64>, DVector<f64>) {
    let k = a.k();
    let s = support.len();
    let mut b = DMatrix::zeros(k * s, a.m());
    let mut h = DVector::zeros(k * s);
    for (j, &i) in support.indices().iter().enumerate() {
        b.rows_mut(j * k, k)
            .copy_from(&a.flat().columns(i * k, k).transpose());
        h.rows_mut(j * k, k).copy_from(z0.direction(i).expect("checked"));
    }
    (b, h)
}

/// Orthonormal basis of `ker B` from the eigen-decomposition of `BᵀB`.
fn null_space(b: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = (b.transpose() * b).symmetric_eigen();
    let top = eig.eigenvalues.max().max(0.0);
    let cols: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&j| eig.eigenvalues[j] <= 1e-12 * top.max(f64::MIN_POSITIVE))
        .collect();
    DMatrix::from_fn(b.ncols(), cols.len(), |r, c| eig.eigenvectors[(r, cols[c])])
}

/// Affine set `{w0 + Mq}` seen through its direction space `ran M`.
struct AffineRange<'a> {
    offset: &'a DVector<f64>,
    dirs: &'a AffineProjector,
}

impl Constraint for AffineRange<'_> {
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.offset + self.dirs.project_range(&(v - self.offset))
    }

    fn residual(&self, x: &DVector<f64>) -> f64 {
        (x - self.project(x)).norm() / x.norm().max(1.0)
    }
}

/// `{V ∈ ran 𝒜* : ⟨W, V⟩ = c}`.
struct RangeSlice<'a> {
    range: &'a AffineProjector,
    normal: DVector<f64>,
    c: f64,
}

impl Constraint for RangeSlice<'_> {
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let pv = self.range.project_range(v);
        let shift = (self.c - self.normal.dot(&pv)) / self.normal.norm_squared();
        pv + shift * &self.normal
    }

    fn residual(&self, x: &DVector<f64>) -> f64 {
        (x - self.project(x)).norm() / x.norm().max(1.0)
    }
}

/// `max_i c_i‖x_i‖` over blocks of length `k`, optionally with block `cone.0`
/// constrained to the circular cone of half-angle `acos(cone.2)` around `cone.1`.
struct WeightedMax {
    k: usize,
    weights: Vec<f64>,
    cone: Option<(usize, DVector<f64>, f64)>,
}

impl Objective for WeightedMax {
    fn value(&self, x: &[f64]) -> f64 {
        if let Some((i, h, cos_a)) = &self.cone {
            let col = DVector::from_column_slice(&x[i * self.k..(i + 1) * self.k]);
            let n = col.norm();
            if h.dot(&col) < cos_a * n - 1e-12 * n.max(1.0) {
                return f64::INFINITY;
            }
        }
        column_norms(x, self.k)
            .iter()
            .zip(&self.weights)
            .map(|(n, c)| c * n)
            .fold(0.0, f64::max)
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        out.copy_from_slice(v);
        if let Some((i, h, cos_a)) = &self.cone {
            let block = &mut out[i * self.k..(i + 1) * self.k];
            let projected = project_circular_cone(&DVector::from_column_slice(block), h, *cos_a);
            block.copy_from_slice(projected.as_slice());
        }
        let norms = column_norms(out, self.k);
        let level = max_prox_level(&norms, &self.weights, t);
        for ((col, n), c) in out.chunks_mut(self.k).zip(&norms).zip(&self.weights) {
            let radius = level / c;
            if *n > radius {
                let f = radius / n;
                col.iter_mut().for_each(|x| *x *= f);
            }
        }
    }
}

/// Level `s` of the epigraph in `prox_{t·max_i c_i‖·‖}`: solves
/// `Σ_i (ρ_i − s/c_i)₊ / c_i = t`, or returns 0 when `Σ ρ_i/c_i ≤ t`.
fn max_prox_level(norms: &[f64], weights: &[f64], t: f64) -> f64 {
    let total: f64 = norms.iter().zip(weights).map(|(r, c)| r / c).sum();
    if total <= t {
        return 0.0;
    }
    // breakpoints s = c_i ρ_i, activated in decreasing order
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&x, &y| (weights[y] * norms[y]).total_cmp(&(weights[x] * norms[x])));
    let mut num = 0.0;
    let mut den = 0.0;
    for (pos, &j) in order.iter().enumerate() {
        let w = 1.0 / weights[j];
        num += w * norms[j];
        den += w * w;
        let s = (num - t) / den;
        let next = order.get(pos + 1).map_or(0.0, |&q| weights[q] * norms[q]);
        if s >= next {
            return s;
        }
    }
    0.0
}

/// Projection onto `{v : ⟨v, h⟩ ≥ cos α ‖v‖}` for unit `h`.
fn project_circular_cone(v: &DVector<f64>, h: &DVector<f64>, cos_a: f64) -> DVector<f64> {
    let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
    let t = h.dot(v);
    let perp = v - t * h;
    let r = perp.norm();
    if r * cos_a <= t * sin_a {
        return v.clone();
    }
    if r * sin_a <= -t * cos_a {
        return DVector::zeros(v.len());
    }
    let d = cos_a * h + (sin_a / r) * perp;
    (t * cos_a + r * sin_a) * d
}

/// Searches for an exact-recovery certificate by minimizing
/// `max_{i∉S} ‖A_iᵀp‖₂` subject to `A_iᵀp = h_i⁰` on `S`.
///
/// Returns `None` when no interpolating `p` exists or the optimum is not
/// below 1. The search stops at the first iterate that certifies.
pub fn find_exact_cert(
    a: &MeasurementOp,
    z0: &PolarMatrix,
    support: &SupportSet,
    cfg: &SolverConfig,
) -> Result<Option<MeasurementVector>> {
    check_inputs(a, z0, support)?;
    cfg.validate()?;
    if support.is_empty() {
        return Err(Error::InvalidParameter("support must be nonempty".into()));
    }
    if !(a.restricted_sigma_min(z0.directions(), support)? > 0.0) {
        return Err(Error::RankDeficient);
    }
    let (b, h) = interpolation_system(a, z0, support);
    let interp = AffineProjector::new(b.clone());
    let p0 = interp.least_norm(&h);
    if (&b * &p0 - &h).norm() > 1e-8 * h.norm() {
        return Ok(None);
    }
    let off = support.complement();
    if off.is_empty() {
        return Ok(polish_exact(a, z0, support, p0));
    }
    let k = a.k();
    let off_t = DMatrix::from_fn(k * off.len(), a.m(), |r, c| {
        a.flat()[(c, off.indices()[r / k] * k + r % k)]
    });
    let null = null_space(&b);
    if null.ncols() == 0 {
        return Ok(polish_exact(a, z0, support, p0));
    }
    // off-support block V_{S^c} = w0 + M q over the interpolating p = p0 + N q
    let w0 = &off_t * &p0;
    let dirs = AffineProjector::new((&off_t * &null).transpose());
    let set = AffineRange { offset: &w0, dirs: &dirs };
    let f = WeightedMax {
        k,
        weights: vec![1.0; off.len()],
        cone: None,
    };
    let x0 = set.project(&DVector::zeros(w0.len()));
    let certify = |z: &DVector<f64>| {
        let q = dirs.dual_from(&(set.project(z) - &w0));
        polish_exact(a, z0, support, &p0 + &null * q)
    };
    let stop = |z: &DVector<f64>| certify(z).is_some();
    let out = admm(&f, &set, &x0, cfg, false, Some(&stop));
    Ok(certify(&out.x))
}

/// Enforces interpolation exactly and accepts `p` only when the off-support
/// norms stay strictly below 1.
fn polish_exact(
    a: &MeasurementOp,
    z0: &PolarMatrix,
    support: &SupportSet,
    p: DVector<f64>,
) -> Option<MeasurementVector> {
    let (b, h) = interpolation_system(a, z0, support);
    let interp = AffineProjector::new(b.clone());
    let r = &b * &p - &h;
    let p = &p - interp.least_norm(&r);
    let p = MeasurementVector::from_dvector(p).ok()?;
    let report = check_exact_cert(a, z0, support, &p).ok()?;
    (report.passed && report.off_support_max < 1.0).then_some(p)
}

fn validate_soft(z0: &PolarMatrix, support: &SupportSet, i_star: usize, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, π/2), got {alpha}")));
    }
    if !support.contains(i_star) {
        return Err(Error::InvalidParameter(format!("i* = {i_star} is not in S")));
    }
    if z0.weight_l1() == 0.0 {
        return Err(Error::InvalidParameter("signal must be nonzero".into()));
    }
    Ok(())
}

/// Evaluates the soft-recovery conditions for `V = 𝒜*p`.
pub fn check_soft_cert(
    a: &MeasurementOp,
    z0: &PolarMatrix,
    support: &SupportSet,
    i_star: usize,
    alpha: f64,
    p: &MeasurementVector,
) -> Result<SoftCertReport> {
    check_inputs(a, z0, support)?;
    validate_soft(z0, support, i_star, alpha)?;
    if p.len() != a.m() {
        return Err(shape(format!("length {}", a.m()), format!("{}", p.len())));
    }
    let k = a.k();
    let v = a.adjoint_flat(p.values());
    let col = |i: usize| DVector::from_column_slice(&v.as_slice()[i * k..(i + 1) * k]);
    let norms = column_norms(v.as_slice(), k);
    let mut inner = 0.0;
    for &i in support.indices() {
        inner += z0.weights()[i] * z0.direction(i).expect("checked").dot(&col(i));
    }
    let z_l1 = z0.weight_l1();
    let cond1 = inner - z_l1;
    let cond2 = (0..a.n()).filter(|&i| i != i_star).map(|i| norms[i]).fold(0.0, f64::max);
    let gamma = support.complement().indices().iter().map(|&i| norms[i]).fold(0.0, f64::max);
    let vi = col(i_star);
    let h = z0.direction(i_star).expect("checked");
    let along = h.dot(&vi);
    let across = (&vi - along * h).norm();
    let angle = if vi.norm() == 0.0 {
        std::f64::consts::PI
    } else {
        across.atan2(along)
    };
    let cond4 = norms[i_star] * alpha.cos() - 1.0;
    let satisfied = cond1 >= -CERT_TOL * z_l1 && cond2 < 1.0 + CERT_TOL && angle <= alpha && cond4 <= CERT_TOL;
    Ok(SoftCertReport {
        p: p.clone(),
        i_star,
        alpha,
        cond1_value: cond1,
        cond2_max_offnorm: cond2,
        cond3_angle: angle,
        cond4_value: cond4,
        gamma_max: gamma,
        satisfied,
    })
}

/// Searches for a soft-recovery certificate for column `i_star`.
///
/// Minimizes `max(max_{i≠i*} ‖V(i)‖₂, cos α ‖V(i*)‖₂)` over `V ∈ ran 𝒜*` with
/// `Σ_{i∈S} z_i⁰⟨h_i⁰, V(i)⟩ = ‖z⁰‖₁` and `⟨V(i*), h_{i*}⁰⟩ ≥ cos α ‖V(i*)‖₂`.
/// The cone is searched with a slightly smaller half-angle so the returned
/// vector meets the angle condition despite solver inexactness. The search
/// stops at the first iterate whose projection is a verified certificate.
pub fn find_soft_cert(
    a: &MeasurementOp,
    z0: &PolarMatrix,
    support: &SupportSet,
    i_star: usize,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<Option<MeasurementVector>> {
    check_inputs(a, z0, support)?;
    validate_soft(z0, support, i_star, alpha)?;
    cfg.validate()?;
    let k = a.k();
    let mut normal = DVector::zeros(k * a.n());
    for &i in support.indices() {
        let h = z0.direction(i).expect("checked");
        normal.rows_mut(i * k, k).copy_from(&(h * z0.weights()[i]));
    }
    let range = AffineProjector::new(a.flat().clone());
    let normal = range.project_range(&normal);
    if normal.norm() <= 1e-12 * z0.weight_l1() {
        return Ok(None);
    }
    let z_l1 = z0.weight_l1();
    let set = RangeSlice {
        range: &range,
        normal,
        c: z_l1,
    };
    let search_alpha = alpha * (1.0 - 1e-3);
    let mut weights = vec![1.0; a.n()];
    weights[i_star] = search_alpha.cos();
    let h = z0.direction(i_star).expect("checked").clone();
    let f = WeightedMax {
        k,
        weights,
        cone: Some((i_star, h, search_alpha.cos())),
    };
    let x0 = set.project(&DVector::zeros(k * a.n()));
    let certify = |z: &DVector<f64>| -> Option<MeasurementVector> {
        let p = MeasurementVector::from_dvector(range.dual_from(&set.project(z))).ok()?;
        // restore the hyperplane equality lost to round-off by positive scaling
        let report = check_soft_cert(a, z0, support, i_star, alpha, &p).ok()?;
        let inner = report.cond1_value + z_l1;
        let p = if inner > 0.0 && report.cond1_value < 0.0 {
            MeasurementVector::from_dvector(p.values() * (z_l1 / inner)).ok()?
        } else {
            p
        };
        let report = check_soft_cert(a, z0, support, i_star, alpha, &p).ok()?;
        report.satisfied.then_some(p)
    };
    let stop = |z: &DVector<f64>| certify(z).is_some();
    let out = admm(&f, &set, &x0, cfg, false, Some(&stop));
    Ok(certify(&out.x))
}

/// Right-hand sides of the off-support and on-support energy bounds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBounds {
    /// Bound on `‖ẑ_{S^c}‖₁`.
    pub offsupp: f64,
    /// Bound on `‖ẑ_S − z_S⁰‖₂`.
    pub onsupp: f64,
}

/// Energy-concentration bounds for a minimizer `ẑ.Ĥ` given a soft certificate
/// with parameters `alpha` and `gamma`.
pub fn energy_bounds(
    alpha: f64,
    gamma: f64,
    z_hat: &PolarMatrix,
    z0: &PolarMatrix,
    i_star: usize,
    support: &SupportSet,
    a: &MeasurementOp,
) -> Result<EnergyBounds> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, π/2), got {alpha}")));
    }
    if z_hat.n() != a.n() || z0.n() != a.n() || support.n() != a.n() {
        return Err(shape(format!("{} columns", a.n()), format!("{}", z_hat.n())));
    }
    if !support.contains(i_star) {
        return Err(Error::InvalidParameter(format!("i* = {i_star} is not in S")));
    }
    let sigma = a.restricted_sigma_min(z0.directions(), support)?;
    if !(sigma > 0.0) {
        return Err(Error::RankDeficient);
    }
    let norms = a.block_op_norms();
    let max_s = support.indices().iter().map(|&i| norms[i]).fold(0.0, f64::max);
    let max_all = norms.iter().copied().fold(0.0, f64::max);
    let off_l1: f64 = support.complement().indices().iter().map(|&i| z_hat.weights()[i]).sum();
    let (sin_a, cos_a) = alpha.sin_cos();
    Ok(EnergyBounds {
        offsupp: (1.0 - cos_a) / (cos_a * (1.0 - gamma)) * z_hat.weights()[i_star],
        onsupp: sin_a * max_s / sigma * z0.weight_l1() + max_all / sigma * off_l1,
    })
}

/// Partition `S = ∪ S_ℓ` with `h_i⁰ = ±η_ℓ` on `S_ℓ` and lower frame bound `Λ`
/// of `(η_ℓ)` on `⟨H₀⟩`.
#[derive(Debug, Clone, Serialize)]
pub struct RangePartition {
    blocks: Vec<Vec<usize>>,
    #[serde(serialize_with = "ser_frame")]
    frame: Vec<DVector<f64>>,
    lambda: f64,
}

fn ser_frame<S: serde::Serializer>(f: &[DVector<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(f.iter().map(|v| v.as_slice().to_vec()))
}

impl RangePartition {
    pub fn new(blocks: Vec<SupportSet>, frame: Vec<DVector<f64>>, lambda: f64) -> Result<Self> {
        if blocks.len() != frame.len() || blocks.is_empty() {
            return Err(Error::InvalidParameter("need one frame vector per nonempty block list".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::InvalidParameter("empty block".into()));
            }
            for &i in b.indices() {
                if !seen.insert(i) {
                    return Err(Error::InvalidParameter(format!("index {i} appears in two blocks")));
                }
            }
        }
        for eta in &frame {
            if (eta.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidDirection("frame vectors must have unit norm".into()));
            }
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("frame bound must be positive, got {lambda}")));
        }
        Ok(Self {
            blocks: blocks.into_iter().map(|b| b.indices().to_vec()).collect(),
            frame,
            lambda,
        })
    }

    /// Groups the support columns of `z0` by direction up to sign and computes
    /// `Λ` as the smallest eigenvalue of `Σ_ℓ η_ℓη_ℓᵀ` on `range`.
    pub fn from_polar(z0: &PolarMatrix, range: &Subspace) -> Result<Self> {
        if range.ambient_dim() != z0.k() {
            return Err(shape(format!("subspace of R^{}", z0.k()), format!("R^{}", range.ambient_dim())));
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut frame: Vec<DVector<f64>> = Vec::new();
        for &i in z0.support().indices() {
            let h = z0.direction(i).expect("support has directions");
            let found = frame
                .iter()
                .position(|eta| eta.dot(h).abs().min(1.0).acos() <= PARTITION_ANGLE_TOL);
            match found {
                Some(l) => blocks[l].push(i),
                None => {
                    blocks.push(vec![i]);
                    frame.push(h.clone());
                }
            }
        }
        let basis = range.basis();
        let mut gram = DMatrix::zeros(basis.ncols(), basis.ncols());
        for eta in &frame {
            let c = basis.tr_mul(eta);
            gram += &c * c.transpose();
        }
        let lambda = if gram.is_empty() {
            0.0
        } else {
            gram.symmetric_eigen().eigenvalues.min()
        };
        let n = z0.n();
        let blocks = blocks
            .into_iter()
            .map(|b| SupportSet::new(n, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks, frame, lambda)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn frame(&self) -> &[DVector<f64>] {
        &self.frame
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Upper bound on `sin∠(⟨Ĥ⟩_r, ⟨H₀⟩)`; `+∞` when the bound is vacuous.
pub fn range_angle_bound(z_hat: &PolarMatrix, support: &SupportSet, alpha: f64, partition: &RangePartition) -> f64 {
    let w = z_hat.weights();
    let sq = |idx: &[usize]| idx.iter().map(|&i| w[i] * w[i]).sum::<f64>();
    let on = sq(support.indices());
    let off = sq(support.complement().indices());
    let min_block = partition.blocks.iter().map(|b| sq(b)).fold(f64::INFINITY, f64::min);
    let sin_a = alpha.sin();
    let num = (sin_a * on.sqrt()).max(off.sqrt());
    let den = partition.lambda * min_block - sin_a * on;
    if den <= 0.0 {
        return f64::INFINITY;
    }
    num / den.sqrt()
}

/// Membership of a column `V(i)` in the subdifferential of
/// `‖·‖₁,₂ + ‖Π_{⟨H₀⟩⊥}·‖₁,₂` at a matrix with support `S` and range `⟨H₀⟩`.
pub fn subdiff_member(
    v_col: &DVector<f64>,
    i: usize,
    support: &SupportSet,
    h0: &Subspace,
    h_i0: Option<&DVector<f64>>,
) -> Result<bool> {
    if v_col.len() != h0.ambient_dim() {
        return Err(shape(format!("length {}", h0.ambient_dim()), format!("{}", v_col.len())));
    }
    if i >= support.n() {
        return Err(Error::InvalidParameter(format!("index {i} out of range")));
    }
    let inside = h0.project(v_col);
    let perp = v_col - &inside;
    match (support.contains(i), h_i0) {
        (true, Some(h)) => {
            if h.len() != v_col.len() {
                return Err(shape(format!("length {}", v_col.len()), format!("{}", h.len())));
            }
            Ok((&inside - h).norm() <= CERT_TOL && perp.norm() <= 1.0 + CERT_TOL)
        }
        (false, None) => {
            // v = a + b with ‖a‖ ≤ 1 and b ∈ ⟨H₀⟩⊥, ‖b‖ ≤ 1: the best b is the
            // perpendicular part clipped to the unit ball
            let excess = (perp.norm() - 1.0).max(0.0);
            Ok((inside.norm_squared() + excess * excess).sqrt() <= 1.0 + CERT_TOL)
        }
        _ => Err(Error::InvalidParameter(
            "a direction must be given exactly for on-support columns".into(),
        )),
    }
}

/// `cos²(min(x + α, π/2)) − (cos²x − sin α)`, the slack of the angle
/// inequality behind [`range_angle_bound`]. Nonnegative for `x ∈ [0, π/2]`
/// and `α ∈ [0, π/2]`; negative for some `x > π/2` (e.g. `x = π`, `α = 0.1`).
pub fn trig_lemma_slack(x: f64, alpha: f64) -> f64 {
    let c = (x + alpha).min(std::f64::consts::FRAC_PI_2).cos();
    c * c - (x.cos().powi(2) - alpha.sin())
}
