//! Measurement bounds from statistical dimensions: chi-excess moments, the
//! soft-recovery cone parameters, the bound `Φ(τ)` and its minimization, the
//! Column-Streamlining threshold, and a Monte-Carlo distance estimator.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{standard_normal_vec, stream_rng};

/// `E[pos(‖g‖₂ − t)²]` for a standard Gaussian `g ∈ ℝ^d`.
///
/// Computed by adaptive Gauss–Kronrod quadrature against the chi density
/// (absolute error below 1e-8 for `d ≤ 10⁴`). `d = 0` is the degenerate Gaussian and
/// gives 0.
pub fn chi_excess(d: usize, t: f64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let t = t.max(0.0);
    let df = d as f64;
    // unnormalized log chi density, centered at the mode to avoid cancelling
    // large terms; the normalizer is integrated with the same rule
    let mode = (df - 1.0).sqrt().max(1.0);
    let log_density = move |x: f64| {
        (df - 1.0) * ((x - mode) / mode).ln_1p() - 0.5 * (x - mode) * (x + mode)
    };
    let density = |x: f64| if x <= 0.0 { 0.0 } else { log_density(x).exp() };
    let hi = t.max(df.sqrt()) + 15.0;
    let norm = adaptive_gk(&density, 0.0, df.sqrt() + 15.0, 1e-14);
    let moment = adaptive_gk(&|x: f64| (x - t) * (x - t) * density(x), t, hi, 1e-14 * norm);
    moment / norm
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point
/// Gauss rule.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive integration: starts from unit-width pieces (so narrow
/// peaks are seen) and repeatedly bisects the piece with the largest error
/// estimate until the total estimate drops below `tol`.
fn adaptive_gk(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let pieces = ((b - a).ceil() as usize).max(1);
    let max_intervals = 4 * pieces + 500;
    let width = (b - a) / pieces as f64;
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..pieces)
        .map(|j| {
            let lo = a + j as f64 * width;
            let hi = if j + 1 == pieces { b } else { lo + width };
            let (v, e) = gk15(f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let mut total_err = 0.0;
        let mut value = 0.0;
        let mut worst = 0;
        for (i, p) in parts.iter().enumerate() {
            total_err += p.3;
            value += p.2;
            if p.3 > parts[worst].3 {
                worst = i;
            }
        }
        let floor = 64.0 * f64::EPSILON * f64::abs(value);
        if !(total_err > tol.max(floor)) || parts.len() >= max_intervals {
            return value;
        }
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Parameters of the cone used to bound soft-recovery measurement counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub k: usize,
    pub s: usize,
    pub n: usize,
    pub alpha: f64,
    /// `z⁰_{i*} / ‖z⁰‖₁`.
    pub weight_ratio: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl ConeParams {
    pub fn new(k: usize, s: usize, n: usize, alpha: f64, weight_ratio: f64) -> Result<Self> {
        if k == 0 || s == 0 || s > n {
            return Err(Error::InvalidParameter(format!(
                "need k ≥ 1 and 1 ≤ s ≤ n, got k={k}, s={s}, n={n}"
            )));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, π/2)")));
        }
        if !(weight_ratio > 0.0 && weight_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "weight ratio {weight_ratio} outside (0, 1]"
            )));
        }
        let sigma = 1.0 / (1.0 + (1.0 / alpha.cos() - 1.0) * weight_ratio);
        Ok(Self {
            k,
            s,
            n,
            alpha,
            weight_ratio,
            sigma,
            beta: sigma.min(1.0).acos(),
        })
    }
}

/// Minimum of a 1-D bound over `τ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub m_value: f64,
    pub tau_star: f64,
    pub phi_at_tau: f64,
    /// Golden-section iterations after the grid scan.
    pub iterations: usize,
    /// Whether the grid values fell and then rose exactly once.
    pub unimodal: bool,
}

/// The upper bound `Φ_{k,s,n,α,β}(τ)` on the expected squared distance of a
/// Gaussian to `τ·𝓜_{i*}`.
pub fn phi(params: &ConeParams, tau: f64) -> f64 {
    let ConeParams { k, s, n, alpha, beta, .. } = *params;
    let (sb, cb) = beta.sin_cos();
    let ca = alpha.cos();
    let tau2 = tau * tau;
    s as f64
        + tau2 * cb * cb / (ca * ca)
        + chi_excess(k - 1, tau * sb / ca)
        + (s - 1) as f64 * (tau2 * cb * cb + chi_excess(k - 1, tau * sb))
        + (n - s) as f64 * chi_excess(k, tau)
}

/// Upper end of the `τ` search interval for column length `k`.
pub fn tau_max(k: usize) -> f64 {
    3.0 * ((k as f64).sqrt() + 1.0)
}

const GRID_POINTS: usize = 200;
const GOLDEN_TOL: f64 = 1e-6;

/// Grid scan on `[0, tau_hi]` followed by golden-section refinement.
pub fn minimize_tau(f: impl Fn(f64) -> f64, tau_hi: f64) -> ThresholdResult {
    let step = tau_hi / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|j| f(j as f64 * step)).collect();
    let best = (0..GRID_POINTS)
        .min_by(|&a, &b| grid[a].total_cmp(&grid[b]))
        .expect("grid is nonempty");

    let rel = 1e-12 * grid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut turns = 0;
    let mut descending = true;
    for w in grid.windows(2) {
        if descending && w[1] > w[0] + rel {
            descending = false;
            turns += 1;
        } else if !descending && w[1] < w[0] - rel {
            descending = true;
            turns += 1;
        }
    }
    let unimodal = turns <= 1;

    let mut lo = best.saturating_sub(1) as f64 * step;
    let mut hi = (best + 1).min(GRID_POINTS - 1) as f64 * step;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut iterations = 0;
    while hi - lo > GOLDEN_TOL {
        iterations += 1;
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut candidates = [(x1, f1), (x2, f2), (lo, f(lo)), (hi, f(hi))];
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (tau_star, value) = candidates[0];
    ThresholdResult {
        m_value: value,
        tau_star,
        phi_at_tau: value,
        iterations,
        unimodal,
    }
}

/// `inf_τ Φ(τ)`: Gaussian measurements sufficient for `2α`-soft recovery of
/// the chosen column.
pub fn m_soft(params: &ConeParams) -> ThresholdResult {
    minimize_tau(|t| phi(params, t), tau_max(params.k))
}

/// Objective of the Column-Streamlining threshold at `τ`.
pub fn mu_objective(k: usize, s: usize, n: usize, r: usize, tau: f64) -> f64 {
    let tau2 = tau * tau;
    s as f64 * (r as f64 + tau2 + chi_excess(k - r, tau)) + (n - s) as f64 * chi_excess(k, tau)
}

/// Measurements sufficient for the streamlined program with the true rank-`r`
/// range, `inf_τ s(r + τ² + E pos(‖g^{k−r}‖−τ)²) + (n−s) E pos(‖g^k‖−τ)²`.
///
/// Requires `1 ≤ r < k`: the on-support term places the column direction in
/// the `r`-dimensional range, which is impossible for `r = 0`.
pub fn mu_colstream(k: usize, s: usize, n: usize, r: usize) -> Result<ThresholdResult> {
    if r == 0 || r >= k {
        return Err(Error::RankOutOfRange { rank: r, max: k.saturating_sub(1) });
    }
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!("need 1 ≤ s ≤ n, got s={s}, n={n}")));
    }
    Ok(minimize_tau(|t| mu_objective(k, s, n, r, t), tau_max(k)))
}

/// Squared distance of `v` to `{w : ‖w‖ ≤ ρ, ⟨w, h⟩ ≥ ρ cos β}` for unit `h`.
pub fn cap_distance_sq(v: &DVector<f64>, h: &DVector<f64>, rho: f64, beta: f64) -> f64 {
    let along = v.dot(h);
    let perp = (v.norm_squared() - along * along).max(0.0).sqrt();
    let (sb, cb) = beta.sin_cos();
    if perp >= beta.tan() * along || along <= rho * cb {
        let d = along - rho * cb;
        let e = (perp - rho * sb).max(0.0);
        d * d + e * e
    } else {
        let e = (v.norm() - rho).max(0.0);
        e * e
    }
}

/// Monte-Carlo estimate of `E dist(G − τ𝓜_{i*})²` with its standard error.
///
/// `directions` lists the unit directions of the `s` support columns and
/// `i_star` indexes into it; the remaining `n − s` columns are off-support.
pub fn mc_cone_distance(
    params: &ConeParams,
    directions: &[DVector<f64>],
    i_star: usize,
    tau: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_samples < 100 {
        return Err(Error::InvalidParameter("need at least 100 samples".into()));
    }
    if directions.len() != params.s || i_star >= params.s {
        return Err(Error::InvalidParameter(
            "directions must list the s support columns and contain i_star".into(),
        ));
    }
    if directions.iter().any(|h| h.len() != params.k || (h.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::InvalidDirection("support directions must be unit vectors in R^k".into()));
    }
    let ConeParams { k, n, s, alpha, beta, .. } = *params;
    let ca = alpha.cos();
    let sample = |v: &[f64]| -> f64 {
        let mut total = 0.0;
        for (i, col) in v.chunks(k).enumerate() {
            let col = DVector::from_column_slice(col);
            total += if i < s {
                let rho = if i == i_star { tau / ca } else { tau };
                cap_distance_sq(&col, &directions[i], rho, beta)
            } else {
                let e = (col.norm() - tau).max(0.0);
                e * e
            };
        }
        total
    };

    const BLOCK: usize = 500;
    let blocks = n_samples.div_ceil(BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let count = BLOCK.min(n_samples - b * BLOCK);
            let mut acc = (0.0, 0.0);
            for _ in 0..count {
                let g = standard_normal_vec(&mut rng, k * n);
                let d = sample(&g);
                acc.0 += d;
                acc.1 += d * d;
            }
            acc
        })
        .collect();
    let (sum, sum_sq) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = n_samples as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub k: usize,
    pub s: usize,
    pub n: usize,
    pub alpha: f64,
    pub ratio: f64,
    pub tau_star: f64,
    pub m_value: f64,
}

impl ThresholdRow {
    pub fn soft(params: &ConeParams) -> Self {
        let res = m_soft(params);
        Self {
            k: params.k,
            s: params.s,
            n: params.n,
            alpha: params.alpha,
            ratio: params.weight_ratio,
            tau_star: res.tau_star,
            m_value: res.m_value,
        }
    }
}

/// Writes threshold rows as CSV with header `k,s,n,alpha,ratio,tau_star,m_value`.
pub fn write_threshold_csv<W: Write>(rows: &[ThresholdRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "s", "n", "alpha", "ratio", "tau_star", "m_value"])?;
    for r in rows {
        out.write_record([
            r.k.to_string(),
            r.s.to_string(),
            r.n.to_string(),
            r.alpha.to_string(),
            r.ratio.to_string(),
            r.tau_star.to_string(),
            r.m_value.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::{gamma_ur, ln_gamma};
    use std::f64::consts::PI;

    /// `E[X^j 1{X > t}]` for `X ~ χ_d` through the regularized upper
    /// incomplete gamma function.
    fn chi_partial_moment(d: usize, j: usize, t: f64) -> f64 {
        let a = (d + j) as f64 / 2.0;
        let log_c = (j as f64 / 2.0) * std::f64::consts::LN_2 + ln_gamma(a) - ln_gamma(d as f64 / 2.0);
        let q = if t == 0.0 { 1.0 } else { gamma_ur(a, t * t / 2.0) };
        log_c.exp() * q
    }

    fn chi_excess_closed(d: usize, t: f64) -> f64 {
        chi_partial_moment(d, 2, t) - 2.0 * t * chi_partial_moment(d, 1, t)
            + t * t * chi_partial_moment(d, 0, t)
    }

    /// Scan `[0, 10]` with step 5e-4, then rescan around the best point with
    /// step 1e-7.
    fn dense_min(f: impl Fn(f64) -> f64) -> f64 {
        let coarse = (0..=20_000)
            .map(|j| j as f64 * 5e-4)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        (0..=10_000)
            .map(|j| (coarse - 5e-4 + j as f64 * 1e-7).max(0.0))
            .map(&f)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn chi_excess_at_zero_is_dimension() {
        for d in [1, 2, 3, 9, 10, 50, 400, 10_000] {
            assert!((chi_excess(d, 0.0) - d as f64).abs() < 1e-8, "d={d} {}", chi_excess(d, 0.0) - d as f64);
        }
    }

    #[test]
    fn chi_excess_matches_incomplete_gamma_closed_form() {
        for d in [1, 2, 5, 9, 10, 30] {
            for j in 0..40 {
                let t = 0.2 * j as f64;
                let got = chi_excess(d, t);
                let want = chi_excess_closed(d, t);
                assert!((got - want).abs() < 1e-8, "d={d} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn chi_excess_deep_tail_is_tiny() {
        assert!(chi_excess(5, 10.0) < 1e-6);
        assert!(chi_excess(5, 10.0) >= 0.0);
    }

    #[test]
    fn chi_excess_matches_monte_carlo() {
        let (d, t) = (3, 1.2);
        let n = 10_000_000;
        let mut rng = stream_rng(2024, 0);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let g = standard_normal_vec(&mut rng, d);
            let r = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let e = (r - t).max(0.0).powi(2);
            sum += e;
            sum_sq += e * e;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let se = ((sum_sq / nf - mean * mean) / (nf - 1.0)).sqrt();
        assert!((chi_excess(d, t) - mean).abs() < 4.0 * se);
    }

    #[test]
    fn chi_excess_is_nonincreasing_and_convex() {
        for d in [1, 4, 10] {
            let h = 0.05;
            let vals: Vec<f64> = (0..120).map(|j| chi_excess(d, j as f64 * h)).collect();
            for w in vals.windows(3) {
                assert!(w[1] <= w[0] + 1e-12);
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
            }
        }
    }

    #[test]
    fn sigma_limits() {
        for ratio in [0.01, 0.5, 1.0] {
            let p = ConeParams::new(10, 10, 100, 0.0, ratio).unwrap();
            assert_eq!(p.sigma, 1.0);
            assert_eq!(p.beta, 0.0);
        }
        let p = ConeParams::new(10, 10, 100, 1.0, 1e-12).unwrap();
        assert!((p.sigma - 1.0).abs() < 1e-10);
        for alpha in [0.1, 0.5, 1.2] {
            for ratio in [0.05, 0.5, 1.0] {
                let p = ConeParams::new(4, 3, 9, alpha, ratio).unwrap();
                assert!(p.sigma >= alpha.cos() - 1e-15);
                assert!((p.beta.cos() - p.sigma).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cone_params_validate() {
        assert!(ConeParams::new(10, 11, 10, 0.1, 0.5).is_err());
        assert!(ConeParams::new(10, 5, 10, PI / 2.0, 0.5).is_err());
        assert!(ConeParams::new(10, 5, 10, 0.1, 0.0).is_err());
        assert!(ConeParams::new(10, 5, 10, 0.1, 1.5).is_err());
    }

    #[test]
    fn phi_at_zero_tau_is_ambient_dimension() {
        let p = ConeParams::new(10, 10, 100, 0.0, 0.1).unwrap();
        assert!((phi(&p, 0.0) - 1000.0).abs() < 1e-8);
        let p = ConeParams::new(7, 3, 20, 0.4, 0.3).unwrap();
        assert!((phi(&p, 0.0) - 140.0).abs() < 1e-8);
    }

    #[test]
    fn exact_threshold_at_reference_size() {
        // α = 0 minimum of sk + sτ² + (n−s)E pos(‖g^10‖−τ)², computed with the
        // closed-form chi moments and an independent dense scan
        let p = ConeParams::new(10, 10, 100, 0.0, 0.1).unwrap();
        let res = m_soft(&p);
        let closed = |t: f64| 100.0 + 10.0 * t * t + 90.0 * chi_excess_closed(10, t);
        let dense = dense_min(closed);
        assert!((res.m_value - dense).abs() < 1e-6, "{} vs {dense}", res.m_value);
        assert!((res.m_value - 217.84).abs() < 0.01);
        assert!(res.unimodal);
        assert!((res.phi_at_tau - phi(&p, res.tau_star)).abs() < 1e-12);
    }

    #[test]
    fn all_columns_on_support_gives_nk() {
        let p = ConeParams::new(6, 15, 15, 0.0, 0.2).unwrap();
        let res = m_soft(&p);
        assert!((res.m_value - 90.0).abs() < 1e-9);
        assert!(res.tau_star < 1e-5);
    }

    #[test]
    fn large_column_needs_fewer_measurements() {
        let exact = m_soft(&ConeParams::new(10, 10, 100, 0.0, 0.9).unwrap());
        let soft = m_soft(&ConeParams::new(10, 10, 100, PI / 10.0, 0.9).unwrap());
        assert!(soft.m_value < exact.m_value);
    }

    #[test]
    fn colstream_threshold_at_reference_size() {
        let res = mu_colstream(10, 10, 100, 1).unwrap();
        assert!((res.m_value - 130.0).abs() < 3.0, "{}", res.m_value);
        let closed = |t: f64| {
            10.0 * (1.0 + t * t + chi_excess_closed(9, t)) + 90.0 * chi_excess_closed(10, t)
        };
        let dense = dense_min(closed);
        assert!((res.m_value - dense).abs() < 1e-6, "{} vs {dense}", res.m_value);
    }

    #[test]
    fn colstream_rank_bounds() {
        assert!(mu_colstream(10, 10, 100, 10).is_err());
        assert!(mu_colstream(10, 10, 100, 0).is_err());
        assert!(mu_colstream(10, 11, 10, 1).is_err());
    }

    #[test]
    fn colstream_excess_grows_with_sparsity() {
        // μ(2k, s) − μ(k, s) increases with s
        let gap = |k: usize, s: usize| {
            mu_colstream(2 * k, s, 100, 1).unwrap().m_value - mu_colstream(k, s, 100, 1).unwrap().m_value
        };
        for k in [5, 10] {
            let gaps: Vec<f64> = [5, 10, 20].iter().map(|&s| gap(k, s)).collect();
            assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
        }
    }

    /// Projection onto ball ∩ halfspace through its one-dimensional dual:
    /// the projection is `P_ball(v + λh)` for the smallest `λ ≥ 0` making the
    /// halfspace constraint hold, found by bisection.
    fn cap_distance_oracle(v: &DVector<f64>, h: &DVector<f64>, rho: f64, beta: f64) -> f64 {
        let c = rho * beta.cos();
        let ball = |x: DVector<f64>| {
            let n = x.norm();
            if n > rho { x * (rho / n) } else { x }
        };
        let w_of = |lam: f64| ball(v + lam * h);
        if w_of(0.0).dot(h) >= c {
            return (v - w_of(0.0)).norm_squared();
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while w_of(hi).dot(h) < c {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if w_of(mid).dot(h) < c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (v - w_of(hi)).norm_squared()
    }

    #[test]
    fn cap_distance_matches_projection_oracle() {
        let k = 5;
        let mut rng = stream_rng(8, 0);
        for j in 0..2000 {
            let h = DVector::from_vec(standard_normal_vec(&mut rng, k)).normalize();
            let scale = [0.3, 1.0, 3.0][j % 3];
            let v = DVector::from_vec(standard_normal_vec(&mut rng, k)) * scale;
            let rho = 0.5 + (j % 7) as f64 * 0.3;
            let beta = 0.05 + (j % 11) as f64 * 0.12;
            let got = cap_distance_sq(&v, &h, rho, beta);
            let want = cap_distance_oracle(&v, &h, rho, beta);
            assert!((got - want).abs() < 1e-5, "{got} vs {want} v={v} h={h} rho={rho} beta={beta}");
        }
    }

    #[test]
    fn mc_distance_at_zero_tau_is_ambient_dimension() {
        let p = ConeParams::new(4, 3, 12, 0.3, 0.4).unwrap();
        let dirs: Vec<DVector<f64>> = (0..3).map(|i| DVector::from_fn(4, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
        let (mean, se) = mc_cone_distance(&p, &dirs, 0, 0.0, 4000, 3).unwrap();
        assert!((mean - 48.0).abs() < 4.0 * se);
        assert!(mc_cone_distance(&p, &dirs, 0, 0.0, 50, 3).is_err());
        assert!(mc_cone_distance(&p, &dirs, 3, 0.0, 500, 3).is_err());
    }

    #[test]
    fn mc_distance_is_deterministic() {
        let p = ConeParams::new(3, 2, 6, 0.2, 0.5).unwrap();
        let dirs = vec![DVector::from_vec(vec![1.0, 0.0, 0.0]); 2];
        let a = mc_cone_distance(&p, &dirs, 1, 0.7, 1200, 5).unwrap();
        let b = mc_cone_distance(&p, &dirs, 1, 0.7, 1200, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn threshold_csv_has_header() {
        let rows = vec![ThresholdRow::soft(&ConeParams::new(3, 2, 5, 0.0, 0.5).unwrap())];
        let mut buf = Vec::new();
        write_threshold_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,s,n,alpha,ratio,tau_star,m_value\n3,2,5,0,0.5,"));
        let mut empty = Vec::new();
        write_threshold_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "k,s,n,alpha,ratio,tau_star,m_value\n");
    }
}
