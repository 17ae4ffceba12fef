//! Distributional tools: total variation, Kolmogorov-Smirnov distances,
//! log-chi-square cumulants, reference laws, moments, and histograms.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Exp, Gamma, LogNormal, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::outcomes::{self, SpaceKind};
use crate::rng::RngStream;
use crate::samplers::ProbabilityTable;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Pairwise (tree) summation; the result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample moments with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub mean: f64,
    pub variance: f64,
    pub fourth_central_moment: f64,
    pub count: usize,
    pub mean_se: f64,
    pub variance_se: f64,
}

impl DistributionSummary {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return invalid("summary of an empty sample");
        }
        let n = xs.len() as f64;
        let mu = mean(xs);
        let dev2: Vec<f64> = xs.iter().map(|x| (x - mu).powi(2)).collect();
        let dev4: Vec<f64> = dev2.iter().map(|d| d * d).collect();
        let variance = pairwise_sum(&dev2) / n;
        let fourth = pairwise_sum(&dev4) / n;
        Ok(Self {
            mean: mu,
            variance,
            fourth_central_moment: fourth,
            count: xs.len(),
            mean_se: (variance / n).sqrt(),
            variance_se: ((fourth - variance * variance).max(0.0) / n).sqrt(),
        })
    }
}

/// Reference distributions for CDF comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceLaw {
    StandardNormal,
    Normal { mean: f64, variance: f64 },
    /// `e^Z` with `Z ~ N(mu, sigma2)`.
    Lognormal { mu: f64, sigma2: f64 },
    /// Sum of `dof` squared moduli of standard complex Gaussians, i.e. `Gamma(dof, 1)`.
    ComplexChiSquare { dof: usize },
    /// Density `rate * exp(-rate * x)`.
    Exponential { rate: f64 },
}

impl ReferenceLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReferenceLaw::StandardNormal => Ok(()),
            ReferenceLaw::Normal { variance, .. } | ReferenceLaw::Lognormal { sigma2: variance, .. }
                if !(variance > 0.0) =>
            {
                invalid(format!("variance must be positive, got {variance}"))
            }
            ReferenceLaw::ComplexChiSquare { dof: 0 } => invalid("chi-square needs dof >= 1"),
            ReferenceLaw::Exponential { rate } if !(rate > 0.0) => invalid(format!("rate must be positive, got {rate}")),
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ReferenceLaw::StandardNormal => normal_cdf(x),
            ReferenceLaw::Normal { mean, variance } => normal_cdf((x - mean) / variance.sqrt()),
            ReferenceLaw::Lognormal { mu, sigma2 } => {
                LogNormal::new(mu, sigma2.sqrt()).expect("validated").cdf(x)
            }
            ReferenceLaw::ComplexChiSquare { dof } => Gamma::new(dof as f64, 1.0).expect("validated").cdf(x),
            ReferenceLaw::Exponential { rate } => Exp::new(rate).expect("validated").cdf(x),
        }
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// `1/2 sum |p_x - q_x|` between two tables over the same space.
pub fn total_variation(p: &ProbabilityTable, q: &ProbabilityTable) -> Result<f64> {
    if p.space() != q.space() {
        return invalid(format!("tables live on different spaces: {:?} vs {:?}", p.space(), q.space()));
    }
    total_variation_vectors(p.probs(), q.probs())
}

pub fn total_variation_vectors(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return invalid(format!("probability vectors differ in length: {} vs {}", p.len(), q.len()));
    }
    let diffs: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a - b).abs()).collect();
    Ok(0.5 * pairwise_sum(&diffs))
}

/// Distance between a distribution on the full space and the uniform law on
/// its collision-free outcomes (which puts no mass on collisions).
pub fn tv_to_uniform_collision_free(full: &ProbabilityTable) -> Result<f64> {
    let space = full.space();
    if space.kind != SpaceKind::Full {
        return invalid("expected a table over the full outcome space");
    }
    let lambda = outcomes::binomial(space.m, space.n)? as f64;
    let terms: Vec<f64> = outcomes::enumerate(&space)?
        .iter()
        .zip(full.probs())
        .map(|(s, &p)| if s.is_collision_free() { (p - 1.0 / lambda).abs() } else { p })
        .collect();
    Ok(0.5 * pairwise_sum(&terms))
}

/// TV between the `k`-fold product distributions `p^k` and `q^k`, by full
/// enumeration of the `len^k` product outcomes.
pub fn product_tv(p: &[f64], q: &[f64], k: u32) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return invalid("product TV needs two nonempty vectors of equal length");
    }
    let cells = (p.len() as u64).checked_pow(k).filter(|&c| c <= 1 << 24);
    let Some(cells) = cells else {
        return invalid("product space too large");
    };
    let mut total = 0.0;
    for mut idx in 0..cells {
        let (mut pp, mut qq) = (1.0, 1.0);
        for _ in 0..k {
            let j = (idx % p.len() as u64) as usize;
            idx /= p.len() as u64;
            pp *= p[j];
            qq *= q[j];
        }
        total += (pp - qq).abs();
    }
    Ok(0.5 * total)
}

/// Sup over sample points of `|ECDF - F|`, checking both one-sided limits of
/// the empirical CDF at each point.
pub fn ks_distance(sorted: &[f64], law: &ReferenceLaw) -> Result<f64> {
    if sorted.len() < 100 {
        return invalid(format!("KS distance needs at least 100 samples, got {}", sorted.len()));
    }
    if sorted.iter().any(|x| x.is_nan()) {
        return invalid("samples contain NaN");
    }
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return invalid("samples must be sorted ascending");
    }
    law.validate()?;
    let n = sorted.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = law.cdf(x);
        worst = worst.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(worst)
}

/// Two-sample KS statistic `sup_x |F_x(t) - F_y(t)|`.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return invalid("two-sample KS needs two nonempty samples");
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0f64;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(worst)
}

/// Closed-form cumulant data of `ell_n = ln(chi^2_n)`, the log of a complex
/// chi-square variable with `n` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogChiSqMoments {
    pub mean: f64,
    pub variance: f64,
    pub fourth_central_moment: f64,
}

pub fn log_chisq_moments(n: usize) -> Result<LogChiSqMoments> {
    if n == 0 {
        return invalid("log chi-square moments need n >= 1");
    }
    let (mut h1, mut h2, mut h4) = (0.0, 0.0, 0.0);
    for j in 1..n {
        let j = j as f64;
        h1 += 1.0 / j;
        h2 += 1.0 / (j * j);
        h4 += 1.0 / (j * j * j * j);
    }
    let variance = PI * PI / 6.0 - h2;
    Ok(LogChiSqMoments {
        mean: -EULER_GAMMA + h1,
        variance,
        fourth_central_moment: 6.0 * (PI.powi(4) / 90.0 - h4) + 3.0 * variance * variance,
    })
}

/// `E|ell_n - E ell_n|^3` by Simpson quadrature of the density
/// `exp(n y - e^y) / Gamma(n)`.
pub fn log_chisq_third_abs_moment(n: usize) -> Result<f64> {
    let mom = log_chisq_moments(n)?;
    let sd = mom.variance.sqrt();
    let lo = mom.mean - (40.0 * sd).max(60.0 / n as f64);
    let hi = mom.mean + (40.0 * sd).max(8.0);
    let steps = 40_000usize;
    let h = (hi - lo) / steps as f64;
    let lg = ln_gamma(n as f64);
    let nf = n as f64;
    let integrand = |y: f64| {
        let d = (y - mom.mean).abs();
        d * d * d * (nf * y - y.exp() - lg).exp()
    };
    let mut acc = integrand(lo) + integrand(hi);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(lo + k as f64 * h);
    }
    Ok(acc * h / 3.0)
}

/// Berry-Esseen ratio `rho / (sigma^3 sqrt(n))` for a sum of `n` iid `ell_n`.
pub fn berry_esseen_ratio(n: usize) -> Result<f64> {
    let mom = log_chisq_moments(n)?;
    let rho = log_chisq_third_abs_moment(n)?;
    Ok(rho / (mom.variance.powf(1.5) * (n as f64).sqrt()))
}

/// Lognormal law approximating `|Det(X)|^2` for an `n x n` Gaussian `X`:
/// `ln|Det|^2` has mean `n ln n - n + 1/2` and variance `ln n + 1 + gamma`.
pub fn lognormal_det_reference(n: usize) -> Result<ReferenceLaw> {
    if n < 2 {
        return invalid(format!("lognormal determinant law needs n >= 2, got {n}"));
    }
    let nf = n as f64;
    Ok(ReferenceLaw::Lognormal { mu: nf * nf.ln() - nf + 0.5, sigma2: nf.ln() + 1.0 + EULER_GAMMA })
}

/// Standardizes `ln|Det|^2` against [`lognormal_det_reference`].
pub fn standardize_log_det(ln_det_sq: f64, n: usize) -> Result<f64> {
    match lognormal_det_reference(n)? {
        ReferenceLaw::Lognormal { mu, sigma2 } => Ok((ln_det_sq - mu) / sigma2.sqrt()),
        _ => unreachable!(),
    }
}

/// Complex chi-square with `dof` degrees of freedom as a literal sum of squared moduli.
pub fn complex_chisq_sample(dof: usize, rng: &mut RngStream) -> f64 {
    (0..dof).map(|_| rng.complex_normal().norm_sqr()).sum()
}

/// `ln` of a product of independent complex chi-squares with `1, 2, ..., n` dof.
pub fn ln_chisq_product_sample(n: usize, rng: &mut RngStream) -> Result<f64> {
    if n == 0 {
        return invalid("chi-square product needs n >= 1");
    }
    Ok((1..=n).map(|k| complex_chisq_sample(k, rng).ln()).sum())
}

/// One draw of `|y_11|^2 (|y_21|^2 + |y_22|^2) ... (|y_n1|^2 + ... + |y_nn|^2)`,
/// which has the law of `|Det(X)|^2` for Gaussian `X`.
pub fn chisq_product_sample(n: usize, rng: &mut RngStream) -> Result<f64> {
    Ok(ln_chisq_product_sample(n, rng)?.exp())
}

/// Moment check of `P` samples against `E[P] = 1` and `E[P^2] = n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub summary: DistributionSummary,
    pub second_moment: f64,
    pub expected_second_moment: f64,
    pub mean_ok: bool,
    pub second_moment_ok: bool,
}

/// Tolerances for [`moment_checks`]. The second-moment band is relative
/// because the fluctuation of the sample `E[P^2]` is governed by `E[P^4]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTolerances {
    pub mean_abs: f64,
    pub second_moment_rel: f64,
}

impl Default for MomentTolerances {
    fn default() -> Self {
        Self { mean_abs: 0.03, second_moment_rel: 0.15 }
    }
}

pub fn moment_checks(samples: &[f64], n: usize, tol: MomentTolerances) -> Result<MomentCheck> {
    if samples.len() < 10_000 {
        return invalid(format!("moment checks need at least 10^4 samples, got {}", samples.len()));
    }
    let summary = DistributionSummary::from_samples(samples)?;
    let sq: Vec<f64> = samples.iter().map(|p| p * p).collect();
    let second_moment = mean(&sq);
    let expected = n as f64 + 1.0;
    Ok(MomentCheck {
        summary,
        second_moment,
        expected_second_moment: expected,
        mean_ok: (summary.mean - 1.0).abs() <= tol.mean_abs,
        second_moment_ok: (second_moment / expected - 1.0).abs() <= tol.second_moment_rel,
    })
}

/// 95%-style Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Pearson correlation coefficient.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("correlation needs two samples of equal length >= 2");
    }
    let (mx, my) = (mean(xs), mean(ys));
    let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx).powi(2)).collect();
    let syy: Vec<f64> = ys.iter().map(|y| (y - my).powi(2)).collect();
    Ok(pairwise_sum(&sxy) / (pairwise_sum(&sxx) * pairwise_sum(&syy)).sqrt())
}

/// Mann-Whitney rank-sum test that `xs` is stochastically larger than `ys`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTest {
    pub u: f64,
    pub z: f64,
    /// One-sided p-value from the tie-corrected normal approximation.
    pub p_value: f64,
}

pub fn mann_whitney(xs: &[f64], ys: &[f64]) -> Result<RankTest> {
    if xs.is_empty() || ys.is_empty() {
        return invalid("rank test needs two nonempty samples");
    }
    let mut all: Vec<(f64, bool)> = xs.iter().map(|&x| (x, true)).chain(ys.iter().map(|&y| (y, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = all.len() as f64;
    let mut rank_sum_x = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        rank_sum_x += avg_rank * all[i..j].iter().filter(|e| e.1).count() as f64;
        i = j;
    }
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let u = rank_sum_x - n1 * (n1 + 1.0) / 2.0;
    let mean_u = n1 * n2 / 2.0;
    let var_u = n1 * n2 / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let z = (u - mean_u) / var_u.sqrt();
    Ok(RankTest { u, z, p_value: 1.0 - normal_cdf(z) })
}

/// Minimizes a unimodal function on `[a, b]` by golden-section search.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    while (b - a).abs() > tol {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    let x = (a + b) / 2.0;
    (x, f(x))
}

/// `1/2 E|X - 1|` for `X ~ Exponential(rate = c)`: `1/2 - 1/(2c) + 1/(c e^c)`.
pub fn exponential_half_mean_deviation(c: f64) -> f64 {
    0.5 - 0.5 / c + 1.0 / (c * c.exp())
}

/// `Pr[|X - 1| >= 1/2]` for `X ~ Exponential(rate = c)`.
pub fn exponential_far_probability(c: f64) -> f64 {
    1.0 - ((-c / 2.0).exp() - (-1.5 * c).exp())
}

/// Fixed-edge histogram normalized to a density over all samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn uniform_bins(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let edges = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
        Self::with_edges(samples, edges)
    }

    /// Bins whose edges grow geometrically from `lo > 0` to `hi`.
    pub fn geometric_bins(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let ratio = (hi / lo).powf(1.0 / bins as f64);
        let edges = (0..=bins).map(|k| lo * ratio.powi(k as i32)).collect();
        Self::with_edges(samples, edges)
    }

    pub fn with_edges(samples: &[f64], edges: Vec<f64>) -> Self {
        let mut counts = vec![0u64; edges.len() - 1];
        for &x in samples {
            if x < edges[0] || x >= edges[edges.len() - 1] {
                continue;
            }
            let k = edges.partition_point(|&e| e <= x) - 1;
            counts[k] += 1;
        }
        Self { edges, counts, total: samples.len() as u64 }
    }

    fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|k| self.counts[k] as f64 / (self.total as f64 * self.width(k))).collect()
    }

    /// Poisson standard error of each bin's density.
    pub fn density_errors(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|k| (self.counts[k] as f64).sqrt() / (self.total as f64 * self.width(k)))
            .collect()
    }

    /// Adjacent bins whose density rises by more than `k_se` standard errors
    /// of each bin: `d[i+1] - k se[i+1] > d[i] + k se[i]`.
    pub fn monotone_violations(&self, k_se: f64) -> Vec<usize> {
        let d = self.densities();
        let se = self.density_errors();
        (0..d.len().saturating_sub(1)).filter(|&i| d[i + 1] - k_se * se[i + 1] > d[i] + k_se * se[i]).collect()
    }

    /// CSV with columns `bin_left,bin_right,density`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_left,bin_right,density")?;
        for (k, d) in self.densities().iter().enumerate() {
            writeln!(w, "{},{},{}", self.edges[k], self.edges[k + 1], d)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcomes::OutcomeSpace;
    use proptest::prelude::*;

    #[test]
    fn tv_basic_cases() {
        let space = OutcomeSpace::full(3, 1);
        let p = ProbabilityTable::new(space, vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        let a = ProbabilityTable::new(space, vec![1.0, 0.0, 0.0]).unwrap();
        let b = ProbabilityTable::new(space, vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(total_variation(&a, &b).unwrap(), 1.0);
        let other = ProbabilityTable::uniform(OutcomeSpace::full(4, 1)).unwrap();
        assert!(total_variation(&p, &other).is_err());
    }

    #[test]
    fn tv_to_uniform_of_point_mass() {
        let (m, n) = (6, 2);
        let space = OutcomeSpace::full(m, n);
        let mut probs = vec![0.0; space.size().unwrap() as usize];
        probs[space.rank(&crate::Outcome::new(vec![1, 1, 0, 0, 0, 0])).unwrap() as usize] = 1.0;
        let t = ProbabilityTable::new(space, probs).unwrap();
        let expected = 1.0 - 1.0 / 15.0;
        assert!((tv_to_uniform_collision_free(&t).unwrap() - expected).abs() < 1e-12);
    }

    fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, len).prop_map(|v| {
            let s: f64 = v.iter().sum::<f64>() + 1e-9;
            v.iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(p in simplex(6), q in simplex(6), r in simplex(6)) {
            let pq = total_variation_vectors(&p, &q).unwrap();
            let qp = total_variation_vectors(&q, &p).unwrap();
            let qr = total_variation_vectors(&q, &r).unwrap();
            let pr = total_variation_vectors(&p, &r).unwrap();
            prop_assert!((pq - qp).abs() <= 1e-12);
            prop_assert!(pr <= pq + qr + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        }
    }

    #[test]
    fn product_tv_is_nondecreasing_in_k() {
        let pairs = [
            (vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5]),
            (vec![0.34, 0.33, 0.33], vec![0.3, 0.35, 0.35]),
            (vec![0.9, 0.05, 0.05], vec![0.8, 0.1, 0.1]),
        ];
        for (p, q) in pairs {
            let mut last = 0.0;
            for k in 1..=4 {
                let tv = product_tv(&p, &q, k).unwrap();
                assert!(tv + 1e-12 >= last, "k={k}: {tv} < {last}");
                last = tv;
            }
            assert!((product_tv(&p, &q, 1).unwrap() - total_variation_vectors(&p, &q).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_against_own_law_is_small() {
        let mut rng = RngStream::new(1, 0);
        let mut xs: Vec<f64> = (0..10_000).map(|_| rng.standard_normal()).collect();
        xs.sort_by(f64::total_cmp);
        assert!(ks_distance(&xs, &ReferenceLaw::StandardNormal).unwrap() <= 0.02);

        let mut es: Vec<f64> = (0..10_000).map(|_| rng.complex_normal().norm_sqr()).collect();
        es.sort_by(f64::total_cmp);
        assert!(ks_distance(&es, &ReferenceLaw::Exponential { rate: 1.0 }).unwrap() <= 0.02);
        assert!(ks_distance(&es, &ReferenceLaw::ComplexChiSquare { dof: 1 }).unwrap() <= 0.02);
    }

    #[test]
    fn ks_constant_samples_are_far() {
        for c in [-1.0, 0.0, 0.3, 2.0] {
            let xs = vec![c; 200];
            assert!(ks_distance(&xs, &ReferenceLaw::StandardNormal).unwrap() >= 0.5);
        }
    }

    #[test]
    fn ks_input_validation() {
        let short = vec![0.0; 50];
        assert!(ks_distance(&short, &ReferenceLaw::StandardNormal).is_err());
        let mut unsorted: Vec<f64> = (0..200).map(|i| i as f64).collect();
        unsorted.swap(3, 100);
        assert!(ks_distance(&unsorted, &ReferenceLaw::StandardNormal).is_err());
        let sorted: Vec<f64> = (0..200).map(|i| i as f64).collect();
        assert!(ks_distance(&sorted, &ReferenceLaw::Normal { mean: 0.0, variance: -1.0 }).is_err());
    }

    #[test]
    fn two_sample_ks() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&xs, &xs).unwrap(), 0.0);
        let ys: Vec<f64> = (0..100).map(|i| i as f64 + 1000.0).collect();
        assert_eq!(ks_two_sample(&xs, &ys).unwrap(), 1.0);
        let half: Vec<f64> = (50..150).map(|i| i as f64).collect();
        assert!((ks_two_sample(&xs, &half).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn log_chisq_closed_forms() {
        let m1 = log_chisq_moments(1).unwrap();
        assert!((m1.mean + 0.577_22).abs() < 1e-5);
        assert!((m1.variance - 1.644_93).abs() < 1e-5);
        let m2 = log_chisq_moments(2).unwrap();
        assert!((m2.mean - 0.422_78).abs() < 1e-5);
        assert!(log_chisq_moments(0).is_err());
    }

    #[test]
    fn log_chisq_moments_match_monte_carlo() {
        let mut rng = RngStream::new(2, 0);
        for n in [1usize, 2, 7] {
            let xs: Vec<f64> = (0..200_000).map(|_| complex_chisq_sample(n, &mut rng).ln()).collect();
            let s = DistributionSummary::from_samples(&xs).unwrap();
            let m = log_chisq_moments(n).unwrap();
            assert!((s.mean - m.mean).abs() < 3.5 * s.mean_se, "n={n} mean");
            assert!((s.variance - m.variance).abs() < 3.5 * s.variance_se, "n={n} var");
        }
    }

    #[test]
    fn quadrature_reproduces_closed_form_variance() {
        // Reuse the quadrature machinery on the second moment through the
        // convexity bound: rho <= mu4^{3/4}.
        for n in [1usize, 2, 5, 10, 100, 1000] {
            let m = log_chisq_moments(n).unwrap();
            let rho = log_chisq_third_abs_moment(n).unwrap();
            assert!(rho > 0.0);
            assert!(rho <= m.fourth_central_moment.powf(0.75) * (1.0 + 1e-9), "n={n}");
            // Lyapunov: rho >= sigma^3.
            assert!(rho >= m.variance.powf(1.5) * (1.0 - 1e-9), "n={n}");
        }
    }

    #[test]
    fn berry_esseen_ratio_decreases() {
        let ratios: Vec<f64> = [10usize, 100, 1000, 10_000].iter().map(|&n| berry_esseen_ratio(n).unwrap()).collect();
        for w in ratios.windows(2) {
            assert!(w[1] < w[0], "{ratios:?}");
        }
    }

    #[test]
    fn lognormal_det_parameters() {
        match lognormal_det_reference(10).unwrap() {
            ReferenceLaw::Lognormal { mu, sigma2 } => {
                assert!((mu - 13.5259).abs() < 1e-4);
                assert!((sigma2 - 3.8798).abs() < 1e-4);
            }
            other => panic!("{other:?}"),
        }
        assert!(lognormal_det_reference(1).is_err());
    }

    #[test]
    fn chisq_product_small_cases() {
        let mut rng = RngStream::new(3, 0);
        let draws = 100_000;
        let ones: Vec<f64> = (0..draws).map(|_| chisq_product_sample(1, &mut rng).unwrap()).collect();
        assert!((mean(&ones) - 1.0).abs() < 0.01);
        let threes: Vec<f64> = (0..draws).map(|_| chisq_product_sample(3, &mut rng).unwrap()).collect();
        let s = DistributionSummary::from_samples(&threes).unwrap();
        assert!((s.mean - 6.0).abs() < 3.0 * s.mean_se);
    }

    #[test]
    fn moment_checks_on_exponential() {
        // n = 1: P is Exponential(1), E[P^2] = 2.
        let mut rng = RngStream::new(4, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| rng.complex_normal().norm_sqr()).collect();
        let c = moment_checks(&xs, 1, MomentTolerances::default()).unwrap();
        assert!(c.mean_ok && c.second_moment_ok);
        assert_eq!(c.expected_second_moment, 2.0);
        assert!(moment_checks(&xs[..100], 1, MomentTolerances::default()).is_err());
    }

    #[test]
    fn deviation_infima() {
        let (c, v) = golden_section_min(exponential_half_mean_deviation, 0.1, 10.0, 1e-10);
        assert!((c - 1.678).abs() < 1e-3, "argmin {c}");
        assert!(v > 0.313 && v < 0.3135, "min {v}");
        let (c2, v2) = golden_section_min(exponential_far_probability, 0.1, 10.0, 1e-10);
        assert!((c2 - 3f64.ln()).abs() < 1e-5);
        assert!((v2 - (1.0 - 2.0 * 3f64.sqrt() / 9.0)).abs() < 1e-12);
        assert!(v2 > 0.615);
        // n = 1 closed form: 1/2 E|P - 1| = 1/e.
        assert!((exponential_half_mean_deviation(1.0) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn exponential_half_deviation_matches_quadrature() {
        // Independent check of the closed form by midpoint quadrature.
        for c in [0.5, 1.0, 1.678, 3.0] {
            let h = 1e-4;
            let q: f64 = (0..400_000).map(|k| {
                let x = (k as f64 + 0.5) * h;
                c * (-c * x).exp() * (x - 1.0).abs() * h
            }).sum();
            assert!((0.5 * q - exponential_half_mean_deviation(c)).abs() < 1e-6, "c={c}");
        }
    }

    #[test]
    fn wilson_and_rank_test() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5 && (hi - lo - 0.19).abs() < 0.01);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
        let xs: Vec<f64> = (0..200).map(|i| i as f64 + 50.0).collect();
        let ys: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let t = mann_whitney(&xs, &ys).unwrap();
        assert!(t.p_value < 0.01);
        let t2 = mann_whitney(&ys, &xs).unwrap();
        assert!(t2.p_value > 0.99);
    }

    #[test]
    fn correlation_of_independent_draws_is_small() {
        let mut rng = RngStream::new(5, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.standard_normal()).collect();
        let ys: Vec<f64> = (0..100_000).map(|_| rng.standard_normal()).collect();
        assert!(pearson_correlation(&xs, &ys).unwrap().abs() < 3.0 / (1e5f64).sqrt());
        assert!((pearson_correlation(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_density_and_monotonicity() {
        let mut rng = RngStream::new(6, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.complex_normal().norm_sqr()).collect();
        let h = Histogram::uniform_bins(&xs, 0.0, 5.0, 100);
        let d = h.densities();
        assert!((d[0] - 1.0).abs() < 0.05);
        assert!(h.monotone_violations(2.0).is_empty());
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_left,bin_right,density\n0,0.05,"));
        assert_eq!(text.lines().count(), 101);

        // A rising density is flagged.
        let ys: Vec<f64> = xs.iter().map(|x| 5.0 - x).collect();
        assert!(!Histogram::uniform_bins(&ys, 0.0, 5.0, 100).monotone_violations(2.0).is_empty());
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-12);
    }
}
