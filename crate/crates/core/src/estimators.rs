//! Statistics evaluated on outcomes and Gaussian matrices.
//!
//! * `P(X) = |Per(X)|^2 / n!` has unit mean for iid Gaussian `X`.
//! * `R*(X) = prod_i R_i / n^n`, with `R_i` the squared row norms, is the
//!   row-norm estimator; it only sees row scales.
//! * `Q(X) = P(X) / R*(X)` only sees row directions.
//!
//! Products over rows are accumulated as sums of logarithms.

use std::io::Write;

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, too_large, Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::outcomes::{Outcome, OutcomeSpace};
use crate::rng::RngStream;
use crate::samplers::{self, ln_factorial, SampleBatch};
use crate::stats;

/// Largest photon number for statistics that need one permanent per sample.
pub const MAX_PERMANENT_PHOTONS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    P,
    RStar,
    Q,
    RStarGeneral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub value: f64,
    pub kind: StatisticKind,
    pub outcome: Option<Outcome>,
}

fn check_square(x: &ComplexMatrix) -> Result<usize> {
    if !x.is_square() {
        return invalid(format!("statistic needs a square matrix, got {}x{}", x.rows(), x.cols()));
    }
    Ok(x.rows())
}

/// `|Per(X)|^2 / n!`
pub fn p_statistic(x: &ComplexMatrix) -> Result<f64> {
    let n = check_square(x)?;
    let per = linalg::permanent_ryser(x)?;
    Ok((per.norm_sqr().ln() - ln_factorial(n)).exp())
}

/// `ln R*(X)`, or `-inf` when some row vanishes.
pub fn ln_r_star(x: &ComplexMatrix) -> Result<f64> {
    let n = check_square(x)?;
    if n == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    Ok(linalg::row_squared_norms(x).iter().map(|r| (r / nf).ln()).sum())
}

/// `R*(X) = prod_i R_i / n^n`.
pub fn r_star(x: &ComplexMatrix) -> Result<f64> {
    Ok(ln_r_star(x)?.exp())
}

/// `Q(X) = P(X) / R*(X)`.
pub fn q_statistic(x: &ComplexMatrix) -> Result<f64> {
    let lr = ln_r_star(x)?;
    if lr == f64::NEG_INFINITY {
        return Err(Error::NumericalDegeneracy("R* is zero, Q is undefined".into()));
    }
    let n = x.rows();
    let per = linalg::permanent_ryser(x)?;
    Ok((per.norm_sqr().ln() - ln_factorial(n) - lr).exp())
}

/// `ln R_S*` for an outcome with possible collisions.
///
/// Rows of `sqrt(m) A` play the role of the Gaussian rows; mode `i` with
/// occupation `s_i` contributes `R_i^{s_i} / (n (n+1) ... (n+s_i-1))`.
pub fn ln_r_star_general(a: &ComplexMatrix, s: &Outcome) -> Result<f64> {
    if s.m() != a.rows() {
        return invalid(format!("outcome has {} modes, matrix has {} rows", s.m(), a.rows()));
    }
    let n = a.cols();
    if n == 0 {
        return invalid("R_S* needs at least one column");
    }
    let m = a.rows() as f64;
    let mut acc = 0.0;
    for (i, &si) in s.occupations().iter().enumerate() {
        if si == 0 {
            continue;
        }
        let r: f64 = m * a.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>();
        acc += (0..si as usize).map(|t| (r / (n + t) as f64).ln()).sum::<f64>();
    }
    Ok(acc)
}

pub fn r_star_general(a: &ComplexMatrix, s: &Outcome) -> Result<f64> {
    Ok(ln_r_star_general(a, s)?.exp())
}

/// `ln R*` of an outcome's scaled submatrix `sqrt(m) A_S`.
pub fn outcome_ln_r_star(a: &ComplexMatrix, s: &Outcome) -> Result<f64> {
    if s.n() != a.cols() {
        return invalid(format!("outcome has {} photons, matrix has {} columns", s.n(), a.cols()));
    }
    ln_r_star_general(a, s)
}

/// Fraction of samples with `R* >= 1`, with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinguisherResult {
    pub accepted: usize,
    pub count: usize,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl DistinguisherResult {
    pub fn from_counts(accepted: usize, count: usize) -> Self {
        let (ci_low, ci_high) = stats::wilson_interval(accepted, count, 1.96);
        Self { accepted, count, fraction: accepted as f64 / count as f64, ci_low, ci_high }
    }

    /// Binomial standard error of the fraction.
    pub fn standard_error(&self) -> f64 {
        (self.fraction * (1.0 - self.fraction) / self.count as f64).sqrt()
    }
}

/// Row-norm distinguisher: accept a sample when `R*(sqrt(m) A_S) >= 1`.
pub fn rownorm_distinguisher(a: &ComplexMatrix, batch: &SampleBatch) -> Result<DistinguisherResult> {
    if batch.is_empty() {
        return invalid("row-norm distinguisher needs a nonempty batch");
    }
    let mut accepted = 0;
    for s in &batch.outcomes {
        if outcome_ln_r_star(a, s)? >= 0.0 {
            accepted += 1;
        }
    }
    Ok(DistinguisherResult::from_counts(accepted, batch.len()))
}

/// Outcome of the permanent-product verifier on a batch of `k` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifierDecision {
    pub accept: bool,
    pub log_sum: f64,
    pub threshold: f64,
    pub k: usize,
}

/// Accepts iff `prod_i |Per(A_{S_i})|^2 >= (n! / m^n)^k`, compared in log space.
/// Ties accept.
pub fn permanent_verifier(a: &ComplexMatrix, batch: &SampleBatch) -> Result<VerifierDecision> {
    let (m, n) = (a.rows(), a.cols());
    if n > MAX_PERMANENT_PHOTONS {
        return too_large(format!("verifier needs one permanent per sample; n={n} exceeds {MAX_PERMANENT_PHOTONS}"));
    }
    let mut log_sum = 0.0;
    for s in &batch.outcomes {
        let sub = linalg::submatrix_for_outcome(a, s)?;
        log_sum += linalg::permanent_ryser(&sub)?.norm_sqr().ln();
    }
    let k = batch.len();
    let threshold = k as f64 * (ln_factorial(n) - n as f64 * (m as f64).ln());
    Ok(VerifierDecision { accept: log_sum >= threshold, log_sum, threshold, k })
}

/// Per-sample statistics that separate the mockups from each other and from
/// the uniform distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockupStatistics {
    pub rank: u64,
    /// `Per(A_S^#)`
    pub permanent_abs: f64,
    /// `|Det(A_S)|^2`
    pub determinant_sq: f64,
    /// `Pr_{B_A}[S]`
    pub rownorm_probability: f64,
}

pub fn mockup_statistics(a: &ComplexMatrix, batch: &SampleBatch) -> Result<Vec<MockupStatistics>> {
    let (m, n) = (a.rows(), a.cols());
    if n > MAX_PERMANENT_PHOTONS {
        return too_large(format!("mockup statistics need permanents; n={n} exceeds {MAX_PERMANENT_PHOTONS}"));
    }
    let space = OutcomeSpace::full(m, n);
    batch
        .outcomes
        .iter()
        .map(|s| {
            let sub = linalg::submatrix_for_outcome(a, s)?;
            Ok(MockupStatistics {
                rank: space.rank(s)?,
                permanent_abs: linalg::permanent_ryser(&sub.abs_squared())?.re,
                determinant_sq: if s.is_collision_free() { linalg::determinant(&sub)?.norm_sqr() } else { 0.0 },
                rownorm_probability: samplers::mockup_rownorm_probability(a, s)?,
            })
        })
        .collect()
}

/// Long-format CSV: `rank,statistic,value`.
pub fn write_mockup_statistics_csv<W: Write>(rows: &[MockupStatistics], mut w: W) -> Result<()> {
    writeln!(w, "rank,statistic,value")?;
    for r in rows {
        writeln!(w, "{},permanent_abs,{}", r.rank, r.permanent_abs)?;
        writeln!(w, "{},determinant_sq,{}", r.rank, r.determinant_sq)?;
        writeln!(w, "{},rownorm_probability,{}", r.rank, r.rownorm_probability)?;
    }
    Ok(())
}

/// Draw from the row-norm marginal of the `|Per|^2`-tilted Gaussian law.
///
/// Under `f_N(X) P(X)` the squared row norms are iid `Gamma(n+1, 1)` and the
/// row directions are independent of them, so a matrix whose rows are
/// uniform directions scaled to `Gamma(n+1)` squared norms has exactly the
/// tilted law of `R*`. Row directions here are untilted; use this only for
/// statistics that depend on row norms alone.
pub fn sample_tilted_rownorm_matrix(n: usize, rng: &mut RngStream) -> Result<ComplexMatrix> {
    let mut x = linalg::sample_gaussian_matrix(n, n, rng)?;
    let gamma = Gamma::new(n as f64 + 1.0, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for i in 0..n {
        let norm_sq: f64 = x.row(i).iter().map(|z| z.norm_sqr()).sum();
        let target: f64 = gamma.sample(rng);
        let scale = (target / norm_sq).sqrt();
        x.scale_row(i, num_complex::Complex64::new(scale, 0.0));
    }
    Ok(x)
}
