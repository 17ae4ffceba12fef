//! Exact samplers for the boson, fermion, uniform, and classical mockup
//! distributions, plus the lossy-input boson sampler.
//!
//! Boson sampling is exact in two ways. [`exact_boson_table`] enumerates the
//! whole outcome space and samples by inverse CDF. [`BosonRejectionSampler`]
//! draws proposals from the classical mockup `M_A` and accepts with
//! probability `|Per(A_S)|^2 / (n! Per(A_S^#))`, which is at most one by
//! Cauchy-Schwarz over the `n!` permutation terms; the expected number of
//! proposals per sample is `n!`, so it reaches spaces far too large to
//! enumerate when `n` is small.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, too_large, Error, Result};
use crate::linalg::{self, ComplexMatrix, ORTHONORMAL_TOL};
use crate::outcomes::{self, Outcome, OutcomeSpace, SpaceKind};
use crate::rng::RngStream;

/// Largest photon number for table-based boson sampling.
pub const MAX_TABLE_PHOTONS: usize = 9;
/// Largest photon number for the rejection sampler (about `n!` proposals per draw).
pub const MAX_REJECTION_PHOTONS: usize = 8;
/// Column-norm tolerance for the mockup samplers.
pub const COLUMN_NORM_TOL: f64 = 1e-8;
/// Per-round normalization tolerance in the fermion sampler.
pub const FERMION_ROUND_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    BosonExact,
    Fermion,
    MockupClassical,
    MockupRownorm,
    Uniform,
    LossyBoson,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 6] = [
        SamplerKind::BosonExact,
        SamplerKind::Fermion,
        SamplerKind::MockupClassical,
        SamplerKind::MockupRownorm,
        SamplerKind::Uniform,
        SamplerKind::LossyBoson,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SamplerKind::BosonExact => "boson-exact",
            SamplerKind::Fermion => "fermion",
            SamplerKind::MockupClassical => "mockup-classical",
            SamplerKind::MockupRownorm => "mockup-rownorm",
            SamplerKind::Uniform => "uniform",
            SamplerKind::LossyBoson => "lossy-boson",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == tag)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sampler kind `{tag}`")))
    }
}

/// Exact distribution over an enumerated outcome space, indexed by rank.
///
/// Tables over the collision-free space may hold a sub-distribution (the
/// restriction of a distribution on the full space); `total_mass` records
/// it and sampling draws from the renormalized table.
#[derive(Debug, Clone)]
pub struct ProbabilityTable {
    space: OutcomeSpace,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    total_mass: f64,
    kind: Option<SamplerKind>,
    matrix_hash: Option<String>,
}

impl ProbabilityTable {
    pub fn new(space: OutcomeSpace, probs: Vec<f64>) -> Result<Self> {
        let size = space.size()?;
        if probs.len() as u64 != size {
            return invalid(format!("table has {} entries, space has {size}", probs.len()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return invalid(format!("table entry {p} is not a nonnegative finite number"));
        }
        let total_mass: f64 = probs.iter().sum();
        if total_mass <= 0.0 {
            return invalid("table has zero total mass");
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut run = 0.0;
        for p in &probs {
            run += p;
            cumulative.push(run / total_mass);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(Self { space, probs, cumulative, total_mass, kind: None, matrix_hash: None })
    }

    pub fn uniform(space: OutcomeSpace) -> Result<Self> {
        let size = space.size()?;
        if size > outcomes::MAX_ENUMERATION {
            return too_large(format!("uniform table over {size} outcomes"));
        }
        let mut t = Self::new(space, vec![1.0 / size as f64; size as usize])?;
        t.kind = Some(SamplerKind::Uniform);
        Ok(t)
    }

    pub fn with_source(mut self, kind: SamplerKind, matrix_hash: Option<String>) -> Self {
        self.kind = Some(kind);
        self.matrix_hash = matrix_hash;
        self
    }

    pub fn space(&self) -> OutcomeSpace {
        self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn kind(&self) -> Option<SamplerKind> {
        self.kind
    }

    pub fn prob(&self, s: &Outcome) -> Result<f64> {
        Ok(self.probs[self.space.rank(s)? as usize])
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.total_mass - 1.0).abs() <= tol
    }

    /// The same table scaled to unit mass.
    pub fn renormalized(&self) -> Self {
        let probs = self.probs.iter().map(|p| p / self.total_mass).collect();
        let mut t = Self::new(self.space, probs).expect("scaled table stays valid");
        t.kind = self.kind;
        t.matrix_hash = self.matrix_hash.clone();
        t
    }

    /// The restriction to collision-free outcomes, unnormalized.
    pub fn restrict_collision_free(&self) -> Result<Self> {
        let target = OutcomeSpace::collision_free(self.space.m, self.space.n);
        if self.space.kind == SpaceKind::CollisionFree {
            return Ok(self.clone());
        }
        let probs = outcomes::enumerate(&target)?
            .iter()
            .map(|s| self.prob(s))
            .collect::<Result<Vec<_>>>()?;
        let mut t = Self::new(target, probs)?;
        t.kind = self.kind;
        t.matrix_hash = self.matrix_hash.clone();
        Ok(t)
    }

    pub fn sample_index(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform();
        self.cumulative.partition_point(|&c| c <= u).min(self.probs.len() - 1)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<Outcome> {
        self.space.unrank(self.sample_index(rng) as u64)
    }
}

/// Anything that produces outcomes from a random stream.
pub trait OutcomeSampler {
    fn kind(&self) -> SamplerKind;
    fn m(&self) -> usize;
    fn n(&self) -> usize;
    fn sample(&mut self, rng: &mut RngStream) -> Result<Outcome>;
}

impl OutcomeSampler for ProbabilityTable {
    fn kind(&self) -> SamplerKind {
        self.kind.unwrap_or(SamplerKind::BosonExact)
    }

    fn m(&self) -> usize {
        self.space.m
    }

    fn n(&self) -> usize {
        self.space.n
    }

    fn sample(&mut self, rng: &mut RngStream) -> Result<Outcome> {
        ProbabilityTable::sample(self, rng)
    }
}

/// A seeded collection of outcomes with enough provenance to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub kind: SamplerKind,
    pub seed: u64,
    pub stream_id: u64,
    pub matrix_hash: Option<String>,
    pub m: usize,
    pub n: usize,
    pub outcomes: Vec<Outcome>,
}

#[derive(Serialize, Deserialize)]
struct BatchHeader {
    kind: SamplerKind,
    seed: u64,
    stream_id: u64,
    matrix_hash: Option<String>,
    m: usize,
    n: usize,
    count: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// JSON lines: one header record, then one integer array per outcome.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = BatchHeader {
            kind: self.kind,
            seed: self.seed,
            stream_id: self.stream_id,
            matrix_hash: self.matrix_hash.clone(),
            m: self.m,
            n: self.n,
            count: self.outcomes.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for s in &self.outcomes {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header: BatchHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return invalid("empty batch file"),
        };
        let mut outcomes = Vec::with_capacity(header.count);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s: Outcome = serde_json::from_str(&line)?;
            if s.m() != header.m {
                return invalid(format!("outcome {s} does not have m={}", header.m));
            }
            outcomes.push(s);
        }
        if outcomes.len() != header.count {
            return invalid(format!("header declares {} outcomes, found {}", header.count, outcomes.len()));
        }
        Ok(Self {
            kind: header.kind,
            seed: header.seed,
            stream_id: header.stream_id,
            matrix_hash: header.matrix_hash,
            m: header.m,
            n: header.n,
            outcomes,
        })
    }
}

/// Draws `k` outcomes from `sampler`, stamping the stream's provenance.
pub fn sample_batch<S: OutcomeSampler + ?Sized>(
    sampler: &mut S,
    k: usize,
    rng: &mut RngStream,
    matrix_hash: Option<String>,
) -> Result<SampleBatch> {
    let (seed, stream_id) = (rng.seed(), rng.stream_id());
    let outcomes = (0..k).map(|_| sampler.sample(rng)).collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch { kind: sampler.kind(), seed, stream_id, matrix_hash, m: sampler.m(), n: sampler.n(), outcomes })
}

/// `k` iid inverse-CDF draws from `table`.
pub fn sample_from_table(table: &ProbabilityTable, k: usize, rng: &mut RngStream) -> Result<SampleBatch> {
    let mut t = table.clone();
    let hash = table.matrix_hash.clone();
    sample_batch(&mut t, k, rng, hash)
}

fn check_boson_inputs(a: &ComplexMatrix, space: &OutcomeSpace) -> Result<()> {
    if space.m != a.rows() || space.n != a.cols() {
        return invalid(format!(
            "space (m={}, n={}) does not match a {}x{} matrix",
            space.m,
            space.n,
            a.rows(),
            a.cols()
        ));
    }
    if space.n > MAX_TABLE_PHOTONS {
        return too_large(format!("exact tables are limited to n <= {MAX_TABLE_PHOTONS}, got {}", space.n));
    }
    let size = space.size()?;
    if size > outcomes::MAX_ENUMERATION {
        return too_large(format!("outcome space has {size} outcomes, above the {} guard", outcomes::MAX_ENUMERATION));
    }
    a.validate_column_orthonormal(ORTHONORMAL_TOL)
}

/// `|Per(A_S)|^2 / (s_1! ... s_m!)`.
pub fn boson_probability(a: &ComplexMatrix, s: &Outcome) -> Result<f64> {
    let sub = linalg::submatrix_for_outcome(a, s)?;
    Ok(linalg::permanent_ryser(&sub)?.norm_sqr() / s.multiplicity_factorial() as f64)
}

/// `|Det(A_S)|^2`, zero for outcomes with collisions.
pub fn fermion_probability(a: &ComplexMatrix, s: &Outcome) -> Result<f64> {
    if !s.is_collision_free() {
        return Ok(0.0);
    }
    let sub = linalg::submatrix_for_outcome(a, s)?;
    Ok(linalg::determinant(&sub)?.norm_sqr())
}

/// `Per(A_S^#) / (s_1! ... s_m!)` with `A^#_ij = |a_ij|^2`.
pub fn mockup_classical_probability(a: &ComplexMatrix, s: &Outcome) -> Result<f64> {
    let sub = linalg::submatrix_for_outcome(a, s)?.abs_squared();
    Ok(linalg::permanent_ryser(&sub)?.re / s.multiplicity_factorial() as f64)
}

/// Multinomial law of `n` iid rows drawn with `Pr[h] = ||a_h||^2 / n`.
pub fn mockup_rownorm_probability(a: &ComplexMatrix, s: &Outcome) -> Result<f64> {
    if s.m() != a.rows() {
        return invalid("outcome and matrix disagree on m");
    }
    let n = a.cols();
    if s.n() != n {
        return invalid(format!("outcome has {} photons, matrix has {n} columns", s.n()));
    }
    let norms = linalg::row_squared_norms(a);
    let mut log_p = ln_factorial(n);
    for (&si, r) in s.occupations().iter().zip(&norms) {
        if si > 0 {
            if *r == 0.0 {
                return Ok(0.0);
            }
            log_p += si as f64 * (r / n as f64).ln() - ln_factorial(si as usize);
        }
    }
    Ok(log_p.exp())
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn fill_table(
    space: OutcomeSpace,
    prob: impl Fn(&Outcome) -> Result<f64> + Sync,
) -> Result<ProbabilityTable> {
    let all = outcomes::enumerate(&space)?;
    let probs = all.par_iter().map(&prob).collect::<Result<Vec<_>>>()?;
    ProbabilityTable::new(space, probs)
}

/// Exact boson table `Pr[S] = |Per(A_S)|^2 / prod s_i!` over `space`.
///
/// Over the full space the table sums to one; over the collision-free space
/// it holds the unnormalized restriction with its mass in `total_mass`.
pub fn exact_boson_table(a: &ComplexMatrix, space: &OutcomeSpace) -> Result<ProbabilityTable> {
    check_boson_inputs(a, space)?;
    Ok(fill_table(*space, |s| boson_probability(a, s))?
        .with_source(SamplerKind::BosonExact, Some(a.content_hash())))
}

/// Exact fermion table `|Det(A_S)|^2` over the collision-free space.
pub fn exact_fermion_table(a: &ComplexMatrix) -> Result<ProbabilityTable> {
    let space = OutcomeSpace::collision_free(a.rows(), a.cols());
    check_boson_inputs(a, &space)?;
    Ok(fill_table(space, |s| fermion_probability(a, s))?
        .with_source(SamplerKind::Fermion, Some(a.content_hash())))
}

/// Exact classical mockup table over the full space.
pub fn exact_mockup_classical_table(a: &ComplexMatrix) -> Result<ProbabilityTable> {
    let space = OutcomeSpace::full(a.rows(), a.cols());
    check_boson_inputs(a, &space)?;
    Ok(fill_table(space, |s| mockup_classical_probability(a, s))?
        .with_source(SamplerKind::MockupClassical, Some(a.content_hash())))
}

/// Exact row-norm mockup table over the full space.
pub fn exact_mockup_rownorm_table(a: &ComplexMatrix) -> Result<ProbabilityTable> {
    let space = OutcomeSpace::full(a.rows(), a.cols());
    check_boson_inputs(a, &space)?;
    Ok(fill_table(space, |s| mockup_rownorm_probability(a, s))?
        .with_source(SamplerKind::MockupRownorm, Some(a.content_hash())))
}

// Index into a cumulative distribution; `total` need not be exactly one.
fn draw_from_cumulative(cdf: &[f64], rng: &mut RngStream) -> usize {
    let total = *cdf.last().expect("nonempty distribution");
    let u = rng.uniform() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut run = 0.0;
    weights
        .map(|w| {
            run += w;
            run
        })
        .collect()
}

fn check_unit_columns(a: &ComplexMatrix) -> Result<()> {
    for j in 0..a.cols() {
        let norm: f64 = a.column(j).iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > COLUMN_NORM_TOL {
            return invalid(format!("column {j} has squared norm {norm}, expected 1"));
        }
    }
    Ok(())
}

/// Fermion sampler: `n` rounds of row projection, `O(m n^2)` per draw.
///
/// Round `t` picks row `h` with probability `||v_h||^2 / (n - t)` and projects
/// every row vector onto the orthogonal complement of `v_h`.
pub fn sample_fermion(a: &ComplexMatrix, rng: &mut RngStream) -> Result<Outcome> {
    let (m, n) = (a.rows(), a.cols());
    if n == 0 || m < n {
        return invalid(format!("fermion sampling needs m >= n >= 1, got m={m}, n={n}"));
    }
    let mut v: Vec<Vec<Complex64>> = (0..m).map(|i| a.row(i).to_vec()).collect();
    let original: Vec<f64> = v.iter().map(|r| norm_sqr(r)).collect();
    let mut chosen_dirs: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut modes = Vec::with_capacity(n);
    let mut weights = vec![0.0; m];
    for t in 0..n {
        let remaining = (n - t) as f64;
        for (w, row) in weights.iter_mut().zip(&v) {
            *w = norm_sqr(row) / remaining;
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > FERMION_ROUND_TOL {
            return Err(Error::NumericalDegeneracy(format!(
                "round {} probabilities sum to {total}; is A column-orthonormal?",
                t + 1
            )));
        }
        let h = draw_from_cumulative(&cumulative(weights.iter().copied()), rng);
        modes.push(h);
        let pivot = std::mem::take(&mut v[h]);
        let pivot_norm = norm_sqr(&pivot);
        v[h] = vec![Complex64::new(0.0, 0.0); n];
        for (i, row) in v.iter_mut().enumerate() {
            if i == h {
                continue;
            }
            project_out(row, &pivot, pivot_norm);
            // Rows that lost almost all of their norm carry mostly rounding
            // error; project them against every earlier direction again.
            if norm_sqr(row) < 1e-12 * original[i] {
                for d in &chosen_dirs {
                    project_out(row, d, norm_sqr(d));
                }
                project_out(row, &pivot, pivot_norm);
            }
        }
        chosen_dirs.push(pivot);
    }
    Ok(Outcome::from_modes(m, &modes))
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn project_out(row: &mut [Complex64], dir: &[Complex64], dir_norm: f64) {
    if dir_norm == 0.0 {
        return;
    }
    let dot: Complex64 = dir.iter().zip(row.iter()).map(|(d, r)| d.conj() * r).sum();
    let c = dot / dir_norm;
    for (r, d) in row.iter_mut().zip(dir) {
        *r -= c * d;
    }
}

#[derive(Debug, Clone)]
pub struct FermionSampler {
    a: ComplexMatrix,
}

impl FermionSampler {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        if a.cols() == 0 || a.rows() < a.cols() {
            return invalid("fermion sampling needs m >= n >= 1");
        }
        Ok(Self { a: a.clone() })
    }
}

impl OutcomeSampler for FermionSampler {
    fn kind(&self) -> SamplerKind {
        SamplerKind::Fermion
    }

    fn m(&self) -> usize {
        self.a.rows()
    }

    fn n(&self) -> usize {
        self.a.cols()
    }

    fn sample(&mut self, rng: &mut RngStream) -> Result<Outcome> {
        sample_fermion(&self.a, rng)
    }
}

/// Distinguishable-particle mockup `M_A`: photon `j` lands in mode `h` with
/// probability `|a_hj|^2`, independently across photons.
#[derive(Debug, Clone)]
pub struct ClassicalMockupSampler {
    m: usize,
    column_cdfs: Vec<Vec<f64>>,
}

impl ClassicalMockupSampler {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        check_unit_columns(a)?;
        let column_cdfs = (0..a.cols())
            .map(|j| cumulative((0..a.rows()).map(|i| a[(i, j)].norm_sqr())))
            .collect();
        Ok(Self { m: a.rows(), column_cdfs })
    }

    /// The mode chosen for each photon, in column order.
    pub fn sample_modes(&self, rng: &mut RngStream) -> Vec<usize> {
        self.column_cdfs.iter().map(|cdf| draw_from_cumulative(cdf, rng)).collect()
    }
}

impl OutcomeSampler for ClassicalMockupSampler {
    fn kind(&self) -> SamplerKind {
        SamplerKind::MockupClassical
    }

    fn m(&self) -> usize {
        self.m
    }

    fn n(&self) -> usize {
        self.column_cdfs.len()
    }

    fn sample(&mut self, rng: &mut RngStream) -> Result<Outcome> {
        Ok(Outcome::from_modes(self.m, &self.sample_modes(rng)))
    }
}

pub fn sample_mockup_classical(a: &ComplexMatrix, rng: &mut RngStream) -> Result<Outcome> {
    ClassicalMockupSampler::new(a)?.sample(rng)
}

/// Row-norm mockup `B_A`: `n` iid rows with `Pr[h] = ||a_h||^2 / n`.
#[derive(Debug, Clone)]
pub struct RowNormMockupSampler {
    n: usize,
    cdf: Vec<f64>,
}

impl RowNormMockupSampler {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        check_unit_columns(a)?;
        let n = a.cols();
        let cdf = cumulative(linalg::row_squared_norms(a).into_iter().map(|r| r / n as f64));
        Ok(Self { n, cdf })
    }
}

impl OutcomeSampler for RowNormMockupSampler {
    fn kind(&self) -> SamplerKind {
        SamplerKind::MockupRownorm
    }

    fn m(&self) -> usize {
        self.cdf.len()
    }

    fn n(&self) -> usize {
        self.n
    }

    fn sample(&mut self, rng: &mut RngStream) -> Result<Outcome> {
        let modes: Vec<usize> = (0..self.n).map(|_| draw_from_cumulative(&self.cdf, rng)).collect();
        Ok(Outcome::from_modes(self.cdf.len(), &modes))
    }
}

pub fn sample_mockup_rownorm(a: &ComplexMatrix, rng: &mut RngStream) -> Result<Outcome> {
    RowNormMockupSampler::new(a)?.sample(rng)
}

/// Uniform over `space`, by unranking a uniform index.
pub fn sample_uniform(space: &OutcomeSpace, rng: &mut RngStream) -> Result<Outcome> {
    let size = space.size()?;
    space.unrank(rng.below(size))
}

#[derive(Debug, Clone)]
pub struct UniformSampler {
    space: OutcomeSpace,
    size: u64,
}

impl UniformSampler {
    pub fn new(space: OutcomeSpace) -> Result<Self> {
        Ok(Self { space, size: space.size()? })
    }
}

impl OutcomeSampler for UniformSampler {
    fn kind(&self) -> SamplerKind {
        SamplerKind::Uniform
    }

    fn m(&self) -> usize {
        self.space.m
    }

    fn n(&self) -> usize {
        self.space.n
    }

    fn sample(&mut self, rng: &mut RngStream) -> Result<Outcome> {
        self.space.unrank(rng.below(self.size))
    }
}

/// Exact boson sampler by rejection from the classical mockup.
#[derive(Debug, Clone)]
pub struct BosonRejectionSampler {
    a: ComplexMatrix,
    proposal: ClassicalMockupSampler,
    n_factorial: f64,
    proposals: u64,
}

impl BosonRejectionSampler {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        let n = a.cols();
        if n == 0 {
            return invalid("boson sampling needs at least one photon");
        }
        if n > MAX_REJECTION_PHOTONS {
            return too_large(format!(
                "rejection sampling needs about n! proposals per draw; n={n} exceeds {MAX_REJECTION_PHOTONS}"
            ));
        }
        a.validate_column_orthonormal(ORTHONORMAL_TOL)?;
        Ok(Self {
            a: a.clone(),
            proposal: ClassicalMockupSampler::new(a)?,
            n_factorial: ln_factorial(n).exp().round(),
            proposals: 0,
        })
    }

    /// Proposals drawn so far (for acceptance-rate diagnostics).
    pub fn proposals(&self) -> u64 {
        self.proposals
    }
}

impl OutcomeSampler for BosonRejectionSampler {
    fn kind(&self) -> SamplerKind {
        SamplerKind::BosonExact
    }

    fn m(&self) -> usize {
        self.a.rows()
    }

    fn n(&self) -> usize {
        self.a.cols()
    }

    fn sample(&mut self, rng: &mut RngStream) -> Result<Outcome> {
        let n = self.a.cols();
        let mut sub = ComplexMatrix::zeros(n, n);
        loop {
            self.proposals += 1;
            let mut modes = self.proposal.sample_modes(rng);
            modes.sort_unstable();
            for (r, &h) in modes.iter().enumerate() {
                sub.row_mut(r).copy_from_slice(self.a.row(h));
            }
            let per = linalg::ryser_unchecked(&sub).norm_sqr();
            let per_abs = linalg::ryser_unchecked(&sub.abs_squared()).re;
            if rng.uniform() * self.n_factorial * per_abs < per {
                return Ok(Outcome::from_modes(self.a.rows(), &modes));
            }
        }
    }
}

/// How exact boson samples are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BosonMethod {
    /// Full-space table when it has at most [`AUTO_TABLE_LIMIT`] outcomes, else rejection.
    Auto,
    Table,
    Rejection,
}

pub const AUTO_TABLE_LIMIT: u64 = 200_000;

/// Builds an exact boson sampler over the full outcome space.
pub fn boson_sampler(a: &ComplexMatrix, method: BosonMethod) -> Result<Box<dyn OutcomeSampler + Send>> {
    let space = OutcomeSpace::full(a.rows(), a.cols());
    let use_table = match method {
        BosonMethod::Table => true,
        BosonMethod::Rejection => false,
        BosonMethod::Auto => space.size()? <= AUTO_TABLE_LIMIT && a.cols() <= MAX_TABLE_PHOTONS,
    };
    if use_table {
        Ok(Box::new(exact_boson_table(a, &space)?))
    } else {
        Ok(Box::new(BosonRejectionSampler::new(a)?))
    }
}

/// Boson sampling with iid loss of each input photon before the interferometer.
///
/// Tables for each surviving column subset are built on first use.
#[derive(Debug, Clone)]
pub struct LossyBosonSampler {
    a: ComplexMatrix,
    loss_prob: f64,
    tables: BTreeMap<u64, ProbabilityTable>,
    last_retained: usize,
}

impl LossyBosonSampler {
    pub fn new(a: &ComplexMatrix, loss_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&loss_prob) {
            return invalid(format!("loss probability {loss_prob} outside [0, 1]"));
        }
        let full = OutcomeSpace::full(a.rows(), a.cols());
        check_boson_inputs(a, &full)?;
        Ok(Self { a: a.clone(), loss_prob, tables: BTreeMap::new(), last_retained: 0 })
    }

    /// Photons that survived in the most recent draw.
    pub fn last_retained(&self) -> usize {
        self.last_retained
    }
}

impl OutcomeSampler for LossyBosonSampler {
    fn kind(&self) -> SamplerKind {
        SamplerKind::LossyBoson
    }

    fn m(&self) -> usize {
        self.a.rows()
    }

    fn n(&self) -> usize {
        self.a.cols()
    }

    fn sample(&mut self, rng: &mut RngStream) -> Result<Outcome> {
        let kept: Vec<usize> = (0..self.a.cols()).filter(|_| !rng.bernoulli(self.loss_prob)).collect();
        self.last_retained = kept.len();
        if kept.is_empty() {
            return Ok(Outcome::empty(self.a.rows()));
        }
        let mask = kept.iter().fold(0u64, |acc, &j| acc | 1 << j);
        if !self.tables.contains_key(&mask) {
            let sub = self.a.select_columns(&kept);
            let table = exact_boson_table(&sub, &OutcomeSpace::full(sub.rows(), sub.cols()))?;
            self.tables.insert(mask, table);
        }
        self.tables[&mask].sample(rng)
    }
}

pub fn sample_lossy_boson(a: &ComplexMatrix, loss_prob: f64, rng: &mut RngStream) -> Result<Outcome> {
    LossyBosonSampler::new(a, loss_prob)?.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_column_orthonormal;
    use std::collections::HashMap;

    fn empirical_tv(table: &ProbabilityTable, batch: &SampleBatch) -> f64 {
        let space = table.space();
        let mut counts = vec![0usize; table.probs().len()];
        for s in &batch.outcomes {
            counts[space.rank(s).unwrap() as usize] += 1;
        }
        let k = batch.len() as f64;
        let mass = table.total_mass();
        0.5 * counts
            .iter()
            .zip(table.probs())
            .map(|(&c, &p)| (c as f64 / k - p / mass).abs())
            .sum::<f64>()
    }

    // Independent oracle for M_A: convolve the per-photon column distributions.
    fn mockup_by_convolution(a: &ComplexMatrix) -> HashMap<Outcome, f64> {
        let m = a.rows();
        let mut dist: HashMap<Vec<u32>, f64> = HashMap::from([(vec![0u32; m], 1.0)]);
        for j in 0..a.cols() {
            let mut next = HashMap::new();
            for (occ, p) in &dist {
                for h in 0..m {
                    let mut o = occ.clone();
                    o[h] += 1;
                    *next.entry(o).or_insert(0.0) += p * a[(h, j)].norm_sqr();
                }
            }
            dist = next;
        }
        dist.into_iter().map(|(k, v)| (Outcome::new(k), v)).collect()
    }

    // Independent oracle for B_A: n-fold convolution of the row distribution.
    fn rownorm_by_convolution(a: &ComplexMatrix) -> HashMap<Outcome, f64> {
        let m = a.rows();
        let n = a.cols();
        let q: Vec<f64> = linalg::row_squared_norms(a).iter().map(|r| r / n as f64).collect();
        let mut dist: HashMap<Vec<u32>, f64> = HashMap::from([(vec![0u32; m], 1.0)]);
        for _ in 0..n {
            let mut next = HashMap::new();
            for (occ, p) in &dist {
                for (h, qh) in q.iter().enumerate() {
                    let mut o = occ.clone();
                    o[h] += 1;
                    *next.entry(o).or_insert(0.0) += p * qh;
                }
            }
            dist = next;
        }
        dist.into_iter().map(|(k, v)| (Outcome::new(k), v)).collect()
    }

    #[test]
    fn identity_boson_table_is_point_mass() {
        let a = ComplexMatrix::identity(4);
        let t = exact_boson_table(&a, &OutcomeSpace::full(4, 4)).unwrap();
        assert!((t.prob(&Outcome::new(vec![1, 1, 1, 1])).unwrap() - 1.0).abs() < 1e-15);
        assert!((t.total_mass() - 1.0).abs() < 1e-15);
        let mut rng = RngStream::new(1, 0);
        let batch = sample_from_table(&t, 50, &mut rng).unwrap();
        assert!(batch.outcomes.iter().all(|s| s.occupations() == [1, 1, 1, 1]));
    }

    #[test]
    fn single_photon_table_is_column_moduli() {
        let mut rng = RngStream::new(2, 0);
        let u = haar_column_orthonormal(2, 2, &mut rng).unwrap();
        let a = u.select_columns(&[0]);
        let t = exact_boson_table(&a, &OutcomeSpace::full(2, 1)).unwrap();
        assert!((t.probs()[0] - a[(0, 0)].norm_sqr()).abs() < 1e-14);
        assert!((t.probs()[1] - a[(1, 0)].norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn boson_tables_are_normalized() {
        let mut rng = RngStream::new(3, 0);
        for &(m, n) in &[(6, 2), (8, 2), (10, 3), (12, 3)] {
            for _ in 0..50 {
                let a = haar_column_orthonormal(m, n, &mut rng).unwrap();
                let t = exact_boson_table(&a, &OutcomeSpace::full(m, n)).unwrap();
                assert!(t.is_normalized(1e-9), "m={m} n={n} mass={}", t.total_mass());
            }
        }
    }

    #[test]
    fn collision_free_table_keeps_sub_mass() {
        let mut rng = RngStream::new(4, 0);
        let a = haar_column_orthonormal(8, 3, &mut rng).unwrap();
        let full = exact_boson_table(&a, &OutcomeSpace::full(8, 3)).unwrap();
        let free = exact_boson_table(&a, &OutcomeSpace::collision_free(8, 3)).unwrap();
        assert!(free.total_mass() < 1.0);
        let restricted = full.restrict_collision_free().unwrap();
        assert!((restricted.total_mass() - free.total_mass()).abs() < 1e-12);
        assert!(free.renormalized().is_normalized(1e-12));
    }

    #[test]
    fn table_input_validation() {
        let bad = ComplexMatrix::from_real(2, 1, &[1.0, 1.0]).unwrap();
        assert!(matches!(
            exact_boson_table(&bad, &OutcomeSpace::full(2, 1)),
            Err(Error::InvalidArgument(_))
        ));
        let mut rng = RngStream::new(5, 0);
        let a = haar_column_orthonormal(12, 10, &mut rng).unwrap();
        assert!(matches!(
            exact_boson_table(&a, &OutcomeSpace::full(12, 10)),
            Err(Error::ResourceLimit(_))
        ));
        assert!(ProbabilityTable::new(OutcomeSpace::full(2, 1), vec![0.5]).is_err());
        assert!(ProbabilityTable::new(OutcomeSpace::full(2, 1), vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn uniform_table_sampling_concentrates() {
        let t = ProbabilityTable::uniform(OutcomeSpace::collision_free(4, 2)).unwrap();
        let mut rng = RngStream::new(6, 0);
        let k = 600_000;
        let batch = sample_from_table(&t, k, &mut rng).unwrap();
        let mut counts = vec![0usize; 6];
        for s in &batch.outcomes {
            counts[t.space().rank(s).unwrap() as usize] += 1;
        }
        let sd = (k as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for c in counts {
            assert!((c as f64 - k as f64 / 6.0).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn boson_table_sampling_matches_table() {
        let mut rng = RngStream::new(7, 0);
        let a = haar_column_orthonormal(8, 2, &mut rng).unwrap();
        let t = exact_boson_table(&a, &OutcomeSpace::full(8, 2)).unwrap();
        let batch = sample_from_table(&t, 100_000, &mut rng).unwrap();
        assert!(empirical_tv(&t, &batch) <= 0.02);
        assert_eq!(batch.kind, SamplerKind::BosonExact);
        assert_eq!(batch.matrix_hash.as_deref(), Some(a.content_hash().as_str()));
    }

    #[test]
    fn fermion_unitary_gives_full_occupation() {
        let mut rng = RngStream::new(8, 0);
        let u = haar_column_orthonormal(5, 5, &mut rng).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_fermion(&u, &mut rng).unwrap().occupations(), [1, 1, 1, 1, 1]);
        }
    }

    #[test]
    fn fermion_never_collides_and_matches_determinants() {
        let mut rng = RngStream::new(9, 0);
        let a = haar_column_orthonormal(6, 3, &mut rng).unwrap();
        let table = exact_fermion_table(&a).unwrap();
        assert!(table.is_normalized(1e-9));
        let mut sampler = FermionSampler::new(&a).unwrap();
        let batch = sample_batch(&mut sampler, 100_000, &mut rng, None).unwrap();
        assert!(batch.outcomes.iter().all(Outcome::is_collision_free));
        assert!(empirical_tv(&table, &batch) <= 0.02);
    }

    #[test]
    fn fermion_rejects_non_orthonormal_input() {
        let a = ComplexMatrix::from_real(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut rng = RngStream::new(10, 0);
        assert!(matches!(sample_fermion(&a, &mut rng), Err(Error::NumericalDegeneracy(_))));
    }

    #[test]
    fn classical_mockup_cases() {
        let mut rng = RngStream::new(11, 0);
        let id = ComplexMatrix::identity(3);
        for _ in 0..20 {
            assert_eq!(sample_mockup_classical(&id, &mut rng).unwrap().occupations(), [1, 1, 1]);
        }
        let bad = ComplexMatrix::from_real(2, 1, &[1.0, 1.0]).unwrap();
        assert!(sample_mockup_classical(&bad, &mut rng).is_err());
        assert!(sample_mockup_rownorm(&bad, &mut rng).is_err());
    }

    #[test]
    fn single_photon_mockups_agree() {
        let mut rng = RngStream::new(12, 0);
        let a = haar_column_orthonormal(2, 1, &mut rng).unwrap();
        let draws = 100_000;
        let mut c_first = 0;
        let mut r_first = 0;
        for _ in 0..draws {
            c_first += sample_mockup_classical(&a, &mut rng).unwrap().occupations()[0];
            r_first += sample_mockup_rownorm(&a, &mut rng).unwrap().occupations()[0];
        }
        let p = a[(0, 0)].norm_sqr();
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((c_first as f64 / draws as f64 - p).abs() < 4.0 * sd);
        assert!((r_first as f64 / draws as f64 - p).abs() < 4.0 * sd);
    }

    #[test]
    fn mockup_tables_match_convolution_oracles() {
        let mut rng = RngStream::new(13, 0);
        let a = haar_column_orthonormal(6, 3, &mut rng).unwrap();
        let classical = exact_mockup_classical_table(&a).unwrap();
        let rownorm = exact_mockup_rownorm_table(&a).unwrap();
        let c_oracle = mockup_by_convolution(&a);
        let r_oracle = rownorm_by_convolution(&a);
        for s in outcomes::enumerate(&classical.space()).unwrap() {
            assert!((classical.prob(&s).unwrap() - c_oracle[&s]).abs() < 1e-12);
            assert!((rownorm.prob(&s).unwrap() - r_oracle[&s]).abs() < 1e-12);
        }
    }

    #[test]
    fn mockup_samplers_match_exact_tables() {
        let mut rng = RngStream::new(14, 0);
        let a = haar_column_orthonormal(6, 2, &mut rng).unwrap();
        let mut classical = ClassicalMockupSampler::new(&a).unwrap();
        let batch = sample_batch(&mut classical, 100_000, &mut rng, None).unwrap();
        assert!(empirical_tv(&exact_mockup_classical_table(&a).unwrap(), &batch) <= 0.02);
        let mut rownorm = RowNormMockupSampler::new(&a).unwrap();
        let batch = sample_batch(&mut rownorm, 100_000, &mut rng, None).unwrap();
        assert!(empirical_tv(&exact_mockup_rownorm_table(&a).unwrap(), &batch) <= 0.02);
    }

    #[test]
    fn rownorm_mockup_on_unitary_collides() {
        let mut rng = RngStream::new(15, 0);
        let u = haar_column_orthonormal(3, 3, &mut rng).unwrap();
        let mut s = RowNormMockupSampler::new(&u).unwrap();
        let batch = sample_batch(&mut s, 2000, &mut rng, None).unwrap();
        assert!(batch.outcomes.iter().any(|o| !o.is_collision_free()));
    }

    #[test]
    fn uniform_sampler_cases() {
        let mut rng = RngStream::new(16, 0);
        let k = 600_000;
        for (space, cells) in [(OutcomeSpace::collision_free(4, 2), 6), (OutcomeSpace::full(2, 2), 3)] {
            let mut counts = vec![0usize; cells];
            for _ in 0..k {
                counts[space.rank(&sample_uniform(&space, &mut rng).unwrap()).unwrap() as usize] += 1;
            }
            let p = 1.0 / cells as f64;
            let sd = (k as f64 * p * (1.0 - p)).sqrt();
            for c in counts {
                assert!((c as f64 - k as f64 * p).abs() < 5.0 * sd);
            }
        }
        let single = OutcomeSpace::collision_free(7, 1);
        for _ in 0..100 {
            let s = sample_uniform(&single, &mut rng).unwrap();
            assert_eq!(s.n(), 1);
        }
    }

    #[test]
    fn rejection_sampler_matches_table() {
        let mut rng = RngStream::new(17, 0);
        let a = haar_column_orthonormal(6, 3, &mut rng).unwrap();
        let table = exact_boson_table(&a, &OutcomeSpace::full(6, 3)).unwrap();
        let mut rej = BosonRejectionSampler::new(&a).unwrap();
        let batch = sample_batch(&mut rej, 100_000, &mut rng, None).unwrap();
        assert!(empirical_tv(&table, &batch) <= 0.02, "tv {}", empirical_tv(&table, &batch));
        // Acceptance rate is exactly 1/n! on average.
        let rate = 100_000.0 / rej.proposals() as f64;
        assert!((rate * 6.0 - 1.0).abs() < 0.03, "rate {rate}");
    }

    #[test]
    fn lossy_sampler_edges() {
        let mut rng = RngStream::new(18, 0);
        let a = haar_column_orthonormal(6, 4, &mut rng).unwrap();
        let mut all_lost = LossyBosonSampler::new(&a, 1.0).unwrap();
        for _ in 0..20 {
            assert_eq!(all_lost.sample(&mut rng).unwrap(), Outcome::empty(6));
        }
        assert!(LossyBosonSampler::new(&a, 1.5).is_err());

        let half = 0.5;
        let mut lossy = LossyBosonSampler::new(&a, half).unwrap();
        let draws = 100_000;
        let mut total = 0usize;
        for _ in 0..draws {
            let s = lossy.sample(&mut rng).unwrap();
            assert_eq!(s.n(), lossy.last_retained());
            total += s.n();
        }
        // Binomial(4, 1/2): mean 2, variance 1.
        let se = (1.0 / draws as f64).sqrt();
        assert!((total as f64 / draws as f64 - 2.0).abs() < 3.0 * se);
    }

    #[test]
    fn lossless_sampler_matches_boson_table() {
        let mut rng = RngStream::new(19, 0);
        let a = haar_column_orthonormal(6, 2, &mut rng).unwrap();
        let table = exact_boson_table(&a, &OutcomeSpace::full(6, 2)).unwrap();
        let mut lossy = LossyBosonSampler::new(&a, 0.0).unwrap();
        let batch = sample_batch(&mut lossy, 100_000, &mut rng, None).unwrap();
        assert!(empirical_tv(&table, &batch) <= 0.02);
    }

    #[test]
    fn batches_are_reproducible_and_round_trip() {
        let mut r1 = RngStream::new(20, 4);
        let mut r2 = RngStream::new(20, 4);
        let a = haar_column_orthonormal(5, 2, &mut RngStream::new(1, 1)).unwrap();
        let mut s1 = ClassicalMockupSampler::new(&a).unwrap();
        let mut s2 = ClassicalMockupSampler::new(&a).unwrap();
        let b1 = sample_batch(&mut s1, 200, &mut r1, Some(a.content_hash())).unwrap();
        let b2 = sample_batch(&mut s2, 200, &mut r2, Some(a.content_hash())).unwrap();
        assert_eq!(b1, b2);

        let mut buf = Vec::new();
        b1.write_jsonl(&mut buf).unwrap();
        let mut buf2 = Vec::new();
        b2.write_jsonl(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        let text = String::from_utf8(buf.clone()).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.contains("\"kind\":\"mockup-classical\""));
        assert!(first.contains("\"seed\":20"));
        assert_eq!(SampleBatch::read_jsonl(buf.as_slice()).unwrap(), b1);
    }

    #[test]
    fn kind_tags_round_trip() {
        for k in SamplerKind::ALL {
            assert_eq!(SamplerKind::from_tag(k.tag()).unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.tag()));
        }
        assert!(SamplerKind::from_tag("bogus").is_err());
    }
}
