//! Seeded experiment runners behind the command-line tool.
//!
//! Each runner takes an [`ExperimentConfig`] and returns an
//! [`ExperimentOutput`]: a report with named statistics and pass/fail checks,
//! plus any side files (histogram CSVs, sample batches). Everything in the
//! output is a pure function of the config, so re-running a config
//! reproduces the files byte for byte.
//!
//! Randomness is organized as a tree of [`RngStream`] substreams: trial `t`
//! uses `root.substream(t)`, and each sampler arm inside a trial uses a
//! further substream of that.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, too_large, Result};
use crate::estimators::{self, DistinguisherResult};
use crate::linalg::{self, haar_column_orthonormal, sample_gaussian_matrix, ComplexMatrix};
use crate::outcomes::OutcomeSpace;
use crate::rng::RngStream;
use crate::samplers::{
    self, sample_batch, BosonMethod, ClassicalMockupSampler, FermionSampler, LossyBosonSampler, OutcomeSampler,
    RowNormMockupSampler, SampleBatch, SamplerKind, UniformSampler,
};
use crate::stats::{self, DistributionSummary, Histogram, MomentTolerances, ReferenceLaw};

/// Largest `n` accepted by the `pdf` command.
pub const MAX_PDF_PHOTONS: usize = 8;
/// Largest `n` in exact-mode distinguishing runs.
pub const MAX_EXACT_DISTINGUISH_PHOTONS: usize = 6;
/// Largest `n` in surrogate-mode distinguishing runs.
pub const MAX_SURROGATE_PHOTONS: usize = 50;
/// Largest number of full-space outcomes a `tv` trial will enumerate.
pub const MAX_TV_OUTCOMES: u64 = 200_000;
/// Largest `n` for the `tv` command.
pub const MAX_TV_PHOTONS: usize = 5;
/// Cap on Monte Carlo draws for any single statistic.
pub const MAX_SAMPLES: usize = 50_000_000;

/// The `k` values swept by the verifier experiment.
pub const VERIFIER_SWEEP: [usize; 4] = [5, 10, 20, 40];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Pdf,
    Deviation,
    Tv,
    Distinguish,
    Verify,
    Fermion,
    Sample,
}

impl Experiment {
    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Pdf => "pdf",
            Experiment::Deviation => "deviation",
            Experiment::Tv => "tv",
            Experiment::Distinguish => "distinguish",
            Experiment::Verify => "verify",
            Experiment::Fermion => "fermion",
            Experiment::Sample => "sample",
        }
    }

    fn default_samples(self) -> usize {
        match self {
            Experiment::Pdf | Experiment::Deviation | Experiment::Fermion => 100_000,
            Experiment::Distinguish => 10_000,
            Experiment::Verify => 30,
            Experiment::Tv => 0,
            Experiment::Sample => 1_000,
        }
    }

    fn default_trials(self) -> usize {
        match self {
            Experiment::Verify => 50,
            _ => DEFAULT_TRIALS,
        }
    }
}

/// Number of Haar re-draws when a config does not say.
pub const DEFAULT_TRIALS: usize = 20;
/// Haar trials behind the verifier's k sweep. Adjacent k values differ in
/// acceptance by a few percent, which 50 trials cannot resolve.
pub const DEFAULT_SWEEP_TRIALS: usize = 1000;
/// Fraction of trials that must pass a per-trial check.
pub const DEFAULT_PASS_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Exact,
    /// Gaussian matrices stand in for scaled Haar submatrices.
    Surrogate,
}

/// Named tolerances. Every check in a report cites one of these fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub mean_abs: f64,
    pub second_moment_rel: f64,
    pub half_deviation_min: f64,
    pub far_probability_min: f64,
    pub sigma: f64,
    pub histogram_se: f64,
    pub ks_exponential_max: f64,
    pub tv_min: f64,
    pub gap_min_surrogate: f64,
    pub gap_min_exact: f64,
    pub blindness_se: f64,
    pub verifier_boson_min: f64,
    pub verifier_uniform_max: f64,
    pub fermion_tv_max: f64,
    pub ks_normal_max: f64,
    pub ks_two_sample_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mean_abs: 0.03,
            second_moment_rel: 0.15,
            half_deviation_min: 0.31,
            far_probability_min: 0.61,
            sigma: 3.0,
            histogram_se: 2.0,
            ks_exponential_max: 0.02,
            tv_min: 1.0 / 9.0,
            gap_min_surrogate: 0.10,
            gap_min_exact: 0.08,
            blindness_se: 4.0,
            verifier_boson_min: 0.9,
            verifier_uniform_max: 0.1,
            fermion_tv_max: 0.02,
            ks_normal_max: 0.05,
            ks_two_sample_max: 0.03,
        }
    }
}

/// Inputs of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub m: Option<usize>,
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Batch size for the verifier.
    pub k: Option<usize>,
    /// Haar trials behind the verifier's k sweep.
    pub sweep_trials: Option<usize>,
    /// Draws per law in the lognormal-convergence part of `fermion`.
    pub ks_samples: Option<usize>,
    /// Draws per `n` in the log-chi-square cumulant part of `fermion`.
    pub cumulant_samples: Option<usize>,
    pub pass_fraction: Option<f64>,
    /// Sampler for the `sample` command.
    pub kind: Option<SamplerKind>,
    pub boson_method: Option<BosonMethod>,
    /// Per-photon loss probability for `lossy-boson`.
    pub loss: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, n: usize, seed: u64) -> Self {
        Self {
            experiment,
            n,
            m: None,
            samples: None,
            trials: None,
            seed,
            mode: Mode::Exact,
            k: None,
            sweep_trials: None,
            ks_samples: None,
            cumulant_samples: None,
            pass_fraction: None,
            kind: None,
            boson_method: None,
            loss: None,
            tolerances: Tolerances::default(),
        }
    }

    /// Fills every defaulted field so the echoed config is explicit.
    pub fn resolved(&self) -> Self {
        let e = self.experiment;
        let mut c = self.clone();
        if e != Experiment::Tv {
            c.samples.get_or_insert(e.default_samples());
        }
        if matches!(e, Experiment::Tv | Experiment::Distinguish | Experiment::Verify) {
            c.trials.get_or_insert(e.default_trials());
            c.pass_fraction.get_or_insert(DEFAULT_PASS_FRACTION);
        }
        match e {
            Experiment::Verify => {
                c.k.get_or_insert(30);
                c.sweep_trials.get_or_insert(DEFAULT_SWEEP_TRIALS);
            }
            Experiment::Fermion => {
                c.m.get_or_insert(6);
                c.ks_samples.get_or_insert(10_000);
                c.cumulant_samples.get_or_insert(1_000_000);
            }
            Experiment::Sample => {
                c.kind.get_or_insert(SamplerKind::BosonExact);
            }
            _ => {}
        }
        if matches!(e, Experiment::Distinguish | Experiment::Verify | Experiment::Sample) {
            c.boson_method.get_or_insert(BosonMethod::Auto);
        }
        c
    }

    fn m_required(&self) -> Result<usize> {
        match self.m {
            Some(m) if m >= 1 => Ok(m),
            Some(_) => invalid("m must be at least 1"),
            None => invalid(format!("the {} experiment needs --m", self.experiment.tag())),
        }
    }

    fn count(&self, value: Option<usize>, what: &str) -> Result<usize> {
        match value {
            Some(0) => invalid(format!("{what} must be at least 1")),
            Some(v) if v > MAX_SAMPLES => too_large(format!("{what}={v} exceeds the {MAX_SAMPLES} budget")),
            Some(v) => Ok(v),
            None => invalid(format!("{what} is not set")),
        }
    }
}

/// A point estimate, optionally with a standard error and a 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl Statistic {
    pub fn point(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value, se: None, ci_low: None, ci_high: None }
    }

    pub fn mean(name: impl Into<String>, value: f64, se: f64) -> Self {
        Self {
            name: name.into(),
            value,
            se: Some(se),
            ci_low: Some(value - 1.96 * se),
            ci_high: Some(value + 1.96 * se),
        }
    }

    pub fn fraction(name: impl Into<String>, d: &DistinguisherResult) -> Self {
        Self {
            name: name.into(),
            value: d.fraction,
            se: Some(d.standard_error()),
            ci_low: Some(d.ci_low),
            ci_high: Some(d.ci_high),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
}

impl Comparison {
    fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtLeast => measured >= threshold,
            Comparison::AtMost => measured <= threshold,
            Comparison::Below => measured < threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::AtLeast => ">=",
            Comparison::AtMost => "<=",
            Comparison::Below => "<",
        }
    }
}

/// One pass/fail clause: `measured <comparison> threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Tag of the claim under test.
    pub claim: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    /// Config field the threshold comes from.
    pub tolerance: String,
    pub passed: bool,
}

impl Check {
    pub fn new(
        claim: impl Into<String>,
        measured: f64,
        comparison: Comparison,
        threshold: f64,
        tolerance: impl Into<String>,
    ) -> Self {
        Self {
            claim: claim.into(),
            measured,
            comparison,
            threshold,
            tolerance: tolerance.into(),
            passed: comparison.holds(measured, threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub statistics: Vec<Statistic>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl ExperimentReport {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.experiment,
            config: config.clone(),
            statistics: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            passed: true,
        }
    }

    fn stat(&mut self, s: Statistic) {
        self.statistics.push(s);
    }

    fn check(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn check_named(&self, claim: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.claim == claim)
    }

    pub fn statistic_named(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Long-format CSV: `section,name,value,se,ci_low,ci_high,comparison,threshold,passed`.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from("section,name,value,se,ci_low,ci_high,comparison,threshold,passed\n");
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let config = serde_json::to_value(&self.config)?;
        let mut flat = Vec::new();
        flatten_json("", &config, &mut flat);
        for (key, value) in flat {
            writeln!(out, "config,{key},{},,,,,,", csv_field(&value)).expect("string write");
        }
        for s in &self.statistics {
            writeln!(out, "statistic,{},{},{},{},{},,,", s.name, s.value, opt(s.se), opt(s.ci_low), opt(s.ci_high))
                .expect("string write");
        }
        for c in &self.checks {
            writeln!(
                out,
                "check,{},{},,,,{},{},{}",
                c.claim,
                c.measured,
                c.comparison.symbol(),
                c.threshold,
                c.passed
            )
            .expect("string write");
        }
        for note in &self.notes {
            writeln!(out, "note,{},,,,,,,", csv_field(note)).expect("string write");
        }
        writeln!(out, "summary,passed,,,,,,,{}", self.passed).expect("string write");
        Ok(out)
    }
}

fn flatten_json(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_json(&key, child, out);
            }
        }
        serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        serde_json::Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A file produced next to the report, e.g. a histogram CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    /// Appended to the report's file stem, e.g. `_p_histogram.csv`.
    pub suffix: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub artifacts: Vec<Artifact>,
}

/// Runs the experiment named in `config`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let config = config.resolved();
    match config.experiment {
        Experiment::Pdf => run_pdf(&config),
        Experiment::Deviation => run_deviation(&config).map(no_artifacts),
        Experiment::Tv => run_tv(&config).map(no_artifacts),
        Experiment::Distinguish => run_distinguish(&config).map(no_artifacts),
        Experiment::Verify => run_verify(&config).map(no_artifacts),
        Experiment::Fermion => run_fermion(&config).map(no_artifacts),
        Experiment::Sample => run_sample(&config),
    }
}

fn no_artifacts(report: ExperimentReport) -> ExperimentOutput {
    ExperimentOutput { report, artifacts: Vec::new() }
}

fn check_photons(n: usize, max: usize, what: &str) -> Result<()> {
    if n == 0 {
        return invalid(format!("{what} needs n >= 1"));
    }
    if n > max {
        return too_large(format!("{what} is limited to n <= {max}, got {n}"));
    }
    Ok(())
}

/// `P = |Per(X)|^2 / n!` for `count` Gaussian `n x n` matrices.
pub fn gaussian_p_samples(n: usize, count: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    (0..count).map(|_| estimators::p_statistic(&sample_gaussian_matrix(n, n, rng)?)).collect()
}

/// `D = |Det(X)|^2 / n!` for `count` Gaussian `n x n` matrices.
pub fn gaussian_d_samples(n: usize, count: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let ln_fact = samplers::ln_factorial(n);
    (0..count)
        .map(|_| {
            let x = sample_gaussian_matrix(n, n, rng)?;
            Ok((linalg::determinant(&x)?.norm_sqr().ln() - ln_fact).exp())
        })
        .collect()
}

fn run_pdf(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n = config.n;
    check_photons(n, MAX_PDF_PHOTONS, "pdf")?;
    let samples = config.count(config.samples, "samples")?;
    if samples < 100_000 {
        return invalid(format!("pdf needs at least 10^5 draws, got {samples}"));
    }
    let tol = &config.tolerances;
    let root = RngStream::new(config.seed, 0);
    let p = gaussian_p_samples(n, samples, &mut root.substream(0))?;
    let d = gaussian_d_samples(n, samples, &mut root.substream(1))?;
    let mut report = ExperimentReport::new(config);
    let mut artifacts = Vec::new();

    for (label, values) in [("p", &p), ("d", &d)] {
        let summary = DistributionSummary::from_samples(values)?;
        report.stat(Statistic::mean(format!("mean_{label}"), summary.mean, summary.mean_se));
        report.check(Check::new(
            format!("mean_{label}_within_tolerance_of_one"),
            (summary.mean - 1.0).abs(),
            Comparison::AtMost,
            tol.mean_abs,
            "tolerances.mean_abs",
        ));
        let hist = Histogram::uniform_bins(values, 0.0, 5.0, 100);
        let violations = hist.monotone_violations(tol.histogram_se);
        // With 99 adjacent pairs a lone rise past 2 SE is expected now and
        // then, so the fine histogram is reported and the coarse one checked.
        report.stat(Statistic::point(format!("{label}_histogram_rising_bins"), violations.len() as f64));
        let geometric = Histogram::geometric_bins(values, 1e-3, 10.0, 50);
        let geo_violations = geometric.monotone_violations(tol.histogram_se);
        report.stat(Statistic::point(format!("{label}_geometric_histogram_rising_bins"), geo_violations.len() as f64));
        report.check(Check::new(
            format!("{label}_density_nonincreasing_geometric_bins"),
            geo_violations.len() as f64,
            Comparison::AtMost,
            0.0,
            "tolerances.histogram_se",
        ));
        let mut csv = Vec::new();
        hist.write_csv(&mut csv)?;
        artifacts.push(Artifact {
            suffix: format!("_{label}_histogram.csv"),
            contents: String::from_utf8(csv).expect("CSV is ASCII"),
        });
    }

    if n == 1 {
        let mut sorted = p.clone();
        sorted.sort_by(f64::total_cmp);
        let ks = stats::ks_distance(&sorted, &ReferenceLaw::Exponential { rate: 1.0 })?;
        report.stat(Statistic::point("ks_p_vs_exponential", ks));
        report.check(Check::new(
            "p_is_exponential_for_one_photon",
            ks,
            Comparison::AtMost,
            tol.ks_exponential_max,
            "tolerances.ks_exponential_max",
        ));
    }
    Ok(ExperimentOutput { report, artifacts })
}

fn run_deviation(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let n = config.n;
    check_photons(n, linalg::MAX_RYSER_DIM, "deviation")?;
    let samples = config.count(config.samples, "samples")?;
    let tol = &config.tolerances;
    let root = RngStream::new(config.seed, 0);
    let p = gaussian_p_samples(n, samples, &mut root.substream(0))?;
    let mut report = ExperimentReport::new(config);

    let half_dev: Vec<f64> = p.iter().map(|x| 0.5 * (x - 1.0).abs()).collect();
    let hd = DistributionSummary::from_samples(&half_dev)?;
    report.stat(Statistic::mean("half_mean_abs_deviation", hd.mean, hd.mean_se));
    report.check(Check::new(
        "half_mean_abs_deviation_at_least",
        hd.mean,
        Comparison::AtLeast,
        tol.half_deviation_min,
        "tolerances.half_deviation_min",
    ));

    let far = p.iter().filter(|x| (*x - 1.0).abs() >= 0.5).count();
    let far_frac = DistinguisherResult::from_counts(far, samples);
    report.stat(Statistic::fraction("far_probability", &far_frac));
    report.check(Check::new(
        "far_probability_at_least",
        far_frac.fraction,
        Comparison::AtLeast,
        tol.far_probability_min,
        "tolerances.far_probability_min",
    ));

    // Analytic infima over exponential mixture components.
    let (c_dev, inf_dev) = stats::golden_section_min(stats::exponential_half_mean_deviation, 0.05, 20.0, 1e-12);
    let (c_far, inf_far) = stats::golden_section_min(stats::exponential_far_probability, 0.05, 20.0, 1e-12);
    report.stat(Statistic::point("reference_half_deviation_infimum", inf_dev));
    report.stat(Statistic::point("reference_half_deviation_argmin_rate", c_dev));
    report.stat(Statistic::point("reference_far_probability_infimum", inf_far));
    report.stat(Statistic::point("reference_far_probability_argmin_rate", c_far));

    if samples >= 10_000 {
        let m = stats::moment_checks(
            &p,
            n,
            MomentTolerances { mean_abs: tol.mean_abs, second_moment_rel: tol.second_moment_rel },
        )?;
        report.stat(Statistic::mean("mean_p", m.summary.mean, m.summary.mean_se));
        report.check(Check::new(
            "mean_p_within_tolerance_of_one",
            (m.summary.mean - 1.0).abs(),
            Comparison::AtMost,
            tol.mean_abs,
            "tolerances.mean_abs",
        ));
        report.stat(Statistic::point("second_moment_p", m.second_moment));
        report.stat(Statistic::point("expected_second_moment_p", m.expected_second_moment));
        let rel = (m.second_moment / m.expected_second_moment - 1.0).abs();
        if n <= 4 && samples >= 1_000_000 {
            report.check(Check::new(
                "second_moment_p_near_n_plus_one",
                rel,
                Comparison::AtMost,
                tol.second_moment_rel,
                "tolerances.second_moment_rel",
            ));
        } else {
            report.note(
                "second moment of P is reported but not checked: heavy tails need n <= 4 and >= 10^6 draws",
            );
        }
    }

    if n == 1 {
        let exact = (-1f64).exp();
        report.stat(Statistic::point("exact_half_mean_abs_deviation", exact));
        report.check(Check::new(
            "one_photon_half_deviation_matches_closed_form",
            (hd.mean - exact).abs() / hd.mean_se,
            Comparison::AtMost,
            tol.sigma,
            "tolerances.sigma",
        ));
    }
    Ok(report)
}

fn run_tv(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let n = config.n;
    check_photons(n, MAX_TV_PHOTONS, "tv")?;
    let m = config.m_required()?;
    let trials = config.count(config.trials, "trials")?;
    let pass_fraction = config.pass_fraction.unwrap_or(DEFAULT_PASS_FRACTION);
    let full = OutcomeSpace::full(m, n);
    let size = full.size()?;
    if size > MAX_TV_OUTCOMES {
        return too_large(format!("tv enumerates {size} outcomes per trial, above the {MAX_TV_OUTCOMES} guard"));
    }
    if n > m {
        return invalid(format!("collision-free outcomes need n <= m, got n={n}, m={m}"));
    }
    let tol = &config.tolerances;
    let root = RngStream::new(config.seed, 0);
    let mut report = ExperimentReport::new(config);
    let mut tvs = Vec::with_capacity(trials);
    let mut collision = Vec::with_capacity(trials);
    for t in 0..trials {
        let a = haar_column_orthonormal(m, n, &mut root.substream(t as u64))?;
        let table = samplers::exact_boson_table(&a, &full)?;
        let tv = stats::tv_to_uniform_collision_free(&table)?;
        let restricted = table.restrict_collision_free()?;
        let cf_mass = restricted.total_mass();
        let tv_lambda = stats::total_variation(
            &restricted.renormalized(),
            &samplers::ProbabilityTable::uniform(OutcomeSpace::collision_free(m, n))?,
        )?;
        report.stat(Statistic::point(format!("trial_{t:03}_tv"), tv));
        report.stat(Statistic::point(format!("trial_{t:03}_tv_collision_free_renormalized"), tv_lambda));
        report.stat(Statistic::point(format!("trial_{t:03}_collision_mass"), 1.0 - cf_mass));
        tvs.push(tv);
        collision.push(1.0 - cf_mass);
    }
    let tv_summary = DistributionSummary::from_samples(&tvs)?;
    report.stat(Statistic::mean("mean_tv", tv_summary.mean, tv_summary.mean_se));
    let min_tv = tvs.iter().copied().fold(f64::INFINITY, f64::min);
    report.stat(Statistic::point("min_tv", min_tv));
    let passing = tvs.iter().filter(|&&tv| tv >= tol.tv_min).count();
    report.stat(Statistic::point("trials_with_tv_at_least_min", passing as f64));
    report.check(Check::new(
        "tv_from_uniform_at_least_one_ninth",
        passing as f64 / trials as f64,
        Comparison::AtLeast,
        pass_fraction,
        "pass_fraction",
    ));

    let coll = DistributionSummary::from_samples(&collision)?;
    let bound = 2.0 * (n * n) as f64 / m as f64;
    report.stat(Statistic::mean("mean_collision_mass", coll.mean, coll.mean_se));
    report.stat(Statistic::point("collision_bound_2n2_over_m", bound));
    report.check(Check::new("collision_mass_below_2n2_over_m", coll.mean, Comparison::Below, bound, "derived:2n^2/m"));

    let regime = (n as f64).powf(5.1);
    if (m as f64) < regime {
        report.note(format!(
            "m-regime caveat: m={m} is below n^5.1={regime:.0}; the 1/9 line is a reference expectation here, not a guaranteed bound"
        ));
    }
    report.note("tv compares D_A on all outcomes with the uniform law on collision-free outcomes");
    Ok(report)
}

/// One arm of a distinguishing run.
struct Arm {
    name: &'static str,
    result: DistinguisherResult,
}

fn run_distinguish(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let n = config.n;
    let samples = config.count(config.samples, "samples")?;
    let trials = config.count(config.trials, "trials")?;
    let pass_fraction = config.pass_fraction.unwrap_or(DEFAULT_PASS_FRACTION);
    let tol = config.tolerances;
    let (gap_min, gap_tol) = match config.mode {
        Mode::Exact => {
            check_photons(n, MAX_EXACT_DISTINGUISH_PHOTONS, "exact-mode distinguish")?;
            (tol.gap_min_exact, "tolerances.gap_min_exact")
        }
        Mode::Surrogate => {
            check_photons(n, MAX_SURROGATE_PHOTONS, "surrogate-mode distinguish")?;
            (tol.gap_min_surrogate, "tolerances.gap_min_surrogate")
        }
    };
    let m = match config.mode {
        Mode::Exact => {
            let m = config.m_required()?;
            if m < n {
                return invalid(format!("need m >= n, got m={m}, n={n}"));
            }
            Some(m)
        }
        Mode::Surrogate => None,
    };
    let root = RngStream::new(config.seed, 0);
    let mut report = ExperimentReport::new(config);
    let arm_names = ["boson", "uniform", "mockup-classical", "mockup-rownorm", "fermion"];
    let mut gap_passes = 0usize;
    let mut blind_passes = [0usize; 3];
    let mut arm_totals = [(0usize, 0usize); 5];

    for t in 0..trials {
        let trial_rng = root.substream(t as u64);
        let arms = match m {
            Some(m) => exact_arms(m, n, samples, config.boson_method.unwrap_or(BosonMethod::Auto), &trial_rng)?,
            None => surrogate_arms(n, samples, &trial_rng)?,
        };
        for (i, arm) in arms.iter().enumerate() {
            debug_assert_eq!(arm.name, arm_names[i]);
            report.stat(Statistic::fraction(format!("trial_{t:03}_{}_fraction", arm.name), &arm.result));
            arm_totals[i].0 += arm.result.accepted;
            arm_totals[i].1 += arm.result.count;
        }
        let gap = arms[0].result.fraction - arms[1].result.fraction;
        report.stat(Statistic::point(format!("trial_{t:03}_gap"), gap));
        if gap >= gap_min {
            gap_passes += 1;
        }
        for (j, arm) in arms[2..].iter().enumerate() {
            let se = (arms[0].result.standard_error().powi(2) + arm.result.standard_error().powi(2)).sqrt();
            let diff = (arm.result.fraction - arms[0].result.fraction).abs();
            report.stat(Statistic::point(format!("trial_{t:03}_{}_vs_boson_in_se", arm.name), diff / se.max(1e-300)));
            if diff <= tol.blindness_se * se {
                blind_passes[j] += 1;
            }
        }
    }
    for (i, name) in arm_names.iter().enumerate() {
        let pooled = DistinguisherResult::from_counts(arm_totals[i].0, arm_totals[i].1);
        report.stat(Statistic::fraction(format!("pooled_{name}_fraction"), &pooled));
    }
    report.check(Check::new(
        "rownorm_gap_boson_minus_uniform_at_least",
        gap_passes as f64 / trials as f64,
        Comparison::AtLeast,
        pass_fraction,
        format!("pass_fraction; per trial {gap_tol}"),
    ));
    for (j, name) in ["mockup_classical", "mockup_rownorm", "fermion"].iter().enumerate() {
        report.check(Check::new(
            format!("rownorm_blind_to_{name}"),
            blind_passes[j] as f64 / trials as f64,
            Comparison::AtLeast,
            pass_fraction,
            "pass_fraction; per trial tolerances.blindness_se",
        ));
    }
    match config.mode {
        Mode::Exact => report.note("exact mode: every arm samples its distribution exactly for a fresh Haar A per trial"),
        Mode::Surrogate => report.note(
            "surrogate mode: uniform arm uses Gaussian n x n matrices; boson and mockup arms draw rows with \
             Gamma(n+1) squared norms, the exact row-norm law of the Gaussian tilted by |Per|^2, Per(|X|^2) \
             or |Det|^2",
        ),
    }
    Ok(report)
}

fn distinguish_batch(a: &ComplexMatrix, batch: &SampleBatch) -> Result<DistinguisherResult> {
    estimators::rownorm_distinguisher(a, batch)
}

fn exact_arms(m: usize, n: usize, samples: usize, method: BosonMethod, trial: &RngStream) -> Result<Vec<Arm>> {
    let a = haar_column_orthonormal(m, n, &mut trial.substream(0))?;
    let hash = Some(a.content_hash());
    let mut boson = samplers::boson_sampler(&a, method)?;
    let mut uniform = UniformSampler::new(OutcomeSpace::collision_free(m, n))?;
    let mut classical = ClassicalMockupSampler::new(&a)?;
    let mut rownorm = RowNormMockupSampler::new(&a)?;
    let mut fermion = FermionSampler::new(&a)?;
    let samplers_list: [(&'static str, &mut dyn OutcomeSampler); 5] = [
        ("boson", boson.as_mut()),
        ("uniform", &mut uniform),
        ("mockup-classical", &mut classical),
        ("mockup-rownorm", &mut rownorm),
        ("fermion", &mut fermion),
    ];
    let mut arms = Vec::with_capacity(5);
    for (i, (name, sampler)) in samplers_list.into_iter().enumerate() {
        let batch = sample_batch(sampler, samples, &mut trial.substream(i as u64 + 1), hash.clone())?;
        arms.push(Arm { name, result: distinguish_batch(&a, &batch)? });
    }
    Ok(arms)
}

fn surrogate_arms(n: usize, samples: usize, trial: &RngStream) -> Result<Vec<Arm>> {
    let names = ["boson", "uniform", "mockup-classical", "mockup-rownorm", "fermion"];
    let mut arms = Vec::with_capacity(5);
    for (i, name) in names.into_iter().enumerate() {
        let mut rng = trial.substream(i as u64 + 1);
        let mut accepted = 0;
        for _ in 0..samples {
            let x = if name == "uniform" {
                sample_gaussian_matrix(n, n, &mut rng)?
            } else {
                estimators::sample_tilted_rownorm_matrix(n, &mut rng)?
            };
            if estimators::ln_r_star(&x)? >= 0.0 {
                accepted += 1;
            }
        }
        arms.push(Arm { name, result: DistinguisherResult::from_counts(accepted, samples) });
    }
    Ok(arms)
}

fn run_verify(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let n = config.n;
    check_photons(n, estimators::MAX_PERMANENT_PHOTONS, "verify")?;
    let m = config.m_required()?;
    if m < n {
        return invalid(format!("need m >= n, got m={m}, n={n}"));
    }
    let k = config.count(config.k, "k")?;
    let trials = config.count(config.trials, "trials")?;
    let method = config.boson_method.unwrap_or(BosonMethod::Auto);
    let tol = &config.tolerances;
    let kmax = VERIFIER_SWEEP.iter().copied().max().unwrap_or(0).max(k);
    let root = RngStream::new(config.seed, 0);
    let mut report = ExperimentReport::new(config);

    let mut ks: Vec<usize> = VERIFIER_SWEEP.to_vec();
    if !ks.contains(&k) {
        ks.push(k);
        ks.sort_unstable();
    }
    let sweep_trials = config.count(config.sweep_trials, "sweep_trials")?;
    // Trial t contributes to the k-threshold rates when t < trials and to the
    // sweep when t < sweep_trials.
    let mut boson_accepts = vec![(0usize, 0usize); ks.len()];
    let mut uniform_accepts = vec![(0usize, 0usize); ks.len()];
    for t in 0..trials.max(sweep_trials) {
        let trial = root.substream(t as u64);
        let a = haar_column_orthonormal(m, n, &mut trial.substream(0))?;
        let hash = Some(a.content_hash());
        let mut boson = samplers::boson_sampler(&a, method)?;
        let mut uniform = UniformSampler::new(OutcomeSpace::collision_free(m, n))?;
        let boson_batch = sample_batch(boson.as_mut(), kmax, &mut trial.substream(1), hash.clone())?;
        let uniform_batch = sample_batch(&mut uniform, kmax, &mut trial.substream(2), hash)?;
        for (i, &kk) in ks.iter().enumerate() {
            // Nested prefixes of one batch per arm keep the sweep coupled across k.
            let prefix = |b: &SampleBatch| SampleBatch { outcomes: b.outcomes[..kk].to_vec(), ..b.clone() };
            let b = usize::from(estimators::permanent_verifier(&a, &prefix(&boson_batch))?.accept);
            let u = usize::from(estimators::permanent_verifier(&a, &prefix(&uniform_batch))?.accept);
            if t < trials {
                boson_accepts[i].0 += b;
                uniform_accepts[i].0 += u;
            }
            if t < sweep_trials {
                boson_accepts[i].1 += b;
                uniform_accepts[i].1 += u;
            }
        }
    }
    let mut gaps = Vec::new();
    for (i, &kk) in ks.iter().enumerate() {
        let b = DistinguisherResult::from_counts(boson_accepts[i].0, trials);
        let u = DistinguisherResult::from_counts(uniform_accepts[i].0, trials);
        report.stat(Statistic::fraction(format!("k_{kk:03}_boson_acceptance"), &b));
        report.stat(Statistic::fraction(format!("k_{kk:03}_uniform_acceptance"), &u));
        report.stat(Statistic::point(format!("k_{kk:03}_gap"), b.fraction - u.fraction));
        if VERIFIER_SWEEP.contains(&kk) {
            let sb = DistinguisherResult::from_counts(boson_accepts[i].1, sweep_trials);
            let su = DistinguisherResult::from_counts(uniform_accepts[i].1, sweep_trials);
            report.stat(Statistic::fraction(format!("sweep_k_{kk:03}_boson_acceptance"), &sb));
            report.stat(Statistic::fraction(format!("sweep_k_{kk:03}_uniform_acceptance"), &su));
            report.stat(Statistic::point(format!("sweep_k_{kk:03}_gap"), sb.fraction - su.fraction));
            gaps.push(sb.fraction - su.fraction);
        }
        if kk == k {
            report.check(Check::new(
                "verifier_accepts_boson_batches",
                b.fraction,
                Comparison::AtLeast,
                tol.verifier_boson_min,
                "tolerances.verifier_boson_min",
            ));
            report.check(Check::new(
                "verifier_rejects_uniform_batches",
                u.fraction,
                Comparison::AtMost,
                tol.verifier_uniform_max,
                "tolerances.verifier_uniform_max",
            ));
        }
    }
    let worst_drop = gaps.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);
    report.check(Check::new(
        "verifier_gap_nondecreasing_in_k",
        worst_drop,
        Comparison::AtMost,
        0.0,
        "exact:nondecreasing",
    ));
    report.note("acceptance rates are fractions of trials; each trial draws a fresh Haar A and one batch per arm");
    Ok(report)
}

fn run_fermion(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let n = config.n;
    let m = config.m_required()?;
    check_photons(n, samplers::MAX_TABLE_PHOTONS, "fermion")?;
    if n > m {
        return invalid(format!("fermions need n <= m, got n={n}, m={m}"));
    }
    let samples = config.count(config.samples, "samples")?;
    let ks_samples = config.count(config.ks_samples, "ks_samples")?;
    let cumulant_samples = config.count(config.cumulant_samples, "cumulant_samples")?;
    let tol = &config.tolerances;
    let root = RngStream::new(config.seed, 0);
    let mut report = ExperimentReport::new(config);

    // Sampler against the exact determinant table.
    let a = haar_column_orthonormal(m, n, &mut root.substream(0))?;
    let table = samplers::exact_fermion_table(&a)?;
    let mut sampler = FermionSampler::new(&a)?;
    let batch = sample_batch(&mut sampler, samples, &mut root.substream(1), Some(a.content_hash()))?;
    let collisions = batch.outcomes.iter().filter(|s| !s.is_collision_free()).count();
    report.stat(Statistic::point("collision_outcomes", collisions as f64));
    report.check(Check::new("fermion_samples_never_collide", collisions as f64, Comparison::AtMost, 0.0, "exact:zero"));
    let space = table.space();
    let mut counts = vec![0u64; table.probs().len()];
    for s in &batch.outcomes {
        if s.is_collision_free() {
            counts[space.rank(s)? as usize] += 1;
        }
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    let tv = stats::total_variation_vectors(&empirical, table.probs())?;
    report.stat(Statistic::point("fermion_empirical_tv", tv));
    report.check(Check::new(
        "fermion_sampler_matches_determinant_table",
        tv,
        Comparison::AtMost,
        tol.fermion_tv_max,
        "tolerances.fermion_tv_max",
    ));

    // ln|Det|^2 against its lognormal law.
    let mut det_ks = Vec::new();
    for (i, &dn) in [10usize, 25, 50].iter().enumerate() {
        let mut rng = root.substream(10 + i as u64);
        let mut z = Vec::with_capacity(ks_samples);
        for _ in 0..ks_samples {
            let x = sample_gaussian_matrix(dn, dn, &mut rng)?;
            z.push(stats::standardize_log_det(linalg::determinant(&x)?.norm_sqr().ln(), dn)?);
        }
        z.sort_by(f64::total_cmp);
        let ks = stats::ks_distance(&z, &ReferenceLaw::StandardNormal)?;
        report.stat(Statistic::point(format!("ks_log_det_n{dn:02}"), ks));
        det_ks.push(ks);
    }
    report.check(Check::new(
        "log_det_close_to_normal_at_n50",
        det_ks[2],
        Comparison::AtMost,
        tol.ks_normal_max,
        "tolerances.ks_normal_max",
    ));
    report.check(Check::new(
        "log_det_ks_decreases_from_n10_to_n50",
        det_ks[2],
        Comparison::Below,
        det_ks[0],
        "measured:ks_log_det_n10",
    ));

    // Product of chi-squares against direct determinants.
    let pn = 5;
    let mut rng = root.substream(20);
    let product: Vec<f64> =
        (0..ks_samples).map(|_| stats::chisq_product_sample(pn, &mut rng)).collect::<Result<_>>()?;
    let mut rng = root.substream(21);
    let direct: Vec<f64> = (0..ks_samples)
        .map(|_| Ok(linalg::determinant(&sample_gaussian_matrix(pn, pn, &mut rng)?)?.norm_sqr()))
        .collect::<Result<_>>()?;
    let ks2 = stats::ks_two_sample(&product, &direct)?;
    report.stat(Statistic::point("ks_chisq_product_vs_det_n05", ks2));
    report.check(Check::new(
        "chisq_product_matches_det_law",
        ks2,
        Comparison::AtMost,
        tol.ks_two_sample_max,
        "tolerances.ks_two_sample_max",
    ));

    // ln R (log of the product of squared row norms) against its normal limit.
    let rn = 100;
    let mom = stats::log_chisq_moments(rn)?;
    let (mu, sd) = (rn as f64 * mom.mean, (rn as f64 * mom.variance).sqrt());
    let mut rng = root.substream(30);
    let mut z = Vec::with_capacity(ks_samples);
    for _ in 0..ks_samples {
        let x = sample_gaussian_matrix(rn, rn, &mut rng)?;
        let ln_r: f64 = linalg::row_squared_norms(&x).iter().map(|r| r.ln()).sum();
        z.push((ln_r - mu) / sd);
    }
    z.sort_by(f64::total_cmp);
    let ks_r = stats::ks_distance(&z, &ReferenceLaw::StandardNormal)?;
    report.stat(Statistic::point("ks_log_rownorm_product_n100", ks_r));
    report.check(Check::new(
        "log_rownorm_product_close_to_normal_at_n100",
        ks_r,
        Comparison::AtMost,
        tol.ks_normal_max,
        "tolerances.ks_normal_max",
    ));

    // Log-chi-square cumulants against Monte Carlo.
    for (i, &cn) in [1usize, 2, 50].iter().enumerate() {
        let mut rng = root.substream(40 + i as u64);
        let draws: Vec<f64> = (0..cumulant_samples).map(|_| stats::complex_chisq_sample(cn, &mut rng).ln()).collect();
        let s = DistributionSummary::from_samples(&draws)?;
        let exact = stats::log_chisq_moments(cn)?;
        report.stat(Statistic::mean(format!("log_chisq_n{cn:02}_mean"), s.mean, s.mean_se));
        report.stat(Statistic::point(format!("log_chisq_n{cn:02}_mean_exact"), exact.mean));
        report.stat(Statistic::mean(format!("log_chisq_n{cn:02}_variance"), s.variance, s.variance_se));
        report.stat(Statistic::point(format!("log_chisq_n{cn:02}_variance_exact"), exact.variance));
        report.check(Check::new(
            format!("log_chisq_n{cn:02}_mean_matches_closed_form"),
            (s.mean - exact.mean).abs() / s.mean_se,
            Comparison::AtMost,
            tol.sigma,
            "tolerances.sigma",
        ));
        report.check(Check::new(
            format!("log_chisq_n{cn:02}_variance_matches_closed_form"),
            (s.variance - exact.variance).abs() / s.variance_se,
            Comparison::AtMost,
            tol.sigma,
            "tolerances.sigma",
        ));
    }
    let mut ratios = Vec::new();
    for bn in [10usize, 100, 1_000, 10_000] {
        let r = stats::berry_esseen_ratio(bn)?;
        report.stat(Statistic::point(format!("berry_esseen_ratio_n{bn:05}"), r));
        ratios.push(r);
    }
    let worst_rise = ratios.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    report.check(Check::new(
        "berry_esseen_ratio_decreasing",
        worst_rise,
        Comparison::Below,
        0.0,
        "exact:decreasing",
    ));
    Ok(report)
}

fn run_sample(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let samples = config.count(config.samples, "samples")?;
    let m = config.m_required()?;
    let n = config.n;
    if n == 0 {
        return invalid("sample needs n >= 1");
    }
    let kind = config.kind.unwrap_or(SamplerKind::BosonExact);
    let root = RngStream::new(config.seed, 0);
    let a = haar_column_orthonormal(m, n, &mut root.substream(0))?;
    sample_with_matrix(config, &a, kind, samples)
}

/// `sample` with a caller-supplied matrix in place of a Haar draw.
pub fn run_sample_with_matrix(config: &ExperimentConfig, a: &ComplexMatrix) -> Result<ExperimentOutput> {
    let config = config.resolved();
    let samples = config.count(config.samples, "samples")?;
    if config.m.is_some_and(|m| m != a.rows()) || config.n != a.cols() {
        return invalid(format!(
            "matrix is {}x{} but the config asks for m={:?}, n={}",
            a.rows(),
            a.cols(),
            config.m,
            config.n
        ));
    }
    let kind = config.kind.unwrap_or(SamplerKind::BosonExact);
    sample_with_matrix(&config, a, kind, samples)
}

fn sample_with_matrix(
    config: &ExperimentConfig,
    a: &ComplexMatrix,
    kind: SamplerKind,
    samples: usize,
) -> Result<ExperimentOutput> {
    let (m, n) = (a.rows(), a.cols());
    let mut sampler: Box<dyn OutcomeSampler> = match kind {
        SamplerKind::BosonExact => samplers::boson_sampler(a, config.boson_method.unwrap_or(BosonMethod::Auto))?,
        SamplerKind::Fermion => Box::new(FermionSampler::new(a)?),
        SamplerKind::MockupClassical => Box::new(ClassicalMockupSampler::new(a)?),
        SamplerKind::MockupRownorm => Box::new(RowNormMockupSampler::new(a)?),
        SamplerKind::Uniform => Box::new(UniformSampler::new(OutcomeSpace::collision_free(m, n))?),
        SamplerKind::LossyBoson => Box::new(LossyBosonSampler::new(a, config.loss.unwrap_or(0.0))?),
    };
    let mut rng = RngStream::new(config.seed, 0).substream(1);
    let batch = sample_batch(sampler.as_mut(), samples, &mut rng, Some(a.content_hash()))?;
    let mut report = ExperimentReport::new(config);
    let collisions = batch.outcomes.iter().filter(|s| !s.is_collision_free()).count();
    report.stat(Statistic::point("samples", batch.len() as f64));
    report.stat(Statistic::point("collision_fraction", collisions as f64 / batch.len() as f64));
    report.note(format!("matrix sha256 {}", a.content_hash()));
    let mut jsonl = Vec::new();
    batch.write_jsonl(&mut jsonl)?;
    let mut matrix_json = a.to_json()?;
    matrix_json.push('\n');
    Ok(ExperimentOutput {
        report,
        artifacts: vec![
            Artifact { suffix: "_samples.jsonl".into(), contents: String::from_utf8(jsonl).expect("JSON is UTF-8") },
            Artifact { suffix: "_matrix.json".into(), contents: matrix_json },
        ],
    })
}

/// Correlation and conditional-mean test of the independence of `Q` and `R*`
/// over Gaussian `n x n` matrices.
pub fn q_rstar_independence(n: usize, draws: usize, seed: u64, sigma: f64) -> Result<Vec<Check>> {
    if draws < 100 {
        return invalid("independence check needs at least 100 draws");
    }
    check_photons(n, estimators::MAX_PERMANENT_PHOTONS, "independence check")?;
    let mut rng = RngStream::new(seed, 0).substream(0);
    let mut q = Vec::with_capacity(draws);
    let mut r = Vec::with_capacity(draws);
    for _ in 0..draws {
        let x = sample_gaussian_matrix(n, n, &mut rng)?;
        q.push(estimators::q_statistic(&x)?);
        r.push(estimators::r_star(&x)?);
    }
    let corr = stats::pearson_correlation(&q, &r)?;
    let corr_se = 1.0 / (draws as f64).sqrt();
    let (hi, lo): (Vec<(f64, f64)>, Vec<(f64, f64)>) = q.iter().copied().zip(r.iter().copied()).partition(|&(_, r)| r >= 1.0);
    let hi_q: Vec<f64> = hi.iter().map(|p| p.0).collect();
    let lo_q: Vec<f64> = lo.iter().map(|p| p.0).collect();
    let (sh, sl) = (DistributionSummary::from_samples(&hi_q)?, DistributionSummary::from_samples(&lo_q)?);
    let diff_se = (sh.mean_se.powi(2) + sl.mean_se.powi(2)).sqrt();
    Ok(vec![
        Check::new("q_rstar_uncorrelated", corr.abs() / corr_se, Comparison::AtMost, sigma, "tolerances.sigma"),
        Check::new(
            "q_conditional_mean_independent_of_rstar_side",
            (sh.mean - sl.mean).abs() / diff_se,
            Comparison::AtMost,
            sigma,
            "tolerances.sigma",
        ),
    ])
}

/// Checks `Pr_H[R* >= 1] - Pr_N[R* >= 1] = E_N|R* - 1| / 2`, estimating the
/// tilted probability by self-normalized importance weights `P(X)`.
///
/// Returns the check (difference in delta-method standard errors) and the
/// two sides.
pub fn tilted_gap_identity(n: usize, draws: usize, seed: u64, sigma: f64) -> Result<(Check, f64, f64)> {
    if draws < 100 {
        return invalid("identity check needs at least 100 draws");
    }
    check_photons(n, linalg::MAX_RYSER_DIM, "identity check")?;
    let mut rng = RngStream::new(seed, 0).substream(0);
    let mut w = Vec::with_capacity(draws);
    let mut acc = Vec::with_capacity(draws);
    let mut dev = Vec::with_capacity(draws);
    for _ in 0..draws {
        let x = sample_gaussian_matrix(n, n, &mut rng)?;
        let lr = estimators::ln_r_star(&x)?;
        w.push(estimators::p_statistic(&x)?);
        acc.push(if lr >= 0.0 { 1.0 } else { 0.0 });
        dev.push(0.5 * (lr.exp() - 1.0).abs());
    }
    let w_bar = stats::mean(&w);
    let wa: Vec<f64> = w.iter().zip(&acc).map(|(w, a)| w * a).collect();
    let h = stats::mean(&wa) / w_bar;
    let a_bar = stats::mean(&acc);
    let d_bar = stats::mean(&dev);
    let lhs = h - a_bar;
    // Influence function of (weighted mean - plain mean - half deviation).
    let psi: Vec<f64> = (0..draws).map(|i| w[i] * (acc[i] - h) / w_bar - (acc[i] - a_bar) - (dev[i] - d_bar)).collect();
    let se = DistributionSummary::from_samples(&psi)?.mean_se;
    let check = Check::new(
        "tilted_acceptance_gap_equals_half_mean_deviation",
        (lhs - d_bar).abs() / se,
        Comparison::AtMost,
        sigma,
        "tolerances.sigma",
    );
    Ok((check, lhs, d_bar))
}
