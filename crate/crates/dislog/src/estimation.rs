//! Maximum likelihood estimation for uncensored and right-censored counts.
//!
//! The log-likelihood of grouped count data is a sum of log mass values; a
//! right-censored observation at `x` contributes the log of the survival
//! mass it is known to carry. Score and Hessian are analytic: both boundary
//! CDF evaluations of each mass difference are differentiated through the
//! kernel density and its derivative, which keeps quasi-Newton fitting cheap
//! and gives observed-information standard errors for free.
//!
//! Optimization runs over `(ln λ, ln φ)` so positivity never binds; with a
//! fixed power parameter the search is one-dimensional in `ln λ`. Kernel
//! extra parameters are selected by profiling: fit at every grid point, keep
//! the best.

use crate::distribution::{DiscreteLogSymmetric, Theta};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::optim;

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Probability floor inside logarithms; keeps line searches finite when the
/// optimizer probes absurd parameter values.
const LOG_FLOOR: f64 = 1e-300;

/// Grouped uncensored counts: distinct value to frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UncensoredSample {
    counts: BTreeMap<u64, u64>,
    n: u64,
}

impl UncensoredSample {
    pub fn from_values(values: &[u64]) -> Result<UncensoredSample> {
        if values.is_empty() {
            return Err(Error::Validation("sample is empty".to_string()));
        }
        let mut counts = BTreeMap::new();
        for &v in values {
            *counts.entry(v).or_insert(0u64) += 1;
        }
        Ok(UncensoredSample { n: values.len() as u64, counts })
    }

    /// Build from `(value, frequency)` pairs; duplicate values are rejected.
    pub fn from_counts<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Result<UncensoredSample> {
        let mut counts = BTreeMap::new();
        let mut n = 0u64;
        for (value, freq) in pairs {
            if freq == 0 {
                return Err(Error::Validation(format!(
                    "frequency for value {value} must be positive"
                )));
            }
            if counts.insert(value, freq).is_some() {
                return Err(Error::Validation(format!("duplicate value {value}")));
            }
            n += freq;
        }
        if n == 0 {
            return Err(Error::Validation("sample is empty".to_string()));
        }
        Ok(UncensoredSample { counts, n })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&x, &w)| (x, w))
    }

    pub fn max_value(&self) -> u64 {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    pub fn frequency(&self, value: u64) -> u64 {
        self.counts.get(&value).copied().unwrap_or(0)
    }

    /// Smallest value whose cumulative frequency reaches half the sample.
    pub fn median(&self) -> u64 {
        let half = self.n.div_ceil(2);
        let mut cum = 0;
        for (&x, &w) in &self.counts {
            cum += w;
            if cum >= half {
                return x;
            }
        }
        self.max_value()
    }
}

/// One grouped row of right-censored data at a distinct observed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CensoredRow {
    pub value: u64,
    pub events: u64,
    pub censored: u64,
}

/// Grouped right-censored counts, strictly increasing in the observed value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensoredSample {
    rows: Vec<CensoredRow>,
}

impl CensoredSample {
    pub fn new(rows: Vec<CensoredRow>) -> Result<CensoredSample> {
        if rows.is_empty() {
            return Err(Error::Validation("censored sample is empty".to_string()));
        }
        for pair in rows.windows(2) {
            if pair[1].value <= pair[0].value {
                return Err(Error::Validation(format!(
                    "values must be strictly increasing, got {} after {}",
                    pair[1].value, pair[0].value
                )));
            }
        }
        if let Some(bad) = rows.iter().find(|r| r.events + r.censored == 0) {
            return Err(Error::Validation(format!(
                "row at value {} carries no observations",
                bad.value
            )));
        }
        Ok(CensoredSample { rows })
    }

    /// Group individual `(value, is_event)` observations.
    pub fn from_observations<I: IntoIterator<Item = (u64, bool)>>(
        observations: I,
    ) -> Result<CensoredSample> {
        let mut grouped: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
        for (value, is_event) in observations {
            let entry = grouped.entry(value).or_insert((0, 0));
            if is_event {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
        CensoredSample::new(
            grouped
                .into_iter()
                .map(|(value, (events, censored))| CensoredRow { value, events, censored })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[CensoredRow] {
        &self.rows
    }

    pub fn n(&self) -> u64 {
        self.rows.iter().map(|r| r.events + r.censored).sum()
    }

    pub fn total_events(&self) -> u64 {
        self.rows.iter().map(|r| r.events).sum()
    }

    pub fn total_censored(&self) -> u64 {
        self.rows.iter().map(|r| r.censored).sum()
    }

    /// At-risk counts per row: all observations at or after each value.
    pub fn at_risk(&self) -> Vec<u64> {
        let mut risks = Vec::with_capacity(self.rows.len());
        let mut remaining = self.n();
        for row in &self.rows {
            risks.push(remaining);
            remaining -= row.events + row.censored;
        }
        risks
    }

    /// The equivalent uncensored sample when nothing is censored.
    pub fn to_uncensored(&self) -> Option<UncensoredSample> {
        if self.rows.iter().any(|r| r.censored > 0) {
            return None;
        }
        UncensoredSample::from_counts(
            self.rows.iter().filter(|r| r.events > 0).map(|r| (r.value, r.events)),
        )
        .ok()
    }

    pub fn median_value(&self) -> u64 {
        let half = self.n().div_ceil(2);
        let mut cum = 0;
        for row in &self.rows {
            cum += row.events + row.censored;
            if cum >= half {
                return row.value;
            }
        }
        self.rows.last().map(|r| r.value).unwrap_or(0)
    }
}

/// Either kind of sample, as produced by dataset ingestion.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Uncensored(UncensoredSample),
    Censored(CensoredSample),
}

impl Dataset {
    pub fn n(&self) -> u64 {
        match self {
            Dataset::Uncensored(s) => s.n(),
            Dataset::Censored(s) => s.n(),
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, Dataset::Censored(_))
    }

    fn median_value(&self) -> u64 {
        match self {
            Dataset::Uncensored(s) => s.median(),
            Dataset::Censored(s) => s.median_value(),
        }
    }

    /// Weighted variance of `ln(x + 1)` over all observed values.
    fn log1p_variance(&self) -> f64 {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut n = 0.0;
        let mut push = |x: u64, w: u64| {
            let v = (x as f64 + 1.0).ln();
            let w = w as f64;
            sum += w * v;
            sum_sq += w * v * v;
            n += w;
        };
        match self {
            Dataset::Uncensored(s) => {
                for (x, w) in s.iter() {
                    push(x, w);
                }
            }
            Dataset::Censored(s) => {
                for r in s.rows() {
                    push(r.value, r.events + r.censored);
                }
            }
        }
        (sum_sq / n - (sum / n).powi(2)).max(0.0)
    }
}

/// What a censored observation at `x` is taken to mean in the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CensoringConvention {
    /// The subject survived at least to `x`: contributes `P(X >= x)`.
    #[default]
    SurvivalAtOrBeyond,
    /// The subject survived strictly beyond `x`: contributes `P(X > x)`.
    /// Available for sensitivity analysis against the default.
    SurvivalBeyond,
}

/// First and second derivatives of the boundary transform and kernel CDF at
/// one log-transformed integer boundary.
struct BoundaryEval {
    /// d a / d(λ, φ)
    da: [f64; 2],
    /// d²a for (λλ, λφ, φφ)
    d2a: [f64; 3],
    /// G'(b) = g(b²) / Z
    pdf: f64,
    /// G''(b) = 2 b g'(b²) / Z
    pdf_deriv: f64,
}

fn boundary_eval(dist: &DiscreteLogSymmetric, boundary: f64) -> BoundaryEval {
    let theta = dist.theta();
    let (scale, power) = (theta.scale(), theta.power());
    let sqrt_power = power.sqrt();
    let kernel = dist.kernel();
    let u = boundary * boundary;
    let partition = kernel.partition_constant();
    BoundaryEval {
        da: [-1.0 / (scale * sqrt_power), -boundary / (2.0 * power)],
        d2a: [
            1.0 / (scale * scale * sqrt_power),
            1.0 / (2.0 * scale * power * sqrt_power),
            0.75 * boundary / (power * power),
        ],
        pdf: kernel.density(u).expect("squared boundary is nonnegative") / partition,
        pdf_deriv: 2.0 * boundary * kernel.density_deriv(u).expect("nonnegative") / partition,
    }
}

/// Mass and its parameter derivatives at one support point.
struct PointDerivatives {
    mass: f64,
    dmass: [f64; 2],
    d2mass: [f64; 3],
}

fn point_derivatives(dist: &DiscreteLogSymmetric, x: u64) -> PointDerivatives {
    let mut dmass = [0.0; 2];
    let mut d2mass = [0.0; 3];
    // The lower boundary at x = 0 sits at -inf where the CDF is identically
    // zero; its parameter derivatives vanish and the term is skipped.
    for (j, sign) in [(0u64, -1.0), (1u64, 1.0)] {
        if x + j == 0 {
            continue;
        }
        let boundary = dist.theta().standardize_boundary(x + j);
        let be = boundary_eval(dist, boundary);
        for t in 0..2 {
            dmass[t] += sign * be.pdf * be.da[t];
        }
        d2mass[0] += sign * (be.pdf * be.d2a[0] + be.pdf_deriv * be.da[0] * be.da[0]);
        d2mass[1] += sign * (be.pdf * be.d2a[1] + be.pdf_deriv * be.da[0] * be.da[1]);
        d2mass[2] += sign * (be.pdf * be.d2a[2] + be.pdf_deriv * be.da[1] * be.da[1]);
    }
    PointDerivatives { mass: dist.pmf(x), dmass, d2mass }
}

/// Survival mass and derivatives used by a censored term.
fn survival_derivatives(
    dist: &DiscreteLogSymmetric,
    x: u64,
    convention: CensoringConvention,
) -> PointDerivatives {
    let (mass, boundary_index) = match convention {
        CensoringConvention::SurvivalAtOrBeyond => (dist.survival_inclusive(x), x),
        CensoringConvention::SurvivalBeyond => {
            (dist.reliability(x as f64).expect("x >= 0"), x + 1)
        }
    };
    if boundary_index == 0 {
        // P(X >= 0) = 1 identically in the parameters.
        return PointDerivatives { mass: 1.0, dmass: [0.0; 2], d2mass: [0.0; 3] };
    }
    let boundary = dist.theta().standardize_boundary(boundary_index);
    let be = boundary_eval(dist, boundary);
    PointDerivatives {
        mass,
        dmass: [-be.pdf * be.da[0], -be.pdf * be.da[1]],
        d2mass: [
            -(be.pdf * be.d2a[0] + be.pdf_deriv * be.da[0] * be.da[0]),
            -(be.pdf * be.d2a[1] + be.pdf_deriv * be.da[0] * be.da[1]),
            -(be.pdf * be.d2a[2] + be.pdf_deriv * be.da[1] * be.da[1]),
        ],
    }
}

/// Log-likelihood of grouped uncensored counts.
pub fn loglik(sample: &UncensoredSample, dist: &DiscreteLogSymmetric) -> f64 {
    sample
        .iter()
        .map(|(x, w)| w as f64 * dist.pmf(x).max(LOG_FLOOR).ln())
        .sum()
}

/// Analytic score (gradient in `(λ, φ)`) of the uncensored log-likelihood.
pub fn score(sample: &UncensoredSample, dist: &DiscreteLogSymmetric) -> [f64; 2] {
    let mut grad = [0.0; 2];
    for (x, w) in sample.iter() {
        let pd = point_derivatives(dist, x);
        let mass = pd.mass.max(LOG_FLOOR);
        for t in 0..2 {
            grad[t] += w as f64 * pd.dmass[t] / mass;
        }
    }
    grad
}

/// Analytic Hessian (in `(λ, φ)`) of the uncensored log-likelihood.
pub fn hessian(sample: &UncensoredSample, dist: &DiscreteLogSymmetric) -> [[f64; 2]; 2] {
    let mut packed = [0.0; 3];
    for (x, w) in sample.iter() {
        let pd = point_derivatives(dist, x);
        let mass = pd.mass.max(LOG_FLOOR);
        let w = w as f64;
        packed[0] += w * (pd.d2mass[0] / mass - pd.dmass[0] * pd.dmass[0] / (mass * mass));
        packed[1] += w * (pd.d2mass[1] / mass - pd.dmass[0] * pd.dmass[1] / (mass * mass));
        packed[2] += w * (pd.d2mass[2] / mass - pd.dmass[1] * pd.dmass[1] / (mass * mass));
    }
    [[packed[0], packed[1]], [packed[1], packed[2]]]
}

/// Log-likelihood of grouped right-censored counts.
///
/// Events at `x` contribute `ln p(x)`; censored observations contribute the
/// log of the survival mass named by `convention` (the default counts the
/// observed value itself as still attainable).
pub fn loglik_censored(
    sample: &CensoredSample,
    dist: &DiscreteLogSymmetric,
    convention: CensoringConvention,
) -> f64 {
    sample
        .rows()
        .iter()
        .map(|row| {
            let mut term = 0.0;
            if row.events > 0 {
                term += row.events as f64 * dist.pmf(row.value).max(LOG_FLOOR).ln();
            }
            if row.censored > 0 {
                let surv = match convention {
                    CensoringConvention::SurvivalAtOrBeyond => dist.survival_inclusive(row.value),
                    CensoringConvention::SurvivalBeyond => {
                        dist.reliability(row.value as f64).expect("value >= 0")
                    }
                };
                term += row.censored as f64 * surv.max(LOG_FLOOR).ln();
            }
            term
        })
        .sum()
}

/// The censored log-likelihood rewritten through the discrete hazard:
/// `Σ_k d_k ln H(x_k) + (d_k + q_k) Σ_{y<x_k} ln[1 - H(y)]`.
///
/// Algebraically identical to [`loglik_censored`] under the default
/// convention, because the survival product one step back equals
/// `P(X >= x)`; exposed as an independent evaluation route.
pub fn loglik_censored_hazard_form(sample: &CensoredSample, dist: &DiscreteLogSymmetric) -> f64 {
    let max_value = sample.rows().last().map(|r| r.value).unwrap_or(0);
    let mut prefix = Vec::with_capacity(max_value as usize + 2);
    prefix.push(0.0);
    for y in 0..=max_value {
        let h = dist.hazard(y);
        prefix.push(prefix[y as usize] + (1.0 - h).max(LOG_FLOOR).ln());
    }
    sample
        .rows()
        .iter()
        .map(|row| {
            let x = row.value as usize;
            let mut term = (row.events + row.censored) as f64 * prefix[x];
            if row.events > 0 {
                term += row.events as f64 * dist.hazard(row.value).max(LOG_FLOOR).ln();
            }
            term
        })
        .sum()
}

/// Analytic score of the censored log-likelihood.
pub fn score_censored(
    sample: &CensoredSample,
    dist: &DiscreteLogSymmetric,
    convention: CensoringConvention,
) -> [f64; 2] {
    let mut grad = [0.0; 2];
    for row in sample.rows() {
        if row.events > 0 {
            let pd = point_derivatives(dist, row.value);
            let mass = pd.mass.max(LOG_FLOOR);
            for t in 0..2 {
                grad[t] += row.events as f64 * pd.dmass[t] / mass;
            }
        }
        if row.censored > 0 {
            let sd = survival_derivatives(dist, row.value, convention);
            let mass = sd.mass.max(LOG_FLOOR);
            for t in 0..2 {
                grad[t] += row.censored as f64 * sd.dmass[t] / mass;
            }
        }
    }
    grad
}

/// Analytic Hessian of the censored log-likelihood.
pub fn hessian_censored(
    sample: &CensoredSample,
    dist: &DiscreteLogSymmetric,
    convention: CensoringConvention,
) -> [[f64; 2]; 2] {
    let mut packed = [0.0; 3];
    let mut accumulate = |weight: f64, pd: &PointDerivatives| {
        let mass = pd.mass.max(LOG_FLOOR);
        packed[0] += weight * (pd.d2mass[0] / mass - pd.dmass[0] * pd.dmass[0] / (mass * mass));
        packed[1] += weight * (pd.d2mass[1] / mass - pd.dmass[0] * pd.dmass[1] / (mass * mass));
        packed[2] += weight * (pd.d2mass[2] / mass - pd.dmass[1] * pd.dmass[1] / (mass * mass));
    };
    for row in sample.rows() {
        if row.events > 0 {
            accumulate(row.events as f64, &point_derivatives(dist, row.value));
        }
        if row.censored > 0 {
            accumulate(
                row.censored as f64,
                &survival_derivatives(dist, row.value, convention),
            );
        }
    }
    [[packed[0], packed[1]], [packed[1], packed[2]]]
}

/// Expected (Fisher) information per observation, summed over the support
/// until the geometric remainder bound drops below `tail_tol`.
pub fn fisher_information(dist: &DiscreteLogSymmetric, tail_tol: f64) -> Result<[[f64; 2]; 2]> {
    const CAP: u64 = 5_000_000;
    const WINDOW: usize = 10;
    let mut info = [0.0; 3];
    let mut recent = [f64::INFINITY; WINDOW];
    let mut block_sum = 0.0;
    let mut prev_block: Option<f64> = None;
    let mut strikes = 0;
    let mut next_block_end = 1024u64;

    for x in 0..CAP {
        let pd = point_derivatives(dist, x);
        let mass = pd.mass.max(LOG_FLOOR);
        let contrib = [
            pd.dmass[0] * pd.dmass[0] / mass - pd.d2mass[0],
            pd.dmass[0] * pd.dmass[1] / mass - pd.d2mass[1],
            pd.dmass[1] * pd.dmass[1] / mass - pd.d2mass[2],
        ];
        for t in 0..3 {
            info[t] += contrib[t];
        }
        let magnitude = contrib.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        block_sum += magnitude;

        if dist.survival_inclusive(x + 1) == 0.0 {
            return Ok([[info[0], info[1]], [info[1], info[2]]]);
        }
        let window_ago = recent[x as usize % WINDOW];
        recent[x as usize % WINDOW] = magnitude;
        if magnitude < tail_tol && window_ago.is_finite() && magnitude < window_ago {
            let ratio = (magnitude / window_ago).powf(1.0 / WINDOW as f64);
            if ratio < 1.0 && magnitude * ratio / (1.0 - ratio) < tail_tol {
                return Ok([[info[0], info[1]], [info[1], info[2]]]);
            }
        }
        if x + 1 == next_block_end {
            if let Some(prev) = prev_block {
                if block_sum > tail_tol && block_sum >= 0.9 * prev {
                    strikes += 1;
                    if strikes >= 3 {
                        return Err(Error::Series(format!(
                            "information series is not converging near x = {x}"
                        )));
                    }
                } else {
                    strikes = 0;
                }
            }
            prev_block = Some(block_sum);
            block_sum = 0.0;
            next_block_end *= 2;
        }
    }
    Err(Error::Series(format!(
        "information series still above tolerance after {CAP} terms"
    )))
}

/// Grid point of a profile-likelihood sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ProfilePoint {
    pub xi: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
}

/// A completed maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub kernel: KernelSpec,
    pub theta: Theta,
    pub se_scale: Option<f64>,
    pub se_power: Option<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Observed Hessian of the log-likelihood at the optimum, in `(λ, φ)`.
    pub hessian: [[f64; 2]; 2],
    /// Free parameters counted by the information criteria: the optimized
    /// scale/power parameters plus the kernel extra parameters, which are
    /// treated as profile-estimated model parameters.
    pub k_free: usize,
    pub n: u64,
    pub power_fixed: bool,
    /// The profile curve when this fit came from a grid sweep.
    pub profile: Option<Vec<ProfilePoint>>,
}

impl FitResult {
    pub fn distribution(&self) -> DiscreteLogSymmetric {
        DiscreteLogSymmetric::new(self.theta, self.kernel)
    }
}

impl Serialize for FitResult {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            kernel: &'a str,
            xi: &'a [f64],
            lambda: f64,
            phi: f64,
            se_lambda: Option<f64>,
            se_phi: Option<f64>,
            loglik: f64,
            aic: f64,
            bic: f64,
            converged: bool,
            iterations: usize,
        }
        Wire {
            kernel: self.kernel.family().name(),
            xi: self.kernel.xi(),
            lambda: self.theta.scale(),
            phi: self.theta.power(),
            se_lambda: self.se_scale,
            se_phi: self.se_power,
            loglik: self.loglik,
            aic: self.aic,
            bic: self.bic,
            converged: self.converged,
            iterations: self.iterations,
        }
        .serialize(serializer)
    }
}

/// Controls for a single fit.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub init: Option<Theta>,
    /// Hold the power parameter fixed at this value (fit the scale only).
    pub fixed_power: Option<f64>,
    pub censoring: CensoringConvention,
    pub max_iterations: usize,
    /// Convergence tolerance on the sup-norm of the gradient in the
    /// log-reparameterized space.
    pub gradient_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            init: None,
            fixed_power: None,
            censoring: CensoringConvention::default(),
            max_iterations: 500,
            gradient_tol: 1e-6,
        }
    }
}

fn initial_theta(data: &Dataset, options: &FitOptions) -> Result<Theta> {
    if let Some(init) = options.init {
        return Ok(init);
    }
    let scale = data.median_value() as f64 + 0.5;
    let power = match options.fixed_power {
        Some(p) => p,
        None => data.log1p_variance().clamp(0.05, 50.0),
    };
    Theta::new(scale, power)
}

fn eval_loglik(
    data: &Dataset,
    dist: &DiscreteLogSymmetric,
    convention: CensoringConvention,
) -> f64 {
    match data {
        Dataset::Uncensored(s) => loglik(s, dist),
        Dataset::Censored(s) => loglik_censored(s, dist, convention),
    }
}

fn eval_score(
    data: &Dataset,
    dist: &DiscreteLogSymmetric,
    convention: CensoringConvention,
) -> [f64; 2] {
    match data {
        Dataset::Uncensored(s) => score(s, dist),
        Dataset::Censored(s) => score_censored(s, dist, convention),
    }
}

fn eval_hessian(
    data: &Dataset,
    dist: &DiscreteLogSymmetric,
    convention: CensoringConvention,
) -> [[f64; 2]; 2] {
    match data {
        Dataset::Uncensored(s) => hessian(s, dist),
        Dataset::Censored(s) => hessian_censored(s, dist, convention),
    }
}

/// Observed values carrying zero probability mass under `dist`.
fn infeasible_points(
    data: &Dataset,
    dist: &DiscreteLogSymmetric,
    convention: CensoringConvention,
) -> Vec<u64> {
    let mut bad = Vec::new();
    match data {
        Dataset::Uncensored(s) => {
            for (x, _) in s.iter() {
                if dist.pmf(x) <= LOG_FLOOR {
                    bad.push(x);
                }
            }
        }
        Dataset::Censored(s) => {
            for row in s.rows() {
                let zero_mass = row.events > 0 && dist.pmf(row.value) <= LOG_FLOOR;
                let zero_surv = row.censored > 0 && {
                    let surv = match convention {
                        CensoringConvention::SurvivalAtOrBeyond => {
                            dist.survival_inclusive(row.value)
                        }
                        CensoringConvention::SurvivalBeyond => {
                            dist.reliability(row.value as f64).unwrap_or(0.0)
                        }
                    };
                    surv <= LOG_FLOOR
                };
                if zero_mass || zero_surv {
                    bad.push(row.value);
                }
            }
        }
    }
    bad
}

/// Maximum-likelihood fit of one kernel to the data.
///
/// Runs BFGS over `(ln λ, ln φ)` (or `ln λ` alone with a fixed power),
/// converging when the reparameterized gradient sup-norm drops below the
/// tolerance. Standard errors are the square roots of the diagonal of the
/// inverse negative observed Hessian in the original parameterization; when
/// that matrix is not invertible the errors are reported absent and the fit
/// is still returned. Non-convergence within the iteration budget also
/// returns a result, flagged through `converged`.
pub fn fit(data: &Dataset, kernel: KernelSpec, options: &FitOptions) -> Result<FitResult> {
    if data.n() == 0 {
        return Err(Error::Validation("cannot fit an empty sample".to_string()));
    }
    let init = initial_theta(data, options)?;
    let convention = options.censoring;
    let dims = if options.fixed_power.is_some() { 1 } else { 2 };

    let theta_of = |v: &[f64]| -> Theta {
        let scale = v[0].exp().max(1e-12);
        let power =
            if dims == 2 { v[1].exp().max(1e-12) } else { options.fixed_power.unwrap() };
        Theta::new(scale, power).expect("positive by construction")
    };

    let objective = |v: &[f64]| -> (f64, Vec<f64>) {
        let theta = theta_of(v);
        let dist = DiscreteLogSymmetric::new(theta, kernel);
        let ll = eval_loglik(data, &dist, convention);
        let grad = eval_score(data, &dist, convention);
        let mut reparam = vec![-grad[0] * theta.scale()];
        if dims == 2 {
            reparam.push(-grad[1] * theta.power());
        }
        (-ll, reparam)
    };

    let mut start = vec![init.scale().ln()];
    if dims == 2 {
        start.push(init.power().ln());
    }
    let opt = optim::minimize_bfgs(objective, &start, options.gradient_tol, options.max_iterations);

    let theta = theta_of(&opt.x);
    let dist = DiscreteLogSymmetric::new(theta, kernel);
    let bad_points = infeasible_points(data, &dist, convention);
    if !bad_points.is_empty() {
        return Err(Error::FitInfeasible(format!(
            "zero probability mass at observed value(s) {bad_points:?} for kernel {}",
            kernel.family()
        )));
    }

    let ll = eval_loglik(data, &dist, convention);
    let hess = eval_hessian(data, &dist, convention);
    let (se_scale, se_power) = standard_errors(&hess, options.fixed_power.is_some());

    let k_free = dims + kernel.xi().len();
    let n = data.n() as f64;
    Ok(FitResult {
        kernel,
        theta,
        se_scale,
        se_power,
        loglik: ll,
        aic: -2.0 * ll + 2.0 * k_free as f64,
        bic: -2.0 * ll + k_free as f64 * n.ln(),
        converged: opt.converged,
        iterations: opt.iterations,
        gradient_norm: opt.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs())),
        hessian: hess,
        k_free,
        n: data.n(),
        power_fixed: options.fixed_power.is_some(),
        profile: None,
    })
}

/// Wald standard errors from the observed Hessian of the log-likelihood.
fn standard_errors(hess: &[[f64; 2]; 2], power_fixed: bool) -> (Option<f64>, Option<f64>) {
    if power_fixed {
        // Information is 1x1 in the scale parameter only.
        let info = -hess[0][0];
        return (if info > 0.0 { Some((1.0 / info).sqrt()) } else { None }, None);
    }
    let (a, b, d) = (-hess[0][0], -hess[0][1], -hess[1][1]);
    let det = a * d - b * b;
    if det > 0.0 && a > 0.0 {
        (Some((d / det).sqrt()), Some((a / det).sqrt()))
    } else {
        (None, None)
    }
}

/// Profile-likelihood selection of kernel extra parameters.
///
/// Fits every grid point (in parallel) and returns the fit with the highest
/// log-likelihood, carrying the whole profile curve. Grid points whose fits
/// fail are recorded in the curve with a NaN log-likelihood; if everything
/// fails the errors are aggregated.
pub fn profile_fit(
    data: &Dataset,
    family: KernelFamily,
    xi_grid: &[Vec<f64>],
    options: &FitOptions,
) -> Result<FitResult> {
    if xi_grid.is_empty() {
        return Err(Error::Validation("profile grid is empty".to_string()));
    }
    let kernels: Vec<KernelSpec> = xi_grid
        .iter()
        .map(|xi| KernelSpec::new(family, xi))
        .collect::<Result<_>>()?;

    let fits: Vec<Result<FitResult>> = kernels
        .par_iter()
        .map(|kernel| fit(data, *kernel, options))
        .collect();

    let profile: Vec<ProfilePoint> = xi_grid
        .iter()
        .zip(&fits)
        .map(|(xi, outcome)| match outcome {
            Ok(f) => ProfilePoint { xi: xi.clone(), loglik: f.loglik, converged: f.converged },
            Err(_) => ProfilePoint { xi: xi.clone(), loglik: f64::NAN, converged: false },
        })
        .collect();

    let mut best: Option<FitResult> = None;
    let mut failures = Vec::new();
    for outcome in fits {
        match outcome {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.loglik > b.loglik) {
                    best = Some(f);
                }
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    match best {
        Some(mut f) => {
            f.profile = Some(profile);
            Ok(f)
        }
        None => Err(Error::Optimization(format!(
            "every grid fit failed; first errors: {:?}",
            &failures[..failures.len().min(3)]
        ))),
    }
}

/// Default extra-parameter grids per family, mirroring the precision of the
/// reported estimates: integer degrees of freedom for the Student-t variants
/// and one-decimal steps elsewhere.
pub fn default_xi_grid(family: KernelFamily) -> Vec<Vec<f64>> {
    match family {
        KernelFamily::Normal => vec![vec![]],
        KernelFamily::StudentT => (1..=100).map(|k| vec![k as f64]).collect(),
        KernelFamily::PowerExponential => (-9..=10).map(|k| vec![k as f64 / 10.0]).collect(),
        KernelFamily::ContaminatedNormal => {
            let mut grid = Vec::new();
            for a in 1..=9 {
                for b in 1..=9 {
                    grid.push(vec![a as f64 / 10.0, b as f64 / 10.0]);
                }
            }
            grid
        }
        KernelFamily::ExtendedBs => (1..=30).map(|k| vec![k as f64 / 10.0]).collect(),
        KernelFamily::ExtendedBsT => {
            let mut grid = Vec::new();
            for a in 1..=30 {
                for df in 1..=100 {
                    grid.push(vec![a as f64 / 10.0, df as f64]);
                }
            }
            grid
        }
    }
}
