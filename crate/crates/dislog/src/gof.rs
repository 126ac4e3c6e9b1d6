//! Goodness-of-fit checks, Kaplan–Meier estimation, and survival tables.
//!
//! Discrete data need discrete test constructions: the chi-square test bins
//! the support greedily from zero so every closed cell carries an expected
//! count of at least 5 (the last cell is open-ended), and the Cramér–von
//! Mises statistic sums squared CDF discrepancies weighted by the fitted
//! mass, with its null distribution obtained by parametric bootstrap
//! (refitting each replicate).

use crate::distribution::DiscreteLogSymmetric;
use crate::error::{Error, Result};
use crate::estimation::{
    fit, CensoredSample, Dataset, FitOptions, FitResult, UncensoredSample,
};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma_ur;

/// One chi-square cell: the value range `[lo, hi]` (upper end open when
/// `hi` is `None`), its observed count, and its expected count.
#[derive(Debug, Clone, Serialize)]
pub struct Bin {
    pub lo: u64,
    pub hi: Option<u64>,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    pub bins: Vec<Bin>,
}

/// Pearson chi-square test of a fitted model against uncensored counts.
///
/// Cells are built greedily from `x = 0` upward until each reaches an
/// expected count of 5; once the remaining tail expectation falls under 10
/// the rest of the support becomes one open-ended cell. Degrees of freedom
/// are `cells - 1 - k_free`, floored at 1. Fewer than three cells make the
/// test inapplicable.
pub fn chi_square_test(sample: &UncensoredSample, fit: &FitResult) -> Result<ChiSquareTest> {
    let dist = fit.distribution();
    let n = sample.n() as f64;
    let mut bins = Vec::new();
    let mut lo = 0u64;

    loop {
        let tail_mass = n * dist.survival_inclusive(lo);
        if tail_mass < 10.0 {
            let observed = sample.iter().filter(|&(x, _)| x >= lo).map(|(_, w)| w).sum();
            bins.push(Bin { lo, hi: None, observed, expected: tail_mass });
            break;
        }
        let mut expected = 0.0;
        let mut observed = 0;
        let mut hi = lo;
        loop {
            expected += n * dist.pmf(hi);
            observed += sample.frequency(hi);
            if expected >= 5.0 {
                break;
            }
            hi += 1;
            if hi > lo + 1_000_000 {
                return Err(Error::Numerical(
                    "chi-square binning failed to accumulate expected mass".to_string(),
                ));
            }
        }
        bins.push(Bin { lo, hi: Some(hi), observed, expected });
        lo = hi + 1;
    }

    if bins.len() < 3 {
        return Err(Error::Validation(format!(
            "chi-square test needs at least 3 cells, the binning produced {}",
            bins.len()
        )));
    }
    let statistic = chi_square_statistic(&bins);
    let dof = bins.len().saturating_sub(1 + fit.k_free).max(1);
    Ok(ChiSquareTest { statistic, p_value: chi_square_survival(statistic, dof), dof, bins })
}

/// `Σ (O - E)² / E` over the cells.
pub fn chi_square_statistic(bins: &[Bin]) -> f64 {
    bins.iter()
        .map(|b| {
            let diff = b.observed as f64 - b.expected;
            if b.expected > 0.0 { diff * diff / b.expected } else { 0.0 }
        })
        .sum()
}

/// Upper tail of the chi-square law with `dof` degrees of freedom.
pub fn chi_square_survival(statistic: f64, dof: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, statistic / 2.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct CvmTest {
    pub statistic: f64,
    pub p_value: f64,
    pub bootstrap_replicates: usize,
    pub failed_refits: usize,
    /// Set when more than 10% of bootstrap refits failed; the p-value is
    /// then based on the surviving replicates only.
    pub degraded: bool,
}

/// Discrete Cramér–von Mises statistic
/// `Σ_x [F_n(x) - F̂(x)]² p̂(x)` over `0..=max(sample)`.
pub fn cvm_statistic(sample: &UncensoredSample, dist: &DiscreteLogSymmetric) -> f64 {
    let max = sample.max_value();
    let counts: Vec<u64> = (0..=max).map(|x| sample.frequency(x)).collect();
    let cdf: Vec<f64> = (0..=max).map(|x| dist.cdf(x as f64).expect("x >= 0")).collect();
    let pmf: Vec<f64> = (0..=max).map(|x| dist.pmf(x)).collect();
    cvm_statistic_terms(&counts, sample.n(), &cdf, &pmf)
}

/// Statistic kernel on raw arrays; exact agreement of the empirical and
/// model CDFs gives exactly zero.
pub(crate) fn cvm_statistic_terms(counts: &[u64], n: u64, cdf: &[f64], pmf: &[f64]) -> f64 {
    let mut cum = 0u64;
    let mut stat = 0.0;
    for ((&c, &f_hat), &p_hat) in counts.iter().zip(cdf).zip(pmf) {
        cum += c;
        let f_n = cum as f64 / n as f64;
        stat += (f_n - f_hat) * (f_n - f_hat) * p_hat;
    }
    stat
}

/// Cramér–von Mises test with a parametric-bootstrap p-value.
///
/// Each replicate draws a fresh sample from the fitted model, refits the
/// same kernel (honoring a fixed power parameter), and recomputes the
/// statistic against its own refit. Replicate seeds derive deterministically
/// from `seed` by index, so the test is reproducible and replicates can run
/// concurrently.
pub fn cvm_test(
    sample: &UncensoredSample,
    fit_result: &FitResult,
    n_boot: usize,
    seed: u64,
) -> Result<CvmTest> {
    if n_boot < 200 {
        return Err(Error::Validation(format!(
            "bootstrap needs at least 200 replicates, got {n_boot}"
        )));
    }
    let dist = fit_result.distribution();
    let observed = cvm_statistic(sample, &dist);
    let n = sample.n() as usize;
    let options = FitOptions {
        fixed_power: fit_result.power_fixed.then(|| fit_result.theta.power()),
        ..FitOptions::default()
    };

    let replicate_stats: Vec<Option<f64>> = (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let rep_seed = seed.wrapping_add(b.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let values = dist.sample(n, rep_seed);
            let boot_sample = UncensoredSample::from_values(&values).ok()?;
            let refit = fit(
                &Dataset::Uncensored(boot_sample.clone()),
                fit_result.kernel,
                &options,
            )
            .ok()?;
            if !refit.converged {
                return None;
            }
            Some(cvm_statistic(&boot_sample, &refit.distribution()))
        })
        .collect();

    let successes: Vec<f64> = replicate_stats.iter().flatten().copied().collect();
    let failed = n_boot - successes.len();
    if successes.is_empty() {
        return Err(Error::Numerical("every bootstrap refit failed".to_string()));
    }
    let exceed = successes.iter().filter(|&&w| w >= observed).count();
    Ok(CvmTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (successes.len() + 1) as f64,
        bootstrap_replicates: successes.len(),
        failed_refits: failed,
        degraded: failed * 10 > n_boot,
    })
}

/// Combined goodness-of-fit report for an uncensored fit.
#[derive(Debug, Clone, Serialize)]
pub struct GofReport {
    pub chi2_stat: f64,
    pub chi2_pvalue: f64,
    pub cvm_stat: f64,
    pub cvm_pvalue: f64,
    pub aic: f64,
    pub bic: f64,
    pub binning: Vec<Bin>,
}

/// Run both tests and recompute the information criteria from the fit.
pub fn gof_report(
    sample: &UncensoredSample,
    fit_result: &FitResult,
    n_boot: usize,
    seed: u64,
) -> Result<GofReport> {
    let chi2 = chi_square_test(sample, fit_result)?;
    let cvm = cvm_test(sample, fit_result, n_boot, seed)?;
    Ok(GofReport {
        chi2_stat: chi2.statistic,
        chi2_pvalue: chi2.p_value,
        cvm_stat: cvm.statistic,
        cvm_pvalue: cvm.p_value,
        aic: -2.0 * fit_result.loglik + 2.0 * fit_result.k_free as f64,
        bic: -2.0 * fit_result.loglik + fit_result.k_free as f64 * (fit_result.n as f64).ln(),
        binning: chi2.bins,
    })
}

/// Product-limit survival estimate from grouped censored data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmEstimate {
    pub times: Vec<u64>,
    /// `P(T > times[i])`: the survival level after each observed time.
    pub survival: Vec<f64>,
    pub at_risk: Vec<u64>,
    pub events: Vec<u64>,
}

impl KmEstimate {
    /// Survival strictly beyond `t` (step-function lookup).
    pub fn survival_beyond(&self, t: u64) -> f64 {
        let mut current = 1.0;
        for (i, &time) in self.times.iter().enumerate() {
            if time > t {
                break;
            }
            current = self.survival[i];
        }
        current
    }

    /// Survival to at least `x`: the product over event times strictly
    /// below `x`, so `x = 0` reports exactly 1.
    pub fn survival_at_least(&self, x: u64) -> f64 {
        if x == 0 {
            return 1.0;
        }
        self.survival_beyond(x - 1)
    }
}

/// Kaplan–Meier estimation with the events-before-censoring convention for
/// ties: subjects censored at `t` are still at risk for the events at `t`.
pub fn kaplan_meier(sample: &CensoredSample) -> Result<KmEstimate> {
    let rows = sample.rows();
    if rows.is_empty() {
        return Err(Error::Validation("empty censored sample".to_string()));
    }
    let at_risk = sample.at_risk();
    let mut survival = Vec::with_capacity(rows.len());
    let mut current = 1.0;
    for (row, &risk) in rows.iter().zip(&at_risk) {
        current *= 1.0 - row.events as f64 / risk as f64;
        survival.push(current);
    }
    Ok(KmEstimate {
        times: rows.iter().map(|r| r.value).collect(),
        survival,
        at_risk,
        events: rows.iter().map(|r| r.events).collect(),
    })
}

/// Fitted-versus-empirical survival over a grid of support points.
#[derive(Debug, Clone, Serialize)]
pub struct SurvivalTable {
    pub xs: Vec<u64>,
    /// Kaplan–Meier column, reported as survival to at least `x` so the
    /// first row is exactly 1.
    pub km: Vec<f64>,
    /// One `(label, P(X > x) per row)` column per fitted model.
    pub models: Vec<(String, Vec<f64>)>,
}

/// Tabulate the Kaplan–Meier estimate against each model's reliability.
///
/// All fits must come from the same data (checked through the sample size).
pub fn survival_table(
    fits: &[(String, FitResult)],
    km: &KmEstimate,
    xs: &[u64],
) -> Result<SurvivalTable> {
    if let Some(first) = fits.first() {
        if fits.iter().any(|(_, f)| f.n != first.1.n) {
            return Err(Error::Validation(
                "survival table requires fits of the same data".to_string(),
            ));
        }
    }
    let km_col = xs.iter().map(|&x| km.survival_at_least(x)).collect();
    let models = fits
        .iter()
        .map(|(label, f)| {
            let dist = f.distribution();
            let col = xs
                .iter()
                .map(|&x| dist.reliability(x as f64).expect("x >= 0"))
                .collect();
            (label.clone(), col)
        })
        .collect();
    Ok(SurvivalTable { xs: xs.to_vec(), km: km_col, models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;
    use crate::estimation::CensoredRow;

    fn normal_fit_computer_breaks() -> (UncensoredSample, FitResult) {
        let sample = data::computer_breaks();
        let fit_result = fit(
            &Dataset::Uncensored(sample.clone()),
            crate::kernels::KernelSpec::normal(),
            &FitOptions::default(),
        )
        .unwrap();
        (sample, fit_result)
    }

    #[test]
    fn zero_statistic_gives_p_value_one() {
        let bins = vec![
            Bin { lo: 0, hi: Some(1), observed: 10, expected: 10.0 },
            Bin { lo: 2, hi: Some(3), observed: 7, expected: 7.0 },
            Bin { lo: 4, hi: None, observed: 3, expected: 3.0 },
        ];
        let stat = chi_square_statistic(&bins);
        assert_eq!(stat, 0.0);
        assert_eq!(chi_square_survival(stat, 2), 1.0);
    }

    #[test]
    fn chi_square_does_not_reject_the_computer_breaks_normal_fit() {
        let (sample, fit_result) = normal_fit_computer_breaks();
        let test = chi_square_test(&sample, &fit_result).unwrap();
        assert!(test.p_value > 0.05, "p = {}", test.p_value);
        // Binning invariants: contiguous cover, observed total, expected >= 5
        // everywhere except possibly the open tail cell.
        let mut expected_lo = 0;
        let mut total_observed = 0;
        for (i, bin) in test.bins.iter().enumerate() {
            assert_eq!(bin.lo, expected_lo);
            if let Some(hi) = bin.hi {
                expected_lo = hi + 1;
                assert!(bin.expected >= 5.0, "closed cell {i} expected {}", bin.expected);
            } else {
                assert_eq!(i, test.bins.len() - 1);
            }
            total_observed += bin.observed;
        }
        assert_eq!(total_observed, sample.n());
        let total_expected: f64 = test.bins.iter().map(|b| b.expected).sum();
        assert!((total_expected - sample.n() as f64).abs() < 0.01);
    }

    #[test]
    fn chi_square_needs_enough_cells() {
        let tiny = UncensoredSample::from_values(&[1, 1, 2, 2, 1, 2, 1, 1]).unwrap();
        let fit_result = fit(
            &Dataset::Uncensored(tiny.clone()),
            crate::kernels::KernelSpec::normal(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(chi_square_test(&tiny, &fit_result).is_err());
    }

    #[test]
    fn chi_square_size_is_calibrated() {
        let (_, fit_result) = normal_fit_computer_breaks();
        let dist = fit_result.distribution();
        let rejections: usize = (0..200u64)
            .into_par_iter()
            .map(|rep| {
                let values = dist.sample(128, 600_000 + rep);
                let sample = UncensoredSample::from_values(&values).unwrap();
                let refit = fit(
                    &Dataset::Uncensored(sample.clone()),
                    crate::kernels::KernelSpec::normal(),
                    &FitOptions::default(),
                )
                .unwrap();
                let test = chi_square_test(&sample, &refit).unwrap();
                usize::from(test.p_value < 0.05)
            })
            .sum();
        let rate = rejections as f64 / 200.0;
        assert!((0.02..=0.10).contains(&rate), "rejection rate {rate}");
    }

    #[test]
    fn cvm_statistic_is_zero_on_exact_agreement() {
        // Empirical CDF equal to the model CDF at every support point.
        let counts = [1u64, 2, 1];
        let cdf = [0.25, 0.75, 1.0];
        let pmf = [0.25, 0.5, 0.25];
        assert_eq!(cvm_statistic_terms(&counts, 4, &cdf, &pmf), 0.0);
    }

    #[test]
    fn cvm_does_not_reject_the_computer_breaks_normal_fit() {
        let (sample, fit_result) = normal_fit_computer_breaks();
        let test = cvm_test(&sample, &fit_result, 200, 99).unwrap();
        assert!(!test.degraded);
        assert!(
            (0.05..=0.99).contains(&test.p_value),
            "p = {} (stat {})",
            test.p_value,
            test.statistic
        );
    }

    #[test]
    fn cvm_requires_enough_bootstrap_replicates() {
        let (sample, fit_result) = normal_fit_computer_breaks();
        assert!(cvm_test(&sample, &fit_result, 50, 1).is_err());
    }

    #[test]
    fn bootstrap_p_values_are_roughly_uniform_under_the_null() {
        // Draw from the fitted model, refit, test; the p-values should look
        // uniform and reject at about the nominal rate.
        let (_, fit_result) = normal_fit_computer_breaks();
        let dist = fit_result.distribution();
        let mut p_values: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|rep| {
                let values = dist.sample(128, 700_000 + rep);
                let sample = UncensoredSample::from_values(&values).unwrap();
                let refit = fit(
                    &Dataset::Uncensored(sample.clone()),
                    crate::kernels::KernelSpec::normal(),
                    &FitOptions::default(),
                )
                .unwrap();
                cvm_test(&sample, &refit, 200, 800_000 + rep).unwrap().p_value
            })
            .collect();
        p_values.sort_by(f64::total_cmp);
        let ks = p_values
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let upper = (i + 1) as f64 / 200.0;
                let lower = i as f64 / 200.0;
                (p - lower).abs().max((upper - p).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 0.15, "Kolmogorov distance from uniform: {ks}");
        let rejections = p_values.iter().filter(|&&p| p < 0.05).count() as f64 / 200.0;
        assert!((0.02..=0.10).contains(&rejections), "rejection rate {rejections}");
    }

    #[test]
    fn km_matches_the_hand_computed_product_limit() {
        let km = kaplan_meier(&data::pain_relief()).unwrap();
        // Product-limit by hand: 36/100, then *20/36, *15/20, *10/14, ...
        let expected = [
            0.36,
            0.2,
            0.15,
            0.15 * 10.0 / 14.0,
            0.15 * 10.0 / 14.0 * 0.6,
            0.15 * 10.0 / 14.0 * 0.3,
            0.15 * 10.0 / 14.0 * 0.3,
            0.15 * 10.0 / 14.0 * 0.2,
            0.15 * 10.0 / 14.0 * 0.2,
            0.15 * 10.0 / 14.0 * 0.1,
            0.15 * 10.0 / 14.0 * 0.1,
            0.15 * 10.0 / 14.0 * 0.1,
        ];
        for (i, &e) in expected.iter().enumerate() {
            assert!(
                (km.survival[i] - e).abs() < 1e-12,
                "row {i}: {} vs {e}",
                km.survival[i]
            );
        }
        // The at-least convention starts at exactly 1.
        assert_eq!(km.survival_at_least(0), 1.0);
        assert!((km.survival_at_least(1) - 0.36).abs() < 1e-12);
    }

    #[test]
    fn km_survival_is_nonincreasing() {
        let km = kaplan_meier(&data::pain_relief()).unwrap();
        for pair in km.survival.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15);
        }
        for pair in km.at_risk.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn single_event_drops_survival_by_one_over_n() {
        let sample = CensoredSample::new(vec![
            CensoredRow { value: 2, events: 1, censored: 0 },
            CensoredRow { value: 5, events: 0, censored: 9 },
        ])
        .unwrap();
        let km = kaplan_meier(&sample).unwrap();
        assert!((km.survival_beyond(2) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn without_censoring_km_equals_the_empirical_survival() {
        let values: Vec<u64> = vec![0, 0, 1, 2, 2, 2, 3, 7, 7, 9];
        let sample =
            CensoredSample::from_observations(values.iter().map(|&v| (v, true))).unwrap();
        let km = kaplan_meier(&sample).unwrap();
        for &t in &[0u64, 1, 2, 3, 5, 7, 9] {
            let empirical =
                values.iter().filter(|&&v| v > t).count() as f64 / values.len() as f64;
            assert!(
                (km.survival_beyond(t) - empirical).abs() < 1e-12,
                "t={t}: km {} vs empirical {empirical}",
                km.survival_beyond(t)
            );
        }
    }

    #[test]
    fn survival_table_reports_model_reliability() {
        let pain = data::pain_relief();
        let fit_result = fit(
            &Dataset::Censored(pain.clone()),
            crate::kernels::KernelSpec::normal(),
            &FitOptions::default(),
        )
        .unwrap();
        let km = kaplan_meier(&pain).unwrap();
        let xs: Vec<u64> = vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12];
        let table =
            survival_table(&[("LN".to_string(), fit_result.clone())], &km, &xs).unwrap();

        // Model columns are the fitted reliability.
        let dist = fit_result.distribution();
        for (i, &x) in xs.iter().enumerate() {
            let rf = dist.reliability(x as f64).unwrap();
            assert_eq!(table.models[0].1[i], rf);
            assert!((rf - (1.0 - dist.cdf(x as f64).unwrap())).abs() < 1e-15);
        }
        // Published reliability values for this fit.
        assert!((table.models[0].1[0] - 0.8925).abs() < 0.002);
        assert!((table.models[0].1[3] - 0.2120).abs() < 0.002);
        assert_eq!(table.km[0], 1.0);
    }

    #[test]
    fn gof_report_reuses_the_fit_information_criteria() {
        let (sample, fit_result) = normal_fit_computer_breaks();
        let report = gof_report(&sample, &fit_result, 200, 7).unwrap();
        assert_eq!(report.aic, fit_result.aic);
        assert_eq!(report.bic, fit_result.bic);
        let total: u64 = report.binning.iter().map(|b| b.observed).sum();
        assert_eq!(total, sample.n());
    }
}
