//! Output emission: run manifests, CSV writers, and human-readable tables.
//!
//! Every CSV uses a comma separator, UTF-8, a header row, `.` as the decimal
//! separator, and floats printed with 17 significant digits, so repeated
//! runs with the same seed produce byte-identical files.

use crate::distribution::DiscreteLogSymmetric;
use crate::error::Result;
use crate::gof::{GofReport, SurvivalTable};
use crate::simulation::SimCellReport;

use serde::Serialize;
use std::fmt::Write as _;

/// Provenance record accompanying every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
    pub input_digest: Option<String>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        arguments: Vec<String>,
        seed: Option<u64>,
        input_digest: Option<String>,
    ) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            arguments,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            input_digest,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Float formatting used in all CSV output: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// PMF table as CSV: `x, pmf, cdf, rf, hazard` at full precision.
pub fn pmf_table_csv(dist: &DiscreteLogSymmetric, xmax: u64) -> Result<String> {
    let mut out = String::from("x,pmf,cdf,rf,hazard\n");
    for x in 0..=xmax {
        let _ = writeln!(
            out,
            "{x},{},{},{},{}",
            fmt_float(dist.pmf(x)),
            fmt_float(dist.cdf(x as f64)?),
            fmt_float(dist.reliability(x as f64)?),
            fmt_float(dist.hazard(x)),
        );
    }
    Ok(out)
}

/// Survival table as CSV: `x, km`, then one column per model key.
pub fn survival_table_csv(table: &SurvivalTable) -> String {
    let mut out = String::from("x,km");
    for (label, _) in &table.models {
        let _ = write!(out, ",{label}");
    }
    out.push('\n');
    for (i, &x) in table.xs.iter().enumerate() {
        let _ = write!(out, "{x},{}", fmt_float(table.km[i]));
        for (_, col) in &table.models {
            let _ = write!(out, ",{}", fmt_float(col[i]));
        }
        out.push('\n');
    }
    out
}

/// Goodness-of-fit report as CSV: one summary row, then the binning.
pub fn gof_report_csv(report: &GofReport) -> String {
    let mut out = String::from("chi2_stat,chi2_pvalue,cvm_stat,cvm_pvalue,aic,bic\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        fmt_float(report.chi2_stat),
        fmt_float(report.chi2_pvalue),
        fmt_float(report.cvm_stat),
        fmt_float(report.cvm_pvalue),
        fmt_float(report.aic),
        fmt_float(report.bic),
    );
    out.push_str("\ncell_lo,cell_hi,observed,expected\n");
    for bin in &report.binning {
        let hi = bin.hi.map(|h| h.to_string()).unwrap_or_else(|| "inf".to_string());
        let _ = writeln!(out, "{},{hi},{},{}", bin.lo, bin.observed, fmt_float(bin.expected));
    }
    out
}

/// Study report as CSV, one row per (cell, parameter).
pub fn study_csv(reports: &[SimCellReport]) -> String {
    let mut out =
        String::from("kernel,xi,n,censoring,phi_true,param,mean,bias,mse,mc_se,failed\n");
    for cell in reports {
        let xi = cell
            .xi
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(";");
        for (param, stats) in [("phi", &cell.power_stats), ("lambda", &cell.scale_stats)] {
            let _ = writeln!(
                out,
                "{},{xi},{},{},{},{param},{},{},{},{},{}",
                cell.kernel,
                cell.n,
                fmt_float(cell.censoring),
                fmt_float(cell.power_true),
                fmt_float(stats.mean),
                fmt_float(stats.bias),
                fmt_float(stats.mse),
                fmt_float(stats.mc_se_mean),
                cell.failed_fits,
            );
        }
    }
    out
}

/// Human-readable study table: one block per censoring level, rows per
/// sample size, mean/bias/MSE columns per power value.
pub fn study_table(reports: &[SimCellReport]) -> String {
    let mut out = String::new();
    if reports.is_empty() {
        return out;
    }
    let _ = writeln!(
        out,
        "kernel: {} xi: {:?} (extra parameters held at truth)",
        reports[0].kernel, reports[0].xi
    );

    let mut censorings: Vec<f64> = reports.iter().map(|r| r.censoring).collect();
    censorings.dedup();
    let mut powers: Vec<f64> = reports.iter().map(|r| r.power_true).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();

    for &cens in censorings.iter() {
        let _ = writeln!(out, "\ncensoring {:.0}%", cens * 100.0);
        let mut header = format!("{:>6} {:>8}", "n", "param");
        for &p in &powers {
            let _ = write!(header, " | {:>31}", format!("phi = {p}"));
        }
        let _ = writeln!(out, "{header}");
        let mut sub = format!("{:>6} {:>8}", "", "");
        for _ in &powers {
            let _ = write!(sub, " | {:>9} {:>10} {:>10}", "mean", "bias", "mse");
        }
        let _ = writeln!(out, "{sub}");

        let mut ns: Vec<u64> = reports
            .iter()
            .filter(|r| r.censoring == cens)
            .map(|r| r.n)
            .collect();
        ns.sort_unstable();
        ns.dedup();
        for &n in &ns {
            for (param, pick) in [
                ("phi", true),
                ("lambda", false),
            ] {
                let mut line = format!("{:>6} {:>8}", if pick { n.to_string() } else { String::new() }, param);
                for &p in &powers {
                    let cell = reports
                        .iter()
                        .find(|r| r.censoring == cens && r.n == n && r.power_true == p);
                    match cell {
                        Some(c) => {
                            let stats = if pick { &c.power_stats } else { &c.scale_stats };
                            let _ = write!(
                                line,
                                " | {:>9.4} {:>10.4} {:>10.4}",
                                stats.mean, stats.bias, stats.mse
                            );
                        }
                        None => {
                            let _ = write!(line, " | {:>9} {:>10} {:>10}", "-", "-", "-");
                        }
                    }
                }
                let _ = writeln!(out, "{line}");
            }
        }
    }
    out
}
