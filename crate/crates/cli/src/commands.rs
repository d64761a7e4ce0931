//! One function per experiment. Each fills a report row by row, so a
//! numerical failure leaves the finished rows in place.

use qlan::channels::{convergence_sweep, BlockSelection, SweepOptions};
use qlan::measurements::{
    discrimination_limit, finite_n_discrimination, heterodyne_estimation_risk, heterodyne_risk_reference,
    limit_model_risk, measurement_tv_distance, position_measurement_risk, RiskMethod,
};
use qlan::oscillator::{truncation_policy, FockTruncation, QuadratureSpec};

use crate::config::{ExperimentConfig, Method};
use crate::report::{RiskReport, Row};
use crate::CliError;

/// Runs `body` against a fresh report; on failure the report keeps its rows
/// and records the error.
fn collect(
    config: &ExperimentConfig,
    columns: &[&str],
    body: impl FnOnce(&mut RiskReport) -> Result<(), CliError>,
) -> (RiskReport, Result<(), CliError>) {
    let mut report = RiskReport::new(config, columns);
    let result = body(&mut report);
    if let Err(e) = &result {
        report.error = Some(e.to_string());
    }
    (report, result)
}

/// Forward distance per `(μ, n, u)`, with the reverse and blockwise
/// distances alongside.
pub fn run_convergence(config: &ExperimentConfig) -> (RiskReport, Result<(), CliError>) {
    let columns = ["reverse", "blockwise_sup", "blockwise_mean", "fock_deficit", "concentration_deficit"];
    collect(config, &columns, |report| {
        for &mu in &config.mu {
            let params = config.params(config.n[0], mu)?;
            let options = SweepOptions {
                selection: BlockSelection::All,
                trunc: config.trunc,
            };
            let records = convergence_sweep(&params, &config.grid, &config.n, options)?;
            for rec in records {
                for p in &rec.points {
                    report.rows.push(Row {
                        n: Some(rec.n),
                        mu,
                        u: (p.u.x, p.u.y),
                        statistic: "forward".into(),
                        value: p.forward,
                        error_bound: rec.error_bound,
                        extra: vec![p.reverse, p.blockwise, p.blockwise_mean, p.fock_deficit, rec.concentration_deficit],
                    });
                }
            }
        }
        Ok(())
    })
}

/// Finite-`n` Helstrom risk for `±u`, next to the pure-state limit, the
/// limit-model risk at the same `μ` and the position-measurement baseline.
pub fn run_discriminate(config: &ExperimentConfig) -> (RiskReport, Result<(), CliError>) {
    let columns = ["limit", "limit_model", "erf_baseline"];
    collect(config, &columns, |report| {
        let points = config.grid.points();
        for &mu in &config.mu {
            for &u in &points {
                let trunc = match config.trunc {
                    Some(d) => FockTruncation::new(d),
                    None => truncation_policy(mu, None, u.norm()),
                };
                let model = limit_model_risk(u, mu, trunc)?;
                for &n in &config.n {
                    let r = finite_n_discrimination(&config.params(n, mu)?, u)?;
                    report.rows.push(Row {
                        n: Some(n),
                        mu,
                        u: (u.x, u.y),
                        statistic: "helstrom".into(),
                        value: r.risk,
                        error_bound: r.error_bound,
                        extra: vec![discrimination_limit(u), model.risk, position_measurement_risk(u)],
                    });
                }
            }
        }
        Ok(())
    })
}

/// Total-variation distance between the covariant and heterodyne outcome
/// distributions per `(μ, n, u)`.
pub fn run_measure_compare(config: &ExperimentConfig) -> (RiskReport, Result<(), CliError>) {
    let columns = [
        "out_of_grid_mass",
        "covariant_mass",
        "heterodyne_mass",
        "concentration_deficit",
        "fold_bound",
    ];
    collect(config, &columns, |report| {
        let points = config.grid.points();
        for &mu in &config.mu {
            for &n in &config.n {
                let params = config.params(n, mu)?;
                for &u in &points {
                    let c = measurement_tv_distance(&params, u, &config.comparison)?;
                    let outside = (1.0 - c.covariant_mass).abs().max((1.0 - c.heterodyne_mass).abs());
                    report.rows.push(Row {
                        n: Some(n),
                        mu,
                        u: (u.x, u.y),
                        statistic: "tv".into(),
                        value: c.tv,
                        error_bound: c.error_bound,
                        extra: vec![outside, c.covariant_mass, c.heterodyne_mass, c.concentration_deficit, c.fold_bound],
                    });
                }
            }
        }
        Ok(())
    })
}

/// Heterodyne estimation risk per `(μ, u)`. Monte-Carlo row `k` uses seed
/// `seed + k`; its error bound is the standard error.
pub fn run_risk(config: &ExperimentConfig) -> (RiskReport, Result<(), CliError>) {
    collect(config, &["reference"], |report| {
        let points = config.grid.points();
        let mut k = 0u64;
        for &mu in &config.mu {
            for &u in &points {
                let method = match config.method {
                    Method::MonteCarlo => RiskMethod::MonteCarlo {
                        samples: config.samples,
                        seed: config.seed.wrapping_add(k),
                    },
                    Method::Quadrature => RiskMethod::Quadrature(QuadratureSpec::default()),
                };
                k += 1;
                let r = heterodyne_estimation_risk(mu, u, method)?;
                report.rows.push(Row {
                    n: None,
                    mu,
                    u: (u.x, u.y),
                    statistic: "heterodyne_risk".into(),
                    value: r.value,
                    error_bound: r.error,
                    extra: vec![heterodyne_risk_reference(mu)],
                });
            }
        }
        Ok(())
    })
}
