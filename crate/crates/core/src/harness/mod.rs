//! Monte-Carlo experiment driver.
//!
//! Every sweep point runs `trials` independent trials in parallel. Each trial
//! draws one UE drop and one fading realization and solves every requested
//! scheme on them, so schemes are compared on identical inputs. Per-trial rows
//! are followed by one `AGG` row per scheme.

pub mod check;
pub mod output;
pub mod spec;
pub mod trial;

use crate::error::Result;
use crate::par::Execution;
use crate::Scheme;

pub use output::{write_results, CsvSink, HEADER};
pub use spec::{read_spec, ExperimentSpec, Mode, Point, Sweep, SweepVariable};
pub use trial::{run_trial, ResultRow, Status, TrialId};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub feasible: usize,
    pub infeasible: usize,
    pub numeric_failures: usize,
}

/// Runs every point and hands each point's rows (trials then AGG, grouped by
/// scheme) to `sink` as soon as they are ready.
pub fn run_experiment(
    spec: &ExperimentSpec,
    exec: Execution,
    mut sink: impl FnMut(&[ResultRow]) -> Result<()>,
) -> Result<ExperimentReport> {
    spec.validate()?;
    let mut report = ExperimentReport::default();
    for point in spec.points()? {
        let per_trial = exec.map(spec.trials, |t| run_trial(spec, &point, t))?;
        let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::with_capacity(spec.schemes.len() * (spec.trials + 1));
        for (s, &scheme) in spec.schemes.iter().enumerate() {
            let trials: Vec<ResultRow> = per_trial.iter().map(|r| r[s].clone()).collect();
            for row in &trials {
                match row.status {
                    Status::Feasible => report.feasible += 1,
                    Status::Infeasible => report.infeasible += 1,
                    Status::NumericFailure => report.numeric_failures += 1,
                }
            }
            let agg = aggregate(scheme, &point, &trials);
            rows.extend(trials);
            rows.push(agg);
        }
        sink(&rows)?;
        report.rows.extend(rows);
    }
    Ok(report)
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (`n - 1` denominator); zero for a single value.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Mean and std of total power over feasible trials, median worst-case SINR
/// deviation, mean asymptotic prediction over trials that have one.
fn aggregate(scheme: Scheme, point: &Point, trials: &[ResultRow]) -> ResultRow {
    let ok: Vec<&ResultRow> = trials.iter().filter(|r| r.feasible()).collect();
    let totals: Vec<f64> = ok.iter().filter_map(|r| r.total_power_w).collect();
    let devs: Vec<f64> = ok.iter().filter_map(|r| r.max_sinr_rel_dev).collect();
    let preds: Vec<f64> = trials.iter().filter_map(|r| r.asym_power_w).collect();
    let cells = point.network.cells;
    let bs_powers = if ok.is_empty() {
        Vec::new()
    } else {
        (0..cells)
            .map(|l| ok.iter().map(|r| r.bs_powers[l]).sum::<f64>() / ok.len() as f64)
            .collect()
    };
    ResultRow {
        scheme,
        sweep_name: point.sweep_name,
        sweep_value: point.sweep_value,
        trial: TrialId::Agg,
        total_power_w: mean(&totals),
        asym_power_w: mean(&preds),
        max_sinr_rel_dev: median(&devs),
        status: if ok.is_empty() { Status::Infeasible } else { Status::Feasible },
        bs_powers,
        wall_ms: trials.iter().map(|r| r.wall_ms).sum::<f64>() / trials.len() as f64,
        power_std_w: sample_std(&totals),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats() {
        assert_eq!(mean(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(sample_std(&[5.0]), Some(0.0));
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]).unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn one_trial_gives_two_rows_per_scheme() {
        let mut spec = ExperimentSpec {
            trials: 1,
            schemes: vec![Scheme::Cobf],
            ..Default::default()
        };
        spec.network.cells = 1;
        spec.network.users_per_cell = 2;
        spec.network.antennas = 4;
        let report = run_experiment(&spec, Execution::Sequential, |_| Ok(())).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[1].trial, TrialId::Agg);
    }
}
