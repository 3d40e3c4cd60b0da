use std::time::Instant;

use crate::asym;
use crate::error::{Error, Result};
use crate::finite::{self, FixedPointOptions};
use crate::model::{self, CVector, ChannelSet, Problem};
use crate::rng::{Purpose, Substreams};
use crate::Scheme;

use super::spec::{ExperimentSpec, Mode, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialId {
    Index(usize),
    Agg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Feasible,
    /// No valid power allocation (spectral radius, negative powers, no convergence).
    Infeasible,
    /// A numerical breakdown unrelated to feasibility.
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sweep_name: &'static str,
    pub sweep_value: f64,
    pub trial: TrialId,
    /// Sum of squared precoder norms; `None` for flagged rows.
    pub total_power_w: Option<f64>,
    /// Deterministic-equivalent total power for the same drop.
    pub asym_power_w: Option<f64>,
    /// Worst relative deviation of a realized SINR from its target.
    pub max_sinr_rel_dev: Option<f64>,
    pub status: Status,
    pub bs_powers: Vec<f64>,
    pub wall_ms: f64,
    /// Sample std of `total_power_w`; AGG rows only.
    pub power_std_w: Option<f64>,
}

impl ResultRow {
    pub fn feasible(&self) -> bool {
        self.status == Status::Feasible
    }
}

/// Everything the schemes of one trial share.
pub struct TrialInputs {
    pub problem: Problem,
    pub channels: ChannelSet,
}

/// Drop and fading draws of `trial` at `point`. The drop depends only on
/// `(seed, trial)` so that every sweep point and scheme sees the same UEs.
pub fn trial_inputs(spec: &ExperimentSpec, point: &Point, trial: usize) -> Result<TrialInputs> {
    let net = &point.network;
    let drop_index = if spec.fixed_drop { 0 } else { trial as u64 };
    let geometry = model::build_geometry(net, &Substreams::new(net.seed, drop_index, Purpose::Drop))?;
    let gains = model::large_scale_gains(&geometry, &net.path_loss());
    let problem = Problem::new(gains, net.targets()?, net.tau_tensor()?, net.antennas, net.noise_power_w)?;
    let channels = model::draw_channels(
        &problem.gains,
        &problem.tau,
        problem.antennas,
        &Substreams::new(net.seed, trial as u64, Purpose::Fading),
    );
    Ok(TrialInputs { problem, channels })
}

/// One row per requested scheme, in the order of `spec.schemes`.
pub fn run_trial(spec: &ExperimentSpec, point: &Point, trial: usize) -> Result<Vec<ResultRow>> {
    let inputs = trial_inputs(spec, point, trial)?;
    Ok(spec
        .schemes
        .iter()
        .map(|&scheme| scheme_row(spec.mode, scheme, point, trial, &inputs))
        .collect())
}

fn scheme_row(mode: Mode, scheme: Scheme, point: &Point, trial: usize, inputs: &TrialInputs) -> ResultRow {
    let start = Instant::now();
    let outcome = match mode {
        Mode::Finite => finite_outcome(scheme, inputs),
        Mode::Asymptotic => asymptotic_outcome(scheme, inputs),
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = ResultRow {
        scheme,
        sweep_name: point.sweep_name,
        sweep_value: point.sweep_value,
        trial: TrialId::Index(trial),
        total_power_w: None,
        asym_power_w: None,
        max_sinr_rel_dev: None,
        status: Status::Feasible,
        bs_powers: Vec::new(),
        wall_ms,
        power_std_w: None,
    };
    match outcome {
        Ok(o) => {
            row.total_power_w = Some(o.total);
            row.asym_power_w = o.asym_total;
            row.max_sinr_rel_dev = Some(o.max_dev);
            row.bs_powers = o.bs_powers;
        }
        Err((e, asym_total)) => {
            row.asym_power_w = asym_total;
            row.status = if e.is_infeasible() { Status::Infeasible } else { Status::NumericFailure };
        }
    }
    row
}

struct Outcome {
    total: f64,
    asym_total: Option<f64>,
    max_dev: f64,
    bs_powers: Vec<f64>,
}

type Failure = (Error, Option<f64>);

fn asym_total(scheme: Scheme, problem: &Problem) -> Option<f64> {
    asym::evaluate(scheme, problem)
        .ok()
        .and_then(|s| s.powers.map(|p| p.total))
}

fn finite_outcome(scheme: Scheme, inputs: &TrialInputs) -> Result<Outcome, Failure> {
    let p = &inputs.problem;
    let predicted = asym_total(scheme, p);
    let sol = finite::solve(scheme, &inputs.channels, &p.gamma, p.noise_w, FixedPointOptions::default())
        .map_err(|e| (e, predicted))?;
    Ok(Outcome {
        total: sol.total_power,
        asym_total: predicted,
        max_dev: max_relative_deviation(&sol.realized_sinr, p.gamma.as_slice()),
        bs_powers: bs_powers(scheme, &sol.directions, &sol.powers, p.antennas, p.cells(), p.users_per_cell()),
    })
}

/// Deterministic multipliers shape the beams on this realization and the
/// deterministic powers are applied as-is; SINRs then fluctuate around target.
fn asymptotic_outcome(scheme: Scheme, inputs: &TrialInputs) -> Result<Outcome, Failure> {
    let p = &inputs.problem;
    let summary = asym::evaluate(scheme, p).map_err(|e| (e, None))?;
    let powers = summary.powers().map_err(|e| (e, None))?.clone();
    let directions = finite::beamform_directions(scheme, &inputs.channels, &summary.lambda_bar)
        .map_err(|e| (e, Some(powers.total)))?;
    let gains = finite::realized_gain_matrix(scheme, &inputs.channels, &directions);
    let sinr = finite::realized_sinr(&gains, &powers.per_user, p.noise_w);
    Ok(Outcome {
        total: powers.total,
        asym_total: Some(powers.total),
        max_dev: max_relative_deviation(&sinr, p.gamma.as_slice()),
        bs_powers: bs_powers(scheme, &directions, &powers.per_user, p.antennas, p.cells(), p.users_per_cell()),
    })
}

/// `max_u |sinr_u - gamma_u| / gamma_u` over UEs with a nonzero target.
pub fn max_relative_deviation(sinr: &[f64], gamma: &[f64]) -> f64 {
    sinr.iter()
        .zip(gamma)
        .filter(|(_, g)| **g > 0.0)
        .map(|(s, g)| (s - g).abs() / g)
        .fold(0.0, f64::max)
}

/// Transmit power of every BS. A UE's precoder is `sqrt(p / M) v / |v|`, so a
/// per-BS precoder puts all of `p / N` on its own BS while a joint one splits
/// it according to the blocks of `v`.
pub fn bs_powers(
    scheme: Scheme,
    directions: &[CVector],
    powers: &[f64],
    antennas: usize,
    cells: usize,
    users_per_cell: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; cells];
    match scheme {
        Scheme::Cobf | Scheme::Scbf => {
            for (u, p) in powers.iter().enumerate() {
                out[u / users_per_cell] += p / antennas as f64;
            }
        }
        Scheme::Comp => {
            let m = (antennas * cells) as f64;
            for (v, p) in directions.iter().zip(powers) {
                let norm = v.norm_squared();
                for (l, slot) in out.iter_mut().enumerate() {
                    let block = v.rows(l * antennas, antennas).norm_squared();
                    *slot += p / m * block / norm;
                }
            }
        }
    }
    out
}
