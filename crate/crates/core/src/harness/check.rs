//! Self-consistency suite behind the `check` subcommand.

use crate::asym;
use crate::closed_forms;
use crate::error::Result;
use crate::finite::{self, FixedPointOptions, SolvePath};
use crate::model::{self, NetworkConfig, PerLink, PerUser, Problem, TauTensor};
use crate::rng::{Purpose, Substreams};
use crate::Scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

const INSTANCES: usize = 20;

/// Random perfect-CSI drop for instance `i`: `L` in 1..=4, `K` in 1..=8, `N`
/// large enough for every scheme to be comfortably feasible most of the time.
fn random_instance(seed: u64, i: usize) -> Result<(NetworkConfig, Problem)> {
    let cells = [1, 4, 2, 4][i % 4];
    let users_per_cell = 1 + (i * 3) % 8;
    let cfg = NetworkConfig {
        cells,
        users_per_cell,
        antennas: 2 * cells * users_per_cell + 4,
        rate_bps_hz: PerUser::Uniform(1.0),
        tau: PerLink::Uniform(0.0),
        bs_positions_m: (cells == 2).then(|| vec![[125.0, 125.0], [375.0, 125.0]]),
        cell_side_m: (cells == 2).then_some(250.0),
        seed,
        ..Default::default()
    };
    cfg.validate()?;
    let geometry = model::build_geometry(&cfg, &Substreams::new(seed, i as u64, Purpose::Drop))?;
    let gains = model::large_scale_gains(&geometry, &cfg.path_loss());
    let problem = Problem::new(gains, cfg.targets()?, TauTensor::zeros(cells, users_per_cell), cfg.antennas, cfg.noise_power_w)?;
    Ok((cfg, problem))
}

/// `sum(lambda * noise) / M`. For ScBF the noise a UE sees includes the
/// interference from other cells, which its own BS does not regularize against.
fn finite_dual(scheme: Scheme, ch: &model::ChannelSet, sol: &finite::FiniteSolution, noise_w: f64) -> f64 {
    match scheme {
        Scheme::Cobf | Scheme::Comp => finite::dual_objective(scheme, &sol.lambda, noise_w, ch.antennas, ch.cells),
        Scheme::Scbf => {
            let k = ch.users_per_cell;
            let g = finite::realized_gain_matrix(scheme, ch, &sol.directions);
            let weighted: f64 = (0..sol.lambda.len())
                .map(|u| {
                    let inter: f64 = (0..sol.powers.len())
                        .filter(|i| i / k != u / k)
                        .map(|i| g.get(u, i) * sol.powers[i])
                        .sum();
                    sol.lambda[u] * (noise_w + inter)
                })
                .sum();
            weighted / ch.antennas as f64
        }
    }
}

fn finite_duality(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for scheme in Scheme::ALL {
        let (mut worst, mut solved) = (0.0f64, 0);
        for i in 0..INSTANCES {
            let (_, p) = random_instance(seed, i)?;
            let ch = model::draw_channels(&p.gains, &p.tau, p.antennas, &Substreams::new(seed, i as u64, Purpose::Fading));
            let opts = FixedPointOptions { tol: 1e-13, max_iter: 20_000 };
            let sol = match finite::solve(scheme, &ch, &p.gamma, p.noise_w, opts) {
                Ok(s) => s,
                Err(e) if e.is_infeasible() => continue,
                Err(e) => return Err(e),
            };
            let dual = finite_dual(scheme, &ch, &sol, p.noise_w);
            worst = worst.max((sol.total_power - dual).abs() / sol.total_power);
            solved += 1;
        }
        out.push(CheckResult::new(
            format!("finite duality gap ({scheme})"),
            solved > 0 && worst <= 1e-8,
            format!("{solved}/{INSTANCES} feasible, worst relative gap {worst:.2e}"),
        ));
    }
    Ok(out)
}

fn asymptotic_duality(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for scheme in Scheme::ALL {
        let (mut worst, mut solved) = (0.0f64, 0);
        for i in 0..INSTANCES {
            let (_, p) = random_instance(seed, i)?;
            let summary = match asym::evaluate(scheme, &p) {
                Ok(s) if s.feasible => s,
                Ok(_) => continue,
                Err(e) if e.is_infeasible() => continue,
                Err(e) => return Err(e),
            };
            let primal = summary.powers()?.total;
            worst = worst.max(closed_forms::duality_gap(&summary)? / primal);
            solved += 1;
        }
        out.push(CheckResult::new(
            format!("deterministic duality gap ({scheme})"),
            solved > 0 && worst <= 1e-8,
            format!("{solved}/{INSTANCES} feasible, worst relative gap {worst:.2e}"),
        ));
    }
    Ok(out)
}

/// The user-space and antenna-space factorizations must give the same multipliers.
fn solve_paths_agree(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for scheme in Scheme::ALL {
        let mut worst = 0.0f64;
        for i in 0..4 {
            let (_, p) = random_instance(seed, i)?;
            let ch = model::draw_channels(&p.gains, &p.tau, p.antennas, &Substreams::new(seed, i as u64, Purpose::Fading));
            let opts = FixedPointOptions { tol: 1e-13, max_iter: 20_000 };
            let a = finite::fixed_point_with(scheme, &ch, &p.gamma, opts, SolvePath::UserSpace);
            let b = finite::fixed_point_with(scheme, &ch, &p.gamma, opts, SolvePath::AntennaSpace);
            let (Ok(a), Ok(b)) = (a, b) else { continue };
            for (x, y) in a.lambda.iter().zip(&b.lambda) {
                worst = worst.max((x - y).abs() / y.abs().max(f64::MIN_POSITIVE));
            }
        }
        out.push(CheckResult::new(
            format!("user-space == antenna-space multipliers ({scheme})"),
            worst <= 1e-9,
            format!("worst relative difference {worst:.2e}"),
        ));
    }
    Ok(out)
}

fn closed_form_checks() -> Result<Vec<CheckResult>> {
    let (cells, k, n) = (3, 2, 24);
    let gains = model::LargeScaleGains::from_fn(cells, k, |l, j, _| if l == j { 1.0 } else { 0.3 });
    let gamma = model::SinrTargets::uniform(cells, k, 1.5)?;
    let eta = asym::cobf::solve_eta(&gains, &gamma, n)?;
    let ratios: Vec<f64> = (0..cells * k).map(|idx| if idx / k == 0 { 1.0 } else { 0.3 }).collect();
    let expect = closed_forms::eta_symmetric(gamma.cell(0), &ratios, n);
    let sym_err = eta.iter().map(|e| (e - expect).abs()).fold(0.0, f64::max);

    let big = model::SinrTargets::uniform(cells, k, 1e6)?;
    let eta_hi = asym::cobf::solve_eta(&gains, &big, n)?;
    let hi_expect = closed_forms::eta_high_sinr(k, cells, n)?;
    let hi_err = eta_hi.iter().map(|e| (e - hi_expect).abs()).fold(0.0, f64::max);

    Ok(vec![
        CheckResult::new("symmetric eta closed form", sym_err <= 1e-12, format!("max error {sym_err:.2e}")),
        CheckResult::new("high-SINR eta limit", hi_err <= 1e-3, format!("max error {hi_err:.2e}")),
    ])
}

fn case_study_checks() -> Result<Vec<CheckResult>> {
    let r = closed_forms::two_cell_case_study(0.5, 1.0, 4, 1.0)?;
    let tau_err = (r.tau_max_scbf[0].value - 0.845_154_254_728_516_6)
        .abs()
        .max((r.tau_max_scbf[1].value - 0.925_820_099_772_551_5).abs());
    Ok(vec![
        CheckResult::new(
            "two-cell multiplier ordering",
            r.cobf_lambda_ordered() && r.comp_lambda_ordered(),
            format!("cobf {:?}, comp {:?}", r.lambda_cobf, r.lambda_comp),
        ),
        CheckResult::new(
            "two-cell tau_max ordering",
            r.scbf_tau_ordered() && r.cobf_tau_ordered(),
            format!(
                "scbf [{:.6}, {:.6}], cobf [{:.6}, {:.6}]",
                r.tau_max_scbf[0].value, r.tau_max_scbf[1].value, r.tau_max_cobf[0].value, r.tau_max_cobf[1].value
            ),
        ),
        CheckResult::new("two-cell ScBF tau_max values", tau_err <= 1e-9, format!("max error {tau_err:.2e}")),
    ])
}

pub fn run_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = finite_duality(seed)?;
    out.extend(asymptotic_duality(seed)?);
    out.extend(solve_paths_agree(seed)?);
    out.extend(closed_form_checks()?);
    out.extend(case_study_checks()?);
    Ok(out)
}
