//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Reference values are computed here from independent formulas where one
//! exists; statistical criteria use fixed seeds so every run is identical.

use std::time::Instant;

use coopmimo::asym::{self, cobf, AsymSummary};
use coopmimo::closed_forms;
use coopmimo::finite::{self, FixedPointOptions};
use coopmimo::harness::{self, ExperimentSpec, Mode, ResultRow, Sweep, SweepVariable, TrialId};
use coopmimo::model::{
    build_geometry, draw_channels, large_scale_gains, LargeScaleGains, NetworkConfig, PerLink, PerUser, Problem,
    SinrTargets, TauTensor,
};
use coopmimo::par::Execution;
use coopmimo::rng::{self, Purpose, Substreams};
use coopmimo::Scheme;
use std::io::Write;

/// Written to the raw stderr handle so the verdict shows without `--nocapture`.
fn report(name: &str, passed: bool, detail: String) {
    let line = format!("{} {name}: {detail}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "{name}: {detail}");
}

fn two_cell_config(users_per_cell: usize, antennas: usize, rate: f64, tau2: f64, seed: u64) -> NetworkConfig {
    NetworkConfig {
        cells: 2,
        users_per_cell,
        antennas,
        rate_bps_hz: PerUser::Uniform(rate),
        tau: PerLink::Uniform(tau2.sqrt()),
        bs_positions_m: Some(vec![[125.0, 125.0], [375.0, 125.0]]),
        cell_side_m: Some(250.0),
        seed,
        ..Default::default()
    }
}

fn drop_problem(cfg: &NetworkConfig, drop: u64) -> Problem {
    let geometry = build_geometry(cfg, &Substreams::new(cfg.seed, drop, Purpose::Drop)).unwrap();
    let gains = large_scale_gains(&geometry, &cfg.path_loss());
    Problem::new(gains, cfg.targets().unwrap(), cfg.tau_tensor().unwrap(), cfg.antennas, cfg.noise_power_w).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Dual objective written out from the multipliers: noise-weighted for the
/// coordinated schemes, and for ScBF with the other cells' limiting
/// interference `sum_{l != j} d_ljk P_l` added to the noise.
fn dual_oracle(scheme: Scheme, p: &Problem, s: &AsymSummary) -> f64 {
    let (cells, k, n) = (p.cells(), p.users_per_cell(), p.antennas as f64);
    let lam = &s.lambda_bar;
    match scheme {
        Scheme::Cobf => lam.iter().sum::<f64>() * p.noise_w / n,
        Scheme::Comp => lam.iter().sum::<f64>() * p.noise_w / (n * cells as f64),
        Scheme::Scbf => {
            let per_bs = &s.powers.as_ref().unwrap().per_bs;
            (0..cells * k)
                .map(|u| {
                    let (j, kk) = (u / k, u % k);
                    let inter: f64 = (0..cells).filter(|&l| l != j).map(|l| p.gains.cobf(l, j, kk) * per_bs[l]).sum();
                    lam[u] * (inter + p.noise_w)
                })
                .sum::<f64>()
                / n
        }
    }
}

#[test]
fn duality_gaps() {
    let start = Instant::now();
    let mut rng = Substreams::new(2024, 0, Purpose::Drop).stream(0);
    let mut worst = [0.0f64; 3];
    let mut found = [0usize; 3];
    let mut attempts = 0;
    while found.iter().any(|&f| f < 20) && attempts < 2000 {
        attempts += 1;
        let cells = 1 + (rng::uniform(&mut rng) * 4.0) as usize;
        let k = 1 + (rng::uniform(&mut rng) * 8.0) as usize;
        let antennas = cells * k + 2 + (rng::uniform(&mut rng) * 24.0) as usize;
        let own: Vec<f64> = (0..cells * k).map(|_| rng::uniform_in(&mut rng, 0.2, 1.0)).collect();
        let cross: Vec<f64> = (0..cells * cells * k).map(|_| rng::uniform_in(&mut rng, 0.0, 0.3)).collect();
        let gains = LargeScaleGains::from_fn(cells, k, |l, j, kk| {
            if l == j {
                own[j * k + kk]
            } else {
                cross[(l * cells + j) * k + kk] * own[j * k + kk]
            }
        });
        let gamma: Vec<f64> = (0..cells * k).map(|_| rng::uniform_in(&mut rng, 0.1, 3.0)).collect();
        let p = Problem::new(
            gains,
            SinrTargets::new(cells, k, gamma).unwrap(),
            TauTensor::zeros(cells, k),
            antennas,
            rng::uniform_in(&mut rng, 0.01, 1.0),
        )
        .unwrap();
        for (i, scheme) in Scheme::ALL.into_iter().enumerate() {
            if found[i] >= 20 {
                continue;
            }
            let Ok(s) = asym::evaluate(scheme, &p) else { continue };
            let Some(powers) = s.powers.as_ref().filter(|_| s.feasible) else { continue };
            let primal = powers.total;
            let gap = (primal - dual_oracle(scheme, &p, &s)).abs() / primal;
            worst[i] = worst[i].max(gap);
            found[i] += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = found.iter().all(|&f| f == 20) && worst.iter().all(|&w| w <= 1e-8) && secs < 10.0;
    report(
        "duality gaps",
        passed,
        format!(
            "worst relative gap scbf {:.1e}, cobf {:.1e}, comp {:.1e} over {found:?} instances in {secs:.2}s",
            worst[0], worst[1], worst[2]
        ),
    );
}

/// Scalar fixed point of the resolvent-style equation behind the CoBF
/// priority coefficients, with the other cells' coefficients frozen at `eta`
/// and the spectral argument shifted by `z`. At `z = 0` it returns `eta_j`.
fn shifted_eta(gains: &LargeScaleGains, gamma: &SinrTargets, n: usize, eta: &[f64], j: usize, z: f64) -> f64 {
    let (cells, k) = (gains.cells(), gains.users_per_cell());
    let coeffs: Vec<f64> = (0..cells)
        .flat_map(|l| (0..k).map(move |i| (l, i)))
        .map(|(l, i)| gamma.get(l, i) * gains.cobf(j, l, i) / gains.own(l, i) / eta[l])
        .collect();
    let mut e = eta[j];
    for _ in 0..10_000 {
        let s: f64 = coeffs.iter().map(|a| a / (1.0 + a * e)).sum::<f64>() / n as f64;
        let next = 1.0 / (s + 1.0 - z);
        if (next - e).abs() <= 1e-16 * e {
            return next;
        }
        e = next;
    }
    e
}

#[test]
fn closed_form_cross_checks() {
    // Identical cells: every cross link has relative strength `c`.
    let (cells, k, n, c) = (3, 4, 40, 0.25);
    let gains = LargeScaleGains::from_fn(cells, k, |l, j, kk| if l == j { 1.0 + kk as f64 } else { c * (1.0 + kk as f64) });
    let gamma = SinrTargets::new(cells, k, (0..cells * k).map(|u| 0.5 + (u % k) as f64).collect()).unwrap();
    let eta = cobf::solve_eta(&gains, &gamma, n).unwrap();
    let oracle = 1.0
        - (0..cells)
            .flat_map(|l| (0..k).map(move |i| (l, i)))
            .map(|(l, i)| {
                let x = gamma.get(0, i) * if l == 0 { 1.0 } else { c };
                x / (1.0 + x)
            })
            .sum::<f64>()
            / n as f64;
    let sym_err = eta.iter().map(|e| (e - oracle).abs()).fold(0.0, f64::max);

    let big = SinrTargets::uniform(cells, k, 1e6).unwrap();
    let eta_hi = cobf::solve_eta(&gains, &big, n).unwrap();
    let hi_oracle = 1.0 - (k * cells) as f64 / n as f64;
    let hi_err = eta_hi.iter().map(|e| (e - hi_oracle).abs()).fold(0.0, f64::max);

    // Derivative on an asymmetric instance.
    let gains = LargeScaleGains::from_fn(3, 2, |l, j, kk| if l == j { 1.0 + 0.5 * j as f64 } else { 0.1 + 0.07 * (l + 2 * j + kk) as f64 });
    let gamma = SinrTargets::new(3, 2, vec![1.0, 2.0, 0.5, 1.5, 3.0, 0.8]).unwrap();
    let n = 20;
    let eta = cobf::solve_eta(&gains, &gamma, n).unwrap();
    let deriv = cobf::eta_prime(&gains, &gamma, n, &eta).unwrap();
    let h = 1e-5;
    let mut fd_err = 0.0f64;
    for j in 0..3 {
        let fd = (shifted_eta(&gains, &gamma, n, &eta, j, h) - shifted_eta(&gains, &gamma, n, &eta, j, -h)) / (2.0 * h);
        fd_err = fd_err.max((fd - deriv[j]).abs() / deriv[j].abs());
    }

    report(
        "closed-form cross-checks",
        sym_err <= 1e-12 && hi_err <= 1e-3 && fd_err <= 1e-5,
        format!("symmetric {sym_err:.1e} (<=1e-12), high-SINR {hi_err:.1e} (<=1e-3), derivative {fd_err:.1e} (<=1e-5)"),
    );
}

/// Median over 20 fading draws of the worst relative multiplier deviation on one drop.
fn multiplier_deviation(scheme: Scheme, n: usize, seed: u64) -> f64 {
    let cfg = two_cell_config(2, n, 1.0, 0.0, seed);
    let p = drop_problem(&cfg, 0);
    let lambda_bar = asym::evaluate(scheme, &p).unwrap().lambda_bar;
    let devs = (0..20)
        .map(|t| {
            let ch = draw_channels(&p.gains, &p.tau, n, &Substreams::new(seed, t, Purpose::Fading));
            let m = finite::fixed_point_multipliers(scheme, &ch, &p.gamma, FixedPointOptions::default()).unwrap();
            m.lambda
                .iter()
                .zip(&lambda_bar)
                .map(|(a, b)| ((a - b) / b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    median(devs)
}

#[test]
fn multiplier_convergence() {
    let mut lines = Vec::new();
    let mut passed = true;
    for scheme in Scheme::ALL {
        let medians: Vec<f64> = [16, 64, 256].iter().map(|&n| multiplier_deviation(scheme, n, 0)).collect();
        let ok = medians.windows(2).all(|w| w[1] < w[0]) && medians[2] < 0.10;
        passed &= ok;
        lines.push(format!("{scheme} {:.4}/{:.4}/{:.4}", medians[0], medians[1], medians[2]));
    }
    // The deviation is a fluctuation of order 1/sqrt(N), so how close N=256 sits
    // to the threshold varies from drop to drop.
    let other_drops = (0..20).filter(|&seed| multiplier_deviation(Scheme::Cobf, 256, seed) < 0.10).count();
    report(
        "finite-to-deterministic multiplier convergence",
        passed,
        format!(
            "median max relative deviation at N=16/64/256: {} (cobf below 10% at N=256 on {other_drops}/20 drops)",
            lines.join(", ")
        ),
    );
}

fn paired_rate_experiment() -> (Vec<ResultRow>, f64) {
    let spec = ExperimentSpec {
        network: two_cell_config(4, 16, 2.0, 0.0, 7),
        sweep: Some(Sweep {
            variable: SweepVariable::Tau2,
            values: vec![0.0, 0.1],
        }),
        trials: 200,
        mode: Mode::Finite,
        ..Default::default()
    };
    let start = Instant::now();
    let report = harness::run_experiment(&spec, Execution::default(), |_| Ok(())).unwrap();
    (report.rows, start.elapsed().as_secs_f64())
}

fn trials_of(rows: &[ResultRow], scheme: Scheme, tau2: f64) -> Vec<&ResultRow> {
    rows.iter()
        .filter(|r| r.scheme == scheme && r.sweep_value == tau2 && r.trial != TrialId::Agg)
        .collect()
}

#[test]
fn monte_carlo_matches_prediction() {
    let (rows, secs) = paired_rate_experiment();
    let mut passed = secs < 300.0;
    let mut lines = Vec::new();
    for tau2 in [0.0, 0.1] {
        for scheme in Scheme::ALL {
            let trials = trials_of(&rows, scheme, tau2);
            let totals: Vec<f64> = trials.iter().filter(|r| r.feasible()).filter_map(|r| r.total_power_w).collect();
            let preds: Vec<f64> = trials.iter().filter_map(|r| r.asym_power_w).collect();
            let mean = totals.iter().sum::<f64>() / totals.len() as f64;
            let std = (totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (totals.len() - 1) as f64).sqrt();
            let pred = preds.iter().sum::<f64>() / preds.len() as f64;
            let ok = (mean - pred).abs() <= std;
            passed &= ok;
            lines.push(format!(
                "tau2={tau2} {scheme}: |{mean:.3e} - {pred:.3e}| = {:.2} std",
                (mean - pred).abs() / std
            ));
        }
    }
    report("Monte-Carlo vs deterministic prediction", passed, format!("{} ({secs:.1}s)", lines.join("; ")));
}

#[test]
fn scheme_ordering() {
    let (rows, _) = paired_rate_experiment();
    let mut passed = true;
    let mut lines = Vec::new();
    for tau2 in [0.0, 0.1] {
        let per: Vec<Vec<&ResultRow>> = Scheme::ALL.iter().map(|&s| trials_of(&rows, s, tau2)).collect();
        // Paired comparison on trials where every scheme has a valid allocation.
        let common: Vec<usize> = (0..per[0].len()).filter(|&t| per.iter().all(|rs| rs[t].feasible())).collect();
        let means: Vec<f64> = per
            .iter()
            .map(|rs| common.iter().map(|&t| rs[t].total_power_w.unwrap()).sum::<f64>() / common.len() as f64)
            .collect();
        let ok = !common.is_empty() && means[0] >= means[1] && means[1] >= means[2];
        passed &= ok;
        lines.push(format!(
            "tau2={tau2} ({} paired trials): scbf {:.4e} >= cobf {:.4e} >= comp {:.4e}",
            common.len(),
            means[0],
            means[1],
            means[2]
        ));
    }
    report("scheme ordering", passed, lines.join("; "));
}

fn mode_b_median(scheme: Scheme, users_per_cell: usize, n: usize, seed: u64) -> f64 {
    let spec = ExperimentSpec {
        network: two_cell_config(users_per_cell, n, 1.0, 0.0, seed),
        schemes: vec![scheme],
        trials: 200,
        mode: Mode::Asymptotic,
        fixed_drop: true,
        ..Default::default()
    };
    let report = harness::run_experiment(&spec, Execution::default(), |_| Ok(())).unwrap();
    let agg = report.rows.iter().find(|r| r.trial == TrialId::Agg).unwrap();
    agg.max_sinr_rel_dev.unwrap()
}

#[test]
fn realized_sinr_targeting() {
    let sizes = [16, 32, 64];
    let mut passed = true;
    let mut lines = Vec::new();
    for scheme in Scheme::ALL {
        let medians: Vec<f64> = sizes.iter().map(|&n| mode_b_median(scheme, 1, n, 5)).collect();
        let ok = medians.windows(2).all(|w| w[1] <= w[0]) && medians[2] < 0.15;
        passed &= ok;
        lines.push(format!("{scheme} {:.3}/{:.3}/{:.3}", medians[0], medians[1], medians[2]));
    }
    // Same protocol with four UEs per cell, for reference only.
    let crowded: Vec<String> = sizes
        .iter()
        .map(|&n| format!("{:.3}", mode_b_median(Scheme::Cobf, 4, n, 5)))
        .collect();
    report(
        "realized-SINR targeting",
        passed,
        format!(
            "L=2 K=1 median worst-case deviation at N=16/32/64: {} (K=4 cobf, informational: {})",
            lines.join(", "),
            crowded.join("/")
        ),
    );
}

#[test]
fn many_antenna_limits() {
    let (cells, d, noise, gamma) = (4usize, 0.7, 0.05, 1.0);
    let p = |n: usize| {
        Problem::new(
            LargeScaleGains::uniform(cells, 1, d),
            SinrTargets::uniform(cells, 1, gamma).unwrap(),
            TauTensor::zeros(cells, 1),
            n,
            noise,
        )
        .unwrap()
    };
    // Exact limit formulas against the hand-derived `N P_T`.
    let lim = closed_forms::limit_comparison(&p(1)).unwrap();
    let per_bs_oracle = cells as f64 * noise * gamma / d;
    let exact = (lim.cobf - per_bs_oracle).abs() <= 1e-12 * per_bs_oracle
        && (lim.comp - per_bs_oracle / cells as f64).abs() <= 1e-12 * per_bs_oracle
        && lim.cobf_equals_scbf()
        && (lim.comp_saving_db() - 10.0 * (cells as f64).log10()).abs() <= 1e-12;

    let n = 512;
    let problem = p(n);
    let det = |s| asym::evaluate(s, &problem).unwrap().powers().unwrap().total;
    let det_ratio = det(Scheme::Cobf) / det(Scheme::Comp);
    let mut sums = [0.0f64; 2];
    let trials = 20;
    for t in 0..trials {
        let ch = draw_channels(&problem.gains, &problem.tau, n, &Substreams::new(3, t, Purpose::Fading));
        for (i, s) in [Scheme::Cobf, Scheme::Comp].into_iter().enumerate() {
            sums[i] += finite::solve(s, &ch, &problem.gamma, noise, FixedPointOptions::default()).unwrap().total_power;
        }
    }
    let mc_ratio = sums[0] / sums[1];
    let l = cells as f64;
    let close = ((det_ratio - l) / l).abs() <= 0.05 && ((mc_ratio - l) / l).abs() <= 0.05;
    report(
        "many-antenna limits",
        exact && close,
        format!(
            "limit saving {:.6} dB (10 log L = {:.6}), cobf == scbf limit {}, N=512 power ratio cobf/comp deterministic {det_ratio:.4}, Monte-Carlo {mc_ratio:.4} (L = {l})",
            lim.comp_saving_db(),
            10.0 * l.log10(),
            lim.cobf_equals_scbf()
        ),
    );
}

#[test]
fn two_cell_case_study() {
    let r = closed_forms::two_cell_case_study(0.5, 1.0, 4, 1.0).unwrap();
    // ScBF thresholds evaluated by hand: sqrt(5/7) and sqrt(6/7).
    let expect = [(5.0f64 / 7.0).sqrt(), (6.0f64 / 7.0).sqrt()];
    let err = (r.tau_max_scbf[0].value - expect[0]).abs().max((r.tau_max_scbf[1].value - expect[1]).abs());
    let passed = r.cobf_lambda_ordered()
        && r.comp_lambda_ordered()
        && r.scbf_tau_ordered()
        && r.cobf_tau_ordered()
        && err <= 1e-9
        && (expect[0] - 0.845154).abs() < 1e-6
        && (expect[1] - 0.925820).abs() < 1e-6;
    report(
        "two-cell case study",
        passed,
        format!(
            "cobf lambda {:.6} < {:.6}, comp lambda {:.6} < {:.6}, scbf tau_max {:.6} < {:.6} (error {err:.1e}), cobf tau_max {:.6} < {:.6}",
            r.lambda_cobf[0],
            r.lambda_cobf[1],
            r.lambda_comp[0],
            r.lambda_comp[1],
            r.tau_max_scbf[0].value,
            r.tau_max_scbf[1].value,
            r.tau_max_cobf[0].value,
            r.tau_max_cobf[1].value
        ),
    );
}

/// Log-scale bisection for the first `c` in `[lo, hi]` where `ok` flips to false.
fn boundary(ok: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    assert!(ok(lo) && !ok(hi));
    while hi - lo > 1e-10 * hi {
        let mid = (lo * hi).sqrt();
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn feasibility_sharpness() {
    let mut passed = true;
    let mut lines = Vec::new();
    for scheme in Scheme::ALL {
        // CoMP's radius is bounded in the cross-gain scale, so it needs a base
        // point already close to the boundary.
        let cfg = match scheme {
            Scheme::Comp => two_cell_config(4, 16, 2.0, 0.5, 1),
            Scheme::Cobf | Scheme::Scbf => two_cell_config(4, 16, 2.0, 0.1, 1),
        };
        let base = drop_problem(&cfg, 0);
        let at = |c: f64| asym::evaluate(scheme, &base.with_gains(base.gains.scale_cross(c))).unwrap();
        let grid: Vec<f64> = (0..=30).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        let Some(hi) = grid.iter().copied().find(|&c| at(c).spectral_radius >= 1.0) else {
            passed = false;
            lines.push(format!("{scheme}: no crossing found"));
            continue;
        };
        let lo = grid.iter().copied().rev().find(|&c| c < hi).unwrap();
        let by_radius = boundary(|c| at(c).spectral_radius < 1.0, lo, hi);
        let by_solve = boundary(|c| at(c).powers.is_some(), lo, hi);
        let ok = (by_radius - by_solve).abs() <= 1e-6;
        passed &= ok;
        lines.push(format!("{scheme}: c* = {by_radius:.9} vs {by_solve:.9}"));
    }
    report("feasibility sharpness", passed, lines.join("; "));
}
