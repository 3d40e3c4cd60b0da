use coopmimo::asym::{self, cobf, comp, scbf, scbf::GammaMax};
use coopmimo::model::{LargeScaleGains, Problem, SinrTargets, TauTensor};
use coopmimo::Scheme;
use proptest::prelude::*;

fn instance(cells: usize, k: usize, n: usize, cross: f64, gamma: f64, tau: f64) -> Problem {
    let gains = LargeScaleGains::from_fn(cells, k, |l, j, kk| {
        if l == j {
            1.0 + 0.3 * kk as f64
        } else {
            cross * (1.0 + 0.1 * ((l + 2 * j + kk) % 3) as f64)
        }
    });
    Problem::new(
        gains,
        SinrTargets::uniform(cells, k, gamma).unwrap(),
        TauTensor::uniform(cells, k, tau).unwrap(),
        n,
        0.1,
    )
    .unwrap()
}

#[test]
fn single_cell_schemes_coincide() {
    let p = instance(1, 3, 10, 0.0, 1.2, 0.2);
    let s: Vec<_> = Scheme::ALL.iter().map(|&x| asym::evaluate(x, &p).unwrap()).collect();
    for other in &s[1..] {
        for (a, b) in s[0].lambda_bar.iter().zip(&other.lambda_bar) {
            assert!((a - b).abs() <= 1e-10 * a, "{a} vs {b}");
        }
        let (ta, tb) = (s[0].powers().unwrap().total, other.powers().unwrap().total);
        assert!((ta - tb).abs() <= 1e-10 * ta, "{ta} vs {tb}");
    }
}

#[test]
fn scbf_multipliers_match_closed_form() {
    let p = instance(3, 4, 20, 0.2, 0.9, 0.0);
    let s = scbf::analyze(&p).unwrap();
    for j in 0..3 {
        let load: f64 = (0..4).map(|k| p.gamma.get(j, k) / (1.0 + p.gamma.get(j, k))).sum::<f64>() / 20.0;
        for k in 0..4 {
            let oracle = p.gamma.get(j, k) / (p.gains.own(j, k) * (1.0 - load));
            assert!((s.lambda_bar[j * 4 + k] - oracle).abs() <= 1e-14 * oracle);
        }
    }
}

#[test]
fn isolated_cell_has_no_target_ceiling() {
    let p = instance(1, 2, 8, 0.0, 1.0, 0.0);
    let caps = scbf::gamma_max(&p.gains, &p.tau, p.antennas).unwrap();
    assert_eq!(caps, vec![GammaMax::Unbounded]);
}

#[test]
fn cobf_threshold_sits_on_the_row_sum_boundary() {
    let p = instance(3, 2, 16, 0.3, 1.0, 0.0);
    let thresholds = cobf::tau_max(&p.gains, &p.gamma, p.antennas).unwrap();
    for (j, t) in thresholds.iter().enumerate() {
        assert!(!t.infeasible_at_zero);
        for (scale, expect) in [(1.0 - 1e-6, true), (1.0 + 1e-6, false)] {
            let mut tau = TauTensor::zeros(3, 2);
            for l in 0..3 {
                for k in 0..2 {
                    tau.set(l, j, k, t.value * scale);
                }
            }
            let q = p.with_tau(tau);
            let c = cobf::analyze(&q).unwrap();
            assert_eq!(cobf::row_sum_condition(&c.system)[j], expect, "cell {j} scale {scale}");
        }
    }
}

#[test]
fn comp_threshold_sits_on_the_column_sum_boundary() {
    let p = instance(2, 2, 8, 0.4, 1.0, 0.0);
    let thresholds = comp::tau_max(&p).unwrap();
    for (i, t) in thresholds.iter().enumerate() {
        let mut taus = vec![0.0; 4];
        taus[i] = t.value;
        let q = p.with_tau(TauTensor::per_user(2, 2, &taus).unwrap());
        let c = comp::analyze(&q).unwrap();
        assert!((comp::column_sums(&c.z)[i] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn overloaded_joint_array_is_infeasible() {
    // 12 UEs with gamma / (1 + gamma) = 0.9 each against 2 x 5 antennas.
    let p = instance(2, 6, 5, 0.3, 9.0, 0.0);
    let err = comp::analyze(&p).unwrap_err();
    assert!(err.is_infeasible(), "{err}");
    let s = asym::evaluate(Scheme::Comp, &p);
    assert!(s.map_or_else(|e| e.is_infeasible(), |s| !s.feasible));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn feasible_iff_positive_powers_and_targets_met(
        cells in 1usize..4, k in 1usize..5, extra in 1usize..24, cross in 0.0f64..0.8, gamma in 0.1f64..4.0, tau in 0.0f64..0.6
    ) {
        let n = cells * k + extra;
        let p = instance(cells, k, n, cross, gamma, tau);
        for scheme in Scheme::ALL {
            let s = match asym::evaluate(scheme, &p) {
                Ok(s) => s,
                Err(e) => { prop_assert!(e.is_infeasible(), "{}", e); continue; }
            };
            prop_assert_eq!(s.feasible, s.powers.is_some(), "{} rho {}", scheme, s.spectral_radius);
            let Some(powers) = s.powers.as_ref() else { continue };
            prop_assert!(powers.per_user.iter().all(|x| *x > 0.0));
            let sinr = match scheme {
                Scheme::Cobf => { let a = cobf::analyze(&p).unwrap(); cobf::sinr_bar(&p, &a.beta, &a.system.gamma_diag, &powers.per_user) }
                Scheme::Scbf => { let a = scbf::analyze(&p).unwrap(); scbf::sinr_bar(&p, &a.alpha, &a.delta, &powers.per_user) }
                Scheme::Comp => { let a = comp::analyze(&p).unwrap(); comp::sinr_bar(&p, &a.epsilon, &a.eps_prime, &powers.per_user) }
            };
            for v in sinr {
                prop_assert!((v - gamma).abs() <= 1e-8 * gamma, "{} {} vs {}", scheme, v, gamma);
            }
        }
    }

    #[test]
    fn cobf_coefficients_solve_their_equation(cells in 1usize..4, k in 1usize..5, cross in 0.0f64..1.0, gamma in 0.05f64..10.0) {
        let n = 2 * cells * k + 1;
        let p = instance(cells, k, n, cross, gamma, 0.0);
        let eta = cobf::solve_eta(&p.gains, &p.gamma, n).unwrap();
        prop_assert!(eta.iter().all(|e| *e > 0.0 && *e <= 1.0));
        let (recip, linear) = cobf::eta_residuals(&p.gains, &p.gamma, n, &eta);
        prop_assert!(recip < 1e-10 && linear < 1e-10);
    }

    #[test]
    fn more_antennas_never_cost_power(cells in 1usize..4, k in 1usize..4, cross in 0.0f64..0.5, gamma in 0.1f64..2.0) {
        let n = 2 * cells * k + 2;
        for scheme in Scheme::ALL {
            let a = asym::evaluate(scheme, &instance(cells, k, n, cross, gamma, 0.1)).unwrap();
            let b = asym::evaluate(scheme, &instance(cells, k, 2 * n, cross, gamma, 0.1)).unwrap();
            if let (Ok(pa), Ok(pb)) = (a.powers(), b.powers()) {
                prop_assert!(pb.total <= pa.total * (1.0 + 1e-12), "{} {} -> {}", scheme, pa.total, pb.total);
            }
        }
    }
}
