//! Explicit special cases: symmetric and high-SINR priority coefficients,
//! duality gaps, the many-antenna (MRT) limit, and a two-cell example with one
//! UE per cell where cell 2's UE sits closer to its own BS.

use crate::asym::{self, cobf, comp, scbf, AsymSummary, TauMax};
use crate::error::{Error, Result};
use crate::model::{LargeScaleGains, Problem, SinrTargets, TauTensor};
use crate::Scheme;

/// Common `eta` when every cell sees the same picture. `ratios[l * K + i]` is
/// the relative strength `d_jli / d_lli` (1 for the own cell).
pub fn eta_symmetric(gamma: &[f64], ratios: &[f64], antennas: usize) -> f64 {
    let k = gamma.len();
    let s: f64 = ratios
        .iter()
        .enumerate()
        .map(|(idx, r)| {
            let x = gamma[idx % k] * r;
            x / (1.0 + x)
        })
        .sum();
    1.0 - s / antennas as f64
}

/// `1 - K L / N`, the limit of `eta` as every target grows without bound.
pub fn eta_high_sinr(users_per_cell: usize, cells: usize, antennas: usize) -> Result<f64> {
    let eta = 1.0 - (users_per_cell * cells) as f64 / antennas as f64;
    if eta > 0.0 {
        Ok(eta)
    } else {
        Err(Error::Infeasible {
            scheme: Scheme::Cobf,
            spectral_radius: f64::INFINITY,
        })
    }
}

/// `|primal - dual|` in Watts for a feasible deterministic solution.
pub fn duality_gap(summary: &AsymSummary) -> Result<f64> {
    let primal = summary.powers()?.total;
    Ok((primal - summary.dual_objective).abs())
}

/// `N * P_T` as `N -> infinity` with `K` fixed: every precoder becomes MRT.
pub fn mrt_limit_powers(scheme: Scheme, p: &Problem) -> Result<f64> {
    let (cells, k) = (p.cells(), p.users_per_cell());
    let mut total = 0.0;
    for j in 0..cells {
        for i in 0..k {
            let g = p.gamma.get(j, i);
            if g == 0.0 {
                continue;
            }
            let q = 1.0 - p.tau.get(j, j, i).powi(2);
            if q <= 0.0 {
                return Err(Error::Degenerate("MRT limit with tau = 1".into()));
            }
            let gain = match scheme {
                Scheme::Cobf | Scheme::Scbf => p.gains.own(j, i),
                Scheme::Comp => (0..cells).map(|l| p.gains.cobf(l, j, i)).sum(),
            };
            total += p.noise_w / q * g / gain;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitReport {
    pub scbf: f64,
    pub cobf: f64,
    pub comp: f64,
}

impl LimitReport {
    pub fn comp_strictly_lowest(&self) -> bool {
        self.comp < self.cobf && self.comp < self.scbf
    }

    pub fn cobf_equals_scbf(&self) -> bool {
        self.cobf == self.scbf
    }

    /// CoMP saving over CoBF in dB.
    pub fn comp_saving_db(&self) -> f64 {
        10.0 * (self.cobf / self.comp).log10()
    }
}

pub fn limit_comparison(p: &Problem) -> Result<LimitReport> {
    Ok(LimitReport {
        scbf: mrt_limit_powers(Scheme::Scbf, p)?,
        cobf: mrt_limit_powers(Scheme::Cobf, p)?,
        comp: mrt_limit_powers(Scheme::Comp, p)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyResult {
    pub alpha: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub lambda_scbf: [f64; 2],
    pub lambda_cobf: [f64; 2],
    pub lambda_comp: [f64; 2],
    /// Published closed form.
    pub tau_max_scbf: [TauMax; 2],
    /// Exact boundary of the row-sum condition.
    pub tau_max_scbf_condition: [TauMax; 2],
    pub tau_max_cobf: [TauMax; 2],
    pub tau_max_comp: [TauMax; 2],
}

impl CaseStudyResult {
    pub fn cobf_lambda_ordered(&self) -> bool {
        self.lambda_cobf[0] < self.lambda_cobf[1]
    }

    pub fn comp_lambda_ordered(&self) -> bool {
        self.lambda_comp[0] < self.lambda_comp[1]
    }

    pub fn scbf_tau_ordered(&self) -> bool {
        self.tau_max_scbf[0].value < self.tau_max_scbf[1].value
    }

    pub fn cobf_tau_ordered(&self) -> bool {
        self.tau_max_cobf[0].value < self.tau_max_cobf[1].value
    }

    pub fn comp_tau_ordered(&self) -> bool {
        self.tau_max_comp[0].value < self.tau_max_comp[1].value
    }
}

/// Gains of the two-cell example: UE 1 is equally far from both BSs, UE 2
/// sees BS 1 attenuated by `alpha`.
pub fn case_study_gains(alpha: f64, d: f64) -> LargeScaleGains {
    LargeScaleGains::from_fn(2, 1, |l, j, _| if l == 0 && j == 1 { alpha * d } else { d })
}

/// Solves the two scalar equations for `(eta_1, eta_2)` by iterating on the ratio
/// `eta_2 / eta_1`.
fn case_study_eta(alpha: f64, gamma: f64, antennas: usize) -> Result<(f64, f64)> {
    let n = antennas as f64;
    let vs = 1.0 - gamma / (1.0 + gamma) / n;
    let (e, _) = asym::picard(
        vec![1.0, 1.0],
        |e| {
            let ratio = e[1] / e[0];
            vec![
                vs - gamma / (ratio / alpha + gamma) / n,
                vs - gamma / (1.0 / ratio + gamma) / n,
            ]
        },
        asym::FIXED_POINT_TOL,
        asym::FIXED_POINT_MAX_ITER,
        "two-cell priority coefficients",
    )?;
    Ok((e[0], e[1]))
}

pub fn two_cell_case_study(alpha: f64, gamma: f64, antennas: usize, d: f64) -> Result<CaseStudyResult> {
    if !(alpha > 0.0 && alpha <= 1.0) || !(gamma > 0.0) || antennas < 2 || !(d > 0.0) {
        return Err(Error::Config("case study needs 0 < alpha <= 1, gamma > 0, N >= 2, d > 0".into()));
    }
    let (eta1, eta2) = case_study_eta(alpha, gamma, antennas)?;
    let gains = case_study_gains(alpha, d);
    let targets = SinrTargets::uniform(2, 1, gamma)?;
    let problem = Problem::new(gains.clone(), targets.clone(), TauTensor::zeros(2, 1), antennas, 1.0)?;

    let vs = scbf::varsigma(&targets, antennas);
    let lambda_scbf = scbf::lambda_bar(&gains, &targets, &vs);
    let lambda_cobf = cobf::lambda_bar(&gains, &targets, &[eta1, eta2]);
    let mu = comp::solve_mu(&gains, &targets, antennas)?;
    let (_, lambda_comp) = comp::epsilon_weights(&gains, &targets, &mu);

    let pair = |v: Vec<TauMax>| [v[0], v[1]];
    Ok(CaseStudyResult {
        alpha,
        eta1,
        eta2,
        lambda_scbf: [lambda_scbf[0], lambda_scbf[1]],
        lambda_cobf: [lambda_cobf[0], lambda_cobf[1]],
        lambda_comp: [lambda_comp[0], lambda_comp[1]],
        tau_max_scbf: pair(scbf::tau_max(&gains, &targets, antennas)),
        tau_max_scbf_condition: pair(scbf::tau_max_from_condition(&gains, &targets, antennas)),
        tau_max_cobf: pair(cobf::tau_max(&gains, &targets, antennas)?),
        tau_max_comp: pair(comp::tau_max(&problem)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_high_sinr() {
        assert!((eta_symmetric(&[1.0], &[1.0, 1.0], 4) - 0.75).abs() < 1e-15);
        assert_eq!(eta_symmetric(&[0.0], &[1.0, 1.0], 4), 1.0);
        assert!((eta_high_sinr(1, 2, 4).unwrap() - 0.5).abs() < 1e-15);
        assert!(eta_high_sinr(2, 2, 4).is_err());
    }

    #[test]
    fn single_user_mrt_limit_is_noise() {
        let p = Problem::new(
            LargeScaleGains::uniform(1, 1, 1.0),
            SinrTargets::uniform(1, 1, 1.0).unwrap(),
            TauTensor::zeros(1, 1),
            8,
            0.25,
        )
        .unwrap();
        for s in Scheme::ALL {
            assert_eq!(mrt_limit_powers(s, &p).unwrap(), 0.25);
        }
    }

    #[test]
    fn case_study_symmetric_reduction() {
        let r = two_cell_case_study(1.0, 1.0, 4, 1.0).unwrap();
        assert!((r.eta1 - 0.75).abs() < 1e-12 && (r.eta2 - 0.75).abs() < 1e-12);
    }
}
