//! Single-cell beamforming: each BS regularizes only against its own UEs, so
//! its priority coefficient `varsigma_j` is explicit and other cells'
//! interference reaches a UE unattenuated.

use nalgebra::{DMatrix, DVector};

use super::{AsymPowers, AsymSummary, TauMax};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LargeScaleGains, Problem, SinrTargets, TauTensor};
use crate::Scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct ScbfAsymptotic {
    pub varsigma: Vec<f64>,
    pub lambda_bar: Vec<f64>,
    /// `(l, j, k)` flattened as `(l L + j) K + k`.
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub u: DMatrix<f64>,
    pub b: DVector<f64>,
    pub spectral_radius: f64,
    pub feasible: bool,
    pub powers: Option<AsymPowers>,
    pub tau_max: Vec<TauMax>,
    pub gamma_max: Vec<GammaMax>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMax {
    Finite(f64),
    /// Every target is admissible.
    Unbounded,
}

impl ScbfAsymptotic {
    pub fn summary(&self, p: &Problem) -> AsymSummary {
        AsymSummary {
            scheme: Scheme::Scbf,
            dual_objective: self
                .powers
                .as_ref()
                .map(|pw| dual_objective(p, &self.lambda_bar, &pw.per_bs))
                .unwrap_or(f64::NAN),
            lambda_bar: self.lambda_bar.clone(),
            spectral_radius: self.spectral_radius,
            feasible: self.feasible,
            powers: self.powers.clone(),
        }
    }
}

/// Per-cell slack `1 - (1/N) sum_k gamma_jk / (1 + gamma_jk)`; positive when
/// the cell's own UEs alone leave spatial room.
pub fn check_assumption(gamma: &SinrTargets, antennas: usize) -> Vec<(bool, f64)> {
    varsigma(gamma, antennas).into_iter().map(|s| (s > 0.0, s)).collect()
}

pub fn varsigma(gamma: &SinrTargets, antennas: usize) -> Vec<f64> {
    let n = antennas as f64;
    (0..gamma.cells())
        .map(|j| 1.0 - gamma.cell(j).iter().map(|g| g / (1.0 + g)).sum::<f64>() / n)
        .collect()
}

pub fn lambda_bar(gains: &LargeScaleGains, gamma: &SinrTargets, varsigma: &[f64]) -> Vec<f64> {
    let k = gains.users_per_cell();
    (0..gains.users())
        .map(|u| {
            let (j, kk) = (u / k, u % k);
            gamma.get(j, kk) / (varsigma[j] * gains.own(j, kk))
        })
        .collect()
}

/// Own-cell leakage after intra-cell suppression; other cells' gains unchanged.
pub fn alpha_coeffs(gains: &LargeScaleGains, gamma: &SinrTargets, tau: &TauTensor) -> Vec<f64> {
    let (cells, k) = (gains.cells(), gains.users_per_cell());
    let mut alpha = Vec::with_capacity(cells * cells * k);
    for l in 0..cells {
        for j in 0..cells {
            for kk in 0..k {
                let d = gains.cobf(l, j, kk);
                alpha.push(if l == j {
                    d * super::leakage(tau.get(j, j, kk), gamma.get(j, kk))
                } else {
                    d
                });
            }
        }
    }
    alpha
}

#[inline]
fn alpha_at(alpha: &[f64], cells: usize, k: usize, l: usize, j: usize, kk: usize) -> f64 {
    alpha[(l * cells + j) * k + kk]
}

/// `Delta` (diagonal), `U` and `b` of the per-BS system `Delta P = U P + sigma^2 b`.
pub fn assemble_delta_u(p: &Problem, alpha: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>, DVector<f64>)> {
    let (cells, k) = (p.cells(), p.users_per_cell());
    let n = p.antennas as f64;
    let mut delta = vec![1.0; cells];
    let mut u = DMatrix::zeros(cells, cells);
    let mut b = DVector::zeros(cells);
    for j in 0..cells {
        for kk in 0..k {
            let g = p.gamma.get(j, kk);
            delta[j] -= (g / (1.0 + g)).powi(2) / n;
            if g == 0.0 {
                continue;
            }
            let w = g / (p.gains.own(j, kk) * super::own_link_quality(p.tau.get(j, j, kk), "single-cell beamforming")?);
            b[j] += w / n;
            for l in 0..cells {
                u[(j, l)] += w * alpha_at(alpha, cells, k, l, j, kk) / n;
            }
        }
    }
    Ok((delta, u, b))
}

pub fn feasibility(delta: &[f64], u: &DMatrix<f64>) -> (f64, bool) {
    if delta.iter().any(|d| *d <= 0.0) {
        return (f64::INFINITY, false);
    }
    let mut m = u.clone();
    for (j, d) in delta.iter().enumerate() {
        m.row_mut(j).unscale_mut(*d);
    }
    let rho = linalg::perron_root(&m);
    (rho, rho < 1.0)
}

/// Solves `(Delta - U) P = sigma^2 b`; fails unless the solution is positive.
pub fn solve_powers(p: &Problem, alpha: &[f64], delta: &[f64], u: &DMatrix<f64>, b: &DVector<f64>) -> Result<AsymPowers> {
    let (cells, k) = (p.cells(), p.users_per_cell());
    let infeasible = || Error::Infeasible {
        scheme: Scheme::Scbf,
        spectral_radius: feasibility(delta, u).0,
    };
    if delta.iter().any(|d| *d <= 0.0) {
        return Err(infeasible());
    }
    let a = DMatrix::from_diagonal(&DVector::from_column_slice(delta)) - u;
    let per_bs = linalg::solve(&a, &(b * p.noise_w), "per-BS power system").map_err(|_| infeasible())?;
    for j in 0..cells {
        if per_bs[j] < 0.0 || (b[j] > 0.0 && per_bs[j] <= 0.0) {
            return Err(infeasible());
        }
    }
    let mut per_user = Vec::with_capacity(cells * k);
    for j in 0..cells {
        for kk in 0..k {
            let g = p.gamma.get(j, kk);
            if g == 0.0 {
                per_user.push(0.0);
                continue;
            }
            let q = super::own_link_quality(p.tau.get(j, j, kk), "single-cell beamforming")?;
            let interference: f64 = (0..cells).map(|l| alpha_at(alpha, cells, k, l, j, kk) * per_bs[l]).sum();
            per_user.push(g / (p.gains.own(j, kk) * q) * (interference + p.noise_w) / delta[j]);
        }
    }
    Ok(AsymPowers {
        total: per_bs.sum(),
        per_bs: per_bs.iter().copied().collect(),
        per_user,
    })
}

pub fn sinr_bar(p: &Problem, alpha: &[f64], delta: &[f64], powers: &[f64]) -> Vec<f64> {
    let (cells, k) = (p.cells(), p.users_per_cell());
    let n = p.antennas as f64;
    let per_bs: Vec<f64> = (0..cells).map(|l| powers[l * k..(l + 1) * k].iter().sum::<f64>() / n).collect();
    (0..cells * k)
        .map(|u| {
            let (j, kk) = (u / k, u % k);
            let t = p.tau.get(j, j, kk);
            let interference: f64 = (0..cells).map(|l| alpha_at(alpha, cells, k, l, j, kk) * per_bs[l]).sum();
            delta[j] * powers[u] * p.gains.own(j, kk) * (1.0 - t * t) / (interference + p.noise_w)
        })
        .collect()
}

/// Uplink objective `(1/N) sum lambda_jk (sum_{l != j} d_ljk P_l + sigma^2)`:
/// other cells' power acts as extra noise for a single-cell precoder.
pub fn dual_objective(p: &Problem, lambda_bar: &[f64], per_bs: &[f64]) -> f64 {
    let (cells, k) = (p.cells(), p.users_per_cell());
    let n = p.antennas as f64;
    let mut total = 0.0;
    for j in 0..cells {
        for kk in 0..k {
            let extra: f64 = (0..cells).filter(|&l| l != j).map(|l| p.gains.cobf(l, j, kk) * per_bs[l]).sum();
            total += lambda_bar[j * k + kk] * (extra + p.noise_w);
        }
    }
    total / n
}

/// `A_j = (1/N) sum_k (tau_jjk^2 + sum_{l != j} d_ljk / d_jjk) / (1 - tau_jjk^2)`.
pub fn interference_load(gains: &LargeScaleGains, tau: &TauTensor, antennas: usize) -> Result<Vec<f64>> {
    let (cells, k) = (gains.cells(), gains.users_per_cell());
    let n = antennas as f64;
    (0..cells)
        .map(|j| {
            let mut a = 0.0;
            for kk in 0..k {
                let t = tau.get(j, j, kk);
                let cross: f64 = (0..cells).filter(|&l| l != j).map(|l| gains.cobf(l, j, kk)).sum::<f64>() / gains.own(j, kk);
                a += (t * t + cross) / super::own_link_quality(t, "single-cell beamforming")?;
            }
            Ok(a / n)
        })
        .collect()
}

fn cross_ratio_sum(gains: &LargeScaleGains, j: usize, kk: usize) -> f64 {
    (0..gains.cells()).filter(|&l| l != j).map(|l| gains.cobf(l, j, kk)).sum::<f64>() / gains.own(j, kk)
}

/// Per-cell CSI threshold in the published closed form
/// `sqrt((1 - (1/N) sum_k [g/(1+g) + g c_k]) / (1 - (1/N) sum_k g^2/(1+g)))`,
/// with `c_k` the summed relative strength of the other cells. See
/// [`tau_max_from_condition`] for the exact boundary of the row-sum test.
pub fn tau_max(gains: &LargeScaleGains, gamma: &SinrTargets, antennas: usize) -> Vec<TauMax> {
    let n = antennas as f64;
    (0..gains.cells())
        .map(|j| {
            let (mut num, mut den) = (1.0, 1.0);
            for kk in 0..gains.users_per_cell() {
                let g = gamma.get(j, kk);
                num -= (g / (1.0 + g) + g * cross_ratio_sum(gains, j, kk)) / n;
                den -= g * g / (1.0 + g) / n;
            }
            radicand_to_tau(num, den)
        })
        .collect()
}

/// Exact boundary of `sum_l U_jl <= Delta_jj` with `tau_jjk = tau_j`:
/// the denominator is `1 + (1/N) sum_k g^2/(1+g)`.
pub fn tau_max_from_condition(gains: &LargeScaleGains, gamma: &SinrTargets, antennas: usize) -> Vec<TauMax> {
    let n = antennas as f64;
    (0..gains.cells())
        .map(|j| {
            let (mut num, mut den) = (1.0, 1.0);
            for kk in 0..gains.users_per_cell() {
                let g = gamma.get(j, kk);
                num -= (g / (1.0 + g) + g * cross_ratio_sum(gains, j, kk)) / n;
                den += g * g / (1.0 + g) / n;
            }
            radicand_to_tau(num, den)
        })
        .collect()
}

fn radicand_to_tau(num: f64, den: f64) -> TauMax {
    if num < 0.0 || den <= 0.0 {
        TauMax {
            value: 0.0,
            infeasible_at_zero: true,
        }
    } else {
        TauMax {
            value: (num / den).sqrt().min(1.0),
            infeasible_at_zero: false,
        }
    }
}

/// Largest common target per cell: positive root of
/// `A g^2 + (A + K/N - 1) g - 1 = 0`, the row-sum condition at equality.
pub fn gamma_max(gains: &LargeScaleGains, tau: &TauTensor, antennas: usize) -> Result<Vec<GammaMax>> {
    let kn = gains.users_per_cell() as f64 / antennas as f64;
    Ok(interference_load(gains, tau, antennas)?
        .into_iter()
        .map(|a| {
            let b = a + kn - 1.0;
            let disc = (b * b + 4.0 * a).sqrt();
            if b > 0.0 {
                GammaMax::Finite(2.0 / (b + disc))
            } else if a > 0.0 {
                GammaMax::Finite((disc - b) / (2.0 * a))
            } else {
                GammaMax::Unbounded
            }
        })
        .collect())
}

pub fn analyze(p: &Problem) -> Result<ScbfAsymptotic> {
    let varsigma = varsigma(&p.gamma, p.antennas);
    let lambda_bar = lambda_bar(&p.gains, &p.gamma, &varsigma);
    let alpha = alpha_coeffs(&p.gains, &p.gamma, &p.tau);
    let (delta, u, b) = assemble_delta_u(p, &alpha)?;
    let (spectral_radius, feasible) = feasibility(&delta, &u);
    let powers = solve_powers(p, &alpha, &delta, &u, &b).ok();
    Ok(ScbfAsymptotic {
        tau_max: tau_max(&p.gains, &p.gamma, p.antennas),
        gamma_max: gamma_max(&p.gains, &p.tau, p.antennas)?,
        varsigma,
        lambda_bar,
        alpha,
        delta,
        u,
        b,
        spectral_radius,
        feasible,
        powers,
    })
}
