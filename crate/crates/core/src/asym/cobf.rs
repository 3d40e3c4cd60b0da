//! Coordinated beamforming.
//!
//! Per-cell priority coefficients `eta` solve a coupled fixed point driven by
//! the relative strengths `d_jli / d_lli`; multipliers, SINRs and powers follow
//! in closed form. Feasibility is `rho(Gamma^{-1} F) < 1`.

use nalgebra::{DMatrix, DVector};

use super::{AsymPowers, AsymSummary, TauMax};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LargeScaleGains, Problem, SinrTargets, TauTensor};
use crate::Scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct CobfAsymptotic {
    pub eta: Vec<f64>,
    pub eta_prime: Vec<f64>,
    pub lambda_bar: Vec<f64>,
    /// `(l, j, k)` flattened as `(l L + j) K + k`.
    pub beta: Vec<f64>,
    pub system: PowerSystem,
    pub spectral_radius: f64,
    pub feasible: bool,
    /// Present when the linear power solve returns positive powers.
    pub powers: Option<AsymPowers>,
}

/// `Gamma P = F P + sigma^2 b` in per-BS powers `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSystem {
    pub gamma_diag: Vec<f64>,
    pub f: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl CobfAsymptotic {
    pub fn summary(&self, p: &Problem) -> AsymSummary {
        AsymSummary {
            scheme: Scheme::Cobf,
            dual_objective: self.lambda_bar.iter().sum::<f64>() * p.noise_w / p.antennas as f64,
            lambda_bar: self.lambda_bar.clone(),
            spectral_radius: self.spectral_radius,
            feasible: self.feasible,
            powers: self.powers.clone(),
        }
    }
}

/// `gamma_li (d_jli / d_lli) (eta_j / eta_l)`: how hard BS `j` works to null UE `(l, i)`.
#[inline]
fn suppression(g: &LargeScaleGains, gamma: &SinrTargets, eta: &[f64], j: usize, l: usize, i: usize) -> f64 {
    gamma.get(l, i) * g.cobf(j, l, i) / g.own(l, i) * eta[j] / eta[l]
}

fn eta_map(g: &LargeScaleGains, gamma: &SinrTargets, n: f64, eta: &[f64]) -> Vec<f64> {
    let (cells, k) = (g.cells(), g.users_per_cell());
    (0..cells)
        .map(|j| {
            let mut s = 0.0;
            for l in 0..cells {
                for i in 0..k {
                    let r = gamma.get(l, i) * g.cobf(j, l, i) / g.own(l, i);
                    s += (r / eta[l]) / (1.0 + r * eta[j] / eta[l]);
                }
            }
            1.0 / (s / n + 1.0)
        })
        .collect()
}

/// Picard iteration from `eta = 1`.
pub fn solve_eta(gains: &LargeScaleGains, gamma: &SinrTargets, antennas: usize) -> Result<Vec<f64>> {
    let n = antennas as f64;
    let init = vec![1.0; gains.cells()];
    super::picard(
        init,
        |eta| eta_map(gains, gamma, n, eta),
        super::FIXED_POINT_TOL,
        super::FIXED_POINT_MAX_ITER,
        "cell priority fixed point",
    )
    .map(|(eta, _)| eta)
}

/// Residuals of the reciprocal form and of the equivalent `eta = 1 - ...` form.
pub fn eta_residuals(gains: &LargeScaleGains, gamma: &SinrTargets, antennas: usize, eta: &[f64]) -> (f64, f64) {
    let n = antennas as f64;
    let mapped = eta_map(gains, gamma, n, eta);
    let recip = eta.iter().zip(&mapped).map(|(a, b)| (a - b).abs() / a).fold(0.0, f64::max);
    let mut linear = 0.0f64;
    for j in 0..gains.cells() {
        let mut s = 0.0;
        for l in 0..gains.cells() {
            for i in 0..gains.users_per_cell() {
                let x = suppression(gains, gamma, eta, j, l, i);
                s += x / (1.0 + x);
            }
        }
        linear = linear.max((eta[j] - (1.0 - s / n)).abs() / eta[j]);
    }
    (recip, linear)
}

/// `[Gamma]_jj = 1 - (1/N) sum_{l,i} x^2 / (1 + x)^2` with `x` the suppression level.
pub fn gamma_diag(gains: &LargeScaleGains, gamma: &SinrTargets, antennas: usize, eta: &[f64]) -> Vec<f64> {
    let n = antennas as f64;
    (0..gains.cells())
        .map(|j| {
            let mut s = 0.0;
            for l in 0..gains.cells() {
                for i in 0..gains.users_per_cell() {
                    let x = suppression(gains, gamma, eta, j, l, i);
                    s += (x / (1.0 + x)).powi(2);
                }
            }
            1.0 - s / n
        })
        .collect()
}

/// Derivative of the trace functional: `eta_j^2 / [Gamma]_jj`.
pub fn eta_prime(gains: &LargeScaleGains, gamma: &SinrTargets, antennas: usize, eta: &[f64]) -> Result<Vec<f64>> {
    gamma_diag(gains, gamma, antennas, eta)
        .into_iter()
        .zip(eta)
        .map(|(den, e)| {
            if den > 0.0 {
                Ok(e * e / den)
            } else {
                Err(Error::Infeasible {
                    scheme: Scheme::Cobf,
                    spectral_radius: f64::INFINITY,
                })
            }
        })
        .collect()
}

/// `lambda_jk = gamma_jk / (eta_j d_jjk)`.
pub fn lambda_bar(gains: &LargeScaleGains, gamma: &SinrTargets, eta: &[f64]) -> Vec<f64> {
    let k = gains.users_per_cell();
    (0..gains.users())
        .map(|u| {
            let (j, kk) = (u / k, u % k);
            gamma.get(j, kk) / (eta[j] * gains.own(j, kk))
        })
        .collect()
}

/// Effective interference gain from BS `l` onto UE `(j, k)` after nulling.
pub fn beta_coeffs(gains: &LargeScaleGains, gamma: &SinrTargets, tau: &TauTensor, eta: &[f64]) -> Vec<f64> {
    let (cells, k) = (gains.cells(), gains.users_per_cell());
    let mut beta = Vec::with_capacity(cells * cells * k);
    for l in 0..cells {
        for j in 0..cells {
            for kk in 0..k {
                let d = gains.cobf(l, j, kk);
                let x = gamma.get(j, kk) * d * eta[l] / (gains.own(j, kk) * eta[j]);
                beta.push(d * super::leakage(tau.get(l, j, kk), x));
            }
        }
    }
    beta
}

#[inline]
fn beta_at(beta: &[f64], cells: usize, k: usize, l: usize, j: usize, kk: usize) -> f64 {
    beta[(l * cells + j) * k + kk]
}

/// Row `j` of `F` and the entry `b_j`.
fn cell_rows(p: &Problem, beta: &[f64], j: usize) -> Result<(Vec<f64>, f64)> {
    let (cells, k) = (p.cells(), p.users_per_cell());
    let n = p.antennas as f64;
    let mut row = vec![0.0; cells];
    let mut b = 0.0;
    for kk in 0..k {
        let g = p.gamma.get(j, kk);
        if g == 0.0 {
            continue;
        }
        let w = g / (p.gains.own(j, kk) * super::own_link_quality(p.tau.get(j, j, kk), "coordinated beamforming")?);
        b += w / n;
        for (l, r) in row.iter_mut().enumerate() {
            *r += w * beta_at(beta, cells, k, l, j, kk) / n;
        }
    }
    Ok((row, b))
}

pub fn assemble_power_system(p: &Problem, eta: &[f64], beta: &[f64]) -> Result<PowerSystem> {
    let cells = p.cells();
    let mut f = DMatrix::zeros(cells, cells);
    let mut b = DVector::zeros(cells);
    for j in 0..cells {
        let (row, bj) = cell_rows(p, beta, j)?;
        for (l, v) in row.into_iter().enumerate() {
            f[(j, l)] = v;
        }
        b[j] = bj;
    }
    Ok(PowerSystem {
        gamma_diag: gamma_diag(&p.gains, &p.gamma, p.antennas, eta),
        f,
        b,
    })
}

/// `(rho(Gamma^{-1} F), rho < 1)`; a nonpositive diagonal entry is infeasible outright.
pub fn feasibility(sys: &PowerSystem) -> (f64, bool) {
    if sys.gamma_diag.iter().any(|g| *g <= 0.0) {
        return (f64::INFINITY, false);
    }
    let mut m = sys.f.clone();
    for (j, g) in sys.gamma_diag.iter().enumerate() {
        m.row_mut(j).unscale_mut(*g);
    }
    let rho = linalg::perron_root(&m);
    (rho, rho < 1.0)
}

/// Row-sum sufficient condition: `sum_l F_jl <= Gamma_jj` for every cell.
pub fn row_sum_condition(sys: &PowerSystem) -> Vec<bool> {
    (0..sys.f.nrows()).map(|j| sys.f.row(j).sum() <= sys.gamma_diag[j]).collect()
}

/// Solves `(Gamma - F) P = sigma^2 b` and expands to per-user powers.
/// Fails when the solution is not entrywise positive.
pub fn solve_powers(p: &Problem, beta: &[f64], sys: &PowerSystem) -> Result<AsymPowers> {
    let (cells, k) = (p.cells(), p.users_per_cell());
    let infeasible = || Error::Infeasible {
        scheme: Scheme::Cobf,
        spectral_radius: feasibility(sys).0,
    };
    if sys.gamma_diag.iter().any(|g| *g <= 0.0) {
        return Err(infeasible());
    }
    let a = DMatrix::from_diagonal(&DVector::from_column_slice(&sys.gamma_diag)) - &sys.f;
    let rhs = &sys.b * p.noise_w;
    let per_bs = linalg::solve(&a, &rhs, "per-BS power system").map_err(|_| infeasible())?;
    for j in 0..cells {
        if per_bs[j] < 0.0 || (sys.b[j] > 0.0 && per_bs[j] <= 0.0) {
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
            let q = super::own_link_quality(p.tau.get(j, j, kk), "coordinated beamforming")?;
            let interference: f64 = (0..cells).map(|l| beta_at(beta, cells, k, l, j, kk) * per_bs[l]).sum();
            per_user.push(g / (p.gains.own(j, kk) * q) * (interference + p.noise_w) / sys.gamma_diag[j]);
        }
    }
    Ok(AsymPowers {
        total: per_bs.sum(),
        per_bs: per_bs.iter().copied().collect(),
        per_user,
    })
}

/// Limiting SINR of every UE for fixed per-user powers.
pub fn sinr_bar(p: &Problem, beta: &[f64], gamma_diag: &[f64], powers: &[f64]) -> Vec<f64> {
    let (cells, k) = (p.cells(), p.users_per_cell());
    let n = p.antennas as f64;
    let per_bs: Vec<f64> = (0..cells).map(|l| powers[l * k..(l + 1) * k].iter().sum::<f64>() / n).collect();
    (0..cells * k)
        .map(|u| {
            let (j, kk) = (u / k, u % k);
            let t = p.tau.get(j, j, kk);
            let interference: f64 = (0..cells).map(|l| beta_at(beta, cells, k, l, j, kk) * per_bs[l]).sum();
            powers[u] * p.gains.own(j, kk) * (1.0 - t * t) * gamma_diag[j] / (interference + p.noise_w)
        })
        .collect()
}

pub fn analyze(p: &Problem) -> Result<CobfAsymptotic> {
    let eta = solve_eta(&p.gains, &p.gamma, p.antennas)?;
    let lambda_bar = lambda_bar(&p.gains, &p.gamma, &eta);
    let beta = beta_coeffs(&p.gains, &p.gamma, &p.tau, &eta);
    let system = assemble_power_system(p, &eta, &beta)?;
    let (spectral_radius, feasible) = feasibility(&system);
    let eta_prime = eta_prime(&p.gains, &p.gamma, p.antennas, &eta).unwrap_or_else(|_| vec![f64::INFINITY; eta.len()]);
    let powers = solve_powers(p, &beta, &system).ok();
    Ok(CobfAsymptotic {
        eta,
        eta_prime,
        lambda_bar,
        beta,
        system,
        spectral_radius,
        feasible,
        powers,
    })
}

/// Per-cell CSI error threshold: the largest common `tau_j` on every link
/// towards cell `j` for which `sum_l F_jl <= Gamma_jj` still holds. The row
/// sum grows monotonically in `tau_j`, so bisection finds the crossing.
pub fn tau_max(gains: &LargeScaleGains, gamma: &SinrTargets, antennas: usize) -> Result<Vec<TauMax>> {
    let (cells, k) = (gains.cells(), gains.users_per_cell());
    let eta = solve_eta(gains, gamma, antennas)?;
    let diag = gamma_diag(gains, gamma, antennas, &eta);
    let mut out = Vec::with_capacity(cells);
    for j in 0..cells {
        let row_ok = |t: f64| -> bool {
            let mut tau = TauTensor::zeros(cells, k);
            for l in 0..cells {
                for kk in 0..k {
                    tau.set(l, j, kk, t);
                }
            }
            let problem = Problem {
                gains: gains.clone(),
                gamma: gamma.clone(),
                tau,
                antennas,
                noise_w: 1.0,
            };
            let beta = beta_coeffs(gains, gamma, &problem.tau, &eta);
            match cell_rows(&problem, &beta, j) {
                Ok((row, _)) => row.iter().sum::<f64>() <= diag[j],
                Err(_) => false,
            }
        };
        if (0..k).all(|kk| gamma.get(j, kk) == 0.0) {
            out.push(TauMax {
                value: 1.0,
                infeasible_at_zero: false,
            });
        } else if !row_ok(0.0) {
            out.push(TauMax {
                value: 0.0,
                infeasible_at_zero: true,
            });
        } else {
            out.push(TauMax {
                value: super::bisect_last_ok(row_ok, 0.0, 1.0, super::BISECTION_TOL),
                infeasible_at_zero: false,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(cells: usize, k: usize, n: usize, gamma: f64, tau: f64) -> Problem {
        let gains = LargeScaleGains::from_fn(cells, k, |l, j, kk| if l == j { 1.0 + 0.1 * kk as f64 } else { 0.3 + 0.05 * l as f64 });
        Problem::new(
            gains,
            SinrTargets::uniform(cells, k, gamma).unwrap(),
            TauTensor::uniform(cells, k, tau).unwrap(),
            n,
            1e-3,
        )
        .unwrap()
    }

    #[test]
    fn zero_targets_give_unit_eta_and_zero_power() {
        let p = problem(2, 3, 8, 0.0, 0.2);
        let s = analyze(&p).unwrap();
        assert_eq!(s.eta, vec![1.0, 1.0]);
        assert_eq!(s.eta_prime, vec![1.0, 1.0]);
        assert!(s.lambda_bar.iter().all(|l| *l == 0.0));
        assert!(s.system.f.iter().all(|v| *v == 0.0));
        assert_eq!(s.powers.unwrap().total, 0.0);
    }

    #[test]
    fn per_bs_power_is_mean_user_power() {
        let p = problem(3, 2, 16, 1.0, 0.3);
        let s = analyze(&p).unwrap();
        let powers = s.powers.unwrap();
        for j in 0..3 {
            let mean = powers.per_user[j * 2..j * 2 + 2].iter().sum::<f64>() / 16.0;
            assert!((mean - powers.per_bs[j]).abs() <= 1e-10 * powers.per_bs[j]);
        }
        let sinr = sinr_bar(&p, &s.beta, &s.system.gamma_diag, &powers.per_user);
        assert!(sinr.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn tau_max_row_sum_is_tight() {
        let p = problem(2, 2, 8, 1.0, 0.0);
        let tm = tau_max(&p.gains, &p.gamma, 8).unwrap();
        for (j, t) in tm.iter().enumerate() {
            assert!(!t.infeasible_at_zero && t.value > 0.0 && t.value < 1.0);
            let mut tau = TauTensor::zeros(2, 2);
            for l in 0..2 {
                for k in 0..2 {
                    tau.set(l, j, k, t.value);
                }
            }
            let pp = p.with_tau(tau);
            let s = analyze(&pp).unwrap();
            let row: f64 = s.system.f.row(j).sum();
            assert!((row - s.system.gamma_diag[j]).abs() < 1e-8);
        }
    }
}
