//! Network MIMO (joint transmission from all `N L` antennas).
//!
//! Per-BS coefficients `mu` solve a fixed point; each UE's multiplier is its
//! target over the served-effort weight `eps_k = (1/L) sum_l d_lk mu_l`. The
//! second-order quantities `eps'` come from one linear system in `I - J`
//! shared by every right-hand side.

use nalgebra::{DMatrix, DVector};

use super::{AsymPowers, AsymSummary, TauMax};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LargeScaleGains, Problem, SinrTargets};
use crate::Scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct CompAsymptotic {
    pub mu: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub lambda_bar: Vec<f64>,
    pub eps_prime: EpsPrime,
    /// Coupling matrix of the per-user power system.
    pub z: DMatrix<f64>,
    pub z_vec: DVector<f64>,
    pub spectral_radius: f64,
    pub feasible: bool,
    /// Interference levels `Omega` and powers, when the linear solve is positive.
    pub omega: Option<DVector<f64>>,
    pub powers: Option<AsymPowers>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsPrime {
    pub j: DMatrix<f64>,
    /// `eps'_i` for every user.
    pub self_terms: DVector<f64>,
    /// Entry `(i, k)` is `eps'_ik`.
    pub cross: DMatrix<f64>,
}

impl CompAsymptotic {
    pub fn summary(&self, p: &Problem) -> AsymSummary {
        AsymSummary {
            scheme: Scheme::Comp,
            dual_objective: self.lambda_bar.iter().sum::<f64>() * p.noise_w / (p.antennas * p.cells()) as f64,
            lambda_bar: self.lambda_bar.clone(),
            spectral_radius: self.spectral_radius,
            feasible: self.feasible,
            powers: self.powers.clone(),
        }
    }
}

fn epsilon_of(g: &LargeScaleGains, mu: &[f64]) -> Vec<f64> {
    let cells = g.cells() as f64;
    (0..g.users())
        .map(|u| (0..g.cells()).map(|l| g.comp(l, u) * mu[l]).sum::<f64>() / cells)
        .collect()
}

fn mu_sums(g: &LargeScaleGains, gamma: &SinrTargets, n: f64, mu: &[f64]) -> Vec<f64> {
    let eps = epsilon_of(g, mu);
    let nl = n * g.cells() as f64;
    let gamma = gamma.as_slice();
    (0..g.cells())
        .map(|l| {
            (0..g.users())
                .map(|i| g.comp(l, i) / eps[i] * gamma[i] / (1.0 + gamma[i]))
                .sum::<f64>()
                / nl
        })
        .collect()
}

/// Summing `mu_l s_l = 1 - mu_l` over cells gives `sum_l mu_l = L - load / N`,
/// so a positive solution needs the total load below `N L`.
pub fn solve_mu(gains: &LargeScaleGains, gamma: &SinrTargets, antennas: usize) -> Result<Vec<f64>> {
    let n = antennas as f64;
    let load: f64 = gamma.as_slice().iter().map(|g| g / (1.0 + g)).sum();
    if load >= n * gains.cells() as f64 {
        return Err(Error::Infeasible {
            scheme: Scheme::Comp,
            spectral_radius: f64::INFINITY,
        });
    }
    super::picard(
        vec![1.0; gains.cells()],
        |mu| mu_sums(gains, gamma, n, mu).into_iter().map(|s| 1.0 / (s + 1.0)).collect(),
        super::FIXED_POINT_TOL,
        super::FIXED_POINT_MAX_ITER,
        "per-BS coefficient fixed point",
    )
    .map(|(mu, _)| mu)
}

/// Residuals of the reciprocal form and of `mu_l = 1 - mu_l * (sum)`.
pub fn mu_residuals(gains: &LargeScaleGains, gamma: &SinrTargets, antennas: usize, mu: &[f64]) -> (f64, f64) {
    let sums = mu_sums(gains, gamma, antennas as f64, mu);
    let recip = mu.iter().zip(&sums).map(|(m, s)| (m - 1.0 / (s + 1.0)).abs() / m).fold(0.0, f64::max);
    let linear = mu.iter().zip(&sums).map(|(m, s)| (m - (1.0 - m * s)).abs() / m).fold(0.0, f64::max);
    (recip, linear)
}

/// `eps_k` and `lambda_k = gamma_k / eps_k`.
pub fn epsilon_weights(gains: &LargeScaleGains, gamma: &SinrTargets, mu: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let eps = epsilon_of(gains, mu);
    let lambda = eps.iter().zip(gamma.as_slice()).map(|(e, g)| g / e).collect();
    (eps, lambda)
}

/// `C_ik = (1/L) sum_l d_li d_lk mu_l^2`.
fn overlap(gains: &LargeScaleGains, mu: &[f64]) -> DMatrix<f64> {
    let users = gains.users();
    let cells = gains.cells() as f64;
    DMatrix::from_fn(users, users, |i, k| {
        (0..gains.cells()).map(|l| gains.comp(l, i) * gains.comp(l, k) * mu[l] * mu[l]).sum::<f64>() / cells
    })
}

/// Builds `J` and solves `(I - J) eps' = c` together with `(I - J) eps'_k = C e_k`
/// from one factorization.
pub fn build_eps_prime_systems(
    gains: &LargeScaleGains,
    gamma: &SinrTargets,
    antennas: usize,
    mu: &[f64],
    eps: &[f64],
) -> Result<EpsPrime> {
    let users = gains.users();
    let nl = (antennas * gains.cells()) as f64;
    let gamma = gamma.as_slice();
    let c_mat = overlap(gains, mu);
    let j = DMatrix::from_fn(users, users, |i, k| {
        c_mat[(i, k)] * gamma[k] * gamma[k] / (eps[k] * eps[k] * nl * (1.0 + gamma[k]).powi(2))
    });
    if !j.iter().all(|v| v.is_finite()) {
        return Err(Error::Degenerate("second-order coupling is not finite".into()));
    }
    if linalg::perron_root(&j) >= 1.0 {
        return Err(Error::Degenerate("second-order system I - J is not invertible with a positive solution".into()));
    }
    let cells = gains.cells() as f64;
    let c_self = DVector::from_fn(users, |i, _| {
        (0..gains.cells()).map(|l| gains.comp(l, i) * mu[l] * mu[l]).sum::<f64>() / cells
    });
    let a = DMatrix::identity(users, users) - &j;
    let lu = a.lu();
    let mut rhs = DMatrix::zeros(users, users + 1);
    rhs.column_mut(0).copy_from(&c_self);
    rhs.columns_mut(1, users).copy_from(&c_mat);
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("second-order system I - J is singular".into()))?;
    Ok(EpsPrime {
        j,
        self_terms: sol.column(0).into_owned(),
        cross: sol.columns(1, users).into_owned(),
    })
}

fn cross_leakage(p: &Problem, i: usize) -> f64 {
    super::leakage(p.tau.user(i), p.gamma.as_slice()[i])
}

/// `Z_ki = gamma_i / (1 - tau_i^2) eps'_ik / eps_i^2 * leak_i / (N L)` and the
/// matching noise vector `z`.
pub fn assemble_z(p: &Problem, eps: &[f64], ep: &EpsPrime) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let users = p.users();
    let nl = (p.antennas * p.cells()) as f64;
    let gamma = p.gamma.as_slice();
    let mut weight = vec![0.0; users];
    for i in 0..users {
        if gamma[i] > 0.0 {
            weight[i] = gamma[i] / super::own_link_quality(p.tau.user(i), "network MIMO")? / (eps[i] * eps[i] * nl);
        }
    }
    let z = DMatrix::from_fn(users, users, |k, i| weight[i] * ep.cross[(i, k)] * cross_leakage(p, i));
    let z_vec = DVector::from_fn(users, |k, _| (0..users).map(|i| weight[i] * ep.cross[(i, k)]).sum());
    Ok((z, z_vec))
}

/// Solves `(I - Z) Omega = sigma^2 z` and maps `Omega` to per-user powers.
pub fn solve_powers(p: &Problem, eps: &[f64], ep: &EpsPrime, z: &DMatrix<f64>, z_vec: &DVector<f64>) -> Result<(DVector<f64>, AsymPowers)> {
    let users = p.users();
    let infeasible = || Error::Infeasible {
        scheme: Scheme::Comp,
        spectral_radius: linalg::perron_root(z),
    };
    let a = DMatrix::identity(users, users) - z;
    let omega = linalg::solve(&a, &(z_vec * p.noise_w), "joint power system").map_err(|_| infeasible())?;
    for k in 0..users {
        if omega[k] < 0.0 || (z_vec[k] > 0.0 && omega[k] <= 0.0) {
            return Err(infeasible());
        }
    }
    let gamma = p.gamma.as_slice();
    let mut per_user = Vec::with_capacity(users);
    for k in 0..users {
        if gamma[k] == 0.0 {
            per_user.push(0.0);
            continue;
        }
        let q = super::own_link_quality(p.tau.user(k), "network MIMO")?;
        per_user.push(gamma[k] / q * ep.self_terms[k] / (eps[k] * eps[k]) * (omega[k] * cross_leakage(p, k) + p.noise_w));
    }
    let nl = (p.antennas * p.cells()) as f64;
    let total = per_user.iter().sum::<f64>() / nl;
    Ok((
        omega,
        AsymPowers {
            per_bs: Vec::new(),
            per_user,
            total,
        },
    ))
}

/// Limiting SINR of every UE for fixed per-user powers.
pub fn sinr_bar(p: &Problem, eps: &[f64], ep: &EpsPrime, powers: &[f64]) -> Vec<f64> {
    let users = p.users();
    let nl = (p.antennas * p.cells()) as f64;
    (0..users)
        .map(|k| {
            let t = p.tau.user(k);
            let spread: f64 = (0..users).map(|i| powers[i] * ep.cross[(i, k)] / ep.self_terms[i]).sum::<f64>() / nl;
            let interference = cross_leakage(p, k) * spread;
            powers[k] * eps[k] * eps[k] / ep.self_terms[k] * (1.0 - t * t) / (interference + p.noise_w)
        })
        .collect()
}

pub fn analyze(p: &Problem) -> Result<CompAsymptotic> {
    let mu = solve_mu(&p.gains, &p.gamma, p.antennas)?;
    let (epsilon, lambda_bar) = epsilon_weights(&p.gains, &p.gamma, &mu);
    let eps_prime = build_eps_prime_systems(&p.gains, &p.gamma, p.antennas, &mu, &epsilon)?;
    let (z, z_vec) = assemble_z(p, &epsilon, &eps_prime)?;
    let spectral_radius = linalg::perron_root(&z);
    let solved = solve_powers(p, &epsilon, &eps_prime, &z, &z_vec).ok();
    let (omega, powers) = match solved {
        Some((o, pw)) => (Some(o), Some(pw)),
        None => (None, None),
    };
    Ok(CompAsymptotic {
        mu,
        epsilon,
        lambda_bar,
        eps_prime,
        z,
        z_vec,
        feasible: spectral_radius < 1.0,
        spectral_radius,
        omega,
        powers,
    })
}

/// Column sums of `Z`; every one at most 1 (one strictly) is sufficient for feasibility.
pub fn column_sums(z: &DMatrix<f64>) -> Vec<f64> {
    (0..z.ncols()).map(|i| z.column(i).sum()).collect()
}

/// Per-user CSI threshold from the column-sum condition:
/// with `a = gamma_i S_i / eps_i^2`, `S_i = (1/NL) sum_k eps'_ik` and
/// `g = (1 + gamma_i)^2`, column `i` stays below one iff
/// `tau_i^2 <= (g - a) / (g + a (g - 1))`.
pub fn tau_max(p: &Problem) -> Result<Vec<TauMax>> {
    let mu = solve_mu(&p.gains, &p.gamma, p.antennas)?;
    let (eps, _) = epsilon_weights(&p.gains, &p.gamma, &mu);
    let ep = build_eps_prime_systems(&p.gains, &p.gamma, p.antennas, &mu, &eps)?;
    let nl = (p.antennas * p.cells()) as f64;
    let gamma = p.gamma.as_slice();
    Ok((0..p.users())
        .map(|i| {
            if gamma[i] == 0.0 {
                return TauMax {
                    value: 1.0,
                    infeasible_at_zero: false,
                };
            }
            let s = ep.cross.row(i).sum() / nl;
            let a = gamma[i] * s / (eps[i] * eps[i]);
            let g = (1.0 + gamma[i]).powi(2);
            if a >= g {
                TauMax {
                    value: 0.0,
                    infeasible_at_zero: true,
                }
            } else {
                TauMax {
                    value: (1.0 / (1.0 + a / (1.0 - a / g))).sqrt(),
                    infeasible_at_zero: false,
                }
            }
        })
        .collect())
}
