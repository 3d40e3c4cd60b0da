//! Optimal precoders for one channel realization.
//!
//! Every scheme shares the same structure. A precoding *group* is a set of
//! transmit antennas together with the estimated channels it regularizes
//! against:
//!
//! * CoBF: one group per BS holding the channels from that BS to every UE,
//! * ScBF: one group per BS holding only its own UEs' channels,
//! * CoMP: a single group of `N L` antennas holding every UE's stacked channel.
//!
//! With `M` the group's antenna count and `H` its channel matrix, UE `u`'s
//! multiplier solves `lambda_u = gamma_u / (1 + gamma_u) / q_u` with
//! `q_u = h_u^H (H diag(lambda) H^H + M I)^{-1} h_u`, and the beam direction is
//! `(H diag(lambda) H^H + M I)^{-1} h_u`. Powers are then set so that every
//! SINR, evaluated on the true channels, meets its target with equality.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CVector, ChannelSet, SinrTargets};
use crate::{linalg, Scheme};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-9,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct FiniteSolution {
    pub scheme: Scheme,
    pub lambda: Vec<f64>,
    /// Unit-norm beam directions, one per UE.
    pub directions: Vec<CVector>,
    /// Per-UE powers `p`; the precoder is `sqrt(p / M) v`.
    pub powers: Vec<f64>,
    pub realized_sinr: Vec<f64>,
    pub total_power: f64,
    pub iterations: usize,
}

/// Useful gains on the diagonal, interference off it. Entry `(rx, tx)` is
/// `|h_rx^H v_tx|^2 / M` with the true channel from `tx`'s transmitter(s).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossGainMatrix(pub DMatrix<f64>);

impl CrossGainMatrix {
    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn useful(&self, u: usize) -> f64 {
        self.0[(u, u)]
    }

    pub fn get(&self, rx: usize, tx: usize) -> f64 {
        self.0[(rx, tx)]
    }
}

/// Antennas behind one precoder: `N` per BS, or `N L` for joint transmission.
pub fn array_size(scheme: Scheme, antennas: usize, cells: usize) -> usize {
    match scheme {
        Scheme::Comp => antennas * cells,
        Scheme::Cobf | Scheme::Scbf => antennas,
    }
}

struct Group {
    h: DMatrix<Complex64>,
    /// Global UE index of every column.
    users: Vec<usize>,
    /// Columns whose UE is served by this group.
    served: Vec<usize>,
}

fn groups(scheme: Scheme, ch: &ChannelSet) -> Vec<Group> {
    let (cells, k) = (ch.cells, ch.users_per_cell);
    let from_columns = |cols: Vec<&CVector>, users: Vec<usize>, served: Vec<usize>| {
        let rows = cols.first().map_or(ch.antennas, |c| c.len());
        let h = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
        Group { h, users, served }
    };
    match scheme {
        Scheme::Cobf => (0..cells)
            .map(|j| {
                let cols = (0..cells * k).map(|u| ch.est_link(j, u / k, u % k)).collect();
                from_columns(cols, (0..cells * k).collect(), (j * k..(j + 1) * k).collect())
            })
            .collect(),
        Scheme::Scbf => (0..cells)
            .map(|j| {
                let cols = (0..k).map(|i| ch.est_link(j, j, i)).collect();
                from_columns(cols, (j * k..(j + 1) * k).collect(), (0..k).collect())
            })
            .collect(),
        Scheme::Comp => vec![from_columns(
            ch.est_comp.iter().collect(),
            (0..cells * k).collect(),
            (0..cells * k).collect(),
        )],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SolvePath {
    /// Pick the smaller of the two spaces.
    Auto,
    /// Factor the `c x c` user-space system (`c` columns).
    UserSpace,
    /// Factor the `M x M` regularized antenna covariance.
    AntennaSpace,
}

/// Quadratic forms `q` and (optionally) unnormalized directions of the served columns.
fn group_solve(
    g: &Group,
    lambda: &[f64],
    path: SolvePath,
    want_dirs: bool,
) -> Result<(Vec<f64>, Option<Vec<CVector>>)> {
    let (m, c) = g.h.shape();
    let reg = Complex64::new(m as f64, 0.0);
    let lam: Vec<f64> = g.users.iter().map(|&u| lambda[u]).collect();
    let user_space = match path {
        SolvePath::Auto => c <= m,
        SolvePath::UserSpace => true,
        SolvePath::AntennaSpace => false,
    };
    if user_space {
        // (H L H^H + M I)^{-1} H = H (L G + M I)^{-1}, G = H^H H
        let gram = g.h.adjoint() * &g.h;
        let mut sys = gram.clone();
        for (r, l) in lam.iter().enumerate() {
            sys.row_mut(r).scale_mut(*l);
        }
        for i in 0..c {
            sys[(i, i)] += reg;
        }
        let lu = sys.lu();
        let mut rhs = DMatrix::zeros(c, g.served.len());
        for (col, &s) in g.served.iter().enumerate() {
            rhs[(s, col)] = Complex64::new(1.0, 0.0);
        }
        let x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("regularized user-space system is singular".into()))?;
        let q = g
            .served
            .iter()
            .enumerate()
            .map(|(col, &s)| (gram.row(s) * x.column(col))[(0, 0)].re)
            .collect();
        let dirs = want_dirs.then(|| (0..g.served.len()).map(|col| &g.h * x.column(col)).collect());
        Ok((q, dirs))
    } else {
        let mut cov = DMatrix::<Complex64>::identity(m, m) * reg;
        for (col, l) in lam.iter().enumerate() {
            if *l != 0.0 {
                let h = g.h.column(col);
                cov += (h * h.adjoint()) * Complex64::new(*l, 0.0);
            }
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Degenerate("regularized covariance is not positive definite".into()))?;
        let mut q = Vec::with_capacity(g.served.len());
        let mut dirs = Vec::with_capacity(g.served.len());
        for &s in &g.served {
            let h = g.h.column(s).into_owned();
            let x = chol.solve(&h);
            q.push(h.dotc(&x).re);
            if want_dirs {
                dirs.push(x);
            }
        }
        Ok((q, want_dirs.then_some(dirs)))
    }
}

fn quadratic_forms(groups: &[Group], lambda: &[f64], path: SolvePath) -> Result<Vec<f64>> {
    let mut q = vec![0.0; lambda.len()];
    for g in groups {
        let (qs, _) = group_solve(g, lambda, path, false)?;
        for (&s, v) in g.served.iter().zip(qs) {
            q[g.users[s]] = v;
        }
    }
    Ok(q)
}

/// Iterates the standard interference function from the interference-free
/// point `lambda_u = gamma_u M / |h_u|^2`; the sequence is monotone and
/// diverges on infeasible instances.
pub fn fixed_point_multipliers(
    scheme: Scheme,
    channels: &ChannelSet,
    gamma: &SinrTargets,
    opts: FixedPointOptions,
) -> Result<Multipliers> {
    fixed_point_with(scheme, channels, gamma, opts, SolvePath::Auto)
}

pub(crate) fn fixed_point_with(
    scheme: Scheme,
    channels: &ChannelSet,
    gamma: &SinrTargets,
    opts: FixedPointOptions,
    path: SolvePath,
) -> Result<Multipliers> {
    let groups = groups(scheme, channels);
    let gamma = gamma.as_slice();
    if gamma.len() != channels.cells * channels.users_per_cell {
        return Err(Error::Dimension("targets do not match the channel set".into()));
    }
    let m = groups[0].h.nrows() as f64;
    let mut lambda = vec![0.0; gamma.len()];
    for g in &groups {
        for &s in &g.served {
            let u = g.users[s];
            let norm = g.h.column(s).norm_squared();
            if gamma[u] > 0.0 && norm <= 0.0 {
                return Err(Error::Degenerate(format!("estimated channel of UE {u} is zero")));
            }
            lambda[u] = if gamma[u] > 0.0 { gamma[u] * m / norm } else { 0.0 };
        }
    }
    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let q = quadratic_forms(&groups, &lambda, path)?;
        let mut next = vec![0.0; lambda.len()];
        residual = 0.0;
        for u in 0..lambda.len() {
            if gamma[u] == 0.0 {
                continue;
            }
            // drop u's own term: q_without_u = q / (1 - lambda_u q)
            let own_free = 1.0 - lambda[u] * q[u];
            next[u] = gamma[u] * own_free / q[u];
            if !(next[u].is_finite() && next[u] > 0.0) {
                return Err(Error::NonConvergence {
                    what: "multiplier fixed point",
                    iterations: iter,
                    residual: f64::INFINITY,
                });
            }
            residual = residual.max((next[u] - lambda[u]).abs() / next[u]);
        }
        lambda = next;
        if residual <= opts.tol {
            return Ok(Multipliers {
                lambda,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "multiplier fixed point",
        iterations: opts.max_iter,
        residual,
    })
}

/// Relative residual of `lambda` in the fixed-point equation.
pub fn fixed_point_residual(scheme: Scheme, channels: &ChannelSet, gamma: &SinrTargets, lambda: &[f64]) -> Result<f64> {
    let groups = groups(scheme, channels);
    let q = quadratic_forms(&groups, lambda, SolvePath::Auto)?;
    let mut worst = 0.0f64;
    for (u, &g) in gamma.as_slice().iter().enumerate() {
        let rhs = g / (1.0 + g) / q[u];
        let scale = rhs.abs().max(f64::MIN_POSITIVE);
        worst = worst.max((lambda[u] - rhs).abs() / scale);
    }
    Ok(worst)
}

/// Unit-norm beam directions for the given multipliers.
pub fn beamform_directions(scheme: Scheme, channels: &ChannelSet, lambda: &[f64]) -> Result<Vec<CVector>> {
    directions_with(scheme, channels, lambda, SolvePath::Auto)
}

pub(crate) fn directions_with(
    scheme: Scheme,
    channels: &ChannelSet,
    lambda: &[f64],
    path: SolvePath,
) -> Result<Vec<CVector>> {
    let users = channels.cells * channels.users_per_cell;
    if lambda.len() != users {
        return Err(Error::Dimension(format!("{} multipliers for {users} UEs", lambda.len())));
    }
    let mut out = vec![CVector::zeros(0); users];
    for g in groups(scheme, channels) {
        let (_, dirs) = group_solve(&g, lambda, path, true)?;
        for (&s, v) in g.served.iter().zip(dirs.unwrap_or_default()) {
            let norm = v.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Degenerate(format!("beam direction of UE {} vanished", g.users[s])));
            }
            out[g.users[s]] = v.unscale(norm);
        }
    }
    Ok(out)
}

/// Gains on the true channels. Directions need not be normalized.
pub fn realized_gain_matrix(scheme: Scheme, channels: &ChannelSet, directions: &[CVector]) -> CrossGainMatrix {
    let (cells, k) = (channels.cells, channels.users_per_cell);
    let users = cells * k;
    let m = array_size(scheme, channels.antennas, cells) as f64;
    let norms: Vec<f64> = directions.iter().map(|v| v.norm_squared()).collect();
    let mut g = DMatrix::zeros(users, users);
    for rx in 0..users {
        for tx in 0..users {
            let v = &directions[tx];
            let h = match scheme {
                Scheme::Comp => &channels.true_comp[rx],
                Scheme::Cobf | Scheme::Scbf => channels.true_link(tx / k, rx / k, rx % k),
            };
            g[(rx, tx)] = h.dotc(v).norm_sqr() / (norms[tx] * m);
        }
    }
    CrossGainMatrix(g)
}

/// Powers meeting every SINR target with equality:
/// `useful_u p_u - gamma_u sum_{i != u} G_ui p_i = gamma_u sigma^2`.
pub fn solve_powers_finite(scheme: Scheme, gains: &CrossGainMatrix, gamma: &SinrTargets, noise_w: f64) -> Result<Vec<f64>> {
    let n = gains.users();
    let gamma = gamma.as_slice();
    if gamma.len() != n {
        return Err(Error::Dimension("targets do not match the gain matrix".into()));
    }
    let mut a = DMatrix::zeros(n, n);
    for u in 0..n {
        for i in 0..n {
            a[(u, i)] = if u == i { gains.get(u, u) } else { -gamma[u] * gains.get(u, i) };
        }
    }
    let b = DVector::from_iterator(n, gamma.iter().map(|g| g * noise_w));
    let p = linalg::solve(&a, &b, "finite power system").map_err(|_| Error::InfeasibleRealization {
        scheme,
        reason: "singular SINR-equality system".into(),
    })?;
    let mut out = Vec::with_capacity(n);
    for u in 0..n {
        if gamma[u] == 0.0 {
            out.push(0.0);
        } else if p[u] > 0.0 {
            out.push(p[u]);
        } else {
            return Err(Error::InfeasibleRealization {
                scheme,
                reason: format!("UE {u} would need power {:.3e}", p[u]),
            });
        }
    }
    Ok(out)
}

pub fn realized_sinr(gains: &CrossGainMatrix, powers: &[f64], noise_w: f64) -> Vec<f64> {
    (0..gains.users())
        .map(|u| {
            let interference: f64 = (0..gains.users()).filter(|&i| i != u).map(|i| gains.get(u, i) * powers[i]).sum();
            gains.useful(u) * powers[u] / (interference + noise_w)
        })
        .collect()
}

/// `sum(p) / M`, i.e. the sum of squared precoder norms.
pub fn total_power(scheme: Scheme, powers: &[f64], antennas: usize, cells: usize) -> f64 {
    powers.iter().sum::<f64>() / array_size(scheme, antennas, cells) as f64
}

/// Dual objective `sum(lambda) sigma^2 / M`.
pub fn dual_objective(scheme: Scheme, lambda: &[f64], noise_w: f64, antennas: usize, cells: usize) -> f64 {
    lambda.iter().sum::<f64>() * noise_w / array_size(scheme, antennas, cells) as f64
}

pub fn solve(
    scheme: Scheme,
    channels: &ChannelSet,
    gamma: &SinrTargets,
    noise_w: f64,
    opts: FixedPointOptions,
) -> Result<FiniteSolution> {
    let m = fixed_point_multipliers(scheme, channels, gamma, opts)?;
    let directions = beamform_directions(scheme, channels, &m.lambda)?;
    let gains = realized_gain_matrix(scheme, channels, &directions);
    let powers = solve_powers_finite(scheme, &gains, gamma, noise_w)?;
    let realized_sinr = realized_sinr(&gains, &powers, noise_w);
    let total_power = total_power(scheme, &powers, channels.antennas, channels.cells);
    Ok(FiniteSolution {
        scheme,
        lambda: m.lambda,
        directions,
        powers,
        realized_sinr,
        total_power,
        iterations: m.iterations,
    })
}
