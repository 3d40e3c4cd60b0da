//! Network model shared by every scheme: configuration, cell layout, distance
//! based path loss, Rayleigh fading and the Gauss-Markov CSI error model.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Substreams};

pub type CVector = DVector<Complex64>;

pub const DEFAULT_NOISE_DBM: f64 = -104.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// A per-UE quantity given either as one value for everybody or as a
/// `[cell][user]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    Uniform(f64),
    Explicit(Vec<Vec<f64>>),
}

impl PerUser {
    pub fn expand(&self, cells: usize, users: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            PerUser::Uniform(v) => Ok(vec![*v; cells * users]),
            PerUser::Explicit(table) => {
                check_table_shape(table, cells, users, name)?;
                Ok(table.iter().flatten().copied().collect())
            }
        }
    }
}

/// CSI quality: one value, a `[cell][user]` table (same on every link to the
/// UE) or a full `[bs][cell][user]` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerLink {
    Uniform(f64),
    PerUser(Vec<Vec<f64>>),
    PerLink(Vec<Vec<Vec<f64>>>),
}

fn check_table_shape(table: &[Vec<f64>], cells: usize, users: usize, name: &str) -> Result<()> {
    if table.len() != cells || table.iter().any(|row| row.len() != users) {
        return Err(Error::config(format!(
            "`{name}` must be a {cells}x{users} table (cells x users per cell)"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    pub side_m: f64,
    pub pathloss_exponent: f64,
    pub cutoff_attenuation_db: f64,
    pub cutoff_distance_m: f64,
    pub noise_power_w: f64,
    pub rate_bps_hz: PerUser,
    pub tau: PerLink,
    pub seed: u64,
    /// Explicit BS coordinates; required when `cells` is not a perfect square.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_positions_m: Option<Vec<[f64; 2]>>,
    /// Side of the square cell around each explicit BS position.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_side_m: Option<f64>,
    /// UEs are never dropped closer than this to their own BS.
    pub min_ue_distance_m: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            cells: 4,
            users_per_cell: 4,
            antennas: 16,
            side_m: 500.0,
            pathloss_exponent: 3.5,
            cutoff_attenuation_db: -86.5,
            cutoff_distance_m: 25.0,
            noise_power_w: dbm_to_watts(DEFAULT_NOISE_DBM),
            rate_bps_hz: PerUser::Uniform(2.0),
            tau: PerLink::Uniform(0.0),
            seed: 0,
            bs_positions_m: None,
            cell_side_m: None,
            min_ue_distance_m: 0.0,
        }
    }
}

impl NetworkConfig {
    pub fn users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells == 0 || self.users_per_cell == 0 || self.antennas == 0 {
            return Err(Error::config("`cells`, `users_per_cell` and `antennas` must be >= 1"));
        }
        positive("side_m", self.side_m)?;
        if !(self.pathloss_exponent > 2.0) {
            return Err(Error::config("`pathloss_exponent` must be > 2"));
        }
        positive("cutoff_distance_m", self.cutoff_distance_m)?;
        positive("noise_power_w", self.noise_power_w)?;
        if !self.cutoff_attenuation_db.is_finite() {
            return Err(Error::config("`cutoff_attenuation_db` must be finite"));
        }
        if !(self.min_ue_distance_m >= 0.0) {
            return Err(Error::config("`min_ue_distance_m` must be >= 0"));
        }
        let rates = self.rate_bps_hz.expand(self.cells, self.users_per_cell, "rate_bps_hz")?;
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::config("`rate_bps_hz` entries must be finite and >= 0"));
        }
        self.tau_tensor()?;
        let layout = self.layout()?;
        if self.min_ue_distance_m >= layout.cell_side_m / 2.0 {
            return Err(Error::config("`min_ue_distance_m` must be smaller than half the cell side"));
        }
        Ok(())
    }

    pub fn path_loss(&self) -> PathLoss {
        PathLoss {
            exponent: self.pathloss_exponent,
            cutoff_attenuation_db: self.cutoff_attenuation_db,
            cutoff_distance_m: self.cutoff_distance_m,
        }
    }

    pub fn targets(&self) -> Result<SinrTargets> {
        let rates = self.rate_bps_hz.expand(self.cells, self.users_per_cell, "rate_bps_hz")?;
        rates_to_sinr_targets(self.cells, self.users_per_cell, &rates)
    }

    pub fn tau_tensor(&self) -> Result<TauTensor> {
        let (l, k) = (self.cells, self.users_per_cell);
        let data = match &self.tau {
            PerLink::Uniform(t) => vec![*t; l * l * k],
            PerLink::PerUser(table) => {
                check_table_shape(table, l, k, "tau")?;
                let per_user: Vec<f64> = table.iter().flatten().copied().collect();
                (0..l).flat_map(|_| per_user.iter().copied()).collect()
            }
            PerLink::PerLink(tensor) => {
                if tensor.len() != l {
                    return Err(Error::config(format!("`tau` must have {l} BS slices")));
                }
                for slice in tensor {
                    check_table_shape(slice, l, k, "tau")?;
                }
                tensor.iter().flatten().flatten().copied().collect()
            }
        };
        TauTensor::new(l, k, data)
    }

    fn layout(&self) -> Result<Layout> {
        match &self.bs_positions_m {
            Some(positions) => {
                if positions.len() != self.cells {
                    return Err(Error::config(format!(
                        "`bs_positions_m` has {} entries, expected {}",
                        positions.len(),
                        self.cells
                    )));
                }
                let cell_side_m = self
                    .cell_side_m
                    .ok_or_else(|| Error::config("`cell_side_m` is required with `bs_positions_m`"))?;
                positive("cell_side_m", cell_side_m)?;
                Ok(Layout {
                    bs: positions.clone(),
                    cell_side_m,
                })
            }
            None => {
                let m = (self.cells as f64).sqrt().round() as usize;
                if m * m != self.cells {
                    return Err(Error::config(format!(
                        "{} cells do not form a square grid; give `bs_positions_m` and `cell_side_m`",
                        self.cells
                    )));
                }
                let side = self.side_m / m as f64;
                let bs = (0..self.cells)
                    .map(|idx| {
                        let (row, col) = (idx / m, idx % m);
                        [(col as f64 + 0.5) * side, (row as f64 + 0.5) * side]
                    })
                    .collect();
                Ok(Layout { bs, cell_side_m: side })
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("`{name}` must be finite and > 0")))
    }
}

struct Layout {
    bs: Vec<[f64; 2]>,
    cell_side_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub bs_positions: Vec<[f64; 2]>,
    /// Indexed by the flat user index `j * K + k`; UE `(j, k)` is served by BS `j`.
    pub ue_positions: Vec<[f64; 2]>,
    pub users_per_cell: usize,
    pub cell_side_m: f64,
}

impl Geometry {
    pub fn cells(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn ue(&self, j: usize, k: usize) -> [f64; 2] {
        self.ue_positions[j * self.users_per_cell + k]
    }
}

const MAX_DROP_ATTEMPTS: usize = 100_000;

/// BSs at the cell centres, UEs uniform in their own square cell.
pub fn build_geometry(config: &NetworkConfig, streams: &Substreams) -> Result<Geometry> {
    let layout = config.layout()?;
    let half = layout.cell_side_m / 2.0;
    let mut rng = streams.stream(0);
    let mut ue_positions = Vec::with_capacity(config.users());
    for bs in &layout.bs {
        for _ in 0..config.users_per_cell {
            let mut placed = None;
            for _ in 0..MAX_DROP_ATTEMPTS {
                let x = rng::uniform_in(&mut rng, bs[0] - half, bs[0] + half);
                let y = rng::uniform_in(&mut rng, bs[1] - half, bs[1] + half);
                if (x - bs[0]).hypot(y - bs[1]) >= config.min_ue_distance_m {
                    placed = Some([x, y]);
                    break;
                }
            }
            ue_positions.push(placed.ok_or_else(|| Error::config("could not place UE outside the exclusion radius"))?);
        }
    }
    Ok(Geometry {
        bs_positions: layout.bs,
        ue_positions,
        users_per_cell: config.users_per_cell,
        cell_side_m: layout.cell_side_m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub exponent: f64,
    pub cutoff_attenuation_db: f64,
    pub cutoff_distance_m: f64,
}

impl PathLoss {
    /// `2 L_c / (1 + (|x| / x_c)^kappa)`, with `L_c` the attenuation at the cutoff distance `x_c`.
    pub fn gain(&self, offset: [f64; 2]) -> f64 {
        let dist = offset[0].hypot(offset[1]);
        2.0 * db_to_linear(self.cutoff_attenuation_db) / (1.0 + (dist / self.cutoff_distance_m).powf(self.exponent))
    }
}

/// Average channel gains `d`. Flat user index is `u = j * K + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleGains {
    cells: usize,
    users_per_cell: usize,
    /// `(l, j, k)` -> `(l * L + j) * K + k`
    cobf: Vec<f64>,
    /// `(l, u)` -> `l * (K L) + u`
    comp: Vec<f64>,
}

impl LargeScaleGains {
    /// Builds both indexings from `d(l, j, k)`.
    pub fn from_fn(cells: usize, users_per_cell: usize, d: impl Fn(usize, usize, usize) -> f64) -> Self {
        let users = cells * users_per_cell;
        let mut cobf = vec![0.0; cells * cells * users_per_cell];
        let mut comp = vec![0.0; cells * users];
        for l in 0..cells {
            for j in 0..cells {
                for k in 0..users_per_cell {
                    let v = d(l, j, k);
                    cobf[(l * cells + j) * users_per_cell + k] = v;
                    comp[l * users + j * users_per_cell + k] = v;
                }
            }
        }
        LargeScaleGains {
            cells,
            users_per_cell,
            cobf,
            comp,
        }
    }

    /// Every BS sees every UE with the same gain.
    pub fn uniform(cells: usize, users_per_cell: usize, d: f64) -> Self {
        Self::from_fn(cells, users_per_cell, |_, _, _| d)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    /// Gain from BS `l` to UE `k` of cell `j`.
    #[inline]
    pub fn cobf(&self, l: usize, j: usize, k: usize) -> f64 {
        self.cobf[(l * self.cells + j) * self.users_per_cell + k]
    }

    /// Gain from BS `l` to global user `u`.
    #[inline]
    pub fn comp(&self, l: usize, u: usize) -> f64 {
        self.comp[l * self.users() + u]
    }

    #[inline]
    pub fn own(&self, j: usize, k: usize) -> f64 {
        self.cobf(j, j, k)
    }

    /// Multiplies every gain from a non-serving BS by `factor`.
    pub fn scale_cross(&self, factor: f64) -> Self {
        Self::from_fn(self.cells, self.users_per_cell, |l, j, k| {
            let d = self.cobf(l, j, k);
            if l == j {
                d
            } else {
                d * factor
            }
        })
    }

    pub fn check(&self) -> Result<()> {
        for j in 0..self.cells {
            for k in 0..self.users_per_cell {
                let own = self.own(j, k);
                if !(own.is_finite() && own > 0.0) {
                    return Err(Error::config(format!("serving gain of UE ({j},{k}) must be > 0")));
                }
            }
        }
        if self.cobf.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::config("gains must be finite and >= 0"));
        }
        Ok(())
    }
}

pub fn large_scale_gains(geometry: &Geometry, path_loss: &PathLoss) -> LargeScaleGains {
    let cells = geometry.cells();
    let k = geometry.users_per_cell;
    let users = cells * k;
    let gain = |l: usize, pos: [f64; 2]| {
        let bs = geometry.bs_positions[l];
        path_loss.gain([pos[0] - bs[0], pos[1] - bs[1]])
    };
    let mut gains = LargeScaleGains::from_fn(cells, k, |l, j, kk| gain(l, geometry.ue(j, kk)));
    // the network-MIMO view is evaluated straight from the flat UE list
    for l in 0..cells {
        for u in 0..users {
            gains.comp[l * users + u] = gain(l, geometry.ue_positions[u]);
        }
    }
    gains
}

/// CSI error parameters `tau` for every link `(l, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauTensor {
    cells: usize,
    users_per_cell: usize,
    data: Vec<f64>,
}

impl TauTensor {
    pub fn new(cells: usize, users_per_cell: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != cells * cells * users_per_cell {
            return Err(Error::Dimension(format!(
                "tau tensor has {} entries, expected {}",
                data.len(),
                cells * cells * users_per_cell
            )));
        }
        if data.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::config("`tau` entries must lie in [0, 1]"));
        }
        Ok(TauTensor {
            cells,
            users_per_cell,
            data,
        })
    }

    pub fn uniform(cells: usize, users_per_cell: usize, tau: f64) -> Result<Self> {
        Self::new(cells, users_per_cell, vec![tau; cells * cells * users_per_cell])
    }

    pub fn zeros(cells: usize, users_per_cell: usize) -> Self {
        TauTensor {
            cells,
            users_per_cell,
            data: vec![0.0; cells * cells * users_per_cell],
        }
    }

    /// Same `tau` on every link towards a UE, taken from a flat per-user list.
    pub fn per_user(cells: usize, users_per_cell: usize, tau: &[f64]) -> Result<Self> {
        let data = (0..cells).flat_map(|_| tau.iter().copied()).collect();
        Self::new(cells, users_per_cell, data)
    }

    #[inline]
    pub fn get(&self, l: usize, j: usize, k: usize) -> f64 {
        self.data[(l * self.cells + j) * self.users_per_cell + k]
    }

    /// The single per-user value used by joint transmission: the serving link's.
    #[inline]
    pub fn user(&self, u: usize) -> f64 {
        let (j, k) = (u / self.users_per_cell, u % self.users_per_cell);
        self.get(j, j, k)
    }

    pub fn set(&mut self, l: usize, j: usize, k: usize, tau: f64) {
        self.data[(l * self.cells + j) * self.users_per_cell + k] = tau;
    }

    pub fn is_perfect(&self) -> bool {
        self.data.iter().all(|t| *t == 0.0)
    }
}

/// True and estimated small-scale channels for one realization.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub antennas: usize,
    pub cells: usize,
    pub users_per_cell: usize,
    /// Unit-variance fading draws per link `(l, j, k)`.
    pub w: Vec<CVector>,
    /// Unit-variance estimation-error draws per link.
    pub q: Vec<CVector>,
    pub true_cobf: Vec<CVector>,
    pub est_cobf: Vec<CVector>,
    /// Per user, the `N L` stacking of the per-BS blocks.
    pub true_comp: Vec<CVector>,
    pub est_comp: Vec<CVector>,
}

impl ChannelSet {
    #[inline]
    fn link(&self, l: usize, j: usize, k: usize) -> usize {
        (l * self.cells + j) * self.users_per_cell + k
    }

    pub fn true_link(&self, l: usize, j: usize, k: usize) -> &CVector {
        &self.true_cobf[self.link(l, j, k)]
    }

    pub fn est_link(&self, l: usize, j: usize, k: usize) -> &CVector {
        &self.est_cobf[self.link(l, j, k)]
    }
}

/// Rayleigh fading plus Gauss-Markov estimates `h_hat = sqrt(d) (sqrt(1 - tau^2) w + tau q)`.
pub fn draw_channels(
    gains: &LargeScaleGains,
    tau: &TauTensor,
    antennas: usize,
    streams: &Substreams,
) -> ChannelSet {
    let (cells, k) = (gains.cells(), gains.users_per_cell());
    let links = cells * cells * k;
    let mut w = Vec::with_capacity(links);
    let mut q = Vec::with_capacity(links);
    for link in 0..links {
        let mut rng = streams.stream(link as u64);
        w.push(CVector::from_fn(antennas, |_, _| rng::complex_gaussian(&mut rng)));
        q.push(CVector::from_fn(antennas, |_, _| rng::complex_gaussian(&mut rng)));
    }
    let estimate = |d: f64, t: f64, w: &CVector, q: &CVector| -> CVector {
        let a = d.sqrt() * (1.0 - t * t).sqrt();
        let b = d.sqrt() * t;
        w.map(|x| x * a) + q.map(|x| x * b)
    };
    let mut true_cobf = Vec::with_capacity(links);
    let mut est_cobf = Vec::with_capacity(links);
    for l in 0..cells {
        for j in 0..cells {
            for kk in 0..k {
                let idx = (l * cells + j) * k + kk;
                let d = gains.cobf(l, j, kk);
                true_cobf.push(w[idx].map(|x| x * d.sqrt()));
                est_cobf.push(estimate(d, tau.get(l, j, kk), &w[idx], &q[idx]));
            }
        }
    }
    let users = cells * k;
    let mut true_comp = Vec::with_capacity(users);
    let mut est_comp = Vec::with_capacity(users);
    for u in 0..users {
        let (j, kk) = (u / k, u % k);
        let t = tau.user(u);
        let mut h = CVector::zeros(antennas * cells);
        let mut h_hat = CVector::zeros(antennas * cells);
        for l in 0..cells {
            let idx = (l * cells + j) * k + kk;
            h.rows_mut(l * antennas, antennas).copy_from(&true_cobf[idx]);
            h_hat
                .rows_mut(l * antennas, antennas)
                .copy_from(&estimate(gains.comp(l, u), t, &w[idx], &q[idx]));
        }
        true_comp.push(h);
        est_comp.push(h_hat);
    }
    ChannelSet {
        antennas,
        cells,
        users_per_cell: k,
        w,
        q,
        true_cobf,
        est_cobf,
        true_comp,
        est_comp,
    }
}

/// Per-UE SINR targets, flat index `j * K + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrTargets {
    cells: usize,
    users_per_cell: usize,
    gamma: Vec<f64>,
}

impl SinrTargets {
    pub fn new(cells: usize, users_per_cell: usize, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() != cells * users_per_cell {
            return Err(Error::Dimension(format!(
                "{} SINR targets for {} users",
                gamma.len(),
                cells * users_per_cell
            )));
        }
        if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::config("SINR targets must be finite and >= 0"));
        }
        Ok(SinrTargets {
            cells,
            users_per_cell,
            gamma,
        })
    }

    pub fn uniform(cells: usize, users_per_cell: usize, gamma: f64) -> Result<Self> {
        Self::new(cells, users_per_cell, vec![gamma; cells * users_per_cell])
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.gamma[j * self.users_per_cell + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    pub fn cell(&self, j: usize) -> &[f64] {
        &self.gamma[j * self.users_per_cell..(j + 1) * self.users_per_cell]
    }
}

pub fn rate_to_sinr(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

pub fn rates_to_sinr_targets(cells: usize, users_per_cell: usize, rates: &[f64]) -> Result<SinrTargets> {
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::config("rates must be finite and >= 0"));
    }
    SinrTargets::new(cells, users_per_cell, rates.iter().map(|r| rate_to_sinr(*r)).collect())
}

/// Everything the deterministic equivalents need: long-term gains, targets,
/// CSI quality, array size and noise power.
#[derive(Debug, Clone)]
pub struct Problem {
    pub gains: LargeScaleGains,
    pub gamma: SinrTargets,
    pub tau: TauTensor,
    pub antennas: usize,
    pub noise_w: f64,
}

impl Problem {
    pub fn new(gains: LargeScaleGains, gamma: SinrTargets, tau: TauTensor, antennas: usize, noise_w: f64) -> Result<Self> {
        gains.check()?;
        if gamma.cells() != gains.cells() || gamma.users_per_cell() != gains.users_per_cell() {
            return Err(Error::Dimension("targets and gains disagree on network size".into()));
        }
        if tau.cells != gains.cells() || tau.users_per_cell != gains.users_per_cell() {
            return Err(Error::Dimension("tau and gains disagree on network size".into()));
        }
        if antennas == 0 {
            return Err(Error::config("antennas must be >= 1"));
        }
        positive("noise power", noise_w)?;
        Ok(Problem {
            gains,
            gamma,
            tau,
            antennas,
            noise_w,
        })
    }

    pub fn cells(&self) -> usize {
        self.gains.cells()
    }

    pub fn users_per_cell(&self) -> usize {
        self.gains.users_per_cell()
    }

    pub fn users(&self) -> usize {
        self.gains.users()
    }

    pub fn with_gains(&self, gains: LargeScaleGains) -> Self {
        Problem { gains, ..self.clone() }
    }

    pub fn with_tau(&self, tau: TauTensor) -> Self {
        Problem { tau, ..self.clone() }
    }
}
