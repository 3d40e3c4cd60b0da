//! Power-minimizing downlink precoding for multi-cell MU-MIMO under three
//! levels of base-station cooperation, together with the large-system
//! deterministic equivalents of the optimal multipliers and powers.
//!
//! * [`Scheme::Scbf`]: single-cell beamforming, each BS only knows its own UEs' channels.
//! * [`Scheme::Cobf`]: coordinated beamforming, shared CSI but per-BS data.
//! * [`Scheme::Comp`]: network MIMO, one joint `N L`-antenna precoder.
//!
//! [`finite`] solves a single channel realization, [`asym`] evaluates the
//! deterministic equivalents, [`closed_forms`] holds the limiting regimes and
//! the two-cell case study, and [`harness`] drives Monte-Carlo experiments.

pub mod asym;
pub mod closed_forms;
pub mod error;
pub mod finite;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod par;
pub mod rng;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use model::{LargeScaleGains, NetworkConfig, Problem, SinrTargets, TauTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Scbf,
    Cobf,
    Comp,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Scbf, Scheme::Cobf, Scheme::Comp];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Scbf => "scbf",
            Scheme::Cobf => "cobf",
            Scheme::Comp => "comp",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scbf" => Ok(Scheme::Scbf),
            "cobf" => Ok(Scheme::Cobf),
            "comp" => Ok(Scheme::Comp),
            other => Err(Error::Config(format!("unknown scheme `{other}` (expected scbf, cobf or comp)"))),
        }
    }
}
