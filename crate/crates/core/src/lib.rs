//! Numerical laboratory for the cubic nonlinear Schrödinger equation on the
//! two-torus: resonance combinatorics, the resonant amplitude system, a
//! split-step pseudo-spectral solver, the geometric-optics approximant and
//! the energy-cascade diagnostics built on top of them.

pub mod approx;
pub mod cascade;
pub mod error;
pub mod lattice;
pub mod resonant;
pub mod runner;
pub mod series;
pub mod spectral;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use lattice::{ModeIndex, ModeSet, ResonantTriple};
pub use num_complex::Complex64;

/// Sign of the cubic nonlinearity: `+1` defocusing, `-1` focusing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("lambda must be +1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}
