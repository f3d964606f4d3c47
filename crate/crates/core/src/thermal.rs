//! Thermal noise model of a graph Hamiltonian with uniform coupling.
//!
//! At temperature `T` (with `k_B = 1`) the Gibbs state of the graph
//! Hamiltonian equals the ideal graph state hit by independent `Z` flips,
//! each with probability `p = 1 / (1 + exp(B / T))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-qubit flip probability at which a noisy pair has fidelity exactly
/// one half: `1 - 1/sqrt(2)`.
pub fn critical_error_prob() -> f64 {
    1.0 - std::f64::consts::FRAC_1_SQRT_2
}

/// Temperature above which no protocol can purify: `-B / ln(sqrt(2) - 1)`.
pub fn critical_temperature(coupling: f64) -> Result<f64> {
    if !(coupling > 0.0 && coupling.is_finite()) {
        return Err(Error::param(format!(
            "coupling B must be positive and finite, got {coupling}"
        )));
    }
    Ok(-coupling / (std::f64::consts::SQRT_2 - 1.0).ln())
}

/// True iff a pair with per-qubit flip probability `p` satisfies
/// `(1 - p)^2 > 1/2`.
///
/// Evaluated as `p < 1 - 1/sqrt(2)`. In floating point `(1 - p*)^2` rounds
/// to `0.5000000000000001`, which would put the boundary on the wrong side.
pub fn pair_purifiable(p: f64) -> bool {
    p < critical_error_prob()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    coupling: f64,
    temperature: f64,
}

impl ThermalModel {
    /// `temperature` may be `0` or `+inf`.
    pub fn new(coupling: f64, temperature: f64) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::param(format!(
                "coupling B must be positive and finite, got {coupling}"
            )));
        }
        if !(temperature >= 0.0) {
            return Err(Error::param(format!(
                "temperature must be >= 0, got {temperature}"
            )));
        }
        Ok(ThermalModel {
            coupling,
            temperature,
        })
    }

    /// Model at coupling `B` whose flip probability is `p`, for `p` in `[0, 1/2]`.
    pub fn from_error_prob(coupling: f64, p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::param(format!(
                "error probability must lie in [0, 1/2], got {p}"
            )));
        }
        let t = if p == 0.0 {
            0.0
        } else if p == 0.5 {
            f64::INFINITY
        } else {
            coupling / ((1.0 - p) / p).ln()
        };
        ThermalModel::new(coupling, t)
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Inverse temperature; `+inf` at `T = 0`.
    pub fn beta(&self) -> f64 {
        1.0 / self.temperature
    }

    pub fn error_prob(&self) -> f64 {
        if self.temperature == 0.0 {
            return 0.0;
        }
        // Logistic form stays finite for any B/T.
        let x = self.coupling / self.temperature;
        1.0 / (1.0 + x.exp())
    }

    /// Two-qubit purifiability `(1 - p)^2 > 1/2`, evaluated as `T < T_crit`.
    ///
    /// The two forms are equivalent because `p` is strictly increasing in
    /// `T`; comparing temperatures keeps the boundary point `T = T_crit`
    /// exactly on the non-purifiable side.
    pub fn is_purifiable(&self) -> bool {
        let t_crit = -self.coupling / (std::f64::consts::SQRT_2 - 1.0).ln();
        self.temperature < t_crit
    }
}
