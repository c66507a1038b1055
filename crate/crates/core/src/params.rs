//! Physical constants and the quantities derived from them.

use crate::error::{QbeError, Result};
use crate::linalg::C64;

/// Physical parameters of a Brownian model.
///
/// `hbar` and `k` are explicit so any unit system works; [`PhysParams::natural`]
/// sets both to one. Derived quantities are computed once on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    pub hbar: f64,
    pub k: f64,
    pub mass: f64,
    pub temperature: f64,
    /// Environmental coupling strength `C`.
    pub coupling: f64,
    /// Bath high-frequency cutoff.
    pub omega_max: f64,
    kt: f64,
    gamma: f64,
    eta: f64,
    inv_mbar: C64,
}

impl PhysParams {
    pub fn new(
        hbar: f64,
        k: f64,
        mass: f64,
        temperature: f64,
        coupling: f64,
        omega_max: f64,
    ) -> Result<Self> {
        positive("hbar", hbar)?;
        positive("k", k)?;
        positive("m", mass)?;
        positive("T", temperature)?;
        positive("omega_max", omega_max)?;
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(QbeError::InvalidParameter {
                name: "C",
                reason: format!("must be finite and >= 0, got {coupling}"),
            });
        }
        let kt = k * temperature;
        Ok(PhysParams {
            hbar,
            k,
            mass,
            temperature,
            coupling,
            omega_max,
            kt,
            gamma: hbar / (2.0 * mass * kt),
            eta: hbar * hbar * omega_max / (4.0 * std::f64::consts::PI * kt * kt),
            inv_mbar: C64::new(
                1.0 / mass,
                coupling * hbar * hbar / (2.0 * kt * mass * mass),
            ),
        })
    }

    /// `hbar = k = 1` with the given mass, temperature, coupling and cutoff.
    pub fn natural(mass: f64, temperature: f64, coupling: f64, omega_max: f64) -> Result<Self> {
        Self::new(1.0, 1.0, mass, temperature, coupling, omega_max)
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    /// `hbar / 2 m kT`
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `hbar^2 omega_max / (4 pi k^2 T^2)`
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Complex inverse effective mass `1/m + i C hbar^2 / (2 kT m^2)`.
    pub fn inv_mbar(&self) -> C64 {
        self.inv_mbar
    }

    /// Position-dephasing rate prefactor `C kT / 2 hbar`.
    pub fn dephasing_rate(&self) -> f64 {
        self.coupling * self.kt / (2.0 * self.hbar)
    }

    /// Gaussian width parameter of the eta-map: `eta C kT / 2 hbar`.
    pub fn eta_strength(&self) -> f64 {
        self.eta * self.dephasing_rate()
    }

    /// Position variance at which the standard equation's initial purity
    /// rate changes sign: `hbar^2 / (4 m kT)`.
    pub fn purity_threshold_variance(&self) -> f64 {
        self.hbar * self.hbar / (4.0 * self.mass * self.kt)
    }

    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        Self::new(
            self.hbar,
            self.k,
            self.mass,
            self.temperature,
            coupling,
            self.omega_max,
        )
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(
            self.hbar,
            self.k,
            self.mass,
            temperature,
            self.coupling,
            self.omega_max,
        )
    }

    pub fn with_omega_max(&self, omega_max: f64) -> Result<Self> {
        Self::new(
            self.hbar,
            self.k,
            self.mass,
            self.temperature,
            self.coupling,
            omega_max,
        )
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(QbeError::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {v}"),
        })
    }
}
