//! Maser parameters and the birth-death description of the photon number.
//!
//! Restricted to diagonal states, the cavity is a birth-death chain on
//! `{0, 1, 2, ...}`. An atom leaving in the ground state adds a photon with
//! rate `c_n = nex sin²(phi sqrt(n+1))`; the thermal bath adds one with rate
//! `nu (n+1)` and removes one with rate `(nu+1) n`.

mod intersections;
mod potential;
mod stationary;
pub(crate) use stationary::default_cap;

pub use intersections::{
    rate_intersections, rate_intersections_up_to, Intersection, IntersectionKind,
};
pub use potential::{
    effective_potential, effective_potential_on, limit_potential, EffectivePotential,
};
pub use stationary::{
    mean_count_rate, stationary, stationary_capped, MeanCountRate, StationaryDistribution,
};

use crate::error::{check_dim, check_finite, MaserError, Result};

/// Physical parameters of the maser.
///
/// `alpha = sqrt(nex) * phi` is derived on demand and never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaserParams {
    nex: f64,
    phi: f64,
    nu: f64,
}

impl MaserParams {
    /// `nex` atoms per cavity lifetime, Rabi angle `phi`, bath occupation `nu`.
    pub fn new(nex: f64, phi: f64, nu: f64) -> Result<Self> {
        for (name, value) in [("nex", nex), ("phi", phi), ("nu", nu)] {
            check_finite(name, value)?;
            if value < 0.0 {
                return Err(MaserError::InvalidParameter {
                    name,
                    value,
                    reason: "must be non-negative",
                });
            }
        }
        Ok(Self { nex, phi, nu })
    }

    /// Builds the parameters from the pumping parameter `alpha` instead of `phi`.
    ///
    /// With `nex = 0` only `alpha = 0` is meaningful; `phi` is then set to 0.
    pub fn from_alpha(nex: f64, alpha: f64, nu: f64) -> Result<Self> {
        check_finite("alpha", alpha)?;
        check_finite("nex", nex)?;
        if alpha < 0.0 {
            return Err(MaserError::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "must be non-negative",
            });
        }
        if nex <= 0.0 {
            if alpha != 0.0 {
                return Err(MaserError::InvalidParameter {
                    name: "alpha",
                    value: alpha,
                    reason: "nonzero alpha requires nex > 0",
                });
            }
            return Self::new(nex, 0.0, nu);
        }
        Self::new(nex, alpha / nex.sqrt(), nu)
    }

    pub fn nex(&self) -> f64 {
        self.nex
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn alpha(&self) -> f64 {
        self.nex.sqrt() * self.phi
    }

    /// Rate of counted (ground-state atom) transitions `n -> n+1`.
    #[inline]
    pub fn counted_rate(&self, n: usize) -> f64 {
        let s = (self.phi * ((n + 1) as f64).sqrt()).sin();
        self.nex * s * s
    }

    /// Thermal absorption rate `n -> n+1`.
    #[inline]
    pub fn thermal_birth_rate(&self, n: usize) -> f64 {
        self.nu * (n + 1) as f64
    }

    /// Total upward rate `b_n`.
    #[inline]
    pub fn birth_rate(&self, n: usize) -> f64 {
        self.counted_rate(n) + self.thermal_birth_rate(n)
    }

    /// Downward rate `d_n = (nu+1) n`.
    #[inline]
    pub fn death_rate(&self, n: usize) -> f64 {
        (self.nu + 1.0) * n as f64
    }
}

/// Per-level rates of the truncated birth-death chain on `0..dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub dim: usize,
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
    pub counted: Vec<f64>,
}

/// Tabulates birth, death and counted rates for levels `0..dim`.
pub fn rates(params: &MaserParams, dim: usize) -> Result<RateTable> {
    check_dim(dim)?;
    let counted: Vec<f64> = (0..dim).map(|n| params.counted_rate(n)).collect();
    let birth = counted
        .iter()
        .enumerate()
        .map(|(n, c)| c + params.thermal_birth_rate(n))
        .collect();
    let death = (0..dim).map(|n| params.death_rate(n)).collect();
    Ok(RateTable {
        dim,
        birth,
        death,
        counted,
    })
}
