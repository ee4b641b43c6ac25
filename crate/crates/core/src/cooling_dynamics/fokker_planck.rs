//! Closed-form solutions of the Fokker-Planck limit
//! `∂τ P = −∂E[A P] + ½ ∂²E[B P]`, `A = 1 + C E/N`, `B = 2E/N`.

use crate::error::{Error, Result};
use crate::spectrum::EnergyGrid;

use super::{CoolingParams, EnergyDistribution};

/// Drift constant and time scale of the Fokker-Planck equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpSolution {
    /// `C = 2 cos²θ₀/(cos²θ₀ + α) · L'(0)/L(0)`
    pub c: f64,
    /// `dτ/dt = ω_R (cos²θ₀ + α) L(0)`
    pub tau_scale: f64,
    pub n_ions: usize,
}

impl FpSolution {
    pub fn drift(&self, e: f64) -> f64 {
        1.0 + self.c * e / self.n_ions as f64
    }

    pub fn diffusion(&self, e: f64) -> f64 {
        2.0 * e / self.n_ions as f64
    }

    /// Relaxation rate of `⟨E⟩` in physical time.
    pub fn rate(&self) -> f64 {
        self.tau_scale * self.c.abs() / self.n_ions as f64
    }

    /// Steady thermal scale `1/|C|`.
    pub fn steady_u(&self) -> Result<f64> {
        if !(self.c < 0.0) {
            return Err(Error::NoSteadyState);
        }
        Ok(1.0 / self.c.abs())
    }

    /// `U(t) = (U₀ − 1/|C|) e^{−Γt} + 1/|C|`.
    pub fn u_at(&self, u0: f64, t: f64) -> Result<f64> {
        let u_inf = self.steady_u()?;
        Ok((u0 - u_inf) * (-self.rate() * t).exp() + u_inf)
    }
}

pub fn fp_coefficients(params: &CoolingParams) -> Result<FpSolution> {
    params.validate()?;
    if params.cos_theta0 == 0.0 {
        return Err(Error::NoAxialCooling);
    }
    if params.rabi == 0.0 {
        return Err(Error::invalid("rabi", "no laser coupling"));
    }
    let cos2 = params.cos2();
    let alpha = params.alpha()?;
    let l0 = params.lorentzian(0.0);
    let c = 2.0 * cos2 / (cos2 + alpha) * params.lorentzian_slope() / l0;
    let tau_scale = params.recoil * (cos2 + alpha) * l0;
    Ok(FpSolution { c, tau_scale, n_ions: params.n_ions })
}

/// `P₀(E) = |C|^N E^(N−1) e^(CE) / Γ(N)`, cell-averaged on `grid`.
pub fn fp_steady(params: &CoolingParams, grid: &EnergyGrid) -> Result<EnergyDistribution> {
    let fp = fp_coefficients(params)?;
    EnergyDistribution::thermal(grid, params.n_ions, fp.steady_u()?)
}

/// `⟨E⟩ = N/|C|`.
pub fn steady_energy(params: &CoolingParams) -> Result<f64> {
    let fp = fp_coefficients(params)?;
    Ok(params.n_ions as f64 * fp.steady_u()?)
}

/// Thermal scale and distribution at time `t` from a thermal start `U₀`.
pub fn fp_evolution(params: &CoolingParams, u0: f64, t: f64, grid: &EnergyGrid) -> Result<(f64, EnergyDistribution)> {
    if !(u0 > 0.0) {
        return Err(Error::invalid("u0", format!("must be positive, got {u0}")));
    }
    let fp = fp_coefficients(params)?;
    let u = fp.u_at(u0, t)?;
    if !(u > 0.0) {
        return Err(Error::invalid("u0", format!("thermal scale became {u} at t = {t}")));
    }
    Ok((u, EnergyDistribution::thermal(grid, params.n_ions, u)?))
}

/// `Γ = 2 ω_R cos²θ₀ |L'(0)| / N`.
pub fn cooling_rate(params: &CoolingParams) -> Result<f64> {
    params.validate()?;
    if !(params.detuning < 0.0) {
        return Err(Error::invalid("detuning", format!("cooling needs red detuning, got {}", params.detuning)));
    }
    Ok(2.0 * params.recoil * params.cos2() * params.lorentzian_slope().abs() / params.n_ions as f64)
}
