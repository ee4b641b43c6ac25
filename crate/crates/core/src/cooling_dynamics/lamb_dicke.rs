//! Per-mode birth-death equations of the Lamb-Dicke regime.
//!
//! Mode `β` gains a quantum at rate `A₊ (n+1)` and loses one at rate `A₋ n`.
//! Populations are truncated with a reflecting top level and advanced by
//! backward Euler, which keeps them non-negative and makes the truncated
//! detailed-balance distribution an exact fixed point.

use crate::error::{Error, Result};
use crate::franck_condon::LAMB_DICKE_WARN;
use crate::ion_chain::ModeSpectrum;

use super::CoolingParams;

/// Largest `dt · (A₋ − A₊)` per backward-Euler step.
pub const LD_STEP_FACTOR: f64 = 0.002;
/// Geometric tail weight neglected when sizing the truncation.
const TAIL_WEIGHT: f64 = 1e-16;
const MAX_LEVELS: usize = 1_000_000;

/// Heating and cooling coefficients of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdCoefficients {
    pub heating: f64,
    pub cooling: f64,
}

impl LdCoefficients {
    /// `A₊ / (A₋ − A₊)`.
    pub fn steady_occupation(&self, mode: usize) -> Result<f64> {
        if !(self.cooling > self.heating) {
            return Err(Error::HeatingRegime { mode, heating: self.heating, cooling: self.cooling });
        }
        Ok(self.heating / (self.cooling - self.heating))
    }
}

/// `A±^β = (ω_R/ν_β)(1/N)[cos²θ₀ L(±ν_β) + α L(0)]`.
///
/// The `1/N` spreads the driven ions' scattering over the mode participation
/// `Σ_j (b_j^β)² = 1`, matching the Fokker-Planck cooling rate.
pub fn ld_coefficients(spectrum: &ModeSpectrum, params: &CoolingParams) -> Result<Vec<LdCoefficients>> {
    params.validate()?;
    if spectrum.n_modes() != params.n_ions {
        return Err(Error::DimensionMismatch { expected: params.n_ions, got: spectrum.n_modes() });
    }
    let alpha = params.alpha()?;
    let cos2 = params.cos2();
    let l0 = params.lorentzian(0.0);
    let n = params.n_ions as f64;
    let eta_max = (params.recoil * cos2.max(alpha) / spectrum.frequencies()[0]).sqrt();
    if eta_max > LAMB_DICKE_WARN {
        log::warn!("Lamb-Dicke parameter {eta_max:.3} exceeds {LAMB_DICKE_WARN}; the sideband expansion is unreliable");
    }
    Ok(spectrum
        .frequencies()
        .iter()
        .map(|&nu| {
            let w = params.recoil / (nu * n);
            LdCoefficients {
                heating: w * (cos2 * params.lorentzian(nu) + alpha * l0),
                cooling: w * (cos2 * params.lorentzian(-nu) + alpha * l0),
            }
        })
        .collect())
}

/// Detailed-balance occupations of every mode.
pub fn ld_steady(spectrum: &ModeSpectrum, params: &CoolingParams) -> Result<Vec<f64>> {
    ld_coefficients(spectrum, params)?.iter().enumerate().map(|(b, c)| c.steady_occupation(b)).collect()
}

/// Occupation-number distributions of every mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LdModeState {
    populations: Vec<Vec<f64>>,
}

impl LdModeState {
    pub fn new(populations: Vec<Vec<f64>>) -> Result<Self> {
        for (b, p) in populations.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::invalid("populations", format!("mode {b} has no levels")));
            }
            if let Some((k, &v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(Error::NegativeDensity { shell: k, value: v, time: 0.0 });
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("populations", format!("mode {b} sums to {total}")));
            }
        }
        Ok(Self { populations })
    }

    /// Thermal (geometric) distributions with the given means, truncated
    /// where the tail weight drops below 1e-16.
    pub fn thermal(means: &[f64]) -> Result<Self> {
        let populations = means
            .iter()
            .map(|&m| {
                if !(m >= 0.0) || !m.is_finite() {
                    return Err(Error::invalid("means", format!("occupation must be non-negative, got {m}")));
                }
                let r = m / (m + 1.0);
                let levels = levels_for_ratio(r)?;
                let mut p: Vec<f64> = (0..levels).map(|k| r.powi(k as i32)).collect();
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= total);
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { populations })
    }

    pub fn n_modes(&self) -> usize {
        self.populations.len()
    }

    pub fn populations(&self) -> &[Vec<f64>] {
        &self.populations
    }

    pub fn mean_occupations(&self) -> Vec<f64> {
        self.populations.iter().map(|p| p.iter().enumerate().map(|(k, v)| k as f64 * v).sum()).collect()
    }

    /// `Σ_β ν_β (⟨n_β⟩ + 1/2)`.
    pub fn total_energy(&self, spectrum: &ModeSpectrum) -> f64 {
        self.mean_occupations().iter().zip(spectrum.frequencies()).map(|(n, nu)| nu * (n + 0.5)).sum()
    }
}

fn levels_for_ratio(r: f64) -> Result<usize> {
    if r <= 0.0 {
        return Ok(1);
    }
    let levels = (TAIL_WEIGHT.ln() / r.ln()).ceil() as usize + 2;
    if levels > MAX_LEVELS {
        return Err(Error::invalid("occupation", format!("needs {levels} levels (cap {MAX_LEVELS})")));
    }
    Ok(levels)
}

/// Integrates every mode independently up to time `t`.
pub fn ld_evolve(
    spectrum: &ModeSpectrum,
    params: &CoolingParams,
    initial: &LdModeState,
    t: f64,
) -> Result<LdModeState> {
    let coeffs = ld_coefficients(spectrum, params)?;
    if initial.n_modes() != coeffs.len() {
        return Err(Error::DimensionMismatch { expected: coeffs.len(), got: initial.n_modes() });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", format!("must be non-negative, got {t}")));
    }
    let mut out = Vec::with_capacity(coeffs.len());
    for (b, (c, p0)) in coeffs.iter().zip(&initial.populations).enumerate() {
        if c.heating == 0.0 && c.cooling == 0.0 {
            out.push(p0.clone());
            continue;
        }
        if !(c.cooling > c.heating) {
            return Err(Error::HeatingRegime { mode: b, heating: c.heating, cooling: c.cooling });
        }
        let levels = p0.len().max(levels_for_ratio(c.heating / c.cooling)?);
        let mut p = p0.clone();
        p.resize(levels, 0.0);
        if t > 0.0 {
            let dt_max = LD_STEP_FACTOR / (c.cooling - c.heating);
            let steps = (t / dt_max).ceil().max(1.0) as u64;
            let dt = t / steps as f64;
            let mut stepper = BirthDeathStepper::new(c.heating, c.cooling, levels, dt);
            for _ in 0..steps {
                stepper.step(&mut p);
            }
        }
        out.push(p);
    }
    Ok(LdModeState { populations: out })
}

/// Backward-Euler step `(I − dt G) p' = p` for the truncated chain.
struct BirthDeathStepper {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    scratch_c: Vec<f64>,
    scratch_d: Vec<f64>,
}

impl BirthDeathStepper {
    fn new(heating: f64, cooling: f64, levels: usize, dt: f64) -> Self {
        let top = levels - 1;
        let mut lower = vec![0.0; levels];
        let mut diag = vec![0.0; levels];
        let mut upper = vec![0.0; levels];
        for k in 0..levels {
            let kf = k as f64;
            let up = if k < top { heating * (kf + 1.0) } else { 0.0 };
            diag[k] = 1.0 + dt * (up + cooling * kf);
            if k > 0 {
                lower[k] = -dt * heating * kf;
            }
            if k < top {
                upper[k] = -dt * cooling * (kf + 1.0);
            }
        }
        Self { lower, diag, upper, scratch_c: vec![0.0; levels], scratch_d: vec![0.0; levels] }
    }

    fn step(&mut self, p: &mut [f64]) {
        let n = p.len();
        let (c, d) = (&mut self.scratch_c, &mut self.scratch_d);
        c[0] = self.upper[0] / self.diag[0];
        d[0] = p[0] / self.diag[0];
        for k in 1..n {
            let m = self.diag[k] - self.lower[k] * c[k - 1];
            c[k] = self.upper[k] / m;
            d[k] = (p[k] - self.lower[k] * d[k - 1]) / m;
        }
        p[n - 1] = d[n - 1];
        for k in (0..n - 1).rev() {
            p[k] = d[k] - c[k] * p[k + 1];
        }
        let total: f64 = p.iter().sum();
        for v in p.iter_mut() {
            *v = v.max(0.0) / total;
        }
    }
}
