//! Laser-cooling dynamics of the crystal's total motional energy.
//!
//! Three levels of description share [`CoolingParams`]: the ergodic rate
//! equation on an energy grid, its Fokker-Planck limit (closed forms), and
//! per-mode birth-death equations in the Lamb-Dicke regime.

mod ergodic;
mod fokker_planck;
mod lamb_dicke;

pub use ergodic::{evolve_ergodic, fit_relaxation_rate, ErgodicOperator, ErgodicOptions, ErgodicRun};
pub use fokker_planck::{cooling_rate, fp_coefficients, fp_evolution, fp_steady, steady_energy, FpSolution};
pub use lamb_dicke::{ld_coefficients, ld_evolve, ld_steady, LdCoefficients, LdModeState};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::spectrum::EnergyGrid;

/// Ω/γ above which the low-saturation premise is questionable.
pub const SATURATION_WARN: f64 = 0.3;
/// Number of Gauss-Legendre nodes for the emission-angle integral.
pub const ANGULAR_NODES: usize = 32;

const PATTERN_NORM_TOLERANCE: f64 = 1e-6;

/// Angular distribution `N(c)` of spontaneous emission, `c = cosθ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionPattern {
    Isotropic,
    /// `3/4 (1 − c²)`
    DipoleLinear,
    /// `3/8 (1 + c²)`
    DipoleCircular,
    /// Tabulated `(c, N(c))` pairs, linearly interpolated, covering `[−1, 1]`.
    Custom(Vec<(f64, f64)>),
}

impl EmissionPattern {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "isotropic" => Ok(Self::Isotropic),
            "dipole_linear" => Ok(Self::DipoleLinear),
            "dipole_circular" => Ok(Self::DipoleCircular),
            other => Err(Error::invalid(
                "pattern",
                format!("unknown pattern `{other}` (isotropic, dipole_linear, dipole_circular)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Isotropic => "isotropic",
            Self::DipoleLinear => "dipole_linear",
            Self::DipoleCircular => "dipole_circular",
            Self::Custom(_) => "custom",
        }
    }

    pub fn density(&self, c: f64) -> f64 {
        match self {
            Self::Isotropic => 0.5,
            Self::DipoleLinear => 0.75 * (1.0 - c * c),
            Self::DipoleCircular => 0.375 * (1.0 + c * c),
            Self::Custom(table) => interpolate(table, c),
        }
    }

    /// Checks that a custom table is sorted, non-negative, spans `[−1, 1]`
    /// and integrates to one.
    pub fn validate(&self) -> Result<()> {
        let Self::Custom(table) = self else {
            return Ok(());
        };
        if table.len() < 2 {
            return Err(Error::invalid("pattern", "custom table needs at least two points"));
        }
        if table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid("pattern", "custom table abscissae must increase"));
        }
        if table.iter().any(|&(_, n)| !(n >= 0.0)) {
            return Err(Error::invalid("pattern", "custom table values must be non-negative"));
        }
        let (first, last) = (table[0].0, table[table.len() - 1].0);
        if (first + 1.0).abs() > 1e-12 || (last - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("pattern", "custom table must span [-1, 1]"));
        }
        let integral = trapezoid(table, |_, n| n);
        if (integral - 1.0).abs() > PATTERN_NORM_TOLERANCE {
            return Err(Error::UnnormalizedPattern { integral });
        }
        Ok(())
    }

    /// Nodes `c` and weights `w·N(c)` of the angular average, normalized to
    /// sum to one.
    pub fn angular_rule(&self, nodes: usize) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let rule = GaussLegendre::new(nodes);
        let mut pts: Vec<(f64, f64)> = rule.mapped(-1.0, 1.0).map(|(c, w)| (c, w * self.density(c))).collect();
        let total: f64 = pts.iter().map(|p| p.1).sum();
        for p in &mut pts {
            p.1 /= total;
        }
        Ok(pts)
    }
}

fn interpolate(table: &[(f64, f64)], c: f64) -> f64 {
    let i = table.partition_point(|p| p.0 <= c);
    if i == 0 {
        return table[0].1;
    }
    if i == table.len() {
        return table[table.len() - 1].1;
    }
    let (x0, y0) = table[i - 1];
    let (x1, y1) = table[i];
    y0 + (y1 - y0) * (c - x0) / (x1 - x0)
}

fn trapezoid(table: &[(f64, f64)], f: impl Fn(f64, f64) -> f64) -> f64 {
    table.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (f(w[0].0, w[0].1) + f(w[1].0, w[1].1))).sum()
}

/// `α = ∫ c² N(c) dc`.
pub fn alpha_from_pattern(pattern: &EmissionPattern) -> Result<f64> {
    pattern.validate()?;
    match pattern {
        EmissionPattern::Custom(table) => Ok(trapezoid(table, |c, n| c * c * n)),
        preset => Ok(GaussLegendre::new(ANGULAR_NODES).integrate(-1.0, 1.0, |c| c * c * preset.density(c))),
    }
}

/// Laser, recoil and emission parameters; rates in units of the axial
/// frequency, energies in units of its quantum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingParams {
    pub gamma: f64,
    pub detuning: f64,
    pub rabi: f64,
    pub recoil: f64,
    pub cos_theta0: f64,
    pub pattern: EmissionPattern,
    pub m_driven: usize,
    pub n_ions: usize,
}

impl CoolingParams {
    /// Optimal-detuning defaults for `n_ions` uniformly driven ions.
    pub fn new(n_ions: usize, gamma: f64, rabi: f64, recoil: f64) -> Self {
        Self {
            gamma,
            detuning: -0.5 * gamma,
            rabi,
            recoil,
            cos_theta0: 1.0,
            pattern: EmissionPattern::Isotropic,
            m_driven: n_ions,
            n_ions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite, got {v}")))
            }
        };
        finite("gamma", self.gamma)?;
        finite("detuning", self.detuning)?;
        finite("rabi", self.rabi)?;
        finite("recoil", self.recoil)?;
        finite("cos_theta0", self.cos_theta0)?;
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.rabi >= 0.0) {
            return Err(Error::invalid("rabi", format!("must be non-negative, got {}", self.rabi)));
        }
        if !(self.recoil > 0.0) {
            return Err(Error::invalid("recoil", format!("must be positive, got {}", self.recoil)));
        }
        if self.cos_theta0.abs() > 1.0 {
            return Err(Error::invalid("cos_theta0", format!("must lie in [-1, 1], got {}", self.cos_theta0)));
        }
        if self.n_ions == 0 {
            return Err(Error::invalid("n_ions", "must be at least 1"));
        }
        if self.m_driven == 0 || self.m_driven > self.n_ions {
            return Err(Error::invalid("m_driven", format!("must lie in 1..={}, got {}", self.n_ions, self.m_driven)));
        }
        let alpha = alpha_from_pattern(&self.pattern)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid("pattern", format!("alpha = {alpha} outside [0, 1]")));
        }
        if self.rabi / self.gamma > SATURATION_WARN {
            log::warn!(
                "rabi/gamma = {:.3} exceeds {SATURATION_WARN}; the low-saturation treatment is unreliable",
                self.rabi / self.gamma
            );
        }
        Ok(())
    }

    pub fn alpha(&self) -> Result<f64> {
        alpha_from_pattern(&self.pattern)
    }

    pub fn cos2(&self) -> f64 {
        self.cos_theta0 * self.cos_theta0
    }

    /// `L(x) = M Ω² γ / (4 (x − δ)² + γ²)`.
    pub fn lorentzian(&self, x: f64) -> f64 {
        let d = x - self.detuning;
        self.m_driven as f64 * self.rabi * self.rabi * self.gamma / (4.0 * d * d + self.gamma * self.gamma)
    }

    /// `L'(0) = 8 M Ω² γ δ / (4δ² + γ²)²`.
    pub fn lorentzian_slope(&self) -> f64 {
        let s = 4.0 * self.detuning * self.detuning + self.gamma * self.gamma;
        8.0 * self.m_driven as f64 * self.rabi * self.rabi * self.gamma * self.detuning / (s * s)
    }

    /// Peak value `M Ω² / γ`.
    pub fn lorentzian_peak(&self) -> f64 {
        self.m_driven as f64 * self.rabi * self.rabi / self.gamma
    }
}

/// Free function form of [`CoolingParams::lorentzian`].
pub fn lorentzian(x: f64, params: &CoolingParams) -> f64 {
    params.lorentzian(x)
}

/// Shell densities `P(E)` on an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDistribution {
    grid: EnergyGrid,
    p: Vec<f64>,
}

impl EnergyDistribution {
    pub fn new(grid: EnergyGrid, p: Vec<f64>) -> Result<Self> {
        if p.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: p.len() });
        }
        if let Some((i, &v)) = p.iter().enumerate().find(|(_, v)| !(**v >= -1e-12)) {
            return Err(Error::NegativeDensity { shell: i, value: v, time: 0.0 });
        }
        Ok(Self { grid, p })
    }

    /// Cell-averaged `E^(N−1) e^(−E/U) / (Γ(N) U^N)`, renormalized to the grid.
    pub fn thermal(grid: &EnergyGrid, n_ions: usize, u: f64) -> Result<Self> {
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::invalid("u", format!("thermal scale must be positive, got {u}")));
        }
        let dist = Gamma::new(n_ions as f64, 1.0 / u).map_err(|e| Error::invalid("u", e.to_string()))?;
        let de = grid.delta_e();
        let mut p: Vec<f64> = (0..grid.len())
            .map(|i| {
                let lo = (grid.center(i) - 0.5 * de).max(0.0);
                let hi = (grid.center(i) + 0.5 * de).max(0.0);
                (dist.cdf(hi) - dist.cdf(lo)).max(0.0) / de
            })
            .collect();
        let total: f64 = p.iter().sum::<f64>() * de;
        if !(total > 0.0) {
            return Err(Error::invalid("u", "thermal distribution has no weight on the grid"));
        }
        for v in &mut p {
            *v /= total;
        }
        Ok(Self { grid: grid.clone(), p })
    }

    /// All probability in the shell containing `e`.
    pub fn concentrated(grid: &EnergyGrid, e: f64) -> Result<Self> {
        let i = grid.shell_of(e).ok_or_else(|| Error::invalid("e", format!("{e} lies outside the grid")))?;
        let mut p = vec![0.0; grid.len()];
        p[i] = 1.0 / grid.delta_e();
        Ok(Self { grid: grid.clone(), p })
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn densities(&self) -> &[f64] {
        &self.p
    }

    /// `Σ P ΔE`.
    pub fn total(&self) -> f64 {
        self.p.iter().sum::<f64>() * self.grid.delta_e()
    }

    pub fn mean_energy(&self) -> f64 {
        let de = self.grid.delta_e();
        self.p.iter().enumerate().map(|(i, p)| self.grid.center(i) * p * de).sum::<f64>() / self.total()
    }

    /// `Σ |P − P'| ΔE`.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid", "distributions live on different grids"));
        }
        Ok(self.p.iter().zip(&other.p).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.grid.delta_e())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_presets() {
        assert!((alpha_from_pattern(&EmissionPattern::Isotropic).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert!((alpha_from_pattern(&EmissionPattern::DipoleLinear).unwrap() - 0.2).abs() < 1e-14);
        assert!((alpha_from_pattern(&EmissionPattern::DipoleCircular).unwrap() - 0.4).abs() < 1e-14);
    }

    #[test]
    fn custom_table() {
        let table: Vec<(f64, f64)> = (0..=2000).map(|i| (-1.0 + i as f64 / 1000.0, 0.5)).collect();
        let a = alpha_from_pattern(&EmissionPattern::Custom(table)).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-6);
        let bad = EmissionPattern::Custom(vec![(-1.0, 1.0), (1.0, 1.0)]);
        assert!(matches!(alpha_from_pattern(&bad), Err(Error::UnnormalizedPattern { .. })));
        let short = EmissionPattern::Custom(vec![(-0.5, 1.0), (0.5, 1.0)]);
        assert!(alpha_from_pattern(&short).is_err());
    }

    #[test]
    fn angular_rule_is_normalized() {
        for p in [EmissionPattern::Isotropic, EmissionPattern::DipoleLinear, EmissionPattern::DipoleCircular] {
            let rule = p.angular_rule(ANGULAR_NODES).unwrap();
            let total: f64 = rule.iter().map(|r| r.1).sum();
            assert!((total - 1.0).abs() < 1e-14);
            let alpha: f64 = rule.iter().map(|(c, w)| c * c * w).sum();
            assert!((alpha - alpha_from_pattern(&p).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn lorentzian_shape() {
        let p = CoolingParams::new(2, 20.0, 2.0, 0.1);
        assert!((p.lorentzian(p.detuning) - p.lorentzian_peak()).abs() < 1e-15);
        for y in [0.3, 4.0, 17.0] {
            assert!((p.lorentzian(p.detuning + y) - p.lorentzian(p.detuning - y)).abs() < 1e-15);
        }
        let h = 1e-5;
        let fd = (p.lorentzian(h) - p.lorentzian(-h)) / (2.0 * h);
        assert!((fd / p.lorentzian_slope() - 1.0).abs() < 1e-8);
        assert!(p.lorentzian_slope() < 0.0);
    }

    #[test]
    fn params_validation() {
        let ok = CoolingParams::new(3, 10.0, 1.0, 0.05);
        assert!(ok.validate().is_ok());
        let mut p = ok.clone();
        p.m_driven = 4;
        assert!(p.validate().is_err());
        let mut p = ok.clone();
        p.gamma = 0.0;
        assert!(p.validate().is_err());
        let mut p = ok.clone();
        p.cos_theta0 = 1.5;
        assert!(p.validate().is_err());
        let mut p = ok;
        p.recoil = -1.0;
        assert!(p.validate().is_err());
        assert!(EmissionPattern::parse("dipole_linear").is_ok());
        assert!(EmissionPattern::parse("dipolar").is_err());
    }

    #[test]
    fn thermal_distribution_is_normalized() {
        let grid = EnergyGrid::from_lower_edge(0.0, 0.1, 2000).unwrap();
        for n in [1, 2, 5] {
            let d = EnergyDistribution::thermal(&grid, n, 3.0).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-12);
            assert!((d.mean_energy() / (3.0 * n as f64) - 1.0).abs() < 1e-3);
        }
        let c = EnergyDistribution::concentrated(&grid, 5.05).unwrap();
        assert!((c.total() - 1.0).abs() < 1e-15);
        assert!(EnergyDistribution::new(grid.clone(), vec![0.0; 3]).is_err());
    }
}
