//! Classical energy-transfer kernel for a single photon recoil and the
//! equivalent shell coupling.
//!
//! In the scaled variable `s = (E' − E − R)/sqrt(4 R E)` the kernel is a
//! symmetric beta density `∝ (1 − s²)^(N − 3/2)` on `[−1, 1]`.

use rand::Rng;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::ion_chain::ModeSpectrum;
use crate::quadrature::GaussLegendre;

/// Default number of Gauss-Legendre nodes for kernel integrals.
pub const DEFAULT_NODES: usize = 200;

/// Initial shell energy, effective recoil `ω_R cos²θ` and ion number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub e: f64,
    pub recoil: f64,
    pub n_ions: usize,
}

impl KernelParams {
    pub fn new(e: f64, recoil: f64, n_ions: usize) -> Result<Self> {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::invalid("e", format!("must be positive, got {e}")));
        }
        if !(recoil >= 0.0) || !recoil.is_finite() {
            return Err(Error::invalid("recoil", format!("must be non-negative, got {recoil}")));
        }
        if n_ions == 0 {
            return Err(Error::invalid("n_ions", "must be at least 1"));
        }
        Ok(Self { e, recoil, n_ions })
    }

    /// Center `E + R` of the support.
    pub fn center(&self) -> f64 {
        self.e + self.recoil
    }

    /// `sqrt(4 R E)`.
    pub fn half_width(&self) -> f64 {
        (4.0 * self.recoil * self.e).sqrt()
    }

    pub fn support(&self) -> (f64, f64) {
        let (c, h) = (self.center(), self.half_width());
        (c - h, c + h)
    }

    fn exponent(&self) -> f64 {
        self.n_ions as f64 - 1.5
    }

    /// `ln[Γ(N) / (sqrt(π) Γ(N − 1/2))]`, the normalization in `s`.
    fn ln_shape_norm(&self) -> f64 {
        let n = self.n_ions as f64;
        ln_gamma(n) - 0.5 * PI.ln() - ln_gamma(n - 0.5)
    }
}

/// `ω_R cos²θ`.
pub fn effective_recoil(recoil_frequency: f64, cos_theta: f64) -> f64 {
    recoil_frequency * cos_theta * cos_theta
}

/// Value of the kernel; a vanishing recoil collapses it onto `E' = E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelDensity {
    Value(f64),
    Delta { location: f64 },
}

impl KernelDensity {
    /// The density, treating the delta as zero away from its location.
    pub fn value_or_zero(self) -> f64 {
        match self {
            KernelDensity::Value(v) => v,
            KernelDensity::Delta { .. } => 0.0,
        }
    }
}

/// `f_E(E')`: probability density of the energy after one recoil.
pub fn kernel_f(params: &KernelParams, e_prime: f64) -> KernelDensity {
    if params.recoil == 0.0 {
        return KernelDensity::Delta { location: params.e };
    }
    let hw = params.half_width();
    let s = (e_prime - params.center()) / hw;
    if !(s.abs() <= 1.0) {
        return KernelDensity::Value(0.0);
    }
    let base = 1.0 - s * s;
    let p = params.exponent();
    if base == 0.0 {
        return KernelDensity::Value(if p < 0.0 { f64::INFINITY } else { 0.0 });
    }
    KernelDensity::Value((params.ln_shape_norm() - hw.ln() + p * base.ln()).exp())
}

/// Cumulative distribution `∫_{−∞}^{E'} f_E`.
pub fn kernel_cdf(params: &KernelParams, e_prime: f64) -> f64 {
    if params.recoil == 0.0 {
        return if e_prime >= params.e { 1.0 } else { 0.0 };
    }
    let s = (e_prime - params.center()) / params.half_width();
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = params.n_ions as f64 - 0.5;
    beta_reg(a, a, 0.5 * (1.0 + s))
}

/// Probability mass of `[lo, hi)`.
pub fn kernel_mass(params: &KernelParams, lo: f64, hi: f64) -> f64 {
    (kernel_cdf(params, hi) - kernel_cdf(params, lo)).max(0.0)
}

/// `∫ f_E(E') φ(E') dE'` with the endpoint-regularizing substitution
/// `E' = E + R + sqrt(4RE) sin u`.
pub fn kernel_expectation<F: FnMut(f64) -> f64>(params: &KernelParams, rule: &GaussLegendre, mut phi: F) -> f64 {
    if params.recoil == 0.0 {
        return phi(params.e);
    }
    let (c, hw) = (params.center(), params.half_width());
    let weight_exp = 2.0 * params.n_ions as f64 - 2.0;
    let norm = params.ln_shape_norm().exp();
    rule.mapped(-FRAC_PI_2, FRAC_PI_2).map(|(u, w)| w * norm * u.cos().powf(weight_exp) * phi(c + hw * u.sin())).sum()
}

/// Normalization, mean shift and variance of the kernel by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    pub norm: f64,
    pub mean_shift: f64,
    pub variance: f64,
}

pub fn kernel_moments(params: &KernelParams, rule: &GaussLegendre) -> KernelMoments {
    let norm = kernel_expectation(params, rule, |_| 1.0);
    let mean_shift = kernel_expectation(params, rule, |x| x - params.e) / norm;
    let variance = kernel_expectation(params, rule, |x| {
        let d = x - params.e - mean_shift;
        d * d
    }) / norm;
    KernelMoments { norm, mean_shift, variance }
}

/// Analytic variance `2 R E / N`.
pub fn kernel_variance(params: &KernelParams) -> f64 {
    2.0 * params.recoil * params.e / params.n_ions as f64
}

/// Closed-form shell coupling `Q(E, E')`, related to the kernel through
/// `g(E') Q(E, E') = f_E(E')`. Exactly symmetric in its energy arguments.
pub fn q_classical(e: f64, e_prime: f64, spectrum: &ModeSpectrum, recoil: f64) -> Result<f64> {
    if !(recoil > 0.0) {
        return Err(Error::invalid("recoil", format!("must be positive, got {recoil}")));
    }
    if !(e > 0.0) || !(e_prime > 0.0) {
        return Ok(0.0);
    }
    let (a, b) = if e <= e_prime { (e, e_prime) } else { (e_prime, e) };
    let d = b - a;
    let x = -d * d - recoil * recoil + 2.0 * recoil * (a + b);
    if !(x > 0.0) {
        return Ok(0.0);
    }
    let n = spectrum.n_modes() as f64;
    let ln_q = 2.0 * ln_gamma(n) + spectrum.ln_frequency_product()
        - 0.5 * PI.ln()
        - ln_gamma(n - 0.5)
        - (n - 1.0) * (4.0 * recoil * a * b).ln()
        + (n - 1.5) * x.ln();
    Ok(ln_q.exp())
}

/// Draws `E'` from `f_E`.
pub fn kernel_sample<R: Rng + ?Sized>(params: &KernelParams, rng: &mut R) -> f64 {
    if params.recoil == 0.0 {
        return params.e;
    }
    let weight_exp = 2.0 * params.n_ions as f64 - 2.0;
    let u = loop {
        let u = rng.gen_range(-FRAC_PI_2..FRAC_PI_2);
        if params.n_ions == 1 || rng.gen::<f64>() < u.cos().powf(weight_exp) {
            break u;
        }
    };
    params.center() + params.half_width() * u.sin()
}
