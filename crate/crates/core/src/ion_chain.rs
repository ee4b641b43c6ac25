//! Equilibrium structure and normal modes of a linear ion chain.
//!
//! Positions are measured in the length unit `ℓ = (e²/4πε₀ m ν₁²)^(1/3)`,
//! curvatures in `m ν₁²`, frequencies in `ν₁`. In these units the axial
//! potential of the chain is
//!
//! ```text
//! U(u) = Σ_j u_j²/2 + Σ_{j<k} 1/|u_j − u_k|
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Maximum number of damped Newton iterations for the equilibrium solve.
pub const EQUILIBRIUM_MAX_ITERATIONS: usize = 200;
/// Max-norm force residual at which the equilibrium solve stops.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-12;
/// Residual above which externally supplied positions are rejected.
pub const EQUILIBRIUM_ACCEPTANCE: f64 = 1e-9;

/// Trap and crystal definition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub n_ions: usize,
    /// Axial trap frequency in units of ν₁ (1 in natural units).
    pub axial_frequency: f64,
    /// Recoil frequency ω_R = ħk²/2m in units of ν₁.
    pub recoil_frequency: f64,
}

impl ChainConfig {
    pub fn new(n_ions: usize, recoil_frequency: f64) -> Result<Self> {
        let config = Self { n_ions, axial_frequency: 1.0, recoil_frequency };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::invalid("n_ions", "a chain needs at least one ion"));
        }
        if !(self.axial_frequency > 0.0 && self.axial_frequency.is_finite()) {
            return Err(Error::invalid("axial_frequency", format!("must be positive, got {}", self.axial_frequency)));
        }
        if !(self.recoil_frequency >= 0.0 && self.recoil_frequency.is_finite()) {
            return Err(Error::invalid(
                "recoil_frequency",
                format!("must be non-negative, got {}", self.recoil_frequency),
            ));
        }
        Ok(())
    }
}

/// Classical equilibrium positions, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPositions {
    positions: Vec<f64>,
}

impl EquilibriumPositions {
    /// Wraps raw positions without checking the force balance; [`hessian`]
    /// performs that check.
    pub fn from_raw(mut positions: Vec<f64>) -> Self {
        positions.sort_by(|a, b| a.total_cmp(b));
        Self { positions }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Max-norm of the dimensionless force at these positions.
    pub fn residual(&self) -> f64 {
        gradient(&self.positions).iter().fold(0.0_f64, |m, g| m.max(g.abs()))
    }
}

/// Normal-mode frequencies (ascending) and orthonormal eigenvectors.
///
/// `eigenvectors[(j, a)]` is the amplitude of ion `j` in mode `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    frequencies: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl ModeSpectrum {
    /// Builds a spectrum from given frequencies with an identity mode matrix.
    /// Useful for state counting, where only the frequencies matter.
    pub fn from_frequencies(frequencies: Vec<f64>) -> Result<Self> {
        let n = frequencies.len();
        Self::from_parts(frequencies, DMatrix::identity(n, n))
    }

    pub fn from_parts(frequencies: Vec<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let n = frequencies.len();
        if n == 0 {
            return Err(Error::invalid("frequencies", "need at least one mode"));
        }
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: eigenvectors.nrows() });
        }
        if let Some(bad) = frequencies.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::invalid("frequencies", format!("mode frequency {bad} is not positive")));
        }
        Ok(Self { frequencies, eigenvectors })
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Zero-point energy Σ_a ν_a / 2.
    pub fn ground_energy(&self) -> f64 {
        0.5 * self.frequencies.iter().sum::<f64>()
    }

    /// ln Π_a ν_a.
    pub fn ln_frequency_product(&self) -> f64 {
        self.frequencies.iter().map(|f| f.ln()).sum()
    }

    pub fn highest_frequency(&self) -> f64 {
        self.frequencies.iter().copied().fold(0.0, f64::max)
    }
}

/// Lamb-Dicke parameters; `eta[(j, a)]` couples ion `j` to mode `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambDickeSet {
    eta: DMatrix<f64>,
}

impl LambDickeSet {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.eta
    }

    pub fn n_ions(&self) -> usize {
        self.eta.nrows()
    }

    pub fn get(&self, ion: usize, mode: usize) -> f64 {
        self.eta[(ion, mode)]
    }

    /// The per-mode parameters seen by one ion.
    pub fn row(&self, ion: usize) -> Vec<f64> {
        self.eta.row(ion).iter().copied().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.eta.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }
}

/// Everything derived from a [`ChainConfig`].
#[derive(Debug, Clone)]
pub struct IonChain {
    pub config: ChainConfig,
    pub positions: EquilibriumPositions,
    pub spectrum: ModeSpectrum,
}

impl IonChain {
    pub fn solve(config: ChainConfig) -> Result<Self> {
        let positions = solve_equilibrium(&config)?;
        let curvature = hessian(&positions)?;
        let spectrum = solve_modes(&curvature, config.axial_frequency)?;
        Ok(Self { config, positions, spectrum })
    }

    pub fn lamb_dicke(&self, cos_theta0: f64) -> Result<LambDickeSet> {
        lamb_dicke(&self.spectrum, &self.config, cos_theta0)
    }
}

fn gradient(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut g: Vec<f64> = u.to_vec();
    for j in 0..n {
        for k in 0..n {
            if k != j {
                let d = u[j] - u[k];
                g[j] -= d.signum() / (d * d);
            }
        }
    }
    g
}

fn curvature_matrix(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = 1.0;
        for k in 0..n {
            if k != j {
                let c = 2.0 / (u[j] - u[k]).abs().powi(3);
                diag += c;
                h[(j, k)] = -c;
            }
        }
        h[(j, j)] = diag;
    }
    h
}

fn strictly_increasing(u: &[f64]) -> bool {
    u.windows(2).all(|w| w[0] < w[1])
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Solves the axial force balance by damped Newton iteration.
pub fn solve_equilibrium(config: &ChainConfig) -> Result<EquilibriumPositions> {
    config.validate()?;
    let n = config.n_ions;
    if n == 1 {
        return Ok(EquilibriumPositions { positions: vec![0.0] });
    }

    // Uniform spacing from the large-N scaling of the minimum separation.
    let spacing = 2.018 / (n as f64).powf(0.559);
    let mid = 0.5 * (n as f64 - 1.0);
    let mut u: Vec<f64> = (0..n).map(|j| (j as f64 - mid) * spacing).collect();

    let mut g = gradient(&u);
    let mut residual = max_abs(&g);
    let mut iterations = 0;
    while residual > EQUILIBRIUM_TOLERANCE {
        if iterations == EQUILIBRIUM_MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations, residual });
        }
        iterations += 1;

        let h = curvature_matrix(&u);
        let rhs = DVector::from_vec(g.clone());
        let step = match h.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => h.lu().solve(&rhs).ok_or(Error::NoConvergence { iterations, residual })?,
        };

        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - damping * s).collect();
            if strictly_increasing(&trial) {
                let trial_g = gradient(&trial);
                let trial_residual = max_abs(&trial_g);
                if trial_residual < residual || damping < 1e-6 {
                    u = trial;
                    g = trial_g;
                    residual = trial_residual;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-12 {
                // Newton direction no longer reduces the residual: at the
                // round-off floor.
                let sym = symmetrized(&u);
                let sym_residual = max_abs(&gradient(&sym));
                return if sym_residual <= EQUILIBRIUM_TOLERANCE {
                    Ok(EquilibriumPositions { positions: sym })
                } else {
                    Err(Error::NoConvergence { iterations, residual })
                };
            }
        }
    }

    // The potential is even under u -> -u; remove round-off asymmetry.
    let sym = symmetrized(&u);
    if max_abs(&gradient(&sym)) <= residual.max(EQUILIBRIUM_TOLERANCE) {
        u = sym;
    }
    Ok(EquilibriumPositions { positions: u })
}

fn symmetrized(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n).map(|j| 0.5 * (u[j] - u[n - 1 - j])).collect()
}

/// Curvature matrix V_jk of the potential at an equilibrium, in units m ν₁².
pub fn hessian(positions: &EquilibriumPositions) -> Result<DMatrix<f64>> {
    if positions.is_empty() {
        return Err(Error::invalid("positions", "empty chain"));
    }
    if !strictly_increasing(positions.as_slice()) {
        return Err(Error::invalid("positions", "ions must be distinct"));
    }
    let residual = positions.residual();
    if residual > EQUILIBRIUM_ACCEPTANCE {
        return Err(Error::NotEquilibrium { residual });
    }
    Ok(curvature_matrix(positions.as_slice()))
}

/// Diagonalizes the curvature matrix.
///
/// Frequencies are `axial_frequency · sqrt(λ)`, ascending. Each eigenvector is
/// signed so that its largest-magnitude component (the first one, on ties) is
/// positive.
pub fn solve_modes(curvature: &DMatrix<f64>, axial_frequency: f64) -> Result<ModeSpectrum> {
    let n = curvature.nrows();
    if n == 0 || curvature.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: curvature.ncols() });
    }
    let eig = curvature.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut frequencies = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 0.0 {
            return Err(Error::NotCrystallized { eigenvalue: lambda });
        }
        frequencies.push(axial_frequency * lambda.sqrt());

        let v = eig.eigenvectors.column(idx);
        let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let lead = v.iter().find(|x| x.abs() >= peak - 1e-9).copied().unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            vectors[(j, col)] = sign * v[j];
        }
    }
    ModeSpectrum::from_parts(frequencies, vectors)
}

/// Lamb-Dicke parameters `η_j^a = cosθ₀ b_j^a sqrt(ω_R/ν_a)`.
pub fn lamb_dicke(spectrum: &ModeSpectrum, config: &ChainConfig, cos_theta0: f64) -> Result<LambDickeSet> {
    if !(cos_theta0.abs() <= 1.0) {
        return Err(Error::invalid("cos_theta0", format!("|cos θ₀| must be ≤ 1, got {cos_theta0}")));
    }
    config.validate()?;
    let n = spectrum.n_modes();
    let b = spectrum.eigenvectors();
    let eta = DMatrix::from_fn(n, n, |j, a| {
        cos_theta0 * b[(j, a)] * (config.recoil_frequency / spectrum.frequencies()[a]).sqrt()
    });
    Ok(LambDickeSet { eta })
}
