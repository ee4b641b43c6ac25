//! Discretized ergodic rate equation for the shell densities `P(E, t)`.
//!
//! One scattering event is absorption (kernel with recoil `ω_R cos²θ₀`,
//! weighted by `L(E₁ − E)`) followed by emission (kernel with recoil
//! `ω_R c²`, averaged over the emission pattern). Kernel masses per cell come
//! from the exact kernel CDF. The loss of each shell is the column sum of the
//! gain matrix, so probability is conserved to rounding.

use crate::ergodic_kernel::{kernel_cdf, KernelParams};
use crate::error::{Error, Result};
use crate::ion_chain::ModeSpectrum;
use crate::spectrum::EnergyGrid;

use super::{CoolingParams, EnergyDistribution, ANGULAR_NODES};

/// Largest admissible `dt · max loss rate`.
pub const CFL_FACTOR: f64 = 0.1;
/// Densities below this abort the integration.
pub const NEGATIVE_TOLERANCE: f64 = -1e-12;
/// Leaked scattering weight above this is reported.
pub const LEAK_WARN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ErgodicOptions {
    /// Time step; defaults to the stability bound.
    pub dt: Option<f64>,
    /// Spacing of recorded `(t, ⟨E⟩)` samples; defaults to every step.
    pub record_interval: Option<f64>,
    pub angular_nodes: usize,
}

impl Default for ErgodicOptions {
    fn default() -> Self {
        Self { dt: None, record_interval: None, angular_nodes: ANGULAR_NODES }
    }
}

/// Banded column of the gain matrix: rows `start..start + values.len()`.
#[derive(Debug, Clone)]
struct Band {
    start: usize,
    values: Vec<f64>,
}

/// Cell masses of a kernel over the grid, as a band, plus the mass falling
/// outside.
fn kernel_band(kernel: &KernelParams, lower_edge: f64, de: f64, len: usize) -> (Band, f64) {
    let (lo, hi) = kernel.support();
    let first = ((lo - lower_edge) / de).floor().max(0.0) as usize;
    let last = (((hi - lower_edge) / de).floor().max(0.0) as usize).min(len.saturating_sub(1));
    if first > last || first >= len {
        return (Band { start: 0, values: Vec::new() }, 1.0);
    }
    let mut values = Vec::with_capacity(last - first + 1);
    let mut prev = kernel_cdf(kernel, lower_edge + first as f64 * de);
    for i in first..=last {
        let next = kernel_cdf(kernel, lower_edge + (i + 1) as f64 * de);
        values.push((next - prev).max(0.0));
        prev = next;
    }
    let inside: f64 = values.iter().sum();
    (Band { start: first, values }, (1.0 - inside).max(0.0))
}

/// Gain matrix `W[i ← j]` and loss rates of the discretized equation.
#[derive(Debug, Clone)]
pub struct ErgodicOperator {
    grid: EnergyGrid,
    columns: Vec<Band>,
    loss: Vec<f64>,
    /// Upper bound on the scattering rate out of the grid per shell.
    leak: Vec<f64>,
}

impl ErgodicOperator {
    pub fn build(
        params: &CoolingParams,
        spectrum: &ModeSpectrum,
        grid: &EnergyGrid,
        angular_nodes: usize,
    ) -> Result<Self> {
        params.validate()?;
        if spectrum.n_modes() != params.n_ions {
            return Err(Error::DimensionMismatch { expected: params.n_ions, got: spectrum.n_modes() });
        }
        grid.validate_for(spectrum)?;
        if !(grid.lower_edge() >= 0.0) {
            return Err(Error::invalid("grid", "lower edge must be non-negative"));
        }
        if grid.delta_e() > 0.1 * params.gamma {
            log::warn!("shell width {} is not small against gamma = {}", grid.delta_e(), params.gamma);
        }
        let n = grid.len();
        let de = grid.delta_e();
        let lower = grid.lower_edge();
        let n_ions = params.n_ions;
        let angular = params.pattern.angular_rule(angular_nodes)?;
        let absorb_recoil = params.recoil * params.cos2();
        let peak = params.lorentzian_peak();

        // emission from shell k, averaged over the pattern
        let mut emission = Vec::with_capacity(n);
        for k in 0..n {
            let e = grid.center(k);
            let mut start = usize::MAX;
            let mut end = 0;
            let mut parts = Vec::with_capacity(angular.len());
            let mut out = 0.0;
            for &(c, w) in &angular {
                let kernel = KernelParams::new(e, params.recoil * c * c, n_ions)?;
                let (band, outside) = kernel_band(&kernel, lower, de, n);
                if !band.values.is_empty() {
                    start = start.min(band.start);
                    end = end.max(band.start + band.values.len());
                }
                out += w * outside;
                parts.push((w, band));
            }
            let mut values = vec![0.0; end.saturating_sub(start)];
            for (w, band) in parts {
                for (i, v) in band.values.iter().enumerate() {
                    values[band.start + i - start] += w * v;
                }
            }
            emission.push((Band { start: if end == 0 { 0 } else { start }, values }, out));
        }

        let mut columns = Vec::with_capacity(n);
        let mut loss = vec![0.0; n];
        let mut leak = vec![0.0; n];
        for j in 0..n {
            let e = grid.center(j);
            let kernel = KernelParams::new(e, absorb_recoil, n_ions)?;
            let (absorb, outside) = kernel_band(&kernel, lower, de, n);
            let mut start = usize::MAX;
            let mut end = 0;
            for (i, _) in absorb.values.iter().enumerate() {
                let (band, _) = &emission[absorb.start + i];
                if !band.values.is_empty() {
                    start = start.min(band.start);
                    end = end.max(band.start + band.values.len());
                }
            }
            let mut values = vec![0.0; end.saturating_sub(start)];
            let mut leaked = outside * peak;
            for (i, mass) in absorb.values.iter().enumerate() {
                let k = absorb.start + i;
                let rate = params.lorentzian(grid.center(k) - e) * mass;
                let (band, out) = &emission[k];
                leaked += rate * out;
                for (r, v) in band.values.iter().enumerate() {
                    values[band.start + r - start] += rate * v;
                }
            }
            loss[j] = values.iter().sum();
            leak[j] = leaked;
            columns.push(Band { start: if end == 0 { 0 } else { start }, values });
        }
        Ok(Self { grid: grid.clone(), columns, loss, leak })
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn loss_rates(&self) -> &[f64] {
        &self.loss
    }

    pub fn max_loss(&self) -> f64 {
        self.loss.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest stable explicit time step.
    pub fn dt_bound(&self) -> f64 {
        let m = self.max_loss();
        if m > 0.0 {
            CFL_FACTOR / m
        } else {
            f64::INFINITY
        }
    }

    /// `dP/dt = W P − loss ∘ P`, written into `out`.
    pub fn apply(&self, p: &[f64], out: &mut [f64]) {
        for (o, (l, v)) in out.iter_mut().zip(self.loss.iter().zip(p)) {
            *o = -l * v;
        }
        for (col, &v) in self.columns.iter().zip(p) {
            if v == 0.0 {
                continue;
            }
            for (r, w) in col.values.iter().enumerate() {
                out[col.start + r] += w * v;
            }
        }
    }

    /// Stationary distribution by a dense linear solve (small grids only).
    pub fn stationary(&self) -> Result<EnergyDistribution> {
        let n = self.grid.len();
        if n > 4000 {
            return Err(Error::invalid("grid", format!("{n} shells is too many for a dense stationary solve")));
        }
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (j, col) in self.columns.iter().enumerate() {
            for (r, w) in col.values.iter().enumerate() {
                m[(col.start + r, j)] += w;
            }
            m[(j, j)] -= self.loss[j];
        }
        let de = self.grid.delta_e();
        // replace the most redundant balance row by normalization
        let row = n - 1;
        for j in 0..n {
            m[(row, j)] = de;
        }
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        rhs[row] = 1.0;
        let sol = m.lu().solve(&rhs).ok_or(Error::NoSteadyState)?;
        let p: Vec<f64> = sol.iter().map(|&v| if v < 0.0 && v > -1e-12 { 0.0 } else { v }).collect();
        EnergyDistribution::new(self.grid.clone(), p)
    }
}

/// Result of an ergodic integration.
#[derive(Debug, Clone)]
pub struct ErgodicRun {
    pub final_state: EnergyDistribution,
    /// `(t, ⟨E⟩)` samples including both endpoints.
    pub trajectory: Vec<(f64, f64)>,
    pub dt: f64,
    pub steps: u64,
    /// Expected number of scattering events per unit probability.
    pub scattered: f64,
    /// Upper bound on the scattering events that would have left the grid;
    /// suppressed rather than lost.
    pub leaked: f64,
    /// Largest `|Σ P ΔE − Σ P₀ ΔE|` over the run.
    pub max_norm_drift: f64,
}

/// Explicit Euler integration of the ergodic rate equation up to `t_final`.
pub fn evolve_ergodic(
    p0: &EnergyDistribution,
    params: &CoolingParams,
    spectrum: &ModeSpectrum,
    t_final: f64,
    options: &ErgodicOptions,
) -> Result<ErgodicRun> {
    let op = ErgodicOperator::build(params, spectrum, p0.grid(), options.angular_nodes)?;
    evolve_with(&op, p0, t_final, options)
}

impl ErgodicOperator {
    pub fn evolve(&self, p0: &EnergyDistribution, t_final: f64, options: &ErgodicOptions) -> Result<ErgodicRun> {
        evolve_with(self, p0, t_final, options)
    }
}

fn evolve_with(
    op: &ErgodicOperator,
    p0: &EnergyDistribution,
    t_final: f64,
    options: &ErgodicOptions,
) -> Result<ErgodicRun> {
    if p0.grid() != op.grid() {
        return Err(Error::invalid("p0", "initial distribution lives on a different grid"));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::invalid("t_final", format!("must be non-negative, got {t_final}")));
    }
    let bound = op.dt_bound();
    let dt_max = match options.dt {
        Some(dt) if !(dt > 0.0) => return Err(Error::invalid("dt", format!("must be positive, got {dt}"))),
        Some(dt) if dt > bound => return Err(Error::CflViolation { dt, bound }),
        Some(dt) => dt,
        None => bound,
    };
    let steps = if t_final == 0.0 { 0 } else { (t_final / dt_max).ceil().max(1.0) as u64 };
    let dt = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let record_every = match options.record_interval {
        Some(r) if r > 0.0 && dt > 0.0 => ((r / dt).round() as u64).max(1),
        _ => 1,
    };

    let grid = op.grid().clone();
    let de = grid.delta_e();
    let mean = |p: &[f64]| -> f64 {
        let total: f64 = p.iter().sum::<f64>() * de;
        p.iter().enumerate().map(|(i, v)| grid.center(i) * v * de).sum::<f64>() / total
    };
    let mut p = p0.densities().to_vec();
    let norm0: f64 = p.iter().sum::<f64>() * de;
    let mut rate = vec![0.0; p.len()];
    let mut trajectory = vec![(0.0, mean(&p))];
    let mut leaked = 0.0;
    let mut scattered = 0.0;
    let mut max_norm_drift: f64 = 0.0;
    for step in 1..=steps {
        op.apply(&p, &mut rate);
        leaked += dt * de * op.leak.iter().zip(&p).map(|(l, v)| l * v).sum::<f64>();
        scattered += dt * de * op.loss.iter().zip(&p).map(|(l, v)| l * v).sum::<f64>();
        for (v, r) in p.iter_mut().zip(&rate) {
            *v += dt * r;
        }
        let t = step as f64 * dt;
        if let Some((i, &v)) = p.iter().enumerate().find(|(_, v)| **v < NEGATIVE_TOLERANCE) {
            return Err(Error::NegativeDensity { shell: i, value: v, time: t });
        }
        let norm: f64 = p.iter().sum::<f64>() * de;
        max_norm_drift = max_norm_drift.max((norm - norm0).abs());
        if step % record_every == 0 || step == steps {
            trajectory.push((t, mean(&p)));
        }
    }
    if leaked > LEAK_WARN {
        log::warn!("up to {leaked:.3e} of {scattered:.3e} scattering events would have left the grid");
    }
    let final_state = EnergyDistribution::new(grid, p.into_iter().map(|v| v.max(0.0)).collect())?;
    if final_state.mean_energy() < 10.0 * de {
        log::warn!("mean energy is within ten shell widths of the grid scale; the ergodic description is marginal");
    }
    Ok(ErgodicRun { final_state, trajectory, dt, steps, scattered, leaked, max_norm_drift })
}

/// Exponential rate of `⟨E⟩ − E∞` fitted by least squares on
/// `ln|⟨E⟩ − E∞|` over samples whose deviation lies between `lo_frac` and
/// `hi_frac` of the initial deviation.
pub fn fit_relaxation_rate(trajectory: &[(f64, f64)], e_inf: f64, hi_frac: f64, lo_frac: f64) -> Result<f64> {
    let d0 =
        trajectory.first().map(|&(_, e)| (e - e_inf).abs()).ok_or_else(|| Error::invalid("trajectory", "empty"))?;
    let pts: Vec<(f64, f64)> = trajectory
        .iter()
        .filter_map(|&(t, e)| {
            let d = (e - e_inf).abs();
            (d <= hi_frac * d0 && d >= lo_frac * d0 && d > 0.0).then(|| (t, d.ln()))
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::invalid("trajectory", "too few samples inside the fit window"));
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, my) = (st / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt).powi(2)));
    Ok(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::super::{cooling_rate, fp_steady, steady_energy};
    use super::*;

    fn setup(rabi: f64) -> (CoolingParams, ModeSpectrum, EnergyGrid) {
        let mut params = CoolingParams::new(1, 20.0, rabi, 0.1);
        params.detuning = -10.0;
        let spectrum = ModeSpectrum::from_frequencies(vec![1.0]).unwrap();
        let grid = EnergyGrid::anchored(&spectrum, 0.5, 80.0).unwrap();
        (params, spectrum, grid)
    }

    #[test]
    fn no_coupling_leaves_state_unchanged() {
        let (params, spectrum, grid) = setup(0.0);
        let p0 = EnergyDistribution::thermal(&grid, 1, 5.0).unwrap();
        let run = evolve_ergodic(&p0, &params, &spectrum, 100.0, &ErgodicOptions::default()).unwrap();
        assert_eq!(run.final_state, p0);
    }

    #[test]
    fn probability_is_conserved_and_positive() {
        let (params, spectrum, grid) = setup(2.0);
        let p0 = EnergyDistribution::thermal(&grid, 1, 12.0).unwrap();
        let run = evolve_ergodic(&p0, &params, &spectrum, 50.0, &ErgodicOptions::default()).unwrap();
        assert!(run.max_norm_drift < 1e-9);
        assert!(run.final_state.densities().iter().all(|&v| v >= 0.0));
        assert!(run.final_state.mean_energy() < p0.mean_energy());
    }

    #[test]
    fn oversized_step_is_rejected() {
        let (params, spectrum, grid) = setup(2.0);
        let op = ErgodicOperator::build(&params, &spectrum, &grid, ANGULAR_NODES).unwrap();
        let p0 = EnergyDistribution::thermal(&grid, 1, 5.0).unwrap();
        let opts = ErgodicOptions { dt: Some(2.0 * op.dt_bound()), ..Default::default() };
        assert!(matches!(op.evolve(&p0, 1.0, &opts), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn stationary_state_is_fixed_point() {
        let (params, spectrum, grid) = setup(2.0);
        let op = ErgodicOperator::build(&params, &spectrum, &grid, ANGULAR_NODES).unwrap();
        let s = op.stationary().unwrap();
        assert!((s.total() - 1.0).abs() < 1e-12);
        let mut r = vec![0.0; grid.len()];
        op.apply(s.densities(), &mut r);
        let scale = op.max_loss() * s.densities().iter().cloned().fold(0.0, f64::max);
        assert!(r.iter().all(|v| v.abs() < 1e-10 * scale));
        let fp = fp_steady(&params, &grid).unwrap();
        assert!(s.l1_distance(&fp).unwrap() < 0.1);
        assert!((s.mean_energy() / steady_energy(&params).unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn relaxation_fit_recovers_exponential() {
        let traj: Vec<(f64, f64)> = (0..200).map(|i| (i as f64, 3.0 + 7.0 * (-0.05 * i as f64).exp())).collect();
        let rate = fit_relaxation_rate(&traj, 3.0, 0.9, 1e-3).unwrap();
        assert!((rate - 0.05).abs() < 1e-12);
        assert!(fit_relaxation_rate(&traj[..2], 3.0, 0.9, 1e-3).is_err());
    }

    #[test]
    fn relaxes_at_cooling_rate() {
        let (params, spectrum, grid) = setup(2.0);
        let op = ErgodicOperator::build(&params, &spectrum, &grid, ANGULAR_NODES).unwrap();
        let e_inf = op.stationary().unwrap().mean_energy();
        let p0 = EnergyDistribution::thermal(&grid, 1, 2.0 * e_inf).unwrap();
        let gamma = cooling_rate(&params).unwrap();
        let opts = ErgodicOptions { record_interval: Some(0.05 / gamma), ..Default::default() };
        let run = op.evolve(&p0, 6.0 / gamma, &opts).unwrap();
        let fitted = fit_relaxation_rate(&run.trajectory, e_inf, 0.8, 0.01).unwrap();
        assert!((fitted / gamma - 1.0).abs() < 0.1, "fitted {fitted} vs {gamma}");
    }
}
