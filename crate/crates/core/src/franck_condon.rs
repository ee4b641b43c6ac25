//! Franck-Condon amplitudes of the photon-recoil displacement operator,
//! their moments, shell-averaged couplings and the Lamb-Dicke expansion.
//!
//! Magnitudes are evaluated in the log domain; the generalized Laguerre
//! polynomial comes from its three-term recurrence with running rescaling,
//! so no explicit alternating sum is ever formed.

use num_complex::Complex64;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::ion_chain::{LambDickeSet, ModeSpectrum};
use crate::spectrum::{EnergyGrid, StateEnumerator};

/// Required completeness of truncated final-state sums.
pub const COMPLETENESS_TARGET: f64 = 1.0 - 1e-10;
/// Lamb-Dicke parameters above this trigger a validity warning.
pub const LAMB_DICKE_WARN: f64 = 0.3;

const MAX_WINDOW: u32 = 200_000;

/// Occupation numbers of every mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockState {
    occupations: Vec<u32>,
}

impl FockState {
    pub fn new(occupations: Vec<u32>) -> Self {
        Self { occupations }
    }

    pub fn ground(n_modes: usize) -> Self {
        Self { occupations: vec![0; n_modes] }
    }

    pub fn occupations(&self) -> &[u32] {
        &self.occupations
    }

    pub fn n_modes(&self) -> usize {
        self.occupations.len()
    }

    /// Σ_a (n_a + 1/2) ν_a
    pub fn energy(&self, spectrum: &ModeSpectrum) -> f64 {
        self.occupations.iter().zip(spectrum.frequencies()).map(|(&n, nu)| (n as f64 + 0.5) * nu).sum()
    }
}

/// `(sign, ln|L_r^a(x)|)` of a generalized Laguerre polynomial.
pub fn laguerre_log(r: u32, a: u32, x: f64) -> (f64, f64) {
    let a = a as f64;
    let mut prev = 1.0_f64;
    if r == 0 {
        return (1.0, 0.0);
    }
    let mut cur = 1.0 + a - x;
    let mut log_scale = 0.0;
    for k in 1..r {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        let m = cur.abs();
        if m > 1e150 {
            prev /= m;
            cur /= m;
            log_scale += m.ln();
        }
    }
    if cur == 0.0 {
        (0.0, f64::NEG_INFINITY)
    } else {
        (cur.signum(), cur.abs().ln() + log_scale)
    }
}

/// `(sign, ln|amplitude|)` of the real part of `fc_single` before the `i^d`
/// phase; shared by the amplitude and probability entry points.
fn fc_log_parts(n: u32, l: u32, eta: f64) -> (f64, f64, u32) {
    let d = n.abs_diff(l);
    let r = n.min(l);
    if eta == 0.0 {
        return if d == 0 { (1.0, 0.0, 0) } else { (0.0, f64::NEG_INFINITY, d) };
    }
    let x = eta * eta;
    let (l_sign, l_log) = laguerre_log(r, d, x);
    if l_sign == 0.0 {
        return (0.0, f64::NEG_INFINITY, d);
    }
    let ln_mag =
        -0.5 * x + 0.5 * (ln_factorial(r as u64) - ln_factorial((r + d) as u64)) + d as f64 * eta.abs().ln() + l_log;
    let eta_sign = if eta < 0.0 && d % 2 == 1 { -1.0 } else { 1.0 };
    (l_sign * eta_sign, ln_mag, d)
}

/// Single-mode amplitude
/// `e^{−η²/2} sqrt(r!/(r+d)!) (iη)^d L_r^d(η²)` with `r = min(n,l)`, `d = |l−n|`.
pub fn fc_single(n: u32, l: u32, eta: f64) -> Complex64 {
    let (sign, ln_mag, d) = fc_log_parts(n, l, eta);
    if sign == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let v = sign * ln_mag.exp();
    match d % 4 {
        0 => Complex64::new(v, 0.0),
        1 => Complex64::new(0.0, v),
        2 => Complex64::new(-v, 0.0),
        _ => Complex64::new(0.0, -v),
    }
}

/// `|fc_single(n, l, η)|²`.
pub fn fc_single_prob(n: u32, l: u32, eta: f64) -> f64 {
    let (sign, ln_mag, _) = fc_log_parts(n, l, eta);
    if sign == 0.0 {
        0.0
    } else {
        (2.0 * ln_mag).exp()
    }
}

/// Multi-mode amplitude: product of single-mode amplitudes with the per-mode
/// parameters `eta_row` of one ion.
pub fn fc_multi(n: &FockState, l: &FockState, eta_row: &[f64]) -> Result<Complex64> {
    let modes = eta_row.len();
    if n.n_modes() != modes {
        return Err(Error::DimensionMismatch { expected: modes, got: n.n_modes() });
    }
    if l.n_modes() != modes {
        return Err(Error::DimensionMismatch { expected: modes, got: l.n_modes() });
    }
    Ok(n.occupations.iter().zip(&l.occupations).zip(eta_row).map(|((&a, &b), &eta)| fc_single(a, b, eta)).product())
}

/// Transition probabilities `|⟨k|D(η)|n⟩|²` from a fixed `n` over a window of
/// final occupations `lo..=hi`.
#[derive(Debug, Clone)]
struct FinalStateWindow {
    lo: u32,
    probs: Vec<f64>,
}

impl FinalStateWindow {
    fn build(n: u32, eta: f64, lo: u32, hi: u32) -> Self {
        Self { lo, probs: (lo..=hi).map(|k| fc_single_prob(n, k, eta)).collect() }
    }

    fn completeness(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Drops negligible tails; the discarded `Σ p (1 + (k−n)²)` stays below
    /// `slack` so second moments are unaffected too.
    fn trim(&mut self, n: u32, slack: f64) {
        let lever = |i: usize| {
            let d = (self.lo as f64 + i as f64) - n as f64;
            self.probs[i] * (1.0 + d * d)
        };
        let mut lost = 0.0;
        let mut start = 0;
        let mut end = self.probs.len();
        loop {
            let head = if start < end { lever(start) } else { f64::INFINITY };
            let tail = if end > start { lever(end - 1) } else { f64::INFINITY };
            let (smaller, is_head) = if head <= tail { (head, true) } else { (tail, false) };
            if end - start <= 1 || lost + smaller > slack {
                break;
            }
            lost += smaller;
            if is_head {
                start += 1;
            } else {
                end -= 1;
            }
        }
        self.lo += start as u32;
        self.probs = self.probs[start..end].to_vec();
    }
}

fn converged_window(n: u32, eta: f64, per_mode_target: f64) -> Result<FinalStateWindow> {
    let mut span = (10.0 + 20.0 * eta.abs() * ((n as f64) + 1.0).sqrt()).ceil() as u32;
    loop {
        let lo = n.saturating_sub(span);
        let hi = n + span;
        let mut window = FinalStateWindow::build(n, eta, lo, hi);
        let c = window.completeness();
        if c >= per_mode_target {
            window.trim(n, 0.01 * (1.0 - per_mode_target));
            return Ok(window);
        }
        if span >= MAX_WINDOW {
            return Err(Error::TruncationInsufficient { achieved: c, required: per_mode_target });
        }
        span = (span + span / 2).min(MAX_WINDOW);
    }
}

/// First and second moments of the energy transfer for one driven ion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonMoments {
    pub m1: f64,
    pub m2: f64,
    pub completeness: f64,
}

/// Brute-force moments for every ion and their ion average.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub per_ion: Vec<IonMoments>,
    pub m1_mean: f64,
    pub m2_mean: f64,
}

/// Sums `(E_k − E_n)^m |⟨k|e^{ik z_j}|n⟩|²` over all final states `k`
/// (by explicit enumeration of the truncated product space) for every ion `j`.
///
/// `eta` must be built with the projection `cosθ` of the recoil of interest.
pub fn moments_bruteforce(n: &FockState, spectrum: &ModeSpectrum, eta: &LambDickeSet) -> Result<MomentReport> {
    let modes = spectrum.n_modes();
    if n.n_modes() != modes {
        return Err(Error::DimensionMismatch { expected: modes, got: n.n_modes() });
    }
    if eta.n_ions() != modes {
        return Err(Error::DimensionMismatch { expected: modes, got: eta.n_ions() });
    }
    let per_mode_target = 1.0 - (1.0 - COMPLETENESS_TARGET) / modes as f64;
    let freqs = spectrum.frequencies();
    let mut per_ion = Vec::with_capacity(modes);
    for ion in 0..modes {
        let windows = (0..modes)
            .map(|a| converged_window(n.occupations[a], eta.get(ion, a), per_mode_target))
            .collect::<Result<Vec<_>>>()?;

        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        let mut idx = vec![0usize; modes];
        'outer: loop {
            let mut p = 1.0;
            let mut de = 0.0;
            for a in 0..modes {
                let w = &windows[a];
                p *= w.probs[idx[a]];
                let k = w.lo as f64 + idx[a] as f64;
                de += freqs[a] * (k - n.occupations[a] as f64);
            }
            m0 += p;
            m1 += p * de;
            m2 += p * de * de;
            for a in (0..modes).rev() {
                idx[a] += 1;
                if idx[a] < windows[a].probs.len() {
                    continue 'outer;
                }
                idx[a] = 0;
            }
            break;
        }
        if m0 < COMPLETENESS_TARGET {
            return Err(Error::TruncationInsufficient { achieved: m0, required: COMPLETENESS_TARGET });
        }
        per_ion.push(IonMoments { m1, m2, completeness: m0 });
    }
    let nf = modes as f64;
    let m1_mean = per_ion.iter().map(|m| m.m1).sum::<f64>() / nf;
    let m2_mean = per_ion.iter().map(|m| m.m2).sum::<f64>() / nf;
    Ok(MomentReport { per_ion, m1_mean, m2_mean })
}

/// Shell-averaged squared coupling between two energy shells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellCoupling {
    pub e_from: f64,
    pub e_to: f64,
    pub q: f64,
    pub d_from: u64,
    pub d_to: u64,
}

fn shell_members(spectrum: &ModeSpectrum, grid: &EnergyGrid, shell: usize) -> Result<Vec<Vec<u32>>> {
    let half = 0.5 * grid.delta_e();
    let center = grid.center(shell);
    let mut members = Vec::new();
    StateEnumerator::new(spectrum).for_each(center - half, center + half, |occ, e| {
        if grid.shell_of(e) == Some(shell) {
            members.push(occ.to_vec());
        }
    })?;
    if members.is_empty() {
        return Err(Error::EmptyShell { energy: center });
    }
    Ok(members)
}

/// `Q(E, E') = 1/(N D D') Σ_j Σ'_n Σ'_k |⟨k|e^{−ik z_j}|n⟩|²` by exact
/// enumeration of both shells.
pub fn average_coupling_bruteforce(
    spectrum: &ModeSpectrum,
    eta: &LambDickeSet,
    grid: &EnergyGrid,
    e_from: f64,
    e_to: f64,
) -> Result<ShellCoupling> {
    let modes = spectrum.n_modes();
    if eta.n_ions() != modes {
        return Err(Error::DimensionMismatch { expected: modes, got: eta.n_ions() });
    }
    let from_shell =
        grid.shell_of(e_from).ok_or_else(|| Error::invalid("e_from", format!("{e_from} lies outside the grid")))?;
    let to_shell =
        grid.shell_of(e_to).ok_or_else(|| Error::invalid("e_to", format!("{e_to} lies outside the grid")))?;
    let from = shell_members(spectrum, grid, from_shell)?;
    let to = shell_members(spectrum, grid, to_shell)?;

    let max_occ = |set: &[Vec<u32>], a: usize| set.iter().map(|s| s[a]).max().unwrap_or(0) as usize;
    let mut total = 0.0;
    for ion in 0..modes {
        // probability tables indexed [n][k] per mode
        let tables: Vec<Vec<Vec<f64>>> = (0..modes)
            .map(|a| {
                let eta_a = eta.get(ion, a);
                (0..=max_occ(&from, a))
                    .map(|n| (0..=max_occ(&to, a)).map(|k| fc_single_prob(n as u32, k as u32, eta_a)).collect())
                    .collect()
            })
            .collect();
        for n in &from {
            let rows: Vec<&Vec<f64>> = (0..modes).map(|a| &tables[a][n[a] as usize]).collect();
            for k in &to {
                let mut p = 1.0;
                for a in 0..modes {
                    p *= rows[a][k[a] as usize];
                }
                total += p;
            }
        }
    }
    let d_from = from.len() as u64;
    let d_to = to.len() as u64;
    let q = total / (modes as f64 * d_from as f64 * d_to as f64);
    Ok(ShellCoupling { e_from: grid.center(from_shell), e_to: grid.center(to_shell), q, d_from, d_to })
}

/// Ion-resolved vs decorrelated weight of an absorption (`r → k`, parameters
/// `eta_abs`) followed by an emission (`k → n`, parameters `eta_emit`).
///
/// Returns `(Σ_j P_j(r→k) P_j(k→n), (1/N) Σ_j P_j(r→k) Σ_l P_l(k→n))`.
pub fn ion_correlation_diagnostic(
    r: &FockState,
    k: &FockState,
    n: &FockState,
    eta_abs: &LambDickeSet,
    eta_emit: &LambDickeSet,
) -> Result<(f64, f64)> {
    let ions = eta_abs.n_ions();
    let absorb =
        (0..ions).map(|j| fc_multi(r, k, &eta_abs.row(j)).map(|a| a.norm_sqr())).collect::<Result<Vec<_>>>()?;
    let emit = (0..ions).map(|j| fc_multi(k, n, &eta_emit.row(j)).map(|a| a.norm_sqr())).collect::<Result<Vec<_>>>()?;
    let correlated = absorb.iter().zip(&emit).map(|(a, e)| a * e).sum();
    let decorrelated = absorb.iter().sum::<f64>() * emit.iter().sum::<f64>() / ions as f64;
    Ok((correlated, decorrelated))
}

/// First-order Lamb-Dicke transition weights from one Fock state.
#[derive(Debug, Clone, PartialEq)]
pub struct LdWeights {
    /// Probability of leaving every occupation unchanged.
    pub carrier: f64,
    /// `η_β² (n_β + 1)` per mode.
    pub blue: Vec<f64>,
    /// `η_β² n_β` per mode.
    pub red: Vec<f64>,
}

impl LdWeights {
    pub fn total(&self) -> f64 {
        self.carrier + self.blue.iter().sum::<f64>() + self.red.iter().sum::<f64>()
    }
}

/// Lamb-Dicke weights for the per-mode parameters `eta_row` of one ion.
pub fn ld_weights(n: &FockState, eta_row: &[f64]) -> Result<LdWeights> {
    if n.n_modes() != eta_row.len() {
        return Err(Error::DimensionMismatch { expected: eta_row.len(), got: n.n_modes() });
    }
    if let Some(big) = eta_row.iter().find(|e| e.abs() > LAMB_DICKE_WARN) {
        log::warn!("Lamb-Dicke parameter {big:.3} exceeds {LAMB_DICKE_WARN}; first-order weights are unreliable");
    }
    let blue: Vec<f64> = n.occupations.iter().zip(eta_row).map(|(&k, e)| e * e * (k as f64 + 1.0)).collect();
    let red: Vec<f64> = n.occupations.iter().zip(eta_row).map(|(&k, e)| e * e * k as f64).collect();
    let carrier = 1.0 - n.occupations.iter().zip(eta_row).map(|(&k, e)| e * e * (2.0 * k as f64 + 1.0)).sum::<f64>();
    Ok(LdWeights { carrier, blue, red })
}
