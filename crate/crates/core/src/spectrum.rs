//! Exact state counting on a coarse-grained energy axis and the smooth
//! density of states.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ion_chain::ModeSpectrum;

/// Default cap on the number of Fock states visited by one enumeration.
pub const DEFAULT_STATE_BUDGET: u64 = 200_000_000;

/// Shells below this count are reported by [`ShellCensus::sparse_shells`].
pub const SPARSE_SHELL_THRESHOLD: u64 = 10;

/// Equally spaced shells `[E − ΔE/2, E + ΔE/2)` around ascending centres.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    first_center: f64,
    delta_e: f64,
    len: usize,
}

impl EnergyGrid {
    pub fn new(first_center: f64, delta_e: f64, len: usize) -> Result<Self> {
        if !(delta_e > 0.0 && delta_e.is_finite()) {
            return Err(Error::invalid("delta_e", format!("shell width must be positive, got {delta_e}")));
        }
        if !first_center.is_finite() {
            return Err(Error::invalid("first_center", "must be finite"));
        }
        if len == 0 {
            return Err(Error::invalid("len", "grid needs at least one shell"));
        }
        Ok(Self { first_center, delta_e, len })
    }

    /// Shells centred at `E₀ + kΔE` for all centres `≤ e_max`, where `E₀` is
    /// the zero-point energy of `spectrum`.
    pub fn anchored(spectrum: &ModeSpectrum, delta_e: f64, e_max: f64) -> Result<Self> {
        let e0 = spectrum.ground_energy();
        if !(e_max >= e0) {
            return Err(Error::invalid("e_max", format!("must reach the ground-state energy {e0}, got {e_max}")));
        }
        if !(delta_e > 0.0) {
            return Err(Error::invalid("delta_e", format!("shell width must be positive, got {delta_e}")));
        }
        let len = ((e_max - e0) / delta_e + 1e-9).floor() as usize + 1;
        Self::new(e0, delta_e, len)
    }

    /// Shells tiling `[lower_edge, lower_edge + len·ΔE)`.
    pub fn from_lower_edge(lower_edge: f64, delta_e: f64, len: usize) -> Result<Self> {
        Self::new(lower_edge + 0.5 * delta_e, delta_e, len)
    }

    pub fn delta_e(&self) -> f64 {
        self.delta_e
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn center(&self, i: usize) -> f64 {
        self.first_center + i as f64 * self.delta_e
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.center(i)).collect()
    }

    pub fn lower_edge(&self) -> f64 {
        self.first_center - 0.5 * self.delta_e
    }

    pub fn upper_edge(&self) -> f64 {
        self.lower_edge() + self.len as f64 * self.delta_e
    }

    /// Index of the shell containing `e`, if any.
    pub fn shell_of(&self, e: f64) -> Option<usize> {
        let x = (e - self.lower_edge()) / self.delta_e;
        if x < 0.0 || !x.is_finite() {
            return None;
        }
        let i = x.floor() as usize;
        (i < self.len).then_some(i)
    }

    /// Checks that no centre lies below the zero-point energy.
    pub fn validate_for(&self, spectrum: &ModeSpectrum) -> Result<()> {
        let e0 = spectrum.ground_energy();
        if self.first_center < e0 - 1e-12 {
            return Err(Error::invalid(
                "first_center",
                format!("centre {} lies below the ground-state energy {e0}", self.first_center),
            ));
        }
        Ok(())
    }
}

/// Depth-first enumerator over Fock states of a mode spectrum.
///
/// Modes are visited in order of decreasing frequency; only the occupation
/// tuple of the current branch is held in memory.
#[derive(Debug, Clone)]
pub struct StateEnumerator<'a> {
    spectrum: &'a ModeSpectrum,
    budget: u64,
}

impl<'a> StateEnumerator<'a> {
    pub fn new(spectrum: &'a ModeSpectrum) -> Self {
        Self { spectrum, budget: DEFAULT_STATE_BUDGET }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    /// Calls `visit(occupations, energy)` for every state with energy in
    /// `[lower, upper)`. Occupations are indexed by mode.
    pub fn for_each<F: FnMut(&[u32], f64)>(&self, lower: f64, upper: f64, mut visit: F) -> Result<u64> {
        let freqs = self.spectrum.frequencies();
        let n = freqs.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| freqs[b].total_cmp(&freqs[a]));
        // zero-point energy of the modes not yet assigned, after depth d
        let mut zp_after = vec![0.0; n + 1];
        for d in (0..n).rev() {
            zp_after[d] = zp_after[d + 1] + 0.5 * freqs[order[d]];
        }
        let mut occupations = vec![0u32; n];
        let mut visited = 0u64;
        let mut walker = Walker {
            freqs,
            order: &order,
            zp_after: &zp_after,
            lower,
            upper,
            budget: self.budget,
            visited: &mut visited,
            occupations: &mut occupations,
        };
        walker.descend(0, 0.0, &mut visit)?;
        Ok(visited)
    }
}

struct Walker<'w> {
    freqs: &'w [f64],
    order: &'w [usize],
    zp_after: &'w [f64],
    lower: f64,
    upper: f64,
    budget: u64,
    visited: &'w mut u64,
    occupations: &'w mut Vec<u32>,
}

impl Walker<'_> {
    fn descend<F: FnMut(&[u32], f64)>(&mut self, depth: usize, partial: f64, visit: &mut F) -> Result<()> {
        let n = self.order.len();
        if depth == n {
            if partial >= self.lower && partial < self.upper {
                *self.visited += 1;
                if *self.visited > self.budget {
                    return Err(Error::BudgetExceeded { cap: self.budget });
                }
                visit(self.occupations, partial);
            }
            return Ok(());
        }
        let mode = self.order[depth];
        let nu = self.freqs[mode];
        let rest = self.zp_after[depth + 1];
        let mut k = 0u32;
        loop {
            let e = partial + (k as f64 + 0.5) * nu;
            if e + rest >= self.upper {
                break;
            }
            self.occupations[mode] = k;
            self.descend(depth + 1, e, visit)?;
            k += 1;
        }
        self.occupations[mode] = 0;
        Ok(())
    }
}

/// Exact number of states D(E) per shell.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellCensus {
    pub grid: EnergyGrid,
    pub counts: Vec<u64>,
}

impl ShellCensus {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// g(E)ΔE at each shell centre.
    pub fn smooth_counts(&self, spectrum: &ModeSpectrum) -> Vec<f64> {
        (0..self.grid.len()).map(|i| smooth_density(spectrum, self.grid.center(i)) * self.grid.delta_e()).collect()
    }

    /// Shells whose count falls below `threshold`.
    pub fn sparse_shells(&self, threshold: u64) -> Vec<usize> {
        self.counts.iter().enumerate().filter(|(_, &c)| c < threshold).map(|(i, _)| i).collect()
    }

    /// Mean of `|D(E) − g(E)ΔE| / D(E)` over non-empty shells with centre ≥ `from`.
    pub fn mean_relative_deviation(&self, spectrum: &ModeSpectrum, from: f64) -> f64 {
        let smooth = self.smooth_counts(spectrum);
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, (&d, s)) in self.counts.iter().zip(&smooth).enumerate() {
            if self.grid.center(i) >= from && d > 0 {
                sum += (d as f64 - s).abs() / d as f64;
                n += 1;
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }
}

/// Counts the states falling in every shell of `grid`.
pub fn count_states(spectrum: &ModeSpectrum, grid: &EnergyGrid) -> Result<ShellCensus> {
    count_states_with_budget(spectrum, grid, DEFAULT_STATE_BUDGET)
}

pub fn count_states_with_budget(spectrum: &ModeSpectrum, grid: &EnergyGrid, budget: u64) -> Result<ShellCensus> {
    if !grid.upper_edge().is_finite() {
        return Err(Error::invalid("grid", "maximum energy must be finite"));
    }
    let mut counts = vec![0u64; grid.len()];
    StateEnumerator::new(spectrum).with_budget(budget).for_each(grid.lower_edge(), grid.upper_edge(), |_, e| {
        if let Some(i) = grid.shell_of(e) {
            counts[i] += 1;
        }
    })?;
    Ok(ShellCensus { grid: grid.clone(), counts })
}

/// Smooth density of states `g(E) = E^(N−1) / ((N−1)! Π_a ν_a)`.
pub fn smooth_density(spectrum: &ModeSpectrum, e: f64) -> f64 {
    let n = spectrum.n_modes();
    if n == 1 {
        return (-spectrum.ln_frequency_product()).exp();
    }
    if e <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    ((nf - 1.0) * e.ln() - ln_gamma(nf) - spectrum.ln_frequency_product()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_ion_spectrum() -> ModeSpectrum {
        ModeSpectrum::from_frequencies(vec![1.0, 1.7321, 2.4083]).unwrap()
    }

    // Independent oracle: number of states with energy < x, recursing over the
    // modes in index order and closing the last mode arithmetically.
    fn states_below(freqs: &[f64], x: f64) -> u64 {
        match freqs {
            [] => 0,
            [nu] => {
                if x <= 0.5 * nu {
                    0
                } else {
                    // k + 1/2 < x/nu, k ≥ 0
                    let m = (x / nu - 0.5).ceil();
                    m.max(0.0) as u64
                }
            }
            [nu, rest @ ..] => {
                let zp_rest: f64 = rest.iter().map(|f| 0.5 * f).sum();
                let mut total = 0;
                let mut k = 0u32;
                loop {
                    let e = (k as f64 + 0.5) * nu;
                    if e + zp_rest >= x {
                        break;
                    }
                    total += states_below(rest, x - e);
                    k += 1;
                }
                total
            }
        }
    }

    #[test]
    fn single_oscillator_shell() {
        let sp = ModeSpectrum::from_frequencies(vec![1.0]).unwrap();
        let grid = EnergyGrid::new(10.5, 0.5, 1).unwrap();
        let census = count_states(&sp, &grid).unwrap();
        assert_eq!(census.counts, vec![1]);
    }

    #[test]
    fn anchored_grid_starts_at_ground_state() {
        let sp = three_ion_spectrum();
        let grid = EnergyGrid::anchored(&sp, 0.2, 30.0).unwrap();
        assert!((grid.center(0) - sp.ground_energy()).abs() < 1e-15);
        assert!(grid.center(grid.len() - 1) <= 30.0 + 1e-9);
        assert!(grid.center(grid.len() - 1) + 0.2 > 30.0);
        grid.validate_for(&sp).unwrap();
        let low = EnergyGrid::new(0.5, 0.2, 10).unwrap();
        assert!(low.validate_for(&sp).is_err());
    }

    #[test]
    fn census_total_matches_recursive_oracle() {
        let sp = three_ion_spectrum();
        let grid = EnergyGrid::anchored(&sp, 0.2, 30.0).unwrap();
        let census = count_states(&sp, &grid).unwrap();
        let want =
            states_below(sp.frequencies(), grid.upper_edge()) - states_below(sp.frequencies(), grid.lower_edge());
        assert_eq!(census.total(), want);
        assert!(census.total() > 1000);
    }

    #[test]
    fn census_converges_to_smooth_density() {
        let sp = three_ion_spectrum();
        let grid = EnergyGrid::anchored(&sp, 0.2, 30.0).unwrap();
        let census = count_states(&sp, &grid).unwrap();
        let low = census.mean_relative_deviation(&sp, 5.0);
        let high = census.mean_relative_deviation(&sp, 20.0);
        assert!(high < low, "deviation should shrink with energy: {low} -> {high}");
    }

    #[test]
    fn budget_is_enforced() {
        let sp = three_ion_spectrum();
        let grid = EnergyGrid::anchored(&sp, 0.2, 30.0).unwrap();
        let err = count_states_with_budget(&sp, &grid, 100).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { cap: 100 });
    }

    #[test]
    fn smooth_density_special_cases() {
        let one = ModeSpectrum::from_frequencies(vec![2.0]).unwrap();
        assert_eq!(smooth_density(&one, 0.0), 0.5);
        assert_eq!(smooth_density(&one, 17.0), 0.5);
        let sp = three_ion_spectrum();
        for e in [0.5, 3.0, 11.0] {
            let ratio = smooth_density(&sp, 2.0 * e) / smooth_density(&sp, e);
            assert!((ratio - 4.0).abs() < 1e-12);
        }
        let big = ModeSpectrum::from_frequencies(vec![1.0; 150]).unwrap();
        let g = smooth_density(&big, 400.0);
        assert!(g.is_finite() && g > 0.0);
    }

    #[test]
    fn sparse_shells_reported() {
        let sp = three_ion_spectrum();
        let grid = EnergyGrid::anchored(&sp, 0.2, 8.0).unwrap();
        let census = count_states(&sp, &grid).unwrap();
        assert!(!census.sparse_shells(SPARSE_SHELL_THRESHOLD).is_empty());
    }

    proptest! {
        #[test]
        fn shells_partition_the_energy_axis(
            f2 in 1.1f64..2.5, f3 in 2.6f64..4.0, de in 0.05f64..1.0, shift in 0.0f64..1.0, len in 1usize..60,
        ) {
            let sp = ModeSpectrum::from_frequencies(vec![1.0, f2, f3]).unwrap();
            let e0 = sp.ground_energy();
            let a = EnergyGrid::new(e0 + shift * de, de, len).unwrap();
            let census = count_states(&sp, &a).unwrap();
            let want = states_below(sp.frequencies(), a.upper_edge()) - states_below(sp.frequencies(), a.lower_edge());
            prop_assert_eq!(census.total(), want);
            // shifting by half a shell and adding one shell covers the same
            // states plus the half shell on top
            let b = EnergyGrid::new(a.center(0) + 0.5 * de, de, len).unwrap();
            let cb = count_states(&sp, &b).unwrap();
            let want_b = states_below(sp.frequencies(), b.upper_edge()) - states_below(sp.frequencies(), b.lower_edge());
            prop_assert_eq!(cb.total(), want_b);
        }
    }
}
