//! Fast invariant checks for one resolved configuration.

use crate::cooling_dynamics::{
    cooling_rate, ld_steady, steady_energy, EnergyDistribution, ErgodicOperator, ErgodicOptions, ANGULAR_NODES,
};
use crate::ergodic_kernel::{kernel_mass, kernel_moments, kernel_variance, KernelParams};
use crate::franck_condon::{moments_bruteforce, FockState};
use crate::ion_chain::{ChainConfig, IonChain};
use crate::quadrature::GaussLegendre;
use crate::spectrum::EnergyGrid;

use super::RunConfig;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(out: &mut Vec<Check>, name: &str, passed: bool, detail: String) {
    out.push(Check { name: name.to_string(), passed, detail });
}

fn failed(out: &mut Vec<Check>, name: &str, err: impl std::fmt::Display) {
    check(out, name, false, format!("error: {err}"));
}

/// Runs every check; errors inside a check count as a failure of that check.
pub fn run_checks(cfg: &RunConfig) -> Vec<Check> {
    let mut out = Vec::new();
    let chain = match ChainConfig::new(cfg.n, cfg.recoil).and_then(IonChain::solve) {
        Ok(c) => c,
        Err(e) => {
            failed(&mut out, "chain", e);
            return out;
        }
    };
    let sp = &chain.spectrum;

    let res = chain.positions.residual();
    check(&mut out, "equilibrium_residual", res < 1e-10, format!("max force {res:.3e}"));

    let nu = sp.frequencies();
    let com = (nu[0] - 1.0).abs();
    let breathing = if cfg.n > 1 { (nu[1] - 3f64.sqrt()).abs() } else { 0.0 };
    check(
        &mut out,
        "center_of_mass_and_breathing",
        com < 1e-9 && breathing < 1e-9,
        format!("|nu1-1| {com:.2e}, |nu2-sqrt3| {breathing:.2e}"),
    );

    let b = sp.eigenvectors();
    let ortho = (b.transpose() * b - nalgebra::DMatrix::<f64>::identity(cfg.n, cfg.n)).abs().max();
    check(&mut out, "eigenvector_orthonormality", ortho < 1e-10, format!("max deviation {ortho:.2e}"));

    match chain.lamb_dicke(cfg.cos_theta0) {
        Ok(eta) => {
            let target = cfg.recoil * cfg.cos_theta0 * cfg.cos_theta0;
            let worst = (0..cfg.n)
                .map(|j| {
                    let s: f64 = (0..cfg.n).map(|a| eta.get(j, a).powi(2) * nu[a]).sum();
                    (s - target).abs()
                })
                .fold(0.0, f64::max);
            check(
                &mut out,
                "lamb_dicke_sum_rule",
                worst < 1e-10 * target.max(1.0),
                format!("max deviation {worst:.2e}"),
            );

            if cfg.n <= 4 {
                let occ: Vec<u32> = (0..cfg.n).map(|a| (3 - a.min(3)) as u32).collect();
                let state = FockState::new(occ);
                match moments_bruteforce(&state, sp, &eta) {
                    Ok(m) => {
                        let d1 = (m.m1_mean - target).abs();
                        let e = state.energy(sp);
                        let d2 = (m.m2_mean - (target * target + 2.0 * target * e / cfg.n as f64)).abs();
                        let ok = d1 < 1e-8 * target.max(1.0) && d2 < 1e-8 * (target * e).max(1.0);
                        check(&mut out, "franck_condon_moments", ok, format!("first {d1:.2e}, second {d2:.2e}"));
                    }
                    Err(e) => failed(&mut out, "franck_condon_moments", e),
                }
            }
        }
        Err(e) => failed(&mut out, "lamb_dicke_sum_rule", e),
    }

    let recoil = cfg.recoil * cfg.cos_theta0 * cfg.cos_theta0;
    if recoil > 0.0 {
        match KernelParams::new(20.0, recoil, cfg.n) {
            Ok(kp) => {
                let m = kernel_moments(&kp, &GaussLegendre::new(200));
                let dn = (m.norm - 1.0).abs();
                let ds = (m.mean_shift - recoil).abs();
                let dv = (m.variance - kernel_variance(&kp)).abs();
                let (lo, hi) = kp.support();
                let dm = (kernel_mass(&kp, lo, hi) - 1.0).abs();
                check(
                    &mut out,
                    "kernel_moments",
                    dn < 1e-10 && ds < 1e-9 && dv < 1e-8 * kernel_variance(&kp) && dm < 1e-12,
                    format!("norm {dn:.2e}, shift {ds:.2e}, variance {dv:.2e}, mass {dm:.2e}"),
                );
            }
            Err(e) => failed(&mut out, "kernel_moments", e),
        }
    }

    let params = cfg.cooling_params();
    match (steady_energy(&params), cooling_rate(&params)) {
        (Ok(e_ss), Ok(rate)) => {
            let emax = 6.0 * e_ss + sp.ground_energy();
            let de = cfg.de.min(e_ss / 10.0);
            let result = EnergyGrid::anchored(sp, de, emax).and_then(|grid| {
                let op = ErgodicOperator::build(&params, sp, &grid, ANGULAR_NODES)?;
                let p0 = EnergyDistribution::thermal(&grid, cfg.n, 2.0 * e_ss / cfg.n as f64)?;
                let opts = ErgodicOptions { dt: None, record_interval: None, angular_nodes: ANGULAR_NODES };
                op.evolve(&p0, 0.5 / rate, &opts)
            });
            match result {
                Ok(run) => {
                    let drift = run.max_norm_drift;
                    let min = run.final_state.densities().iter().cloned().fold(f64::INFINITY, f64::min);
                    check(
                        &mut out,
                        "ergodic_conservation",
                        drift < 1e-10 && min >= 0.0,
                        format!("norm drift {drift:.2e}, min density {min:.2e}"),
                    );
                    let falling = run.trajectory.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
                    check(&mut out, "ergodic_monotone_cooling", falling, format!("{} samples", run.trajectory.len()));
                }
                Err(e) => failed(&mut out, "ergodic_conservation", e),
            }
        }
        (Err(e), _) | (_, Err(e)) => failed(&mut out, "fokker_planck", e),
    }

    match ld_steady(sp, &params) {
        Ok(n) => {
            let ok = n.iter().all(|v| v.is_finite() && *v >= 0.0);
            check(&mut out, "lamb_dicke_steady_state", ok, format!("mean occupations {n:.3?}"));
        }
        Err(e) => failed(&mut out, "lamb_dicke_steady_state", e),
    }
    out
}
