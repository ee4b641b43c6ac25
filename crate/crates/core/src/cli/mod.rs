//! Command-line front end.
//!
//! Every subcommand writes comma-separated tables; with `--out DIR` they go
//! to `DIR` together with a `manifest.toml` recording every resolved
//! parameter, the unit system and the seed. Without `--out` the primary
//! table is printed to stdout.

mod output;
mod verify;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::cooling_dynamics::{
    cooling_rate, fit_relaxation_rate, fp_coefficients, fp_steady, ld_coefficients, ld_evolve, ld_steady,
    steady_energy, CoolingParams, EmissionPattern, EnergyDistribution, ErgodicOperator, ErgodicOptions, LdModeState,
    ANGULAR_NODES,
};
use crate::ergodic_kernel::{kernel_f, kernel_sample, q_classical, KernelParams};
use crate::error::{Error, Result};
use crate::franck_condon::average_coupling_bruteforce;
use crate::ion_chain::{ChainConfig, IonChain};
use crate::spectrum::{count_states, smooth_density, EnergyGrid, SPARSE_SHELL_THRESHOLD};

pub use output::{num, Artifacts, Table};
pub use verify::{run_checks, Check};

const AFTER_HELP: &str = "\
Units: energies in hbar*nu1, rates and frequencies in nu1, times in 1/nu1 (nu1 = axial trap frequency).
Precedence: command-line flags override entries of the --config file, which override built-in defaults.
Errors are reported on stderr as a single line `ERROR <code>: <message>` with a nonzero exit status.";

#[derive(Debug, Parser)]
#[command(name = "coolchain", version, about = "Doppler cooling of linear ion crystals", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium positions, mode frequencies and eigenvectors.
    Modes(Common),
    /// Exact state census per shell against the smooth density of states.
    Dos(Common),
    /// Brute-force shell couplings Q(E, E') next to the closed form.
    Fc {
        #[command(flatten)]
        common: Common,
        /// Source shell energy [default: 20 times the highest mode frequency].
        #[arg(long)]
        e: Option<f64>,
    },
    /// Energy-transfer kernel curves g(E')Q(E, E') for several ion numbers.
    Kernel {
        #[command(flatten)]
        common: Common,
        /// Initial energy [default: 30].
        #[arg(long)]
        e: Option<f64>,
        /// Monte Carlo samples for the sampled histogram [default: 100000].
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Ergodic rate-equation integration compared with the Fokker-Planck limit.
    Cool {
        #[command(flatten)]
        common: Common,
        /// Initial mean energy of the thermal start [default: twice the steady energy].
        #[arg(long)]
        e0: Option<f64>,
        /// Explicit time step [default: the stability bound].
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Lamb-Dicke per-mode rate equations.
    Ld {
        #[command(flatten)]
        common: Common,
        /// Initial total energy of the thermal start [default: twice the steady energy].
        #[arg(long)]
        e0: Option<f64>,
    },
    /// Fast invariant suite; one PASS/FAIL line per property.
    Verify(Common),
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Common {
    /// Number of ions [default: 3].
    #[arg(long)]
    pub n: Option<usize>,
    /// Shell width [default: 0.2].
    #[arg(long)]
    pub de: Option<f64>,
    /// Largest shell energy [default: 30 for dos, chosen from the steady energy for cool].
    #[arg(long)]
    pub emax: Option<f64>,
    /// Natural linewidth [default: 50].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Laser detuning [default: -gamma/2].
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Rabi frequency [default: gamma/10].
    #[arg(long)]
    pub rabi: Option<f64>,
    /// Recoil frequency [default: 0.25].
    #[arg(long)]
    pub recoil: Option<f64>,
    /// Projection of the laser wave vector on the trap axis [default: 1].
    #[arg(long = "cos-theta0", allow_hyphen_values = true)]
    pub cos_theta0: Option<f64>,
    /// Emission pattern: isotropic, dipole_linear or dipole_circular [default: isotropic].
    #[arg(long)]
    pub pattern: Option<String>,
    /// Tabulated emission pattern as (cos, density) pairs; config file only.
    #[arg(skip)]
    pub pattern_table: Option<Vec<(f64, f64)>>,
    /// Number of driven ions [default: all].
    #[arg(long = "m-driven")]
    pub m_driven: Option<usize>,
    /// Integration time [default: ten cooling times].
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with any of the above keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory for tables and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn overlay(self, file: Common) -> Common {
        Common {
            n: self.n.or(file.n),
            de: self.de.or(file.de),
            emax: self.emax.or(file.emax),
            gamma: self.gamma.or(file.gamma),
            delta: self.delta.or(file.delta),
            rabi: self.rabi.or(file.rabi),
            recoil: self.recoil.or(file.recoil),
            cos_theta0: self.cos_theta0.or(file.cos_theta0),
            pattern: self.pattern.or(file.pattern),
            pattern_table: self.pattern_table.or(file.pattern_table),
            m_driven: self.m_driven.or(file.m_driven),
            t_final: self.t_final.or(file.t_final),
            seed: self.seed.or(file.seed),
            config: self.config,
            out: self.out.or(file.out),
        }
    }

    /// Applies the config file (if any) beneath the flags, then defaults.
    pub fn resolve(self) -> Result<RunConfig> {
        let merged = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
                let file: Common = toml::from_str(&text)
                    .map_err(|e| Error::invalid("config", format!("{}: {}", path.display(), e.message())))?;
                self.overlay(file)
            }
            None => self,
        };
        let n = merged.n.unwrap_or(3);
        let gamma = merged.gamma.unwrap_or(50.0);
        let pattern = match (merged.pattern, merged.pattern_table) {
            (Some(_), Some(_)) => return Err(Error::invalid("pattern", "give either pattern or pattern_table")),
            (Some(name), None) => EmissionPattern::parse(&name)?,
            (None, Some(table)) => EmissionPattern::Custom(table),
            (None, None) => EmissionPattern::Isotropic,
        };
        let cfg = RunConfig {
            n,
            de: merged.de.unwrap_or(0.2),
            emax: merged.emax,
            gamma,
            delta: merged.delta.unwrap_or(-0.5 * gamma),
            rabi: merged.rabi.unwrap_or(0.1 * gamma),
            recoil: merged.recoil.unwrap_or(0.25),
            cos_theta0: merged.cos_theta0.unwrap_or(1.0),
            pattern,
            m_driven: merged.m_driven.unwrap_or(n),
            t_final: merged.t_final,
            seed: merged.seed.unwrap_or(0),
            config: merged.config,
            out: merged.out,
        };
        cfg.chain_config()?;
        if !(cfg.de > 0.0) {
            return Err(Error::invalid("de", format!("must be positive, got {}", cfg.de)));
        }
        Ok(cfg)
    }
}

/// Fully resolved parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub de: f64,
    pub emax: Option<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub rabi: f64,
    pub recoil: f64,
    pub cos_theta0: f64,
    pub pattern: EmissionPattern,
    pub m_driven: usize,
    pub t_final: Option<f64>,
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn chain_config(&self) -> Result<ChainConfig> {
        ChainConfig::new(self.n, self.recoil)
    }

    pub fn cooling_params(&self) -> CoolingParams {
        CoolingParams {
            gamma: self.gamma,
            detuning: self.delta,
            rabi: self.rabi,
            recoil: self.recoil,
            cos_theta0: self.cos_theta0,
            pattern: self.pattern.clone(),
            m_driven: self.m_driven,
            n_ions: self.n,
        }
    }

    fn parameters(&self) -> toml::Table {
        let mut t = toml::Table::new();
        t.insert("n".into(), (self.n as i64).into());
        t.insert("de".into(), self.de.into());
        if let Some(e) = self.emax {
            t.insert("emax".into(), e.into());
        }
        t.insert("gamma".into(), self.gamma.into());
        t.insert("delta".into(), self.delta.into());
        t.insert("rabi".into(), self.rabi.into());
        t.insert("recoil".into(), self.recoil.into());
        t.insert("cos_theta0".into(), self.cos_theta0.into());
        t.insert("pattern".into(), self.pattern.name().into());
        if let EmissionPattern::Custom(table) = &self.pattern {
            let rows = table.iter().map(|&(c, v)| toml::Value::Array(vec![c.into(), v.into()])).collect();
            t.insert("pattern_table".into(), toml::Value::Array(rows));
        }
        t.insert("m_driven".into(), (self.m_driven as i64).into());
        if let Some(tf) = self.t_final {
            t.insert("t_final".into(), tf.into());
        }
        t.insert("seed".into(), (self.seed as i64).into());
        if let Some(c) = &self.config {
            t.insert("config".into(), c.display().to_string().into());
        }
        t
    }
}

fn units() -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("energy".into(), "hbar*nu1".into());
    t.insert("frequency".into(), "nu1".into());
    t.insert("rate".into(), "nu1".into());
    t.insert("time".into(), "1/nu1".into());
    t.insert("length".into(), "(e^2/(4 pi eps0 m nu1^2))^(1/3)".into());
    t
}

/// Parses `argv` and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("ERROR usage: {first}");
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), e);
            1
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    let (name, common) = match &command {
        Command::Modes(c) => ("modes", c.clone()),
        Command::Dos(c) => ("dos", c.clone()),
        Command::Fc { common, .. } => ("fc", common.clone()),
        Command::Kernel { common, .. } => ("kernel", common.clone()),
        Command::Cool { common, .. } => ("cool", common.clone()),
        Command::Ld { common, .. } => ("ld", common.clone()),
        Command::Verify(c) => ("verify", c.clone()),
    };
    let cfg = common.resolve()?;
    let mut extra = toml::Table::new();
    let artifacts = match command {
        Command::Modes(_) => modes(&cfg)?,
        Command::Dos(_) => dos(&cfg)?,
        Command::Fc { e, .. } => fc(&cfg, e, &mut extra)?,
        Command::Kernel { e, samples, .. } => kernel(&cfg, e, samples, &mut extra)?,
        Command::Cool { e0, dt, .. } => cool(&cfg, e0, dt, &mut extra)?,
        Command::Ld { e0, .. } => ld(&cfg, e0, &mut extra)?,
        Command::Verify(_) => {
            let checks = run_checks(&cfg);
            let mut table = Table::new("verify", &["check", "status", "detail"]);
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
                table.push(vec![
                    c.name.clone(),
                    if c.passed { "pass" } else { "fail" }.into(),
                    c.detail.replace(',', ";"),
                ]);
            }
            let mut a = Artifacts::new();
            a.result("checks", checks.len() as i64);
            a.result("failed", failed as i64);
            a.tables.push(table);
            if let Some(dir) = &cfg.out {
                write_manifest(dir, name, &cfg, extra, &a)?;
            }
            return Ok(if failed == 0 { 0 } else { 1 });
        }
    };
    match &cfg.out {
        Some(dir) => write_manifest(dir, name, &cfg, extra, &artifacts)?,
        None => {
            if let Some(t) = artifacts.tables.first() {
                print!("{}", t.render());
            }
        }
    }
    Ok(0)
}

fn write_manifest(dir: &Path, name: &str, cfg: &RunConfig, extra: toml::Table, a: &Artifacts) -> Result<()> {
    let mut run = toml::Table::new();
    run.insert("subcommand".into(), name.into());
    run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    let mut params = cfg.parameters();
    params.extend(extra);
    let mut manifest = toml::Table::new();
    manifest.insert("run".into(), run.into());
    manifest.insert("parameters".into(), params.into());
    manifest.insert("units".into(), units().into());
    output::write_run(dir, a, manifest)?;
    Ok(())
}

fn modes(cfg: &RunConfig) -> Result<Artifacts> {
    let chain = IonChain::solve(cfg.chain_config()?)?;
    let n = cfg.n;
    let mut header = vec!["mode".to_string(), "frequency".to_string()];
    header.extend((0..n).map(|j| format!("b_ion{j}")));
    let mut table = Table::with_header("modes", header);
    let b = chain.spectrum.eigenvectors();
    for (a, &nu) in chain.spectrum.frequencies().iter().enumerate() {
        let mut row = vec![a.to_string(), num(nu)];
        row.extend((0..n).map(|j| num(b[(j, a)])));
        table.push(row);
    }
    let mut positions = Table::new("positions", &["ion", "position"]);
    for (j, &u) in chain.positions.as_slice().iter().enumerate() {
        positions.push(vec![j.to_string(), num(u)]);
    }
    let eta = chain.lamb_dicke(cfg.cos_theta0)?;
    let mut header = vec!["ion".to_string()];
    header.extend((0..n).map(|a| format!("eta_mode{a}")));
    let mut ld = Table::with_header("lamb_dicke", header);
    for j in 0..n {
        let mut row = vec![j.to_string()];
        row.extend((0..n).map(|a| num(eta.get(j, a))));
        ld.push(row);
    }
    let mut a = Artifacts::new();
    a.result("equilibrium_residual", chain.positions.residual());
    a.result("ground_energy", chain.spectrum.ground_energy());
    a.tables = vec![table, positions, ld];
    Ok(a)
}

fn dos(cfg: &RunConfig) -> Result<Artifacts> {
    let chain = IonChain::solve(cfg.chain_config()?)?;
    let spectrum = &chain.spectrum;
    let emax = cfg.emax.unwrap_or(30.0);
    let grid = EnergyGrid::anchored(spectrum, cfg.de, emax)?;
    let census = count_states(spectrum, &grid)?;
    let smooth = census.smooth_counts(spectrum);
    let mut staircase = Table::new("dos_staircase", &["energy", "lower", "upper", "count", "smooth_count"]);
    for (i, (count, s)) in census.counts.iter().zip(&smooth).enumerate() {
        let c = grid.center(i);
        staircase.push(vec![num(c), num(c - 0.5 * cfg.de), num(c + 0.5 * cfg.de), count.to_string(), num(*s)]);
    }
    let mut curve = Table::new("dos_smooth", &["energy", "smooth_count"]);
    let points = 10 * grid.len();
    for k in 0..=points {
        let e = grid.lower_edge() + (grid.upper_edge() - grid.lower_edge()) * k as f64 / points as f64;
        curve.push_nums(&[e, smooth_density(spectrum, e) * cfg.de]);
    }
    let sparse = census.sparse_shells(SPARSE_SHELL_THRESHOLD);
    if !sparse.is_empty() {
        log::warn!("{} shells hold fewer than {SPARSE_SHELL_THRESHOLD} states", sparse.len());
    }
    let top = grid.lower_edge() + 2.0 / 3.0 * (grid.upper_edge() - grid.lower_edge());
    let mut a = Artifacts::new();
    a.result("states", census.total() as i64);
    a.result("sparse_shells", sparse.len() as i64);
    a.result("mean_relative_deviation_top_third", census.mean_relative_deviation(spectrum, top));
    a.tables = vec![staircase, curve];
    Ok(a)
}

fn fc(cfg: &RunConfig, e: Option<f64>, extra: &mut toml::Table) -> Result<Artifacts> {
    let chain = IonChain::solve(cfg.chain_config()?)?;
    let spectrum = &chain.spectrum;
    let nu_top = spectrum.highest_frequency();
    let e_src = e.unwrap_or(20.0 * nu_top);
    extra.insert("e".into(), e_src.into());
    let recoil = cfg.recoil * cfg.cos_theta0 * cfg.cos_theta0;
    let reach = e_src + recoil + (4.0 * recoil * e_src).sqrt() + 2.0 * cfg.de;
    let emax = cfg.emax.unwrap_or(reach).max(e_src);
    let grid = EnergyGrid::anchored(spectrum, cfg.de, emax)?;
    let eta = chain.lamb_dicke(cfg.cos_theta0)?;
    let src = grid.shell_of(e_src).ok_or_else(|| Error::invalid("e", format!("{e_src} lies outside the grid")))?;
    let mut table = Table::new("fc", &["e_from", "e_to", "d_from", "d_to", "q_bruteforce", "q_classical"]);
    for k in 0..grid.len() {
        let coupling = match average_coupling_bruteforce(spectrum, &eta, &grid, grid.center(src), grid.center(k)) {
            Ok(c) => c,
            Err(Error::EmptyShell { .. }) => continue,
            Err(err) => return Err(err),
        };
        let q_cl = if recoil > 0.0 { q_classical(coupling.e_from, coupling.e_to, spectrum, recoil)? } else { 0.0 };
        table.push(vec![
            num(coupling.e_from),
            num(coupling.e_to),
            coupling.d_from.to_string(),
            coupling.d_to.to_string(),
            num(coupling.q),
            num(q_cl),
        ]);
    }
    let mut a = Artifacts::new();
    a.result("source_shell", grid.center(src));
    a.tables = vec![table];
    Ok(a)
}

fn kernel(cfg: &RunConfig, e: Option<f64>, samples: Option<usize>, extra: &mut toml::Table) -> Result<Artifacts> {
    let e0 = e.unwrap_or(30.0);
    let samples = samples.unwrap_or(100_000);
    extra.insert("e".into(), e0.into());
    extra.insert("samples".into(), (samples as i64).into());
    let recoil = cfg.recoil * cfg.cos_theta0 * cfg.cos_theta0;
    let ions = [1usize, 10, 100];
    let spectra = ions
        .iter()
        .map(|&n| IonChain::solve(ChainConfig::new(n, cfg.recoil)?).map(|c| c.spectrum))
        .collect::<Result<Vec<_>>>()?;
    let probe = KernelParams::new(e0, recoil, 1)?;
    let (lo, hi) = probe.support();
    let points = 400;
    let mut header = vec!["e_prime".to_string()];
    header.extend(ions.iter().map(|n| format!("density_n{n}")));
    let mut curves = Table::with_header("kernel", header);
    for k in 0..=points {
        // open interval keeps the single-ion endpoint singularity out
        let x = lo + (hi - lo) * (k as f64 + 0.5) / (points as f64 + 1.0);
        let mut row = vec![x];
        for spectrum in &spectra {
            let v =
                if recoil > 0.0 { smooth_density(spectrum, x) * q_classical(e0, x, spectrum, recoil)? } else { 0.0 };
            row.push(v);
        }
        curves.push_nums(&row);
    }

    let params = KernelParams::new(e0, recoil, cfg.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bins = 50;
    let mut counts = vec![0u64; bins];
    let (slo, shi) = params.support();
    let width = (shi - slo) / bins as f64;
    for _ in 0..samples {
        let x = kernel_sample(&params, &mut rng);
        if width > 0.0 {
            let b = (((x - slo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let mut hist = Table::new("kernel_samples", &["e_prime", "sampled_density", "exact_density"]);
    if width > 0.0 && samples > 0 {
        for (b, &c) in counts.iter().enumerate() {
            let x = slo + (b as f64 + 0.5) * width;
            hist.push_nums(&[x, c as f64 / (samples as f64 * width), kernel_f(&params, x).value_or_zero()]);
        }
    }
    let mut a = Artifacts::new();
    a.result("support_lower", lo);
    a.result("support_upper", hi);
    a.tables = vec![curves, hist];
    Ok(a)
}

fn cool(cfg: &RunConfig, e0: Option<f64>, dt: Option<f64>, extra: &mut toml::Table) -> Result<Artifacts> {
    let chain = IonChain::solve(cfg.chain_config()?)?;
    let params = cfg.cooling_params();
    let e_ss = steady_energy(&params)?;
    let e_start = e0.unwrap_or(2.0 * e_ss);
    let rate = cooling_rate(&params)?;
    let t_final = cfg.t_final.unwrap_or(10.0 / rate);
    let emax = cfg.emax.unwrap_or(6.0 * e_ss.max(e_start) + chain.spectrum.ground_energy());
    extra.insert("e0".into(), e_start.into());
    extra.insert("t_final_used".into(), t_final.into());
    extra.insert("emax_used".into(), emax.into());
    extra.insert("angular_nodes".into(), (ANGULAR_NODES as i64).into());
    if let Some(dt) = dt {
        extra.insert("dt".into(), dt.into());
    }
    let grid = EnergyGrid::anchored(&chain.spectrum, cfg.de, emax)?;
    let op = ErgodicOperator::build(&params, &chain.spectrum, &grid, ANGULAR_NODES)?;
    let p0 = EnergyDistribution::thermal(&grid, cfg.n, e_start / cfg.n as f64)?;
    let record = t_final / 400.0;
    let opts = ErgodicOptions { dt, record_interval: Some(record), angular_nodes: ANGULAR_NODES };
    let run = op.evolve(&p0, t_final, &opts)?;
    let fp = fp_coefficients(&params)?;
    let fp_dist = fp_steady(&params, &grid)?;

    let mut traj = Table::new("trajectory", &["t", "mean_energy", "fp_mean_energy"]);
    let u0 = e_start / cfg.n as f64;
    for &(t, e) in &run.trajectory {
        traj.push_nums(&[t, e, cfg.n as f64 * fp.u_at(u0, t)?]);
    }
    let mut dist = Table::new("distribution", &["energy", "p_initial", "p_final", "p_fp_steady"]);
    for i in 0..grid.len() {
        dist.push_nums(&[grid.center(i), p0.densities()[i], run.final_state.densities()[i], fp_dist.densities()[i]]);
    }
    let mut a = Artifacts::new();
    a.result("steps", run.steps as i64);
    a.result("dt", run.dt);
    a.result("final_mean_energy", run.final_state.mean_energy());
    a.result("fp_steady_energy", e_ss);
    a.result("l1_final_vs_fp_steady", run.final_state.l1_distance(&fp_dist)?);
    a.result("cooling_rate", rate);
    let e_inf = run.final_state.mean_energy();
    if let Ok(fit) = fit_relaxation_rate(&run.trajectory, e_inf, 0.8, 0.02) {
        a.result("fitted_rate", fit);
    }
    a.result("scattering_events", run.scattered);
    a.result("leak_bound", run.leaked);
    a.result("max_norm_drift", run.max_norm_drift);
    a.tables = vec![traj, dist];
    Ok(a)
}

fn ld(cfg: &RunConfig, e0: Option<f64>, extra: &mut toml::Table) -> Result<Artifacts> {
    let chain = IonChain::solve(cfg.chain_config()?)?;
    let spectrum = &chain.spectrum;
    let params = cfg.cooling_params();
    let coeffs = ld_coefficients(spectrum, &params)?;
    let steady = ld_steady(spectrum, &params)?;
    let e_ss: f64 = steady.iter().zip(spectrum.frequencies()).map(|(n, nu)| nu * (n + 0.5)).sum();
    let e_start = e0.unwrap_or(2.0 * e_ss);
    let n = cfg.n as f64;
    let means: Vec<f64> = spectrum.frequencies().iter().map(|nu| (e_start / (n * nu) - 0.5).max(0.0)).collect();
    let gap = coeffs.iter().map(|c| c.cooling - c.heating).fold(f64::INFINITY, f64::min);
    let t_final = cfg.t_final.unwrap_or(10.0 / gap);
    extra.insert("e0".into(), e_start.into());
    extra.insert("t_final_used".into(), t_final.into());
    let start = LdModeState::thermal(&means)?;
    let end = ld_evolve(spectrum, &params, &start, t_final)?;
    let mut table = Table::new("ld", &["mode", "frequency", "heating", "cooling", "n_initial", "n_final", "n_steady"]);
    let finals = end.mean_occupations();
    for (b, &nu) in spectrum.frequencies().iter().enumerate() {
        table.push(vec![
            b.to_string(),
            num(nu),
            num(coeffs[b].heating),
            num(coeffs[b].cooling),
            num(means[b]),
            num(finals[b]),
            num(steady[b]),
        ]);
    }
    let mut a = Artifacts::new();
    a.result("final_energy", end.total_energy(spectrum));
    a.result("steady_energy", e_ss);
    if let Ok(fp) = steady_energy(&params) {
        a.result("fp_steady_energy", fp);
    }
    a.tables = vec![table];
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "n = 4\ngamma = 30.0\nrabi = 2.0\n").unwrap();
        let common = Common { gamma: Some(40.0), config: Some(path), ..Default::default() };
        let cfg = common.resolve().unwrap();
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.gamma, 40.0);
        assert_eq!(cfg.delta, -20.0);
        assert_eq!(cfg.rabi, 2.0);
        assert_eq!(cfg.m_driven, 4);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "ions = 4\n").unwrap();
        let common = Common { config: Some(path), ..Default::default() };
        assert!(common.resolve().is_err());
    }

    #[test]
    fn custom_pattern_from_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        let rows: Vec<String> = (0..=200).map(|k| format!("[{:?}, 0.5]", -1.0 + k as f64 / 100.0)).collect();
        std::fs::write(&path, format!("pattern_table = [{}]\n", rows.join(", "))).unwrap();
        let cfg = Common { config: Some(path), ..Default::default() }.resolve().unwrap();
        assert!((cfg.cooling_params().alpha().unwrap() - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn invalid_ion_number() {
        let common = Common { n: Some(0), ..Default::default() };
        assert!(common.resolve().is_err());
    }
}
