//! Line-oriented configuration: `[section]` headers with `key = value`
//! pairs, `#` comments. Unknown keys are rejected. Serialisation round-trips
//! through the parser.

use crate::physics::ReferenceConstants;
use crate::stokes::{DivergenceChoice, SchurKind, SolverConfig, UzawaKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("unknown key '{0}' in section [{1}]")]
    UnknownKey(String, String),
    #[error("invalid value for '{0}': {1}")]
    InvalidValue(String, String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    ConvergenceTest,
    SolverBench,
    Simulate,
}

impl RunMode {
    pub fn label(&self) -> &'static str {
        match self {
            RunMode::ConvergenceTest => "convergence-test",
            RunMode::SolverBench => "solver-bench",
            RunMode::Simulate => "simulate",
        }
    }
}

/// Full run configuration; defaults reproduce the documented solver
/// parameter table and the Earth-like reference constants.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: RunMode,
    // [mesh]
    pub n_tangential: usize,
    pub n_radial: usize,
    /// Nondimensional radii; None means "derive from physics".
    pub r_cmb: Option<f64>,
    pub r_surface: Option<f64>,
    // [levels]
    pub max_level: usize,
    pub min_level: usize,
    pub viscosity_level: usize,
    // [solver]
    pub sigma: f64,
    pub omega: f64,
    pub tol_a: f64,
    pub m_a: usize,
    pub deg_a: usize,
    pub tol_vbfbt: f64,
    pub tol_inv_mass: f64,
    pub tol_wbfbt: f64,
    pub m_v: usize,
    pub deg_v: usize,
    pub tol_coarse: f64,
    pub tol_saddle: f64,
    pub tol_temperature: f64,
    pub tol_vector_mass: f64,
    pub a_l: f64,
    pub a_r: f64,
    pub uzawa: UzawaKind,
    pub schur: SchurKind,
    pub divergence_with_density: bool,
    pub fgmres_restart: usize,
    pub max_outer: usize,
    // [physics]
    pub reference: ReferenceConstants,
    pub activation_energy: f64,
    pub activation_volume: f64,
    /// (radius, eta) pairs; empty means the built-in illustrative profile.
    pub eta_base_table: Vec<(f64, f64)>,
    pub noise_amplitude: f64,
    pub shear_cutoff_surface: bool,
    pub exp_surrogate: bool,
    pub include_lhs_advection: bool,
    /// Diagnostic override of the Rayleigh number.
    pub ra_override: Option<f64>,
    // [time]
    pub c_cfl: f64,
    pub tau_max: f64,
    pub t_end: f64,
    pub max_steps: usize,
    // [convergence]
    pub conv_levels: Vec<usize>,
    pub conv_steps: Vec<usize>,
    pub conv_diffusivities: Vec<f64>,
    // [bench]
    pub bench_level: usize,
    pub bench_target_abs: f64,
    pub bench_omega_wbfbt: f64,
    pub wall_budget_seconds: f64,
    // [run]
    pub seed: u64,
    pub threads: usize,
    // [output]
    pub output_dir: String,
    pub vtk_every: usize,
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        RunConfig {
            mode: RunMode::Simulate,
            n_tangential: 8,
            n_radial: 2,
            r_cmb: None,
            r_surface: None,
            max_level: s.max_level,
            min_level: s.min_level,
            viscosity_level: s.viscosity_level,
            sigma: s.sigma,
            omega: s.omega,
            tol_a: s.tol_a,
            m_a: s.m_a,
            deg_a: s.deg_a,
            tol_vbfbt: s.tol_vbfbt,
            tol_inv_mass: s.tol_inv_mass,
            tol_wbfbt: s.tol_wbfbt,
            m_v: s.m_v,
            deg_v: s.deg_v,
            tol_coarse: s.tol_coarse,
            tol_saddle: s.tol_saddle,
            tol_temperature: s.tol_temperature,
            tol_vector_mass: s.tol_vector_mass,
            a_l: s.a_l,
            a_r: s.a_r,
            uzawa: s.uzawa,
            schur: s.schur,
            divergence_with_density: true,
            fgmres_restart: s.fgmres_restart,
            max_outer: s.max_outer,
            reference: ReferenceConstants::default(),
            activation_energy: 4.610,
            activation_volume: 2.996,
            eta_base_table: Vec::new(),
            noise_amplitude: 0.03,
            shear_cutoff_surface: true,
            exp_surrogate: true,
            include_lhs_advection: false,
            ra_override: None,
            c_cfl: 1.0,
            tau_max: 1e-2,
            t_end: 0.1,
            max_steps: 1_000_000,
            conv_levels: vec![3, 4, 5],
            conv_steps: vec![8, 16, 32, 64],
            conv_diffusivities: vec![1e-1],
            bench_level: 4,
            bench_target_abs: 1e-8,
            bench_omega_wbfbt: 0.0125,
            wall_budget_seconds: 1800.0,
            seed: 42,
            threads: 0,
            output_dir: "out".into(),
            vtk_every: 10,
            checkpoint_every: 50,
        }
    }
}

impl RunConfig {
    /// Solver configuration slice of the run configuration.
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_level: self.max_level,
            min_level: self.min_level,
            viscosity_level: self.viscosity_level,
            sigma: self.sigma,
            omega: self.omega,
            tol_a: self.tol_a,
            m_a: self.m_a,
            deg_a: self.deg_a,
            tol_vbfbt: self.tol_vbfbt,
            tol_inv_mass: self.tol_inv_mass,
            tol_wbfbt: self.tol_wbfbt,
            m_v: self.m_v,
            deg_v: self.deg_v,
            tol_coarse: self.tol_coarse,
            tol_saddle: self.tol_saddle,
            tol_saddle_rel: None,
            tol_temperature: self.tol_temperature,
            tol_vector_mass: self.tol_vector_mass,
            a_l: self.a_l,
            a_r: self.a_r,
            uzawa: self.uzawa,
            schur: self.schur,
            divergence: if self.divergence_with_density {
                DivergenceChoice::WithDensity
            } else {
                DivergenceChoice::Plain
            },
            fgmres_restart: self.fgmres_restart,
            max_outer: self.max_outer,
            max_inner: 2000,
            power_iterations: 30,
        }
    }

    pub fn nondimensional_radii(&self) -> (f64, f64) {
        match (self.r_cmb, self.r_surface) {
            (Some(c), Some(s)) => (c, s),
            _ => (
                self.reference.r_cmb_m / self.reference.d,
                self.reference.r_surface_m / self.reference.d,
            ),
        }
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Parse(ln + 1, format!("expected key = value, got '{line}'")))?;
            let key = key.trim();
            let value = value.trim();
            cfg.set(&section, key, value)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &str) -> Result<RunConfig, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |k: &str, v: &str| ConfigError::InvalidValue(k.into(), v.into());
        let f = |k: &str, v: &str| v.parse::<f64>().map_err(|_| bad(k, v));
        let u = |k: &str, v: &str| v.parse::<usize>().map_err(|_| bad(k, v));
        let b = |k: &str, v: &str| match v {
            "true" | "on" | "yes" => Ok(true),
            "false" | "off" | "no" => Ok(false),
            _ => Err(bad(k, v)),
        };
        match (section, key) {
            ("mesh", "n_tangential") => self.n_tangential = u(key, value)?,
            ("mesh", "n_radial") => self.n_radial = u(key, value)?,
            ("mesh", "r_cmb") => self.r_cmb = Some(f(key, value)?),
            ("mesh", "r_surface") => self.r_surface = Some(f(key, value)?),
            ("levels", "max_level") => self.max_level = u(key, value)?,
            ("levels", "min_level") => self.min_level = u(key, value)?,
            ("levels", "viscosity_level") => self.viscosity_level = u(key, value)?,
            ("solver", "sigma") => self.sigma = f(key, value)?,
            ("solver", "omega") => self.omega = f(key, value)?,
            ("solver", "tol_a") => self.tol_a = f(key, value)?,
            ("solver", "m_a") => self.m_a = u(key, value)?,
            ("solver", "deg_a") => self.deg_a = u(key, value)?,
            ("solver", "tol_vbfbt") => self.tol_vbfbt = f(key, value)?,
            ("solver", "tol_inv_mass") => self.tol_inv_mass = f(key, value)?,
            ("solver", "tol_wbfbt") => self.tol_wbfbt = f(key, value)?,
            ("solver", "m_v") => self.m_v = u(key, value)?,
            ("solver", "deg_v") => self.deg_v = u(key, value)?,
            ("solver", "tol_coarse") => self.tol_coarse = f(key, value)?,
            ("solver", "tol_saddle") => self.tol_saddle = f(key, value)?,
            ("solver", "tol_temperature") => self.tol_temperature = f(key, value)?,
            ("solver", "tol_vector_mass") => self.tol_vector_mass = f(key, value)?,
            ("solver", "a_l") => self.a_l = f(key, value)?,
            ("solver", "a_r") => self.a_r = f(key, value)?,
            ("solver", "uzawa") => {
                self.uzawa = match value {
                    "inexact" => UzawaKind::Inexact,
                    "adjoint-inexact" => UzawaKind::AdjointInexact,
                    "symmetric" => UzawaKind::Symmetric,
                    _ => return Err(bad(key, value)),
                }
            }
            ("solver", "schur") => {
                self.schur = match value {
                    "mass" => SchurKind::Mass,
                    "w-bfbt" => SchurKind::WeightedBfbt,
                    "vcycle-bfbt" => SchurKind::VCycleBfbt,
                    _ => return Err(bad(key, value)),
                }
            }
            ("solver", "divergence_with_density") => {
                self.divergence_with_density = b(key, value)?
            }
            ("solver", "fgmres_restart") => self.fgmres_restart = u(key, value)?,
            ("solver", "max_outer") => self.max_outer = u(key, value)?,
            ("physics", "d") => self.reference.d = f(key, value)?,
            ("physics", "delta_t") => self.reference.delta_t = f(key, value)?,
            ("physics", "eta0") => self.reference.eta0 = f(key, value)?,
            ("physics", "rho0") => self.reference.rho0 = f(key, value)?,
            ("physics", "cp0") => self.reference.cp0 = f(key, value)?,
            ("physics", "alpha0") => self.reference.alpha0 = f(key, value)?,
            ("physics", "g0") => self.reference.g0 = f(key, value)?,
            ("physics", "u0") => self.reference.u0 = f(key, value)?,
            ("physics", "k0") => self.reference.k0 = f(key, value)?,
            ("physics", "gamma0") => self.reference.gamma0 = f(key, value)?,
            ("physics", "r_surface_m") => self.reference.r_surface_m = f(key, value)?,
            ("physics", "r_cmb_m") => self.reference.r_cmb_m = f(key, value)?,
            ("physics", "t_surface") => self.reference.t_surface = f(key, value)?,
            ("physics", "t_cmb") => self.reference.t_cmb = f(key, value)?,
            ("physics", "rho_top") => self.reference.rho_top = f(key, value)?,
            ("physics", "t_adiabatic") => self.reference.t_adiabatic = f(key, value)?,
            ("physics", "activation_energy") => self.activation_energy = f(key, value)?,
            ("physics", "activation_volume") => self.activation_volume = f(key, value)?,
            ("physics", "eta_base_table") => {
                let mut table = Vec::new();
                for pair in value.split(',') {
                    let (r, e) = pair
                        .trim()
                        .split_once(':')
                        .ok_or_else(|| bad(key, value))?;
                    table.push((f(key, r.trim())?, f(key, e.trim())?));
                }
                self.eta_base_table = table;
            }
            ("physics", "noise_amplitude") => self.noise_amplitude = f(key, value)?,
            ("physics", "shear_cutoff_surface") => self.shear_cutoff_surface = b(key, value)?,
            ("physics", "exp_surrogate") => self.exp_surrogate = b(key, value)?,
            ("physics", "include_lhs_advection") => self.include_lhs_advection = b(key, value)?,
            ("physics", "ra_override") => self.ra_override = Some(f(key, value)?),
            ("time", "c_cfl") => self.c_cfl = f(key, value)?,
            ("time", "tau_max") => self.tau_max = f(key, value)?,
            ("time", "t_end") => self.t_end = f(key, value)?,
            ("time", "max_steps") => self.max_steps = u(key, value)?,
            ("convergence", "levels") => {
                self.conv_levels = parse_list(value).map_err(|_| bad(key, value))?
            }
            ("convergence", "steps") => {
                self.conv_steps = parse_list(value).map_err(|_| bad(key, value))?
            }
            ("convergence", "diffusivities") => {
                self.conv_diffusivities = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(key, value))?
            }
            ("bench", "level") => self.bench_level = u(key, value)?,
            ("bench", "target_abs") => self.bench_target_abs = f(key, value)?,
            ("bench", "omega_wbfbt") => self.bench_omega_wbfbt = f(key, value)?,
            ("bench", "wall_budget_seconds") => self.wall_budget_seconds = f(key, value)?,
            ("run", "mode") => {
                self.mode = match value {
                    "convergence-test" => RunMode::ConvergenceTest,
                    "solver-bench" => RunMode::SolverBench,
                    "simulate" => RunMode::Simulate,
                    _ => return Err(bad(key, value)),
                }
            }
            ("run", "seed") => {
                self.seed = value.parse::<u64>().map_err(|_| bad(key, value))?
            }
            ("run", "threads") => self.threads = u(key, value)?,
            ("output", "dir") => self.output_dir = value.to_string(),
            ("output", "vtk_every") => self.vtk_every = u(key, value)?,
            ("output", "checkpoint_every") => self.checkpoint_every = u(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into(), section.into())),
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let rc = &self.reference;
        writeln!(s, "[run]").unwrap();
        writeln!(s, "mode = {}", self.mode.label()).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "threads = {}", self.threads).unwrap();
        writeln!(s, "\n[mesh]").unwrap();
        writeln!(s, "n_tangential = {}", self.n_tangential).unwrap();
        writeln!(s, "n_radial = {}", self.n_radial).unwrap();
        if let (Some(c), Some(r)) = (self.r_cmb, self.r_surface) {
            writeln!(s, "r_cmb = {c}").unwrap();
            writeln!(s, "r_surface = {r}").unwrap();
        }
        writeln!(s, "\n[levels]").unwrap();
        writeln!(s, "max_level = {}", self.max_level).unwrap();
        writeln!(s, "min_level = {}", self.min_level).unwrap();
        writeln!(s, "viscosity_level = {}", self.viscosity_level).unwrap();
        writeln!(s, "\n[solver]").unwrap();
        writeln!(s, "sigma = {}", self.sigma).unwrap();
        writeln!(s, "omega = {}", self.omega).unwrap();
        writeln!(s, "tol_a = {}", self.tol_a).unwrap();
        writeln!(s, "m_a = {}", self.m_a).unwrap();
        writeln!(s, "deg_a = {}", self.deg_a).unwrap();
        writeln!(s, "tol_vbfbt = {}", self.tol_vbfbt).unwrap();
        writeln!(s, "tol_inv_mass = {}", self.tol_inv_mass).unwrap();
        writeln!(s, "tol_wbfbt = {}", self.tol_wbfbt).unwrap();
        writeln!(s, "m_v = {}", self.m_v).unwrap();
        writeln!(s, "deg_v = {}", self.deg_v).unwrap();
        writeln!(s, "tol_coarse = {}", self.tol_coarse).unwrap();
        writeln!(s, "tol_saddle = {}", self.tol_saddle).unwrap();
        writeln!(s, "tol_temperature = {}", self.tol_temperature).unwrap();
        writeln!(s, "tol_vector_mass = {}", self.tol_vector_mass).unwrap();
        writeln!(s, "a_l = {}", self.a_l).unwrap();
        writeln!(s, "a_r = {}", self.a_r).unwrap();
        writeln!(s, "uzawa = {}", self.uzawa.label()).unwrap();
        writeln!(s, "schur = {}", self.schur.label()).unwrap();
        writeln!(
            s,
            "divergence_with_density = {}",
            self.divergence_with_density
        )
        .unwrap();
        writeln!(s, "fgmres_restart = {}", self.fgmres_restart).unwrap();
        writeln!(s, "max_outer = {}", self.max_outer).unwrap();
        writeln!(s, "\n[physics]").unwrap();
        writeln!(s, "d = {}  # m", rc.d).unwrap();
        writeln!(s, "delta_t = {}  # K", rc.delta_t).unwrap();
        writeln!(s, "eta0 = {}  # Pa s", rc.eta0).unwrap();
        writeln!(s, "rho0 = {}  # kg/m^3", rc.rho0).unwrap();
        writeln!(s, "cp0 = {}  # J/(K kg)", rc.cp0).unwrap();
        writeln!(s, "alpha0 = {}  # 1/K", rc.alpha0).unwrap();
        writeln!(s, "g0 = {}  # m/s^2", rc.g0).unwrap();
        writeln!(s, "u0 = {}  # m/s", rc.u0).unwrap();
        writeln!(s, "k0 = {}  # W/(m K)", rc.k0).unwrap();
        writeln!(s, "gamma0 = {}", rc.gamma0).unwrap();
        writeln!(s, "r_surface_m = {}  # m", rc.r_surface_m).unwrap();
        writeln!(s, "r_cmb_m = {}  # m", rc.r_cmb_m).unwrap();
        writeln!(s, "t_surface = {}  # K", rc.t_surface).unwrap();
        writeln!(s, "t_cmb = {}  # K", rc.t_cmb).unwrap();
        writeln!(s, "rho_top = {}  # kg/m^3", rc.rho_top).unwrap();
        writeln!(s, "t_adiabatic = {}  # K", rc.t_adiabatic).unwrap();
        writeln!(s, "activation_energy = {}", self.activation_energy).unwrap();
        writeln!(s, "activation_volume = {}", self.activation_volume).unwrap();
        if !self.eta_base_table.is_empty() {
            let table = self
                .eta_base_table
                .iter()
                .map(|(r, e)| format!("{r}:{e}"))
                .collect::<Vec<_>>()
                .join(", ");
            writeln!(s, "eta_base_table = {table}").unwrap();
        }
        writeln!(s, "noise_amplitude = {}", self.noise_amplitude).unwrap();
        writeln!(s, "shear_cutoff_surface = {}", self.shear_cutoff_surface).unwrap();
        writeln!(s, "exp_surrogate = {}", self.exp_surrogate).unwrap();
        writeln!(s, "include_lhs_advection = {}", self.include_lhs_advection).unwrap();
        if let Some(ra) = self.ra_override {
            writeln!(s, "ra_override = {ra}").unwrap();
        }
        writeln!(s, "\n[time]").unwrap();
        writeln!(s, "c_cfl = {}", self.c_cfl).unwrap();
        writeln!(s, "tau_max = {}", self.tau_max).unwrap();
        writeln!(s, "t_end = {}", self.t_end).unwrap();
        writeln!(s, "max_steps = {}", self.max_steps).unwrap();
        writeln!(s, "\n[convergence]").unwrap();
        writeln!(s, "levels = {}", join_list(&self.conv_levels)).unwrap();
        writeln!(s, "steps = {}", join_list(&self.conv_steps)).unwrap();
        writeln!(
            s,
            "diffusivities = {}",
            self.conv_diffusivities
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )
        .unwrap();
        writeln!(s, "\n[bench]").unwrap();
        writeln!(s, "level = {}", self.bench_level).unwrap();
        writeln!(s, "target_abs = {}", self.bench_target_abs).unwrap();
        writeln!(s, "omega_wbfbt = {}", self.bench_omega_wbfbt).unwrap();
        writeln!(s, "wall_budget_seconds = {}", self.wall_budget_seconds).unwrap();
        writeln!(s, "\n[output]").unwrap();
        writeln!(s, "dir = {}", self.output_dir).unwrap();
        writeln!(s, "vtk_every = {}", self.vtk_every).unwrap();
        writeln!(s, "checkpoint_every = {}", self.checkpoint_every).unwrap();
        s
    }
}

fn parse_list(value: &str) -> Result<Vec<usize>, std::num::ParseIntError> {
    value.split(',').map(|v| v.trim().parse()).collect()
}

fn join_list(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
