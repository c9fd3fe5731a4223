//! Run configuration: model parameters plus the knobs of each command.

use std::path::PathBuf;

use antisync::config::KeyValues;
use antisync::covariance::{DriftConvention, JointOptions};
use antisync::discord::{DiscordOptions, EpsilonSign, LogBase};
use antisync::meanfield::{Sampling, SolverConfig, DEFAULT_DRIFT_THRESHOLD};
use antisync::metrics::DEFAULT_LOCKING_THRESHOLD;
use antisync::{Error, MeanFieldState, Result, SystemParams};

/// Keys understood besides [`SystemParams::KEYS`], with their defaults.
pub const KEYS: &[(&str, &str)] = &[
    ("out", "out"),
    ("seed", "1"),
    ("initial", "0,0,0,0,0,0"),
    ("horizon", "2e5"),
    ("stride", "0.5"),
    ("window", "1e4"),
    ("dense_stride", "0.05"),
    ("lock_threshold", "0.1"),
    ("drift_threshold", "1e-3"),
    ("solver", "dp45"),
    ("rtol", "1e-9"),
    ("atol", "1e-9"),
    ("step", "1e-3"),
    ("convention", "corrected"),
    ("joint_tolerance", "1e-13"),
    ("sweep_tolerance", "1e-10"),
    ("cov_stride", "100"),
    ("temperatures", "0,0.01"),
    ("transient", "2e4"),
    ("diagnostic", "false"),
    ("readout_time", "2e5"),
    ("eta_grid", ""),
    ("eta_start", "1000"),
    ("eta_stop", "5000"),
    ("eta_step", "250"),
    ("log_base", "2"),
    ("epsilon_sign", "plus"),
    ("oracle_horizon", "50"),
    ("oracle_step", "1e-4"),
    ("oracle_interval", "10"),
    ("n_traj", "10000"),
    ("z_limit", "4"),
    ("mc_convention", "same as convention"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dp45,
    Rk4,
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dp45" => Ok(Self::Dp45),
            "rk4" => Ok(Self::Rk4),
            other => Err(format!("unknown solver `{other}` (expected dp45 or rk4)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub out: PathBuf,
    pub seed: u64,
    /// Initial mean field, `q_c, p_c, q_m, p_m, q_d, p_d` at t = 0.
    pub initial: MeanFieldState,

    pub horizon: f64,
    pub stride: f64,
    /// Trailing window for locking and limit-cycle checks.
    pub window: f64,
    pub dense_stride: f64,
    pub lock_threshold: f64,
    pub drift_threshold: f64,
    pub solver: SolverKind,
    pub rtol: f64,
    pub atol: f64,
    pub step: f64,
    pub convention: DriftConvention,

    pub joint_tolerance: f64,
    /// Joint tolerance for sweep points. Readouts agree with the tighter
    /// default to a few parts in 1e6 at a quarter of the cost.
    pub sweep_tolerance: f64,
    pub cov_stride: f64,
    pub temperatures: Vec<f64>,
    pub transient: f64,
    /// Zero diffusion and zero initial covariance.
    pub diagnostic: bool,
    pub readout_time: f64,

    pub eta_grid: Vec<f64>,
    pub discord: DiscordOptions,

    pub oracle_horizon: f64,
    pub oracle_step: f64,
    pub oracle_interval: f64,
    pub n_traj: usize,
    pub z_limit: f64,
    pub mc_convention: DriftConvention,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_key_values(KeyValues::default()).expect("defaults are valid")
    }
}

fn invalid(message: String) -> Error {
    Error::Config { line: 0, message }
}

impl RunConfig {
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let params = SystemParams::from_key_values(&mut kv)?;
        macro_rules! get {
            ($key:literal, $default:expr) => {
                kv.take($key)?.unwrap_or($default)
            };
        }
        let eta_grid = match kv.take_list("eta_grid")? {
            Some(grid) => {
                for k in ["eta_start", "eta_stop", "eta_step"] {
                    if kv.contains(k) {
                        return Err(invalid(format!(
                            "`eta_grid` and `{k}` are mutually exclusive"
                        )));
                    }
                }
                grid
            }
            None => {
                let start: f64 = get!("eta_start", 1000.0);
                let stop: f64 = get!("eta_stop", 5000.0);
                let step: f64 = get!("eta_step", 250.0);
                if !(step > 0.0) || !(stop >= start) {
                    return Err(invalid(format!(
                        "bad eta range {start}..{stop} step {step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| start + k as f64 * step).collect()
            }
        };
        let initial = match kv.take_list("initial")? {
            None => MeanFieldState::zero(),
            Some(v) => {
                let y: [f64; 6] = v.try_into().map_err(|v: Vec<f64>| {
                    invalid(format!("`initial` needs 6 values, got {}", v.len()))
                })?;
                MeanFieldState::from_array(0.0, y)
            }
        };
        let convention: DriftConvention = get!("convention", DriftConvention::Corrected);
        let cfg = Self {
            params,
            out: kv
                .take_str("out")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
            seed: get!("seed", 1),
            initial,
            horizon: get!("horizon", 2e5),
            stride: get!("stride", 0.5),
            window: get!("window", 1e4),
            dense_stride: get!("dense_stride", 0.05),
            lock_threshold: get!("lock_threshold", DEFAULT_LOCKING_THRESHOLD),
            drift_threshold: get!("drift_threshold", DEFAULT_DRIFT_THRESHOLD),
            solver: get!("solver", SolverKind::Dp45),
            rtol: get!("rtol", 1e-9),
            atol: get!("atol", 1e-9),
            step: get!("step", SolverConfig::DEFAULT_FIXED_STEP),
            convention,
            joint_tolerance: get!("joint_tolerance", JointOptions::DEFAULT_TOLERANCE),
            sweep_tolerance: get!("sweep_tolerance", 1e-10),
            cov_stride: get!("cov_stride", 100.0),
            temperatures: kv
                .take_list("temperatures")?
                .unwrap_or_else(|| vec![0.0, 0.01]),
            transient: get!("transient", 2e4),
            diagnostic: get!("diagnostic", false),
            readout_time: get!("readout_time", 2e5),
            eta_grid,
            discord: DiscordOptions {
                log_base: get!("log_base", LogBase::Two),
                sign: get!("epsilon_sign", EpsilonSign::Plus),
            },
            oracle_horizon: get!("oracle_horizon", 50.0),
            oracle_step: get!("oracle_step", 1e-4),
            oracle_interval: get!("oracle_interval", 10.0),
            n_traj: get!("n_traj", 10_000),
            z_limit: get!("z_limit", 4.0),
            mc_convention: get!("mc_convention", convention),
        };
        kv.finish()?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(KeyValues::parse(text)?)
    }

    fn check(&self) -> Result<()> {
        let positive = [
            ("horizon", self.horizon),
            ("stride", self.stride),
            ("window", self.window),
            ("dense_stride", self.dense_stride),
            ("lock_threshold", self.lock_threshold),
            ("drift_threshold", self.drift_threshold),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("step", self.step),
            ("joint_tolerance", self.joint_tolerance),
            ("sweep_tolerance", self.sweep_tolerance),
            ("cov_stride", self.cov_stride),
            ("readout_time", self.readout_time),
            ("oracle_horizon", self.oracle_horizon),
            ("oracle_step", self.oracle_step),
            ("oracle_interval", self.oracle_interval),
            ("z_limit", self.z_limit),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!(
                    "`{key}` must be positive and finite, got {v}"
                )));
            }
        }
        if !self.initial.is_finite() {
            return Err(invalid("`initial` must be finite".into()));
        }
        if !(self.transient >= 0.0) || self.transient >= self.horizon {
            return Err(invalid(format!(
                "`transient` = {} must lie in [0, horizon)",
                self.transient
            )));
        }
        if self.temperatures.is_empty() || self.temperatures.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid(format!(
                "`temperatures` must be non-negative, got {:?}",
                self.temperatures
            )));
        }
        if self.eta_grid.is_empty() || self.eta_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid(format!(
                "eta grid must be strictly increasing, got {:?}",
                self.eta_grid
            )));
        }
        if self.oracle_interval > self.oracle_horizon {
            return Err(invalid("`oracle_interval` exceeds `oracle_horizon`".into()));
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        match self.solver {
            SolverKind::Dp45 => SolverConfig::adaptive(self.rtol, self.atol),
            SolverKind::Rk4 => SolverConfig::rk4(self.step),
        }
    }

    /// Base stride plus a dense tail over the trailing window.
    pub fn mean_field_sampling(&self, t_end: f64) -> Sampling {
        Sampling::uniform(self.stride).with_dense_tail(t_end, self.window, self.dense_stride)
    }

    pub fn params_at_temperature(&self, temperature: f64) -> Result<SystemParams> {
        self.params.clone().with_temperature(temperature)
    }
}
