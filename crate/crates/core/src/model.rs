//! Physical parameters, unit conventions and the energy functional.
//!
//! All rates and couplings are stored as ratios to the mechanical angular
//! frequency `omega_m`, which itself is kept in rad/s only so the thermal
//! occupancy can be derived from a temperature.
//!
//! Quadratures follow `q = (a† + a)/√2`, `p = i(a† − a)/√2` for every mode,
//! including the cavity.

use std::fmt;
use std::str::FromStr;

use crate::config::KeyValues;
use crate::error::{Error, Result, Violation};

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;

/// Relative tolerance used when checking the cached thermal occupancy.
const N_BAR_COHERENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OccupancyConvention {
    /// `1 / (exp(x) - 1)`
    #[default]
    BoseEinstein,
    /// `exp(-x)`, a literal reading that drops the `-1`.
    PaperLiteral,
}

impl FromStr for OccupancyConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bose_einstein" | "BoseEinstein" => Ok(Self::BoseEinstein),
            "paper_literal" | "PaperLiteral" => Ok(Self::PaperLiteral),
            other => Err(format!(
                "unknown occupancy convention `{other}` (expected bose_einstein or paper_literal)"
            )),
        }
    }
}

impl fmt::Display for OccupancyConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BoseEinstein => "bose_einstein",
            Self::PaperLiteral => "paper_literal",
        })
    }
}

/// Mean thermal phonon number of a bath at temperature `temperature` (K)
/// for a mode of angular frequency `omega_m` (rad/s).
pub fn thermal_occupancy(
    omega_m: f64,
    temperature: f64,
    convention: OccupancyConvention,
) -> Result<f64> {
    if !omega_m.is_finite() || !temperature.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "thermal occupancy needs finite inputs (omega_m = {omega_m}, T = {temperature})"
        )));
    }
    if omega_m <= 0.0 || temperature < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "thermal occupancy needs omega_m > 0 and T >= 0 (omega_m = {omega_m}, T = {temperature})"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega_m / (K_B * temperature);
    Ok(match convention {
        OccupancyConvention::BoseEinstein => 1.0 / x.exp_m1(),
        OccupancyConvention::PaperLiteral => (-x).exp(),
    })
}

/// System parameters in units of the mechanical frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Mechanical angular frequency in rad/s; sets the absolute scale.
    pub omega_m: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Atomic dephasing rate.
    pub gamma_a: f64,
    /// Cavity–laser detuning `omega_c - omega_L`.
    pub delta: f64,
    pub omega_sigma: f64,
    pub g_m: f64,
    pub g_d: f64,
    /// Drive amplitude.
    pub eta: f64,
    /// Bath temperature in kelvin.
    pub temperature: f64,
    /// Cached thermal occupancy; must match `temperature`.
    pub n_bar: f64,
    pub occupancy_convention: OccupancyConvention,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::baseline()
    }
}

impl SystemParams {
    /// κ = 1, γ = Γ = 5e-6, Δ = −1, g_m = g_d = 1e-5, η = 3000, ω_σ = 1,
    /// ω_m = 1e7 rad/s, T = 0.
    pub fn baseline() -> Self {
        Self {
            omega_m: 1.0e7,
            kappa: 1.0,
            gamma: 5.0e-6,
            gamma_a: 5.0e-6,
            delta: -1.0,
            omega_sigma: 1.0,
            g_m: 1.0e-5,
            g_d: 1.0e-5,
            eta: 3000.0,
            temperature: 0.0,
            n_bar: 0.0,
            occupancy_convention: OccupancyConvention::BoseEinstein,
        }
    }

    /// Sets the temperature and recomputes the cached occupancy.
    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        self.temperature = temperature;
        self.refresh_occupancy()?;
        Ok(self)
    }

    pub fn with_occupancy_convention(mut self, convention: OccupancyConvention) -> Result<Self> {
        self.occupancy_convention = convention;
        self.refresh_occupancy()?;
        Ok(self)
    }

    fn refresh_occupancy(&mut self) -> Result<()> {
        self.n_bar = thermal_occupancy(self.omega_m, self.temperature, self.occupancy_convention)?;
        Ok(())
    }

    /// Names accepted by [`SystemParams::from_key_values`].
    pub const KEYS: [&'static str; 12] = [
        "omega_m",
        "kappa",
        "gamma",
        "Gamma_a",
        "Delta",
        "omega_sigma",
        "g_m",
        "g_d",
        "eta",
        "temperature",
        "n_bar",
        "occupancy_convention",
    ];

    /// Reads parameter keys from `kv`, starting from [`SystemParams::baseline`].
    ///
    /// Consumed keys are removed so the caller can reject leftovers. When
    /// `n_bar` is given it must agree with the temperature.
    pub fn from_key_values(kv: &mut KeyValues) -> Result<Self> {
        let mut p = Self::baseline();
        let fields: [(&str, &mut f64); 10] = [
            ("omega_m", &mut p.omega_m),
            ("kappa", &mut p.kappa),
            ("gamma", &mut p.gamma),
            ("Gamma_a", &mut p.gamma_a),
            ("Delta", &mut p.delta),
            ("omega_sigma", &mut p.omega_sigma),
            ("g_m", &mut p.g_m),
            ("g_d", &mut p.g_d),
            ("eta", &mut p.eta),
            ("temperature", &mut p.temperature),
        ];
        for (key, slot) in fields {
            if let Some(v) = kv.take::<f64>(key)? {
                *slot = v;
            }
        }
        if let Some(conv) = kv.take::<OccupancyConvention>("occupancy_convention")? {
            p.occupancy_convention = conv;
        }
        let explicit_n_bar = kv.take::<f64>("n_bar")?;
        p.refresh_occupancy().map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::InvalidParams(vec![Violation {
                field: "temperature",
                message: msg,
            }]),
            other => other,
        })?;
        if let Some(n) = explicit_n_bar {
            p.n_bar = n;
        }
        validate(&p)
    }

    /// Parses a standalone parameter file; unknown keys are an error.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let p = Self::from_key_values(&mut kv)?;
        kv.finish()?;
        Ok(p)
    }

    /// `(key, value)` pairs in the config-file vocabulary.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("omega_m", self.omega_m.to_string()),
            ("kappa", self.kappa.to_string()),
            ("gamma", self.gamma.to_string()),
            ("Gamma_a", self.gamma_a.to_string()),
            ("Delta", self.delta.to_string()),
            ("omega_sigma", self.omega_sigma.to_string()),
            ("g_m", self.g_m.to_string()),
            ("g_d", self.g_d.to_string()),
            ("eta", self.eta.to_string()),
            ("temperature", self.temperature.to_string()),
            ("n_bar", self.n_bar.to_string()),
            (
                "occupancy_convention",
                self.occupancy_convention.to_string(),
            ),
        ]
    }
}

/// Checks every parameter invariant and returns a copy of the parameters.
///
/// All violations are collected, not just the first.
pub fn validate(params: &SystemParams) -> Result<SystemParams> {
    let mut violations = Vec::new();
    let mut push =
        |field: &'static str, message: String| violations.push(Violation { field, message });

    let finite: [(&'static str, f64); 11] = [
        ("omega_m", params.omega_m),
        ("kappa", params.kappa),
        ("gamma", params.gamma),
        ("Gamma_a", params.gamma_a),
        ("Delta", params.delta),
        ("omega_sigma", params.omega_sigma),
        ("g_m", params.g_m),
        ("g_d", params.g_d),
        ("eta", params.eta),
        ("temperature", params.temperature),
        ("n_bar", params.n_bar),
    ];
    for (field, value) in finite {
        if !value.is_finite() {
            push(field, format!("must be finite, got {value}"));
        }
    }
    if params.omega_m.is_finite() && params.omega_m <= 0.0 {
        push("omega_m", format!("must be > 0, got {}", params.omega_m));
    }
    let non_negative: [(&'static str, f64); 6] = [
        ("kappa", params.kappa),
        ("gamma", params.gamma),
        ("Gamma_a", params.gamma_a),
        ("omega_sigma", params.omega_sigma),
        ("temperature", params.temperature),
        ("n_bar", params.n_bar),
    ];
    for (field, value) in non_negative {
        if value < 0.0 {
            push(field, format!("must be >= 0, got {value}"));
        }
    }

    let inputs_ok = params.omega_m.is_finite()
        && params.omega_m > 0.0
        && params.temperature.is_finite()
        && params.temperature >= 0.0;
    if inputs_ok && params.n_bar.is_finite() {
        let expected = thermal_occupancy(
            params.omega_m,
            params.temperature,
            params.occupancy_convention,
        )
        .expect("inputs checked above");
        let scale = expected.abs().max(1.0);
        if (params.n_bar - expected).abs() > N_BAR_COHERENCE_TOL * scale {
            push(
                "n_bar",
                format!(
                    "cached occupancy {} disagrees with {} from temperature {} K ({})",
                    params.n_bar, expected, params.temperature, params.occupancy_convention
                ),
            );
        }
    }

    if violations.is_empty() {
        Ok(params.clone())
    } else {
        Err(Error::InvalidParams(violations))
    }
}

/// Classical expectation values of the six quadratures at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanFieldState {
    /// Dimensionless time `omega_m * t`.
    pub t: f64,
    pub q_c: f64,
    pub p_c: f64,
    pub q_m: f64,
    pub p_m: f64,
    pub q_d: f64,
    pub p_d: f64,
}

impl MeanFieldState {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a state from `[q_c, p_c, q_m, p_m, q_d, p_d]`.
    pub fn from_array(t: f64, y: [f64; 6]) -> Self {
        Self {
            t,
            q_c: y[0],
            p_c: y[1],
            q_m: y[2],
            p_m: y[3],
            q_d: y[4],
            p_d: y[5],
        }
    }

    /// `[q_c, p_c, q_m, p_m, q_d, p_d]`
    pub fn to_array(&self) -> [f64; 6] {
        [self.q_c, self.p_c, self.q_m, self.p_m, self.q_d, self.p_d]
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                t: self.t,
                context: format!("mean field {:?}", self.to_array()),
            })
        }
    }

    /// Photon number `|c|^2 = (q_c^2 + p_c^2)/2`.
    pub fn cavity_occupation(&self) -> f64 {
        0.5 * (self.q_c * self.q_c + self.p_c * self.p_c)
    }
}

/// Mean-field energy `H / (ħ ω_m)` with vacuum constants dropped.
pub fn energy(state: &MeanFieldState, params: &SystemParams) -> f64 {
    let photons = state.cavity_occupation();
    let sqrt2 = std::f64::consts::SQRT_2;
    params.delta * photons + 0.5 * (state.q_m * state.q_m + state.p_m * state.p_m)
        - 0.5 * params.omega_sigma * (state.q_d * state.q_d + state.p_d * state.p_d)
        + params.g_m * state.q_m * photons
        + sqrt2 * params.g_d * state.q_c * state.q_d
        + sqrt2 * params.eta * state.p_c
}
