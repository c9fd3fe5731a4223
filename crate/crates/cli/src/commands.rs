//! The four batch commands. Each `run_*` computes its result; each `cmd_*`
//! also writes the command's files under the configured output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use antisync::covariance::{
    initial_covariance, propagate_joint, upper_triangle_labels, CovarianceSeries, JointOptions,
    PhysicalityTolerance, LABELS,
};
use antisync::discord::{gaussian_discord, reduce};
use antisync::io::{fmt_f64, write_phases, write_sweep, write_trajectory, PhaseRow, SweepRow};
use antisync::meanfield::{detect_limit_cycle, integrate, Sampling, SolverConfig};
use antisync::metrics::{
    detect_locking, peak_to_peak, phase_records, phase_sum_variance, sync_measures, trailing,
    LockingVerdict, DEFAULT_AMPLITUDE_FLOOR,
};
use antisync::stochastic::{
    compare, simulate_ensemble, EnsembleConfig, EnsembleEstimate, LinearSde,
};
use antisync::{
    CovMatrix6, Error, LimitCycleReport, MeanFieldState, PhaseRecord, Result, SystemParams,
    TrajectorySeries,
};
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::stats::spearman;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Locking of the phase sum and the spread of `sin(φ_m - φ_d)` over the trailing window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseVerdict {
    pub locking: LockingVerdict,
    pub sin_diff_peak_to_peak: f64,
    /// False when either amplitude falls to the floor inside the window.
    pub phases_defined: bool,
}

pub fn judge_phases(records: &[PhaseRecord], window: f64, threshold: f64) -> Result<PhaseVerdict> {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let sum: Vec<f64> = records.iter().map(|r| r.sum).collect();
    let sin_diff: Vec<f64> = records.iter().map(|r| r.diff.sin()).collect();
    let tail = &records[records.len() - trailing(&t, &sum, window).len()..];
    let phases_defined = tail
        .iter()
        .all(|r| r.n_m > DEFAULT_AMPLITUDE_FLOOR && r.n_d > DEFAULT_AMPLITUDE_FLOOR);
    let mut locking = detect_locking(&t, &sum, window, threshold)?;
    if !phases_defined {
        locking.locked = false;
        locking.locked_value = f64::NAN;
    }
    Ok(PhaseVerdict {
        locking,
        sin_diff_peak_to_peak: peak_to_peak(trailing(&t, &sin_diff, window)),
        phases_defined,
    })
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub series: TrajectorySeries,
    pub records: Vec<PhaseRecord>,
    pub phases: PhaseVerdict,
    pub limit_cycle: LimitCycleReport,
}

pub fn run_simulate(cfg: &RunConfig) -> Result<SimulateOutcome> {
    let series = integrate(
        &cfg.params,
        &cfg.initial,
        cfg.horizon,
        &cfg.solver_config(),
        &cfg.mean_field_sampling(cfg.horizon),
    )?;
    let records = phase_records(&series);
    let phases = judge_phases(&records, cfg.window, cfg.lock_threshold)?;
    let limit_cycle = detect_limit_cycle(&series, cfg.window, cfg.drift_threshold)?;
    Ok(SimulateOutcome {
        series,
        records,
        phases,
        limit_cycle,
    })
}

fn params_json(map: &mut Map<String, Value>, p: &SystemParams) {
    for (k, v) in p.to_pairs() {
        let value = v.parse::<f64>().map_or(Value::String(v), number);
        map.insert(k.to_string(), value);
    }
}

pub fn simulate_summary(cfg: &RunConfig, o: &SimulateOutcome) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), "simulate".into());
    m.insert("locked".into(), o.phases.locking.locked.into());
    m.insert("locked_value".into(), number(o.phases.locking.locked_value));
    m.insert("trailing_std".into(), number(o.phases.locking.trailing_std));
    m.insert("trailing_samples".into(), o.phases.locking.samples.into());
    m.insert("phases_defined".into(), o.phases.phases_defined.into());
    m.insert(
        "sin_diff_peak_to_peak".into(),
        number(o.phases.sin_diff_peak_to_peak),
    );
    let lc = &o.limit_cycle;
    m.insert("limit_cycle_converged".into(), lc.converged.into());
    m.insert("oscillating".into(), lc.oscillating.into());
    m.insert("amplitude_m".into(), number(lc.amplitude_m));
    m.insert("amplitude_d".into(), number(lc.amplitude_d));
    m.insert(
        "period".into(),
        number(lc.period_estimate.unwrap_or(f64::NAN)),
    );
    m.insert("relative_drift".into(), number(lc.relative_drift));
    m.insert("drift_m".into(), number(lc.drift_m));
    m.insert("drift_d".into(), number(lc.drift_d));
    m.insert("horizon".into(), number(cfg.horizon));
    m.insert("window".into(), number(cfg.window));
    m.insert("samples".into(), o.series.len().into());
    m.insert("solver_steps".into(), o.series.solver.stats.accepted.into());
    params_json(&mut m, &cfg.params);
    m
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutcome> {
    let o = run_simulate(cfg)?;
    let mut w = create(&cfg.out, "trajectory.csv")?;
    write_trajectory(&mut w, &o.series)?;
    w.flush()?;
    let rows: Vec<PhaseRow> = o
        .records
        .iter()
        .map(|&record| PhaseRow {
            record,
            var_phase_sum: None,
            s_p: None,
            s_a: None,
        })
        .collect();
    let mut w = create(&cfg.out, "phases.csv")?;
    write_phases(&mut w, &rows)?;
    w.flush()?;
    let mut w = create(&cfg.out, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &Value::Object(simulate_summary(cfg, &o)))
        .map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(o)
}

/// Fluctuation readouts at one covariance sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceSample {
    pub t: f64,
    pub var_phase_sum: f64,
    pub s_p: f64,
    pub s_a: f64,
    pub min_eigenvalue: f64,
    /// `max|V - Vᵀ| / max|V|`.
    pub symmetric_defect: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone)]
pub struct VarianceRun {
    pub temperature: f64,
    pub n_bar: f64,
    pub covariance: CovarianceSeries,
    pub samples: Vec<VarianceSample>,
}

#[derive(Debug, Clone)]
pub struct VarianceOutcome {
    pub runs: Vec<VarianceRun>,
    /// For two temperatures: share of post-transient samples where the first
    /// curve is at or below the second.
    pub ordered_fraction: Option<f64>,
}

fn joint_options(
    cfg: &RunConfig,
    tolerance: f64,
    mean_field_sampling: Sampling,
    covariance_sampling: Sampling,
) -> JointOptions {
    JointOptions {
        solver: SolverConfig::adaptive(tolerance, tolerance),
        mean_field_sampling,
        covariance_sampling,
        convention: cfg.convention,
        zero_diffusion: cfg.diagnostic,
        abort_on: if cfg.diagnostic {
            None
        } else {
            Some(PhysicalityTolerance::SCALED)
        },
    }
}

fn readouts(v: &CovMatrix6, m: &MeanFieldState) -> (PhaseRecord, f64, f64, f64) {
    let record = PhaseRecord::from_quadratures(m.t, m.q_m, m.p_m, m.q_d, m.p_d);
    let var = phase_sum_variance(v, &record, DEFAULT_AMPLITUDE_FLOOR).unwrap_or(f64::NAN);
    let (s_p, s_a) = sync_measures(v, record.phi_m, record.phi_d);
    (record, var, s_p, s_a)
}

pub fn run_variance_at(cfg: &RunConfig, temperature: f64) -> Result<VarianceRun> {
    let params = cfg.params_at_temperature(temperature)?;
    let v0 = if cfg.diagnostic {
        CovMatrix6::zeros()
    } else {
        initial_covariance(params.n_bar)?
    };
    let opts = joint_options(
        cfg,
        cfg.joint_tolerance,
        Sampling::uniform(cfg.cov_stride),
        Sampling::uniform(cfg.cov_stride),
    );
    let (mf, covariance) = propagate_joint(&params, &cfg.initial, &v0, cfg.horizon, &opts)?;
    let samples = covariance
        .samples
        .iter()
        .map(|s| {
            let m = mf
                .nearest(s.t)
                .ok_or_else(|| Error::Mismatch(format!("no mean-field sample at t = {}", s.t)))?;
            let (_, var_phase_sum, s_p, s_a) = readouts(&s.v, m);
            let ph = s.physicality;
            Ok(VarianceSample {
                t: s.t,
                var_phase_sum,
                s_p,
                s_a,
                min_eigenvalue: ph.min_uncertainty_eigenvalue,
                symmetric_defect: if ph.max_abs > 0.0 {
                    ph.symmetric_defect / ph.max_abs
                } else {
                    0.0
                },
                max_abs: ph.max_abs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VarianceRun {
        temperature,
        n_bar: params.n_bar,
        covariance,
        samples,
    })
}

pub fn ordered_fraction(lower: &VarianceRun, upper: &VarianceRun, transient: f64) -> f64 {
    let pairs: Vec<(f64, f64)> = lower
        .samples
        .iter()
        .zip(&upper.samples)
        .filter(|(a, _)| a.t >= transient)
        .map(|(a, b)| (a.var_phase_sum, b.var_phase_sum))
        .collect();
    if pairs.is_empty() {
        return f64::NAN;
    }
    pairs.iter().filter(|(a, b)| a <= b).count() as f64 / pairs.len() as f64
}

pub fn run_variance(cfg: &RunConfig) -> Result<VarianceOutcome> {
    let runs = cfg
        .temperatures
        .iter()
        .map(|&t| run_variance_at(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let ordered_fraction = match runs.as_slice() {
        [a, b] => Some(ordered_fraction(a, b, cfg.transient)),
        _ => None,
    };
    Ok(VarianceOutcome {
        runs,
        ordered_fraction,
    })
}

pub const VARIANCE_HEADER: &str =
    "temperature,n_bar,t,var_phase_sum,log10_var_phase_sum,S_p,S_a,min_eigenvalue,symmetric_defect,max_abs_V";

pub fn cmd_variance(cfg: &RunConfig) -> Result<VarianceOutcome> {
    let o = run_variance(cfg)?;
    let mut w = create(&cfg.out, "covariance.csv")?;
    let mut header = vec!["temperature".to_string(), "t".to_string()];
    header.extend(upper_triangle_labels("V"));
    writeln!(w, "{}", header.join(","))?;
    for run in &o.runs {
        for s in &run.covariance.samples {
            let row: Vec<String> = [run.temperature, s.t]
                .into_iter()
                .chain(s.v.upper_triangle())
                .map(fmt_f64)
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
    }
    w.flush()?;
    let mut w = create(&cfg.out, "variance.csv")?;
    writeln!(w, "{VARIANCE_HEADER}")?;
    for run in &o.runs {
        for s in &run.samples {
            let row: Vec<String> = [
                run.temperature,
                run.n_bar,
                s.t,
                s.var_phase_sum,
                s.var_phase_sum.log10(),
                s.s_p,
                s.s_a,
                s.min_eigenvalue,
                s.symmetric_defect,
                s.max_abs,
            ]
            .into_iter()
            .map(fmt_f64)
            .collect();
            writeln!(w, "{}", row.join(","))?;
        }
    }
    w.flush()?;
    Ok(o)
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Rank correlation of locked phase sum against discord over the `ok` rows.
    pub spearman: Option<f64>,
}

fn sweep_point(cfg: &RunConfig, eta: f64) -> Result<SweepRow> {
    let params = antisync::model::validate(&SystemParams {
        eta,
        ..cfg.params.clone()
    })?;
    let t_end = cfg.readout_time;
    let opts = joint_options(
        cfg,
        cfg.sweep_tolerance,
        cfg.mean_field_sampling(t_end),
        Sampling::uniform(t_end),
    );
    let v0 = initial_covariance(params.n_bar)?;
    let (mf, cov) = propagate_joint(&params, &cfg.initial, &v0, t_end, &opts)?;
    let phases = judge_phases(&phase_records(&mf), cfg.window, cfg.lock_threshold)?;
    let last = cov
        .last()
        .ok_or_else(|| Error::Mismatch("no covariance sample".into()))?;
    let m = mf
        .last()
        .ok_or_else(|| Error::Mismatch("no mean-field sample".into()))?;
    let (_, var_phase_sum, s_p, s_a) = readouts(&last.v, m);
    let discord = gaussian_discord(&reduce(&last.v), &cfg.discord)?;
    let status = if phases.locking.locked {
        "ok"
    } else {
        "unlocked"
    };
    Ok(SweepRow {
        eta,
        locked_phase_sum: phases.locking.locked_value,
        discord,
        s_p,
        s_a,
        var_phase_sum,
        status: status.into(),
    })
}

pub fn run_sweep(cfg: &RunConfig) -> SweepOutcome {
    use rayon::prelude::*;
    let rows: Vec<SweepRow> = cfg
        .eta_grid
        .par_iter()
        .map(|&eta| {
            sweep_point(cfg, eta).unwrap_or_else(|e| SweepRow {
                eta,
                locked_phase_sum: f64::NAN,
                discord: f64::NAN,
                s_p: f64::NAN,
                s_a: f64::NAN,
                var_phase_sum: f64::NAN,
                status: format!("error: {e}"),
            })
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.status == "ok" && r.locked_phase_sum.is_finite() && r.discord.is_finite())
        .map(|r| (r.locked_phase_sum, r.discord))
        .unzip();
    SweepOutcome {
        spearman: spearman(&x, &y),
        rows,
    }
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    let o = run_sweep(cfg);
    let mut w = create(&cfg.out, "sweep.csv")?;
    write_sweep(&mut w, &o.rows)?;
    w.flush()?;
    Ok(o)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub t: f64,
    pub entry: String,
    pub lyapunov: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub rows: Vec<OracleRow>,
    pub lyapunov: CovarianceSeries,
    pub estimates: Vec<EnsembleEstimate>,
    pub max_z: f64,
    pub passed: bool,
}

pub fn run_oracle(cfg: &RunConfig) -> Result<OracleOutcome> {
    let params = cfg.params_at_temperature(cfg.params.temperature)?;
    let (horizon, h) = (cfg.oracle_horizon, cfg.oracle_step);
    let v0 = initial_covariance(params.n_bar)?;
    let opts = JointOptions {
        abort_on: None,
        ..joint_options(
            cfg,
            cfg.joint_tolerance,
            Sampling::uniform(cfg.oracle_interval),
            Sampling::uniform(cfg.oracle_interval),
        )
    };
    let (_, cov) = propagate_joint(&params, &cfg.initial, &v0, horizon, &opts)?;
    let record: Vec<f64> = cov
        .samples
        .iter()
        .map(|s| s.t)
        .filter(|&t| t > 0.0)
        .collect();

    let mf = integrate(
        &params,
        &cfg.initial,
        horizon,
        &SolverConfig::rk4(h),
        &Sampling::uniform(h),
    )?;
    let sde =
        LinearSde::from_mean_field(&params, &mf, cfg.mc_convention, h, horizon, cfg.diagnostic)?;
    drop(mf);
    let estimates = simulate_ensemble(
        &sde,
        &v0,
        &record,
        &EnsembleConfig::new(cfg.n_traj, cfg.seed),
    )?;

    let mut rows = Vec::new();
    let mut max_z: f64 = 0.0;
    for (s, e) in cov.samples.iter().filter(|s| s.t > 0.0).zip(&estimates) {
        max_z = max_z.max(compare(&s.v, s.t, e)?);
        for i in 0..6 {
            for j in i..6 {
                let (a, b, se) = (s.v[(i, j)], e.covariance[(i, j)], e.std_error[(i, j)]);
                rows.push(OracleRow {
                    t: s.t,
                    entry: format!("{}_{}", LABELS[i], LABELS[j]),
                    lyapunov: a,
                    monte_carlo: b,
                    std_error: se,
                    z: (a - b).abs() / se,
                });
            }
        }
    }
    Ok(OracleOutcome {
        rows,
        lyapunov: cov,
        estimates,
        passed: max_z <= cfg.z_limit,
        max_z,
    })
}

pub const ORACLE_HEADER: &str = "t,entry,lyapunov,monte_carlo,std_error,z";

pub fn cmd_oracle(cfg: &RunConfig) -> Result<OracleOutcome> {
    let o = run_oracle(cfg)?;
    let mut w = create(&cfg.out, "oracle.csv")?;
    writeln!(w, "{ORACLE_HEADER}")?;
    for r in &o.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(r.t),
            r.entry,
            fmt_f64(r.lyapunov),
            fmt_f64(r.monte_carlo),
            fmt_f64(r.std_error),
            fmt_f64(r.z)
        )?;
    }
    w.flush()?;
    Ok(o)
}
