//! Nonlinear mean-field dynamics and limit-cycle detection.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::model::{validate, MeanFieldState, SystemParams};
use crate::ode::{Method, StepStats, Stepper};

/// Writes `d/d(ω_m t)` of `[q_c, p_c, q_m, p_m, q_d, p_d]` into `dy`.
#[inline]
pub fn rhs_into(y: &[f64; 6], p: &SystemParams, dy: &mut [f64; 6]) {
    let [q_c, p_c, q_m, p_m, q_d, p_d] = *y;
    dy[0] = -p.kappa * q_c + p.delta * p_c + p.g_m * q_m * p_c + SQRT_2 * p.eta;
    dy[1] = -p.delta * q_c - p.g_m * q_m * q_c - SQRT_2 * p.g_d * q_d - p.kappa * p_c;
    dy[2] = p_m;
    dy[3] = -q_m - 0.5 * p.g_m * (p_c * p_c + q_c * q_c) - p.gamma * p_m;
    dy[4] = -p.omega_sigma * p_d - p.gamma_a * q_d;
    dy[5] = p.omega_sigma * q_d - SQRT_2 * p.g_d * q_c - p.gamma_a * p_d;
}

/// Time derivative of the mean field, ordered `[q_c, p_c, q_m, p_m, q_d, p_d]`.
pub fn rhs(state: &MeanFieldState, params: &SystemParams) -> Result<[f64; 6]> {
    let mut dy = [0.0; 6];
    rhs_into(&state.to_array(), params, &mut dy);
    if dy.iter().all(|v| v.is_finite()) {
        Ok(dy)
    } else {
        Err(Error::NonFinite {
            t: state.t,
            context: format!("mean-field derivative {dy:?}"),
        })
    }
}

/// Integration scheme and tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
}

impl Default for SolverConfig {
    /// Adaptive Dormand–Prince with rtol = atol = 1e-9.
    fn default() -> Self {
        Self::adaptive(1e-9, 1e-9)
    }
}

impl SolverConfig {
    pub const DEFAULT_FIXED_STEP: f64 = 1e-3;

    pub fn rk4(step: f64) -> Self {
        Self {
            method: Method::Rk4 { step },
        }
    }

    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::DormandPrince45 {
                rtol,
                atol,
                max_step: 0.25,
            },
        }
    }
}

/// Region sampled more finely than the base stride.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseWindow {
    pub start: f64,
    pub end: f64,
    pub stride: f64,
}

/// Where the integrator records output.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub stride: f64,
    pub dense: Vec<DenseWindow>,
    /// Upper bound on stored samples; the base stride widens to respect it.
    pub max_samples: usize,
}

impl Sampling {
    pub const MAX_SAMPLES: usize = 1_000_000;

    pub fn uniform(stride: f64) -> Self {
        Self {
            stride,
            dense: Vec::new(),
            max_samples: Self::MAX_SAMPLES,
        }
    }

    /// Adds a dense window covering the last `span` time units before `t_end`.
    pub fn with_dense_tail(mut self, t_end: f64, span: f64, stride: f64) -> Self {
        self.dense.push(DenseWindow {
            start: (t_end - span).max(0.0),
            end: t_end,
            stride,
        });
        self
    }

    /// Base stride after widening to respect `max_samples`.
    pub fn effective_stride(&self, t0: f64, t_end: f64) -> f64 {
        let span = t_end - t0;
        let budget = self.max_samples.saturating_sub(self.dense_count());
        let floor = if budget > 1 {
            span / (budget - 1) as f64
        } else {
            span
        };
        self.stride.max(floor)
    }

    fn dense_count(&self) -> usize {
        self.dense
            .iter()
            .map(|w| ((w.end - w.start) / w.stride).ceil().max(0.0) as usize + 1)
            .sum()
    }

    /// Sorted, de-duplicated sample times covering `[t0, t_end]`, both included.
    pub fn times(&self, t0: f64, t_end: f64) -> Result<Vec<f64>> {
        if !(self.stride > 0.0)
            || self
                .dense
                .iter()
                .any(|w| !(w.stride > 0.0) || w.end < w.start)
        {
            return Err(Error::InvalidArgument(format!(
                "bad sampling plan {self:?}"
            )));
        }
        if self.dense_count() > self.max_samples {
            return Err(Error::InvalidArgument(format!(
                "dense windows need {} samples, more than the limit {}",
                self.dense_count(),
                self.max_samples
            )));
        }
        let stride = self.effective_stride(t0, t_end);
        let mut times = grid(t0, t_end, t0, stride);
        for w in &self.dense {
            let lo = w.start.max(t0);
            let hi = w.end.min(t_end);
            if hi > lo {
                times.extend(grid(lo, hi, w.start, w.stride));
            }
        }
        times.push(t_end);
        times.sort_by(f64::total_cmp);
        let tol = 1e-9
            * stride.min(
                self.dense
                    .iter()
                    .map(|w| w.stride)
                    .fold(f64::INFINITY, f64::min),
            );
        times.dedup_by(|b, a| (*b - *a).abs() <= tol);
        // The final time must be exactly t_end even if a grid point landed within tol of it.
        if let Some(last) = times.last_mut() {
            *last = t_end;
        }
        Ok(times)
    }
}

/// Grid points `origin + k*stride` inside `[lo, hi]`.
fn grid(lo: f64, hi: f64, origin: f64, stride: f64) -> Vec<f64> {
    let k0 = ((lo - origin) / stride).ceil() as i64;
    let k1 = ((hi - origin) / stride).floor() as i64;
    (k0..=k1).map(|k| origin + k as f64 * stride).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverMetadata {
    pub method: String,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub fixed_step: Option<f64>,
    pub stats: StepStats,
}

impl SolverMetadata {
    pub fn new(method: Method, stats: StepStats) -> Self {
        let (rtol, atol, fixed_step) = match method {
            Method::Rk4 { step } => (None, None, Some(step)),
            Method::DormandPrince45 { rtol, atol, .. } => (Some(rtol), Some(atol), None),
        };
        Self {
            method: method.name().to_string(),
            rtol,
            atol,
            fixed_step,
            stats,
        }
    }
}

/// Sampled mean-field trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySeries {
    pub states: Vec<MeanFieldState>,
    /// Base sampling stride actually used.
    pub stride: f64,
    pub solver: SolverMetadata,
}

impl TrajectorySeries {
    /// Wraps externally produced samples, checking the series invariants.
    pub fn from_states(
        states: Vec<MeanFieldState>,
        stride: f64,
        solver: SolverMetadata,
    ) -> Result<Self> {
        for w in states.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidArgument(format!(
                    "time stamps not strictly increasing at t = {}",
                    w[1].t
                )));
            }
        }
        for s in &states {
            s.ensure_finite()?;
        }
        Ok(Self {
            states,
            stride,
            solver,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&MeanFieldState> {
        self.states.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Samples with `t >= t_from`.
    pub fn since(&self, t_from: f64) -> &[MeanFieldState] {
        let i = self.states.partition_point(|s| s.t < t_from);
        &self.states[i..]
    }

    /// The stored sample closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&MeanFieldState> {
        let i = self.states.partition_point(|s| s.t < t);
        let candidates = [i.checked_sub(1), Some(i)];
        candidates
            .into_iter()
            .flatten()
            .filter_map(|k| self.states.get(k))
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

/// Integrates the mean-field equations from `initial` to `t_end`.
pub fn integrate(
    params: &SystemParams,
    initial: &MeanFieldState,
    t_end: f64,
    solver: &SolverConfig,
    sampling: &Sampling,
) -> Result<TrajectorySeries> {
    let params = validate(params)?;
    initial.ensure_finite()?;
    if !(t_end > initial.t) {
        return Err(Error::InvalidArgument(format!(
            "t_end = {t_end} must exceed the initial time {}",
            initial.t
        )));
    }
    let times = sampling.times(initial.t, t_end)?;
    let mut stepper = Stepper::new(solver.method)?;
    let mut f = |_t: f64, y: &[f64; 6], dy: &mut [f64; 6]| rhs_into(y, &params, dy);
    let mut noop = |_t: f64, _y: &mut [f64; 6]| {};

    let mut t = initial.t;
    let mut y = initial.to_array();
    let mut states = Vec::with_capacity(times.len());
    for &ts in &times {
        stepper.advance_to(&mut f, &mut noop, &mut t, &mut y, ts)?;
        let s = MeanFieldState::from_array(t, y);
        s.ensure_finite()?;
        states.push(s);
    }
    Ok(TrajectorySeries {
        states,
        stride: sampling.effective_stride(initial.t, t_end),
        solver: SolverMetadata::new(solver.method, stepper.stats),
    })
}

/// Default bound on the relative per-period amplitude drift.
pub const DEFAULT_DRIFT_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCycleReport {
    pub converged: bool,
    /// False when some trailing window has no upward zero crossing of `q_m`.
    pub oscillating: bool,
    pub amplitude_m: f64,
    pub amplitude_d: f64,
    pub period_estimate: Option<f64>,
    /// Largest of the two per-mode drifts.
    pub relative_drift: f64,
    pub drift_m: f64,
    pub drift_d: f64,
}

/// Judges whether the trajectory has settled onto a constant-amplitude cycle.
///
/// The last three windows of length `trailing_window` are compared: each
/// window's amplitude is its peak `|q|` (refined by a parabola through the
/// peak sample and its neighbours), and the largest change between adjacent
/// windows is scaled to a per-period rate using the period from upward zero
/// crossings of `q_m`.
pub fn detect_limit_cycle(
    series: &TrajectorySeries,
    trailing_window: f64,
    drift_threshold: f64,
) -> Result<LimitCycleReport> {
    let (Some(first), Some(last)) = (series.states.first(), series.states.last()) else {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    };
    if !(trailing_window > 0.0) || last.t - first.t < 3.0 * trailing_window {
        return Err(Error::InvalidArgument(format!(
            "series spans {} time units, need three windows of {trailing_window}",
            last.t - first.t
        )));
    }
    let t_end = last.t;
    // Samples within rounding of a boundary go to the later window, so that
    // shifting the time origin cannot move them across.
    let slack = 1e-9 * trailing_window;
    // windows[0] is the oldest of the three.
    let bounds: Vec<(usize, usize)> = (0..3)
        .map(|k| {
            let lo = t_end - (3 - k) as f64 * trailing_window - slack;
            let hi = t_end - (2 - k) as f64 * trailing_window - slack;
            let a = series.states.partition_point(|s| s.t <= lo);
            let b = series.states.partition_point(|s| s.t <= hi);
            (a, b)
        })
        .collect();

    let q_m: Vec<f64> = series.states.iter().map(|s| s.q_m).collect();
    let q_d: Vec<f64> = series.states.iter().map(|s| s.q_d).collect();
    let times: Vec<f64> = series.states.iter().map(|s| s.t).collect();

    let crossings: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(a, b)| upward_crossings(&times, &q_m, a, b))
        .collect();
    let oscillating = crossings.iter().all(|c| !c.is_empty());
    let all: Vec<f64> = crossings.concat();
    let period = if oscillating && all.len() >= 2 {
        Some((all[all.len() - 1] - all[0]) / (all.len() - 1) as f64)
    } else {
        None
    };

    let amps_m: Vec<f64> = bounds
        .iter()
        .map(|&(a, b)| peak_amplitude(&times, &q_m, a, b))
        .collect();
    let amps_d: Vec<f64> = bounds
        .iter()
        .map(|&(a, b)| peak_amplitude(&times, &q_d, a, b))
        .collect();

    let drift = |amps: &[f64]| -> f64 {
        let Some(p) = period else {
            return f64::INFINITY;
        };
        let latest = amps[2];
        let change = (amps[2] - amps[1]).abs().max((amps[1] - amps[0]).abs());
        if latest == 0.0 {
            // A mode sitting exactly at rest is stationary, not drifting.
            return if change == 0.0 { 0.0 } else { f64::INFINITY };
        }
        change / latest * p / trailing_window
    };
    let drift_m = drift(&amps_m);
    let drift_d = drift(&amps_d);
    let relative_drift = drift_m.max(drift_d);
    Ok(LimitCycleReport {
        converged: oscillating && period.is_some() && relative_drift < drift_threshold,
        oscillating,
        amplitude_m: amps_m[2],
        amplitude_d: amps_d[2],
        period_estimate: period,
        relative_drift,
        drift_m,
        drift_d,
    })
}

/// Linearly interpolated times where `x` crosses zero upwards, for sample
/// pairs `(i, i+1)` with `i` in `[a, b)`.
fn upward_crossings(t: &[f64], x: &[f64], a: usize, b: usize) -> Vec<f64> {
    let end = b.min(x.len().saturating_sub(1));
    (a.max(1)..=end)
        .filter(|&i| x[i - 1] < 0.0 && x[i] >= 0.0)
        .map(|i| {
            let frac = -x[i - 1] / (x[i] - x[i - 1]);
            t[i - 1] + frac * (t[i] - t[i - 1])
        })
        .collect()
}

/// Peak `|x|` over samples `[a, b)`, refined by a three-point parabola.
fn peak_amplitude(t: &[f64], x: &[f64], a: usize, b: usize) -> f64 {
    if a >= b {
        return 0.0;
    }
    let k = (a..b)
        .max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs()))
        .unwrap();
    let peak = x[k].abs();
    if k == 0 || k + 1 >= x.len() || peak == 0.0 {
        return peak;
    }
    let s = x[k].signum();
    let (t0, t1, t2) = (t[k - 1], t[k], t[k + 1]);
    let (y0, y1, y2) = (s * x[k - 1], s * x[k], s * x[k + 1]);
    // Newton form of the interpolating parabola.
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let curv = (d12 - d01) / (t2 - t0);
    if !(curv < 0.0) {
        return peak;
    }
    // y(t) = y1 + slope1 (t - t1) + curv (t - t0)(t - t1) ... rewritten around t1.
    let slope1 = d01 + curv * (t1 - t0);
    let dt = -slope1 / (2.0 * curv);
    if dt.abs() > (t2 - t0) {
        return peak;
    }
    (y1 + slope1 * dt + curv * dt * dt).max(peak)
}
