//! Phases, locking of the phase sum, and fluctuation measures built on the
//! covariance matrix.

use std::f64::consts::{PI, TAU};

use crate::covariance::{CovMatrix6, PD, PM, QD, QM};
use crate::error::{Error, Result};
use crate::meanfield::TrajectorySeries;

/// Which oscillator to read phases from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Mechanical,
    Atomic,
}

/// Unwrapped phase and `n = (q² + p²)/2` of a single mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseTrack {
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    pub n: Vec<f64>,
    /// Indices where `(q, p) = (0, 0)`; the phase there repeats the previous one.
    pub undefined: Vec<usize>,
}

/// Quadrant-aware phases, unwrapped so that adjacent samples differ by less than π.
pub fn unwrap_phases(t: &[f64], q: &[f64], p: &[f64]) -> PhaseTrack {
    assert_eq!(q.len(), p.len());
    assert_eq!(t.len(), q.len());
    let mut out = PhaseTrack {
        t: t.to_vec(),
        phi: Vec::with_capacity(q.len()),
        n: Vec::with_capacity(q.len()),
        undefined: Vec::new(),
    };
    let mut prev: Option<f64> = None;
    for (i, (&qi, &pi)) in q.iter().zip(p).enumerate() {
        out.n.push(0.5 * (qi * qi + pi * pi));
        if qi == 0.0 && pi == 0.0 {
            out.undefined.push(i);
            out.phi.push(prev.unwrap_or(0.0));
            continue;
        }
        let raw = pi.atan2(qi);
        let phi = match prev {
            None => raw,
            Some(last) => raw + TAU * ((last - raw) / TAU).round(),
        };
        out.phi.push(phi);
        prev = Some(phi);
    }
    out
}

pub fn phase_series(series: &TrajectorySeries, mode: Mode) -> PhaseTrack {
    let t: Vec<f64> = series.states.iter().map(|s| s.t).collect();
    let (q, p): (Vec<f64>, Vec<f64>) = match mode {
        Mode::Mechanical => series.states.iter().map(|s| (s.q_m, s.p_m)).unzip(),
        Mode::Atomic => series.states.iter().map(|s| (s.q_d, s.p_d)).unzip(),
    };
    unwrap_phases(&t, &q, &p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRecord {
    pub t: f64,
    pub phi_m: f64,
    pub phi_d: f64,
    pub n_m: f64,
    pub n_d: f64,
    pub sum: f64,
    pub diff: f64,
}

impl PhaseRecord {
    pub fn new(t: f64, phi_m: f64, phi_d: f64, n_m: f64, n_d: f64) -> Self {
        Self {
            t,
            phi_m,
            phi_d,
            n_m,
            n_d,
            sum: phi_m + phi_d,
            diff: phi_m - phi_d,
        }
    }

    pub fn from_quadratures(t: f64, q_m: f64, p_m: f64, q_d: f64, p_d: f64) -> Self {
        Self::new(
            t,
            p_m.atan2(q_m),
            p_d.atan2(q_d),
            0.5 * (q_m * q_m + p_m * p_m),
            0.5 * (q_d * q_d + p_d * p_d),
        )
    }
}

/// Paired mechanical/atomic phase records for every sample of `series`.
pub fn phase_records(series: &TrajectorySeries) -> Vec<PhaseRecord> {
    let m = phase_series(series, Mode::Mechanical);
    let d = phase_series(series, Mode::Atomic);
    (0..m.t.len())
        .map(|i| PhaseRecord::new(m.t[i], m.phi[i], d.phi[i], m.n[i], d.n[i]))
        .collect()
}

/// Circular mean in `(-π, π]` and mean resultant length `R`.
pub fn circular_mean(angles: &[f64]) -> (f64, f64) {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let (s, c) = (s / n, c / n);
    (wrap_pi(s.atan2(c)), (s * s + c * c).sqrt())
}

/// `sqrt(-2 ln R)`
pub fn circular_std(angles: &[f64]) -> f64 {
    let (_, r) = circular_mean(angles);
    if r <= 0.0 {
        return f64::INFINITY;
    }
    (-2.0 * r.min(1.0).ln()).max(0.0).sqrt()
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    let w = a - TAU * ((a + PI) / TAU).floor();
    if w <= -PI {
        w + TAU
    } else if w > PI {
        w - TAU
    } else {
        w
    }
}

pub const DEFAULT_LOCKING_THRESHOLD: f64 = 0.1;
pub const MIN_LOCKING_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockingVerdict {
    pub locked: bool,
    pub locked_value: f64,
    pub trailing_std: f64,
    pub samples: usize,
}

/// Tests whether `angles` stay put on the circle over the trailing window of `times`.
pub fn detect_locking(
    times: &[f64],
    angles: &[f64],
    trailing_window: f64,
    threshold: f64,
) -> Result<LockingVerdict> {
    if times.len() != angles.len() {
        return Err(Error::Mismatch(format!(
            "{} times but {} angles",
            times.len(),
            angles.len()
        )));
    }
    let window = trailing(times, angles, trailing_window);
    if window.len() < MIN_LOCKING_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "trailing window holds {} samples, need at least {MIN_LOCKING_SAMPLES}",
            window.len()
        )));
    }
    let (mean, _) = circular_mean(window);
    let std = circular_std(window);
    Ok(LockingVerdict {
        locked: std < threshold,
        locked_value: mean,
        trailing_std: std,
        samples: window.len(),
    })
}

/// The suffix of `values` whose times lie within `span` of the last time.
pub fn trailing<'a>(times: &[f64], values: &'a [f64], span: f64) -> &'a [f64] {
    let Some(&t_last) = times.last() else {
        return &values[..0];
    };
    let start = times.partition_point(|&t| t < t_last - span);
    &values[start..]
}

/// `max - min` of `values`, or 0 for an empty slice.
pub fn peak_to_peak(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

pub const DEFAULT_AMPLITUDE_FLOOR: f64 = 1e-12;

/// `⟨(δφ_m + δφ_d)²⟩` as a quadratic form over `V`.
pub fn phase_sum_variance(v: &CovMatrix6, record: &PhaseRecord, floor: f64) -> Result<f64> {
    if !(record.n_m > floor) || !(record.n_d > floor) {
        return Err(Error::UndefinedVariance {
            n_m: record.n_m,
            n_d: record.n_d,
        });
    }
    let am = 1.0 / (2.0 * record.n_m).sqrt();
    let ad = 1.0 / (2.0 * record.n_d).sqrt();
    let mut w = [0.0; 6];
    w[QM] = -record.phi_m.sin() * am;
    w[PM] = record.phi_m.cos() * am;
    w[QD] = -record.phi_d.sin() * ad;
    w[PD] = record.phi_d.cos() * ad;
    Ok(v.quadratic_form(&w).max(0.0))
}

fn rotated_momentum_weights(phi_m: f64, phi_d: f64, sign: f64) -> [f64; 6] {
    let mut w = [0.0; 6];
    w[QM] = -phi_m.sin();
    w[PM] = phi_m.cos();
    w[QD] = -sign * phi_d.sin();
    w[PD] = sign * phi_d.cos();
    w
}

fn inverse_half(x: f64) -> f64 {
    if x == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (2.0 * x)
    }
}

/// `(S_p, S_a)`: inverse variances of the difference and the sum of the
/// rotated momenta `δp'_j = -sin φ_j δq_j + cos φ_j δp_j`.
pub fn sync_measures(v: &CovMatrix6, phi_m: f64, phi_d: f64) -> (f64, f64) {
    let minus = v.quadratic_form(&rotated_momentum_weights(phi_m, phi_d, -1.0));
    let plus = v.quadratic_form(&rotated_momentum_weights(phi_m, phi_d, 1.0));
    (inverse_half(minus), inverse_half(plus))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncReport {
    pub locked: bool,
    pub locked_value: f64,
    pub trailing_std: f64,
    pub variance_phase_sum: Option<f64>,
    pub s_p: Option<f64>,
    pub s_a: Option<f64>,
    pub discord: Option<f64>,
}

impl SyncReport {
    pub fn from_verdict(v: &LockingVerdict) -> Self {
        Self {
            locked: v.locked,
            locked_value: v.locked_value,
            trailing_std: v.trailing_std,
            variance_phase_sum: None,
            s_p: None,
            s_a: None,
            discord: None,
        }
    }

    /// Fills the covariance-based fields from `v` at the phases of `record`.
    pub fn with_covariance(mut self, v: &CovMatrix6, record: &PhaseRecord) -> Self {
        self.variance_phase_sum = phase_sum_variance(v, record, DEFAULT_AMPLITUDE_FLOOR).ok();
        let (s_p, s_a) = sync_measures(v, record.phi_m, record.phi_d);
        self.s_p = Some(s_p);
        self.s_a = Some(s_a);
        self
    }
}
