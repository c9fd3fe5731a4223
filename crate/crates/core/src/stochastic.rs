//! Monte Carlo check of the covariance propagation.
//!
//! The linearized fluctuations are sampled as a classical linear SDE,
//! `du = A(t) u dt + √D dW`, with Euler–Maruyama steps. Gaussian white noise
//! with the symmetrized strengths reproduces exactly the second moments that
//! the Lyapunov equation evolves; it says nothing about higher-order quantum
//! statistics.
//!
//! Every trajectory owns a ChaCha stream keyed by `(seed, index)` and
//! trajectories are summed in fixed chunks in index order, so estimates are
//! bit-identical however the chunks are scheduled.

use nalgebra::{Matrix6, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::covariance::{diffusion_matrix, drift_matrix, CovMatrix6, DriftConvention};
use crate::error::{Error, Result};
use crate::meanfield::TrajectorySeries;
use crate::model::SystemParams;

/// Drift matrices along the Euler–Maruyama grid.
#[derive(Debug, Clone, PartialEq)]
pub enum DriftPath {
    Constant(Matrix6<f64>),
    /// `A` at the start of each step.
    Sampled(Vec<Matrix6<f64>>),
}

impl DriftPath {
    #[inline]
    fn at(&self, k: usize) -> &Matrix6<f64> {
        match self {
            DriftPath::Constant(a) => a,
            DriftPath::Sampled(v) => &v[k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSde {
    pub t0: f64,
    pub step: f64,
    pub n_steps: usize,
    pub drift: DriftPath,
    /// Diagonal of `D`.
    pub diffusion: Vector6<f64>,
}

impl LinearSde {
    pub fn constant(
        a: Matrix6<f64>,
        diffusion: Vector6<f64>,
        step: f64,
        horizon: f64,
    ) -> Result<Self> {
        let n_steps = steps_for(step, horizon)?;
        let sde = Self {
            t0: 0.0,
            step,
            n_steps,
            drift: DriftPath::Constant(a),
            diffusion,
        };
        sde.check()?;
        Ok(sde)
    }

    /// Builds `A(t)` from a mean-field series sampled on the step grid.
    ///
    /// `series` must hold a sample at `t0 + k*step` for every step `k` of the horizon.
    pub fn from_mean_field(
        params: &SystemParams,
        series: &TrajectorySeries,
        convention: DriftConvention,
        step: f64,
        horizon: f64,
        zero_diffusion: bool,
    ) -> Result<Self> {
        let n_steps = steps_for(step, horizon)?;
        let Some(first) = series.states.first() else {
            return Err(Error::Mismatch("empty mean-field series".into()));
        };
        let t0 = first.t;
        if series.len() < n_steps {
            return Err(Error::Mismatch(format!(
                "mean-field series has {} samples, {n_steps} steps requested",
                series.len()
            )));
        }
        let mut drifts = Vec::with_capacity(n_steps);
        for (k, s) in series.states.iter().take(n_steps).enumerate() {
            let expected = t0 + k as f64 * step;
            if (s.t - expected).abs() > 1e-9 * step.max(expected.abs() * 1e-6) {
                return Err(Error::Mismatch(format!(
                    "mean-field sample {k} at t = {} but the step grid needs {expected}",
                    s.t
                )));
            }
            drifts.push(drift_matrix(s, params, convention));
        }
        let diffusion = if zero_diffusion {
            Vector6::zeros()
        } else {
            diffusion_matrix(params).diagonal()
        };
        let sde = Self {
            t0,
            step,
            n_steps,
            drift: DriftPath::Sampled(drifts),
            diffusion,
        };
        sde.check()?;
        Ok(sde)
    }

    fn check(&self) -> Result<()> {
        if self
            .diffusion
            .iter()
            .any(|d| !(*d >= 0.0) || !d.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "diffusion must be finite and >= 0, got {:?}",
                self.diffusion
            )));
        }
        let max_a = match &self.drift {
            DriftPath::Constant(a) => a.amax(),
            DriftPath::Sampled(v) => v.iter().map(|a| a.amax()).fold(0.0, f64::max),
        };
        if !(self.step * max_a < 0.1) {
            return Err(Error::InvalidArgument(format!(
                "step {} too large for max|A| = {max_a} (need step*max|A| < 0.1)",
                self.step
            )));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.t0 + self.n_steps as f64 * self.step
    }

    /// Step index whose end lands on `t`.
    fn step_index(&self, t: f64) -> Result<usize> {
        let k = ((t - self.t0) / self.step).round();
        if k < 0.0
            || k as usize > self.n_steps
            || (self.t0 + k * self.step - t).abs() > 1e-9 * self.step.max(1e-12) * 1e3
        {
            return Err(Error::Mismatch(format!(
                "time {t} is not on the step grid of {} from {}",
                self.step, self.t0
            )));
        }
        Ok(k as usize)
    }
}

fn steps_for(step: f64, horizon: f64) -> Result<usize> {
    if !(step > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step {step} and horizon {horizon} must be positive"
        )));
    }
    let n = (horizon / step).round();
    if (n * step - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} is not a multiple of step {step}"
        )));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub seed: u64,
    /// Trajectories per work item.
    pub chunk: usize,
}

impl EnsembleConfig {
    pub const MIN_TRAJECTORIES: usize = 100;

    pub fn new(n_traj: usize, seed: u64) -> Self {
        Self {
            n_traj,
            seed,
            chunk: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEstimate {
    pub t: f64,
    pub covariance: CovMatrix6,
    /// Standard error of each covariance entry.
    pub std_error: Matrix6<f64>,
    /// Trajectories that contributed.
    pub n_traj: usize,
    /// Trajectories dropped for non-finite values.
    pub failed: usize,
    pub seed: u64,
    pub horizon: f64,
}

/// A square root `L` with `L Lᵀ = V`, negative eigenvalues clipped to zero.
pub fn covariance_root(v: &CovMatrix6) -> Matrix6<f64> {
    let eig = v.symmetrized().into_matrix().symmetric_eigen();
    let mut l = eig.eigenvectors;
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        for i in 0..6 {
            l[(i, j)] *= s;
        }
    }
    l
}

/// The RNG for trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One sample path, recorded after each step count in `record_steps` (ascending).
pub fn sample_path(
    sde: &LinearSde,
    root_v0: &Matrix6<f64>,
    rng: &mut ChaCha8Rng,
    record_steps: &[usize],
) -> Option<Vec<Vector6<f64>>> {
    let mut z = Vector6::zeros();
    for zi in z.iter_mut() {
        *zi = StandardNormal.sample(rng);
    }
    let mut u = root_v0 * z;
    let noise = sde.diffusion.map(|d| (d * sde.step).sqrt());
    let mut out = Vec::with_capacity(record_steps.len());
    let mut next = record_steps.iter().peekable();
    let mut k = 0;
    loop {
        while next.peek() == Some(&&k) {
            if !u.iter().all(|x| x.is_finite()) {
                return None;
            }
            out.push(u);
            next.next();
        }
        if k == sde.n_steps || next.peek().is_none() {
            break;
        }
        let du = sde.drift.at(k) * u * sde.step;
        u += du;
        for i in 0..6 {
            if noise[i] != 0.0 {
                let w: f64 = StandardNormal.sample(rng);
                u[i] += noise[i] * w;
            }
        }
        k += 1;
    }
    Some(out)
}

#[derive(Clone)]
struct Moments {
    /// Per record time: sums of `u_i u_j` and of `(u_i u_j)²`.
    first: Vec<Matrix6<f64>>,
    second: Vec<Matrix6<f64>>,
    count: usize,
    failed: usize,
}

impl Moments {
    fn zeros(n_times: usize) -> Self {
        Self {
            first: vec![Matrix6::zeros(); n_times],
            second: vec![Matrix6::zeros(); n_times],
            count: 0,
            failed: 0,
        }
    }

    fn add_path(&mut self, path: &[Vector6<f64>]) {
        for (r, u) in path.iter().enumerate() {
            let outer = u * u.transpose();
            self.first[r] += outer;
            self.second[r] += outer.component_mul(&outer);
        }
        self.count += 1;
    }

    fn merge(&mut self, other: &Moments) {
        for r in 0..self.first.len() {
            self.first[r] += other.first[r];
            self.second[r] += other.second[r];
        }
        self.count += other.count;
        self.failed += other.failed;
    }
}

/// Zero-mean sample covariance and standard errors at each of `times`.
pub fn simulate_ensemble(
    sde: &LinearSde,
    v0: &CovMatrix6,
    times: &[f64],
    cfg: &EnsembleConfig,
) -> Result<Vec<EnsembleEstimate>> {
    if cfg.n_traj < EnsembleConfig::MIN_TRAJECTORIES {
        return Err(Error::InvalidArgument(format!(
            "need at least {} trajectories, got {}",
            EnsembleConfig::MIN_TRAJECTORIES,
            cfg.n_traj
        )));
    }
    if cfg.chunk == 0 {
        return Err(Error::InvalidArgument("chunk size must be positive".into()));
    }
    let record_steps: Vec<usize> = times
        .iter()
        .map(|&t| sde.step_index(t))
        .collect::<Result<_>>()?;
    if record_steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "record times must be strictly increasing".into(),
        ));
    }
    let root = covariance_root(v0);
    let n_chunks = cfg.n_traj.div_ceil(cfg.chunk);
    let chunks: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * cfg.chunk;
            let hi = (lo + cfg.chunk).min(cfg.n_traj);
            let mut m = Moments::zeros(record_steps.len());
            for idx in lo..hi {
                let mut rng = trajectory_rng(cfg.seed, idx as u64);
                match sample_path(sde, &root, &mut rng, &record_steps) {
                    Some(path) => m.add_path(&path),
                    None => m.failed += 1,
                }
            }
            m
        })
        .collect();
    let mut total = Moments::zeros(record_steps.len());
    for c in &chunks {
        total.merge(c);
    }
    if total.count < 2 {
        return Err(Error::Degenerate(format!(
            "only {} of {} trajectories stayed finite",
            total.count, cfg.n_traj
        )));
    }
    let n = total.count as f64;
    Ok(times
        .iter()
        .enumerate()
        .map(|(r, &t)| {
            let mean = total.first[r] / n;
            let mean = (mean + mean.transpose()) * 0.5;
            let mean_sq = total.second[r] / n;
            let se = Matrix6::from_fn(|i, j| {
                ((mean_sq[(i, j)] - mean[(i, j)].powi(2)).max(0.0) / (n - 1.0)).sqrt()
            });
            EnsembleEstimate {
                t,
                covariance: CovMatrix6::from_matrix(mean),
                std_error: se,
                n_traj: total.count,
                failed: total.failed,
                seed: cfg.seed,
                horizon: sde.horizon(),
            }
        })
        .collect())
}

/// Standard errors below this are compared absolutely.
pub const SE_FLOOR: f64 = 1e-15;
/// Absolute tolerance for those entries.
pub const ABS_TOLERANCE: f64 = 1e-12;

/// Largest `|V - V_mc| / SE` over the upper triangle.
///
/// Entries whose standard error is below [`SE_FLOOR`] contribute 0 when they
/// agree to [`ABS_TOLERANCE`] and `+∞` otherwise.
pub fn compare(v: &CovMatrix6, t: f64, est: &EnsembleEstimate) -> Result<f64> {
    if (t - est.t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::Mismatch(format!(
            "covariance at t = {t}, estimate at t = {}",
            est.t
        )));
    }
    let mut worst: f64 = 0.0;
    for i in 0..6 {
        for j in i..6 {
            let diff = (v[(i, j)] - est.covariance[(i, j)]).abs();
            let se = est.std_error[(i, j)];
            let z = if se < SE_FLOOR {
                if diff <= ABS_TOLERANCE {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                diff / se
            };
            worst = worst.max(z);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::initial_covariance;

    fn frozen(n_traj: usize, seed: u64) -> EnsembleEstimate {
        let sde = LinearSde::constant(Matrix6::zeros(), Vector6::zeros(), 0.1, 1.0).unwrap();
        let v0 = initial_covariance(2.0).unwrap();
        simulate_ensemble(&sde, &v0, &[1.0], &EnsembleConfig::new(n_traj, seed))
            .unwrap()
            .pop()
            .unwrap()
    }

    #[test]
    fn root_reconstructs() {
        let mut m = Matrix6::identity() * 2.0;
        m[(0, 3)] = 0.7;
        m[(3, 0)] = 0.7;
        let v = CovMatrix6::from_matrix(m);
        let l = covariance_root(&v);
        assert!((l * l.transpose() - m).amax() < 1e-12);
    }

    #[test]
    fn frozen_gaussian_keeps_v0() {
        let est = frozen(20_000, 3);
        let v0 = initial_covariance(2.0).unwrap();
        let z = compare(&v0, 1.0, &est).unwrap();
        assert!(z < 4.5, "z = {z}");
        assert_eq!(est.n_traj, 20_000);
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        assert_eq!(frozen(500, 9), frozen(500, 9));
        assert_ne!(frozen(500, 9).covariance, frozen(500, 10).covariance);
    }

    #[test]
    fn chunking_does_not_change_result() {
        let sde = LinearSde::constant(Matrix6::zeros(), Vector6::repeat(1.0), 0.1, 1.0).unwrap();
        let v0 = initial_covariance(0.0).unwrap();
        let a = simulate_ensemble(
            &sde,
            &v0,
            &[1.0],
            &EnsembleConfig {
                chunk: 64,
                ..EnsembleConfig::new(300, 1)
            },
        )
        .unwrap();
        let b = simulate_ensemble(
            &sde,
            &v0,
            &[1.0],
            &EnsembleConfig {
                chunk: 64,
                ..EnsembleConfig::new(300, 1)
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn compare_definition() {
        let v = initial_covariance(0.0).unwrap();
        let mut est = EnsembleEstimate {
            t: 0.0,
            covariance: v,
            std_error: Matrix6::repeat(0.01),
            n_traj: 100,
            failed: 0,
            seed: 0,
            horizon: 0.0,
        };
        assert_eq!(compare(&v, 0.0, &est).unwrap(), 0.0);
        let mut m = v.into_matrix();
        m[(1, 2)] += 0.01;
        est.covariance = CovMatrix6::from_matrix(m);
        assert!((compare(&v, 0.0, &est).unwrap() - 1.0).abs() < 1e-12);
        assert!(compare(&v, 1.0, &est).is_err());
        est.std_error = Matrix6::zeros();
        assert_eq!(compare(&v, 0.0, &est).unwrap(), f64::INFINITY);
    }

    #[test]
    fn rejects_small_ensembles_and_coarse_steps() {
        let sde = LinearSde::constant(Matrix6::zeros(), Vector6::zeros(), 0.1, 1.0).unwrap();
        let v0 = initial_covariance(0.0).unwrap();
        assert!(simulate_ensemble(&sde, &v0, &[1.0], &EnsembleConfig::new(50, 0)).is_err());
        assert!(simulate_ensemble(&sde, &v0, &[0.55], &EnsembleConfig::new(200, 0)).is_err());
        assert!(
            LinearSde::constant(Matrix6::identity() * 2.0, Vector6::zeros(), 0.1, 1.0).is_err()
        );
    }
}
