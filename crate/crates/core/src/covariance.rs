//! Linearized fluctuation dynamics: drift and diffusion matrices and the
//! covariance Lyapunov equation `dV/dt = A V + V Aᵀ + D`, integrated jointly
//! with the mean field that `A` depends on.
//!
//! Fluctuation vectors are ordered `(δq_m, δp_m, δq_d, δp_d, δq_c, δp_c)`.
//! Vacuum variance is 1/2 per quadrature.

use std::f64::consts::SQRT_2;
use std::ops::Index;

use nalgebra::{DMatrix, Matrix6, SMatrix};

use crate::error::{Error, Result};
use crate::meanfield::{rhs_into, Sampling, SolverConfig, SolverMetadata, TrajectorySeries};
use crate::model::{validate, MeanFieldState, SystemParams};
use crate::ode::Stepper;

pub const QM: usize = 0;
pub const PM: usize = 1;
pub const QD: usize = 2;
pub const PD: usize = 3;
pub const QC: usize = 4;
pub const PC: usize = 5;

/// Short labels in covariance order, used for CSV headers.
pub const LABELS: [&str; 6] = ["qm", "pm", "qd", "pd", "qc", "pc"];

/// Symmetric 6×6 covariance of the fluctuation quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovMatrix6(Matrix6<f64>);

impl CovMatrix6 {
    /// Wraps `m` without symmetrizing; use [`check_physicality`] to inspect it.
    pub fn from_matrix(m: Matrix6<f64>) -> Self {
        Self(m)
    }

    pub fn zeros() -> Self {
        Self(Matrix6::zeros())
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix6<f64> {
        self.0
    }

    pub fn symmetrized(&self) -> Self {
        Self((self.0 + self.0.transpose()) * 0.5)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// The 21 upper-triangle entries, row-major.
    pub fn upper_triangle(&self) -> [f64; 21] {
        let mut out = [0.0; 21];
        let mut k = 0;
        for i in 0..6 {
            for j in i..6 {
                out[k] = self.0[(i, j)];
                k += 1;
            }
        }
        out
    }

    /// `wᵀ V w`
    pub fn quadratic_form(&self, w: &[f64; 6]) -> f64 {
        let mut acc = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                acc += w[i] * self.0[(i, j)] * w[j];
            }
        }
        acc
    }
}

impl Index<(usize, usize)> for CovMatrix6 {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Header names `V_qm_qm, V_qm_pm, ...` for the upper triangle.
pub fn upper_triangle_labels(prefix: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(21);
    for i in 0..6 {
        for j in i..6 {
            out.push(format!("{prefix}_{}_{}", LABELS[i], LABELS[j]));
        }
    }
    out
}

/// Canonical form with one `[[0, 1], [-1, 0]]` block per mode.
#[derive(Debug, Clone, Copy, Default)]
pub struct SymplecticForm;

impl SymplecticForm {
    pub fn matrix() -> Matrix6<f64> {
        let mut m = Matrix6::zeros();
        for k in 0..3 {
            m[(2 * k, 2 * k + 1)] = 1.0;
            m[(2 * k + 1, 2 * k)] = -1.0;
        }
        m
    }
}

/// How the atom–cavity entries of the drift matrix are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftConvention {
    /// Atom–cavity coupling `-√2 g_d`, the linearization of the equations of motion.
    #[default]
    Corrected,
    /// Atom–cavity coupling `-√2 g_m`, as in the published matrix.
    StrictPaper,
}

impl std::str::FromStr for DriftConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "corrected" => Ok(Self::Corrected),
            "strict_paper" => Ok(Self::StrictPaper),
            other => Err(format!(
                "unknown drift convention `{other}` (expected corrected or strict_paper)"
            )),
        }
    }
}

/// Drift matrix of the fluctuations about `state`.
pub fn drift_matrix(
    state: &MeanFieldState,
    params: &SystemParams,
    convention: DriftConvention,
) -> Matrix6<f64> {
    drift_from_array(&state.to_array(), params, convention)
}

#[inline]
fn drift_from_array(y: &[f64; 6], p: &SystemParams, convention: DriftConvention) -> Matrix6<f64> {
    let [q_c, p_c, q_m, _p_m, _q_d, _p_d] = *y;
    let atom_cavity = SQRT_2
        * match convention {
            DriftConvention::Corrected => p.g_d,
            DriftConvention::StrictPaper => p.g_m,
        };
    let detuning = p.delta + p.g_m * q_m;
    let mut a = Matrix6::zeros();
    a[(QM, PM)] = 1.0;

    a[(PM, QM)] = -1.0;
    a[(PM, PM)] = -p.gamma;
    a[(PM, QC)] = -p.g_m * q_c;
    a[(PM, PC)] = -p.g_m * p_c;

    a[(QD, QD)] = -p.gamma_a;
    a[(QD, PD)] = -p.omega_sigma;

    a[(PD, QD)] = p.omega_sigma;
    a[(PD, PD)] = -p.gamma_a;
    a[(PD, QC)] = -atom_cavity;

    a[(QC, QM)] = p.g_m * p_c;
    a[(QC, QC)] = -p.kappa;
    a[(QC, PC)] = detuning;

    a[(PC, QM)] = -p.g_m * q_c;
    a[(PC, QD)] = -atom_cavity;
    a[(PC, QC)] = -detuning;
    a[(PC, PC)] = -p.kappa;
    a
}

/// `diag(0, γ(2n̄+1), Γ, Γ, κ, κ)`
pub fn diffusion_matrix(params: &SystemParams) -> Matrix6<f64> {
    Matrix6::from_diagonal(&nalgebra::Vector6::new(
        0.0,
        params.gamma * (2.0 * params.n_bar + 1.0),
        params.gamma_a,
        params.gamma_a,
        params.kappa,
        params.kappa,
    ))
}

/// Thermal mechanics, vacuum atoms and cavity.
pub fn initial_covariance(n_bar: f64) -> Result<CovMatrix6> {
    if !(n_bar >= 0.0) || !n_bar.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "n_bar must be finite and >= 0, got {n_bar}"
        )));
    }
    let th = n_bar + 0.5;
    Ok(CovMatrix6(Matrix6::from_diagonal(&nalgebra::Vector6::new(
        th, th, 0.5, 0.5, 0.5, 0.5,
    ))))
}

/// `A V + V Aᵀ + D`
#[inline]
pub fn lyapunov_rhs(a: &Matrix6<f64>, v: &Matrix6<f64>, d: &Matrix6<f64>) -> Matrix6<f64> {
    let av = a * v;
    av + av.transpose() + d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityReport {
    /// `max |V - Vᵀ|`
    pub symmetric_defect: f64,
    /// Smallest eigenvalue of the Hermitian matrix `V + iΩ/2`.
    pub min_uncertainty_eigenvalue: f64,
    /// `max |V|`, the scale for the relative symmetry bound.
    pub max_abs: f64,
}

/// Bounds applied to a [`PhysicalityReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityTolerance {
    /// Allowed `max|V - Vᵀ| / max|V|`.
    pub symmetric_rel: f64,
    /// Allowed negative excursion of the smallest eigenvalue, absolute part.
    pub eigen_abs: f64,
    /// Additional allowance proportional to `max|V|`.
    pub eigen_rel: f64,
}

impl PhysicalityTolerance {
    /// `max|V−Vᵀ| ≤ 1e-9 max|V|` and `min eig(V + iΩ/2) ≥ −1e-8`.
    pub const STRICT: Self = Self {
        symmetric_rel: 1e-9,
        eigen_abs: 1e-8,
        eigen_rel: 0.0,
    };

    /// Abort threshold for long propagations: the strict bound plus an
    /// allowance of `1e-9 max|V|` for the eigenvalue, since rounding alone
    /// perturbs a matrix of norm `‖V‖` by about `1e-16 ‖V‖`.
    pub const SCALED: Self = Self {
        symmetric_rel: 1e-9,
        eigen_abs: 1e-8,
        eigen_rel: 1e-9,
    };

    pub fn accepts(&self, r: &PhysicalityReport) -> bool {
        r.symmetric_defect <= self.symmetric_rel * r.max_abs
            && r.min_uncertainty_eigenvalue >= -(self.eigen_abs + self.eigen_rel * r.max_abs)
    }
}

/// Symmetry defect and the smallest eigenvalue of `V + iΩ/2`.
pub fn check_physicality(v: &CovMatrix6) -> PhysicalityReport {
    let m = v.matrix();
    let defect = (m - m.transpose()).amax();
    // V + iΩ/2 = X + iY is Hermitian; [[X, -Y], [Y, X]] is its real symmetric
    // embedding with every eigenvalue doubled. X is the symmetric part of V.
    let x = (m + m.transpose()) * 0.5;
    let y = SymplecticForm::matrix() * 0.5;
    let mut big = SMatrix::<f64, 12, 12>::zeros();
    big.fixed_view_mut::<6, 6>(0, 0).copy_from(&x);
    big.fixed_view_mut::<6, 6>(6, 6).copy_from(&x);
    big.fixed_view_mut::<6, 6>(0, 6).copy_from(&(-y));
    big.fixed_view_mut::<6, 6>(6, 0).copy_from(&y);
    let min_eig = smallest_eigenvalue(&big);
    PhysicalityReport {
        symmetric_defect: defect,
        min_uncertainty_eigenvalue: min_eig,
        max_abs: m.amax(),
    }
}

/// Smallest eigenvalue of a symmetric matrix, accurate far below `ε‖M‖`.
///
/// A plain eigen-solve only resolves eigenvalues to about `ε‖M‖`, which for
/// a strongly amplified covariance is larger than the bound being checked.
/// The eigenvectors of the lowest cluster are accurate to `O(ε)` however, so
/// a Rayleigh–Ritz step on them, with the projection `XᵀMX` accumulated in
/// compensated arithmetic, recovers the small eigenvalue to `O(ε²‖M‖)`.
fn smallest_eigenvalue(m: &SMatrix<f64, 12, 12>) -> f64 {
    const N: usize = 12;
    let eig = m.symmetric_eigen();
    let lo = eig.eigenvalues.min();
    let window = 1.0f64.max(1e-6 * m.amax());
    let cols: Vec<usize> = (0..N)
        .filter(|&k| eig.eigenvalues[k] <= lo + window)
        .collect();
    let r = cols.len();
    let x = DMatrix::from_fn(N, r, |i, c| eig.eigenvectors[(i, cols[c])]);
    let mut k = DMatrix::zeros(r, r);
    let mut g = DMatrix::zeros(r, r);
    for c in 0..r {
        for d in c..r {
            let mut kk = Compensated::default();
            let mut gg = Compensated::default();
            for i in 0..N {
                gg.add_product(x[(i, c)], x[(i, d)]);
                for j in 0..N {
                    kk.add_triple(x[(i, c)], m[(i, j)], x[(j, d)]);
                }
            }
            k[(c, d)] = kk.value();
            k[(d, c)] = k[(c, d)];
            g[(c, d)] = gg.value();
            g[(d, c)] = g[(c, d)];
        }
    }
    // Ritz values solve K c = λ G c with G = XᵀX ≈ I.
    let Some(chol) = g.cholesky() else {
        return lo;
    };
    let l = chol.l();
    let Some(tmp) = l.solve_lower_triangular(&k) else {
        return lo;
    };
    let Some(reduced) = l.solve_lower_triangular(&tmp.transpose()) else {
        return lo;
    };
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    reduced.symmetric_eigen().eigenvalues.min()
}

/// Neumaier summation with error-free products.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    err: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, v: f64) {
        let s = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.err += (self.sum - s) + v;
        } else {
            self.err += (v - s) + self.sum;
        }
        self.sum = s;
    }

    #[inline]
    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.err += a.mul_add(b, -p);
    }

    #[inline]
    fn add_triple(&mut self, a: f64, b: f64, c: f64) {
        let p = a * b;
        let ep = a.mul_add(b, -p);
        self.add_product(p, c);
        self.err += ep * c;
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

/// One stored covariance sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovSample {
    pub t: f64,
    pub v: CovMatrix6,
    pub physicality: PhysicalityReport,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovarianceSeries {
    pub samples: Vec<CovSample>,
}

impl CovarianceSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&CovSample> {
        self.samples.last()
    }

    pub fn nearest(&self, t: f64) -> Option<&CovSample> {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    /// Worst symmetric defect relative to `max|V|` and worst eigenvalue over all samples.
    pub fn worst_physicality(&self) -> Option<(f64, f64)> {
        if self.samples.is_empty() {
            return None;
        }
        let rel = self
            .samples
            .iter()
            .map(|s| {
                if s.physicality.max_abs == 0.0 {
                    0.0
                } else {
                    s.physicality.symmetric_defect / s.physicality.max_abs
                }
            })
            .fold(0.0, f64::max);
        let eig = self
            .samples
            .iter()
            .map(|s| s.physicality.min_uncertainty_eigenvalue)
            .fold(f64::INFINITY, f64::min);
        Some((rel, eig))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOptions {
    pub solver: SolverConfig,
    /// Where mean-field samples are stored.
    pub mean_field_sampling: Sampling,
    /// Where covariance samples are stored.
    pub covariance_sampling: Sampling,
    pub convention: DriftConvention,
    /// Replaces `D` by zero (diagnostic runs).
    pub zero_diffusion: bool,
    /// Abort when a stored sample fails these bounds; `None` disables the check.
    pub abort_on: Option<PhysicalityTolerance>,
}

impl JointOptions {
    /// Adaptive tolerance for the joint system. The covariance grows to
    /// `~1e10` along the limit cycle while its smallest uncertainty eigenvalue
    /// stays `~1e-8`; looser tolerances leave local errors large enough to
    /// push that eigenvalue negative.
    pub const DEFAULT_TOLERANCE: f64 = 1e-13;
}

impl Default for JointOptions {
    fn default() -> Self {
        Self {
            solver: SolverConfig::adaptive(Self::DEFAULT_TOLERANCE, Self::DEFAULT_TOLERANCE),
            mean_field_sampling: Sampling::uniform(0.5),
            covariance_sampling: Sampling::uniform(10.0),
            convention: DriftConvention::Corrected,
            zero_diffusion: false,
            abort_on: Some(PhysicalityTolerance::SCALED),
        }
    }
}

const JOINT_DIM: usize = 42;

fn pack(y: &[f64; 6], v: &Matrix6<f64>) -> [f64; JOINT_DIM] {
    let mut z = [0.0; JOINT_DIM];
    z[..6].copy_from_slice(y);
    for i in 0..6 {
        for j in 0..6 {
            z[6 + 6 * i + j] = v[(i, j)];
        }
    }
    z
}

#[inline]
fn unpack_v(z: &[f64; JOINT_DIM]) -> Matrix6<f64> {
    Matrix6::from_row_slice(&z[6..])
}

/// Co-integrates the mean field and the covariance from `mf_initial`, `v0` to `t_end`.
///
/// Both share one stepper so `A(t)` is always evaluated on the concurrent
/// mean-field stage values. `V` is re-symmetrized after every step.
pub fn propagate_joint(
    params: &SystemParams,
    mf_initial: &MeanFieldState,
    v0: &CovMatrix6,
    t_end: f64,
    opts: &JointOptions,
) -> Result<(TrajectorySeries, CovarianceSeries)> {
    let params = validate(params)?;
    mf_initial.ensure_finite()?;
    let t0 = mf_initial.t;
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!(
            "t_end = {t_end} must exceed {t0}"
        )));
    }
    if let Some(tol) = &opts.abort_on {
        let r = check_physicality(v0);
        if !tol.accepts(&r) {
            return Err(Error::Unphysical {
                t: t0,
                min_eigenvalue: r.min_uncertainty_eigenvalue,
                symmetric_defect: r.symmetric_defect,
            });
        }
    }
    let diffusion = if opts.zero_diffusion {
        Matrix6::zeros()
    } else {
        diffusion_matrix(&params)
    };
    let convention = opts.convention;

    let mf_times = opts.mean_field_sampling.times(t0, t_end)?;
    let cov_times = opts.covariance_sampling.times(t0, t_end)?;
    let schedule = merge_schedules(&mf_times, &cov_times);

    let mut f = |_t: f64, z: &[f64; JOINT_DIM], dz: &mut [f64; JOINT_DIM]| {
        let y: &[f64; 6] = z[..6].try_into().unwrap();
        let mut dy = [0.0; 6];
        rhs_into(y, &params, &mut dy);
        dz[..6].copy_from_slice(&dy);
        let a = drift_from_array(y, &params, convention);
        let v = unpack_v(z);
        let dv = lyapunov_rhs(&a, &v, &diffusion);
        for i in 0..6 {
            for j in 0..6 {
                dz[6 + 6 * i + j] = dv[(i, j)];
            }
        }
    };
    let mut symmetrize = |_t: f64, z: &mut [f64; JOINT_DIM]| {
        for i in 0..6 {
            for j in (i + 1)..6 {
                let a = 6 + 6 * i + j;
                let b = 6 + 6 * j + i;
                let m = 0.5 * (z[a] + z[b]);
                z[a] = m;
                z[b] = m;
            }
        }
    };

    let mut stepper = Stepper::new(opts.solver.method)?;
    let mut t = t0;
    let mut z = pack(&mf_initial.to_array(), v0.matrix());
    let mut states = Vec::with_capacity(mf_times.len());
    let mut samples = Vec::with_capacity(cov_times.len());
    for (ts, record_mf, record_cov) in schedule {
        stepper.advance_to(&mut f, &mut symmetrize, &mut t, &mut z, ts)?;
        if record_mf {
            let s = MeanFieldState::from_array(t, z[..6].try_into().unwrap());
            s.ensure_finite()?;
            states.push(s);
        }
        if record_cov {
            let v = CovMatrix6(unpack_v(&z));
            let physicality = check_physicality(&v);
            if let Some(tol) = &opts.abort_on {
                if !tol.accepts(&physicality) {
                    return Err(Error::Unphysical {
                        t,
                        min_eigenvalue: physicality.min_uncertainty_eigenvalue,
                        symmetric_defect: physicality.symmetric_defect,
                    });
                }
            }
            samples.push(CovSample { t, v, physicality });
        }
    }
    let series = TrajectorySeries {
        states,
        stride: opts.mean_field_sampling.effective_stride(t0, t_end),
        solver: SolverMetadata::new(opts.solver.method, stepper.stats),
    };
    Ok((series, CovarianceSeries { samples }))
}

/// Propagates `V` under a constant drift `a` and diffusion `d` for `duration`.
///
/// Used for linear time-invariant cases; [`propagate_joint`] handles the
/// drift that follows the mean field.
pub fn propagate_constant(
    a: &Matrix6<f64>,
    d: &Matrix6<f64>,
    v0: &CovMatrix6,
    duration: f64,
    solver: &SolverConfig,
) -> Result<CovMatrix6> {
    if !(duration >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration {duration} must be >= 0"
        )));
    }
    let mut stepper = Stepper::new(solver.method)?;
    let mut z = [0.0; 36];
    z.copy_from_slice(v0.matrix().transpose().as_slice());
    let mut f = |_t: f64, z: &[f64; 36], dz: &mut [f64; 36]| {
        let v = Matrix6::from_row_slice(z);
        let dv = lyapunov_rhs(a, &v, d);
        dz.copy_from_slice(dv.transpose().as_slice());
    };
    let mut symmetrize = |_t: f64, z: &mut [f64; 36]| {
        for i in 0..6 {
            for j in (i + 1)..6 {
                let m = 0.5 * (z[6 * i + j] + z[6 * j + i]);
                z[6 * i + j] = m;
                z[6 * j + i] = m;
            }
        }
    };
    let mut t = 0.0;
    if duration > 0.0 {
        stepper.advance_to(&mut f, &mut symmetrize, &mut t, &mut z, duration)?;
    }
    Ok(CovMatrix6(Matrix6::from_row_slice(&z)))
}

/// Union of two sorted time grids with per-time membership flags.
fn merge_schedules(a: &[f64], b: &[f64]) -> Vec<(f64, bool, bool)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                out.push((x, true, true));
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                out.push((x, true, false));
                i += 1;
            }
            (Some(_), Some(&y)) => {
                out.push((y, false, true));
                j += 1;
            }
            (Some(&x), None) => {
                out.push((x, true, false));
                i += 1;
            }
            (None, Some(&y)) => {
                out.push((y, false, true));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symplectic_form_identities() {
        let o = SymplecticForm::matrix();
        assert_eq!(o.transpose(), -o);
        assert_eq!(o * o, -Matrix6::identity());
    }

    #[test]
    fn drift_at_zero_mean_field() {
        let p = SystemParams::baseline();
        let a = drift_matrix(&MeanFieldState::zero(), &p, DriftConvention::Corrected);
        for (r, c) in [(PM, QC), (PM, PC), (QC, QM), (PC, QM)] {
            assert_eq!(a[(r, c)], 0.0);
        }
        assert_eq!(a[(QC, PC)], p.delta);
        assert_eq!(a[(PC, QC)], -p.delta);
        assert_relative_eq!(a[(PD, QC)], -SQRT_2 * p.g_d);
    }

    #[test]
    fn drift_block_diagonal_without_coupling() {
        let p = SystemParams {
            g_m: 0.0,
            g_d: 0.0,
            ..SystemParams::baseline()
        };
        let s = MeanFieldState {
            q_c: 3.0,
            p_c: -2.0,
            q_m: 5.0,
            ..MeanFieldState::zero()
        };
        let a = drift_matrix(&s, &p, DriftConvention::Corrected);
        for i in 0..6 {
            for j in 0..6 {
                if i / 2 != j / 2 {
                    assert_eq!(a[(i, j)], 0.0, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn strict_convention_uses_optomechanical_coupling() {
        let p = SystemParams {
            g_m: 2e-5,
            g_d: 1e-5,
            ..SystemParams::baseline()
        };
        let s = MeanFieldState::zero();
        let strict = drift_matrix(&s, &p, DriftConvention::StrictPaper);
        let corrected = drift_matrix(&s, &p, DriftConvention::Corrected);
        assert_relative_eq!(strict[(PD, QC)], -SQRT_2 * 2e-5);
        assert_relative_eq!(corrected[(PD, QC)], -SQRT_2 * 1e-5);
        assert_relative_eq!(strict[(PC, QD)], -SQRT_2 * 2e-5);
        let diff = strict - corrected;
        assert_eq!(diff.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn diffusion_examples() {
        let p = SystemParams {
            gamma: 1.0,
            gamma_a: 1.0,
            kappa: 1.0,
            ..SystemParams::baseline()
        };
        assert_eq!(
            diffusion_matrix(&p),
            Matrix6::from_diagonal(&nalgebra::Vector6::new(0.0, 1.0, 1.0, 1.0, 1.0, 1.0))
        );
        let d = diffusion_matrix(&SystemParams::baseline());
        assert_eq!(
            d.diagonal(),
            nalgebra::Vector6::new(0.0, 5e-6, 5e-6, 5e-6, 1.0, 1.0)
        );
    }

    #[test]
    fn initial_covariance_examples() {
        assert_eq!(
            initial_covariance(0.0).unwrap().matrix(),
            &(Matrix6::identity() * 0.5)
        );
        let v = initial_covariance(130.4).unwrap();
        assert_relative_eq!(v[(QM, QM)], 130.9);
        assert_relative_eq!(v[(PM, PM)], 130.9);
        assert_eq!(v[(QC, QC)], 0.5);
        assert!(initial_covariance(-1.0).is_err());
        for n in [0.0, 0.3, 130.4, 1e4] {
            assert!(PhysicalityTolerance::STRICT
                .accepts(&check_physicality(&initial_covariance(n).unwrap())));
        }
    }

    #[test]
    fn vacuum_saturates_uncertainty() {
        let r = check_physicality(&initial_covariance(0.0).unwrap());
        assert_eq!(r.symmetric_defect, 0.0);
        assert!(r.min_uncertainty_eigenvalue.abs() < 1e-15);
    }

    #[test]
    fn sub_vacuum_is_flagged() {
        let v = CovMatrix6::from_matrix(Matrix6::identity() * 0.1);
        let r = check_physicality(&v);
        assert_relative_eq!(r.min_uncertainty_eigenvalue, -0.4, epsilon = 1e-12);
        assert!(!PhysicalityTolerance::STRICT.accepts(&r));
    }

    #[test]
    fn asymmetry_is_measured() {
        let mut m = Matrix6::identity() * 0.5;
        m[(0, 1)] = 1e-3;
        let r = check_physicality(&CovMatrix6::from_matrix(m));
        assert_relative_eq!(r.symmetric_defect, 1e-3);
    }

    #[test]
    fn refined_eigenvalue_resolves_amplified_pure_state() {
        // A pure state squeezed by e^{±r} has min eig(V + iΩ/2) = 0 exactly.
        let r: f64 = 9.0;
        let mut m = Matrix6::identity() * 0.5;
        m[(QM, QM)] = 0.5 * (2.0 * r).exp();
        m[(PM, PM)] = 0.5 * (-2.0 * r).exp();
        let v = CovMatrix6::from_matrix(m);
        let rep = check_physicality(&v);
        assert!(rep.max_abs > 3e7);
        assert!(
            rep.min_uncertainty_eigenvalue.abs() < 1e-12,
            "{}",
            rep.min_uncertainty_eigenvalue
        );
        // Dropping the momentum variance by a relative 1e-6 is a real violation.
        m[(PM, PM)] *= 1.0 - 1e-6;
        let rep = check_physicality(&CovMatrix6::from_matrix(m));
        assert!(rep.min_uncertainty_eigenvalue < 0.0);
    }

    #[test]
    fn refined_eigenvalue_matches_plain_on_small_matrices() {
        let mut m = SMatrix::<f64, 12, 12>::identity();
        m[(0, 1)] = 0.3;
        m[(1, 0)] = 0.3;
        m[(2, 2)] = -0.7;
        m[(7, 7)] = 4.0;
        let plain = m.symmetric_eigenvalues().min();
        assert!((smallest_eigenvalue(&m) - plain).abs() < 1e-14);
    }

    #[test]
    fn schedule_merge() {
        let m = merge_schedules(&[0.0, 1.0, 2.0], &[0.0, 1.5, 2.0]);
        assert_eq!(
            m,
            vec![
                (0.0, true, true),
                (1.0, true, false),
                (1.5, false, true),
                (2.0, true, true)
            ]
        );
    }

    #[test]
    fn unphysical_start_is_rejected() {
        let v = CovMatrix6::from_matrix(Matrix6::identity() * 0.1);
        let r = propagate_joint(
            &SystemParams::baseline(),
            &MeanFieldState::zero(),
            &v,
            1.0,
            &JointOptions::default(),
        );
        assert!(matches!(r, Err(Error::Unphysical { .. })));
    }
}
