//! Explicit Runge–Kutta steppers for small fixed-size systems.
//!
//! Both steppers advance a `[f64; N]` state to an exact target time, so a
//! caller can sample on any grid without dense output. An optional post-step
//! hook runs after every accepted step (used to re-symmetrize covariance
//! matrices).

use crate::error::{Error, Result};

/// Which integration scheme to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with local error control.
    DormandPrince45 {
        rtol: f64,
        atol: f64,
        /// Largest step the controller may take.
        max_step: f64,
    },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4 { .. } => "rk4",
            Method::DormandPrince45 { .. } => "dopri45",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Method::Rk4 { step } => step.is_finite() && step > 0.0,
            Method::DormandPrince45 {
                rtol,
                atol,
                max_step,
            } => rtol > 0.0 && atol > 0.0 && max_step > 0.0 && rtol.is_finite() && atol.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "bad solver settings {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
    pub min_step: f64,
    pub max_step: f64,
}

impl StepStats {
    fn record(&mut self, h: f64) {
        if self.accepted == 0 {
            self.min_step = h;
            self.max_step = h;
        } else {
            self.min_step = self.min_step.min(h);
            self.max_step = self.max_step.max(h);
        }
        self.accepted += 1;
    }
}

/// Integrator state carried between calls to [`Stepper::advance_to`].
#[derive(Debug, Clone)]
pub struct Stepper {
    method: Method,
    /// Step proposal carried over by the adaptive controller.
    next_step: Option<f64>,
    pub stats: StepStats,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

#[inline]
fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (w, k) in terms {
            acc += w * k[i];
        }
        *o += h * acc;
    }
    out
}

impl Stepper {
    pub fn new(method: Method) -> Result<Self> {
        method.validate()?;
        Ok(Self {
            method,
            next_step: None,
            stats: StepStats::default(),
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Advances `(t, y)` to exactly `t_target`.
    ///
    /// `f(t, y, dy)` writes the derivative. `post_step` may adjust the state
    /// after each accepted step.
    pub fn advance_to<const N: usize, F, P>(
        &mut self,
        f: &mut F,
        post_step: &mut P,
        t: &mut f64,
        y: &mut [f64; N],
        t_target: f64,
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64; N], &mut [f64; N]),
        P: FnMut(f64, &mut [f64; N]),
    {
        if t_target < *t {
            return Err(Error::InvalidArgument(format!(
                "cannot integrate backwards from {} to {t_target}",
                *t
            )));
        }
        match self.method {
            Method::Rk4 { step } => self.rk4_to(f, post_step, t, y, t_target, step),
            Method::DormandPrince45 {
                rtol,
                atol,
                max_step,
            } => self.dopri_to(f, post_step, t, y, t_target, rtol, atol, max_step),
        }
    }

    fn rk4_to<const N: usize, F, P>(
        &mut self,
        f: &mut F,
        post_step: &mut P,
        t: &mut f64,
        y: &mut [f64; N],
        t_target: f64,
        step: f64,
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64; N], &mut [f64; N]),
        P: FnMut(f64, &mut [f64; N]),
    {
        let span = t_target - *t;
        if span <= 0.0 {
            return Ok(());
        }
        // Equal substeps no longer than `step` that land exactly on the target.
        let n = (span / step * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        let h = span / n as f64;
        let t0 = *t;
        let mut k1 = [0.0; N];
        let mut k2 = [0.0; N];
        let mut k3 = [0.0; N];
        let mut k4 = [0.0; N];
        for i in 0..n {
            let ti = t0 + i as f64 * h;
            f(ti, y, &mut k1);
            f(ti + 0.5 * h, &combine(y, 0.5 * h, &[(1.0, &k1)]), &mut k2);
            f(ti + 0.5 * h, &combine(y, 0.5 * h, &[(1.0, &k2)]), &mut k3);
            f(ti + h, &combine(y, h, &[(1.0, &k3)]), &mut k4);
            *y = combine(
                y,
                h / 6.0,
                &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)],
            );
            let t_new = if i + 1 == n {
                t_target
            } else {
                t0 + (i + 1) as f64 * h
            };
            self.stats.evaluations += 4;
            self.stats.record(h);
            post_step(t_new, y);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    t: t_new,
                    context: "rk4 step produced a non-finite state".into(),
                });
            }
        }
        *t = t_target;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn dopri_to<const N: usize, F, P>(
        &mut self,
        f: &mut F,
        post_step: &mut P,
        t: &mut f64,
        y: &mut [f64; N],
        t_target: f64,
        rtol: f64,
        atol: f64,
        max_step: f64,
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64; N], &mut [f64; N]),
        P: FnMut(f64, &mut [f64; N]),
    {
        let mut k1 = [0.0; N];
        let mut k2 = [0.0; N];
        let mut k3 = [0.0; N];
        let mut k4 = [0.0; N];
        let mut k5 = [0.0; N];
        let mut k6 = [0.0; N];
        let mut k7 = [0.0; N];

        while *t < t_target {
            f(*t, y, &mut k1);
            self.stats.evaluations += 1;
            let proposed = match self.next_step {
                Some(h) => h,
                None => initial_step(y, &k1, rtol, atol, max_step),
            }
            .min(max_step);
            let mut h = proposed;
            let remaining = t_target - *t;
            let landing = h >= remaining * (1.0 - 1e-12);
            if landing {
                h = remaining;
            }
            let min_step = 1e-14 * t.abs().max(1.0);
            if h < min_step && !landing {
                return Err(Error::StepUnderflow { t: *t, step: h });
            }

            let ti = *t;
            f(ti + C2 * h, &combine(y, h, &[(A21, &k1)]), &mut k2);
            f(
                ti + C3 * h,
                &combine(y, h, &[(A31, &k1), (A32, &k2)]),
                &mut k3,
            );
            f(
                ti + C4 * h,
                &combine(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
                &mut k4,
            );
            f(
                ti + C5 * h,
                &combine(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
                &mut k5,
            );
            f(
                ti + h,
                &combine(
                    y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
                &mut k6,
            );
            let y_new = combine(
                y,
                h,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            f(ti + h, &y_new, &mut k7);
            self.stats.evaluations += 6;

            let mut err_sq = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
                err_sq += (e / scale) * (e / scale);
            }
            let err = (err_sq / N as f64).sqrt();
            if !err.is_finite() {
                // Shrink hard and retry; a NaN state only escapes if the step underflows.
                self.stats.rejected += 1;
                self.next_step = Some(h * FAC_MIN);
                if h * FAC_MIN < min_step {
                    return Err(Error::NonFinite {
                        t: *t,
                        context: "adaptive step produced a non-finite state".into(),
                    });
                }
                continue;
            }
            let factor = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if err <= 1.0 {
                *y = y_new;
                *t = if landing { t_target } else { ti + h };
                self.stats.record(h);
                post_step(*t, y);
                // A step clipped to land on the target says little about the next one.
                let proposal = h * factor;
                self.next_step = Some(if landing {
                    proposal.max(proposed)
                } else {
                    proposal
                });
            } else {
                self.stats.rejected += 1;
                self.next_step = Some(h * factor.min(1.0));
            }
        }
        Ok(())
    }
}

/// Hairer–Wanner style starting step.
fn initial_step<const N: usize>(
    y: &[f64; N],
    dy: &[f64; N],
    rtol: f64,
    atol: f64,
    max_step: f64,
) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = atol + rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (dy[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(max_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64; 1], dy: &mut [f64; 1]) {
        dy[0] = -y[0];
    }

    fn run(method: Method, t_end: f64) -> ([f64; 1], StepStats) {
        let mut s = Stepper::new(method).unwrap();
        let mut t = 0.0;
        let mut y = [1.0];
        s.advance_to(
            &mut decay,
            &mut |_, _: &mut [f64; 1]| {},
            &mut t,
            &mut y,
            t_end,
        )
        .unwrap();
        assert_eq!(t, t_end);
        (y, s.stats)
    }

    #[test]
    fn rk4_exponential_decay() {
        let (y, stats) = run(Method::Rk4 { step: 1e-2 }, 2.0);
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-10);
        assert_eq!(stats.accepted, 200);
    }

    #[test]
    fn rk4_lands_on_uneven_targets() {
        let (y, stats) = run(Method::Rk4 { step: 0.3 }, 1.0);
        assert_eq!(stats.accepted, 4);
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn dopri_meets_tolerance() {
        let m = Method::DormandPrince45 {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 1.0,
        };
        let (y, stats) = run(m, 5.0);
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-9, "{}", y[0]);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn zero_span_is_a_noop() {
        let (y, stats) = run(Method::Rk4 { step: 0.1 }, 0.0);
        assert_eq!(y[0], 1.0);
        assert_eq!(stats.accepted, 0);
    }

    #[test]
    fn backwards_is_rejected() {
        let mut s = Stepper::new(Method::Rk4 { step: 0.1 }).unwrap();
        let mut t = 1.0;
        let mut y = [1.0];
        let r = s.advance_to(
            &mut decay,
            &mut |_, _: &mut [f64; 1]| {},
            &mut t,
            &mut y,
            0.5,
        );
        assert!(r.is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let mut s = Stepper::new(Method::Rk4 { step: 0.1 }).unwrap();
        let mut t = 0.0;
        let mut y = [1.0];
        let mut f = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0] * y[0] * 1e300;
        let r = s.advance_to(&mut f, &mut |_, _: &mut [f64; 1]| {}, &mut t, &mut y, 10.0);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn adaptive_blow_up_fails_cleanly() {
        let mut s = Stepper::new(Method::DormandPrince45 {
            rtol: 1e-8,
            atol: 1e-8,
            max_step: 1.0,
        })
        .unwrap();
        let mut t = 0.0;
        let mut y = [1.0];
        // Finite-time singularity at t = 1.
        let mut f = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0] * y[0];
        let r = s.advance_to(&mut f, &mut |_, _: &mut [f64; 1]| {}, &mut t, &mut y, 2.0);
        assert!(r.is_err());
        assert!((t - 1.0).abs() < 1e-6, "stopped at {t}");
    }

    #[test]
    fn invalid_settings() {
        assert!(Stepper::new(Method::Rk4 { step: 0.0 }).is_err());
        assert!(Stepper::new(Method::DormandPrince45 {
            rtol: -1.0,
            atol: 1e-9,
            max_step: 1.0
        })
        .is_err());
    }
}
