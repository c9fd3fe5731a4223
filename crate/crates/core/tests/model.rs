use antisync::model::{
    energy, thermal_occupancy, validate, MeanFieldState, OccupancyConvention, SystemParams,
};
use nalgebra::Complex;
use proptest::prelude::*;

/// The operator Hamiltonian with every mode replaced by a complex amplitude.
fn energy_from_amplitudes(s: &MeanFieldState, p: &SystemParams) -> f64 {
    let r2 = std::f64::consts::SQRT_2;
    let c = Complex::new(s.q_c, s.p_c) / r2;
    let b = Complex::new(s.q_m, s.p_m) / r2;
    let d = Complex::new(s.q_d, s.p_d) / r2;
    let i = Complex::i();
    let q_m = (b + b.conj()) / r2;
    let q_d = (d + d.conj()) / r2;
    let h = c.conj() * c * p.delta + b.conj() * b - d.conj() * d * p.omega_sigma
        + c.conj() * c * q_m * p.g_m
        + (c.conj() + c) * q_d * p.g_d
        + i * p.eta * (c.conj() - c);
    assert!(h.im.abs() <= 1e-9 * h.re.abs().max(1.0));
    h.re
}

fn state() -> impl Strategy<Value = MeanFieldState> {
    prop::array::uniform6(-50.0f64..50.0).prop_map(|y| MeanFieldState::from_array(0.0, y))
}

fn params() -> impl Strategy<Value = SystemParams> {
    (
        -3.0f64..3.0,
        0.5f64..1.5,
        -0.1f64..0.1,
        -0.1f64..0.1,
        0.0f64..10.0,
    )
        .prop_map(|(delta, ws, gm, gd, eta)| SystemParams {
            delta,
            omega_sigma: ws,
            g_m: gm,
            g_d: gd,
            eta,
            ..SystemParams::baseline()
        })
}

proptest! {
    #[test]
    fn energy_matches_amplitude_substitution(s in state(), p in params()) {
        let a = energy(&s, &p);
        let b = energy_from_amplitudes(&s, &p);
        prop_assert!((a - b).abs() <= 1e-11 * a.abs().max(b.abs()).max(1.0), "{a} vs {b}");
    }

    #[test]
    fn occupancy_is_monotone(t1 in 0.0f64..10.0, dt in 1e-6f64..10.0, w in 1e3f64..1e10) {
        for conv in [OccupancyConvention::BoseEinstein, OccupancyConvention::PaperLiteral] {
            let a = thermal_occupancy(w, t1, conv).unwrap();
            let b = thermal_occupancy(w, t1 + dt, conv).unwrap();
            prop_assert!(b >= a, "{conv:?}: n({}) = {b} < n({t1}) = {a}", t1 + dt);
        }
    }

    #[test]
    fn validate_is_idempotent(p in params(), t in 0.0f64..1.0) {
        let p = p.with_temperature(t).unwrap();
        let once = validate(&p).unwrap();
        prop_assert_eq!(validate(&once).unwrap(), once);
    }

    #[test]
    fn cavity_rotation_leaves_detuning_energy_unchanged(s in state(), theta in 0.0f64..6.3, delta in -3.0f64..3.0) {
        let p = SystemParams { delta, eta: 0.0, g_m: 0.0, g_d: 0.0, ..SystemParams::baseline() };
        let only_cavity = |s: &MeanFieldState| MeanFieldState { q_m: 0.0, p_m: 0.0, q_d: 0.0, p_d: 0.0, ..*s };
        let (sn, cs) = theta.sin_cos();
        let rotated = MeanFieldState { q_c: s.q_c * cs + s.p_c * sn, p_c: -s.q_c * sn + s.p_c * cs, ..s };
        let a = energy(&only_cavity(&s), &p);
        let b = energy(&only_cavity(&rotated), &p);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn baseline_is_valid() {
    let p = validate(&SystemParams::baseline()).unwrap();
    assert_eq!(p.kappa, 1.0);
    assert_eq!(p.gamma, 5e-6);
    assert_eq!(p.gamma_a, 5e-6);
    assert_eq!(p.delta, -1.0);
    assert_eq!(p.g_m, 1e-5);
    assert_eq!(p.g_d, 1e-5);
    assert_eq!(p.eta, 3000.0);
}
