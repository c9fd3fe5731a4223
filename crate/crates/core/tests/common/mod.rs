#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix4};
use rand::Rng;

/// Rotation of one mode's `(q, p)` by `theta`.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, s, -s, c)
}

pub fn squeezer(r: f64) -> Matrix2<f64> {
    Matrix2::new(r.exp(), 0.0, 0.0, (-r).exp())
}

pub fn local(a: Matrix2<f64>, b: Matrix2<f64>) -> Matrix4<f64> {
    let mut s = Matrix4::zeros();
    s.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
    s.fixed_view_mut::<2, 2>(2, 2).copy_from(&b);
    s
}

/// Two-mode squeezer on `(q_a, p_a, q_b, p_b)`.
pub fn two_mode_squeezer(r: f64) -> Matrix4<f64> {
    let (c, s) = (r.cosh(), r.sinh());
    Matrix4::new(
        c, 0.0, s, 0.0, //
        0.0, c, 0.0, -s, //
        s, 0.0, c, 0.0, //
        0.0, -s, 0.0, c,
    )
}

pub fn beam_splitter(theta: f64) -> Matrix4<f64> {
    let (s, c) = theta.sin_cos();
    Matrix4::new(
        c, 0.0, s, 0.0, //
        0.0, c, 0.0, s, //
        -s, 0.0, c, 0.0, //
        0.0, -s, 0.0, c,
    )
}

/// Two-mode squeezed thermal state in the unit-vacuum convention.
pub fn tmst(r: f64, n: f64) -> Matrix4<f64> {
    let a = (2.0 * n + 1.0) * (2.0 * r).cosh();
    let c = (2.0 * n + 1.0) * (2.0 * r).sinh();
    Matrix4::new(
        a, 0.0, c, 0.0, //
        0.0, a, 0.0, -c, //
        c, 0.0, a, 0.0, //
        0.0, -c, 0.0, a,
    )
}

/// A random physical two-mode state, unit-vacuum convention: thermal
/// occupations dressed by a random Gaussian unitary.
pub fn random_state<R: Rng>(rng: &mut R) -> Matrix4<f64> {
    let n1 = rng.random_range(0.0..3.0);
    let n2 = rng.random_range(0.0..3.0);
    let th = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        2.0 * n1 + 1.0,
        2.0 * n1 + 1.0,
        2.0 * n2 + 1.0,
        2.0 * n2 + 1.0,
    ));
    let s = local(
        rotation(rng.random_range(0.0..6.3)) * squeezer(rng.random_range(-0.8..0.8)),
        rotation(rng.random_range(0.0..6.3)) * squeezer(rng.random_range(-0.8..0.8)),
    ) * beam_splitter(rng.random_range(0.0..3.2))
        * two_mode_squeezer(rng.random_range(-1.0..1.0))
        * local(
            rotation(rng.random_range(0.0..6.3)),
            rotation(rng.random_range(0.0..6.3)),
        );
    s * th * s.transpose()
}

/// A random physical product state, unit-vacuum convention.
pub fn random_product_state<R: Rng>(rng: &mut R) -> Matrix4<f64> {
    let mut one = || {
        let n = rng.random_range(0.0..5.0);
        let s = rotation(rng.random_range(0.0..6.3)) * squeezer(rng.random_range(-1.5..1.5));
        s * Matrix2::identity() * (2.0 * n + 1.0) * s.transpose()
    };
    let a = one();
    let b = one();
    local(a, b)
}
