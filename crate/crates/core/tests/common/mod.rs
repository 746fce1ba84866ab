//! Seeded random fields shared by the property suites.

#![allow(dead_code)]

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use semistiff::{renormalize_boundary, ComplexField, Mesh};

/// `e^{idθ}` times `1 + b`, where the smooth random perturbation b is built
/// from a few Fourier modes in θ and low powers of the radial coordinate and
/// satisfies |b| ≤ amplitude. Boundary-renormalized.
pub fn random_field<R: Rng>(rng: &mut R, mesh: &Arc<Mesh>, d: i32, amplitude: f64) -> ComplexField {
    const MODES: usize = 6;
    let modes: Vec<(i32, Complex64, f64)> = (0..MODES)
        .map(|_| {
            let k = rng.gen_range(-4..=4);
            let c = Complex64::from_polar(amplitude / MODES as f64 * rng.gen::<f64>(), TAU * rng.gen::<f64>());
            (k, c, rng.gen_range(0.0..3.0))
        })
        .collect();
    let (r1, r2) = (mesh.annulus().r_inner(), mesh.annulus().r_outer());
    let u = ComplexField::from_polar(mesh, |r, t| {
        let x = (r - r1) / (r2 - r1);
        let bump: Complex64 = modes
            .iter()
            .map(|&(k, c, p)| c * x.powf(p) * Complex64::from_polar(1.0, k as f64 * t))
            .sum();
        Complex64::from_polar(1.0, d as f64 * t) * (1.0 + bump)
    });
    renormalize_boundary(&u).expect("perturbation keeps the boundary away from zero")
}

/// A random direction, tangent to the circle of unit complex numbers on the
/// boundary rows.
pub fn random_tangent<R: Rng>(rng: &mut R, u: &ComplexField) -> Vec<Complex64> {
    let m = &u.mesh;
    let n_t = m.n_t();
    (0..m.len())
        .map(|k| {
            let i = k / n_t;
            if i == 0 || i == m.n_r() - 1 {
                Complex64::new(0.0, rng.gen_range(-1.0..1.0)) * u.values[k]
            } else {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }
        })
        .collect()
}
