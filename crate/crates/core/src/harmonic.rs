//! Closed-form S¹-valued baselines: the degree-d harmonic map, its energy and
//! its current potential.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::domain::{Annulus, Mesh, ScalarField};
use crate::field::ComplexField;

/// Minimal Dirichlet energy of an S¹-valued map of degree d on both circles.
pub fn i0(d: i32, annulus: &Annulus) -> f64 {
    let pd = PI * d as f64;
    2.0 * pd * pd / annulus.capacity()
}

/// `e^{idθ}`; the phase is 1 at (R₂, θ = 0).
pub fn harmonic_minimizer(d: i32, mesh: &Arc<Mesh>) -> ComplexField {
    ComplexField::from_polar(mesh, |_, t| Complex64::from_polar(1.0, d as f64 * t))
}

/// `h₀(r) = 1 + d log(r/R₂)`.
pub fn h0_field(d: i32, mesh: &Arc<Mesh>) -> ScalarField {
    let r2 = mesh.annulus().r_outer();
    ScalarField::from_fn(mesh, |r, _| 1.0 + d as f64 * (r / r2).ln())
}

#[derive(Debug, Clone)]
pub struct HarmonicBaseline {
    pub d: i32,
    pub i0: f64,
    pub h0: ScalarField,
    pub minimizer: ComplexField,
}

impl HarmonicBaseline {
    pub fn new(d: i32, mesh: &Arc<Mesh>) -> Self {
        HarmonicBaseline {
            d,
            i0: i0(d, mesh.annulus()),
            h0: h0_field(d, mesh),
            minimizer: harmonic_minimizer(d, mesh),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{solve_v, Grid};
    use crate::field::energy;
    use crate::topology::{abdeg, current_potential, find_vortices};

    fn mesh() -> Arc<Mesh> {
        Mesh::new(Annulus::reference(), Grid::new(65, 256).unwrap())
    }

    #[test]
    fn i0_values() {
        let a = Annulus::reference();
        assert_eq!(i0(0, &a), 0.0);
        assert!((i0(1, &a) - PI).abs() < 1e-12);
        assert!((i0(2, &a) - 4.0 * i0(1, &a)).abs() < 1e-12);
        assert_eq!(i0(-3, &a), i0(3, &a));
    }

    #[test]
    fn i0_continuous_in_capacity() {
        let limit = i0(1, &Annulus::new(1.0, 2.0).unwrap());
        let gaps: Vec<f64> = [1.5, 1.9, 1.99, 1.999]
            .iter()
            .map(|&r2| (i0(1, &Annulus::new(1.0, r2).unwrap()) - limit).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(gaps[3] < 1e-2);
    }

    #[test]
    fn minimizer_matches_baseline() {
        let m = mesh();
        let v = solve_v(&m).unwrap();
        for d in [1, 2] {
            let base = HarmonicBaseline::new(d, &m);
            let e = energy(&base.minimizer, 0.05);
            assert!((e.dirichlet - base.i0).abs() / base.i0 < 1e-2);
            assert!((abdeg(&base.minimizer, &v).unwrap() - d as f64).abs() < 1e-3);
            assert!(find_vortices(&base.minimizer, 0.5).unwrap().is_empty());
            assert!(base.minimizer.values.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
            assert_eq!(base.minimizer.at(64, 0), Complex64::new(1.0, 0.0));
            let cp = current_potential(&base.minimizer).unwrap();
            assert!(cp.h.max_abs_diff(&base.h0) < 1e-8);
        }
    }

    #[test]
    fn h0_boundary_values_and_energy() {
        let m = mesh();
        let a = *m.annulus();
        let v = solve_v(&m).unwrap();
        for d in [1, 2] {
            let h0 = h0_field(d, &m);
            assert!((h0.at(64, 3) - 1.0).abs() < 1e-15);
            assert!((h0.at(0, 3) - (1.0 - d as f64 * a.log_ratio())).abs() < 1e-12);
            // identity with V
            let via_v = ScalarField::from_fn(&m, |r, _| 1.0 + 2.0 * PI * d as f64 * (a.v_exact(r) - 1.0) / a.capacity());
            assert!(h0.max_abs_diff(&via_v) < 1e-6);
            let discrete_v = ScalarField {
                mesh: m.clone(),
                values: v.values.iter().map(|x| 1.0 + 2.0 * PI * d as f64 * (x - 1.0) / a.capacity()).collect(),
            };
            assert!(h0.max_abs_diff(&discrete_v) < 1e-6);
            let half = 0.5 * h0.dirichlet_integral();
            assert!((half - i0(d, &a)).abs() / i0(d, &a) < 1e-2);
            // outward flux through the outer circle: ∫ ∂_s h dθ = 2πd
            let flux: f64 = (0..m.n_t())
                .map(|j| (h0.at(64, j) - h0.at(63, j)) / m.h_s() * m.h_theta())
                .sum();
            assert!((flux - 2.0 * PI * d as f64).abs() < 1e-9);
        }
    }
}
