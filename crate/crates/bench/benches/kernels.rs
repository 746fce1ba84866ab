use std::f64::consts::TAU;
use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use semistiff::linalg::{RowBoundary, RowOperator};
use semistiff::topology::find_vortices;
use semistiff::{energy, gl_gradient, solve_v, Annulus, ComplexField, Grid, Mesh};

const SIZES: [(usize, usize); 3] = [(64, 192), (128, 384), (256, 768)];

fn mesh(n_r: usize, n_t: usize) -> Arc<Mesh> {
    Mesh::new(Annulus::reference(), Grid::new(n_r, n_t).unwrap())
}

/// A degree-one field with a shallow dip and a few phase ripples.
fn field(mesh: &Arc<Mesh>) -> ComplexField {
    let (r1, r2) = (mesh.annulus().r_inner(), mesh.annulus().r_outer());
    ComplexField::from_polar(mesh, |r, t| {
        let x = (r - r1) / (r2 - r1);
        let modulus = 1.0 - 0.3 * (x * (1.0 - x)) * (1.0 + (3.0 * t).cos());
        Complex64::from_polar(modulus, t + 0.2 * (2.0 * t).sin() * x)
    })
}

/// Two interior zeros of opposite winding.
fn dipole(mesh: &Arc<Mesh>) -> ComplexField {
    let a = Complex64::from_polar(1.8, 0.0);
    let b = Complex64::from_polar(1.8, TAU / 3.0);
    ComplexField::from_fn(mesh, |z| (z - a) * (z - b).conj())
}

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernels");
    for (n_r, n_t) in SIZES {
        let m = mesh(n_r, n_t);
        let u = field(&m);
        g.bench_with_input(BenchmarkId::new("energy", format!("{n_r}x{n_t}")), &u, |b, u| b.iter(|| energy(black_box(u), 0.1)));
        g.bench_with_input(BenchmarkId::new("gl_gradient", format!("{n_r}x{n_t}")), &u, |b, u| {
            b.iter(|| gl_gradient(black_box(u), 0.1).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("solve_v", format!("{n_r}x{n_t}")), &m, |b, m| {
            b.iter(|| solve_v(black_box(m)).unwrap())
        });
        let (c_s, c_t) = m.edge_couplings();
        let op = RowOperator::new(n_r, n_t, c_s, c_t, vec![1.0; n_r], RowBoundary::Free, RowBoundary::Free);
        let rhs: Vec<Complex64> = u.values.clone();
        g.bench_function(BenchmarkId::new("row_solve", format!("{n_r}x{n_t}")), |b| {
            b.iter(|| {
                let mut x = rhs.clone();
                op.solve_in_place(black_box(&mut x));
                x
            })
        });
        let w = dipole(&m);
        g.bench_with_input(BenchmarkId::new("find_vortices", format!("{n_r}x{n_t}")), &w, |b, w| {
            b.iter(|| find_vortices(black_box(w), 0.5).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
