//! Circular-annulus geometry and the log-polar lattice.
//!
//! All fields live on nodes `(sᵢ, θⱼ)` with `s = log r` uniform on
//! `[log R₁, log R₂]` (both ends included) and `θ` uniform and periodic. In
//! these coordinates the Laplacian is the flat five-point stencil times
//! `e^{−2s}`, so radial harmonic functions are reproduced exactly.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pcg, RowBoundary, RowOperator};

pub const MIN_RADIAL: usize = 16;
pub const MIN_ANGULAR: usize = 32;

/// Linear solves stop at this relative residual.
pub const SOLVER_TOL: f64 = 1e-10;
pub(crate) const SOLVER_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    r_inner: f64,
    r_outer: f64,
}

impl Annulus {
    pub fn new(r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(r_inner.is_finite() && r_outer.is_finite()) || r_inner <= 0.0 || r_outer <= r_inner {
            return Err(Error::InvalidAnnulus(format!(
                "need 0 < R1 < R2, got R1 = {r_inner}, R2 = {r_outer}"
            )));
        }
        Ok(Annulus { r_inner, r_outer })
    }

    /// The reference domain R₁ = 1, R₂ = e (capacity 2π).
    pub fn reference() -> Self {
        Annulus {
            r_inner: 1.0,
            r_outer: std::f64::consts::E,
        }
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    /// log(R₂/R₁).
    pub fn log_ratio(&self) -> f64 {
        (self.r_outer / self.r_inner).ln()
    }

    pub fn area(&self) -> f64 {
        PI * (self.r_outer * self.r_outer - self.r_inner * self.r_inner)
    }

    /// H¹-capacity 2π / log(R₂/R₁).
    pub fn capacity(&self) -> f64 {
        2.0 * PI / self.log_ratio()
    }

    /// Analytic solution of ΔV = 0, V(R₁) = 0, V(R₂) = 1.
    pub fn v_exact(&self, r: f64) -> f64 {
        (r / self.r_inner).ln() / self.log_ratio()
    }

    /// Distance from radius `r` to the nearer boundary circle.
    pub fn boundary_distance(&self, r: f64) -> f64 {
        (r - self.r_inner).min(self.r_outer - r)
    }
}

/// Free-function form of [`Annulus::capacity`].
pub fn capacity(annulus: &Annulus) -> f64 {
    annulus.capacity()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_radial: usize,
    n_angular: usize,
}

impl Grid {
    pub fn new(n_radial: usize, n_angular: usize) -> Result<Self> {
        if n_radial < MIN_RADIAL {
            return Err(Error::InvalidGrid(format!(
                "n_radial = {n_radial} < {MIN_RADIAL}"
            )));
        }
        if n_angular < MIN_ANGULAR {
            return Err(Error::InvalidGrid(format!(
                "n_angular = {n_angular} < {MIN_ANGULAR}"
            )));
        }
        Ok(Grid {
            n_radial,
            n_angular,
        })
    }

    /// Smallest grid whose radial spacing at the outer circle is at most
    /// `eps / 4`, with angular cells `aspect` times the radial spacing there.
    /// `n_angular` is rounded up to a multiple of 16 to keep the FFTs cheap.
    pub fn for_epsilon(annulus: &Annulus, eps: f64, aspect: f64) -> Result<Self> {
        if !(eps > 0.0) || !(aspect > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("need eps > 0 and aspect > 0, got {eps}, {aspect}"),
            });
        }
        let target = eps / 4.0;
        // physical spacing of the outermost cell is R₂(1 − e^{−h_s})
        let h_s = -(1.0 - target / annulus.r_outer()).ln();
        let n_radial = ((annulus.log_ratio() / h_s).ceil() as usize + 1).max(MIN_RADIAL);
        let h_s = annulus.log_ratio() / (n_radial - 1) as f64;
        let n_angular = (2.0 * PI / (aspect * h_s)).ceil() as usize;
        let n_angular = n_angular.div_ceil(16) * 16;
        Grid::new(n_radial, n_angular.max(MIN_ANGULAR))
    }

    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    pub fn len(&self) -> usize {
        self.n_radial * self.n_angular
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An annulus together with a grid and the cached node geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    annulus: Annulus,
    grid: Grid,
    h_s: f64,
    h_theta: f64,
    s: Vec<f64>,
    r: Vec<f64>,
    weight: Vec<f64>,
}

impl Mesh {
    pub fn new(annulus: Annulus, grid: Grid) -> Arc<Mesh> {
        let n_r = grid.n_radial;
        let h_s = annulus.log_ratio() / (n_r - 1) as f64;
        let s0 = annulus.r_inner.ln();
        let s: Vec<f64> = (0..n_r).map(|i| s0 + i as f64 * h_s).collect();
        let mut r: Vec<f64> = s.iter().map(|s| s.exp()).collect();
        r[0] = annulus.r_inner;
        r[n_r - 1] = annulus.r_outer;
        let weight = (0..n_r)
            .map(|i| if i == 0 || i == n_r - 1 { 0.5 } else { 1.0 })
            .collect();
        Arc::new(Mesh {
            annulus,
            grid,
            h_s,
            h_theta: 2.0 * PI / grid.n_angular as f64,
            s,
            r,
            weight,
        })
    }

    pub fn annulus(&self) -> &Annulus {
        &self.annulus
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_r(&self) -> usize {
        self.grid.n_radial
    }

    pub fn n_t(&self) -> usize {
        self.grid.n_angular
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn h_s(&self) -> f64 {
        self.h_s
    }

    pub fn h_theta(&self) -> f64 {
        self.h_theta
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s[i]
    }

    pub fn r(&self, i: usize) -> f64 {
        self.r[i]
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.h_theta
    }

    /// Trapezoid weight in s (½ on the boundary rows).
    pub fn weight(&self, i: usize) -> f64 {
        self.weight[i]
    }

    /// Quadrature mass of a node: area element r² ds dθ with trapezoid weights.
    pub fn mass(&self, i: usize) -> f64 {
        self.weight[i] * self.h_s * self.h_theta * self.r[i] * self.r[i]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.grid.n_angular + j
    }

    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::from_polar(self.r[i], self.theta(j))
    }

    /// Largest physical distance between adjacent radial rows (at the outer circle).
    pub fn max_radial_spacing(&self) -> f64 {
        self.annulus.r_outer * (1.0 - (-self.h_s).exp())
    }

    /// Physical radial spacing at the inner circle.
    pub fn min_radial_spacing(&self) -> f64 {
        self.annulus.r_inner * (self.h_s.exp() - 1.0)
    }

    /// Smallest physical spacing in any direction.
    pub fn min_spacing(&self) -> f64 {
        self.min_radial_spacing()
            .min(self.annulus.r_inner * self.h_theta)
    }

    /// Checks the resolution rule `radial spacing ≤ eps/4` near the boundary.
    pub fn check_spacing_rule(&self, eps: f64) -> Result<()> {
        let spacing = self.max_radial_spacing();
        let limit = eps / 4.0;
        if spacing > limit * (1.0 + 1e-12) {
            return Err(Error::SpacingRule { spacing, limit });
        }
        Ok(())
    }

    /// Stiffness of the flat Dirichlet form on s-edges and (per row) θ-edges.
    pub fn edge_couplings(&self) -> (f64, Vec<f64>) {
        let c_s = self.h_theta / self.h_s;
        let c_t = self
            .weight
            .iter()
            .map(|w| w * self.h_s / self.h_theta)
            .collect();
        (c_s, c_t)
    }
}

/// A real function sampled on the mesh nodes (row-major, radial index outer).
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(mesh: &Arc<Mesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(mesh.len());
        for i in 0..mesh.n_r() {
            for j in 0..mesh.n_t() {
                values.push(f(mesh.r(i), mesh.theta(j)));
            }
        }
        ScalarField {
            mesh: mesh.clone(),
            values,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.index(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.mesh.n_t();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// ∫|∇f|² over the annulus (flat form in (s, θ), conformally invariant).
    pub fn dirichlet_integral(&self) -> f64 {
        self.dirichlet_pairing(self)
    }

    /// Discrete ∫∇f·∇g.
    pub fn dirichlet_pairing(&self, other: &ScalarField) -> f64 {
        let m = &self.mesh;
        let (c_s, c_t) = m.edge_couplings();
        let (n_r, n_t) = (m.n_r(), m.n_t());
        let mut acc = 0.0;
        for i in 0..n_r {
            for j in 0..n_t {
                let k = m.index(i, j);
                let jp = m.index(i, (j + 1) % n_t);
                acc += c_t[i] * (self.values[jp] - self.values[k]) * (other.values[jp] - other.values[k]);
                if i + 1 < n_r {
                    let ip = m.index(i + 1, j);
                    acc += c_s * (self.values[ip] - self.values[k]) * (other.values[ip] - other.values[k]);
                }
            }
        }
        acc
    }

    /// Nodal gradient in (s, θ): central differences, one-sided on boundary rows.
    pub fn gradient_s_theta(&self, i: usize, j: usize) -> (f64, f64) {
        let m = &self.mesh;
        let n_t = m.n_t();
        let n_r = m.n_r();
        let ds = if i == 0 {
            (self.at(1, j) - self.at(0, j)) / m.h_s()
        } else if i + 1 == n_r {
            (self.at(n_r - 1, j) - self.at(n_r - 2, j)) / m.h_s()
        } else {
            (self.at(i + 1, j) - self.at(i - 1, j)) / (2.0 * m.h_s())
        };
        let dt = (self.at(i, (j + 1) % n_t) - self.at(i, (j + n_t - 1) % n_t)) / (2.0 * m.h_theta());
        (ds, dt)
    }

    /// max|f| + max|∇f| over the nodes.
    pub fn c1_norm(&self) -> f64 {
        let m = &self.mesh;
        let mut sup = 0.0f64;
        let mut grad = 0.0f64;
        for i in 0..m.n_r() {
            for j in 0..m.n_t() {
                sup = sup.max(self.at(i, j).abs());
                let (ds, dt) = self.gradient_s_theta(i, j);
                grad = grad.max((ds * ds + dt * dt).sqrt() / m.r(i));
            }
        }
        sup + grad
    }

    /// CSV with header `s,theta,value`, one node per line in storage order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,theta,value")?;
        let m = &self.mesh;
        let mut line = String::new();
        for i in 0..m.n_r() {
            for j in 0..m.n_t() {
                line.clear();
                let _ = writeln!(line, "{},{},{}", m.s(i), m.theta(j), self.at(i, j));
                out.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }
}

/// Solves ΔV = 0 with V = 0 on the inner circle and V = 1 on the outer one.
pub fn solve_v(mesh: &Arc<Mesh>) -> Result<ScalarField> {
    let (n_r, n_t) = (mesh.n_r(), mesh.n_t());
    let (c_s, c_t) = mesh.edge_couplings();
    let op = RowOperator::new(
        n_r,
        n_t,
        c_s,
        c_t,
        vec![0.0; n_r],
        RowBoundary::Fixed,
        RowBoundary::Fixed,
    );
    // boundary values enter the rhs of the neighbouring free rows
    let mut b = vec![Complex64::default(); mesh.len()];
    for j in 0..n_t {
        b[mesh.index(n_r - 1, j)] = Complex64::new(1.0, 0.0);
        b[mesh.index(n_r - 2, j)] += Complex64::new(c_s, 0.0);
    }
    let mut x = vec![Complex64::default(); mesh.len()];
    for j in 0..n_t {
        x[mesh.index(n_r - 1, j)] = Complex64::new(1.0, 0.0);
    }
    pcg(&op, &b, &mut x, SOLVER_TOL, SOLVER_MAX_ITER)?;
    Ok(ScalarField {
        mesh: mesh.clone(),
        values: x.iter().map(|z| z.re).collect(),
    })
}

/// Capacity from the discrete Dirichlet integral of the discrete V.
pub fn capacity_from_v(v: &ScalarField) -> f64 {
    v.dirichlet_integral()
}

/// A closed, counterclockwise chain of grid nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub nodes: Vec<(usize, usize)>,
}

impl Contour {
    /// The full radial row `i`, traversed counterclockwise.
    pub fn circle(mesh: &Mesh, i: usize) -> Self {
        Contour {
            nodes: (0..mesh.n_t()).map(|j| (i, j)).collect(),
        }
    }

    pub fn inner(mesh: &Mesh) -> Self {
        Self::circle(mesh, 0)
    }

    pub fn outer(mesh: &Mesh) -> Self {
        Self::circle(mesh, mesh.n_r() - 1)
    }

    /// Shoelace area of the polyline through the node positions.
    pub fn signed_area(&self, mesh: &Mesh) -> f64 {
        let n = self.nodes.len();
        (0..n)
            .map(|k| {
                let (i0, j0) = self.nodes[k];
                let (i1, j1) = self.nodes[(k + 1) % n];
                let a = mesh.point(i0, j0);
                let b = mesh.point(i1, j1);
                a.re * b.im - a.im * b.re
            })
            .sum::<f64>()
            * 0.5
    }

    /// Radius of the contour nodes if they all lie on one row.
    pub fn row(&self) -> Option<usize> {
        let first = self.nodes.first()?.0;
        self.nodes.iter().all(|&(i, _)| i == first).then_some(first)
    }
}

/// The grid row nearest to the V = ½ level set, as a counterclockwise contour.
pub fn half_level_contour(v: &ScalarField) -> Contour {
    let m = &v.mesh;
    let n_t = m.n_t();
    let mut best = (f64::INFINITY, 1);
    for i in 1..m.n_r() - 1 {
        let mean = v.row(i).iter().sum::<f64>() / n_t as f64;
        let gap = (mean - 0.5).abs();
        if gap < best.0 {
            best = (gap, i);
        }
    }
    Contour::circle(m, best.1)
}
