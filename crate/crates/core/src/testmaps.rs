//! Explicit test maps: Möbius boundary-layer maps, vortex/ghost pairs, and
//! admissible maps of prescribed boundary degrees.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::domain::{Annulus, Mesh};
use crate::error::{Error, Result};
use crate::field::{renormalize_boundary, ComplexField, EnergyReport};
use crate::quadrature::{adaptive_2d_forced, Rule};
use crate::topology::{abdeg, boundary_degrees};

/// Largest allowed tail of the truncated Möbius series.
pub const TAIL_LIMIT: f64 = 1e-3;

/// Minimum number of grid rows inside the boundary layer.
pub const MIN_LAYER_ROWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusParams {
    /// Vortex depth parameter, 0 < t < 1.
    pub t: f64,
    /// Width of the layer in the potential coordinate, 0 < δ < ½.
    pub delta: f64,
    /// Penalty weight, λ ≥ 2d².
    pub lambda: f64,
    /// Series truncation, K ≥ 50.
    pub k_max: usize,
}

impl MoebiusParams {
    pub fn new(t: f64, delta: f64, lambda: f64, k_max: usize, d: i32) -> Result<Self> {
        let p = MoebiusParams { t, delta, lambda, k_max };
        p.validate(d)?;
        Ok(p)
    }

    /// t = 0.05, δ = 0.45, K = 400 and λ = max{9/(2ε² min|∇θ|²), 2d²} with
    /// min|∇θ| = 1/R₂ on the layer.
    pub fn with_penalty_rule(d: i32, eps: f64, annulus: &Annulus) -> Result<Self> {
        let r2 = annulus.r_outer();
        let lambda = (9.0 * r2 * r2 / (2.0 * eps * eps)).max(2.0 * (d * d) as f64);
        Self::new(0.05, 0.45, lambda, 400, d)
    }

    pub fn validate(&self, d: i32) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if d < 1 {
            return bad("d", format!("Möbius test maps need d ≥ 1, got {d}"));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return bad("t", format!("need 0 < t < 1, got {}", self.t));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return bad("delta", format!("need 0 < δ < 1/2, got {}", self.delta));
        }
        if !(self.lambda >= 2.0 * (d * d) as f64) {
            return bad("lambda", format!("need λ ≥ 2d² = {}, got {}", 2 * d * d, self.lambda));
        }
        if self.k_max < 50 {
            return bad("k_max", format!("need K ≥ 50, got {}", self.k_max));
        }
        Ok(())
    }

    /// Bound on Σ_{k>K} |t(t−2)(1−t)^k|.
    pub fn tail_bound(&self) -> f64 {
        (2.0 - self.t) * (1.0 - self.t).powi(self.k_max as i32 + 1)
    }
}

/// The disk automorphism `(z − (1−t)) / (z(1−t) − 1)`.
pub fn blaschke(z: Complex64, t: f64) -> Complex64 {
    let a = 1.0 - t;
    (z - a) / (z * a - 1.0)
}

/// The boundary datum `C_t(z̄)`, of degree −1 on the unit circle.
pub fn moebius_datum(z: Complex64, t: f64) -> Complex64 {
    blaschke(z.conj(), t)
}

/// The minimizing profile of the one-dimensional problem for mode k:
/// `f(1−δ) = 0`, `f(1) = 1`, `d²f'' = ((k−d+1)² + λ − d²) f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub k: i64,
    pub d: i32,
    pub delta: f64,
    pub kappa: f64,
}

impl Profile {
    pub fn new(k: i64, d: i32, delta: f64, lambda: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: "profiles need d ≠ 0".into(),
            });
        }
        let m = (k - d as i64 + 1) as f64;
        let radicand = m * m + lambda - (d * d) as f64;
        if !(radicand > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("(k−d+1)² + λ − d² = {radicand} must be positive"),
            });
        }
        Ok(Profile {
            k,
            d,
            delta,
            kappa: radicand.sqrt() / d.abs() as f64,
        })
    }

    fn denom(&self) -> f64 {
        -(-2.0 * self.kappa * self.delta).exp_m1()
    }

    pub fn value(&self, h: f64) -> f64 {
        let (k, x) = (self.kappa, h - 1.0);
        ((k * x).exp() - (-k * x - 2.0 * k * self.delta).exp()) / self.denom()
    }

    pub fn derivative(&self, h: f64) -> f64 {
        let (k, x) = (self.kappa, h - 1.0);
        k * ((k * x).exp() + (-k * x - 2.0 * k * self.delta).exp()) / self.denom()
    }

    /// Closed form of `∫ d²f'² + ((k−d+1)² + λ − d²)f²` over the layer.
    pub fn phi(&self) -> f64 {
        let d2 = (self.d * self.d) as f64;
        let x = self.kappa * self.delta;
        // coth x = (1 + e^{−2x}) / (1 − e^{−2x})
        d2 * self.kappa * (1.0 + (-2.0 * x).exp()) / self.denom()
    }

    /// The same integral by composite Gauss-Legendre quadrature.
    pub fn phi_quadrature(&self) -> f64 {
        let d2 = (self.d * self.d) as f64;
        let c = d2 * self.kappa * self.kappa;
        layer_panels(self.delta)
            .iter()
            .map(|&(a, b)| {
                RULE10.with(|r| {
                    r.integrate(a, b, |h| {
                        let (f, g) = (self.value(h), self.derivative(h));
                        d2 * g * g + c * f * f
                    })
                })
            })
            .sum()
    }
}

thread_local! {
    static RULE10: Rule = Rule::new(10);
}

pub fn profile_fk(k: i64, d: i32, delta: f64, lambda: f64) -> Result<Profile> {
    Profile::new(k, d, delta, lambda)
}

/// Panels on [1−δ, 1], geometrically refined toward h = 1 where the high
/// modes concentrate.
fn layer_panels(delta: f64) -> Vec<(f64, f64)> {
    let mut edges = vec![1.0 - delta];
    let mut w = delta;
    while w > 1e-6 {
        w *= 0.6;
        edges.push(1.0 - w);
    }
    edges.push(1.0);
    edges.windows(2).map(|e| (e[0], e[1])).collect()
}

/// Profiles for k = −K..=K sampled on a set of h values.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    pub d: i32,
    pub k_max: usize,
    pub h: Vec<f64>,
    profiles: Vec<Profile>,
    values: Vec<f64>,
}

impl ProfileTable {
    pub fn new(d: i32, params: &MoebiusParams, h: Vec<f64>) -> Result<Self> {
        params.validate(d)?;
        let k = params.k_max as i64;
        let profiles = (-k..=k)
            .map(|k| Profile::new(k, d, params.delta, params.lambda))
            .collect::<Result<Vec<_>>>()?;
        let values = profiles
            .iter()
            .flat_map(|p| h.iter().map(move |&x| p.value(x)))
            .collect();
        Ok(ProfileTable {
            d,
            k_max: params.k_max,
            h,
            profiles,
            values,
        })
    }

    pub fn profile(&self, k: i64) -> &Profile {
        &self.profiles[(k + self.k_max as i64) as usize]
    }

    pub fn row(&self, k: i64) -> &[f64] {
        let n = self.h.len();
        let idx = (k + self.k_max as i64) as usize;
        &self.values[idx * n..(idx + 1) * n]
    }
}

/// `(t²π/d)[Φ₋₁ + (t−2)² Σ_{k=0}^{K} (1−t)^{2k} Φ_k]` with the closed-form Φ_k.
pub fn m_lambda_series(d: i32, params: &MoebiusParams) -> Result<f64> {
    params.validate(d)?;
    let t = params.t;
    let phi = |k: i64| Profile::new(k, d, params.delta, params.lambda).map(|p| p.phi());
    let mut sum = 0.0;
    let q = (1.0 - t) * (1.0 - t);
    let mut w = 1.0;
    for k in 0..=params.k_max as i64 {
        sum += w * phi(k)?;
        w *= q;
    }
    Ok(t * t * PI / d as f64 * (phi(-1)? + (t - 2.0).powi(2) * sum))
}

/// Mode coefficients of w_t at potential level h, as (mode, coefficient, h-derivative).
fn wt_modes(d: i32, params: &MoebiusParams, h: f64) -> Result<Vec<(i64, f64, f64)>> {
    let t = params.t;
    let mut out = Vec::with_capacity(params.k_max + 2);
    let p = Profile::new(-1, d, params.delta, params.lambda)?;
    out.push((d as i64, 1.0 - t * p.value(h), -t * p.derivative(h)));
    let mut c = t * (t - 2.0);
    for k in 0..=params.k_max as i64 {
        let p = Profile::new(k, d, params.delta, params.lambda)?;
        out.push((-(k - d as i64 + 1), c * p.value(h), c * p.derivative(h)));
        c *= 1.0 - t;
    }
    Ok(out)
}

/// Quadrature of the penalized functional
/// `(1/2d)∫(d²|∂_h w|² + |∂_θ w|² + λ|w − e^{idθ}|² − d²|w|²) dh dθ`
/// over the layer, with w synthesized on an (h, θ) grid.
pub fn m_lambda_quadrature(d: i32, params: &MoebiusParams) -> Result<f64> {
    params.validate(d)?;
    let n_t = (2 * (params.k_max + d as usize + 2)).next_power_of_two();
    let inv = FftPlanner::<f64>::new().plan_fft_inverse(n_t);
    let d2 = (d * d) as f64;
    let lambda = params.lambda;
    let ht = TAU / n_t as f64;
    let base: Vec<Complex64> = (0..n_t).map(|j| Complex64::from_polar(1.0, d as f64 * j as f64 * ht)).collect();
    let mut total = 0.0;
    for (a, b) in layer_panels(params.delta) {
        let nodes: Vec<(f64, f64)> = RULE10.with(|r| r.on(a, b).collect());
        for (h, wh) in nodes {
            let modes = wt_modes(d, params, h)?;
            let mut w = vec![Complex64::default(); n_t];
            let mut w_h = vec![Complex64::default(); n_t];
            let mut w_t = vec![Complex64::default(); n_t];
            for &(m, c, dc) in &modes {
                let bin = m.rem_euclid(n_t as i64) as usize;
                w[bin] += c;
                w_h[bin] += dc;
                w_t[bin] += Complex64::new(0.0, m as f64 * c);
            }
            inv.process(&mut w);
            inv.process(&mut w_h);
            inv.process(&mut w_t);
            let mut row = 0.0;
            for j in 0..n_t {
                row += d2 * w_h[j].norm_sqr() + w_t[j].norm_sqr() + lambda * (w[j] - base[j]).norm_sqr()
                    - d2 * w[j].norm_sqr();
            }
            total += wh * row * ht;
        }
    }
    Ok(total / (2.0 * d as f64))
}

/// Potential coordinate of radius r for the degree-d harmonic map: 1 + d log(r/R₂).
fn layer_coordinate(d: i32, annulus: &Annulus, r: f64) -> f64 {
    1.0 + d as f64 * (r / annulus.r_outer()).ln()
}

/// The truncated Möbius layer map: `e^{idθ}` outside the layer
/// `1 − δ < h < 1`, the series inside, boundary-renormalized.
pub fn build_wt(d: i32, params: &MoebiusParams, mesh: &Arc<Mesh>) -> Result<ComplexField> {
    params.validate(d)?;
    let tail = params.tail_bound();
    if tail > TAIL_LIMIT {
        return Err(Error::TruncationTooCoarse { tail });
    }
    let a = mesh.annulus();
    let (n_r, n_t) = (mesh.n_r(), mesh.n_t());
    let layer: Vec<usize> = (0..n_r)
        .filter(|&i| layer_coordinate(d, a, mesh.r(i)) > 1.0 - params.delta)
        .collect();
    if layer.len() < MIN_LAYER_ROWS {
        return Err(Error::InvalidGrid(format!(
            "boundary layer holds {} grid rows, need at least {MIN_LAYER_ROWS}",
            layer.len()
        )));
    }
    let inv = FftPlanner::<f64>::new().plan_fft_inverse(n_t);
    let mut u = crate::harmonic::harmonic_minimizer(d, mesh);
    let mut spec = vec![Complex64::default(); n_t];
    for &i in &layer {
        let h = layer_coordinate(d, a, mesh.r(i)).min(1.0);
        spec.iter_mut().for_each(|c| *c = Complex64::default());
        for (m, c, _) in wt_modes(d, params, h)? {
            spec[m.rem_euclid(n_t as i64) as usize] += c;
        }
        inv.process(&mut spec);
        u.values[i * n_t..(i + 1) * n_t].copy_from_slice(&spec);
    }
    renormalize_boundary(&u)
}

/// `|ρ_source| · w`, boundary-renormalized: the layer map transplanted onto
/// the modulus of a computed minimizer.
pub fn with_modulus_of(w: &ComplexField, source: &ComplexField) -> Result<ComplexField> {
    if !w.same_mesh(source) {
        return Err(Error::MeshMismatch);
    }
    let values = w.values.iter().zip(&source.values).map(|(a, b)| a * b.norm()).collect();
    renormalize_boundary(&ComplexField { mesh: w.mesh.clone(), values })
}

/// A map given in closed form on the plane.
pub trait PlanarMap {
    fn value(&self, z: Complex64) -> Complex64;

    /// (∂ₓu, ∂ᵧu), by default from central differences.
    fn gradient(&self, z: Complex64) -> (Complex64, Complex64) {
        let h = 1e-7 * z.norm().max(1.0);
        let dx = (self.value(z + h) - self.value(z - h)) / (2.0 * h);
        let i = Complex64::new(0.0, h);
        let dy = (self.value(z + i) - self.value(z - i)) / (2.0 * h);
        (dx, dy)
    }

    /// Points where the map varies on a short length scale, with that scale.
    fn features(&self) -> Vec<(Complex64, f64)> {
        Vec::new()
    }

    fn sample(&self, mesh: &Arc<Mesh>) -> ComplexField {
        ComplexField::from_fn(mesh, |z| self.value(z))
    }
}

/// Energy of a closed-form map over the annulus by adaptive quadrature in
/// polar coordinates (absolute tolerance `tol` per term).
pub fn continuum_energy<M: PlanarMap + ?Sized>(map: &M, annulus: &Annulus, eps: f64, tol: f64) -> EnergyReport {
    let rect = [annulus.r_inner(), annulus.r_outer(), 0.0, TAU];
    let features = map.features();
    let force = |cell: [f64; 4]| {
        let [r0, r1, t0, t1] = cell;
        let size = (r1 - r0).max(r1 * (t1 - t0));
        features.iter().any(|&(z, scale)| {
            let (r, t) = (z.norm(), z.arg().rem_euclid(TAU));
            let m = 2.0 * scale;
            let near_t = (t0..=t1).contains(&t) || (t - t0).abs() * r < m || (t - t1).abs() * r < m;
            size > 0.25 * scale && r > r0 - m && r < r1 + m && near_t
        })
    };
    let dirichlet = adaptive_2d_forced(
        |r, t| {
            let (gx, gy) = map.gradient(Complex64::from_polar(r, t));
            0.5 * (gx.norm_sqr() + gy.norm_sqr()) * r
        },
        rect,
        (8, 64),
        tol,
        force,
    );
    let potential = adaptive_2d_forced(
        |r, t| {
            let q = map.value(Complex64::from_polar(r, t)).norm_sqr() - 1.0;
            q * q * r
        },
        rect,
        (8, 64),
        tol * 4.0 * eps * eps,
        force,
    ) / (4.0 * eps * eps);
    EnergyReport {
        dirichlet,
        potential,
        total: dirichlet + potential,
        epsilon: eps,
    }
}

/// The unit-disk vortex `v(z) = (ζ̄/|ζ|)(z − ζ)/(ζ̄z − 1)`: zero at ζ, pole
/// (the ghost antivortex) at 1/ζ̄, unimodular on |z| = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexPair {
    pub zeta: Complex64,
}

impl VortexPair {
    pub fn new(zeta: Complex64) -> Result<Self> {
        let r = zeta.norm();
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParameter {
                name: "zeta",
                reason: format!("need 0 < |ζ| < 1, got {r}"),
            });
        }
        Ok(VortexPair { zeta })
    }

    pub fn ghost(&self) -> Complex64 {
        1.0 / self.zeta.conj()
    }
}

impl PlanarMap for VortexPair {
    fn value(&self, z: Complex64) -> Complex64 {
        let zb = self.zeta.conj();
        zb / self.zeta.norm() * (z - self.zeta) / (zb * z - 1.0)
    }

    fn gradient(&self, z: Complex64) -> (Complex64, Complex64) {
        // holomorphic: ∂ₓ = v', ∂ᵧ = i v'
        let zb = self.zeta.conj();
        let c = zb / self.zeta.norm();
        let den = zb * z - 1.0;
        let dv = c * (zb * self.zeta - 1.0) / (den * den);
        (dv, Complex64::new(0.0, 1.0) * dv)
    }

    fn features(&self) -> Vec<(Complex64, f64)> {
        vec![(self.zeta, 1.0 - self.zeta.norm())]
    }
}

/// The vortex pair sampled on a mesh of the unit-disk chart (R₂ = 1).
pub fn appendix_a_field(zeta: Complex64, mesh: &Arc<Mesh>) -> Result<ComplexField> {
    if (mesh.annulus().r_outer() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidAnnulus("the vortex pair lives on a chart with R2 = 1".into()));
    }
    Ok(VortexPair::new(zeta)?.sample(mesh))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub zero: Complex64,
    pub pole: Complex64,
    /// max | |v| − 1 | over the outer row.
    pub boundary_deviation: f64,
}

fn newton<F: Fn(Complex64) -> Complex64>(f: F, mut z: Complex64) -> Complex64 {
    for _ in 0..100 {
        let h = 1e-7 * z.norm().max(1e-3);
        let df = (f(z + h) - f(z - h)) / (2.0 * h);
        let step = f(z) / df;
        z -= step;
        if step.norm() < 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Locates the zero of a holomorphic-in-z field from its sampled minimum
/// modulus, then its pole by Newton on 1/v from the reflected point.
pub fn factorization_diagnostic<M: PlanarMap>(map: &M, sampled: &ComplexField) -> Factorization {
    let m = &sampled.mesh;
    let (k_min, _) = sampled
        .values
        .iter()
        .enumerate()
        .map(|(k, z)| (k, z.norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty field");
    let start = m.point(k_min / m.n_t(), k_min % m.n_t());
    let zero = newton(|z| map.value(z), start);
    let pole = newton(|z| 1.0 / map.value(z), 1.0 / zero.conj());
    let last = m.n_r() - 1;
    let boundary_deviation = sampled
        .row(last)
        .iter()
        .map(|z| (z.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    Factorization {
        zero,
        pole,
        boundary_deviation,
    }
}

/// `(z/|z|)^d · (z − z₀)/|z − z₀| · f(|z − z₀|/ε)` with `f(ρ) = ρ/√(ρ² + 2)`:
/// an interior vortex with a core of size ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorVortex {
    pub d: i32,
    pub center: Complex64,
    pub eps: f64,
}

impl PlanarMap for InteriorVortex {
    fn value(&self, z: Complex64) -> Complex64 {
        let w = z - self.center;
        let rho = w.norm();
        let core = if rho > 0.0 {
            w / rho * (rho / self.eps) / ((rho / self.eps).powi(2) + 2.0).sqrt()
        } else {
            Complex64::default()
        };
        (z / z.norm()).powi(self.d) * core
    }

    fn features(&self) -> Vec<(Complex64, f64)> {
        vec![(self.center, self.eps)]
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Which boundary circle a factor is anchored at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Inner,
    Outer,
}

/// A Blaschke-type factor anchored near one boundary circle.
///
/// The outer factor `(z − ζ)/(ζ̄z/R₂ − R₂)` has a zero at ζ (just inside R₂)
/// and is unimodular on |z| = R₂; it winds once around the outer circle and
/// not around the inner one. The inner factor `(z − α)/(ᾱz/R₁ − R₁)` is
/// unimodular on |z| = R₁ and winds −1 there, 0 on the outer circle. Each is
/// corrected in modulus toward the opposite circle, so it is exactly
/// unimodular on both circles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFactor {
    pub side: Side,
    pub anchor: Complex64,
    /// Use the conjugate factor (opposite winding).
    pub conjugate: bool,
}

impl BoundaryFactor {
    pub fn new(side: Side, annulus: &Annulus, offset: f64, angle: f64, conjugate: bool) -> Result<Self> {
        if !(offset > 0.0 && offset < 0.5 * (annulus.r_outer() - annulus.r_inner())) {
            return Err(Error::InvalidParameter {
                name: "offset",
                reason: format!("need 0 < offset < half the annulus width, got {offset}"),
            });
        }
        let r = match side {
            Side::Outer => annulus.r_outer() - offset,
            Side::Inner => annulus.r_inner() + offset,
        };
        Ok(BoundaryFactor {
            side,
            anchor: Complex64::from_polar(r, angle),
            conjugate,
        })
    }

    /// Change of (inner, outer) degree caused by multiplying with this factor.
    pub fn degree_shift(&self) -> (i32, i32) {
        let s = if self.conjugate { -1 } else { 1 };
        match self.side {
            Side::Outer => (0, s),
            Side::Inner => (-s, 0),
        }
    }

    pub fn value(&self, z: Complex64, annulus: &Annulus) -> Complex64 {
        let a = self.anchor;
        let v = annulus.v_exact(z.norm());
        let (raw, psi) = match self.side {
            Side::Outer => {
                let r2 = annulus.r_outer();
                ((z - a) / (a.conj() * z / r2 - r2), smoothstep(2.0 * v))
            }
            Side::Inner => {
                let r1 = annulus.r_inner();
                ((z - a) / (a.conj() * z / r1 - r1), smoothstep(2.0 * (1.0 - v)))
            }
        };
        let n = raw.norm();
        let f = if n > 0.0 { raw * n.powf(psi - 1.0) } else { raw };
        if self.conjugate {
            f.conj()
        } else {
            f
        }
    }
}

/// `e^{idθ}` times boundary factors: an explicit map of boundary degrees (p, q).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleMap {
    pub p: i32,
    pub q: i32,
    pub d: i32,
    pub offset: f64,
    pub annulus: Annulus,
    pub factors: Vec<BoundaryFactor>,
}

impl AdmissibleMap {
    /// |q − d| outer factors and |p − d| inner factors, spread evenly in angle.
    pub fn new(p: i32, q: i32, d: i32, offset: f64, annulus: &Annulus) -> Result<Self> {
        let mut factors = Vec::new();
        let n_out = (q - d).unsigned_abs() as usize;
        for k in 0..n_out {
            let angle = TAU * k as f64 / n_out as f64;
            factors.push(BoundaryFactor::new(Side::Outer, annulus, offset, angle, q < d)?);
        }
        let n_in = (p - d).unsigned_abs() as usize;
        for k in 0..n_in {
            let angle = PI / n_in as f64 + TAU * k as f64 / n_in as f64;
            factors.push(BoundaryFactor::new(Side::Inner, annulus, offset, angle, p > d)?);
        }
        Ok(AdmissibleMap {
            p,
            q,
            d,
            offset,
            annulus: *annulus,
            factors,
        })
    }
}

impl PlanarMap for AdmissibleMap {
    fn value(&self, z: Complex64) -> Complex64 {
        let mut u = (z / z.norm()).powi(self.d);
        for f in &self.factors {
            u *= f.value(z, &self.annulus);
        }
        u
    }

    fn features(&self) -> Vec<(Complex64, f64)> {
        self.factors.iter().map(|f| (f.anchor, self.offset)).collect()
    }
}

/// The admissible map sampled on a mesh and verified: boundary degrees must
/// come out as (p, q) and abdeg must lie in [d − ½, d + ½].
pub fn admissible_map(p: i32, q: i32, d: i32, offset: f64, mesh: &Arc<Mesh>) -> Result<ComplexField> {
    let spacing = mesh.max_radial_spacing();
    if p != d || q != d {
        if !(offset > spacing) {
            return Err(Error::InvalidParameter {
                name: "offset",
                reason: format!("offset {offset} must exceed the radial spacing {spacing}"),
            });
        }
    }
    let map = AdmissibleMap::new(p, q, d, offset, mesh.annulus())?;
    let u = renormalize_boundary(&map.sample(mesh))?;
    let got = boundary_degrees(&u)?;
    if got != (p, q) {
        return Err(Error::UnreachableDegrees(format!(
            "requested (p, q) = ({p}, {q}), sampled map has {got:?}"
        )));
    }
    let v = crate::domain::solve_v(mesh)?;
    let a = abdeg(&u, &v)?;
    let (lo, hi) = (d as f64 - 0.5, d as f64 + 0.5);
    if !(a >= lo && a <= hi) {
        return Err(Error::WindowViolation { abdeg: a, lo, hi });
    }
    Ok(u)
}

/// Multiplies a field by one boundary factor (sampled) and renormalizes.
pub fn insert_factor(u: &ComplexField, factor: &BoundaryFactor) -> Result<ComplexField> {
    let a = *u.mesh.annulus();
    let f = ComplexField::from_fn(&u.mesh, |z| factor.value(z, &a));
    renormalize_boundary(&u.multiply(&f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;
    use crate::field::energy;
    use crate::topology::{boundary_degree, find_vortices, Contour};

    #[test]
    fn blaschke_basics() {
        let t = 0.3;
        assert!(blaschke(Complex64::new(1.0 - t, 0.0), t).norm() < 1e-15);
        for k in 0..50 {
            let z = Complex64::from_polar(1.0, 0.37 * k as f64);
            assert!((blaschke(z, t).norm() - 1.0).abs() < 1e-14);
        }
        let m = Mesh::new(Annulus::new(0.5, 1.0).unwrap(), Grid::new(16, 256).unwrap());
        let f = ComplexField::from_fn(&m, |z| moebius_datum(z / z.norm(), 0.2));
        assert_eq!(boundary_degree(&f, &Contour::outer(&m)).unwrap(), -1);
    }

    #[test]
    fn profile_endpoints() {
        for k in [-1i64, 0, 1, 7, 100, 400] {
            for d in [1, 2] {
                let p = profile_fk(k, d, 0.45, 2.0 * (d * d) as f64).unwrap();
                assert!((p.value(1.0) - 1.0).abs() < 1e-12);
                assert!(p.value(0.55).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phi_closed_form_vs_quadrature_and_asymptote() {
        for (k, d) in [(-1i64, 1), (0, 1), (5, 2), (60, 1)] {
            let p = profile_fk(k, d, 0.4, 3.0 * (d * d) as f64).unwrap();
            assert!((p.phi() - p.phi_quadrature()).abs() < 1e-9 * p.phi(), "k={k}");
        }
        let (k, d, lambda) = (1000i64, 1, 2.0);
        let p = profile_fk(k, d, 0.45, lambda).unwrap();
        let m = (k - d as i64 + 1) as f64;
        let asym = d as f64 * m * (1.0 + (lambda - 1.0) / (2.0 * (k * k) as f64));
        assert!((p.phi() - asym).abs() / asym < 1e-2);
    }

    #[test]
    fn profile_table_rows() {
        let params = MoebiusParams::new(0.05, 0.45, 2.0, 60, 1).unwrap();
        let table = ProfileTable::new(1, &params, vec![0.55, 0.8, 1.0]).unwrap();
        for k in -60..=60 {
            let row = table.row(k);
            assert!(row[0].abs() < 1e-12 && (row[2] - 1.0).abs() < 1e-12);
            assert_eq!(table.profile(k).k, k);
        }
    }

    #[test]
    fn params_validation() {
        assert!(MoebiusParams::new(0.0, 0.4, 2.0, 400, 1).is_err());
        assert!(MoebiusParams::new(0.05, 0.5, 2.0, 400, 1).is_err());
        assert!(MoebiusParams::new(0.05, 0.4, 1.9, 400, 1).is_err());
        assert!(MoebiusParams::new(0.05, 0.4, 2.0, 49, 1).is_err());
        let p = MoebiusParams::with_penalty_rule(1, 0.02, &Annulus::reference()).unwrap();
        assert!(p.lambda > 8e4);
    }

    #[test]
    fn m_lambda_quadrature_matches_series() {
        let params = MoebiusParams::new(0.05, 0.45, 2.0, 400, 1).unwrap();
        let series = m_lambda_series(1, &params).unwrap();
        let quad = m_lambda_quadrature(1, &params).unwrap();
        assert!((series - quad).abs() < 1e-6 * series, "{series} {quad}");
        assert!(series < PI);
    }

    #[test]
    fn wt_degrees_and_limit() {
        let a = Annulus::reference();
        let mesh = Mesh::new(a, Grid::new(120, 512).unwrap());
        let base = crate::harmonic::harmonic_minimizer(1, &mesh);
        let mut prev = f64::INFINITY;
        for t in [0.2, 0.1, 0.05] {
            let params = MoebiusParams::new(t, 0.45, 2.0, 400, 1).unwrap();
            let w = build_wt(1, &params, &mesh).unwrap();
            assert_eq!(boundary_degrees(&w).unwrap(), (1, 0));
            let dist = crate::field::l2_distance(&w, &base).unwrap();
            assert!(dist < prev);
            prev = dist;
        }
        let coarse = Mesh::new(a, Grid::new(16, 64).unwrap());
        let params = MoebiusParams::new(0.05, 0.05, 2.0, 400, 1).unwrap();
        assert!(matches!(build_wt(1, &params, &coarse), Err(Error::InvalidGrid(_))));
        let params = MoebiusParams::new(0.01, 0.45, 2.0, 60, 1).unwrap();
        assert!(matches!(build_wt(1, &params, &mesh), Err(Error::TruncationTooCoarse { .. })));
    }

    #[test]
    fn vortex_pair_factorization() {
        let m = Mesh::new(Annulus::new(0.5, 1.0).unwrap(), Grid::new(64, 512).unwrap());
        let zeta = Complex64::from_polar(0.9, 0.4);
        let pair = VortexPair::new(zeta).unwrap();
        let u = appendix_a_field(zeta, &m).unwrap();
        let f = factorization_diagnostic(&pair, &u);
        assert!((f.zero - zeta).norm() < 1e-6);
        assert!((f.pole - pair.ghost()).norm() < 1e-6);
        assert!(f.boundary_deviation < 1e-12);
        let vs = find_vortices(&u, 0.5).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs.entries[0].winding, 1);
    }

    #[test]
    fn vortex_pair_energy_is_disk_area_deficit() {
        // ½∫|∇v|² over B₁ \ B_{1/2} = π − area(v(B_{1/2})) for a disk automorphism
        let a = Annulus::new(0.5, 1.0).unwrap();
        let zeta = Complex64::new(0.0, 0.8);
        let pair = VortexPair::new(zeta).unwrap();
        let e = continuum_energy(&pair, &a, 0.1, 1e-9);
        // v(B_{1/2}) is a disk; its area from the image of the circle
        let n = 4096;
        let pts: Vec<Complex64> = (0..n).map(|k| pair.value(Complex64::from_polar(0.5, TAU * k as f64 / n as f64))).collect();
        let area: f64 = (0..n).map(|k| {
            let (p, q) = (pts[k], pts[(k + 1) % n]);
            0.5 * (p.re * q.im - p.im * q.re)
        }).sum::<f64>().abs();
        assert!((e.dirichlet - (PI - area)).abs() < 1e-6, "{} vs {}", e.dirichlet, PI - area);
    }

    #[test]
    fn admissible_map_degrees_and_identity() {
        let a = Annulus::reference();
        let mesh = Mesh::new(a, Grid::new(200, 1024).unwrap());
        let u = admissible_map(1, 1, 1, 0.05, &mesh).unwrap();
        let h = crate::harmonic::harmonic_minimizer(1, &mesh);
        assert!(u.values.iter().zip(&h.values).all(|(x, y)| (x - y).norm() < 1e-14));
        for (p, q, d) in [(1, 0, 1), (0, 1, 1), (0, 0, 1), (2, 0, 1), (1, 3, 2)] {
            let u = admissible_map(p, q, d, 0.05, &mesh).unwrap();
            assert_eq!(boundary_degrees(&u).unwrap(), (p, q));
            // exactly unimodular on the boundary before renormalization
            let raw = AdmissibleMap::new(p, q, d, 0.05, &a).unwrap().sample(&mesh);
            assert!(raw.boundary_deviation().0 < 1e-3);
        }
        assert!(admissible_map(1, 0, 1, 1e-4, &mesh).is_err());
    }

    #[test]
    fn grid_and_continuum_energies_agree_at_moderate_offset() {
        let a = Annulus::reference();
        let eps = 0.1;
        let map = AdmissibleMap::new(1, 0, 1, 0.1, &a).unwrap();
        let cont = continuum_energy(&map, &a, eps, 1e-7);
        let mesh = Mesh::new(a, Grid::new(400, 2048).unwrap());
        let grid = energy(&renormalize_boundary(&map.sample(&mesh)).unwrap(), eps);
        assert!((cont.total - grid.total).abs() / cont.total < 5e-3, "{} {}", cont.total, grid.total);
    }
}
