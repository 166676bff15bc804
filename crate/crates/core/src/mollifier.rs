//! Mollification by averaging over rotations near the identity.
//!
//! `f_k(u) = int f(rho u) w_k(rho) d nu(rho)` with `w_k(rho) = c_k xi(k^2 |rho - I|^2)` and `nu`
//! the Haar probability measure on SO(3). The integral is estimated with one shared set of
//! sampled rotations, so `f_k` is a fixed function of `u` (constants stay constant and linear
//! functions stay linear exactly).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use nalgebra::{Matrix3, Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::node_data;
use crate::error::{Error, Result};
use crate::function::{builtin, FunctionSpec, Smoothness, SphericalFunction};
use crate::sphere_grid::{gauss_interval, SphereGrid, Vec3};

/// `exp(-1/(1-t^2))` on `(-1, 1)`, zero outside.
pub fn xi(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RotationKernel {
    pub k: u32,
    /// Normalizer making `w_k` a probability density against Haar measure.
    pub c_k: f64,
}

impl RotationKernel {
    pub fn new(k: u32) -> Result<RotationKernel> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "kernel sharpness k must be positive".into(),
            ));
        }
        // Haar measure of SO(3) in the rotation angle: (1 - cos a) / pi da on [0, pi];
        // |rho - I|_F^2 = 4 (1 - cos a).
        let kk = (k as f64).powi(2);
        let (x, w) = gauss_interval(64, 0.0, Self::max_angle_for(k));
        let mass: f64 = x
            .iter()
            .zip(&w)
            .map(|(a, wi)| wi * xi(kk * 4.0 * (1.0 - a.cos())) * (1.0 - a.cos()) / PI)
            .sum();
        Ok(RotationKernel { k, c_k: 1.0 / mass })
    }

    fn max_angle_for(k: u32) -> f64 {
        (1.0 - 1.0 / (4.0 * (k as f64).powi(2))).acos()
    }

    /// Largest rotation angle in the kernel support.
    pub fn max_angle(&self) -> f64 {
        Self::max_angle_for(self.k)
    }

    pub fn argument(&self, rho: &Matrix3<f64>) -> f64 {
        (self.k as f64).powi(2) * (rho - Matrix3::identity()).norm_squared()
    }

    /// `w_k(rho)`.
    pub fn weight(&self, rho: &Matrix3<f64>) -> f64 {
        self.c_k * xi(self.argument(rho))
    }

    /// Haar-distributed rotations conditioned on the kernel support: uniform axis, angle with
    /// density proportional to `1 - cos a` on `[0, max_angle]` (by rejection).
    pub fn sample_rotations(&self, n: usize, rng: &mut impl Rng) -> Vec<Matrix3<f64>> {
        let amax = self.max_angle();
        let cap = 1.0 - amax.cos();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let a = rng.gen_range(0.0..amax);
            if rng.gen::<f64>() * cap > 1.0 - a.cos() {
                continue;
            }
            let axis: [f64; 3] = UnitSphere.sample(rng);
            let rot =
                Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::from(axis)), a).into_inner();
            if self.argument(&rot) <= 1.0 {
                out.push(rot);
            }
        }
        out
    }

    /// Monte Carlo estimate of `int w_k d nu` from `n` Haar samples restricted to the support
    /// (the restriction has Haar mass computed in closed form), with its standard error.
    pub fn normalization_check(&self, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rots = self.sample_rotations(n, &mut rng);
        let amax = self.max_angle();
        let support_mass = (amax - amax.sin()) / PI;
        let w: Vec<f64> = rots.iter().map(|r| self.weight(r) * support_mass).collect();
        let mean = w.iter().sum::<f64>() / n as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (mean, (var / n as f64).sqrt())
    }
}

/// Minimum sample count accepted by [`mollify`].
pub const MIN_SAMPLES: usize = 1000;

/// `f_k` with its Monte Carlo standard error, memoized per evaluation point.
#[derive(Clone)]
pub struct Mollified {
    f: SphericalFunction,
    kernel: RotationKernel,
    rotations: Arc<Vec<(Matrix3<f64>, f64)>>,
    weight_sum: f64,
    seed: u64,
    memo: Arc<RwLock<HashMap<[u64; 3], (f64, f64)>>>,
}

impl std::fmt::Debug for Mollified {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("Mollified")
            .field("f", &self.f.label())
            .field("k", &self.kernel.k)
            .field("samples", &self.rotations.len())
            .field("seed", &self.seed)
            .finish()
    }
}

pub fn mollify(f: &SphericalFunction, k: u32, samples: usize, seed: u64) -> Result<Mollified> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "{samples} rotation samples; at least {MIN_SAMPLES} required"
        )));
    }
    let kernel = RotationKernel::new(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotations: Vec<(Matrix3<f64>, f64)> = kernel
        .sample_rotations(samples, &mut rng)
        .into_iter()
        .map(|r| {
            let w = kernel.weight(&r);
            (r, w)
        })
        .collect();
    let weight_sum = rotations.iter().map(|(_, w)| w).sum();
    Ok(Mollified {
        f: f.clone(),
        kernel,
        rotations: Arc::new(rotations),
        weight_sum,
        seed,
        memo: Arc::new(RwLock::new(HashMap::new())),
    })
}

impl Mollified {
    pub fn kernel(&self) -> RotationKernel {
        self.kernel
    }

    pub fn samples(&self) -> usize {
        self.rotations.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rotations(&self) -> impl Iterator<Item = &Matrix3<f64>> {
        self.rotations.iter().map(|(r, _)| r)
    }

    fn compute(&self, u: &Vec3) -> (f64, f64) {
        let vals: Vec<f64> = self
            .rotations
            .iter()
            .map(|(r, _)| self.f.eval(&(r * u)))
            .collect();
        let mean = self
            .rotations
            .iter()
            .zip(&vals)
            .map(|((_, w), v)| w * v)
            .sum::<f64>()
            / self.weight_sum;
        // standard error of the self-normalized estimator
        let var = self
            .rotations
            .iter()
            .zip(&vals)
            .map(|((_, w), v)| (w * (v - mean)).powi(2))
            .sum::<f64>()
            / (self.weight_sum * self.weight_sum);
        (mean, var.sqrt())
    }

    /// `(f_k(u), sigma_hat(u))`.
    pub fn value(&self, u: &Vec3) -> (f64, f64) {
        let key = [u.x.to_bits(), u.y.to_bits(), u.z.to_bits()];
        if let Some(v) = self.memo.read().expect("memo lock").get(&key) {
            return *v;
        }
        let v = self.compute(u);
        self.memo
            .write()
            .expect("memo lock")
            .entry(key)
            .or_insert(v);
        v
    }

    /// Values and standard errors at a set of points (evaluated in parallel, memoized).
    pub fn values(&self, points: &[Vec3]) -> Vec<(f64, f64)> {
        points.par_iter().map(|u| self.value(u)).collect()
    }

    /// `f_k` as a spherical function flagged C-infinity; intermediate evaluations (such as
    /// finite-difference stencil points) bypass the memo.
    pub fn function(&self) -> SphericalFunction {
        let me = self.clone();
        let label = format!("mollified[k={}]({})", self.kernel.k, self.f.label());
        let g = SphericalFunction::new(label, Smoothness::Cinf, move |u| me.compute(u).0);
        match self.f.spec() {
            Some(base) => g.with_spec(FunctionSpec::Mollified {
                base: Box::new(base.clone()),
                k: self.kernel.k,
                samples: self.rotations.len(),
                seed: self.seed,
            }),
            None => g,
        }
    }

    /// `a_k = sum w_i rho_i^T a / sum w_i`, the image of the linear function `(a, .)`.
    pub fn linear_image(&self, a: &Vec3) -> Vec3 {
        self.rotations
            .iter()
            .map(|(r, w)| r.transpose() * a * *w)
            .sum::<Vec3>()
            / self.weight_sum
    }
}

/// Sup over nodes of `|f_k - f|` and the largest standard error among those nodes.
pub fn sup_error(m: &Mollified, f: &SphericalFunction, grid: &SphereGrid) -> (f64, f64) {
    let vals = m.values(grid.nodes());
    let mut worst = (0.0f64, 0.0f64);
    for ((v, s), u) in vals.iter().zip(grid.nodes()) {
        let e = (v - f.eval(u)).abs();
        if e > worst.0 {
            worst = (e, *s);
        }
    }
    let smax = vals.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    (worst.0, smax)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferRow {
    pub phi: String,
    pub k: u32,
    /// `int f det Q(phi)`.
    pub original: f64,
    /// `int f_k det Q(phi)`.
    pub mollified: f64,
    /// Monte Carlo standard error of `mollified` (node errors propagated as independent).
    pub sigma: f64,
    pub agree: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferReport {
    pub p: [f64; 3],
    pub theta: f64,
    pub theta_prime: f64,
    pub zero_tolerance: f64,
    pub rows: Vec<TransferRow>,
}

impl TransferReport {
    pub fn agreements(&self, k: u32) -> (usize, usize) {
        let rows: Vec<&TransferRow> = self.rows.iter().filter(|r| r.k == k).collect();
        (rows.iter().filter(|r| r.agree).count(), rows.len())
    }
}

/// Five smooth bumps supported in the cap `I_{theta'}(p)`, with different centers, radii and
/// tilts.
pub fn transfer_battery(p: &Vec3, theta_prime: f64) -> Result<Vec<SphericalFunction>> {
    let frame = crate::sphere_grid::frame_about(p);
    let shift = |a: f64, d: f64| -> Vec3 {
        let dir = frame.e1 * a.cos() + frame.e2 * a.sin();
        (p * d.cos() + dir * d.sin()).normalize()
    };
    let tp = theta_prime;
    let specs = [
        (*p, tp * 0.95, Vec3::zeros()),
        (*p, tp * 0.5, Vec3::new(0.3, -0.2, 0.1)),
        (shift(0.0, tp * 0.4), tp * 0.5, Vec3::zeros()),
        (shift(2.0, tp * 0.3), tp * 0.6, Vec3::new(-0.4, 0.4, 0.2)),
        (shift(4.0, tp * 0.55), tp * 0.4, Vec3::new(0.0, 0.5, -0.5)),
    ];
    specs
        .iter()
        .map(|(c, r, t)| builtin::cap_bump(*c, *r, *t))
        .collect()
}

/// For each battery function `phi` inside `I_{theta'}(p)` and each `k`, compares the sign of
/// `int f det Q(phi)` with that of `int f_k det Q(phi)`. Integrals below `zero_tolerance` in
/// absolute value count as zero; a pair agrees when both signs (or both zeros) match.
#[allow(clippy::too_many_arguments)]
pub fn mollified_inequality_transfer(
    f: &SphericalFunction,
    p: &Vec3,
    theta: f64,
    theta_prime: f64,
    ks: &[u32],
    samples: usize,
    seed: u64,
    grid: &SphereGrid,
) -> Result<TransferReport> {
    if !(theta_prime > 0.0 && theta_prime < theta) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < theta' < theta, got {theta_prime}, {theta}"
        )));
    }
    let zero_tolerance = 1e-8;
    let sign = |x: f64| {
        if x.abs() < zero_tolerance {
            0
        } else if x > 0.0 {
            1
        } else {
            -1
        }
    };
    let battery = transfer_battery(p, theta_prime)?;
    let mut rows = Vec::new();
    for &k in ks {
        let m = mollify(f, k, samples, seed)?;
        for (i, phi) in battery.iter().enumerate() {
            let quad = phi
                .support()
                .expect("bumps carry support")
                .quadrature(grid.level());
            let dets: Vec<f64> = node_data(phi, &quad)?.iter().map(|d| d.q.det()).collect();
            let fv = quad.map(|u| f.eval(u));
            let fk = m.values(&quad.nodes);
            let original: f64 = (0..quad.len())
                .map(|j| quad.weights[j] * fv[j] * dets[j])
                .sum();
            let mollified: f64 = (0..quad.len())
                .map(|j| quad.weights[j] * fk[j].0 * dets[j])
                .sum();
            let sigma = (0..quad.len())
                .map(|j| (quad.weights[j] * fk[j].1 * dets[j]).powi(2))
                .sum::<f64>()
                .sqrt();
            rows.push(TransferRow {
                phi: format!("bump{i}"),
                k,
                original,
                mollified,
                sigma,
                agree: sign(original) == sign(mollified),
            });
        }
    }
    Ok(TransferReport {
        p: crate::error::arr(p),
        theta,
        theta_prime,
        zero_tolerance,
        rows,
    })
}
