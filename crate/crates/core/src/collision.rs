//! Hard-sphere collision geometry, Povzner angular coefficients and the
//! closed-form Maxwellian reference constants.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::{norm2, norm_diff};
use crate::error::{Error, Result};
use crate::quadrature::{self, sphere_area, DEFAULT_ABS_TOL};

const UNIT_TOL: f64 = 1e-12;

/// Post-collisional velocities in the σ-parametrization:
/// `v' = (v+v*)/2 + |v-v*|/2 σ`, `v*' = (v+v*)/2 - |v-v*|/2 σ`.
pub fn post_collision(v: &[f64], vs: &[f64], sigma: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.len() != vs.len() {
        return Err(Error::DimensionMismatch(v.len(), vs.len()));
    }
    if sigma.len() != v.len() {
        return Err(Error::DimensionMismatch(sigma.len(), v.len()));
    }
    let s = norm2(sigma).sqrt();
    if (s - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitSigma(s));
    }
    let mut a = v.to_vec();
    let mut b = vs.to_vec();
    scatter(&mut a, &mut b, sigma);
    Ok((a, b))
}

/// In-place elastic scattering of a pair; `sigma` is assumed unit.
#[inline]
pub fn scatter(v: &mut [f64], vs: &mut [f64], sigma: &[f64]) {
    let half_g = 0.5 * norm_diff(v, vs);
    for k in 0..v.len() {
        let c = 0.5 * (v[k] + vs[k]);
        let h = half_g * sigma[k];
        v[k] = c + h;
        vs[k] = c - h;
    }
}

/// Uniform direction on `S^{d-1}` (normalized Gaussian vector).
pub fn sample_sigma<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut s = vec![0.0; dim];
    sample_sigma_into(&mut s, rng);
    s
}

pub fn sample_sigma_into<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    loop {
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let r = norm2(out).sqrt();
        if r > 1e-150 {
            out.iter_mut().for_each(|x| *x /= r);
            return;
        }
    }
}

/// Povzner coefficient
/// `ϱ_k = ∫_{S^{d-1}} [((1+û·σ)/2)^k + ((1-û·σ)/2)^k] dσ`,
/// evaluated by adaptive quadrature in the polar angle.
pub fn povzner_rho(k: f64, dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("povzner exponent must be >= 0, got {k}")));
    }
    // ((1+t)/2)^k with t = cos θ equals cos^{2k}(θ/2); the two halves of the
    // bracket contribute equally by the σ -> -σ symmetry.
    let norm = quadrature::polar_normalization(dim);
    let power = (dim - 2) as i32;
    let integral = quadrature::integrate(
        |theta: f64| (0.5 * theta).cos().max(0.0).powf(2.0 * k) * theta.sin().powi(power),
        0.0,
        PI,
        DEFAULT_ABS_TOL / (2.0 * norm),
    )?;
    Ok(2.0 * norm * integral)
}

/// `α_⋆ = (ϱ_{1/2} - 1) / (ϱ_{1/2} + 1)`.
pub fn alpha_star(dim: usize) -> Result<f64> {
    let rho = povzner_rho(0.5, dim)?;
    Ok((rho - 1.0) / (rho + 1.0))
}

/// Maxwellian `π^{-d/2} exp(-|ξ|²)` (mass 1, zero momentum, energy d/2).
pub fn maxwellian_density(xi: &[f64]) -> f64 {
    maxwellian_radial(norm2(xi).sqrt(), xi.len())
}

/// Maxwellian density at radius `r` in dimension `dim`.
pub fn maxwellian_radial(r: f64, dim: usize) -> f64 {
    PI.powf(-(dim as f64) / 2.0) * (-r * r).exp()
}

/// Coefficients of the rescaled equation evaluated at the Maxwellian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellianCoefficients {
    pub a0: f64,
    pub b0: f64,
    pub big_a0: f64,
    pub big_b0: f64,
}

/// Closed forms: `a0 = √(2π) |S^{d-1}| / |S^d|`, `b0 = (2d+1)/(2d) a0`,
/// `B0 = (b0 - a0)/2`, `A0 = d B0 - a0`.
pub fn maxwellian_coefficients(dim: usize) -> Result<MaxwellianCoefficients> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let d = dim as f64;
    let a0 = (2.0 * PI).sqrt() * sphere_area(dim - 1) / sphere_area(dim);
    let b0 = (2.0 * d + 1.0) / (2.0 * d) * a0;
    let big_b0 = 0.5 * (b0 - a0);
    let big_a0 = d * big_b0 - a0;
    Ok(MaxwellianCoefficients {
        a0,
        b0,
        big_a0,
        big_b0,
    })
}

/// Result of the angular Povzner inequality
/// `∫ (|v'|^{2k} + |v*'|^{2k}) dσ <= ϱ_k (|v|² + |v*|²)^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovznerCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Integrates the left side over the sphere and compares it with `ϱ_k (|v|²+|v*|²)^k`
/// up to `tol`.
pub fn povzner_angular_check(
    v: &[f64],
    vs: &[f64],
    k: f64,
    dim: usize,
    tol: f64,
) -> Result<PovznerCheck> {
    if v.len() != dim || vs.len() != dim {
        return Err(Error::DimensionMismatch(v.len().max(vs.len()), dim));
    }
    if k < 1.0 {
        return Err(Error::invalid(format!("povzner check needs k >= 1, got {k}")));
    }
    // |v'|² = |c|² + h² + 2h c·σ with c the pair center and h = |v - v*|/2.
    let c: Vec<f64> = v.iter().zip(vs).map(|(a, b)| 0.5 * (a + b)).collect();
    let c_norm = norm2(&c).sqrt();
    let h = 0.5 * norm_diff(v, vs);
    let base = c_norm * c_norm + h * h;
    let slope = 2.0 * h * c_norm;
    let energy = norm2(v) + norm2(vs);
    let lhs = quadrature::sphere_average(
        dim,
        |t| (base + slope * t).max(0.0).powf(k) + (base - slope * t).max(0.0).powf(k),
        DEFAULT_ABS_TOL * energy.powf(k).max(1.0),
    )?;
    let rhs = povzner_rho(k, dim)? * energy.powf(k);
    Ok(PovznerCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}
