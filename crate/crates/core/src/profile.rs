//! Extraction of the self-similar profile from rescaled snapshots, weighted
//! L¹ distances, and coefficients of radial profiles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::collision::maxwellian_radial;
use crate::error::{Error, Result};
use crate::histogram::RadialHistogram;
use crate::quadrature::{self, sphere_area, FixedRule};
use crate::rescale::CoefficientSet;

/// Polar nodes used for the angle-averaged kernel.
pub const KERNEL_NODES: usize = 64;
/// Radial sub-nodes per histogram bin in the coefficient double sum.
const SUB_NODES: usize = 3;

/// Averages tail histograms bin by bin and renormalizes to unit mass.
/// Per-bin standard errors are the spread across inputs over `√K`.
pub fn extract_profile(histograms: &[&RadialHistogram]) -> Result<RadialHistogram> {
    if histograms.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "profile extraction needs at least 2 snapshots, got {}",
            histograms.len()
        )));
    }
    let first = histograms[0];
    if histograms.iter().any(|h| !h.same_grid(first)) {
        return Err(Error::GridMismatch);
    }
    let k = histograms.len() as f64;
    let bins = first.bins();
    let mut mean = vec![0.0; bins];
    let mut sq = vec![0.0; bins];
    for h in histograms {
        for (i, &d) in h.density().iter().enumerate() {
            mean[i] += d;
            sq[i] += d * d;
        }
    }
    let mut stderr = vec![0.0; bins];
    for i in 0..bins {
        mean[i] /= k;
        let var = (sq[i] / k - mean[i] * mean[i]).max(0.0) * k / (k - 1.0);
        stderr[i] = (var / k).sqrt();
    }
    RadialHistogram::new(first.dim(), first.edges().to_vec(), mean)?
        .with_stderr(stderr)?
        .normalized()
}

/// Second argument of [`profile_distance`].
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Histogram(&'a RadialHistogram),
    /// Bin averages of the analytic Maxwellian on the first argument's grid.
    Maxwellian,
}

/// `Σ_k |ρ1 - ρ2| e^{a r_mid} |shell_k|`.
pub fn profile_distance(h1: &RadialHistogram, h2: Reference<'_>, a: f64) -> Result<f64> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("tail weight must be >= 0, got {a}")));
    }
    let owned;
    let other = match h2 {
        Reference::Histogram(h) => {
            if !h.same_grid(h1) {
                return Err(Error::GridMismatch);
            }
            h
        }
        Reference::Maxwellian => {
            owned = RadialHistogram::maxwellian_on(h1.dim(), h1.edges().to_vec())?;
            &owned
        }
    };
    Ok(h1
        .density()
        .iter()
        .zip(other.density())
        .zip(h1.r_mid().iter().zip(h1.shell_volumes()))
        .map(|((p, q), (r, v))| (p - q).abs() * (a * r).exp() * v)
        .sum())
}

/// Noise scale of [`profile_distance`] between two estimated histograms:
/// `Σ_k e^{a r_mid} |shell_k| √(s1_k² + s2_k²)`, the L¹ size of the
/// combined per-bin standard errors (missing errors count as zero).
pub fn distance_stderr(h1: &RadialHistogram, h2: &RadialHistogram, a: f64) -> Result<f64> {
    if !h1.same_grid(h2) {
        return Err(Error::GridMismatch);
    }
    let zeros = vec![0.0; h1.bins()];
    let s1 = h1.stderr().unwrap_or(&zeros);
    let s2 = h2.stderr().unwrap_or(&zeros);
    Ok(h1
        .r_mid()
        .iter()
        .zip(h1.shell_volumes())
        .enumerate()
        .map(|(k, (r, v))| (a * r).exp() * v * s1[k].hypot(s2[k]))
        .sum())
}

/// Angle-averaged relative speed `k_d(r, s) = ∫_{S^{d-1}} |r e - s σ| dσ`.
pub fn angle_averaged_kernel(r: f64, s: f64, dim: usize) -> f64 {
    KernelRule::new(dim).eval(r, s)
}

/// Gauss–Legendre rule in the polar angle with the `sin^{d-2}` weight folded in.
#[derive(Debug, Clone)]
pub struct KernelRule {
    cos: Vec<f64>,
    weights: Vec<f64>,
}

impl KernelRule {
    pub fn new(dim: usize) -> Self {
        let rule = FixedRule::new(KERNEL_NODES, 0.0, PI);
        let norm = quadrature::polar_normalization(dim);
        let p = (dim - 2) as i32;
        KernelRule {
            cos: rule.nodes.iter().map(|t| t.cos()).collect(),
            weights: rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(t, w)| norm * w * t.sin().powi(p))
                .collect(),
        }
    }

    pub fn eval(&self, r: f64, s: f64) -> f64 {
        let base = r * r + s * s;
        let cross = 2.0 * r * s;
        self.cos
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (base - cross * c).max(0.0).sqrt())
            .sum()
    }
}

/// Coefficients of a normalized radial profile:
/// `a = ∬|ξ-ξ*|ψψ*` and `b = (2/d)∬|ξ|²|ξ-ξ*|ψψ*` as radial double sums
/// against `k_d`, with `A`, `B` from the linear identities and `Bv = 0`.
pub fn profile_coefficients(h: &RadialHistogram, alpha: f64) -> Result<CoefficientSet> {
    h.require_normalized()?;
    let dim = h.dim();
    let kernel = KernelRule::new(dim);
    let (x, w) = quadrature::gauss_legendre(SUB_NODES);
    let p = (dim - 1) as i32;
    let mids = h.r_mid();
    let rho = h.density();
    // Log-slope of the density from neighbouring bins, used to shape the
    // mass inside each bin.
    let log_slope = |k: usize| -> f64 {
        let lo = if k > 0 && rho[k - 1] > 0.0 { k - 1 } else { k };
        let hi = if k + 1 < rho.len() && rho[k + 1] > 0.0 { k + 1 } else { k };
        if hi == lo {
            0.0
        } else {
            (rho[hi].ln() - rho[lo].ln()) / (mids[hi] - mids[lo])
        }
    };
    let mut radii = Vec::with_capacity(h.bins() * SUB_NODES);
    let mut masses = Vec::with_capacity(h.bins() * SUB_NODES);
    for (k, m) in h.masses().into_iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let (r0, r1) = (h.edges()[k], h.edges()[k + 1]);
        let half = 0.5 * (r1 - r0);
        let mid = mids[k];
        let slope = log_slope(k);
        let local: Vec<(f64, f64)> = x
            .iter()
            .zip(&w)
            .map(|(t, wt)| {
                let r = mid + half * t;
                (r, wt * r.powi(p) * (slope * (r - mid)).exp())
            })
            .collect();
        let total: f64 = local.iter().map(|(_, q)| q).sum();
        for (r, q) in local {
            radii.push(r);
            masses.push(m * q / total);
        }
    }
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..radii.len() {
        let (ri, mi) = (radii[i], masses[i]);
        for j in 0..radii.len() {
            let kv = mi * masses[j] * kernel.eval(ri, radii[j]);
            a += kv;
            b += kv * ri * ri;
        }
    }
    b *= 2.0 / dim as f64;
    Ok(CoefficientSet::from_ab(a, b, vec![0.0; dim], alpha))
}

/// Decay exponents implied by a coefficient set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedRates {
    /// `n ~ t^{-density_exp}`.
    pub density_exp: f64,
    /// `T ~ t^{-temperature_exp}`.
    pub temperature_exp: f64,
    /// `τ(t) ~ tau_prefactor log t`.
    pub tau_prefactor: f64,
}

pub fn predicted_rates(c: &CoefficientSet) -> Result<PredictedRates> {
    let s = c.a + c.b;
    if !(s > 0.0) {
        return Err(Error::UndefinedRate("a + b must be positive"));
    }
    if !(c.alpha > 0.0) {
        return Err(Error::UndefinedRate("tau prefactor needs alpha > 0"));
    }
    Ok(PredictedRates {
        density_exp: 2.0 * c.a / s,
        temperature_exp: 2.0 * (c.b - c.a) / s,
        tau_prefactor: 2.0 / (c.alpha * s),
    })
}

/// `∫ M(ξ) e^{a|ξ|} dξ` by radial quadrature.
pub fn maxwellian_exp_moment(a: f64, dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(a >= 0.0) {
        return Err(Error::invalid(format!("tail weight must be >= 0, got {a}")));
    }
    let area = sphere_area(dim - 1);
    let p = (dim - 1) as i32;
    let upper = 0.5 * a + 40.0;
    quadrature::integrate(
        |r| area * r.powi(p) * maxwellian_radial(r, dim) * (a * r).exp(),
        0.0,
        upper,
        1e-13,
    )
}
