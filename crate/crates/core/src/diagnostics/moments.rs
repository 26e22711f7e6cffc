use serde::{Deserialize, Serialize};

use crate::collision::povzner_rho;
use crate::ensemble::{norm2, MomentSource, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::histogram::RadialHistogram;

const EXP_LIMIT: f64 = 700.0;

/// `Σ w e^{a|ξ|}`; fails rather than overflow when some `a|ξ| > 700`.
pub fn exp_moment(ens: &ParticleEnsemble, a: f64) -> Result<f64> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("tail weight must be >= 0, got {a}")));
    }
    let mut sum = 0.0;
    for v in ens.iter() {
        let x = a * norm2(v).sqrt();
        if x > EXP_LIMIT {
            return Err(Error::ExpOverflow(x));
        }
        sum += x.exp();
    }
    Ok(ens.weight() * sum)
}

/// `C(p, k) = p (p-1) ... (p-k+1) / k!` for real `p`.
pub fn generalized_binomial(p: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (p - j as f64) / (j + 1) as f64)
}

/// `S_{s,p} = Σ_{k=1}^{k_p} C(p,k) (m_{sk+1} m_{s(p-k)} + m_{sk} m_{s(p-k)+1})`
/// with `k_p = ⌊(p+1)/2⌋`.
pub fn compute_ssp<M: MomentSource + ?Sized>(moments: &M, s: f64, p: f64) -> Result<f64> {
    if !(s > 0.0 && p > 0.0) {
        return Err(Error::invalid(format!("S_(s,p) needs s, p > 0, got s={s}, p={p}")));
    }
    let kp = ((p + 1.0) / 2.0).floor() as usize;
    let mut total = 0.0;
    for k in 1..=kp {
        let kf = k as f64;
        let c = generalized_binomial(p, k);
        let a = moments.require(s * kf + 1.0)? * moments.require(s * (p - kf))?;
        let b = moments.require(s * kf)? * moments.require(s * (p - kf) + 1.0)?;
        total += c * (a + b);
    }
    Ok(total)
}

/// Radial moments of one rescaled snapshot.
#[derive(Debug)]
pub struct MomentPoint<'a, M: MomentSource + ?Sized> {
    pub tau: f64,
    pub moments: &'a M,
    /// Particle count behind the moments, for the sampling error.
    pub count: usize,
}

impl<M: MomentSource + ?Sized> Clone for MomentPoint<'_, M> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<M: MomentSource + ?Sized> Copy for MomentPoint<'_, M> {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppmomResult {
    /// Finite-difference `dm_{sp}/dτ`.
    pub lhs: f64,
    /// Right side averaged over the two snapshots.
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    /// Standard error of `lhs`.
    pub sigma: f64,
    /// `margin >= -k σ`.
    pub holds: bool,
}

/// Checks `dm_{sp}/dτ <= (1-α)ϱ_{sp/2} S_{s,p} - K1 m_{sp+1} + α sp K2 m_{sp} + α sp d m_{sp-1}`
/// between two snapshots, with `K1 = 1 - ϱ_{sp/2}` and
/// `K2 = (sup m3 + (d/2)^{3/2}) / d`.
#[allow(clippy::too_many_arguments)]
pub fn appmom_inequality_check<M: MomentSource + ?Sized>(
    before: MomentPoint<'_, M>,
    after: MomentPoint<'_, M>,
    s: f64,
    p: f64,
    alpha: f64,
    dim: usize,
    sup_m3: f64,
    k_sigma: f64,
) -> Result<AppmomResult> {
    if !(s > 0.0 && s <= 2.0) {
        return Err(Error::invalid(format!("s must lie in (0, 2], got {s}")));
    }
    if !(p > 2.0 / s) {
        return Err(Error::invalid(format!("p must exceed 2/s = {}, got {p}", 2.0 / s)));
    }
    let dt = after.tau - before.tau;
    if !(dt > 0.0) {
        return Err(Error::InsufficientData("moment check needs two snapshots ordered in tau".into()));
    }
    let sp = s * p;
    let d = dim as f64;
    let rho = povzner_rho(sp / 2.0, dim)?;
    let k1 = 1.0 - rho;
    let k2 = (sup_m3 + (d / 2.0).powf(1.5)) / d;
    let rhs_at = |m: &M| -> Result<f64> {
        Ok((1.0 - alpha) * rho * compute_ssp(m, s, p)? - k1 * m.require(sp + 1.0)?
            + alpha * sp * k2 * m.require(sp)?
            + alpha * sp * d * m.require(sp - 1.0)?)
    };
    let rhs = 0.5 * (rhs_at(before.moments)? + rhs_at(after.moments)?);
    let m0 = before.moments.require(sp)?;
    let m1 = after.moments.require(sp)?;
    let lhs = (m1 - m0) / dt;
    let var = |m: &M, count: usize| -> Result<f64> {
        let msp = m.require(sp)?;
        Ok((m.require(2.0 * sp)? - msp * msp).max(0.0) / count.max(1) as f64)
    };
    let sigma = (var(before.moments, before.count)? + var(after.moments, after.count)?).sqrt() / dt;
    let margin = rhs - lhs;
    Ok(AppmomResult {
        lhs,
        rhs,
        margin,
        sigma,
        holds: margin >= -k_sigma * sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    /// Largest radius below which every bin has positive density.
    pub positive_radius: f64,
    pub r_max: f64,
    pub holds: bool,
    /// Indices of empty bins, reported but not failed on beyond `r_max`.
    pub empty_bins: Vec<usize>,
}

pub fn lower_bound_scan(h: &RadialHistogram, r_max: f64) -> LowerBoundReport {
    let empty_bins: Vec<usize> = h
        .density()
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= 0.0)
        .map(|(k, _)| k)
        .collect();
    let positive_radius = match empty_bins.first() {
        Some(&k) => h.edges()[k],
        None => *h.edges().last().expect("histogram has edges"),
    };
    LowerBoundReport {
        positive_radius,
        r_max,
        holds: positive_radius >= r_max,
        empty_bins,
    }
}
