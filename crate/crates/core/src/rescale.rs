//! Self-similar variables `ξ = (v - u)/√(2T)` and the coefficients of the
//! rescaled equation estimated from particle data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{compute_moments, norm2, norm_diff, ParticleEnsemble};
use crate::error::{Error, Result};

/// Rescales `ens` to unit mass, zero mean and second moment `d/2`.
pub fn to_selfsimilar(ens: &ParticleEnsemble) -> Result<ParticleEnsemble> {
    let m = compute_moments(ens)?;
    if !(m.temperature > 0.0) {
        return Err(Error::DegenerateTemperature);
    }
    let dim = ens.dim();
    let count = ens.count();
    let mut xi = ens.as_flat().to_vec();
    // Two centering passes remove the rounding left by the first mean.
    for _ in 0..2 {
        let mean = ParticleEnsemble::from_parts_unchecked(dim, 1.0, std::mem::take(&mut xi));
        let c = mean.mean_velocity();
        xi = mean.into_flat();
        for v in xi.chunks_exact_mut(dim) {
            v.iter_mut().zip(&c).for_each(|(x, ck)| *x -= ck);
        }
    }
    let second: f64 = xi.chunks_exact(dim).map(norm2).sum::<f64>() / count as f64;
    let scale = (0.5 * dim as f64 / second).sqrt();
    xi.iter_mut().for_each(|x| *x *= scale);
    Ok(ParticleEnsemble::from_parts_unchecked(dim, 1.0 / count as f64, xi))
}

/// Inverse map `v = u + √(2T) ξ` with weight chosen so that the density is `n`.
pub fn from_selfsimilar(psi: &ParticleEnsemble, n: f64, u: &[f64], temperature: f64) -> Result<ParticleEnsemble> {
    if u.len() != psi.dim() {
        return Err(Error::DimensionMismatch(u.len(), psi.dim()));
    }
    if psi.is_empty() {
        return Err(Error::DegenerateEnsemble);
    }
    if !(temperature > 0.0) {
        return Err(Error::DegenerateTemperature);
    }
    let s = (2.0 * temperature).sqrt();
    let mut v = psi.as_flat().to_vec();
    for row in v.chunks_exact_mut(psi.dim()) {
        row.iter_mut().zip(u).for_each(|(x, uk)| *x = uk + s * *x);
    }
    ParticleEnsemble::new(psi.dim(), n / psi.count() as f64, v)
}

/// Coefficients `(A, B, B v, a, b)` of the rescaled equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    #[serde(rename = "B")]
    pub big_b: f64,
    /// The drift vector `B_ψ v_ψ`.
    pub bv: Vec<f64>,
    pub alpha: f64,
}

impl CoefficientSet {
    /// Builds the set from `(a, b)` with `B = α(b - a)/2` and `A = dB - αa`.
    pub fn from_ab(a: f64, b: f64, bv: Vec<f64>, alpha: f64) -> Self {
        let d = bv.len() as f64;
        let big_b = 0.5 * alpha * (b - a);
        let big_a = d * big_b - alpha * a;
        CoefficientSet {
            a,
            b,
            big_a,
            big_b,
            bv,
            alpha,
        }
    }

    pub fn dim(&self) -> usize {
        self.bv.len()
    }
}

/// A coefficient set with Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub set: CoefficientSet,
    pub stderr_a: f64,
    pub stderr_b: f64,
    pub stderr_bv: Vec<f64>,
    /// True when every pair was enumerated (standard errors are then zero).
    pub exact: bool,
}

#[derive(Default)]
struct Accum {
    n: f64,
    s: f64,
    s2: f64,
}

impl Accum {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.s += x;
        self.s2 += x * x;
    }
    fn mean(&self) -> f64 {
        self.s / self.n
    }
    fn stderr(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        let m = self.mean();
        ((self.s2 / self.n - m * m).max(0.0) / (self.n - 1.0)).sqrt()
    }
}

/// Estimates `a = ∬|ξ-ξ*|ψψ*`, `b = (2/d)∬|ξ|²|ξ-ξ*|ψψ*` and
/// `B v = -α∬ ξ |ξ-ξ*| ψψ*` for the empirical measure of `psi`, then derives
/// `A`, `B` from them.
///
/// Uses `pair_samples` random pairs of distinct particles, or every pair if
/// there are no more than that many. The empirical measure weights distinct
/// pairs by `(N-1)/N` since self-pairs contribute nothing.
pub fn estimate_coefficients<R: Rng + ?Sized>(
    psi: &ParticleEnsemble,
    alpha: f64,
    pair_samples: usize,
    rng: &mut R,
) -> Result<CoefficientEstimate> {
    let n = psi.count();
    if n < 2 {
        return Err(Error::DegenerateEnsemble);
    }
    if pair_samples == 0 {
        return Err(Error::invalid("pair_samples must be at least 1"));
    }
    let dim = psi.dim();
    let mass = psi.density();
    let inv_d = 1.0 / dim as f64;
    let mut acc_a = Accum::default();
    let mut acc_b = Accum::default();
    let mut acc_v: Vec<Accum> = (0..dim).map(|_| Accum::default()).collect();

    let mut visit = |x: &[f64], y: &[f64]| {
        let g = norm_diff(x, y);
        acc_a.push(g);
        acc_b.push(inv_d * (norm2(x) + norm2(y)) * g);
        for k in 0..dim {
            acc_v[k].push(0.5 * (x[k] + y[k]) * g);
        }
    };

    let total_pairs = n as u128 * (n as u128 - 1) / 2;
    let exact = total_pairs <= pair_samples as u128;
    if exact {
        for i in 0..n {
            let x = psi.velocity(i);
            for j in (i + 1)..n {
                visit(x, psi.velocity(j));
            }
        }
    } else {
        for _ in 0..pair_samples {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            visit(psi.velocity(i), psi.velocity(j));
        }
    }

    let factor = mass * mass * (n as f64 - 1.0) / n as f64;
    let se = |acc: &Accum| if exact { 0.0 } else { factor * acc.stderr() };
    let a = factor * acc_a.mean();
    let b = factor * acc_b.mean();
    let bv = acc_v.iter().map(|acc| -alpha * factor * acc.mean()).collect();
    Ok(CoefficientEstimate {
        set: CoefficientSet::from_ab(a, b, bv, alpha),
        stderr_a: se(&acc_a),
        stderr_b: se(&acc_b),
        stderr_bv: acc_v.iter().map(|acc| alpha * se(acc)).collect(),
        exact,
    })
}

/// Predicted macroscopic moments at one point of a coefficient history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedMoments {
    pub tau: f64,
    pub n: f64,
    pub temperature: f64,
}

/// Integrates `n = n0 exp(-α∫a dτ)` and `T = T0 exp(-2∫B dτ)` by the
/// trapezoid rule along a `τ`-ordered coefficient history.
pub fn reconstruct_moments(
    taus: &[f64],
    coeffs: &[CoefficientSet],
    n0: f64,
    t0: f64,
) -> Result<Vec<ReconstructedMoments>> {
    if taus.len() != coeffs.len() {
        return Err(Error::DimensionMismatch(taus.len(), coeffs.len()));
    }
    if taus.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Unordered("coefficient history"));
    }
    let mut out = Vec::with_capacity(taus.len());
    let (mut int_a, mut int_b) = (0.0, 0.0);
    for k in 0..taus.len() {
        if k > 0 {
            let h = taus[k] - taus[k - 1];
            int_a += 0.5 * h * (coeffs[k].alpha * coeffs[k].a + coeffs[k - 1].alpha * coeffs[k - 1].a);
            int_b += 0.5 * h * (coeffs[k].big_b + coeffs[k - 1].big_b);
        }
        out.push(ReconstructedMoments {
            tau: taus[k],
            n: n0 * (-int_a).exp(),
            temperature: t0 * (-2.0 * int_b).exp(),
        });
    }
    Ok(out)
}
