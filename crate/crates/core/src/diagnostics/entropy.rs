use serde::{Deserialize, Serialize};

use crate::collision::maxwellian_radial;
use crate::error::{Error, Result};
use crate::histogram::RadialHistogram;

/// Relative entropy `Σ ρ log(ρ / M(r_mid)) |shell|` of a normalized
/// histogram, with `0 log 0 = 0`.
pub fn entropy(h: &RadialHistogram) -> Result<f64> {
    h.require_normalized()?;
    let dim = h.dim();
    Ok(h.density()
        .iter()
        .zip(h.r_mid())
        .zip(h.shell_volumes())
        .filter(|((rho, _), _)| **rho > 0.0)
        .map(|((rho, r), v)| rho * (rho / maxwellian_radial(r, dim)).ln() * v)
        .sum())
}

/// One finite-difference point of the entropy balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyResidual {
    pub tau_mid: f64,
    pub dh_dtau: f64,
    /// Computable right-hand side `(dB - A) H = α a H`.
    pub source: f64,
    /// `dH/dτ - α a H`, an estimate of `-(1-α) D0 - I1`.
    pub residual: f64,
    /// Standard error of the finite difference.
    pub sigma: f64,
    /// The spacing exceeded `max_spacing`.
    pub coarse: bool,
}

/// Balance residuals between consecutive snapshots. `a` are the snapshot
/// values of `a_ψ`; the source term uses their midpoint average.
pub fn entropy_production_residual(
    taus: &[f64],
    entropies: &[f64],
    sigmas: &[f64],
    a: &[f64],
    alpha: f64,
    max_spacing: f64,
) -> Result<Vec<EntropyResidual>> {
    let n = taus.len();
    if entropies.len() != n || sigmas.len() != n || a.len() != n {
        return Err(Error::invalid("entropy series have different lengths"));
    }
    if n < 2 {
        return Err(Error::InsufficientData("entropy balance needs two snapshots".into()));
    }
    let mut out = Vec::with_capacity(n - 1);
    for k in 1..n {
        let h = taus[k] - taus[k - 1];
        if !(h > 0.0) {
            return Err(Error::Unordered("snapshot times"));
        }
        let dh = (entropies[k] - entropies[k - 1]) / h;
        let hm = 0.5 * (entropies[k] + entropies[k - 1]);
        let am = 0.5 * (a[k] + a[k - 1]);
        let source = alpha * am * hm;
        out.push(EntropyResidual {
            tau_mid: 0.5 * (taus[k] + taus[k - 1]),
            dh_dtau: dh,
            source,
            residual: dh - source,
            sigma: (sigmas[k].powi(2) + sigmas[k - 1].powi(2)).sqrt() / h,
            coarse: h > max_spacing,
        });
    }
    Ok(out)
}
