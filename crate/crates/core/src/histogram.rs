//! Radial histograms of (rescaled) velocity densities.

use serde::{Deserialize, Serialize};

use crate::collision::maxwellian_radial;
use crate::ensemble::{norm2, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::quadrature::{self, sphere_area};

/// Mass tolerance used when a histogram is required to be normalized.
pub const NORMALIZATION_TOL: f64 = 1e-3;

/// Uniform radial grid `[0, r_max]` split into `bins` shells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub bins: usize,
    pub r_max: f64,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            bins: 120,
            r_max: 6.0,
        }
    }
}

impl BinSpec {
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins)
            .map(|k| self.r_max * k as f64 / self.bins as f64)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.bins == 0 || !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::invalid(format!(
                "bin spec needs bins >= 1 and r_max > 0, got {} bins on [0, {}]",
                self.bins, self.r_max
            )));
        }
        Ok(())
    }
}

/// Piecewise-constant radial density on spherical shells.
///
/// `density[k]` is the density value on the shell `edges[k] <= |ξ| < edges[k+1]`,
/// so the shell carries mass `density[k] * shell_volume(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialHistogram {
    dim: usize,
    edges: Vec<f64>,
    density: Vec<f64>,
    stderr: Option<Vec<f64>>,
}

impl RadialHistogram {
    pub fn new(dim: usize, edges: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if edges.len() < 2 || edges[0] != 0.0 {
            return Err(Error::invalid("histogram edges must start at 0 and span at least one bin"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::Unordered("histogram edges"));
        }
        if density.len() + 1 != edges.len() {
            return Err(Error::GridMismatch);
        }
        if let Some((index, &value)) = density
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::invalid(format!("bin {index} has invalid density {value}")));
        }
        Ok(RadialHistogram {
            dim,
            edges,
            density,
            stderr: None,
        })
    }

    pub fn with_stderr(mut self, stderr: Vec<f64>) -> Result<Self> {
        if stderr.len() != self.density.len() {
            return Err(Error::GridMismatch);
        }
        self.stderr = Some(stderr);
        Ok(self)
    }

    /// Histogram of `|v|` for the particles of `ens`, each carrying mass `w`.
    /// Particles beyond the last edge are dropped.
    pub fn from_ensemble(ens: &ParticleEnsemble, spec: BinSpec) -> Result<Self> {
        spec.validate()?;
        let edges = spec.edges();
        let mut counts = vec![0usize; spec.bins];
        let scale = spec.bins as f64 / spec.r_max;
        for v in ens.iter() {
            let r = norm2(v).sqrt();
            let k = (r * scale) as usize;
            if k < spec.bins {
                counts[k] += 1;
            }
        }
        let dim = ens.dim();
        let w = ens.weight();
        let density = counts
            .iter()
            .enumerate()
            .map(|(k, &c)| w * c as f64 / shell_volume(dim, edges[k], edges[k + 1]))
            .collect();
        RadialHistogram::new(dim, edges, density)
    }

    /// Bin averages of the Maxwellian `π^{-d/2} e^{-|ξ|²}` on the grid.
    pub fn maxwellian(dim: usize, spec: BinSpec) -> Result<Self> {
        spec.validate()?;
        Self::maxwellian_on(dim, spec.edges())
    }

    pub fn maxwellian_on(dim: usize, edges: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let area = sphere_area(dim - 1);
        let p = (dim - 1) as i32;
        let mut density = Vec::with_capacity(edges.len().saturating_sub(1));
        for w in edges.windows(2) {
            let rule = quadrature::FixedRule::new(16, w[0], w[1]);
            let mass = area * rule.integrate(|r| r.powi(p) * maxwellian_radial(r, dim));
            density.push(mass / shell_volume(dim, w[0], w[1]));
        }
        RadialHistogram::new(dim, edges, density)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn r_mid(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn shell_volumes(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| shell_volume(self.dim, w[0], w[1]))
            .collect()
    }

    /// Per-bin masses `density * shell volume`.
    pub fn masses(&self) -> Vec<f64> {
        self.density
            .iter()
            .zip(self.shell_volumes())
            .map(|(d, v)| d * v)
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    pub fn same_grid(&self, other: &RadialHistogram) -> bool {
        self.dim == other.dim && self.edges == other.edges
    }

    /// Fails with `Unnormalized` unless the mass is within `NORMALIZATION_TOL` of 1.
    pub fn require_normalized(&self) -> Result<()> {
        let m = self.mass();
        if (m - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Unnormalized(m));
        }
        Ok(())
    }

    /// Copy rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::Unnormalized(m));
        }
        let mut out = self.clone();
        out.density.iter_mut().for_each(|d| *d /= m);
        if let Some(se) = out.stderr.as_mut() {
            se.iter_mut().for_each(|s| *s /= m);
        }
        Ok(out)
    }
}

/// Volume of the shell `r0 <= |ξ| < r1` in `R^d`.
pub fn shell_volume(dim: usize, r0: f64, r1: f64) -> f64 {
    let d = dim as i32;
    sphere_area(dim - 1) * (r1.powi(d) - r0.powi(d)) / dim as f64
}
