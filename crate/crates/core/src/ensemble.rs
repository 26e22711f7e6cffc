//! Particle ensembles and their macroscopic moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weighted velocity sample standing in for a homogeneous density.
///
/// All particles carry the same weight `w`; the represented number density
/// is `w * count`. Velocities are stored flat with stride `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    weight: f64,
    velocities: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, weight: f64, velocities: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidWeight(weight));
        }
        if !velocities.len().is_multiple_of(dim) {
            return Err(Error::RaggedVelocities {
                len: velocities.len(),
                dim,
            });
        }
        if let Some(pos) = velocities.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteVelocity {
                particle: pos / dim,
                component: pos % dim,
            });
        }
        Ok(ParticleEnsemble {
            dim,
            weight,
            velocities,
        })
    }

    pub fn from_rows(dim: usize, weight: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(row.len(), dim));
            }
            flat.extend_from_slice(row);
        }
        Self::new(dim, weight, flat)
    }

    pub(crate) fn from_parts_unchecked(dim: usize, weight: f64, velocities: Vec<f64>) -> Self {
        debug_assert!(velocities.len().is_multiple_of(dim));
        ParticleEnsemble {
            dim,
            weight,
            velocities,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn count(&self) -> usize {
        self.velocities.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    /// Represented number density `w * count`.
    pub fn density(&self) -> f64 {
        self.weight * self.count() as f64
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.velocities.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.velocities
    }

    pub(crate) fn flat_mut(&mut self) -> &mut Vec<f64> {
        &mut self.velocities
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.velocities
    }

    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        Self::new(self.dim, weight, self.velocities.clone())
    }

    /// Mean velocity. Zero vector for an empty ensemble.
    pub fn mean_velocity(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.dim];
        let n = self.count();
        if n == 0 {
            return u;
        }
        for v in self.iter() {
            for (uk, vk) in u.iter_mut().zip(v) {
                *uk += vk;
            }
        }
        u.iter_mut().for_each(|x| *x /= n as f64);
        u
    }

    /// Splits the ensemble into `batches` contiguous sub-ensembles, each
    /// reweighted so that it represents the same density as the parent.
    pub fn batches(&self, batches: usize) -> Vec<ParticleEnsemble> {
        let n = self.count();
        let b = batches.max(1).min(n.max(1));
        (0..b)
            .filter_map(|k| {
                let lo = k * n / b;
                let hi = (k + 1) * n / b;
                if hi <= lo {
                    return None;
                }
                let scale = n as f64 / (hi - lo) as f64;
                Some(ParticleEnsemble::from_parts_unchecked(
                    self.dim,
                    self.weight * scale,
                    self.velocities[lo * self.dim..hi * self.dim].to_vec(),
                ))
            })
            .collect()
    }
}

/// Snapshot of the macroscopic moments of a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub t: f64,
    pub tau: f64,
    /// Number density.
    pub n: f64,
    /// Bulk velocity.
    pub u: Vec<f64>,
    pub temperature: f64,
    /// First centered moment `∫ f |v - u|`.
    pub m1: f64,
    /// Third centered moment `∫ f |v - u|^3`.
    pub m3: f64,
}

impl MomentRecord {
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// Second centered moment `d n T`.
    pub fn m2(&self) -> f64 {
        self.dim() as f64 * self.n * self.temperature
    }

    /// The product `E = d n^2 T = M_0 M_2`.
    pub fn energy_product(&self) -> f64 {
        self.n * self.m2()
    }
}

/// Computes `(n, u, T, M1, M3)`; `t` and `tau` are left at zero.
pub fn compute_moments(ens: &ParticleEnsemble) -> Result<MomentRecord> {
    let count = ens.count();
    if count == 0 {
        return Err(Error::DegenerateEnsemble);
    }
    let w = ens.weight();
    let u = ens.mean_velocity();
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for v in ens.iter() {
        let r2: f64 = v.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
        let r = r2.sqrt();
        s1 += r;
        s2 += r2;
        s3 += r2 * r;
    }
    let n = w * count as f64;
    let dim = ens.dim() as f64;
    Ok(MomentRecord {
        t: 0.0,
        tau: 0.0,
        n,
        u,
        temperature: w * s2 / (dim * n),
        m1: w * s1,
        m3: w * s3,
    })
}

/// Worst-case ratio of the empirical Jensen inequality
/// `mean_j |v_i - v_j| >= |v_i - ū|` over all particles `i`.
///
/// The pair mean includes the `j = i` term, so this is the empirical-measure
/// form of `∫ f |v - v*| dv* >= n |v - u|`. Particles sitting exactly at the
/// mean are skipped. Returns `+inf` when every particle sits at the mean.
/// This is an O(N²) brute-force check.
pub fn jensen_check(ens: &ParticleEnsemble) -> Result<f64> {
    let count = ens.count();
    if count < 2 {
        return Err(Error::DegenerateEnsemble);
    }
    let u = ens.mean_velocity();
    let mut worst = f64::INFINITY;
    for vi in ens.iter() {
        let dist_mean = norm_diff(vi, &u);
        if dist_mean == 0.0 {
            continue;
        }
        let pair_mean: f64 = ens.iter().map(|vj| norm_diff(vi, vj)).sum::<f64>() / count as f64;
        worst = worst.min(pair_mean / dist_mean);
    }
    Ok(worst)
}

#[inline]
pub(crate) fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Batch-means standard errors of the moment record quantities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentSigma {
    pub n: f64,
    pub temperature: f64,
    pub m1: f64,
    /// Standard error of `d n^2 T`.
    pub energy_product: f64,
}

/// Standard error of the mean of `values` treated as independent batch results.
pub fn batch_standard_error(values: &[f64]) -> f64 {
    let b = values.len();
    if b < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / b as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Estimates moment standard errors from `batches` reweighted sub-ensembles.
pub fn moment_sigma(ens: &ParticleEnsemble, batches: usize) -> MomentSigma {
    let recs: Vec<MomentRecord> = ens
        .batches(batches)
        .iter()
        .filter_map(|b| compute_moments(b).ok())
        .collect();
    let pick = |f: &dyn Fn(&MomentRecord) -> f64| {
        batch_standard_error(&recs.iter().map(f).collect::<Vec<_>>())
    };
    MomentSigma {
        n: pick(&|r| r.n),
        temperature: pick(&|r| r.temperature),
        m1: pick(&|r| r.m1),
        energy_product: pick(&|r| r.energy_product()),
    }
}

/// Source of radial moments `m_s = ∫ ψ |ξ|^s` keyed by real order `s`.
pub trait MomentSource {
    fn moment(&self, order: f64) -> Option<f64>;

    fn require(&self, order: f64) -> Result<f64> {
        self.moment(order).ok_or(Error::MissingMoment(order))
    }
}

/// Tabulated radial moments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentTable {
    entries: Vec<(f64, f64)>,
}

const ORDER_MATCH_TOL: f64 = 1e-9;

impl MomentTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, order: f64, value: f64) {
        match self
            .entries
            .iter_mut()
            .find(|(o, _)| (o - order).abs() < ORDER_MATCH_TOL)
        {
            Some(slot) => slot.1 = value,
            None => self.entries.push((order, value)),
        }
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    /// Uncentered radial moments `w Σ |v|^s` of `ens` (about the origin) on
    /// the order grid `0, step, 2 step, ..., max_order`, with step 1 or 0.5.
    pub fn from_ensemble(ens: &ParticleEnsemble, max_order: f64, half_steps: bool) -> Self {
        let step = if half_steps { 0.5 } else { 1.0 };
        let levels = (max_order / step).round() as usize;
        let mut sums = vec![0.0; levels + 1];
        for v in ens.iter() {
            let r = norm2(v).sqrt();
            let base = if half_steps { r.sqrt() } else { r };
            let mut p = 1.0;
            for s in sums.iter_mut() {
                *s += p;
                p *= base;
            }
        }
        let w = ens.weight();
        let mut table = MomentTable::new();
        for (k, s) in sums.into_iter().enumerate() {
            table.insert(k as f64 * step, w * s);
        }
        table
    }
}

impl MomentSource for MomentTable {
    fn moment(&self, order: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|(o, _)| (o - order).abs() < ORDER_MATCH_TOL)
            .map(|&(_, v)| v)
    }
}

impl MomentSource for ParticleEnsemble {
    fn moment(&self, order: f64) -> Option<f64> {
        if order < 0.0 {
            return None;
        }
        let w = self.weight();
        Some(w * self.iter().map(|v| norm2(v).sqrt().powf(order)).sum::<f64>())
    }
}
