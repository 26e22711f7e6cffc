use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::collision::sample_sigma_into;
use crate::config::InitialCondition;
use crate::ensemble::{norm2, ParticleEnsemble};
use crate::error::{Error, Result};

/// Parameters of an initial velocity distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub kind: InitialCondition,
    pub dim: usize,
    pub count: usize,
    pub n0: f64,
    pub temperature0: f64,
    pub bimodal_shift: f64,
    pub anisotropy: f64,
}

/// Draws `count` velocities and renormalizes them empirically so that the
/// ensemble has exactly density `n0`, zero bulk velocity and temperature `T0`.
pub fn sample_initial<R: Rng + ?Sized>(spec: &InitialSpec, rng: &mut R) -> Result<ParticleEnsemble> {
    let d = spec.dim;
    let n = spec.count;
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if n < 2 {
        return Err(Error::DegenerateEnsemble);
    }
    let mut v = vec![0.0; n * d];
    match spec.kind {
        InitialCondition::Maxwellian => {
            v.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
        }
        InitialCondition::UniformBall => {
            for row in v.chunks_exact_mut(d) {
                sample_sigma_into(row, rng);
                let r = rng.random::<f64>().powf(1.0 / d as f64);
                row.iter_mut().for_each(|x| *x *= r);
            }
        }
        InitialCondition::Bimodal => {
            // Populations at ±shift e1 with standard deviations 1 and 2.
            for (i, row) in v.chunks_exact_mut(d).enumerate() {
                let (center, sd) = if i % 2 == 0 { (spec.bimodal_shift, 1.0) } else { (-spec.bimodal_shift, 2.0) };
                for (k, x) in row.iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x = sd * z + if k == 0 { center } else { 0.0 };
                }
            }
        }
        InitialCondition::Anisotropic => {
            let s = spec.anisotropy.sqrt();
            for row in v.chunks_exact_mut(d) {
                for (k, x) in row.iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x = if k == 0 { s * z } else { z };
                }
            }
        }
    }
    normalize(&mut v, d, spec.temperature0)?;
    ParticleEnsemble::new(d, spec.n0 / n as f64, v)
}

/// Centers and rescales flat velocities to temperature `t0`.
fn normalize(v: &mut [f64], d: usize, t0: f64) -> Result<()> {
    let n = v.len() / d;
    let mut mean = vec![0.0; d];
    for row in v.chunks_exact(d) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for row in v.chunks_exact_mut(d) {
        row.iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
    }
    let t = v.chunks_exact(d).map(norm2).sum::<f64>() / (d * n) as f64;
    if !(t > 0.0) {
        return Err(Error::DegenerateTemperature);
    }
    let s = (t0 / t).sqrt();
    v.iter_mut().for_each(|x| *x *= s);
    Ok(())
}
