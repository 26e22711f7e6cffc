//! Binary checkpoints of a [`SimState`].
//!
//! Layout, all little-endian:
//! `"AKCK"`, version `u32`, dim `u32`, alpha, weight, t, tau, majorant (`f64`),
//! step, collisions, annihilations, seed (`u64`), rng key `[u8; 32]`,
//! rng stream `u64`, rng word position `u128`, shards `u32`, count `u64`,
//! then `count * dim` velocities as `f64`.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SimState;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AKCK";
const VERSION: u32 = 1;

/// Encodes `state` together with the `alpha` it was run with.
pub fn to_bytes(state: &SimState, alpha: f64) -> Vec<u8> {
    let ens = &state.ensemble;
    let mut b = Vec::with_capacity(128 + 8 * ens.as_flat().len());
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&(ens.dim() as u32).to_le_bytes());
    for x in [alpha, ens.weight(), state.t, state.tau, state.rate_majorant] {
        b.extend_from_slice(&x.to_le_bytes());
    }
    for x in [state.step, state.collisions, state.annihilations, state.seed] {
        b.extend_from_slice(&x.to_le_bytes());
    }
    let rng = state.rng();
    b.extend_from_slice(&rng.get_seed());
    b.extend_from_slice(&rng.get_stream().to_le_bytes());
    b.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    b.extend_from_slice(&(state.shards as u32).to_le_bytes());
    b.extend_from_slice(&(ens.count() as u64).to_le_bytes());
    for v in ens.as_flat() {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let s = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(s.try_into().expect("slice length"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Decodes a checkpoint; returns the state and its `alpha`.
pub fn from_bytes(buf: &[u8]) -> Result<(SimState, f64)> {
    let mut r = Reader { buf, pos: 0 };
    if &r.take::<4>()? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let alpha = r.f64()?;
    let weight = r.f64()?;
    let t = r.f64()?;
    let tau = r.f64()?;
    let majorant = r.f64()?;
    let step = r.u64()?;
    let collisions = r.u64()?;
    let annihilations = r.u64()?;
    let seed = r.u64()?;
    let key = r.take::<32>()?;
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.take()?);
    let shards = r.u32()? as usize;
    let count = r.u64()? as usize;
    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Checkpoint("particle count overflows".into()))?;
    if buf.len() - r.pos != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} velocity bytes, found {}",
            buf.len() - r.pos
        )));
    }
    let mut v = Vec::with_capacity(count * dim);
    for _ in 0..count * dim {
        v.push(r.f64()?);
    }
    let ensemble = ParticleEnsemble::new(dim, weight, v)?;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    let mut state = SimState::new(ensemble, seed, shards, rng);
    state.t = t;
    state.tau = tau;
    state.rate_majorant = majorant;
    state.step = step;
    state.collisions = collisions;
    state.annihilations = annihilations;
    Ok((state, alpha))
}

pub fn write_checkpoint(path: &Path, state: &SimState, alpha: f64) -> Result<()> {
    fs::write(path, to_bytes(state, alpha))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(SimState, f64)> {
    from_bytes(&fs::read(path)?)
}
