//! Direct simulation Monte Carlo for the homogeneous equation with
//! probabilistic ballistic annihilation.
//!
//! Collisions follow the no-time-counter scheme: a step of length `dt`
//! proposes `⌈(w/2) N (N-1) g_max dt⌉` uniformly drawn pairs and accepts each
//! with probability `|v_i - v_j| / g_max`. An accepted pair annihilates with
//! probability `α` and scatters elastically otherwise.

pub mod checkpoint;
mod init;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{alpha_star, maxwellian_coefficients, sample_sigma_into, scatter};
use crate::config::{DtPolicy, SimConfig};
use crate::diagnostics::{entropy, exp_moment};
use crate::ensemble::{batch_standard_error, compute_moments, moment_sigma, norm2, norm_diff, MomentTable, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::histogram::RadialHistogram;
use crate::rescale::{estimate_coefficients, to_selfsimilar};
use crate::trajectory::{Snapshot, Trajectory, TrajectorySample};

pub use init::{sample_initial, InitialSpec};

/// Mutable state of a particle simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub ensemble: ParticleEnsemble,
    pub t: f64,
    pub tau: f64,
    pub step: u64,
    /// Majorant used by the most recent step.
    pub rate_majorant: f64,
    pub collisions: u64,
    pub annihilations: u64,
    /// Master seed; also keys the per-snapshot estimation streams.
    pub seed: u64,
    pub shards: usize,
    rng: ChaCha8Rng,
}

/// Counters of a single step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    pub candidates: u64,
    pub collisions: u64,
    pub annihilations: u64,
    /// Fewer than two particles were present; nothing happened.
    pub terminal: bool,
}

struct PassResult {
    dead: Vec<bool>,
    candidates: u64,
    collisions: u64,
    annihilations: u64,
}

fn pair_mut(v: &mut [f64], i: usize, j: usize, d: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(i != j);
    if i < j {
        let (lo, hi) = v.split_at_mut(j * d);
        (&mut lo[i * d..(i + 1) * d], &mut hi[..d])
    } else {
        let (lo, hi) = v.split_at_mut(i * d);
        (&mut hi[..d], &mut lo[j * d..(j + 1) * d])
    }
}

/// One NTC pass over a block of particles that all carry weight `weight`.
fn ntc_pass<R: Rng + ?Sized>(
    vel: &mut [f64],
    dim: usize,
    weight: f64,
    majorant: f64,
    dt: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<PassResult> {
    let n = vel.len() / dim;
    let mut out = PassResult {
        dead: vec![false; n],
        candidates: 0,
        collisions: 0,
        annihilations: 0,
    };
    if n < 2 {
        return Ok(out);
    }
    let expected = 0.5 * weight * n as f64 * (n - 1) as f64 * majorant * dt;
    if !expected.is_finite() {
        return Err(Error::InvalidTimeStep(dt));
    }
    let candidates = expected.ceil() as u64;
    let mut live = n;
    let mut sigma = vec![0.0; dim];
    for _ in 0..candidates {
        if live < 2 {
            break;
        }
        out.candidates += 1;
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if out.dead[i] || out.dead[j] {
            continue;
        }
        let (vi, vj) = pair_mut(vel, i, j, dim);
        let g = norm_diff(vi, vj);
        if g > majorant {
            return Err(Error::MajorantViolation {
                relative_speed: g,
                majorant,
            });
        }
        if rng.random::<f64>() * majorant >= g {
            continue;
        }
        if alpha > 0.0 && rng.random::<f64>() < alpha {
            out.dead[i] = true;
            out.dead[j] = true;
            live -= 2;
            out.annihilations += 1;
        } else {
            sample_sigma_into(&mut sigma, rng);
            scatter(vi, vj, &sigma);
            out.collisions += 1;
        }
    }
    Ok(out)
}

fn swap_rows(v: &mut [f64], i: usize, j: usize, d: usize) {
    if i != j {
        for k in 0..d {
            v.swap(i * d + k, j * d + k);
        }
    }
}

/// Density-weighted collision frequency proxy `√2 n √T` driving `dτ/dt`.
fn tau_rate(ens: &ParticleEnsemble) -> f64 {
    match compute_moments(ens) {
        Ok(m) => std::f64::consts::SQRT_2 * m.n * m.temperature.max(0.0).sqrt(),
        Err(_) => 0.0,
    }
}

impl SimState {
    pub fn new(ensemble: ParticleEnsemble, seed: u64, shards: usize, rng: ChaCha8Rng) -> Self {
        SimState {
            ensemble,
            t: 0.0,
            tau: 0.0,
            step: 0,
            rate_majorant: 0.0,
            collisions: 0,
            annihilations: 0,
            seed,
            shards: shards.max(1),
            rng,
        }
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// `2 max_i |v_i - ū| (1 + slack)` plus a tiny absolute floor.
    pub fn majorant(&self, slack: f64) -> f64 {
        let u = self.ensemble.mean_velocity();
        let r = self
            .ensemble
            .iter()
            .map(|v| norm_diff(v, &u))
            .fold(0.0, f64::max);
        2.0 * r * (1.0 + slack) + 1e-300
    }

    /// Advances by `dt`. `slack` widens the majorant to cover speeds created
    /// within the step; a candidate beyond it aborts with `MajorantViolation`.
    pub fn step(&mut self, dt: f64, alpha: f64, slack: f64) -> Result<StepOutcome> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidTimeStep(dt));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let n = self.ensemble.count();
        if n < 2 {
            return Ok(StepOutcome {
                terminal: true,
                ..StepOutcome::default()
            });
        }
        let rate_before = tau_rate(&self.ensemble);
        let majorant = self.majorant(slack);
        self.rate_majorant = majorant;
        let dim = self.ensemble.dim();
        let weight = self.ensemble.weight();
        let shards = self.shards.min(n / 2).max(1);

        let mut outcome = StepOutcome::default();
        let mut kept = Vec::with_capacity(self.ensemble.as_flat().len());
        if shards == 1 {
            let vel = self.ensemble.flat_mut();
            let res = ntc_pass(vel, dim, weight, majorant, dt, alpha, &mut self.rng)?;
            outcome.candidates = res.candidates;
            outcome.collisions = res.collisions;
            outcome.annihilations = res.annihilations;
            for (row, dead) in vel.chunks_exact(dim).zip(&res.dead) {
                if !dead {
                    kept.extend_from_slice(row);
                }
            }
        } else {
            // Random reshuffle, then independent blocks with their own streams.
            for i in (1..n).rev() {
                let j = self.rng.random_range(0..=i);
                swap_rows(self.ensemble.flat_mut(), i, j, dim);
            }
            let seeds: Vec<u64> = (0..shards).map(|_| self.rng.random()).collect();
            let vel = self.ensemble.flat_mut();
            let mut blocks: Vec<&mut [f64]> = Vec::with_capacity(shards);
            let mut rest: &mut [f64] = vel.as_mut_slice();
            for s in 0..shards {
                let len = ((s + 1) * n / shards - s * n / shards) * dim;
                let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
                blocks.push(head);
                rest = tail;
            }
            let results: Vec<Result<PassResult>> = blocks
                .into_par_iter()
                .zip(seeds.into_par_iter())
                .map(|(block, seed)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let m = block.len() / dim;
                    let w = weight * n as f64 / m as f64;
                    ntc_pass(block, dim, w, majorant, dt, alpha, &mut rng)
                })
                .collect();
            let mut offset = 0;
            for res in results {
                let res = res?;
                outcome.candidates += res.candidates;
                outcome.collisions += res.collisions;
                outcome.annihilations += res.annihilations;
                for (k, dead) in res.dead.iter().enumerate() {
                    if !dead {
                        let i = offset + k;
                        kept.extend_from_slice(&vel[i * dim..(i + 1) * dim]);
                    }
                }
                offset += res.dead.len();
            }
        }
        *self.ensemble.flat_mut() = kept;
        self.collisions += outcome.collisions;
        self.annihilations += outcome.annihilations;
        let rate_after = tau_rate(&self.ensemble);
        self.tau += 0.5 * dt * (rate_before + rate_after);
        self.t += dt;
        self.step += 1;
        Ok(outcome)
    }

    /// Time step for `policy`: fixed, or sized so that about `fraction N`
    /// collisions are accepted when the gas is near a Maxwellian.
    pub fn choose_dt(&self, policy: DtPolicy) -> Result<f64> {
        match policy {
            DtPolicy::Fixed(dt) => Ok(dt),
            DtPolicy::CollisionFraction(fraction) => {
                let n = self.ensemble.count();
                let m = compute_moments(&self.ensemble)?;
                if !(m.temperature > 0.0) || n < 2 {
                    return Err(Error::DegenerateTemperature);
                }
                let a0 = maxwellian_coefficients(self.ensemble.dim())?.a0;
                let mean_g = (2.0 * m.temperature).sqrt() * a0;
                Ok(2.0 * fraction / (self.ensemble.weight() * (n - 1) as f64 * mean_g))
            }
        }
    }
}

/// `τ(t_k) = √2 ∫_0^{t_k} n √T ds` by the trapezoid rule over records.
pub fn tau_accumulate(times: &[f64], n: &[f64], temperature: &[f64]) -> Result<Vec<f64>> {
    if times.len() != n.len() || times.len() != temperature.len() {
        return Err(Error::invalid("tau accumulation series have different lengths"));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Unordered("record times"));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            let f0 = n[k - 1] * temperature[k - 1].max(0.0).sqrt();
            let f1 = n[k] * temperature[k].max(0.0).sqrt();
            acc += std::f64::consts::SQRT_2 * 0.5 * (times[k] - times[k - 1]) * (f0 + f1);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Seed of member `index` of a family derived from `master`
/// (SplitMix64 finalizer of `master + (index + 1) * 0x9E3779B97F4A7C15`).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Estimation stream for the snapshot taken at `step`.
fn snapshot_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step.wrapping_add(1));
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    EndTime,
    MinParticles,
    MinDensity,
    MaxSteps,
    /// Fewer than two particles or zero temperature.
    Degenerate,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::EndTime => "end_time",
            Termination::MinParticles => "min_particles",
            Termination::MinDensity => "min_density",
            Termination::MaxSteps => "max_steps",
            Termination::Degenerate => "degenerate",
        }
    }
}

/// A configured run: state plus everything recorded so far.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    state: SimState,
    trajectory: Trajectory,
    last_sample: Option<u64>,
    last_snapshot: Option<u64>,
    termination: Option<Termination>,
}

impl Simulation {
    /// Samples the initial condition and records step 0.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let spec = InitialSpec {
            kind: config.initial,
            dim: config.dim,
            count: config.particle_count,
            n0: config.n0,
            temperature0: config.temperature0,
            bimodal_shift: config.bimodal_shift,
            anisotropy: config.anisotropy,
        };
        let ensemble = sample_initial(&spec, &mut rng)?;
        let state = SimState::new(ensemble, config.seed, config.shards, rng);
        let mut sim = Simulation::resume(config, state)?;
        sim.record_sample()?;
        sim.record_snapshot()?;
        Ok(sim)
    }

    /// Continues from `state` without recording its current step again.
    pub fn resume(config: SimConfig, state: SimState) -> Result<Self> {
        config.validate()?;
        if state.ensemble.dim() != config.dim {
            return Err(Error::DimensionMismatch(state.ensemble.dim(), config.dim));
        }
        let trajectory = Trajectory::new(config.dim, config.alpha, config.tail_weight);
        Ok(Simulation {
            last_sample: Some(state.step),
            last_snapshot: Some(state.step),
            config,
            state,
            trajectory,
            termination: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    /// A note when `α` is at or beyond the moment-propagation threshold.
    pub fn alpha_warning(&self) -> Option<String> {
        let star = alpha_star(self.config.dim).ok()?;
        (self.config.alpha >= star).then(|| {
            format!(
                "alpha = {} is at or above alpha_star({}) = {star:.6}; no attractor is guaranteed there",
                self.config.alpha, self.config.dim
            )
        })
    }

    fn check_termination(&self) -> Option<Termination> {
        let c = &self.config;
        let s = &self.state;
        let count = s.ensemble.count();
        if count < 2 {
            return Some(Termination::Degenerate);
        }
        if count < c.min_particles {
            return Some(Termination::MinParticles);
        }
        if s.ensemble.density() < c.min_density_fraction * c.n0 {
            return Some(Termination::MinDensity);
        }
        if s.t >= c.t_end {
            return Some(Termination::EndTime);
        }
        if c.max_steps.is_some_and(|m| s.step >= m) {
            return Some(Termination::MaxSteps);
        }
        None
    }

    /// Performs one step and its scheduled recording. Returns the termination
    /// reason once the run is over; further calls are no-ops.
    pub fn advance(&mut self) -> Result<Option<Termination>> {
        if let Some(t) = self.termination {
            return Ok(Some(t));
        }
        if let Some(t) = self.check_termination() {
            return self.finish(t).map(Some);
        }
        let dt = match self.state.choose_dt(self.config.dt_policy) {
            Ok(dt) => dt.min(self.config.t_end - self.state.t),
            Err(Error::DegenerateTemperature) => return self.finish(Termination::Degenerate).map(Some),
            Err(e) => return Err(e),
        };
        self.state.step(dt, self.config.alpha, self.config.majorant_slack)?;
        let step = self.state.step;
        if step.is_multiple_of(self.config.record_interval) {
            self.record_sample()?;
        }
        if step.is_multiple_of(self.config.snapshot_interval) && self.snapshot_possible() {
            self.record_snapshot()?;
        }
        match self.check_termination() {
            Some(t) => self.finish(t).map(Some),
            None => Ok(None),
        }
    }

    pub fn run_steps(&mut self, steps: u64) -> Result<Option<Termination>> {
        for _ in 0..steps {
            if let Some(t) = self.advance()? {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }

    pub fn run_to_end(&mut self) -> Result<Termination> {
        loop {
            if let Some(t) = self.advance()? {
                return Ok(t);
            }
        }
    }

    pub fn into_output(self) -> RunOutput {
        RunOutput {
            trajectory: self.trajectory,
            state: self.state,
            termination: self.termination,
        }
    }

    fn finish(&mut self, t: Termination) -> Result<Termination> {
        let step = self.state.step;
        if self.last_sample != Some(step) && !self.state.ensemble.is_empty() {
            self.record_sample()?;
        }
        if self.last_snapshot != Some(step) && self.snapshot_possible() {
            self.record_snapshot()?;
        }
        self.termination = Some(t);
        self.trajectory.termination = Some(t.as_str().to_string());
        Ok(t)
    }

    fn snapshot_possible(&self) -> bool {
        self.state.ensemble.count() >= 2
            && compute_moments(&self.state.ensemble).is_ok_and(|m| m.temperature > 0.0)
    }

    fn record_sample(&mut self) -> Result<()> {
        let s = &self.state;
        let mut record = compute_moments(&s.ensemble)?;
        record.t = s.t;
        record.tau = s.tau;
        let sigma = moment_sigma(&s.ensemble, self.config.batches);
        self.trajectory.samples.push(TrajectorySample {
            step: s.step,
            count: s.ensemble.count(),
            record,
            sigma,
        });
        self.last_sample = Some(s.step);
        Ok(())
    }

    fn record_snapshot(&mut self) -> Result<()> {
        let snap = take_snapshot(&self.state, &self.config)?;
        self.trajectory.snapshots.push(snap);
        self.last_snapshot = Some(self.state.step);
        Ok(())
    }
}

/// Rescaled measurements of the current state.
pub fn take_snapshot(state: &SimState, config: &SimConfig) -> Result<Snapshot> {
    let psi = to_selfsimilar(&state.ensemble)?;
    let histogram = RadialHistogram::from_ensemble(&psi, config.bins)?;
    let mut rng = snapshot_rng(state.seed, state.step);
    let est = estimate_coefficients(&psi, config.alpha, config.pair_samples, &mut rng)?;
    let h = entropy(&histogram.normalized()?)?;
    let batch_h: Vec<f64> = psi
        .batches(config.batches)
        .iter()
        .filter_map(|b| {
            RadialHistogram::from_ensemble(b, config.bins)
                .and_then(|x| x.normalized())
                .and_then(|x| entropy(&x))
                .ok()
        })
        .collect();
    Ok(Snapshot {
        step: state.step,
        count: psi.count(),
        t: state.t,
        tau: state.tau,
        coefficients: est.set,
        stderr_a: est.stderr_a,
        stderr_b: est.stderr_b,
        entropy: h,
        entropy_stderr: batch_standard_error(&batch_h),
        exp_moment: exp_moment(&psi, config.tail_weight)?,
        histogram,
        radial_moments: MomentTable::from_ensemble(&psi, config.moment_max_order, true),
    })
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub state: SimState,
    pub termination: Option<Termination>,
}

/// Runs `config` to termination.
pub fn run(config: SimConfig) -> Result<RunOutput> {
    let mut sim = Simulation::new(config)?;
    sim.run_to_end()?;
    Ok(sim.into_output())
}

/// Sum of `|v|²` over particles, for conservation checks.
pub fn total_energy(ens: &ParticleEnsemble) -> f64 {
    ens.weight() * ens.iter().map(norm2).sum::<f64>()
}
