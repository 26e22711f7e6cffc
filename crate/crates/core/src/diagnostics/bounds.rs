use serde_json::json;

use super::Report;
use crate::ensemble::MomentRecord;
use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, TrajectorySample};

/// Analytic envelopes `(c0 + 2t)^{-γ} <= · <= (c1 + αt/2)^{-γ}` with
/// `c0 = 1/M1(0)` and `c1 = 1/√E(0)`, `E = d n² T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub c0: f64,
    pub c1: f64,
    pub alpha: f64,
}

impl Envelope {
    pub fn from_initial(rec: &MomentRecord, alpha: f64) -> Result<Self> {
        let e0 = rec.energy_product();
        if !(rec.m1 > 0.0 && e0 > 0.0) {
            return Err(Error::DegenerateTemperature);
        }
        Ok(Envelope {
            c0: 1.0 / rec.m1,
            c1: 1.0 / e0.sqrt(),
            alpha,
        })
    }

    pub fn product_lower(&self, t: f64) -> f64 {
        (self.c0 + 2.0 * t).powi(-2)
    }

    pub fn product_upper(&self, t: f64) -> f64 {
        (self.c1 + 0.5 * self.alpha * t).powi(-2)
    }

    pub fn m1_lower(&self, t: f64) -> f64 {
        1.0 / (self.c0 + 2.0 * t)
    }

    pub fn m1_upper(&self, t: f64) -> f64 {
        1.0 / (self.c1 + 0.5 * self.alpha * t)
    }
}

fn initial(traj: &Trajectory) -> Result<&TrajectorySample> {
    match traj.samples.first() {
        Some(s) if s.record.t == 0.0 => Ok(s),
        _ => Err(Error::InsufficientData("trajectory has no initial record at t = 0".into())),
    }
}

fn envelope_check(
    name: &str,
    traj: &Trajectory,
    alpha: f64,
    k_sigma: f64,
    lower: impl Fn(&Envelope, f64) -> f64,
    upper: impl Fn(&Envelope, f64) -> f64,
    value: impl Fn(&TrajectorySample) -> (f64, f64),
) -> Result<Report> {
    let env = Envelope::from_initial(&initial(traj)?.record, alpha)?;
    let mut monotone = true;
    let mut prev: Option<(f64, f64)> = None;
    let mut worst = f64::INFINITY;
    let mut worst_t = 0.0;
    let mut violations = 0usize;
    let mut cs_violations = 0usize;
    for s in &traj.samples {
        let t = s.record.t;
        let (lo, hi) = (lower(&env, t), upper(&env, t));
        if let Some((plo, phi)) = prev {
            monotone &= lo <= plo && hi <= phi;
        }
        prev = Some((lo, hi));
        let (v, sigma) = value(s);
        let scale = sigma.max(1e-12 * v.abs()).max(f64::MIN_POSITIVE);
        let margin = ((v - lo) / scale).min((hi - v) / scale);
        if margin < -k_sigma {
            violations += 1;
        }
        if margin < worst {
            worst = margin;
            worst_t = t;
        }
        let r = &s.record;
        if r.m1 * r.m1 > r.n * r.m2() * (1.0 + 1e-12) {
            cs_violations += 1;
        }
    }
    let pass = monotone && violations == 0 && cs_violations == 0;
    Ok(Report::new(
        name,
        pass,
        worst,
        -k_sigma,
        json!({
            "c0": env.c0,
            "c1": env.c1,
            "alpha": alpha,
            "samples": traj.samples.len(),
            "violations": violations,
            "worst_margin_sigma": worst,
            "worst_t": worst_t,
            "envelopes_monotone": monotone,
            "cauchy_schwarz_violations": cs_violations,
        }),
    ))
}

/// Checks `(c0+2t)^{-2} <= d n² T <= (c1+αt/2)^{-2}` at every sample within
/// `k_sigma` batch-means standard errors. The margin is in units of σ.
pub fn product_bound_check(traj: &Trajectory, alpha: f64, k_sigma: f64) -> Result<Report> {
    envelope_check(
        "product_bound",
        traj,
        alpha,
        k_sigma,
        Envelope::product_lower,
        Envelope::product_upper,
        |s| (s.record.energy_product(), s.sigma.energy_product),
    )
}

/// Checks `(c0+2t)^{-1} <= M1 <= (c1+αt/2)^{-1}` at every sample.
pub fn m1_bound_check(traj: &Trajectory, alpha: f64, k_sigma: f64) -> Result<Report> {
    envelope_check(
        "m1_bound",
        traj,
        alpha,
        k_sigma,
        Envelope::m1_lower,
        Envelope::m1_upper,
        |s| (s.record.m1, s.sigma.m1),
    )
}
