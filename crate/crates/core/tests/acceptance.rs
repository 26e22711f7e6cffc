//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use annihilation_kinetics::collision::{
    alpha_star, maxwellian_coefficients, post_collision, povzner_angular_check, povzner_rho, sample_sigma,
};
use annihilation_kinetics::diagnostics::{
    detect_knee, fit_exp_decay_window, fit_power_law, m1_bound_check, product_bound_check, K_SIGMA,
};
use annihilation_kinetics::dsmc::checkpoint;
use annihilation_kinetics::profile::{
    distance_stderr, extract_profile, maxwellian_exp_moment, predicted_rates, profile_coefficients,
    profile_distance, Reference,
};
use annihilation_kinetics::rescale::{reconstruct_moments, to_selfsimilar};
use annihilation_kinetics::{
    compute_moments, DtPolicy, InitialCondition, RadialHistogram, SimConfig, Simulation, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<(bool, String), String>;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(id: usize, name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> Check) -> Outcome {
    let start = Instant::now();
    let res = f();
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match res {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail.push_str(&format!("; runtime {:.1}s exceeds {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()));
        }
    }
    let o = Outcome {
        id,
        name,
        pass,
        detail,
        elapsed,
    };
    println!(
        "[{}] C{} {}: {} ({:.1}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.detail,
        o.elapsed.as_secs_f64()
    );
    o
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn ulp(x: f64) -> f64 {
    let x = x.abs().max(f64::MIN_POSITIVE);
    f64::from_bits(x.to_bits() + 1) - x
}

fn gaussian(dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn c1_geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_p, mut worst_e, mut worst_g) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..1_000_000usize {
        let d = 2 + i % 3;
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let v = gaussian(d, scale, &mut rng);
        let vs = gaussian(d, scale, &mut rng);
        let s = sample_sigma(d, &mut rng);
        let (a, b) = post_collision(&v, &vs, &s).map_err(err)?;
        for k in 0..d {
            let m = v[k].abs().max(vs[k].abs()).max(a[k].abs()).max(b[k].abs());
            worst_p = worst_p.max(((a[k] + b[k]) - (v[k] + vs[k])).abs() / ulp(m));
        }
        let e0: f64 = v.iter().chain(&vs).map(|x| x * x).sum();
        let e1: f64 = a.iter().chain(&b).map(|x| x * x).sum();
        worst_e = worst_e.max((e1 - e0).abs() / e0);
        let g0: f64 = v.iter().zip(&vs).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let g1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        worst_g = worst_g.max((g1 - g0).abs() / g0);
    }
    let pass = worst_p <= 4.0 && worst_e <= 1e-12 && worst_g <= 1e-12;
    Ok((
        pass,
        format!("momentum {worst_p:.1} ulp (<= 4), energy {worst_e:.1e} rel (<= 1e-12), |v-v*| {worst_g:.1e} rel"),
    ))
}

fn c2_constants() -> Check {
    let mut worst = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut pass = true;
    for d in [2usize, 3, 4] {
        let df = d as f64;
        let r1 = povzner_rho(1.0, d).map_err(err)?;
        worst = worst.max((r1 - 1.0).abs());
        if d == 3 {
            for k in [0.5, 1.0, 1.5, 2.0, 3.0, 4.5] {
                let r = povzner_rho(k, 3).map_err(err)?;
                worst = worst.max((r - 2.0 / (k + 1.0)).abs());
            }
            let a = alpha_star(3).map_err(err)?;
            worst = worst.max((a - 1.0 / 7.0).abs());
            let m = maxwellian_coefficients(3).map_err(err)?;
            worst = worst.max((m.a0 - 2.0 * (2.0 / PI).sqrt()).abs());
        }
        let m = maxwellian_coefficients(d).map_err(err)?;
        let e1 = (m.b0 / m.a0 - (2.0 * df + 1.0) / (2.0 * df)).abs();
        let e2 = (2.0 * m.a0 / (m.a0 + m.b0) - 4.0 * df / (4.0 * df + 1.0)).abs();
        worst_ratio = worst_ratio.max(e1).max(e2);
    }
    pass &= worst <= 1e-10 && worst_ratio <= 1e-12;
    Ok((
        pass,
        format!("quadrature/closed-form {worst:.1e} (<= 1e-10), exponent ratios {worst_ratio:.1e} (<= 1e-12)"),
    ))
}

fn c3_povzner() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_equality = 0.0f64;
    let mut checks = 0;
    for d in [2usize, 3, 4] {
        for _ in 0..100 {
            let v = gaussian(d, rng.random_range(0.1..3.0), &mut rng);
            let vs = gaussian(d, rng.random_range(0.1..3.0), &mut rng);
            for k in [1.0, 1.5, 2.0, 3.0] {
                let c = povzner_angular_check(&v, &vs, k, d, 1e-8).map_err(err)?;
                if !c.holds {
                    return Ok((false, format!("violated at d={d}, k={k}: {} > {}", c.lhs, c.rhs)));
                }
                worst_excess = worst_excess.max(c.lhs - c.rhs);
                if k == 1.0 {
                    worst_equality = worst_equality.max((c.lhs - c.rhs).abs() / c.rhs.max(1.0));
                }
                checks += 1;
            }
        }
    }
    Ok((
        worst_equality <= 1e-10,
        format!("{checks} checks, max lhs-rhs {worst_excess:.2e} (<= 1e-8), k=1 equality {worst_equality:.1e} (<= 1e-10)"),
    ))
}

fn elastic_config(initial: InitialCondition, seed: u64) -> SimConfig {
    SimConfig {
        dim: 3,
        alpha: 0.0,
        particle_count: 100_000,
        seed,
        initial,
        min_particles: 2,
        pair_samples: 50_000,
        ..SimConfig::default()
    }
}

fn c4_elastic() -> Check {
    let (eq, far) = std::thread::scope(|s| {
        let eq = s.spawn(|| {
            let cfg = SimConfig {
                max_steps: Some(10_000),
                record_interval: 100,
                snapshot_interval: 10_000,
                ..elastic_config(InitialCondition::Maxwellian, 41)
            };
            annihilation_kinetics::run(cfg)
        });
        let far = s.spawn(|| {
            let cfg = SimConfig {
                max_steps: Some(1_000),
                record_interval: 10,
                snapshot_interval: 5,
                ..elastic_config(InitialCondition::UniformBall, 43)
            };
            annihilation_kinetics::run(cfg)
        });
        (eq.join().expect("thread"), far.join().expect("thread"))
    });
    let eq = eq.map_err(err)?;
    let far = far.map_err(err)?;

    let first = &eq.trajectory.samples[0];
    let last = eq.trajectory.samples.last().ok_or("no samples")?;
    let n_ok = last.record.n == first.record.n;
    let sigma_u = (first.record.temperature / 100_000.0).sqrt();
    let du = first
        .record
        .u
        .iter()
        .zip(&last.record.u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let sigma_t = first.sigma.temperature.hypot(last.sigma.temperature);
    let dt = (last.record.temperature - first.record.temperature).abs();
    let drift_ok = n_ok && du <= 4.0 * sigma_u && dt <= 4.0 * sigma_t;

    let snaps = &far.trajectory.snapshots;
    let mut worst_rise = f64::NEG_INFINITY;
    for w in snaps.windows(2) {
        let band = K_SIGMA * w[0].entropy_stderr.hypot(w[1].entropy_stderr);
        worst_rise = worst_rise.max((w[1].entropy - w[0].entropy) / band);
    }
    let tail: Vec<&RadialHistogram> = far.trajectory.tail(8.0).iter().map(|s| &s.histogram).collect();
    let profile = extract_profile(&tail).map_err(err)?;
    let l1 = profile_distance(&profile, Reference::Maxwellian, 0.0).map_err(err)?;
    let l1w = profile_distance(&profile, Reference::Maxwellian, 0.5).map_err(err)?;
    let h_ok = worst_rise <= 1.0;
    Ok((
        drift_ok && h_ok && l1 < 0.02,
        format!(
            "drift |Δu| {du:.1e} (4σ {:.1e}), |ΔT| {dt:.1e} (4σ {:.1e}); H rise max {worst_rise:.2} of 3σ over {} snapshots (H {:.3} -> {:.1e}); tail L1 to M {l1:.4} (< 0.02, a=0.5: {l1w:.4})",
            4.0 * sigma_u,
            4.0 * sigma_t,
            snaps.len(),
            snaps[0].entropy,
            snaps.last().map_or(0.0, |s| s.entropy),
        ),
    ))
}

struct MainRun {
    traj: Trajectory,
    rescale_err: f64,
}

fn main_config() -> SimConfig {
    SimConfig {
        dim: 3,
        alpha: 0.05,
        particle_count: 100_000,
        seed: 42,
        min_particles: 1_000,
        ..SimConfig::default()
    }
}

fn rescale_error(sim: &Simulation) -> Result<f64, String> {
    let psi = to_selfsimilar(&sim.state().ensemble).map_err(err)?;
    let m = compute_moments(&psi).map_err(err)?;
    let energy = psi.weight() * psi.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>()).sum::<f64>();
    let u = m.u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    Ok((m.n - 1.0).abs().max(u).max((energy - 1.5).abs() / 1.5))
}

fn main_run() -> Result<MainRun, String> {
    let cfg = main_config();
    let interval = cfg.snapshot_interval;
    let mut sim = Simulation::new(cfg).map_err(err)?;
    let mut worst = rescale_error(&sim)?;
    loop {
        let done = sim.advance().map_err(err)?;
        if sim.state().step % interval == 0 || done.is_some() {
            worst = worst.max(rescale_error(&sim)?);
        }
        if done.is_some() {
            break;
        }
    }
    Ok(MainRun {
        traj: sim.into_output().trajectory,
        rescale_err: worst,
    })
}

fn c5_rates(run: &MainRun) -> Check {
    let tr = &run.traj;
    let cfg = main_config();
    let t: Vec<f64> = tr.samples.iter().map(|s| s.record.t).collect();
    let n: Vec<f64> = tr.samples.iter().map(|s| s.record.n).collect();
    let temp: Vec<f64> = tr.samples.iter().map(|s| s.record.temperature).collect();
    let tf = *t.last().ok_or("empty run")?;
    let window = (tf / 10.0, tf);
    let fn_ = fit_power_law(&t, &n, window).map_err(err)?;
    let ft = fit_power_law(&t, &temp, window).map_err(err)?;
    let tail: Vec<&RadialHistogram> = tr.tail(cfg.burn_in_tau).iter().map(|s| &s.histogram).collect();
    let profile = extract_profile(&tail).map_err(err)?;
    let coeffs = profile_coefficients(&profile, cfg.alpha).map_err(err)?;
    let pred = predicted_rates(&coeffs).map_err(err)?;
    let (pn, pt) = (-12.0 / 13.0, -2.0 / 13.0);
    let pass = (fn_.slope - pn).abs() <= 0.08
        && (ft.slope - pt).abs() <= 0.05
        && (fn_.slope + pred.density_exp).abs() <= 0.05
        && (ft.slope + pred.temperature_exp).abs() <= 0.05;
    Ok((
        pass,
        format!(
            "n ~ t^{:.4}±{:.4} (-12/13 ± 0.08), T ~ t^{:.4}±{:.4} (-2/13 ± 0.05); profile predicts -{:.4}, -{:.4} (± 0.05); window t in [{:.0}, {:.0}], final n/n0 {:.4}",
            fn_.slope,
            fn_.stderr,
            ft.slope,
            ft.stderr,
            pred.density_exp,
            pred.temperature_exp,
            window.0,
            window.1,
            n.last().copied().unwrap_or(0.0) / n[0],
        ),
    ))
}

fn c6_envelopes(run: &MainRun) -> Check {
    let alpha = main_config().alpha;
    let p = product_bound_check(&run.traj, alpha, K_SIGMA).map_err(err)?;
    let m = m1_bound_check(&run.traj, alpha, K_SIGMA).map_err(err)?;
    Ok((
        p.passed() && m.passed(),
        format!(
            "d n²T: {} violations, worst margin {:.2}σ; M1: {} violations, worst margin {:.2}σ; {} samples",
            p.details["violations"], p.margin, m.details["violations"], m.margin, p.details["samples"]
        ),
    ))
}

fn c7_reconstruction(run: &MainRun) -> Check {
    let tr = &run.traj;
    let first = &tr.samples[0].record;
    let taus: Vec<f64> = tr.snapshots.iter().map(|s| s.tau).collect();
    let coeffs: Vec<_> = tr.snapshots.iter().map(|s| s.coefficients.clone()).collect();
    let rec = reconstruct_moments(&taus, &coeffs, first.n, first.temperature).map_err(err)?;
    let (mut worst_n, mut worst_t) = (0.0f64, 0.0f64);
    for (snap, r) in tr.snapshots.iter().zip(&rec) {
        let s = tr
            .samples
            .iter()
            .find(|s| s.step == snap.step)
            .ok_or("snapshot without moment record")?;
        worst_n = worst_n.max((r.n / s.record.n - 1.0).abs());
        worst_t = worst_t.max((r.temperature / s.record.temperature - 1.0).abs());
    }
    Ok((
        worst_n <= 0.05 && worst_t <= 0.05 && run.rescale_err <= 1e-12,
        format!(
            "reconstructed n {:.2}%, T {:.2}% max rel. error (<= 5%) over {} snapshots; rescaled mass/momentum/energy error {:.1e} (<= 1e-12)",
            100.0 * worst_n,
            100.0 * worst_t,
            rec.len(),
            run.rescale_err
        ),
    ))
}

fn annihilating_config(initial: InitialCondition, alpha: f64, seed: u64) -> SimConfig {
    SimConfig {
        dim: 3,
        alpha,
        particle_count: 100_000,
        seed,
        initial,
        min_particles: 2,
        pair_samples: 50_000,
        ..SimConfig::default()
    }
}

/// Exponential rate at which rescaled snapshots approach `target`, fitted
/// before the noise floor.
fn convergence_rate(tr: &Trajectory, target: Reference<'_>) -> Result<(f64, f64), String> {
    let mut taus = Vec::new();
    let mut dist = Vec::new();
    for s in &tr.snapshots {
        let h = s.histogram.normalized().map_err(err)?;
        taus.push(s.tau);
        dist.push(profile_distance(&h, target, 0.0).map_err(err)?);
    }
    let knee = detect_knee(&taus, &dist).ok_or("no noise floor reached")?;
    let fit = fit_exp_decay_window(&taus, &dist, (taus[0], taus[knee.index - 1])).map_err(err)?;
    Ok((fit.rate, knee.tau))
}

fn c8_universality() -> Check {
    let alpha = 0.05;
    // Long runs with sparse snapshots for profiles; short finely sampled runs
    // for convergence rates.
    let plan = [
        (InitialCondition::UniformBall, alpha, 81, 700, 8),
        (InitialCondition::Bimodal, alpha, 82, 700, 8),
        (InitialCondition::UniformBall, 0.0, 83, 300, 1),
        (InitialCondition::UniformBall, 0.02, 84, 300, 1),
        (InitialCondition::UniformBall, 0.05, 85, 300, 1),
    ];
    let runs: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = plan
            .into_iter()
            .map(|(ic, a, seed, steps, every)| {
                s.spawn(move || {
                    let cfg = SimConfig {
                        max_steps: Some(steps),
                        snapshot_interval: every,
                        ..annihilating_config(ic, a, seed)
                    };
                    annihilation_kinetics::run(cfg)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("thread")).collect()
    });
    let runs: Vec<_> = runs.into_iter().collect::<Result<_, _>>().map_err(err)?;
    let burn_in = 12.0;
    let profile = |tr: &Trajectory, stride: usize| {
        let tail: Vec<&RadialHistogram> = tr.tail(burn_in).iter().step_by(stride).map(|s| &s.histogram).collect();
        extract_profile(&tail)
    };
    let p1 = profile(&runs[0].trajectory, 1).map_err(err)?;
    let p2 = profile(&runs[1].trajectory, 1).map_err(err)?;
    let mut uniq = true;
    let mut parts = Vec::new();
    for a in [0.0, 0.5] {
        let d = profile_distance(&p1, Reference::Histogram(&p2), a).map_err(err)?;
        let s = distance_stderr(&p1, &p2, a).map_err(err)?;
        uniq &= d <= 2.0 * s;
        parts.push(format!("a={a}: L1 {d:.4} vs 2σ {:.4}", 2.0 * s));
    }

    // Rescaled convergence rates: α = 0 approaches M, α > 0 its own tail profile.
    let mut rates = Vec::new();
    for (k, run) in runs[2..].iter().enumerate() {
        let a = plan[k + 2].1;
        let rate = if a == 0.0 {
            convergence_rate(&run.trajectory, Reference::Maxwellian)?
        } else {
            let target = profile(&run.trajectory, 8).map_err(err)?;
            convergence_rate(&run.trajectory, Reference::Histogram(&target))?
        };
        rates.push((a, rate.0));
    }
    let mut worst_ratio = 1.0f64;
    for i in 0..rates.len() {
        for j in 0..i {
            let r = rates[i].1 / rates[j].1;
            worst_ratio = worst_ratio.max(r.max(1.0 / r));
        }
    }
    let rate_ok = rates.iter().all(|r| r.1 > 0.0) && worst_ratio <= 2.0;
    let table: Vec<String> = rates.iter().map(|(a, r)| format!("α={a}: {r:.3}")).collect();
    Ok((
        uniq && rate_ok,
        format!(
            "uniform ball vs bimodal {}; rates {} (max pairwise ratio {worst_ratio:.2} <= 2)",
            parts.join(", "),
            table.join(", ")
        ),
    ))
}

fn c9_tails(run: &MainRun) -> Check {
    let reference = maxwellian_exp_moment(0.5, 3).map_err(err)?;
    let late: Vec<_> = run.traj.snapshots.iter().filter(|s| s.t >= 1.0).collect();
    if late.is_empty() {
        return Err("no snapshots with t >= 1".into());
    }
    let worst = late.iter().map(|s| s.exp_moment).fold(0.0, f64::max);
    Ok((
        worst < 2.0 * reference && run.traj.tail_weight == 0.5,
        format!(
            "max exp moment {worst:.4} over {} snapshots vs 2 x Maxwellian {:.4}",
            late.len(),
            2.0 * reference
        ),
    ))
}

fn c10_persistence() -> Check {
    let base = SimConfig {
        particle_count: 20_000,
        min_particles: 4_000,
        pair_samples: 20_000,
        seed: 7,
        ..SimConfig::default()
    };
    let mut notes = Vec::new();
    let mut pass = true;
    for shards in [1, 4] {
        let cfg = SimConfig { shards, ..base.clone() };
        let a = annihilation_kinetics::run(cfg.clone()).map_err(err)?;
        let b = annihilation_kinetics::run(cfg).map_err(err)?;
        let same = a.state == b.state && a.trajectory == b.trajectory;
        pass &= same;
        notes.push(format!("S={shards} rerun identical: {same}"));
    }

    let dir = tempfile::tempdir().map_err(err)?;
    let full = annihilation_kinetics::run(base.clone()).map_err(err)?;
    let mut sim = Simulation::new(base.clone()).map_err(err)?;
    sim.run_steps(25).map_err(err)?;
    let path = dir.path().join("checkpoint.bin");
    checkpoint::write_checkpoint(&path, sim.state(), base.alpha).map_err(err)?;
    let (state, alpha) = checkpoint::read_checkpoint(&path).map_err(err)?;
    let exact = &state == sim.state() && alpha == base.alpha;
    let mut resumed = Simulation::resume(base.clone(), state).map_err(err)?;
    resumed.run_to_end().map_err(err)?;
    let mut joined = sim.trajectory().clone();
    let cont = resumed.into_output();
    joined.extend(cont.trajectory);
    let continues = cont.state == full.state && joined == full.trajectory;
    pass &= exact && continues;
    notes.push(format!("checkpoint exact: {exact}, resumed run identical: {continues}"));

    let out = dir.path().join("traj");
    full.trajectory.write_dir(&out).map_err(err)?;
    let back = Trajectory::read_dir(&out).map_err(err)?;
    let csv_ok = back == full.trajectory;
    pass &= csv_ok;
    notes.push(format!("CSV round-trip identical: {csv_ok}"));
    Ok((pass, notes.join("; ")))
}

fn main() {
    // Auto time stepping is the default everywhere below.
    assert!(matches!(SimConfig::default().dt_policy, DtPolicy::CollisionFraction(_)));
    let secs = Duration::from_secs;
    let mut out = vec![
        timed(1, "exact collision geometry", Some(secs(5)), c1_geometry),
        timed(2, "constants", Some(secs(1)), c2_constants),
        timed(3, "Povzner angular inequality", Some(secs(10)), c3_povzner),
        timed(4, "elastic sanity", Some(secs(120)), c4_elastic),
    ];
    let start = Instant::now();
    let run = main_run();
    let run_time = start.elapsed();
    match run {
        Ok(run) => {
            out.push(timed(5, "decay exponents", Some(secs(600).saturating_sub(run_time)), || c5_rates(&run)));
            out.push(timed(6, "moment envelopes", None, || c6_envelopes(&run)));
            out.push(timed(7, "scaling self-consistency", None, || c7_reconstruction(&run)));
            out.push(timed(8, "attractor universality", None, c8_universality));
            out.push(timed(9, "tail boundedness", None, || c9_tails(&run)));
        }
        Err(e) => {
            for (id, name) in [(5, "decay exponents"), (6, "moment envelopes"), (7, "scaling self-consistency"), (9, "tail boundedness")] {
                let e = e.clone();
                out.push(timed(id, name, None, move || Err(e)));
            }
            out.push(timed(8, "attractor universality", None, c8_universality));
        }
    }
    out.push(timed(10, "determinism and persistence", None, c10_persistence));
    out.sort_by_key(|o| o.id);
    let failed: Vec<String> = out.iter().filter(|o| !o.pass).map(|o| format!("C{} {}", o.id, o.name)).collect();
    println!("main run: {:.1}s", run_time.as_secs_f64());
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", out.len());
    } else {
        println!("acceptance: {} failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
}
