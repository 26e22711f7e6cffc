//! Recorded run output and its CSV persistence.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! an emitted file reproduces the in-memory values exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::{MomentRecord, MomentSigma, MomentTable};
use crate::error::{Error, Result};
use crate::histogram::RadialHistogram;
use crate::rescale::CoefficientSet;

pub const MOMENTS_CSV: &str = "moments.csv";
pub const COEFFICIENTS_CSV: &str = "coefficients.csv";
pub const SNAPSHOTS_CSV: &str = "snapshots.csv";
pub const HISTOGRAMS_CSV: &str = "histograms.csv";
pub const META_JSON: &str = "trajectory.json";

/// One moment record with its batch-means errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub step: u64,
    pub count: usize,
    pub record: MomentRecord,
    pub sigma: MomentSigma,
}

/// Quantities measured on a rescaled ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub count: usize,
    pub t: f64,
    pub tau: f64,
    pub coefficients: CoefficientSet,
    pub stderr_a: f64,
    pub stderr_b: f64,
    /// Relative entropy of the binned profile with respect to the Maxwellian.
    pub entropy: f64,
    pub entropy_stderr: f64,
    /// `Σ w e^{a|ξ|}` at the configured tail weight.
    pub exp_moment: f64,
    pub histogram: RadialHistogram,
    pub radial_moments: MomentTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub alpha: f64,
    pub tail_weight: f64,
    pub samples: Vec<TrajectorySample>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    dim: usize,
    alpha: f64,
    tail_weight: f64,
    termination: Option<String>,
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn format_err(file: &str, message: impl Into<String>) -> Error {
    Error::Format {
        file: file.to_string(),
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(file: &str, rec: &csv::StringRecord, idx: usize, row: usize) -> Result<T> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| format_err(file, format!("row {row}: missing column {idx}")))?;
    raw.parse::<T>()
        .map_err(|_| format_err(file, format!("row {row}: cannot parse `{raw}` in column {idx}")))
}

fn expect_header(file: &str, got: &csv::StringRecord, want: &[String]) -> Result<()> {
    let got: Vec<&str> = got.iter().collect();
    if got != want.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(format_err(file, format!("unexpected header {got:?}, expected {want:?}")));
    }
    Ok(())
}

pub fn moments_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["step", "count", "t", "tau", "n"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=dim).map(|k| format!("u_{k}")));
    h.extend(
        ["T", "m1", "m3", "sigma_n", "sigma_T", "sigma_m1", "sigma_E"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

pub fn coefficients_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["tau", "a", "b", "A", "B"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=dim).map(|k| format!("Bv_{k}")));
    h.push("stderr_a".into());
    h.push("stderr_b".into());
    h
}

fn snapshots_header(orders: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["step", "count", "t", "tau", "entropy", "entropy_stderr", "exp_moment"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(orders.iter().map(|o| format!("m_{o}")));
    h
}

const HISTOGRAM_HEADER: [&str; 5] = ["snapshot", "bin", "r_lo", "r_hi", "density"];
pub const PROFILE_HEADER: [&str; 3] = ["r_mid", "density", "stderr"];

impl Trajectory {
    pub fn new(dim: usize, alpha: f64, tail_weight: f64) -> Self {
        Trajectory {
            dim,
            alpha,
            tail_weight,
            samples: Vec::new(),
            snapshots: Vec::new(),
            termination: None,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.record.t).collect()
    }

    /// Snapshots with `tau >= burn_in`.
    pub fn tail(&self, burn_in: f64) -> Vec<&Snapshot> {
        self.snapshots.iter().filter(|s| s.tau >= burn_in).collect()
    }

    /// Appends samples and snapshots of a continuation run.
    pub fn extend(&mut self, other: Trajectory) {
        self.samples.extend(other.samples);
        self.snapshots.extend(other.snapshots);
        self.termination = other.termination;
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let d = self.dim;

        let mut w = csv::Writer::from_path(dir.join(MOMENTS_CSV))?;
        w.write_record(moments_header(d))?;
        for s in &self.samples {
            let r = &s.record;
            let mut row = vec![s.step.to_string(), s.count.to_string(), fmt(r.t), fmt(r.tau), fmt(r.n)];
            row.extend(r.u.iter().map(|x| fmt(*x)));
            row.extend([r.temperature, r.m1, r.m3, s.sigma.n, s.sigma.temperature, s.sigma.m1, s.sigma.energy_product].map(fmt));
            w.write_record(&row)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(COEFFICIENTS_CSV))?;
        w.write_record(coefficients_header(d))?;
        for s in &self.snapshots {
            let c = &s.coefficients;
            let mut row: Vec<String> = [s.tau, c.a, c.b, c.big_a, c.big_b].map(fmt).to_vec();
            row.extend(c.bv.iter().map(|x| fmt(*x)));
            row.push(fmt(s.stderr_a));
            row.push(fmt(s.stderr_b));
            w.write_record(&row)?;
        }
        w.flush()?;

        let orders: Vec<f64> = self
            .snapshots
            .first()
            .map(|s| s.radial_moments.entries().iter().map(|e| e.0).collect())
            .unwrap_or_default();
        let mut w = csv::Writer::from_path(dir.join(SNAPSHOTS_CSV))?;
        w.write_record(snapshots_header(&orders))?;
        for s in &self.snapshots {
            let mut row = vec![s.step.to_string(), s.count.to_string()];
            row.extend([s.t, s.tau, s.entropy, s.entropy_stderr, s.exp_moment].map(fmt));
            for &o in &orders {
                let v = s
                    .radial_moments
                    .entries()
                    .iter()
                    .find(|e| e.0 == o)
                    .ok_or_else(|| format_err(SNAPSHOTS_CSV, format!("snapshot {} lacks moment order {o}", s.step)))?;
                row.push(fmt(v.1));
            }
            w.write_record(&row)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(HISTOGRAMS_CSV))?;
        w.write_record(HISTOGRAM_HEADER)?;
        for (i, s) in self.snapshots.iter().enumerate() {
            let e = s.histogram.edges();
            for (k, dens) in s.histogram.density().iter().enumerate() {
                w.write_record([i.to_string(), k.to_string(), fmt(e[k]), fmt(e[k + 1]), fmt(*dens)])?;
            }
        }
        w.flush()?;

        let meta = Meta {
            dim: d,
            alpha: self.alpha,
            tail_weight: self.tail_weight,
            termination: self.termination.clone(),
        };
        fs::write(dir.join(META_JSON), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let meta: Meta = serde_json::from_str(&fs::read_to_string(dir.join(META_JSON))?)?;
        let d = meta.dim;
        let mut traj = Trajectory::new(d, meta.alpha, meta.tail_weight);
        traj.termination = meta.termination;

        let mut r = csv::Reader::from_path(dir.join(MOMENTS_CSV))?;
        expect_header(MOMENTS_CSV, r.headers()?, &moments_header(d))?;
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let f = |i| field::<f64>(MOMENTS_CSV, &rec, i, row);
            let u = (0..d).map(|k| f(5 + k)).collect::<Result<Vec<_>>>()?;
            let base = 5 + d;
            traj.samples.push(TrajectorySample {
                step: field(MOMENTS_CSV, &rec, 0, row)?,
                count: field(MOMENTS_CSV, &rec, 1, row)?,
                record: MomentRecord {
                    t: f(2)?,
                    tau: f(3)?,
                    n: f(4)?,
                    u,
                    temperature: f(base)?,
                    m1: f(base + 1)?,
                    m3: f(base + 2)?,
                },
                sigma: MomentSigma {
                    n: f(base + 3)?,
                    temperature: f(base + 4)?,
                    m1: f(base + 5)?,
                    energy_product: f(base + 6)?,
                },
            });
        }

        let mut coeffs = Vec::new();
        let mut r = csv::Reader::from_path(dir.join(COEFFICIENTS_CSV))?;
        expect_header(COEFFICIENTS_CSV, r.headers()?, &coefficients_header(d))?;
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let f = |i| field::<f64>(COEFFICIENTS_CSV, &rec, i, row);
            let bv = (0..d).map(|k| f(5 + k)).collect::<Result<Vec<_>>>()?;
            let set = CoefficientSet {
                a: f(1)?,
                b: f(2)?,
                big_a: f(3)?,
                big_b: f(4)?,
                bv,
                alpha: meta.alpha,
            };
            coeffs.push((f(0)?, set, f(5 + d)?, f(6 + d)?));
        }

        let mut hists: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let mut r = csv::Reader::from_path(dir.join(HISTOGRAMS_CSV))?;
        expect_header(
            HISTOGRAMS_CSV,
            r.headers()?,
            &HISTOGRAM_HEADER.map(String::from),
        )?;
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let snap: usize = field(HISTOGRAMS_CSV, &rec, 0, row)?;
            let bin: usize = field(HISTOGRAMS_CSV, &rec, 1, row)?;
            if snap == hists.len() {
                hists.push((Vec::new(), Vec::new()));
            }
            let Some((edges, dens)) = hists.get_mut(snap) else {
                return Err(format_err(HISTOGRAMS_CSV, format!("row {row}: snapshot index {snap} out of order")));
            };
            if bin != dens.len() {
                return Err(format_err(HISTOGRAMS_CSV, format!("row {row}: bin index {bin} out of order")));
            }
            if edges.is_empty() {
                edges.push(field(HISTOGRAMS_CSV, &rec, 2, row)?);
            }
            edges.push(field(HISTOGRAMS_CSV, &rec, 3, row)?);
            dens.push(field(HISTOGRAMS_CSV, &rec, 4, row)?);
        }

        let mut r = csv::Reader::from_path(dir.join(SNAPSHOTS_CSV))?;
        let header = r.headers()?.clone();
        let orders = header
            .iter()
            .skip(7)
            .map(|h| {
                h.strip_prefix("m_")
                    .and_then(|o| o.parse::<f64>().ok())
                    .ok_or_else(|| format_err(SNAPSHOTS_CSV, format!("bad moment column `{h}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        expect_header(SNAPSHOTS_CSV, &header, &snapshots_header(&orders))?;
        let mut snap_rows = Vec::new();
        for rec in r.records() {
            snap_rows.push(rec?);
        }
        if snap_rows.len() != coeffs.len() || snap_rows.len() != hists.len() {
            return Err(format_err(
                SNAPSHOTS_CSV,
                format!(
                    "snapshot count {} does not match coefficients ({}) and histograms ({})",
                    snap_rows.len(),
                    coeffs.len(),
                    hists.len()
                ),
            ));
        }
        for (row, ((rec, (tau, set, sa, sb)), (edges, dens))) in
            snap_rows.iter().zip(coeffs).zip(hists).enumerate()
        {
            let f = |i| field::<f64>(SNAPSHOTS_CSV, rec, i, row);
            let mut table = MomentTable::new();
            for (k, &o) in orders.iter().enumerate() {
                table.insert(o, f(7 + k)?);
            }
            let snap_tau = f(3)?;
            if snap_tau != tau {
                return Err(format_err(COEFFICIENTS_CSV, format!("row {row}: tau {tau} differs from snapshot tau {snap_tau}")));
            }
            traj.snapshots.push(Snapshot {
                step: field(SNAPSHOTS_CSV, rec, 0, row)?,
                count: field(SNAPSHOTS_CSV, rec, 1, row)?,
                t: f(2)?,
                tau,
                coefficients: set,
                stderr_a: sa,
                stderr_b: sb,
                entropy: f(4)?,
                entropy_stderr: f(5)?,
                exp_moment: f(6)?,
                histogram: RadialHistogram::new(d, edges, dens)?,
                radial_moments: table,
            });
        }
        Ok(traj)
    }
}

/// Writes `r_mid,density,stderr` rows of a profile.
pub fn write_profile_csv(path: &Path, h: &RadialHistogram) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PROFILE_HEADER)?;
    let zeros = vec![0.0; h.bins()];
    let se = h.stderr().unwrap_or(&zeros);
    for ((r, d), s) in h.r_mid().iter().zip(h.density()).zip(se) {
        w.write_record([fmt(*r), fmt(*d), fmt(*s)])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a profile file as `(r_mid, density, stderr)` columns.
pub fn read_profile_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let name = path.display().to_string();
    let mut r = csv::Reader::from_path(path)?;
    expect_header(&name, r.headers()?, &PROFILE_HEADER.map(String::from))?;
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        a.push(field(&name, &rec, 0, row)?);
        b.push(field(&name, &rec, 1, row)?);
        c.push(field(&name, &rec, 2, row)?);
    }
    Ok((a, b, c))
}
