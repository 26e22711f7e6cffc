//! Table of the dimension-dependent constants, each evaluated two ways.

use std::fmt::Write as _;

use annihilation_kinetics::collision::{alpha_star, maxwellian_coefficients, povzner_rho};
use annihilation_kinetics::diagnostics::Report;
use annihilation_kinetics::quadrature::{integrate, sphere_area};
use annihilation_kinetics::Result;
use serde_json::json;
use statrs::function::beta::beta;

pub const DELTA_TOL: f64 = 1e-10;

/// ϱ_k from the Beta-function form `(|S^{d-2}|/|S^{d-1}|) 2^{d-1} B(k+h, h)`, `h = (d-1)/2`.
pub fn rho_closed(k: f64, dim: usize) -> f64 {
    let h = (dim as f64 - 1.0) / 2.0;
    sphere_area(dim - 2) / sphere_area(dim - 1) * 2f64.powf(dim as f64 - 1.0) * beta(k + h, h)
}

/// `E|w|^p` for a standard Gaussian `w` in `R^d`, by radial quadrature.
fn chi_moment(p: f64, dim: usize) -> Result<f64> {
    let d = dim as f64;
    let weight = |q: f64| move |r: f64| r.powf(q + d - 1.0) * (-0.5 * r * r).exp();
    let num = integrate(weight(p), 0.0, 40.0, 1e-14)?;
    let den = integrate(weight(0.0), 0.0, 40.0, 1e-14)?;
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsRow {
    pub dim: usize,
    pub rho_half: f64,
    pub rho_one: f64,
    pub alpha_star: f64,
    pub a0: f64,
    pub b0: f64,
    pub density_exp: f64,
    pub temperature_exp: f64,
    /// `(name, quadrature value, closed form)` pairs behind `max_delta`.
    pub deltas: Vec<(&'static str, f64, f64)>,
}

impl ConstantsRow {
    pub fn max_delta(&self) -> f64 {
        self.deltas.iter().map(|(_, q, c)| (q - c).abs()).fold(0.0, f64::max)
    }
}

/// Quadrature values are checked against closed forms. For the Maxwellian
/// coefficients, relative speeds of two Maxwellian particles are standard
/// Gaussian, so `a0 = E|w|` and `b0 = (2/d)(d E|w| + E|w|³)/4`.
pub fn constants_row(dim: usize) -> Result<ConstantsRow> {
    let d = dim as f64;
    let rho_half = povzner_rho(0.5, dim)?;
    let rho_one = povzner_rho(1.0, dim)?;
    let star = alpha_star(dim)?;
    let closed_half = rho_closed(0.5, dim);
    let m = maxwellian_coefficients(dim)?;
    let w1 = chi_moment(1.0, dim)?;
    let w3 = chi_moment(3.0, dim)?;
    let a0_quad = w1;
    let b0_quad = 2.0 / d * (d * w1 + w3) / 4.0;
    let density_exp = 4.0 * d / (4.0 * d + 1.0);
    let temperature_exp = 2.0 / (4.0 * d + 1.0);
    let mut deltas = vec![
        ("rho_1/2", rho_half, closed_half),
        ("rho_1", rho_one, 1.0),
        ("alpha_star", star, (closed_half - 1.0) / (closed_half + 1.0)),
        ("a0", a0_quad, m.a0),
        ("b0", b0_quad, m.b0),
        ("density_exp", 2.0 * a0_quad / (a0_quad + b0_quad), density_exp),
        ("temperature_exp", 2.0 * (b0_quad - a0_quad) / (a0_quad + b0_quad), temperature_exp),
    ];
    if dim == 3 {
        deltas.push(("rho_1/2 (2/(k+1))", rho_half, 2.0 / 1.5));
    }
    Ok(ConstantsRow {
        dim,
        rho_half,
        rho_one,
        alpha_star: star,
        a0: m.a0,
        b0: m.b0,
        density_exp,
        temperature_exp,
        deltas,
    })
}

pub fn table(rows: &[ConstantsRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>3} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14} {:>10}",
        "d", "rho_1/2", "rho_1", "alpha_star", "a0", "b0", "4d/(4d+1)", "2/(4d+1)", "max_delta"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>3} {:>14.10} {:>14.10} {:>14.10} {:>14.10} {:>14.10} {:>14.10} {:>14.10} {:>10.2e}",
            r.dim,
            r.rho_half,
            r.rho_one,
            r.alpha_star,
            r.a0,
            r.b0,
            r.density_exp,
            r.temperature_exp,
            r.max_delta()
        );
    }
    s
}

pub fn report(row: &ConstantsRow) -> Report {
    let deltas: serde_json::Map<String, serde_json::Value> = row
        .deltas
        .iter()
        .map(|(k, q, c)| (k.to_string(), json!({"quadrature": q, "closed_form": c, "delta": (q - c).abs()})))
        .collect();
    Report::new(
        format!("constants_d{}", row.dim),
        row.max_delta() < DELTA_TOL,
        row.max_delta(),
        DELTA_TOL,
        json!({
            "dim": row.dim,
            "rho_half": row.rho_half,
            "rho_one": row.rho_one,
            "alpha_star": row.alpha_star,
            "a0": row.a0,
            "b0": row.b0,
            "density_exp": row.density_exp,
            "temperature_exp": row.temperature_exp,
            "deltas": deltas,
        }),
    )
}
