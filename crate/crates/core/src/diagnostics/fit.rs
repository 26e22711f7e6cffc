use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_POINTS: usize = 10;

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual variance.
    pub stderr: f64,
    pub points: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<Fit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch(n, y.len()));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("line fit needs 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("line fit needs distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(Fit {
        slope,
        intercept,
        stderr,
        points: n,
    })
}

fn window_points(x: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(x.len(), y.len()));
    }
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty fit window [{lo}, {hi}]")));
    }
    let (first, last) = match (x.first(), x.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::InsufficientData("empty series".into())),
    };
    if lo < first.min(last) || hi > first.max(last) {
        return Err(Error::InsufficientData(format!(
            "fit window [{lo}, {hi}] exceeds data range [{first}, {last}]"
        )));
    }
    let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= lo && x[i] <= hi).collect();
    if idx.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "fit window [{lo}, {hi}] holds {} points, need {MIN_POINTS}",
            idx.len()
        )));
    }
    Ok((idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| y[i]).collect(), idx))
}

/// Slope of `log(values)` against `log(times)` on `window`.
pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<Fit> {
    let (x, y, idx) = window_points(times, values, window.0, window.1)?;
    for (k, (&t, &v)) in x.iter().zip(&y).enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositive { index: idx[k], value: v });
        }
        if !(t > 0.0) {
            return Err(Error::NonPositive { index: idx[k], value: t });
        }
    }
    let lx: Vec<f64> = x.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Location of the transition from exponential decay to a noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knee {
    /// First index of the flat segment.
    pub index: usize,
    pub tau: f64,
    /// Floor level (geometric mean of the flat segment).
    pub floor: f64,
}

/// Finds the split minimizing the squared residual of a two-piece model for
/// `log d`: a line before the split and a constant after it. Returns `None`
/// when a single line explains the data at least as well.
pub fn detect_knee(taus: &[f64], distances: &[f64]) -> Option<Knee> {
    let n = taus.len();
    if n < 6 || distances.iter().any(|d| !(*d > 0.0)) {
        return None;
    }
    let ly: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let line_sse = |lo: usize, hi: usize| -> f64 {
        match fit_line(&taus[lo..hi], &ly[lo..hi]) {
            Ok(f) => (lo..hi)
                .map(|i| (ly[i] - f.intercept - f.slope * taus[i]).powi(2))
                .sum(),
            Err(_) => f64::INFINITY,
        }
    };
    let const_sse = |lo: usize| -> f64 {
        let m = ly[lo..].iter().sum::<f64>() / (n - lo) as f64;
        ly[lo..].iter().map(|v| (v - m).powi(2)).sum()
    };
    let single = line_sse(0, n);
    let mut best: Option<(usize, f64)> = None;
    for k in 3..=(n - 2) {
        let sse = line_sse(0, k) + const_sse(k);
        if best.is_none_or(|(_, b)| sse < b) {
            best = Some((k, sse));
        }
    }
    let (k, sse) = best?;
    if sse >= single {
        return None;
    }
    // The line must actually decay into the floor.
    let f = fit_line(&taus[..k], &ly[..k]).ok()?;
    if f.slope >= 0.0 {
        return None;
    }
    let floor = (ly[k..].iter().sum::<f64>() / (n - k) as f64).exp();
    Some(Knee {
        index: k,
        tau: taus[k],
        floor,
    })
}

/// Exponential decay rate `-d log(distance)/dτ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub rate: f64,
    pub stderr: f64,
    pub points: usize,
    pub knee: Option<Knee>,
    /// The fit window reaches past the detected noise floor.
    pub flagged: bool,
}

fn exp_fit(x: &[f64], y: &[f64], first_index: usize) -> Result<Fit> {
    if x.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "exponential fit needs {MIN_POINTS} points, got {}",
            x.len()
        )));
    }
    for (k, &d) in y.iter().enumerate() {
        if !(d > 0.0) {
            return Err(Error::NonPositive { index: first_index + k, value: d });
        }
    }
    let ly: Vec<f64> = y.iter().map(|d| d.ln()).collect();
    fit_line(x, &ly)
}

/// Fits the whole series.
pub fn fit_exp_decay(taus: &[f64], distances: &[f64]) -> Result<ExpFit> {
    if taus.len() != distances.len() {
        return Err(Error::DimensionMismatch(taus.len(), distances.len()));
    }
    let f = exp_fit(taus, distances, 0)?;
    let knee = detect_knee(taus, distances);
    Ok(ExpFit {
        rate: -f.slope,
        stderr: f.stderr,
        points: f.points,
        knee,
        flagged: knee.is_some(),
    })
}

/// Fits `[lo, hi]`; flags the result when `hi` lies beyond the detected knee.
pub fn fit_exp_decay_window(taus: &[f64], distances: &[f64], window: (f64, f64)) -> Result<ExpFit> {
    let knee = detect_knee(taus, distances);
    let (x, y, idx) = window_points(taus, distances, window.0, window.1)?;
    let f = exp_fit(&x, &y, idx[0])?;
    Ok(ExpFit {
        rate: -f.slope,
        stderr: f.stderr,
        points: f.points,
        knee,
        flagged: knee.is_some_and(|k| window.1 > k.tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let t: Vec<f64> = (1..=50).map(|k| k as f64 * 0.7).collect();
        let v: Vec<f64> = t.iter().map(|x| x.powf(-0.9)).collect();
        let f = fit_power_law(&t, &v, (1.0, 30.0)).unwrap();
        assert_abs_diff_eq!(f.slope, -0.9, epsilon = 1e-12);
    }

    #[test]
    fn power_law_errors() {
        let t: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let mut v: Vec<f64> = t.iter().map(|x| 1.0 / x).collect();
        assert!(matches!(fit_power_law(&t, &v, (1.0, 5.0)), Err(Error::InsufficientData(_))));
        assert!(matches!(fit_power_law(&t, &v, (0.5, 10.0)), Err(Error::InsufficientData(_))));
        v[12] = 0.0;
        assert!(matches!(fit_power_law(&t, &v, (1.0, 20.0)), Err(Error::NonPositive { index: 12, .. })));
    }

    #[test]
    fn exact_exponential() {
        let tau: Vec<f64> = (0..40).map(|k| 0.25 * k as f64).collect();
        let d: Vec<f64> = tau.iter().map(|x| (-0.7 * x).exp()).collect();
        let f = fit_exp_decay(&tau, &d).unwrap();
        assert_abs_diff_eq!(f.rate, 0.7, epsilon = 1e-12);
        assert!(!f.flagged);
        let mut bad = d.clone();
        bad[3] = -1.0;
        assert!(fit_exp_decay(&tau, &bad).is_err());
    }

    #[test]
    fn knee_is_found_and_window_flagged() {
        let tau: Vec<f64> = (0..60).map(|k| 0.25 * k as f64).collect();
        let d: Vec<f64> = tau.iter().map(|x| (-0.8 * x).exp().max(1e-3)).collect();
        let knee = detect_knee(&tau, &d).unwrap();
        // e^{-0.8 τ} = 1e-3 at τ ≈ 8.63.
        assert!((knee.tau - 8.63).abs() < 0.6, "{knee:?}");
        let early = fit_exp_decay_window(&tau, &d, (0.0, 7.0)).unwrap();
        assert!(!early.flagged);
        assert_abs_diff_eq!(early.rate, 0.8, epsilon = 1e-12);
        let late = fit_exp_decay_window(&tau, &d, (0.0, 14.0)).unwrap();
        assert!(late.flagged);
    }

    proptest! {
        #[test]
        fn synthetic_fits_are_exact(p in -3.0f64..3.0, c in 0.1f64..10.0, rate in 0.05f64..3.0) {
            let t: Vec<f64> = (1..=30).map(|k| k as f64 * 0.5).collect();
            let v: Vec<f64> = t.iter().map(|x| c * x.powf(p)).collect();
            let f = fit_power_law(&t, &v, (0.5, 15.0)).unwrap();
            prop_assert!((f.slope - p).abs() < 1e-12);
            let d: Vec<f64> = t.iter().map(|x| c * (-rate * x).exp()).collect();
            let e = fit_exp_decay(&t, &d).unwrap();
            prop_assert!((e.rate - rate).abs() < 1e-12);
        }
    }
}
