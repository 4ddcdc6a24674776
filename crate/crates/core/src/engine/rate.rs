use crate::error::{Error, Result};

/// Values are clipped to this floor before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-14;
pub const MIN_FIT_SAMPLES: usize = 10;

/// Exponential decay rate fitted by least squares on `ln(series)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub rate: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

/// Fits `series(t) ≈ β e^{−rate·t}` on the samples with `t ∈ [t_a, t_b]`.
pub fn estimate_rate(times: &[f64], series: &[f64], window: (f64, f64)) -> Result<RateEstimate> {
    if times.len() != series.len() {
        return Err(Error::dim("estimate_rate", times.len(), series.len()));
    }
    let (ta, tb) = window;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(series)
        .filter(|(t, _)| **t >= ta && **t <= tb)
        .map(|(&t, &v)| (t, v.max(LOG_FLOOR).ln()))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "fit window [{ta}, {tb}] holds {} samples; need at least {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_l = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_l)).sum();
    let sll: f64 = pts.iter().map(|p| (p.1 - mean_l).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::InvalidArgument("fit window has a single time value".into()));
    }
    // a flat series leaves only rounding noise in `sll`
    let flat = sll <= (n * 4.0 * f64::EPSILON * mean_l.abs().max(1.0)).powi(2);
    let slope = if flat { 0.0 } else { stl / stt };
    let intercept = mean_l - slope * mean_t;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if flat { 1.0 } else { (1.0 - sse / sll).clamp(0.0, 1.0) };
    Ok(RateEstimate {
        rate: -slope,
        window,
        r_squared,
        samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn pure_exponential() {
        let t = grid(501, 0.01);
        let s: Vec<f64> = t.iter().map(|t| 2.5 * (-3.0 * t).exp()).collect();
        let r = estimate_rate(&t, &s, (0.5, 4.0)).unwrap();
        assert!((r.rate - 3.0).abs() < 1e-6);
        assert!(r.r_squared > 0.999_999);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t = grid(100, 0.1);
        let s = vec![0.3; 100];
        let r = estimate_rate(&t, &s, (0.0, 9.9)).unwrap();
        assert_eq!(r.rate, 0.0);
        assert_eq!(r.r_squared, 1.0);
    }

    #[test]
    fn short_window_is_error() {
        let t = grid(100, 0.1);
        let s = vec![1.0; 100];
        assert!(estimate_rate(&t, &s, (0.0, 0.5)).is_err());
        assert!(estimate_rate(&t, &s[..50], (0.0, 5.0)).is_err());
    }
}
