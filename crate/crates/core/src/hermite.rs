//! Piecewise cubic Hermite interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HermiteKind {
    /// Fritsch-Carlson slopes; never overshoots the data.
    #[default]
    Monotone,
    /// Three-point finite-difference slopes.
    Classical,
}

#[derive(Clone, Debug)]
pub struct HermiteSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn secants(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut h = Vec::with_capacity(x.len() - 1);
    let mut delta = Vec::with_capacity(x.len() - 1);
    for k in 0..x.len() - 1 {
        let hk = x[k + 1] - x[k];
        if hk.is_nan() || hk <= 0.0 {
            return Err(Error::NonIncreasingAbscissae);
        }
        h.push(hk);
        delta.push((y[k + 1] - y[k]) / hk);
    }
    Ok((h, delta))
}

fn monotone_end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

fn monotone_slopes(h: &[f64], delta: &[f64]) -> Vec<f64> {
    let n = h.len() + 1;
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = monotone_end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = monotone_end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn classical_slopes(h: &[f64], delta: &[f64]) -> Vec<f64> {
    let n = h.len() + 1;
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        d[k] = (h[k] * delta[k - 1] + h[k - 1] * delta[k]) / (h[k - 1] + h[k]);
    }
    d
}

impl HermiteSpline {
    pub fn new(x: &[f64], y: &[f64], kind: HermiteKind) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::TooFewAnchors(x.len().min(y.len())));
        }
        let (h, delta) = secants(x, y)?;
        let d = match kind {
            HermiteKind::Monotone => monotone_slopes(&h, &delta),
            HermiteKind::Classical => classical_slopes(&h, &delta),
        };
        Ok(HermiteSpline {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    /// Evaluate at `t`; outside the data range the end cubic is extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&xk| xk <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}
