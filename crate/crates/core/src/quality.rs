//! Mesh diagnostics: fold detection, distances between meshes and Monte Carlo
//! convergence rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{initial_mesh, MeshState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub min_jacobian: f64,
    /// Largest `|xi - xi_uniform|` or `|eta - eta_uniform|` over all nodes.
    pub max_node_displacement_from_uniform: f64,
    pub max_xi_deviation: f64,
    pub max_eta_deviation: f64,
    pub fold_free: bool,
}

/// Minimum over interior nodes of `xi_x eta_y - xi_y eta_x`, centred
/// differences.
pub fn discrete_jacobian(state: &MeshState) -> Result<f64> {
    let g = *state.grid();
    if g.nx < 3 || g.ny < 3 {
        return Err(Error::InvalidGrid("jacobian needs at least 3x3 nodes".into()));
    }
    let (xi, eta) = (&state.xi, &state.eta);
    let mut min = f64::INFINITY;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let xi_x = (xi.at(i + 1, j) - xi.at(i - 1, j)) / (2.0 * g.hx);
            let xi_y = (xi.at(i, j + 1) - xi.at(i, j - 1)) / (2.0 * g.hy);
            let eta_x = (eta.at(i + 1, j) - eta.at(i - 1, j)) / (2.0 * g.hx);
            let eta_y = (eta.at(i, j + 1) - eta.at(i, j - 1)) / (2.0 * g.hy);
            min = min.min(xi_x * eta_y - xi_y * eta_x);
        }
    }
    Ok(min)
}

pub fn quality_report(state: &MeshState) -> Result<QualityReport> {
    let min_jacobian = discrete_jacobian(state)?;
    let uniform = initial_mesh(state.grid());
    let dev = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let max_xi_deviation = dev(state.xi.values(), uniform.xi.values());
    let max_eta_deviation = dev(state.eta.values(), uniform.eta.values());
    Ok(QualityReport {
        min_jacobian,
        max_node_displacement_from_uniform: max_xi_deviation.max(max_eta_deviation),
        max_xi_deviation,
        max_eta_deviation,
        fold_free: min_jacobian > 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshDistance {
    pub l_inf: f64,
    /// Root mean square over both fields and all nodes.
    pub l_2: f64,
}

pub fn mesh_distance(a: &MeshState, b: &MeshState) -> Result<MeshDistance> {
    let (ga, gb) = (a.grid(), b.grid());
    if ga.nx != gb.nx || ga.ny != gb.ny || ga.domain != gb.domain {
        return Err(Error::GridMismatch);
    }
    let mut l_inf = 0.0f64;
    let mut sq = 0.0;
    let pairs = a
        .xi
        .values()
        .iter()
        .zip(b.xi.values())
        .chain(a.eta.values().iter().zip(b.eta.values()));
    let mut count = 0usize;
    for (u, v) in pairs {
        let d = (u - v).abs();
        l_inf = l_inf.max(d);
        sq += d * d;
        count += 1;
    }
    Ok(MeshDistance {
        l_inf,
        l_2: (sq / count as f64).sqrt(),
    })
}

/// Least-squares slope of `log(error)` against `log(N)`.
pub fn mc_rate(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&(n, e)| !n.is_finite() || !e.is_finite() || n <= 0.0 || e <= 0.0) {
        return Err(Error::DegenerateFit("sample sizes and errors must be positive".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("sample sizes must be distinct".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}
