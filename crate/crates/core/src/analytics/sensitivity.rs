//! Elasticity of the detection rate with respect to a hyperparameter, and
//! the spread of detection rates across a sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `S = dD/dθ · θ̄/D̄`, with the derivative taken as a central difference
/// around the middle of the θ-sorted grid. Odd grids difference the
/// neighbours of the middle point; even grids difference the two middle
/// points and evaluate at their mean.
pub fn sensitivity_index(thetas: &[f64], rates: &[f64]) -> Result<f64> {
    if thetas.len() != rates.len() {
        return Err(Error::Usage(format!(
            "{} theta values but {} detection rates",
            thetas.len(),
            rates.len()
        )));
    }
    if thetas.len() < 2 {
        return Err(Error::Usage("sensitivity index needs at least two points".into()));
    }
    if thetas.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Usage("theta values must be positive".into()));
    }
    if rates.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::Usage("detection rates must be positive".into()));
    }
    let mut points: Vec<(f64, f64)> = thetas.iter().copied().zip(rates.iter().copied()).collect();
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    if points.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Usage("theta values must be distinct".into()));
    }
    let n = points.len();
    let mid = n / 2;
    let (lo, hi, theta, rate) = if n % 2 == 1 {
        (points[mid - 1], points[mid + 1], points[mid].0, points[mid].1)
    } else {
        let (a, b) = (points[mid - 1], points[mid]);
        (a, b, (a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)
    };
    let slope = (hi.1 - lo.1) / (hi.0 - lo.0);
    Ok(slope * theta / rate)
}

/// Population standard deviation of detection rates.
pub fn stability_sigma(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::Empty("detection rates"));
    }
    // shifted by the first value, which keeps constant inputs exactly zero
    let n = rates.len() as f64;
    let shift = rates[0];
    let mean = rates.iter().map(|r| r - shift).sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - shift - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// `n` evenly spaced values from `lo` to `hi` inclusive; `n >= 2`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(Error::Usage(format!(
            "a sweep axis needs at least two distinct points, got {n} over [{lo}, {hi}]"
        )));
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub temperature: f64,
    pub curiosity_weight: f64,
    pub detection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub temperatures: Vec<f64>,
    pub curiosity_weights: Vec<f64>,
    pub cells: Vec<SweepCell>,
    /// Elasticity along each axis of the detection rate averaged over the
    /// other axis; `None` when a marginal rate is zero.
    pub s_temperature: Option<f64>,
    pub s_curiosity: Option<f64>,
    pub sigma_d: f64,
}

impl SweepReport {
    pub fn from_cells(
        temperatures: Vec<f64>,
        curiosity_weights: Vec<f64>,
        cells: Vec<SweepCell>,
    ) -> Result<Self> {
        if cells.len() != temperatures.len() * curiosity_weights.len() {
            return Err(Error::Usage("sweep cells do not fill the grid".into()));
        }
        let marginal = |axis: &[f64], pick: fn(&SweepCell) -> f64| -> Vec<f64> {
            axis.iter()
                .map(|v| {
                    let hits: Vec<f64> = cells
                        .iter()
                        .filter(|c| pick(c) == *v)
                        .map(|c| c.detection_rate)
                        .collect();
                    hits.iter().sum::<f64>() / hits.len().max(1) as f64
                })
                .collect()
        };
        let d_t = marginal(&temperatures, |c| c.temperature);
        let d_w = marginal(&curiosity_weights, |c| c.curiosity_weight);
        let rates: Vec<f64> = cells.iter().map(|c| c.detection_rate).collect();
        Ok(Self {
            s_temperature: sensitivity_index(&temperatures, &d_t).ok(),
            s_curiosity: sensitivity_index(&curiosity_weights, &d_w).ok(),
            sigma_d: stability_sigma(&rates)?,
            temperatures,
            curiosity_weights,
            cells,
        })
    }
}

/// Evaluates `detection(temperature, curiosity_weight)` on every grid cell,
/// in parallel, and summarizes the surface.
pub fn sweep<F>(temperatures: &[f64], curiosity_weights: &[f64], detection: F) -> Result<SweepReport>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if temperatures.len() < 2 || curiosity_weights.len() < 2 {
        return Err(Error::Usage("sensitivity sweeps need at least two points per axis".into()));
    }
    let grid: Vec<(f64, f64)> = temperatures
        .iter()
        .flat_map(|&t| curiosity_weights.iter().map(move |&w| (t, w)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(t, w)| {
            Ok(SweepCell {
                temperature: t,
                curiosity_weight: w,
                detection_rate: detection(t, w)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SweepReport::from_cells(temperatures.to_vec(), curiosity_weights.to_vec(), cells)
}
