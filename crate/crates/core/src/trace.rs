//! Sampled responses over a detuning grid and their CSV/JSON forms.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraceKind {
    ComplexTf,
    PowerRatio,
    Power,
}

impl TraceKind {
    fn column(self) -> &'static str {
        match self {
            TraceKind::ComplexTf => "tf",
            TraceKind::PowerRatio => "power_ratio",
            TraceKind::Power => "power",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl TraceValues {
    pub fn len(&self) -> usize {
        match self {
            TraceValues::Real(v) => v.len(),
            TraceValues::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Responses sampled on a strictly increasing detuning grid (MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    grid: Vec<f64>,
    values: TraceValues,
    kind: TraceKind,
}

impl FrequencyTrace {
    pub fn new(grid: Vec<f64>, values: TraceValues, kind: TraceKind) -> Result<Self> {
        validate_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::validation(
                "values",
                format!("{} values for {} grid points", values.len(), grid.len()),
            ));
        }
        if matches!(
            (&values, kind),
            (TraceValues::Complex(_), TraceKind::PowerRatio | TraceKind::Power)
                | (TraceValues::Real(_), TraceKind::ComplexTf)
        ) {
            return Err(Error::validation("kind", format!("{kind:?} does not match values")));
        }
        Ok(FrequencyTrace { grid, values, kind })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &TraceValues {
        &self.values
    }

    pub fn kind(&self) -> TraceKind {
        self.kind
    }

    /// Real values; `None` for complex traces.
    pub fn real(&self) -> Option<&[f64]> {
        match &self.values {
            TraceValues::Real(v) => Some(v),
            TraceValues::Complex(_) => None,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match &self.values {
            TraceValues::Real(v) => {
                w.write_record(["detuning_MHz", self.kind.column()])?;
                for (d, x) in self.grid.iter().zip(v) {
                    w.write_record([d.to_string(), x.to_string()])?;
                }
            }
            TraceValues::Complex(v) => {
                w.write_record(["detuning_MHz", "re", "im"])?;
                for (d, x) in self.grid.iter().zip(v) {
                    w.write_record([d.to_string(), x.re.to_string(), x.im.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::validation("grid", "empty"));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::validation("grid", format!("non-finite point {x}")));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::validation(
            "grid",
            format!("not strictly increasing at index {}", i + 1),
        ));
    }
    Ok(())
}

/// `points` evenly spaced values from `min` to `max` inclusive.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the check
pub fn linear_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::validation("grid_points", format!("{points} must be >= 2")));
    }
    if !(max > min) {
        return Err(Error::validation(
            "grid_max",
            format!("{max} must exceed grid_min {min}"),
        ));
    }
    let step = (max - min) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| min + step * i as f64).collect();
    grid[points - 1] = max;
    Ok(grid)
}

/// Symmetric grid over `[-edge, edge]`.
pub fn symmetric_grid(edge: f64, points: usize) -> Result<Vec<f64>> {
    let mut grid = linear_grid(-edge, edge, points)?;
    // exact mirror symmetry
    let n = grid.len();
    for i in 0..n / 2 {
        grid[n - 1 - i] = -grid[i];
    }
    if n % 2 == 1 {
        grid[n / 2] = 0.0;
    }
    Ok(grid)
}
