use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resonant power ratios at the positive- and negative-feedback phases for
/// one compensator gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricPoint {
    #[serde(rename = "eta_K")]
    pub eta_k: f64,
    pub ratio_max: f64,
    pub ratio_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricDataset {
    points: Vec<ParametricPoint>,
    /// Plant decay rate, measured independently and held fixed.
    gamma_p_fixed: f64,
}

impl ParametricDataset {
    pub fn new(points: Vec<ParametricPoint>, gamma_p_fixed: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::validation("points", "dataset is empty"));
        }
        if !(gamma_p_fixed > 0.0 && gamma_p_fixed.is_finite()) {
            return Err(Error::validation(
                "gamma_p",
                format!("{gamma_p_fixed} must be > 0"),
            ));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.eta_k >= 0.0 && p.eta_k.is_finite()) {
                return Err(Error::validation(
                    format!("points[{i}].eta_K"),
                    format!("{} must be >= 0", p.eta_k),
                ));
            }
            if !(p.ratio_min >= 0.0 && p.ratio_max.is_finite()) {
                return Err(Error::validation(
                    format!("points[{i}]"),
                    "ratios must be finite and nonnegative",
                ));
            }
            if p.ratio_min > p.ratio_max {
                return Err(Error::validation(
                    format!("points[{i}]"),
                    format!("ratio_min {} exceeds ratio_max {}", p.ratio_min, p.ratio_max),
                ));
            }
        }
        Ok(ParametricDataset {
            points,
            gamma_p_fixed,
        })
    }

    pub fn points(&self) -> &[ParametricPoint] {
        &self.points
    }

    pub fn gamma_p(&self) -> f64 {
        self.gamma_p_fixed
    }

    /// Reads `eta_K,ratio_max,ratio_min` rows.
    pub fn read_csv<R: Read>(reader: R, gamma_p_fixed: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let points = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ParametricPoint>, _>>()?;
        ParametricDataset::new(points, gamma_p_fixed)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
