//! Per-object weights guiding the planners.
//!
//! HeCP scores each object by the estimated probability that it collides with
//! an average-sized disc dropped uniformly in the workspace; objects that are
//! hard to park somewhere score high. HeTI is the manipulation cost of an
//! object, falling back from an explicit impedance to mass to footprint area.

use std::f64::consts::PI;
use std::ops::Index;

use crate::error::{Error, Result};
use crate::geometry::{Footprint, Workspace};

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectCharacteristics {
    pub footprint: Footprint,
    pub mass: Option<f64>,
    /// Explicit manipulation cost; overrides mass and area for HeTI.
    pub impedance: Option<f64>,
}

impl ObjectCharacteristics {
    pub fn new(footprint: Footprint) -> Self {
        ObjectCharacteristics {
            footprint,
            mass: None,
            impedance: None,
        }
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = Some(mass);
        self
    }

    pub fn with_impedance(mut self, impedance: f64) -> Self {
        self.impedance = Some(impedance);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("mass", self.mass), ("impedance", self.impedance)] {
            if let Some(v) = value {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!("{name} must be nonnegative, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// HeTI weight: impedance, else mass, else footprint area.
    pub fn task_impedance(&self) -> f64 {
        self.impedance
            .or(self.mass)
            .unwrap_or_else(|| self.footprint.area())
    }
}

/// Nonnegative per-object weights, indexed like the object list.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::Domain(format!("weights must be nonnegative, got {w}")));
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// HeCP weights: `w_i = (s_i + s̄ + r̄ c_i) / ((H - 2r̄)(W - 2r̄))` where `s̄`
/// is the mean object area and `r̄` the radius of a disc of that area.
pub fn hecp_weights(chars: &[ObjectCharacteristics], ws: &Workspace) -> Result<WeightVector> {
    if chars.is_empty() {
        return Ok(WeightVector(Vec::new()));
    }
    let mean_area = chars.iter().map(|c| c.footprint.area()).sum::<f64>() / chars.len() as f64;
    let mean_radius = (mean_area / PI).sqrt();
    let free = (ws.height - 2.0 * mean_radius) * (ws.width - 2.0 * mean_radius);
    if 2.0 * mean_radius >= ws.width.min(ws.height) {
        return Err(Error::Domain(format!(
            "average object disc (radius {mean_radius}) does not fit in the workspace"
        )));
    }
    let weights = chars
        .iter()
        .map(|c| (c.footprint.area() + mean_area + mean_radius * c.footprint.perimeter()) / free)
        .collect();
    Ok(WeightVector(weights))
}

/// HeTI weights, see [`ObjectCharacteristics::task_impedance`].
pub fn heti_weights(chars: &[ObjectCharacteristics]) -> WeightVector {
    WeightVector(chars.iter().map(|c| c.task_impedance()).collect())
}
