//! Run configuration for the verification suites.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_CONFIG_DEGREE: usize = 4;
pub const MAX_CONFIG_DIM: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// `(dim_even, dim_odd)` of the random triples, cycled over trials.
    pub dims: Vec<(usize, usize)>,
    pub max_degree: usize,
    pub trials: usize,
    pub tolerance: f64,
    pub mc_samples: u64,
    pub report_path: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            dims: vec![(1, 1), (2, 1), (1, 2), (2, 2)],
            max_degree: 2,
            trials: 5,
            tolerance: 1e-8,
            mc_samples: 100_000,
            report_path: "jlolab-report.json".into(),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree > MAX_CONFIG_DEGREE {
            return Err(Error::DegreeTooLarge {
                degree: self.max_degree,
                limit: MAX_CONFIG_DEGREE,
            });
        }
        if self.dims.is_empty() {
            return Err(Error::InvalidInput(
                "dims must list at least one graded dimension".into(),
            ));
        }
        if let Some(&(e, o)) = self.dims.iter().find(|&&(e, o)| e + o > MAX_CONFIG_DIM || e + o == 0) {
            return Err(Error::InvalidInput(format!(
                "graded dimension ({e}, {o}) must have total dimension in 1..={MAX_CONFIG_DIM}"
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.mc_samples < 2 {
            return Err(Error::InvalidInput("mc_samples must be at least 2".into()));
        }
        Ok(())
    }
}
