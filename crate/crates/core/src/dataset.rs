use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the run drives the objective down or up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptMode {
    Minimize,
    Maximize,
}

impl OptMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "minimize" | "min" => Ok(OptMode::Minimize),
            "maximize" | "max" => Ok(OptMode::Maximize),
            other => Err(Error::config(format!("unknown mode '{other}'"))),
        }
    }

    /// True when `candidate` beats `incumbent` under this mode.
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            OptMode::Minimize => candidate < incumbent,
            OptMode::Maximize => candidate > incumbent,
        }
    }
}

/// Observed inputs and outputs with a running incumbent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    mode: OptMode,
    incumbent: Option<usize>,
}

impl Dataset {
    pub fn new(dim: usize, mode: OptMode) -> Self {
        let _ = dim;
        Dataset {
            inputs: Vec::new(),
            outputs: Vec::new(),
            mode,
            incumbent: None,
        }
    }

    pub fn from_rows(inputs: &DMatrix<f64>, outputs: &DVector<f64>, mode: OptMode) -> Result<Self> {
        if inputs.nrows() != outputs.len() {
            return Err(Error::input("inputs and outputs must have equal row counts"));
        }
        let mut data = Dataset::new(inputs.ncols(), mode);
        for i in 0..inputs.nrows() {
            data.append(inputs.row(i).iter().copied().collect(), outputs[i])?;
        }
        Ok(data)
    }

    pub fn append(&mut self, z: Vec<f64>, y: f64) -> Result<()> {
        if z.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(Error::input("observations must be finite"));
        }
        if let Some(first) = self.inputs.first() {
            if first.len() != z.len() {
                return Err(Error::input("observation dimension changed mid-run"));
            }
        }
        self.inputs.push(z);
        self.outputs.push(y);
        let idx = self.outputs.len() - 1;
        match self.incumbent {
            None => self.incumbent = Some(idx),
            Some(best) if self.mode.improves(y, self.outputs[best]) => {
                self.incumbent = Some(idx)
            }
            _ => {}
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn mode(&self) -> OptMode {
        self.mode
    }

    pub fn inputs_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let d = self.dim();
        DMatrix::from_fn(n, d, |i, j| self.inputs[i][j])
    }

    pub fn outputs_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.outputs.clone())
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    pub fn output(&self, i: usize) -> f64 {
        self.outputs[i]
    }

    pub fn incumbent_index(&self) -> Option<usize> {
        self.incumbent
    }

    pub fn incumbent_value(&self) -> Option<f64> {
        self.incumbent.map(|i| self.outputs[i])
    }

    pub fn output_mean(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.outputs.iter().sum::<f64>() / self.len() as f64
        }
    }

    pub fn output_variance(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let m = self.output_mean();
        self.outputs.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / self.len() as f64
    }
}
