//! Latitude grid on `[0, 1]` with trapezoid weights.

use serde::{Deserialize, Serialize};

use crate::error::{EbmError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatitudeGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LatitudeGrid {
    /// Uniform grid with `n` nodes (`n >= 2`), first node 0 and last node 1.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(EbmError::Config(format!("latitude grid needs at least 2 nodes, got {n}")));
        }
        let h = 1.0 / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { 1.0 } else { i as f64 * h })
            .collect();
        Ok(Self::from_nodes_unchecked(nodes))
    }

    /// Grid from arbitrary strictly increasing nodes spanning `[0, 1]`.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(EbmError::Config("latitude nodes must start at 0 and end at 1".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EbmError::Config("latitude nodes must be strictly increasing".into()));
        }
        Ok(Self::from_nodes_unchecked(nodes))
    }

    fn from_nodes_unchecked(nodes: Vec<f64>) -> Self {
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let half = 0.5 * (nodes[i + 1] - nodes[i]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trapezoid approximation of `∫₀¹ v(x) dx` for nodal values `v`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Piecewise-linear interpolation of nodal values at `x`, clamped to `[0, 1]`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let n = self.nodes.len();
        // index of the cell containing x
        let i = match self.nodes.partition_point(|&node| node <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let t = (x - x0) / (x1 - x0);
        values[i] + t * (values[i + 1] - values[i])
    }
}
