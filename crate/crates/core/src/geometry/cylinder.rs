use std::sync::Arc;

use crate::error::{invalid, Result};

use super::torus::EigenBasis;

/// Product cylinder `I × M₀` with the metric `dx₁² + g₀` and a uniform x₁ grid.
#[derive(Debug, Clone)]
pub struct ProductCylinder {
    interval: (f64, f64),
    base: Arc<EigenBasis>,
    n1: usize,
}

impl ProductCylinder {
    pub fn new(interval: (f64, f64), base: Arc<EigenBasis>, n1: usize) -> Result<Self> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(invalid("cylinder interval must have positive length"));
        }
        if n1 < 5 {
            return Err(invalid("x1 grid needs at least 5 points"));
        }
        Ok(Self { interval, base, n1 })
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }
    pub fn length(&self) -> f64 {
        self.interval.1 - self.interval.0
    }
    pub fn base(&self) -> &EigenBasis {
        &self.base
    }
    pub fn base_arc(&self) -> Arc<EigenBasis> {
        self.base.clone()
    }
    /// Dimension `n = 1 + dim M₀`.
    pub fn dim(&self) -> usize {
        1 + self.base.dim()
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn h1(&self) -> f64 {
        self.length() / (self.n1 - 1) as f64
    }
    pub fn x1(&self, i: usize) -> f64 {
        self.interval.0 + i as f64 * self.h1()
    }
    pub fn x1_grid(&self) -> Vec<f64> {
        (0..self.n1).map(|i| self.x1(i)).collect()
    }
    /// Trapezoid weights along x₁.
    pub fn x1_weights(&self) -> Vec<f64> {
        crate::quad::trapezoid_weights(self.n1, self.h1())
    }
}
