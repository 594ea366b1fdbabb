use crate::error::{Error, Result};

/// Sentinel cost marking a forbidden change direction.
pub const WET_COST: f64 = 1e10;

/// Per-coefficient costs of a +1 change (`plus`) and a −1 change (`minus`).
#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    width: usize,
    height: usize,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl CostMap {
    pub fn new(width: usize, height: usize, plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if plus.len() != n || minus.len() != n {
            return Err(Error::InvalidArgument(format!(
                "cost planes of {} and {} values for a {width}x{height} grid",
                plus.len(),
                minus.len()
            )));
        }
        if let Some(v) = plus
            .iter()
            .chain(minus.iter())
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidArgument(format!("cost {v} is not a finite non-negative value")));
        }
        Ok(Self {
            width,
            height,
            plus,
            minus,
        })
    }

    pub fn symmetric(width: usize, height: usize, rho: Vec<f64>) -> Result<Self> {
        Self::new(width, height, rho.clone(), rho)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    pub fn plus(&self) -> &[f64] {
        &self.plus
    }

    pub fn minus(&self) -> &[f64] {
        &self.minus
    }

    pub fn is_wet_plus(&self, i: usize) -> bool {
        self.plus[i] >= WET_COST
    }

    pub fn is_wet_minus(&self, i: usize) -> bool {
        self.minus[i] >= WET_COST
    }

    /// A position is wet when either direction is forbidden.
    pub fn is_wet(&self, i: usize) -> bool {
        self.is_wet_plus(i) || self.is_wet_minus(i)
    }

    /// Adds `(dp, dm)` at `i`; a wet direction stays at exactly [`WET_COST`].
    pub fn add(&mut self, i: usize, dp: f64, dm: f64) {
        if !self.is_wet_plus(i) {
            self.plus[i] += dp;
        }
        if !self.is_wet_minus(i) {
            self.minus[i] += dm;
        }
    }

    /// Largest |ρ⁺ − ρ⁻| over all positions.
    pub fn max_asymmetry(&self) -> f64 {
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(p, m)| (p - m).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, k: f64) -> Self {
        let s = |v: &f64| if *v >= WET_COST { *v } else { v * k };
        Self {
            width: self.width,
            height: self.height,
            plus: self.plus.iter().map(s).collect(),
            minus: self.minus.iter().map(s).collect(),
        }
    }
}
