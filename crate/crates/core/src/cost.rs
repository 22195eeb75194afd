//! Asymptotic cost model comparing the quantum algorithm with its
//! sampling-based dequantized counterpart.
//!
//! Logarithmic factors are floored at 1 so that constant-valued arguments
//! such as `δ_fail = 1` leave the polynomial part intact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of the rank in the quantum cost.
pub const QUANTUM_RANK_EXPONENT: i32 = 3;
/// Exponent of the rank in the dequantized cost.
pub const DEQUANTIZED_RANK_EXPONENT: i32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub m: usize,
    pub p: usize,
    /// Rank; real-valued so that fractional growth laws such as `m^{1/6}`
    /// can be evaluated exactly.
    pub q: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub delta_fail: f64,
}

impl CostModelParams {
    pub fn new(m: usize, p: usize, q: f64, epsilon: f64) -> Self {
        Self {
            m,
            p,
            q,
            epsilon,
            eta: 1.0,
            delta_fail: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.p == 0 {
            return Err(Error::Parameter(format!("m and p must be positive, got m={} p={}", self.m, self.p)));
        }
        if !(self.q >= 1.0 && self.q <= self.m as f64) {
            return Err(Error::Parameter(format!("rank {} outside [1, {}]", self.q, self.m)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Parameter(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Parameter(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.delta_fail > 0.0 && self.delta_fail <= 1.0) {
            return Err(Error::Parameter(format!("delta_fail {} outside (0, 1]", self.delta_fail)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FullRank,
    ConstantRank,
    SlowGrowth,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::FullRank => "full_rank",
            Regime::ConstantRank => "constant_rank",
            Regime::SlowGrowth => "slow_growth",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub quantum_cost: f64,
    pub dequantized_cost: f64,
    pub regime: Regime,
    /// `q³`.
    pub quantum_rank_factor: f64,
    /// `q⁹`.
    pub dequantized_rank_factor: f64,
}

fn floored_log2(x: f64) -> f64 {
    x.log2().max(1.0)
}

pub fn cost_model(params: &CostModelParams) -> Result<CostEstimate> {
    params.validate()?;
    let CostModelParams {
        m,
        p,
        q,
        epsilon,
        eta,
        delta_fail,
    } = *params;
    let quantum_rank_factor = q.powi(QUANTUM_RANK_EXPONENT);
    let dequantized_rank_factor = q.powi(DEQUANTIZED_RANK_EXPONENT);
    let quantum_cost = quantum_rank_factor * epsilon.powi(-3) * floored_log2((m * p) as f64);
    let dequantized_cost =
        dequantized_rank_factor * epsilon.powi(-6) * eta.powi(6) * floored_log2(1.0 / delta_fail).powi(3);
    let regime = if q == m as f64 {
        Regime::FullRank
    } else if q == 1.0 {
        Regime::ConstantRank
    } else {
        Regime::SlowGrowth
    };
    Ok(CostEstimate {
        quantum_cost,
        dequantized_cost,
        regime,
        quantum_rank_factor,
        dequantized_rank_factor,
    })
}

/// Exponent `e` with `y ∝ xᵉ` between two points.
pub fn growth_exponent(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    (y1 / y0).ln() / (x1 / x0).ln()
}
