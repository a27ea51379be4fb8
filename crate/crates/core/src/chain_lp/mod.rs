//! The storage charging linear program and its exact solver.
//!
//! The problem minimizes `sum(c_i * x_i)` subject to per-step charge caps
//! `0 <= x_i <= u_i` and decay-cumulative bounds
//! `a_i <= sum_{j<=i} q^{i-j} x_j <= b_i`, where `q` in (0, 1] is the
//! hourly energy retention factor of the storage unit.

mod pwl;
mod reference;
mod solve;

pub use reference::solve_reference;
pub use solve::{solve_chain, solve_chain_with_costs};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One instance of the chain-constrained storage LP.
///
/// Vectors are indexed by hour, `costs` in EUR/kWh, bounds and caps in kWh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainLpInstance {
    /// Acquisition costs per step (may be negative).
    pub costs: Vec<f64>,
    /// Lower bounds on the cumulative discounted level.
    pub lower: Vec<f64>,
    /// Upper bounds on the cumulative discounted level.
    pub upper: Vec<f64>,
    /// Per-step charge caps.
    pub charge_cap: Vec<f64>,
    /// Hourly retention factor, in (0, 1].
    pub retention: f64,
}

impl ChainLpInstance {
    pub fn new(
        costs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        charge_cap: Vec<f64>,
        retention: f64,
    ) -> Result<Self> {
        let inst = ChainLpInstance {
            costs,
            lower,
            upper,
            charge_cap,
            retention,
        };
        inst.validate_structure()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    /// Same instance with the cost vector replaced (scenario evaluation).
    pub fn with_costs(&self, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != self.len() {
            return Err(Error::LengthMismatch(format!(
                "costs has {} entries, instance has {} steps",
                costs.len(),
                self.len()
            )));
        }
        let mut inst = self.clone();
        inst.costs = costs;
        Ok(inst)
    }

    /// Structural validity: matching lengths, finite entries, `q` in (0, 1],
    /// non-negative caps. Does not decide feasibility.
    pub fn validate_structure(&self) -> Result<()> {
        let n = self.costs.len();
        if n == 0 {
            return Err(Error::InvalidInstance("instance has zero steps".into()));
        }
        if self.lower.len() != n || self.upper.len() != n || self.charge_cap.len() != n {
            return Err(Error::InvalidInstance(format!(
                "length mismatch: costs {}, lower {}, upper {}, charge_cap {}",
                n,
                self.lower.len(),
                self.upper.len(),
                self.charge_cap.len()
            )));
        }
        if !(self.retention > 0.0 && self.retention <= 1.0) {
            return Err(Error::InvalidInstance(format!(
                "retention factor must lie in (0, 1], got {}",
                self.retention
            )));
        }
        for i in 0..n {
            if !self.costs[i].is_finite()
                || !self.lower[i].is_finite()
                || !self.upper[i].is_finite()
                || !self.charge_cap[i].is_finite()
            {
                return Err(Error::InvalidInstance(format!(
                    "non-finite entry at step {}",
                    i + 1
                )));
            }
            if self.charge_cap[i] < 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "negative charge cap at step {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// A feasible charging vector together with its cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargeSchedule {
    /// Energy purchased per step, kWh.
    pub x: Vec<f64>,
    /// `sum(costs[i] * x[i])`, EUR.
    pub objective: f64,
}

/// Outcome of [`check_feasible`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// First step (1-based) at which an envelope is violated.
    pub violated_index: Option<usize>,
}

/// Decides feasibility by the two level envelopes. The greedy maximum level
/// `y^_i = min(b_i, q y^_{i-1} + u_i)` must reach every lower bound, and the
/// forced minimum level `y~_i = max(a_i, q y~_{i-1})` must stay under every
/// upper bound; together these are necessary and sufficient.
pub fn check_feasible(instance: &ChainLpInstance) -> Result<FeasibilityReport> {
    instance.validate_structure()?;
    let q = instance.retention;
    let mut y_max = 0.0f64;
    let mut y_min = 0.0f64;
    for i in 0..instance.len() {
        y_max = instance.upper[i].min(q * y_max + instance.charge_cap[i]);
        y_min = instance.lower[i].max(q * y_min);
        if y_max < instance.lower[i] || y_min > instance.upper[i] {
            return Ok(FeasibilityReport {
                feasible: false,
                violated_index: Some(i + 1),
            });
        }
    }
    Ok(FeasibilityReport {
        feasible: true,
        violated_index: None,
    })
}

/// Reachable interval of the cumulative level after each step, i.e. the
/// envelopes of [`check_feasible`]. Only meaningful for feasible instances.
pub(crate) fn reachable_levels(instance: &ChainLpInstance) -> Vec<(f64, f64)> {
    let q = instance.retention;
    let mut out = Vec::with_capacity(instance.len());
    let mut y_max = 0.0f64;
    let mut y_min = 0.0f64;
    for i in 0..instance.len() {
        y_max = instance.upper[i].min(q * y_max + instance.charge_cap[i]);
        y_min = instance.lower[i].max(q * y_min);
        out.push((y_min, y_max));
    }
    out
}

/// `sum(costs[i] * x[i])` in fixed index order.
pub fn objective(instance: &ChainLpInstance, x: &[f64]) -> Result<f64> {
    if x.len() != instance.len() {
        return Err(Error::LengthMismatch(format!(
            "schedule has {} entries, instance has {} steps",
            x.len(),
            instance.len()
        )));
    }
    Ok(instance.costs.iter().zip(x).map(|(c, xi)| c * xi).sum())
}

/// Cumulative discounted level trajectory `y_i = q y_{i-1} + x_i`.
/// The schedule is feasible iff `a_i <= y_i <= b_i` for all `i`.
pub fn level_trajectory(instance: &ChainLpInstance, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != instance.len() {
        return Err(Error::LengthMismatch(format!(
            "schedule has {} entries, instance has {} steps",
            x.len(),
            instance.len()
        )));
    }
    let q = instance.retention;
    let mut y = Vec::with_capacity(x.len());
    let mut level = 0.0;
    for &xi in x {
        level = q * level + xi;
        y.push(level);
    }
    Ok(y)
}

/// Checks the schedule invariants: `0 <= x_i <= u_i` and
/// `a_i - eps <= y_i <= b_i + eps` with `eps = 1e-9 * max(1, bound)`.
pub fn validate_schedule(instance: &ChainLpInstance, x: &[f64]) -> Result<()> {
    let y = level_trajectory(instance, x)?;
    for i in 0..x.len() {
        let eps_x = 1e-9 * instance.charge_cap[i].abs().max(1.0);
        if x[i] < -eps_x || x[i] > instance.charge_cap[i] + eps_x {
            return Err(Error::InternalConsistency {
                index: i + 1,
                detail: format!(
                    "charge {} outside [0, {}]",
                    x[i], instance.charge_cap[i]
                ),
            });
        }
        let eps_lo = 1e-9 * instance.lower[i].abs().max(1.0);
        let eps_hi = 1e-9 * instance.upper[i].abs().max(1.0);
        if y[i] < instance.lower[i] - eps_lo || y[i] > instance.upper[i] + eps_hi {
            return Err(Error::InternalConsistency {
                index: i + 1,
                detail: format!(
                    "level {} outside [{}, {}]",
                    y[i], instance.lower[i], instance.upper[i]
                ),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(
        costs: &[f64],
        lower: &[f64],
        upper: &[f64],
        cap: &[f64],
        q: f64,
    ) -> ChainLpInstance {
        ChainLpInstance::new(
            costs.to_vec(),
            lower.to_vec(),
            upper.to_vec(),
            cap.to_vec(),
            q,
        )
        .unwrap()
    }

    #[test]
    fn feasible_single_step() {
        let i = inst(&[1.0], &[2.0], &[10.0], &[5.0], 1.0);
        let r = check_feasible(&i).unwrap();
        assert!(r.feasible);
        assert_eq!(r.violated_index, None);
    }

    #[test]
    fn infeasible_cap_below_lower_bound() {
        let i = inst(&[1.0], &[6.0], &[10.0], &[5.0], 1.0);
        let r = check_feasible(&i).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.violated_index, Some(1));
    }

    #[test]
    fn infeasible_by_decay() {
        // y^_1 = min(10, 1) = 1, y^_2 = min(10, 0.5 * 1 + 0) = 0.5 < a_2 = 1.
        let i = inst(&[1.0, 1.0], &[0.0, 1.0], &[10.0, 10.0], &[1.0, 0.0], 0.5);
        let r = check_feasible(&i).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.violated_index, Some(2));
    }

    #[test]
    fn structural_errors_are_not_infeasibility() {
        let bad_q = ChainLpInstance::new(vec![1.0], vec![0.0], vec![1.0], vec![1.0], 0.0);
        assert!(matches!(bad_q, Err(Error::InvalidInstance(_))));
        let bad_len = ChainLpInstance::new(vec![1.0, 2.0], vec![0.0], vec![1.0], vec![1.0], 1.0);
        assert!(matches!(bad_len, Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn zero_schedule_evaluations() {
        let i = inst(&[1.0, 2.0], &[0.0, 0.0], &[5.0, 5.0], &[3.0, 3.0], 0.9);
        let x = vec![0.0, 0.0];
        assert_eq!(objective(&i, &x).unwrap(), 0.0);
        assert_eq!(level_trajectory(&i, &x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn full_cap_schedule_with_unit_costs() {
        let i = inst(&[1.0, 1.0, 1.0], &[0.0; 3], &[100.0; 3], &[2.0, 3.0, 4.0], 1.0);
        let x = vec![2.0, 3.0, 4.0];
        assert_eq!(objective(&i, &x).unwrap(), 9.0);
        assert_eq!(level_trajectory(&i, &x).unwrap(), vec![2.0, 5.0, 9.0]);
    }

    #[test]
    fn objective_matches_reversed_summation() {
        let mut rng = crate::rng::derive_rng(7, crate::rng::Domain::Test, 0, 0);
        use rand::Rng;
        for _ in 0..50 {
            let n = rng.random_range(1..20);
            let costs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
            let i = inst(&costs, &vec![0.0; n], &vec![1e9; n], &vec![10.0; n], 1.0);
            let forward = objective(&i, &x).unwrap();
            let reversed: f64 = costs.iter().zip(&x).rev().map(|(c, xi)| c * xi).sum();
            let scale = forward.abs().max(1.0);
            assert!((forward - reversed).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn length_mismatch_is_reported() {
        let i = inst(&[1.0], &[0.0], &[1.0], &[1.0], 1.0);
        assert!(matches!(
            objective(&i, &[1.0, 2.0]),
            Err(Error::LengthMismatch(_))
        ));
        assert!(matches!(
            level_trajectory(&i, &[]),
            Err(Error::LengthMismatch(_))
        ));
    }
}
