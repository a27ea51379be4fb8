//! Receding-horizon controllers: the sliding-window statistical-measure
//! method, the scenario min-max comparator, and the two analytic baselines
//! (perfect foresight and no storage).
//!
//! Both controllers loop over steps `k = 1..n`, solve the next `r` hours
//! against `m` perturbed price scenarios, commit only the first component
//! of the decision, and advance the carried storage state by one hour.

mod minmax;

pub use minmax::{minmax_first_step, minmax_reference, MinMaxOutcome};

use crate::chain_lp::{
    check_feasible, level_trajectory, solve_chain, solve_chain_with_costs, validate_schedule,
    ChainLpInstance, ChargeSchedule,
};
use crate::error::{Error, Result};
use crate::ou::{simulate_ou_stream, OuParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Statistical measure applied to the scenario-optimal first steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Measure {
    /// 50% breakdown point; the default.
    Median,
    Mean,
    /// Order-statistic quantile with linear interpolation, `p` in (0, 1).
    Quantile(f64),
}

impl Measure {
    pub fn validate(&self) -> Result<()> {
        if let Measure::Quantile(p) = self {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "quantile probability must lie in (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }

    /// Aggregates the samples. The median of an even-sized sample is the
    /// mean of the two middle order statistics.
    pub fn apply(&self, samples: &[f64]) -> f64 {
        debug_assert!(!samples.is_empty());
        match self {
            Measure::Mean => samples.iter().sum::<f64>() / samples.len() as f64,
            Measure::Median => {
                let mut s = samples.to_vec();
                s.sort_by(f64::total_cmp);
                let l = s.len();
                if l % 2 == 1 {
                    s[l / 2]
                } else {
                    0.5 * (s[l / 2 - 1] + s[l / 2])
                }
            }
            Measure::Quantile(p) => {
                let mut s = samples.to_vec();
                s.sort_by(f64::total_cmp);
                let h = p * (s.len() - 1) as f64;
                let lo = h.floor() as usize;
                let hi = h.ceil() as usize;
                if lo == hi {
                    s[lo]
                } else {
                    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
                }
            }
        }
    }
}

/// Sliding-window controller parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Forecast window `r` in hours; five days by default.
    pub window_hours: usize,
    /// Scenario portfolio size `m`.
    pub scenario_count: usize,
    pub measure: Measure,
    /// Scale of the simulated perturbation added to the price signal.
    pub delta: f64,
    pub master_seed: u64,
    /// Relative duality-gap target of the min-max subsolver.
    pub minmax_gap_tol: f64,
    /// Iteration cap of the min-max subsolver.
    pub minmax_max_iters: usize,
}

impl ControllerConfig {
    pub fn new(master_seed: u64) -> Self {
        ControllerConfig {
            window_hours: 120,
            scenario_count: 1000,
            measure: Measure::Median,
            delta: 1.0,
            master_seed,
            minmax_gap_tol: 1e-4,
            minmax_max_iters: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_hours < 1 {
            return Err(Error::InvalidInput("window must be at least 1 hour".into()));
        }
        if self.scenario_count < 1 {
            return Err(Error::InvalidInput("scenario count must be >= 1".into()));
        }
        if self.delta < 0.0 {
            return Err(Error::InvalidInput("delta must be non-negative".into()));
        }
        if !(self.minmax_gap_tol > 0.0) {
            return Err(Error::InvalidInput("gap tolerance must be positive".into()));
        }
        self.measure.validate()
    }
}

/// Supplies the scenario cost vector for window `k`, scenario `j`.
/// Implementations must be deterministic in `(k, j)` so that rollouts are
/// reproducible under parallel evaluation.
pub trait ScenarioSource: Sync {
    fn scenario_count(&self) -> usize;
    fn window_costs(&self, window: usize, scenario: usize, base: &[f64]) -> Vec<f64>;
}

/// Perturbs the base prices with delta-scaled mean-reverting noise drawn
/// from the stream keyed by `(master_seed, window, scenario)`.
#[derive(Debug, Clone)]
pub struct OuScenarioSource {
    params: OuParams,
    delta: f64,
    scenario_count: usize,
    master_seed: u64,
}

impl OuScenarioSource {
    pub fn new(params: OuParams, delta: f64, scenario_count: usize, master_seed: u64) -> Result<Self> {
        params.validate()?;
        if delta < 0.0 {
            return Err(Error::InvalidInput("delta must be non-negative".into()));
        }
        if scenario_count == 0 {
            return Err(Error::InvalidInput("scenario count must be >= 1".into()));
        }
        Ok(OuScenarioSource {
            params,
            delta,
            scenario_count,
            master_seed,
        })
    }

    pub fn from_config(params: OuParams, config: &ControllerConfig) -> Result<Self> {
        Self::new(params, config.delta, config.scenario_count, config.master_seed)
    }
}

impl ScenarioSource for OuScenarioSource {
    fn scenario_count(&self) -> usize {
        self.scenario_count
    }

    fn window_costs(&self, window: usize, scenario: usize, base: &[f64]) -> Vec<f64> {
        let path = simulate_ou_stream(
            &self.params,
            base.len(),
            self.master_seed,
            window as u64,
            scenario as u64,
        )
        .expect("parameters validated at construction");
        base.iter()
            .zip(&path.values)
            .map(|(b, e)| b + self.delta * e)
            .collect()
    }
}

/// Outcome of one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    /// Committed first steps, one per hour of the real horizon.
    pub schedule: Vec<f64>,
    /// `sum(realized_price[i] * schedule[i])`, EUR.
    pub realized_cost: f64,
    /// Storage level above the forced minimum at the end of the horizon, kWh.
    pub final_level: f64,
    /// `final_level * mean(realized prices)`, reported separately and never
    /// netted against the realized cost.
    pub surplus_value: f64,
    pub steps: Vec<StepDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostic {
    /// Committed charge, kWh.
    pub chosen: f64,
    /// Spread (max - min) of the scenario-optimal first steps.
    pub scenario_spread: f64,
    /// Relative duality gap of the min-max subsolver, when applicable.
    pub duality_gap: Option<f64>,
}

/// The full system continued past the real horizon so every window has
/// length `r`. Prices, charge caps and storage capacity continue 24 h
/// periodically; demand stops at the horizon, so the continuation carries
/// no new obligations (`a` decays, `b` stays capacity above it).
pub(crate) struct ExtendedSystem {
    pub base_costs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cap: Vec<f64>,
    pub q: f64,
    pub n: usize,
    pub r: usize,
}

impl ExtendedSystem {
    pub fn build(instance: &ChainLpInstance, realized_prices: &[f64], r: usize) -> Result<Self> {
        let n = instance.len();
        if realized_prices.len() != n {
            return Err(Error::LengthMismatch(format!(
                "realized prices has {} entries, instance has {} steps",
                realized_prices.len(),
                n
            )));
        }
        if r < 1 {
            return Err(Error::InvalidInput("window must be at least 1 hour".into()));
        }
        let q = instance.retention;
        let period = n.min(24);
        let total = n + r;
        let mut base_costs = realized_prices.to_vec();
        let mut lower = instance.lower.clone();
        let mut upper = instance.upper.clone();
        let mut cap = instance.charge_cap.clone();
        base_costs.reserve(r);
        lower.reserve(r);
        upper.reserve(r);
        cap.reserve(r);
        for e in n..total {
            let src = e - period;
            base_costs.push(base_costs[src]);
            cap.push(cap[src]);
            let capacity = upper[src] - lower[src];
            let a = q * lower[e - 1];
            lower.push(a);
            upper.push(a + capacity);
        }
        Ok(ExtendedSystem {
            base_costs,
            lower,
            upper,
            cap,
            q,
            n,
            r,
        })
    }

    /// Window subinstance for steps `start .. start + r` (0-based) with a
    /// carried cumulative level. Residual bounds subtract the decayed
    /// carried level; costs are the extended base prices.
    pub fn window_instance(&self, start: usize, carried: f64) -> Result<ChainLpInstance> {
        let r = self.r;
        let q = self.q;
        let mut costs = Vec::with_capacity(r);
        let mut lower = Vec::with_capacity(r);
        let mut upper = Vec::with_capacity(r);
        let mut cap = Vec::with_capacity(r);
        let mut qt = 1.0;
        for t in 0..r {
            let g = start + t;
            qt *= q;
            let carried_here = qt * carried;
            let hi = self.upper[g] - carried_here;
            if hi < -1e-9 * self.upper[g].abs().max(1.0) {
                return Err(Error::StateCorruption {
                    index: start + 1,
                    detail: format!(
                        "carried level {carried} exceeds capacity bound {} at window offset {t}",
                        self.upper[g]
                    ),
                });
            }
            let lo = (self.lower[g] - carried_here).max(0.0);
            costs.push(self.base_costs[g]);
            lower.push(lo);
            upper.push(hi.max(lo));
            cap.push(self.cap[g]);
        }
        ChainLpInstance::new(costs, lower, upper, cap, q)
    }
}

/// Window subinstance of the full problem: steps `start .. start + window`
/// of the periodically extended horizon, with bounds shifted by the decayed
/// carried level and costs taken from the full instance's cost vector.
pub fn build_window_subinstance(
    full: &ChainLpInstance,
    start: usize,
    window: usize,
    carried_level: f64,
) -> Result<ChainLpInstance> {
    if start >= full.len() {
        return Err(Error::InvalidInput(format!(
            "window start {start} beyond horizon {}",
            full.len()
        )));
    }
    if carried_level < 0.0 {
        return Err(Error::InvalidInput(
            "carried level must be non-negative".into(),
        ));
    }
    let ext = ExtendedSystem::build(full, &full.costs, window)?;
    ext.window_instance(start, carried_level)
}

enum Decision {
    Measure(Measure),
    MinMax { gap_tol: f64, max_iters: usize },
}

/// Sliding-window rollout with a statistical measure: per step, solve all
/// `m` scenario subproblems, commit the measure of their first components.
pub fn sliding_window_rollout<S: ScenarioSource>(
    instance: &ChainLpInstance,
    realized_prices: &[f64],
    source: &S,
    config: &ControllerConfig,
) -> Result<RolloutResult> {
    rollout_core(
        instance,
        realized_prices,
        source,
        config,
        Decision::Measure(config.measure),
    )
}

/// Sliding-window rollout with the min-max (absolute robust) criterion as
/// the per-step decision.
pub fn minmax_rollout<S: ScenarioSource>(
    instance: &ChainLpInstance,
    realized_prices: &[f64],
    source: &S,
    config: &ControllerConfig,
) -> Result<RolloutResult> {
    rollout_core(
        instance,
        realized_prices,
        source,
        config,
        Decision::MinMax {
            gap_tol: config.minmax_gap_tol,
            max_iters: config.minmax_max_iters,
        },
    )
}

fn rollout_core<S: ScenarioSource>(
    instance: &ChainLpInstance,
    realized_prices: &[f64],
    source: &S,
    config: &ControllerConfig,
    decision: Decision,
) -> Result<RolloutResult> {
    config.validate()?;
    let report = check_feasible(instance)?;
    if !report.feasible {
        return Err(Error::Infeasible {
            index: report.violated_index.unwrap_or(0),
        });
    }
    let n = instance.len();
    let q = instance.retention;
    let m = source.scenario_count();
    if m == 0 {
        return Err(Error::InvalidInput("scenario source is empty".into()));
    }
    let ext = ExtendedSystem::build(instance, realized_prices, config.window_hours)?;

    let mut carried = 0.0f64;
    let mut schedule = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);

    for k in 0..n {
        let window = ext.window_instance(k, carried)?;
        let win_report = check_feasible(&window)?;
        if !win_report.feasible {
            return Err(Error::WindowInfeasible { step: k + 1 });
        }
        let base = &ext.base_costs[k..k + ext.r];
        // Every scenario shares the window polytope, so the step-k feasible
        // interval is scenario-independent.
        let step_lo = window.lower[0].max(0.0);
        let step_hi = window.upper[0].min(window.charge_cap[0]);

        let (raw, spread, gap) = match &decision {
            Decision::Measure(measure) => {
                let firsts = (0..m)
                    .into_par_iter()
                    .map(|j| {
                        let costs = source.window_costs(k, j, base);
                        solve_chain_with_costs(&window, &costs).map(|s| s.x[0])
                    })
                    .collect::<Result<Vec<f64>>>()
                    .map_err(|e| match e {
                        Error::Infeasible { .. } => Error::WindowInfeasible { step: k + 1 },
                        other => other,
                    })?;
                let spread = firsts.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                    - firsts.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                (measure.apply(&firsts), spread, None)
            }
            Decision::MinMax { gap_tol, max_iters } => {
                let costs: Vec<Vec<f64>> = (0..m)
                    .into_par_iter()
                    .map(|j| source.window_costs(k, j, base))
                    .collect();
                let out = minmax::minmax_first_step(&window, &costs, *gap_tol, *max_iters)?;
                (out.first_step, 0.0, Some(out.gap))
            }
        };

        // Defensive clamp; a no-op for the median of feasible first steps.
        let x = raw.clamp(step_lo, step_hi);
        schedule.push(x);
        steps.push(StepDiagnostic {
            chosen: x,
            scenario_spread: spread,
            duality_gap: gap,
        });
        carried = q * carried + x;
    }

    validate_schedule(instance, &schedule).map_err(|e| match e {
        Error::InternalConsistency { index, detail } => Error::StateCorruption { index, detail },
        other => other,
    })?;
    let realized_cost = realized_prices
        .iter()
        .zip(&schedule)
        .map(|(c, x)| c * x)
        .sum::<f64>();
    let levels = level_trajectory(instance, &schedule)?;
    let final_level = levels[n - 1] - instance.lower[n - 1];
    let mean_price = realized_prices.iter().sum::<f64>() / n as f64;
    Ok(RolloutResult {
        schedule,
        realized_cost,
        final_level,
        surplus_value: final_level * mean_price,
        steps,
    })
}

/// Optimal cost with the realized prices known in advance. Lower-bounds the
/// realized cost of every controller.
pub fn perfect_foresight(instance: &ChainLpInstance) -> Result<ChargeSchedule> {
    solve_chain(instance)
}

/// Cost of serving demand hour by hour without any storage. Requires
/// `d_i <= u_i`; otherwise the storage-free system cannot serve its demand.
pub fn no_storage_cost(demand: &[f64], realized_prices: &[f64], charge_caps: &[f64]) -> Result<f64> {
    if demand.len() != realized_prices.len() || demand.len() != charge_caps.len() {
        return Err(Error::LengthMismatch(format!(
            "demand {}, prices {}, caps {}",
            demand.len(),
            realized_prices.len(),
            charge_caps.len()
        )));
    }
    for (i, (d, u)) in demand.iter().zip(charge_caps).enumerate() {
        if d > u {
            return Err(Error::InvalidInput(format!(
                "demand {d} exceeds charge cap {u} at step {}; no-storage system cannot serve it",
                i + 1
            )));
        }
    }
    Ok(demand
        .iter()
        .zip(realized_prices)
        .map(|(d, c)| d * c)
        .sum())
}

#[cfg(test)]
mod tests;
