//! Power-to-Heat household system: builds chain LP instances from a storage
//! specification and an hourly heat demand series.

use crate::chain_lp::{check_feasible, ChainLpInstance};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, Domain};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Storage and conversion parameters of the household system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HouseholdSpec {
    /// Annual heat demand, kWh/a.
    pub annual_heat_demand_kwh: f64,
    /// Living area, m^2 (descriptive; consistency-checked when given).
    pub living_area_m2: Option<f64>,
    /// Specific heat demand, kWh/(m^2 a).
    pub specific_demand_kwh_m2a: Option<f64>,
    /// Maximum charge power of the conversion unit, kW.
    pub max_charge_power_kw: f64,
    /// Storage capacity as days of mean daily demand.
    pub capacity_days: f64,
    /// Hourly energy retention factor of the storage unit.
    pub retention: f64,
    /// Conversion efficiency; fixed to 1.
    pub conversion_efficiency: f64,
}

impl HouseholdSpec {
    pub fn new(
        annual_heat_demand_kwh: f64,
        max_charge_power_kw: f64,
        capacity_days: f64,
        retention: f64,
    ) -> Result<Self> {
        let spec = HouseholdSpec {
            annual_heat_demand_kwh,
            living_area_m2: None,
            specific_demand_kwh_m2a: None,
            max_charge_power_kw,
            capacity_days,
            retention,
            conversion_efficiency: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The single-family reference system: 15 kW charge power, storage for
    /// three days of mean daily heat demand (about 88.28 kWh), hourly
    /// retention 0.9981, annual demand 10741.15 kWh.
    pub fn reference_household() -> Self {
        HouseholdSpec {
            annual_heat_demand_kwh: 10741.15,
            living_area_m2: None,
            specific_demand_kwh_m2a: None,
            max_charge_power_kw: 15.0,
            capacity_days: 3.0,
            retention: 0.9981,
            conversion_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.annual_heat_demand_kwh > 0.0) {
            return Err(Error::InvalidInput(
                "annual heat demand must be positive".into(),
            ));
        }
        if !(self.max_charge_power_kw >= 0.0) {
            return Err(Error::InvalidInput(
                "charge power must be non-negative".into(),
            ));
        }
        if !(self.capacity_days > 0.0) {
            return Err(Error::InvalidInput("capacity days must be positive".into()));
        }
        if !(self.retention > 0.0 && self.retention <= 1.0) {
            return Err(Error::InvalidInput(
                "retention factor must lie in (0, 1]".into(),
            ));
        }
        if self.conversion_efficiency != 1.0 {
            return Err(Error::InvalidInput(
                "conversion efficiency is fixed to 1".into(),
            ));
        }
        if let (Some(area), Some(specific)) = (self.living_area_m2, self.specific_demand_kwh_m2a) {
            let implied = area * specific;
            if (implied - self.annual_heat_demand_kwh).abs()
                > 1e-6 * self.annual_heat_demand_kwh.abs().max(1.0)
            {
                return Err(Error::InvalidInput(format!(
                    "annual demand {} does not match area x specific demand = {}",
                    self.annual_heat_demand_kwh, implied
                )));
            }
        }
        Ok(())
    }

    /// Storage capacity in kWh: `capacity_days * annual demand / 365`.
    pub fn capacity_kwh(&self) -> f64 {
        self.capacity_days * self.annual_heat_demand_kwh / 365.0
    }
}

/// Hourly heat demand, kWh per hour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandSeries {
    pub values: Vec<f64>,
}

impl DemandSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidInput(
                "demand entries must be finite and non-negative".into(),
            ));
        }
        Ok(DemandSeries { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Builds the chain LP bounds from storage balance
/// `S_i = q S_{i-1} + x_i - d_i` with `0 <= S_i <= C`: in cumulative form
/// `a_i = sum_{j<=i} q^{i-j} d_j` and `b_i = a_i + C`, with the charge cap
/// constant at the conversion power. Costs are left at zero; attach prices
/// with [`ChainLpInstance::with_costs`].
///
/// Decay acts on the carried level; same-hour charge and demand are
/// undamped. This ordering convention is confined to this function.
pub fn build_instance(demand: &DemandSeries, spec: &HouseholdSpec) -> Result<ChainLpInstance> {
    spec.validate()?;
    if demand.is_empty() {
        return Err(Error::InvalidInput("demand series is empty".into()));
    }
    let q = spec.retention;
    let capacity = spec.capacity_kwh();
    let cap = spec.max_charge_power_kw; // kW * 1 h
    let n = demand.len();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut acc = 0.0f64;
    for &d in &demand.values {
        acc = q * acc + d;
        lower.push(acc);
        upper.push(acc + capacity);
    }
    let instance = ChainLpInstance::new(vec![0.0; n], lower, upper, vec![cap; n], q)?;
    let report = check_feasible(&instance)?;
    if !report.feasible {
        return Err(Error::Infeasible {
            index: report.violated_index.unwrap_or(0),
        });
    }
    Ok(instance)
}

/// Default 24 h demand shape: night setback, morning and evening peaks.
pub const DEFAULT_DAILY_SHAPE: [f64; 24] = [
    0.7, 0.65, 0.6, 0.6, 0.65, 0.8, 1.1, 1.3, 1.25, 1.1, 1.0, 0.95, 0.9, 0.9, 0.95, 1.0, 1.1,
    1.25, 1.35, 1.3, 1.2, 1.05, 0.9, 0.8,
];

/// Synthetic hourly heat demand: a seasonal cosine envelope times a 24 h
/// shape, with multiplicative lognormal noise, rescaled so the series sums
/// to `annual_total * n / 8760`.
pub fn synth_demand(
    n: usize,
    annual_total_kwh: f64,
    seasonal_amplitude: f64,
    daily_shape: Option<&[f64; 24]>,
    noise_level: f64,
    seed: u64,
) -> Result<DemandSeries> {
    if n < 24 {
        return Err(Error::InvalidInput(format!(
            "demand horizon must be at least 24 hours, got {n}"
        )));
    }
    if !(annual_total_kwh > 0.0) {
        return Err(Error::InvalidInput("annual total must be positive".into()));
    }
    if !(0.0..=1.0).contains(&seasonal_amplitude) {
        return Err(Error::InvalidInput(
            "seasonal amplitude must lie in [0, 1]".into(),
        ));
    }
    if noise_level < 0.0 {
        return Err(Error::InvalidInput("noise level must be >= 0".into()));
    }
    let shape = daily_shape.unwrap_or(&DEFAULT_DAILY_SHAPE);
    if shape.iter().any(|s| *s < 0.0) {
        return Err(Error::InvalidInput("daily shape must be non-negative".into()));
    }
    let mut rng = derive_rng(seed, Domain::Demand, n as u64, 0);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let season = 1.0 + seasonal_amplitude * (2.0 * std::f64::consts::PI * i as f64 / 8760.0).cos();
        let noise = if noise_level > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            (noise_level * z - 0.5 * noise_level * noise_level).exp()
        } else {
            1.0
        };
        values.push(season * shape[i % 24] * noise);
    }
    let target = annual_total_kwh * n as f64 / 8760.0;
    let sum: f64 = values.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidInput(
            "degenerate demand shape: series sums to zero".into(),
        ));
    }
    let factor = target / sum;
    for v in &mut values {
        *v *= factor;
    }
    DemandSeries::new(values)
}
