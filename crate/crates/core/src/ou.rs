//! Mean-reverting forecast-error process: exact simulation, calibration
//! from forecast-error trajectories, and assembly of perturbed price
//! scenario portfolios.
//!
//! The error process is a discrete Ornstein-Uhlenbeck chain with reversion
//! level zero and hourly steps:
//! `X_{t+1} = mu X_t + sigma_s Z_t` with `mu = exp(-theta dt)` and
//! `sigma_s^2 = D / (2 theta) * (1 - exp(-2 theta dt))`, the exact
//! discretization of the continuous process with drift `theta` and
//! diffusion `D`.

use crate::error::{Error, Result};
use crate::rng::{derive_rng, Domain};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Drift and diffusion of the forecast-error process. `dt` is fixed to one
/// hour to match hourly price data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    /// Mean-reversion drift, 1/h.
    pub theta: f64,
    /// Diffusion constant, (EUR/kWh)^2 per hour.
    pub diffusion: f64,
    /// Step size in hours; always 1.
    pub dt: f64,
}

impl OuParams {
    pub fn new(theta: f64, diffusion: f64) -> Result<Self> {
        let p = OuParams {
            theta,
            diffusion,
            dt: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "OU drift must be positive, got {}",
                self.theta
            )));
        }
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "OU diffusion must be non-negative, got {}",
                self.diffusion
            )));
        }
        if self.dt != 1.0 {
            return Err(Error::InvalidInput(format!(
                "OU step size is fixed to one hour, got {}",
                self.dt
            )));
        }
        Ok(())
    }

    /// One-step autoregression factor `exp(-theta dt)`.
    pub fn ar_factor(&self) -> f64 {
        (-self.theta * self.dt).exp()
    }

    /// Standard deviation of the exact one-step innovation.
    pub fn step_sigma(&self) -> f64 {
        let var = self.diffusion / (2.0 * self.theta) * (1.0 - (-2.0 * self.theta * self.dt).exp());
        var.max(0.0).sqrt()
    }

    /// Stationary variance `D / (2 theta)`.
    pub fn stationary_variance(&self) -> f64 {
        self.diffusion / (2.0 * self.theta)
    }
}

/// A simulated forecast-error trajectory. `values[0]` is always zero: the
/// error at the moment the forecast is issued.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoisePath {
    pub values: Vec<f64>,
}

/// Simulates the exact discrete chain for `length` hours, starting at zero.
pub fn simulate_ou<R: Rng + ?Sized>(params: &OuParams, length: usize, rng: &mut R) -> Result<NoisePath> {
    params.validate()?;
    let mu = params.ar_factor();
    let sigma = params.step_sigma();
    let mut values = Vec::with_capacity(length);
    let mut x = 0.0;
    for t in 0..length {
        if t > 0 {
            let z: f64 = rng.sample(StandardNormal);
            x = mu * x + sigma * z;
        }
        values.push(x);
    }
    Ok(NoisePath { values })
}

/// Simulates the stream keyed by `(master_seed, window, scenario)`; the
/// path is identical regardless of evaluation order or parallelism.
pub fn simulate_ou_stream(
    params: &OuParams,
    length: usize,
    master_seed: u64,
    window: u64,
    scenario: u64,
) -> Result<NoisePath> {
    let mut rng = derive_rng(master_seed, Domain::Scenario, window, scenario);
    simulate_ou(params, length, &mut rng)
}

/// Moment-matching estimate from hourly forecast-error trajectories.
///
/// Per trajectory, the autoregression factor is estimated through the
/// origin (the process has reversion level zero), giving
/// `theta^ = -ln(rho_1) / dt`, and the diffusion from the innovation
/// variance `D^ = Var(X_{t+1} - mu^ X_t) * 2 theta^ / (1 - exp(-2 theta^ dt))`.
/// The final parameters average the per-trajectory estimates. Trajectories
/// with a lag-1 autocorrelation outside (0, 1) are skipped with a warning;
/// if all are skipped, calibration fails.
pub fn calibrate_ou(error_trajectories: &[Vec<f64>]) -> Result<OuParams> {
    if error_trajectories.is_empty() {
        return Err(Error::Calibration("no trajectories supplied".into()));
    }
    let mut thetas = Vec::new();
    let mut diffusions = Vec::new();
    for (idx, traj) in error_trajectories.iter().enumerate() {
        if traj.len() < 3 {
            return Err(Error::Calibration(format!(
                "trajectory {} has {} samples, need at least 3",
                idx + 1,
                traj.len()
            )));
        }
        match calibrate_single(traj) {
            Some((theta, diffusion)) => {
                thetas.push(theta);
                diffusions.push(diffusion);
            }
            None => {
                log::warn!(
                    "skipping trajectory {}: degenerate lag-1 autocorrelation",
                    idx + 1
                );
            }
        }
    }
    if thetas.is_empty() {
        return Err(Error::Calibration(
            "all trajectories had degenerate autocorrelation".into(),
        ));
    }
    let theta = thetas.iter().sum::<f64>() / thetas.len() as f64;
    let diffusion = diffusions.iter().sum::<f64>() / diffusions.len() as f64;
    OuParams::new(theta, diffusion)
}

fn calibrate_single(traj: &[f64]) -> Option<(f64, f64)> {
    let n = traj.len() - 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..n {
        num += traj[t] * traj[t + 1];
        den += traj[t] * traj[t];
    }
    if den <= 0.0 {
        return None;
    }
    let rho = num / den;
    if rho <= 0.0 || rho >= 1.0 {
        return None;
    }
    let dt = 1.0;
    let theta = -rho.ln() / dt;
    let resid_var = traj
        .windows(2)
        .map(|w| {
            let r = w[1] - rho * w[0];
            r * r
        })
        .sum::<f64>()
        / n as f64;
    let denom = 1.0 - (-2.0 * theta * dt).exp();
    if denom <= 0.0 {
        return None;
    }
    let diffusion = resid_var * 2.0 * theta / denom;
    Some((theta, diffusion))
}

/// A portfolio of perturbed price vectors over one forecast window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceScenarioSet {
    /// Window length in hours.
    pub window_len: usize,
    /// `m` cost vectors, each of length `window_len`.
    pub scenarios: Vec<Vec<f64>>,
}

impl PriceScenarioSet {
    pub fn scenario_count(&self) -> usize {
        self.scenarios.len()
    }
}

/// Builds `m` scenarios `base + delta * OU_j`, each `OU_j` an independent
/// zero-started path drawn from the stream keyed by
/// `(master_seed, window, j)`.
pub fn make_price_scenarios(
    base_prices: &[f64],
    params: &OuParams,
    delta: f64,
    m: usize,
    master_seed: u64,
    window: u64,
) -> Result<PriceScenarioSet> {
    if m == 0 {
        return Err(Error::InvalidInput("scenario count must be >= 1".into()));
    }
    if delta < 0.0 {
        return Err(Error::InvalidInput(format!(
            "perturbation scale must be non-negative, got {delta}"
        )));
    }
    let r = base_prices.len();
    let mut scenarios = Vec::with_capacity(m);
    for j in 0..m {
        let path = simulate_ou_stream(params, r, master_seed, window, j as u64)?;
        let costs: Vec<f64> = base_prices
            .iter()
            .zip(&path.values)
            .map(|(b, e)| b + delta * e)
            .collect();
        scenarios.push(costs);
    }
    Ok(PriceScenarioSet {
        window_len: r,
        scenarios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_params() -> OuParams {
        OuParams::new(0.3331, 0.004).unwrap()
    }

    #[test]
    fn zero_diffusion_gives_zero_path() {
        let p = OuParams::new(0.5, 0.0).unwrap();
        let mut rng = derive_rng(1, Domain::Test, 0, 0);
        let path = simulate_ou(&p, 100, &mut rng).unwrap();
        assert!(path.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn path_starts_at_zero_and_is_deterministic() {
        let p = paper_params();
        let a = simulate_ou_stream(&p, 50, 7, 3, 4).unwrap();
        let b = simulate_ou_stream(&p, 50, 7, 3, 4).unwrap();
        assert_eq!(a.values[0], 0.0);
        assert_eq!(a.values, b.values);
        let c = simulate_ou_stream(&p, 50, 7, 3, 5).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn stationary_variance_matches_closed_form() {
        let p = paper_params();
        // Long single path; burn-in of 50/theta steps before sampling.
        let burn = (50.0 / p.theta).ceil() as usize;
        let n = 150_000 + burn;
        let mut rng = derive_rng(20240601, Domain::Test, 2, 0);
        let path = simulate_ou(&p, n, &mut rng).unwrap();
        let samples = &path.values[burn..];
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (samples.len() - 1) as f64;
        let expected = p.stationary_variance();
        assert!((expected - 0.004 / (2.0 * 0.3331)).abs() < 1e-15);
        assert!(
            (var - expected).abs() <= 0.05 * expected,
            "sample variance {var}, closed form {expected}"
        );
    }

    #[test]
    fn calibration_roundtrip_recovers_generator() {
        let truth = paper_params();
        let trajectories: Vec<Vec<f64>> = (0..50)
            .map(|j| {
                simulate_ou_stream(&truth, 3480, 99, 0, j)
                    .unwrap()
                    .values
            })
            .collect();
        let est = calibrate_ou(&trajectories).unwrap();
        assert!(
            (est.theta - truth.theta).abs() <= 0.10 * truth.theta,
            "theta {} vs {}",
            est.theta,
            truth.theta
        );
        assert!(
            (est.diffusion - truth.diffusion).abs() <= 0.15 * truth.diffusion,
            "diffusion {} vs {}",
            est.diffusion,
            truth.diffusion
        );
    }

    #[test]
    fn constant_zero_trajectory_is_skipped() {
        let zeros = vec![vec![0.0; 100]];
        assert!(matches!(
            calibrate_ou(&zeros),
            Err(Error::Calibration(_))
        ));
        // One degenerate plus one valid trajectory: calibration proceeds.
        let truth = paper_params();
        let good = simulate_ou_stream(&truth, 2000, 5, 0, 0).unwrap().values;
        let est = calibrate_ou(&[vec![0.0; 100], good]).unwrap();
        assert!(est.theta > 0.0);
    }

    #[test]
    fn white_noise_limit_matches_closed_form() {
        // Near-white noise: mu ~ 0, so residuals ~ X_{t+1} and
        // D^ ~ 2 theta^ Var(X).
        let truth = OuParams::new(6.0, 1.0).unwrap();
        let mut rng = derive_rng(17, Domain::Test, 3, 0);
        let series = simulate_ou(&truth, 40_000, &mut rng).unwrap().values;
        let est = calibrate_ou(&[series.clone()]).unwrap();
        assert!(est.theta > 2.0, "theta should be large, got {}", est.theta);
        let var = series.iter().map(|v| v * v).sum::<f64>() / series.len() as f64;
        let ratio = est.diffusion / (2.0 * est.theta * var);
        assert!(
            (ratio - 1.0).abs() < 0.05,
            "diffusion {} vs 2 theta Var = {}",
            est.diffusion,
            2.0 * est.theta * var
        );
    }

    #[test]
    fn short_trajectory_is_an_error() {
        assert!(matches!(
            calibrate_ou(&[vec![0.1, 0.2]]),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn zero_delta_scenarios_equal_base() {
        let p = paper_params();
        let base: Vec<f64> = (0..24).map(|i| 0.02 + 0.001 * i as f64).collect();
        let set = make_price_scenarios(&base, &p, 0.0, 5, 77, 0).unwrap();
        for s in &set.scenarios {
            assert_eq!(s, &base);
        }
    }

    #[test]
    fn zero_diffusion_scenarios_equal_base() {
        let p = OuParams::new(0.3331, 0.0).unwrap();
        let base = vec![0.03; 12];
        let set = make_price_scenarios(&base, &p, 2.5, 4, 77, 1).unwrap();
        for s in &set.scenarios {
            assert_eq!(s, &base);
        }
    }

    #[test]
    fn ensemble_mean_tracks_base() {
        let p = paper_params();
        let r = 24;
        let base = vec![0.03; 24];
        let m = 1000;
        let set = make_price_scenarios(&base, &p, 1.0, m, 4242, 9).unwrap();
        assert_eq!(set.scenario_count(), m);
        // Standard error of the ensemble mean at horizon t, from the exact
        // per-step variance of the process.
        let mu = p.ar_factor();
        let s2 = p.step_sigma().powi(2);
        for t in 1..r {
            let var_t = s2 * (1.0 - mu.powi(2 * t as i32)) / (1.0 - mu * mu);
            let se = (var_t / m as f64).sqrt();
            let mean_t = set.scenarios.iter().map(|s| s[t]).sum::<f64>() / m as f64;
            assert!(
                (mean_t - base[t]).abs() <= 3.0 * se,
                "horizon {t}: mean {mean_t} vs base {} (se {se})",
                base[t]
            );
        }
    }
}
