//! Exact solver for the chain LP, as a forward dynamic program over convex
//! piecewise-linear value functions in level space.
//!
//! With `y_i = sum_{j<=i} q^{i-j} x_j` (so `x_i = y_i - q y_{i-1}`), the
//! constraints become the transition window
//! `max(a_i, q y_{i-1}) <= y_i <= min(b_i, q y_{i-1} + u_i)` and the value
//! function satisfies
//! `V_i(y) = c_i y + min { V_{i-1}(y') - c_i q y' : (y - u_i)/q <= y' <= y/q }`.
//! Each step adds O(1) breakpoints, so total work is O(n^2) in the worst
//! case. Arbitrary-sign costs are handled without modification.

use super::pwl::Pwl;
use super::{check_feasible, ChainLpInstance, ChargeSchedule};
use crate::error::{Error, Result};

struct StepRecord {
    /// Minimizer interval of `W_i(y') = V_{i-1}(y') - c_i q y'`.
    m_lo: f64,
    m_hi: f64,
    /// Domain of `V_{i-1}`.
    prev_lo: f64,
    prev_hi: f64,
}

/// Computes an exact optimal charge schedule.
///
/// Among equally optimal schedules the backward pass prefers the smallest
/// feasible level at every step, i.e. purchasing as late and as little as
/// possible. This tie-break is documented behaviour, not a contract.
pub fn solve_chain(instance: &ChainLpInstance) -> Result<ChargeSchedule> {
    solve_chain_with_costs(instance, &instance.costs)
}

/// [`solve_chain`] with the cost vector supplied separately, so scenario
/// sweeps can reuse one instance without cloning its bound vectors.
pub fn solve_chain_with_costs(instance: &ChainLpInstance, costs: &[f64]) -> Result<ChargeSchedule> {
    if costs.len() != instance.len() {
        return Err(Error::LengthMismatch(format!(
            "cost vector has {} entries, instance has {} steps",
            costs.len(),
            instance.len()
        )));
    }
    let report = check_feasible(instance)?;
    if !report.feasible {
        return Err(Error::Infeasible {
            index: report.violated_index.unwrap_or(0),
        });
    }

    let n = instance.len();
    let q = instance.retention;
    let mut value = Pwl::point(0.0, 0.0);
    let mut steps: Vec<StepRecord> = Vec::with_capacity(n);

    for i in 0..n {
        let c = costs[i];
        let u = instance.charge_cap[i];
        let (prev_lo, prev_hi) = value.domain();

        // W(y') = V_{i-1}(y') - c q y'
        value.add_linear(-c * q);
        let (m_lo, m_hi, _) = value.minimizer();

        // g(y) = min of W over the reachable window, then V_i = c y + g(y)
        // restricted to the bound window [a_i, b_i].
        let mut g = value.window_min(q, u);
        g.add_linear(c);
        let (glo, ghi) = g.domain();
        value = g
            .restrict(instance.lower[i].max(glo), instance.upper[i].min(ghi))
            .ok_or(Error::Infeasible { index: i + 1 })?;
        value.check_convex(i + 1)?;

        steps.push(StepRecord {
            m_lo,
            m_hi,
            prev_lo,
            prev_hi,
        });
    }

    // Backward pass: start from the smallest minimizer of V_n and, at each
    // step, pick the smallest argmin of W_i within the transition window.
    let (y_final, _, _) = value.minimizer();
    let mut levels = vec![0.0f64; n + 1];
    levels[n] = y_final;
    for i in (1..=n).rev() {
        let rec = &steps[i - 1];
        let u = instance.charge_cap[i - 1];
        let y = levels[i];
        let win_lo = rec.prev_lo.max((y - u) / q);
        let win_hi = rec.prev_hi.min(y / q);
        let y_prev = if win_lo > win_hi {
            // Rounding artifact; the window is a point up to ulps.
            0.5 * (win_lo + win_hi)
        } else {
            rec.m_lo.clamp(win_lo, win_hi)
        };
        levels[i - 1] = y_prev;
        // `m_hi` bounds the argmin interval from the right; anything in
        // [max(win_lo, m_lo), min(win_hi, m_hi)] is equally good.
        let _ = rec.m_hi;
    }

    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let raw = levels[i + 1] - q * levels[i];
        x.push(raw.clamp(0.0, instance.charge_cap[i]));
    }
    let objective = costs.iter().zip(&x).map(|(c, xi)| c * xi).sum();
    Ok(ChargeSchedule { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_lp::{level_trajectory, validate_schedule};

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
    fn lower_bound_forces_minimum_purchase() {
        let i = inst(&[1.0], &[2.0], &[10.0], &[5.0], 1.0);
        let s = solve_chain(&i).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12);
        assert!((s.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decay_makes_early_purchase_cheaper() {
        // Delivering 1 kWh at step 2 from step 1 costs c_1 / q = 2 < c_2 = 3.
        let i = inst(
            &[1.0, 3.0],
            &[0.0, 1.0],
            &[10.0, 10.0],
            &[10.0, 10.0],
            0.5,
        );
        let s = solve_chain(&i).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9, "x = {:?}", s.x);
        assert!(s.x[1].abs() < 1e-9);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_instance_is_rejected_with_index() {
        let i = inst(&[1.0], &[6.0], &[10.0], &[5.0], 1.0);
        match solve_chain(&i) {
            Err(Error::Infeasible { index }) => assert_eq!(index, 1),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn schedules_satisfy_bounds() {
        let i = inst(
            &[3.0, 1.0, 2.0, 0.5],
            &[1.0, 1.5, 2.0, 4.0],
            &[3.0, 4.0, 5.0, 6.0],
            &[2.0, 2.0, 2.0, 2.0],
            0.9,
        );
        let s = solve_chain(&i).unwrap();
        validate_schedule(&i, &s.x).unwrap();
        let y = level_trajectory(&i, &s.x).unwrap();
        for (i_step, yi) in y.iter().enumerate() {
            assert!(*yi >= i.lower[i_step] - 1e-9);
            assert!(*yi <= i.upper[i_step] + 1e-9);
        }
    }

    #[test]
    fn negative_costs_fill_capacity() {
        // Negative price at step 1: buying is profitable up to the cap/bound.
        let i = inst(&[-1.0, 0.5], &[0.0, 0.0], &[4.0, 4.0], &[3.0, 3.0], 1.0);
        let s = solve_chain(&i).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert!(s.x[1].abs() < 1e-9);
        assert!((s.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn tie_break_prefers_late_purchase() {
        // Equal costs, q = 1: any split is optimal; the tie-break buys late.
        let i = inst(&[1.0, 1.0], &[0.0, 2.0], &[10.0, 10.0], &[5.0, 5.0], 1.0);
        let s = solve_chain(&i).unwrap();
        assert!(s.x[0].abs() < 1e-12, "x = {:?}", s.x);
        assert!((s.x[1] - 2.0).abs() < 1e-12);
    }
}
