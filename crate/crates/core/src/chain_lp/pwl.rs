//! Convex piecewise-linear functions on a closed interval, represented by
//! breakpoint lists. These are the value functions of the level-space
//! dynamic program in [`super::solve_chain`].

use crate::error::{Error, Result};

/// Breakpoints closer than this (in level space) are merged to keep the
/// slope ordering well conditioned.
const BREAKPOINT_MERGE_EPS: f64 = 1e-12;

/// A convex piecewise-linear function defined on `[xs[0], xs[last]]`,
/// linear between consecutive breakpoints. A single breakpoint denotes a
/// function defined at one point only.
#[derive(Debug, Clone)]
pub(crate) struct Pwl {
    xs: Vec<f64>,
    vs: Vec<f64>,
}

impl Pwl {
    pub fn point(x: f64, v: f64) -> Self {
        Pwl {
            xs: vec![x],
            vs: vec![v],
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Adds `slope * x` to the function in place. Preserves convexity.
    pub fn add_linear(&mut self, slope: f64) {
        for (v, &x) in self.vs.iter_mut().zip(&self.xs) {
            *v += slope * x;
        }
    }

    /// Left argmin, right argmin and minimum value. The minimizing set of a
    /// convex function is a single (possibly degenerate) interval.
    pub fn minimizer(&self) -> (f64, f64, f64) {
        let k = self.xs.len();
        // First breakpoint where the function stops strictly decreasing.
        let mut i_lo = k - 1;
        for j in 0..k - 1 {
            if self.vs[j + 1] >= self.vs[j] {
                i_lo = j;
                break;
            }
        }
        // Extend right across exactly-flat segments.
        let mut i_hi = i_lo;
        while i_hi + 1 < k && self.vs[i_hi + 1] == self.vs[i_hi] {
            i_hi += 1;
        }
        (self.xs[i_lo], self.xs[i_hi], self.vs[i_lo])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.xs.len();
        if k == 1 {
            return self.vs[0];
        }
        if x <= self.xs[0] {
            return self.vs[0];
        }
        if x >= self.xs[k - 1] {
            return self.vs[k - 1];
        }
        // Binary search for the segment containing x.
        let seg = match self.xs.partition_point(|&b| b <= x) {
            0 => 0,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[seg], self.xs[seg + 1]);
        let (v0, v1) = (self.vs[seg], self.vs[seg + 1]);
        if x1 == x0 {
            return v0.min(v1);
        }
        let t = (x - x0) / (x1 - x0);
        v0 + t * (v1 - v0)
    }

    /// Sliding-window minimum: `g(y) = min { self(y') : (y - u)/q <= y' <= y/q }`
    /// intersected with the domain of `self`. With `self` convex the result
    /// is convex and is assembled from three regions: the strictly
    /// decreasing part composed with `y/q`, a flat plateau over the window
    /// positions that can reach the minimizer, and the strictly increasing
    /// part composed with `(y - u)/q`.
    pub fn window_min(&self, q: f64, u: f64) -> Pwl {
        let (m_lo, m_hi, m_val) = self.minimizer();
        let cap = self.xs.len() + 4;
        let mut xs = Vec::with_capacity(cap);
        let mut vs = Vec::with_capacity(cap);
        // Decreasing part: y' in [lo, m_lo] reached as right window edge y/q.
        for (&x, &v) in self.xs.iter().zip(&self.vs) {
            if x >= m_lo {
                break;
            }
            xs.push(q * x);
            vs.push(v);
        }
        // Plateau where the window contains the minimizer.
        xs.push(q * m_lo);
        vs.push(m_val);
        let plateau_end = q * m_hi + u;
        if plateau_end > q * m_lo {
            xs.push(plateau_end);
            vs.push(m_val);
        }
        // Increasing part: y' in [m_hi, hi] reached as left window edge (y - u)/q.
        for (&x, &v) in self.xs.iter().zip(&self.vs) {
            if x <= m_hi {
                continue;
            }
            xs.push(q * x + u);
            vs.push(v);
        }
        Pwl::merged(xs, vs)
    }

    /// Restricts the domain to `[lo, hi]`, interpolating the boundary
    /// values. Returns `None` when the intersection is empty beyond a tiny
    /// numerical slack (in which case the caller treats the step as
    /// infeasible).
    pub fn restrict(&self, lo: f64, hi: f64) -> Option<Pwl> {
        let (dlo, dhi) = self.domain();
        let lo = lo.max(dlo);
        let hi = hi.min(dhi);
        if lo > hi {
            let slack = 1e-9 * hi.abs().max(1.0);
            if lo - hi > slack {
                return None;
            }
            // Marginally empty from rounding: collapse to a point.
            let x = 0.5 * (lo + hi);
            return Some(Pwl::point(x, self.eval(x)));
        }
        if lo == hi {
            return Some(Pwl::point(lo, self.eval(lo)));
        }
        let mut xs = Vec::with_capacity(self.xs.len());
        let mut vs = Vec::with_capacity(self.xs.len());
        xs.push(lo);
        vs.push(self.eval(lo));
        for (&x, &v) in self.xs.iter().zip(&self.vs) {
            if x > lo && x < hi {
                xs.push(x);
                vs.push(v);
            }
        }
        xs.push(hi);
        vs.push(self.eval(hi));
        Some(Pwl::merged(xs, vs))
    }

    /// Defensive check that slopes are non-decreasing. Convexity is
    /// preserved structurally by every transform above, so a violation
    /// beyond rounding noise means the solver state is corrupt.
    pub fn check_convex(&self, step: usize) -> Result<()> {
        let k = self.xs.len();
        for j in 1..k.saturating_sub(1) {
            let w0 = self.xs[j] - self.xs[j - 1];
            let w1 = self.xs[j + 1] - self.xs[j];
            if w0 <= 0.0 || w1 <= 0.0 {
                continue;
            }
            let s0 = (self.vs[j] - self.vs[j - 1]) / w0;
            let s1 = (self.vs[j + 1] - self.vs[j]) / w1;
            let tol = 1e-7 * (1.0 + s0.abs() + s1.abs());
            if s1 - s0 < -tol {
                return Err(Error::InternalConsistency {
                    index: step,
                    detail: format!(
                        "value function lost convexity: slope {s0:.6e} followed by {s1:.6e}"
                    ),
                });
            }
        }
        Ok(())
    }

    fn merged(xs: Vec<f64>, vs: Vec<f64>) -> Pwl {
        debug_assert_eq!(xs.len(), vs.len());
        debug_assert!(!xs.is_empty());
        let mut mxs: Vec<f64> = Vec::with_capacity(xs.len());
        let mut mvs: Vec<f64> = Vec::with_capacity(vs.len());
        for (x, v) in xs.into_iter().zip(vs) {
            match mxs.last() {
                Some(&px) if x - px <= BREAKPOINT_MERGE_EPS.max(px.abs() * BREAKPOINT_MERGE_EPS) => {
                    // Merge near-coincident breakpoints, keeping the lower value.
                    let last = mvs.last_mut().unwrap();
                    if v < *last {
                        *last = v;
                    }
                }
                _ => {
                    mxs.push(x);
                    mvs.push(v);
                }
            }
        }
        Pwl { xs: mxs, vs: mvs }
    }
}
