//! Shared driver machinery: solver configuration, iteration traces, the
//! step acceptance rule and the step-size update used by both the full-rank
//! reference flow and the rank-1 method.

use crate::error::{Error, Result};
use crate::scalar::{cast, tol, C, Real};

#[derive(Clone, Debug)]
pub struct SolverConfig<T> {
    /// Initial step size.
    pub h0: T,
    /// Step-size factor, > 1.
    pub theta: T,
    /// Relative functional-stall tolerance of the stopping rule.
    pub tol_f: T,
    /// Stationarity-certificate tolerance of the stopping rule.
    pub tol_stat: T,
    pub max_iter: usize,
    /// Step-size floor; going below means the search has stalled.
    pub min_h: T,
    /// Record (u, v, rho) after every accepted step (memory-heavy).
    pub record_factors: bool,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            h0: cast(0.1),
            theta: cast(1.5),
            tol_f: tol(1e-10, 16.0),
            tol_stat: tol(1e-8, 64.0),
            max_iter: 1000,
            min_h: tol(1e-13, 4.0),
            record_factors: false,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.theta <= T::one() {
            return Err(Error::InvalidProblem("theta must exceed 1".into()));
        }
        if self.h0 <= T::zero()
            || self.tol_f <= T::zero()
            || self.tol_stat <= T::zero()
            || self.min_h <= T::zero()
        {
            return Err(Error::InvalidProblem(
                "step sizes and tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Termination status of a driver run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    /// Line search hit the step-size floor away from certified stationarity.
    Stalled,
    /// The free gradient vanished (e.g. |lambda|^2 at lambda = 0).
    DegenerateObjective,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max-iterations",
            Status::Stalled => "stalled",
            Status::DegenerateObjective => "degenerate-objective",
        }
    }

    pub fn is_partial(self) -> bool {
        !matches!(self, Status::Converged)
    }
}

/// One evaluated trial (accepted or rejected) of the inner iteration.
#[derive(Clone, Debug)]
pub struct TraceRow<T> {
    pub k: usize,
    /// Accumulated pseudo-time over accepted steps.
    pub t: T,
    pub lambda: C<T>,
    pub f: T,
    pub h: T,
    pub g: T,
    pub accepted: bool,
}

/// Per-run iteration record.
#[derive(Clone, Debug, Default)]
pub struct Trace<T> {
    pub rows: Vec<TraceRow<T>>,
    /// (u, v, rho) snapshots per accepted step when requested.
    pub factors: Vec<(Vec<C<T>>, Vec<C<T>>, T)>,
}

impl<T: Real> Trace<T> {
    pub fn new() -> Self {
        Trace {
            rows: Vec::new(),
            factors: Vec::new(),
        }
    }

    pub fn accepted_f(&self) -> Vec<T> {
        self.rows
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.f)
            .collect()
    }

    /// True when the accepted functional values never increase (up to a
    /// roundoff slack).
    pub fn is_monotone(&self) -> bool {
        let f = self.accepted_f();
        f.windows(2).all(|w| {
            let slack = T::epsilon() * cast::<T>(64.0) * (T::one() + w[0].abs());
            w[1] <= w[0] + slack
        })
    }
}

/// Acceptance rule: f(h) < max(f_k, f_k - h theta g_k).
pub(crate) fn step_accepted<T: Real>(f_new: T, f_k: T, h: T, theta: T, g_k: T) -> bool {
    f_new < f_k.max(f_k - h * theta * g_k)
}

/// Step-size proposal for the next iteration after accepting step `h_used`
/// (the entry proposal was `h_k`).
pub(crate) fn next_step_size<T: Real>(
    h_used: T,
    h_k: T,
    theta: T,
    g_k: T,
    f_new: T,
    f_k: T,
) -> T {
    let sufficient_violated = if g_k >= T::zero() {
        f_new >= f_k - (h_used / theta) * g_k
    } else {
        f_new >= f_k - h_used * theta * g_k
    };
    if sufficient_violated {
        h_used / theta
    } else if h_used == h_k {
        theta * h_k
    } else {
        h_k
    }
}

/// Outcome of one accepted line-search step.
pub(crate) struct LineSearchStep<T, S> {
    pub h_used: T,
    pub f_new: T,
    pub state: S,
    pub h_next: T,
}

/// Runs the trial loop of the step controller: evaluate at h, halve by theta
/// on rejection, accept on f(h) < max(f_k, f_k - h theta g_k). The closure
/// performs the trial evaluation (and may record trace rows).
pub(crate) fn line_search<T: Real, S>(
    f_k: T,
    g_k: T,
    h_k: T,
    theta: T,
    min_h: T,
    iter: usize,
    mut trial: impl FnMut(T) -> Result<(T, S)>,
) -> Result<LineSearchStep<T, S>> {
    let mut h = h_k;
    loop {
        let (f_new, state) = trial(h)?;
        if step_accepted(f_new, f_k, h, theta, g_k) {
            let h_next = next_step_size(h, h_k, theta, g_k, f_new, f_k);
            return Ok(LineSearchStep {
                h_used: h,
                f_new,
                state,
                h_next,
            });
        }
        h = h / theta;
        if h < min_h {
            return Err(Error::StalledStep {
                min_h: min_h.to_f64().unwrap_or(0.0),
                iter,
            });
        }
    }
}

/// Tracks consecutive accepted steps with a relatively stalled functional.
#[derive(Default)]
pub(crate) struct StallTracker {
    count: usize,
}

impl StallTracker {
    pub fn update<T: Real>(&mut self, f_prev: T, f_new: T, tol_f: T) {
        if (f_new - f_prev).abs() <= tol_f * (T::one() + f_new.abs()) {
            self.count += 1;
        } else {
            self.count = 0;
        }
    }

    pub fn stalled(&self) -> bool {
        self.count >= 3
    }
}
