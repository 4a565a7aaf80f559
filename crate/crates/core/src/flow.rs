//! Reference integrator for the full structure- and norm-constrained
//! gradient system: normalized Euler steps with reprojection, driven by the
//! same step controller as the rank-1 method. Serves as the oracle the
//! rank-1 driver is validated against.

use crate::error::{Error, Result};
use crate::linalg::matrix::{c_re, re_inner};
use crate::linalg::{ComplexMatrix, EigEngine, Eigentriplet, Perturbation};
use crate::objective::{free_gradient, slope_g_full, stationarity_residual, Objective};
use crate::scalar::Real;
use crate::solver::{line_search, SolverConfig, Status, StallTracker, Trace, TraceRow};
use crate::structure::StructureSpace;

/// State of the full-rank flow at one accepted step.
#[derive(Clone, Debug)]
pub struct FullFlowState<T> {
    /// Structured perturbation direction, ||E||_F = 1, E in S.
    pub e: ComplexMatrix<T>,
    pub triplet: Eigentriplet<T>,
    pub f: T,
    /// Pseudo-time.
    pub t: T,
}

/// Result of a full-flow minimization run.
#[derive(Clone, Debug)]
pub struct FlowResult<T> {
    pub e_star: ComplexMatrix<T>,
    pub f_star: T,
    pub triplet: Eigentriplet<T>,
    pub trace: Trace<T>,
    pub n_eig: usize,
    pub status: Status,
    /// Residual of the stationarity certificate at the final iterate.
    pub stationarity: Option<T>,
    /// Accepted functional values were nonincreasing.
    pub monotone: bool,
}

fn eval_state<T: Real>(
    a: &ComplexMatrix<T>,
    eps: T,
    _s: &StructureSpace<T>,
    obj: &Objective<T>,
    engine: &EigEngine<T>,
    e: ComplexMatrix<T>,
    t: T,
) -> Result<FullFlowState<T>> {
    let pert = Perturbation::Matrix(e.clone());
    let triplet = engine.eigentriplet(a, eps, &pert, obj.selector)?;
    let f = obj.f_value(triplet.lambda);
    Ok(FullFlowState { e, triplet, f, t })
}

/// Normalizes a structured matrix to unit Frobenius norm inside S.
fn reproject_normalize<T: Real>(
    s: &StructureSpace<T>,
    m: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    let p = s.project(m)?;
    let n = p.frobenius_norm();
    if n <= T::epsilon() {
        return Err(Error::StructureDegeneracy {
            norm: n.to_f64().unwrap_or(0.0),
        });
    }
    Ok(p.scale(c_re(T::one() / n)))
}

/// One explicit Euler step of the gradient system with reprojection and
/// renormalization: E+ = normalize(Pi^S(E + h (-G^S + Re<G^S, E> E))).
/// A stationary state (E a real multiple of G^S) is returned unchanged.
pub fn full_flow_step<T: Real>(
    a: &ComplexMatrix<T>,
    eps: T,
    s: &StructureSpace<T>,
    obj: &Objective<T>,
    engine: &EigEngine<T>,
    state: &FullFlowState<T>,
    h: T,
) -> Result<FullFlowState<T>> {
    if h == T::zero() {
        return Ok(state.clone());
    }
    let fg = free_gradient(obj, state.triplet.clone());
    let g_s = fg.project(s)?.to_matrix();
    let ip = re_inner(&g_s, &state.e)?;
    // dE = -G^S + Re<G^S, E> E
    let de = g_s
        .scale(c_re(-T::one()))
        .add_scaled(c_re(ip), &state.e)?;
    let floor = T::epsilon() * crate::scalar::cast::<T>(16.0) * g_s.frobenius_norm().max(T::one());
    if de.frobenius_norm() <= floor {
        return Ok(state.clone());
    }
    let e_new = reproject_normalize(s, &state.e.add_scaled(c_re(h), &de)?)?;
    eval_state(a, eps, s, obj, engine, e_new, state.t + h)
}

/// Default initial direction: the normalized negative structured free
/// gradient of the unperturbed matrix.
pub fn default_initial_direction<T: Real>(
    a: &ComplexMatrix<T>,
    s: &StructureSpace<T>,
    obj: &Objective<T>,
    engine: &EigEngine<T>,
) -> Result<(ComplexMatrix<T>, bool)> {
    let trip0 = engine.eigentriplet_matrix(a, obj.selector)?;
    let fg0 = free_gradient(obj, trip0);
    if fg0.degenerate {
        return Err(Error::InvalidProblem(
            "free gradient of the unperturbed matrix vanishes".into(),
        ));
    }
    let g_s = fg0.project(s)?.to_matrix();
    let n = g_s.frobenius_norm();
    if n <= T::epsilon() {
        return Err(Error::StructureDegeneracy {
            norm: n.to_f64().unwrap_or(0.0),
        });
    }
    Ok((g_s.scale(c_re(-T::one() / n)), fg0.triplet.gap_warning))
}

/// Minimizes F_eps over { E in S : ||E||_F = 1 } by the variable-step Euler
/// method on the constrained gradient flow.
pub fn full_flow_minimize<T: Real>(
    a: &ComplexMatrix<T>,
    eps: T,
    s: &StructureSpace<T>,
    obj: &Objective<T>,
    config: &SolverConfig<T>,
    engine: &EigEngine<T>,
    e0_override: Option<ComplexMatrix<T>>,
) -> Result<FlowResult<T>> {
    config.validate()?;
    let n_eig0 = engine.n_eig();
    let mut trace = Trace::new();

    if eps == T::zero() {
        let triplet = engine.eigentriplet_matrix(a, obj.selector)?;
        let f = obj.f_value(triplet.lambda);
        trace.rows.push(TraceRow {
            k: 0,
            t: T::zero(),
            lambda: triplet.lambda,
            f,
            h: T::zero(),
            g: T::zero(),
            accepted: true,
        });
        let n = a.nrows();
        return Ok(FlowResult {
            e_star: ComplexMatrix::Sparse(crate::linalg::Sparse::zeros(n, n)),
            f_star: f,
            triplet,
            trace,
            n_eig: engine.n_eig() - n_eig0,
            status: Status::Converged,
            stationarity: None,
            monotone: true,
        });
    }

    let e0 = match e0_override {
        Some(e) => reproject_normalize(s, &e)?,
        None => default_initial_direction(a, s, obj, engine)?.0,
    };
    let mut state = eval_state(a, eps, s, obj, engine, e0, T::zero())?;
    let mut h_k = config.h0;
    let mut stall = StallTracker::default();
    let mut status = Status::MaxIterations;
    let mut monotone = true;
    let mut last_cert: Option<T> = None;

    trace.rows.push(TraceRow {
        k: 0,
        t: T::zero(),
        lambda: state.triplet.lambda,
        f: state.f,
        h: h_k,
        g: T::zero(),
        accepted: true,
    });

    for k in 1..=config.max_iter {
        let fg = free_gradient(obj, state.triplet.clone());
        if fg.degenerate {
            status = Status::DegenerateObjective;
            break;
        }
        let g_s_rep = fg.project(s)?;
        let g_s = g_s_rep.to_matrix();
        let e_rep = Perturbation::Matrix(state.e.clone());
        let cert = stationarity_residual(&e_rep, &g_s_rep);
        last_cert = cert;
        let g_k = slope_g_full(&state.e, &g_s, fg.triplet.kappa, eps)?;

        if cert.map_or(false, |c| c <= config.tol_stat)
            && (stall.stalled() || g_k.abs() <= config.tol_f * (T::one() + state.f.abs()))
        {
            status = Status::Converged;
            break;
        }

        let ip = re_inner(&g_s, &state.e)?;
        let de = g_s.scale(c_re(-T::one())).add_scaled(c_re(ip), &state.e)?;
        let de_norm = de.frobenius_norm();
        let floor = T::epsilon() * crate::scalar::cast::<T>(64.0) * g_s.frobenius_norm().max(T::one());
        if de_norm <= floor {
            status = if cert.map_or(false, |c| c <= config.tol_stat) {
                Status::Converged
            } else {
                Status::Stalled
            };
            break;
        }

        let f_k = state.f;
        let t_k = state.t;
        let search = line_search(f_k, g_k, h_k, config.theta, config.min_h, k, |h| {
            let e_new = reproject_normalize(s, &state.e.add_scaled(c_re(h), &de)?)?;
            let trial = eval_state(a, eps, s, obj, engine, e_new, t_k + h)?;
            trace.rows.push(TraceRow {
                k,
                t: t_k,
                lambda: trial.triplet.lambda,
                f: trial.f,
                h,
                g: g_k,
                accepted: false,
            });
            Ok((trial.f, trial))
        });
        let step = match search {
            Ok(step) => step,
            Err(Error::StalledStep { .. }) => {
                status = if cert.map_or(false, |c| c <= config.tol_stat) {
                    Status::Converged
                } else {
                    Status::Stalled
                };
                break;
            }
            Err(e) => return Err(e),
        };
        // Flip the last recorded trial row to accepted.
        if let Some(row) = trace.rows.last_mut() {
            row.accepted = true;
            row.t = t_k + step.h_used;
        }
        if step.f_new > f_k {
            monotone = false;
        }
        stall.update(f_k, step.f_new, config.tol_f);
        state = step.state;
        h_k = step.h_next;
        if k == config.max_iter {
            status = Status::MaxIterations;
        }
    }

    Ok(FlowResult {
        f_star: state.f,
        e_star: state.e.clone(),
        triplet: state.triplet,
        trace,
        n_eig: engine.n_eig() - n_eig0,
        status,
        stationarity: last_cert,
        monotone,
    })
}
