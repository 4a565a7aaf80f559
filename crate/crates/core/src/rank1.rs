//! Rank-1 projected dynamics: the tangent-space projection, the factor
//! differential equations, the splitting integrator (Euler on the
//! non-rotational part, normalization, exact phase rotation) and the
//! adaptive step controller around it. Stationary points of the projected
//! system are fixed points of the discrete scheme.

use crate::error::{Error, Result};
use crate::linalg::matrix::{vdot, vnorm, Dense};
use crate::linalg::{ComplexMatrix, EigEngine, Eigentriplet, Perturbation};
use crate::objective::{free_gradient, slope_g, stationarity_residual, FreeGradient, Objective};
use crate::scalar::{cast, tol, C, Real};
use crate::solver::{line_search, SolverConfig, Status, StallTracker, Trace, TraceRow};
use crate::structure::StructureSpace;

/// Rank-1 perturbation factors: Y = rho u v* with unit u, v and
/// rho = 1 / ||Pi^S(u v*)||_F, so that E = rho Pi^S(u v*) has unit norm.
#[derive(Clone, Debug)]
pub struct Rank1Perturbation<T> {
    pub u: Vec<C<T>>,
    pub v: Vec<C<T>>,
    pub rho: T,
}

impl<T: Real> Rank1Perturbation<T> {
    /// Normalizes the factors, computes rho, and returns the perturbation
    /// together with E = rho Pi^S(u v*) in its efficient representation.
    pub fn from_factors(
        s: &StructureSpace<T>,
        u: &[C<T>],
        v: &[C<T>],
    ) -> Result<(Self, Perturbation<T>)> {
        let nu = vnorm(u);
        let nv = vnorm(v);
        if nu <= T::zero() || nv <= T::zero() {
            return Err(Error::InvalidProblem("zero rank-1 factor".into()));
        }
        let u: Vec<C<T>> = u.iter().map(|z| z / nu).collect();
        let v: Vec<C<T>> = v.iter().map(|z| z / nv).collect();
        let rep = s.project_outer(C::new(T::one(), T::zero()), &u, &v)?;
        let nrm = rep.frobenius_norm();
        if nrm < tol(1e-14, 16.0) {
            return Err(Error::StructureDegeneracy {
                norm: nrm.to_f64().unwrap_or(0.0),
            });
        }
        let rho = T::one() / nrm;
        let e = rep.scale(C::new(rho, T::zero()));
        Ok((Rank1Perturbation { u, v, rho }, e))
    }

    /// E = rho Pi^S(u v*) as a matrix.
    pub fn e_matrix(&self, s: &StructureSpace<T>) -> Result<ComplexMatrix<T>> {
        Ok(s
            .project_outer(C::new(self.rho, T::zero()), &self.u, &self.v)?
            .to_matrix())
    }
}

/// Orthogonal projection onto the tangent space of the rank-1 manifold at
/// Y = rho u v*: P_Y(Z) = u u* Z + Z v v* - u u* Z v v*.
pub fn tangent_project<T: Real>(u: &[C<T>], v: &[C<T>], z: &Dense<T>) -> Dense<T> {
    let n = u.len();
    let one = C::new(T::one(), T::zero());
    let zsu = z.matvec_adj(u); // (Z* u), so u u* Z = outer(u, Z* u)
    let zv = z.matvec(v);
    let uzv = vdot(u, &zv);
    let mut out = Dense::zeros(n, n);
    out.add_outer(one, u, &zsu);
    out.add_outer(one, &zv, v);
    out.add_outer(-uzv, u, v);
    out
}

/// Right-hand sides (rho u', rho v') of the factor differential equations
/// driven by G = gamma x y*:
///   rho u' = alpha conj(beta) gamma u - conj(beta) gamma x
///            - (i/2) Im(alpha conj(beta) gamma) u
///   rho v' = conj(alpha) beta conj(gamma) v - conj(alpha gamma) y
///            - (i/2) Im(conj(alpha) beta conj(gamma)) v
pub fn factor_rhs<T: Real>(
    pert: &Rank1Perturbation<T>,
    triplet: &Eigentriplet<T>,
    gamma: C<T>,
) -> (Vec<C<T>>, Vec<C<T>>) {
    let alpha = vdot(&pert.u, &triplet.x);
    let beta = vdot(&pert.v, &triplet.y);
    let abg = alpha * beta.conj() * gamma;
    let abg_c = abg.conj();
    let half = cast::<T>(0.5);
    let i_half_im_u = C::new(T::zero(), half * abg.im);
    let i_half_im_v = C::new(T::zero(), half * abg_c.im);
    let bg = beta.conj() * gamma;
    let ag_c = (alpha * gamma).conj();
    let du: Vec<C<T>> = pert
        .u
        .iter()
        .zip(&triplet.x)
        .map(|(ui, xi)| abg * *ui - bg * *xi - i_half_im_u * *ui)
        .collect();
    let dv: Vec<C<T>> = pert
        .v
        .iter()
        .zip(&triplet.y)
        .map(|(vi, yi)| abg_c * *vi - ag_c * *yi - i_half_im_v * *vi)
        .collect();
    (du, dv)
}

/// One step of the splitting scheme: Euler on the non-rotational factor
/// system, normalization to unit norm, then the exact rotation
/// u <- exp(i theta h) u, v <- exp(-i theta h) v with
/// theta = -Im(alpha conj(beta) gamma) / (2 rho). Finally rho is recomputed
/// from the structure projection.
pub fn splitting_step<T: Real>(
    s: &StructureSpace<T>,
    pert: &Rank1Perturbation<T>,
    triplet: &Eigentriplet<T>,
    gamma: C<T>,
    h: T,
) -> Result<(Rank1Perturbation<T>, Perturbation<T>)> {
    if h == T::zero() {
        let rep = s.project_outer(C::new(T::one(), T::zero()), &pert.u, &pert.v)?;
        let e = rep.scale(C::new(pert.rho, T::zero()));
        return Ok((pert.clone(), e));
    }
    let alpha = vdot(&pert.u, &triplet.x);
    let beta = vdot(&pert.v, &triplet.y);
    let abg = alpha * beta.conj() * gamma;
    let scale = h / pert.rho;
    let bg = beta.conj() * gamma;
    let ag_c = (alpha * gamma).conj();
    // Euler on the non-rotational part.
    let u_hat: Vec<C<T>> = pert
        .u
        .iter()
        .zip(&triplet.x)
        .map(|(ui, xi)| *ui + (abg * *ui - bg * *xi).scale(scale))
        .collect();
    let v_hat: Vec<C<T>> = pert
        .v
        .iter()
        .zip(&triplet.y)
        .map(|(vi, yi)| *vi + (abg.conj() * *vi - ag_c * *yi).scale(scale))
        .collect();
    // Normalization.
    let nu = vnorm(&u_hat);
    let nv = vnorm(&v_hat);
    if nu <= T::zero() || nv <= T::zero() {
        return Err(Error::InvalidProblem("splitting step annihilated a factor".into()));
    }
    // Exact rotation.
    let theta = -abg.im / (cast::<T>(2.0) * pert.rho);
    let rot = C::from_polar(T::one(), theta * h);
    let rot_c = rot.conj();
    let u_new: Vec<C<T>> = u_hat.iter().map(|z| (*z / nu) * rot).collect();
    let v_new: Vec<C<T>> = v_hat.iter().map(|z| (*z / nv) * rot_c).collect();
    // Recompute rho from the structure projection.
    let rep = s.project_outer(C::new(T::one(), T::zero()), &u_new, &v_new)?;
    let nrm = rep.frobenius_norm();
    if nrm < tol(1e-14, 16.0) {
        return Err(Error::StructureDegeneracy {
            norm: nrm.to_f64().unwrap_or(0.0),
        });
    }
    let rho = T::one() / nrm;
    let e = rep.scale(C::new(rho, T::zero()));
    Ok((Rank1Perturbation { u: u_new, v: v_new, rho }, e))
}

/// The per-step scalars of the discrete scheme.
#[derive(Clone, Debug)]
pub struct StepQuantities<T> {
    /// u* x.
    pub alpha: C<T>,
    /// v* y.
    pub beta: C<T>,
    /// 2 f_lbar.
    pub gamma: C<T>,
    /// Slope of the functional along the projected flow.
    pub g: T,
    pub f: T,
    /// Step size accepted for this step.
    pub h: T,
}

/// State of the rank-1 iteration at one accepted step.
#[derive(Clone, Debug)]
pub struct InnerState<T> {
    pub pert: Rank1Perturbation<T>,
    /// E = rho Pi^S(u v*), unit Frobenius norm.
    pub e: Perturbation<T>,
    pub triplet: Eigentriplet<T>,
    pub f: T,
    pub t: T,
    /// Step-size proposal for the next step.
    pub h: T,
}

/// Result of an inner minimization run.
#[derive(Clone, Debug)]
pub struct InnerResult<T> {
    pub e_star: ComplexMatrix<T>,
    pub f_star: T,
    pub pert: Rank1Perturbation<T>,
    pub triplet: Eigentriplet<T>,
    pub trace: Trace<T>,
    pub n_eig: usize,
    pub status: Status,
    /// || E - sign G^S/||G^S|| ||_F at the final iterate.
    pub stationarity: Option<T>,
    /// ||P_Y G - G|| / ||G|| at the final iterate.
    pub tangent_residual: Option<T>,
    pub monotone: bool,
}

fn eval_factors<T: Real>(
    a: &ComplexMatrix<T>,
    eps: T,
    _s: &StructureSpace<T>,
    obj: &Objective<T>,
    engine: &EigEngine<T>,
    pert: Rank1Perturbation<T>,
    e: Perturbation<T>,
    t: T,
    h: T,
) -> Result<InnerState<T>> {
    let triplet = engine.eigentriplet(a, eps, &e, obj.selector)?;
    let f = obj.f_value(triplet.lambda);
    Ok(InnerState {
        pert,
        e,
        triplet,
        f,
        t,
        h,
    })
}

/// ||P_Y G - G|| / ||G|| = ||x - alpha u|| ||y - beta v|| for unit factors.
fn tangent_residual<T: Real>(pert: &Rank1Perturbation<T>, fg: &FreeGradient<T>) -> Option<T> {
    if fg.degenerate {
        return None;
    }
    let alpha = vdot(&pert.u, &fg.triplet.x);
    let beta = vdot(&pert.v, &fg.triplet.y);
    let dx: Vec<C<T>> = fg
        .triplet
        .x
        .iter()
        .zip(&pert.u)
        .map(|(xi, ui)| *xi - alpha * *ui)
        .collect();
    let dy: Vec<C<T>> = fg
        .triplet
        .y
        .iter()
        .zip(&pert.v)
        .map(|(yi, vi)| *yi - beta * *vi)
        .collect();
    Some(vnorm(&dx) * vnorm(&dy))
}

/// Snaps factors to the real axis when the structure is real-linear and the
/// target eigenvalue is (numerically) real; the imaginary parts are then
/// pure roundoff and zeroing them keeps the iteration exactly real.
fn realify_if_applicable<T: Real>(
    s: &StructureSpace<T>,
    lambda: C<T>,
    u: &mut [C<T>],
    v: &mut [C<T>],
) {
    if !s.field().is_real() {
        return;
    }
    let lam_tol = tol::<T>(1e-12, 64.0) * (T::one() + lambda.norm());
    if lambda.im.abs() > lam_tol {
        return;
    }
    let imag_tol = tol::<T>(1e-12, 64.0);
    let max_im = u
        .iter()
        .chain(v.iter())
        .fold(T::zero(), |m, z| m.max(z.im.abs()));
    if max_im > imag_tol {
        return;
    }
    for z in u.iter_mut().chain(v.iter_mut()) {
        *z = C::new(z.re, T::zero());
    }
}

/// One step of the adaptive splitting scheme: computes the step scalars,
/// runs the trial loop (halving h by theta until acceptance), applies the
/// post-acceptance step-size update, and returns the new state.
///
/// Trial evaluations are appended to `trace` when provided; the final
/// (accepted) row is flagged.
pub fn inner_step<T: Real>(
    a: &ComplexMatrix<T>,
    eps: T,
    s: &StructureSpace<T>,
    obj: &Objective<T>,
    engine: &EigEngine<T>,
    config: &SolverConfig<T>,
    state: &InnerState<T>,
    k: usize,
    mut trace: Option<&mut Trace<T>>,
) -> Result<(InnerState<T>, StepQuantities<T>)> {
    let fg = free_gradient(obj, state.triplet.clone());
    let gamma = fg.gamma;
    let alpha = vdot(&state.pert.u, &fg.triplet.x);
    let beta = vdot(&state.pert.v, &fg.triplet.y);
    let g_k = slope_g(s, &state.e, &state.pert.u, &state.pert.v, &fg, eps)?;
    let f_k = state.f;
    let t_k = state.t;

    let step = line_search(f_k, g_k, state.h, config.theta, config.min_h, k, |h| {
        let (mut pert_h, e_h) = splitting_step(s, &state.pert, &fg.triplet, gamma, h)?;
        let mut trial = eval_factors(a, eps, s, obj, engine, pert_h.clone(), e_h, t_k + h, h)?;
        realify_if_applicable(
            s,
            trial.triplet.lambda,
            &mut pert_h.u,
            &mut pert_h.v,
        );
        trial.pert = pert_h;
        if let Some(tr) = trace.as_deref_mut() {
            tr.rows.push(TraceRow {
                k,
                t: t_k,
                lambda: trial.triplet.lambda,
                f: trial.f,
                h,
                g: g_k,
                accepted: false,
            });
        }
        Ok((trial.f, trial))
    })?;

    let mut new_state = step.state;
    new_state.t = t_k + step.h_used;
    new_state.h = step.h_next;
    if let Some(tr) = trace.as_deref_mut() {
        if let Some(row) = tr.rows.last_mut() {
            row.accepted = true;
            row.t = new_state.t;
        }
    }
    let q = StepQuantities {
        alpha,
        beta,
        gamma,
        g: g_k,
        f: step.f_new,
        h: step.h_used,
    };
    Ok((new_state, q))
}

/// Initial factors from the negative free gradient of the unperturbed
/// matrix: u0 = -(gamma0/|gamma0|) x0, v0 = y0.
pub fn default_initial_factors<T: Real>(
    a: &ComplexMatrix<T>,
    obj: &Objective<T>,
    engine: &EigEngine<T>,
) -> Result<(Vec<C<T>>, Vec<C<T>>)> {
    let trip0 = engine.eigentriplet_matrix(a, obj.selector)?;
    let fg0 = free_gradient(obj, trip0);
    if fg0.degenerate {
        return Err(Error::InvalidProblem(
            "free gradient of the unperturbed matrix vanishes (degenerate objective)".into(),
        ));
    }
    let phase = fg0.gamma / fg0.gamma.norm();
    let u0: Vec<C<T>> = fg0.triplet.x.iter().map(|z| -(phase * *z)).collect();
    let v0 = fg0.triplet.y.clone();
    Ok((u0, v0))
}

/// Minimizes F_eps over structured unit-norm perturbations along the rank-1
/// projected gradient flow.
pub fn inner_minimize<T: Real>(
    a: &ComplexMatrix<T>,
    eps: T,
    s: &StructureSpace<T>,
    obj: &Objective<T>,
    config: &SolverConfig<T>,
    engine: &EigEngine<T>,
    warm_start: Option<(&[C<T>], &[C<T>])>,
) -> Result<InnerResult<T>> {
    config.validate()?;
    let n_eig0 = engine.n_eig();
    let mut trace = Trace::new();

    if eps == T::zero() {
        // Nothing to optimize: report f at the unperturbed target with the
        // would-be initial perturbation direction, one eigentriplet total.
        let triplet = engine.eigentriplet_matrix(a, obj.selector)?;
        let f = obj.f_value(triplet.lambda);
        let (u0, v0) = match warm_start {
            Some((u, v)) => (u.to_vec(), v.to_vec()),
            None => {
                let fg0 = free_gradient(obj, triplet.clone());
                if fg0.degenerate {
                    return Err(Error::InvalidProblem(
                        "free gradient of the unperturbed matrix vanishes (degenerate objective)"
                            .into(),
                    ));
                }
                let phase = fg0.gamma / fg0.gamma.norm();
                let u0: Vec<C<T>> = fg0.triplet.x.iter().map(|z| -(phase * *z)).collect();
                (u0, fg0.triplet.y.clone())
            }
        };
        let (pert0, e0) = Rank1Perturbation::from_factors(s, &u0, &v0)?;
        trace.rows.push(TraceRow {
            k: 0,
            t: T::zero(),
            lambda: triplet.lambda,
            f,
            h: T::zero(),
            g: T::zero(),
            accepted: true,
        });
        return Ok(InnerResult {
            e_star: e0.to_matrix(),
            f_star: f,
            pert: pert0,
            triplet,
            trace,
            n_eig: engine.n_eig() - n_eig0,
            status: Status::Converged,
            stationarity: None,
            tangent_residual: None,
            monotone: true,
        });
    }

    // Initial factors.
    let (u0, v0) = match warm_start {
        Some((u, v)) => (u.to_vec(), v.to_vec()),
        None => default_initial_factors(a, obj, engine)?,
    };
    let (pert0, e0) = Rank1Perturbation::from_factors(s, &u0, &v0)?;

    let mut state = eval_factors(a, eps, s, obj, engine, pert0, e0, T::zero(), config.h0)?;
    realify_if_applicable(s, state.triplet.lambda, &mut state.pert.u, &mut state.pert.v);
    let mut stall = StallTracker::default();
    let mut status = Status::MaxIterations;
    let mut monotone = true;
    let mut last_cert = None;
    let mut last_tangent = None;

    trace.rows.push(TraceRow {
        k: 0,
        t: T::zero(),
        lambda: state.triplet.lambda,
        f: state.f,
        h: config.h0,
        g: T::zero(),
        accepted: true,
    });
    if config.record_factors {
        trace
            .factors
            .push((state.pert.u.clone(), state.pert.v.clone(), state.pert.rho));
    }

    for k in 1..=config.max_iter {
        let fg = free_gradient(obj, state.triplet.clone());
        if fg.degenerate {
            status = Status::DegenerateObjective;
            break;
        }
        let g_s = fg.project(s)?;
        let cert = stationarity_residual(&state.e, &g_s);
        last_cert = cert;
        last_tangent = tangent_residual(&state.pert, &fg);
        if cert.map_or(false, |c| c <= config.tol_stat) {
            // Accept either a stalled functional or a vanished slope as the
            // second half of the stopping rule.
            if stall.stalled() {
                status = Status::Converged;
                break;
            }
            let g_now = slope_g(s, &state.e, &state.pert.u, &state.pert.v, &fg, eps)?;
            if g_now.abs() <= config.tol_f * (T::one() + state.f.abs()) {
                status = Status::Converged;
                break;
            }
        }

        let f_prev = state.f;
        match inner_step(a, eps, s, obj, engine, config, &state, k, Some(&mut trace)) {
            Ok((new_state, _q)) => {
                if new_state.f > f_prev {
                    monotone = false;
                }
                stall.update(f_prev, new_state.f, config.tol_f);
                state = new_state;
                if config.record_factors {
                    trace.factors.push((
                        state.pert.u.clone(),
                        state.pert.v.clone(),
                        state.pert.rho,
                    ));
                }
            }
            Err(Error::StalledStep { .. }) => {
                status = if cert.map_or(false, |c| c <= config.tol_stat) {
                    Status::Converged
                } else {
                    Status::Stalled
                };
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(InnerResult {
        e_star: state.e.to_matrix(),
        f_star: state.f,
        pert: state.pert,
        triplet: state.triplet,
        trace,
        n_eig: engine.n_eig() - n_eig0,
        status,
        stationarity: last_cert,
        tangent_residual: last_tangent,
        monotone,
    })
}
