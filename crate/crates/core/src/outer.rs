//! Two-level method for structured matrix nearness problems: the inner
//! iteration minimizes the eigenvalue functional at fixed perturbation size
//! eps, the outer iteration finds the smallest eps with
//! phi(eps) = F_eps(E(eps)) equal to the target level r by a bracketed
//! Newton/bisection scheme on the derivative formula
//! phi'(eps) = -||Pi^S G||_F / (x* y).

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, EigEngine, Eigentriplet};
use crate::objective::{free_gradient, Objective};
use crate::rank1::{inner_minimize, InnerResult};
use crate::scalar::{cast, tol, Real};
use crate::solver::SolverConfig;
use crate::structure::StructureSpace;

/// A nearness problem: find the smallest eps > 0 with phi(eps) <= r.
#[derive(Clone, Debug)]
pub struct NearnessProblem<'a, T> {
    pub a: &'a ComplexMatrix<T>,
    pub s: &'a StructureSpace<T>,
    pub obj: Objective<T>,
    /// Target level; f(lambda(A)) must exceed it.
    pub r: T,
    /// Initial guess for the growth phase.
    pub eps0: T,
    /// Optional bracket [eps_lo, eps_hi] with phi(lo) > r >= phi(hi).
    pub bracket: Option<(T, T)>,
}

#[derive(Clone, Debug)]
pub struct OuterConfig<T> {
    /// |phi - r| <= tol_r * (1 + |r|) stops the iteration.
    pub tol_r: T,
    /// Relative bracket-width stopping tolerance.
    pub tol_eps: T,
    /// Growth phase gives up at eps0 * eps_max_factor.
    pub eps_max_factor: T,
    pub max_outer: usize,
    /// Reuse the previous optimizer's factors as the next warm start.
    pub warm_start: bool,
    pub inner: SolverConfig<T>,
}

impl<T: Real> Default for OuterConfig<T> {
    fn default() -> Self {
        OuterConfig {
            tol_r: tol(1e-9, 64.0),
            tol_eps: tol(1e-8, 64.0),
            eps_max_factor: cast(1e3),
            max_outer: 40,
            warm_start: true,
            inner: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OuterStepKind {
    /// Supplied bracket endpoint evaluation.
    Init,
    /// Geometric growth eps <- 2 eps while phi > r.
    Growth,
    Newton,
    Bisection,
}

impl OuterStepKind {
    pub fn name(self) -> &'static str {
        match self {
            OuterStepKind::Init => "init",
            OuterStepKind::Growth => "growth",
            OuterStepKind::Newton => "newton",
            OuterStepKind::Bisection => "bisection",
        }
    }
}

/// One outer evaluation.
#[derive(Clone, Debug)]
pub struct OuterRow<T> {
    pub k: usize,
    pub eps: T,
    pub phi: T,
    pub dphi: Option<T>,
    /// Eigentriplet evaluations spent by the inner solve at this eps.
    pub n_eig: usize,
    pub step: OuterStepKind,
}

#[derive(Clone, Debug, Default)]
pub struct OuterTrace<T> {
    pub rows: Vec<OuterRow<T>>,
}

/// phi evaluated at one eps, with the inner solve attached.
#[derive(Clone, Debug)]
pub struct PhiEval<T> {
    pub eps: T,
    pub value: T,
    pub dphi: T,
    pub inner: InnerResult<T>,
}

/// phi'(eps) = -||Pi^S G_eps(E(eps))||_F kappa at the inner optimizer.
pub fn phi_derivative<T: Real>(
    s: &StructureSpace<T>,
    obj: &Objective<T>,
    triplet: &Eigentriplet<T>,
) -> Result<T> {
    let fg = free_gradient(obj, triplet.clone());
    if fg.degenerate {
        return Ok(T::zero());
    }
    let g_s = fg.project(s)?;
    Ok(-g_s.frobenius_norm() * triplet.kappa)
}

/// Runs the inner minimization at `eps` and packages phi and phi'.
pub fn phi<T: Real>(
    problem: &NearnessProblem<'_, T>,
    eps: T,
    config: &OuterConfig<T>,
    engine: &EigEngine<T>,
    warm: Option<(&[crate::scalar::C<T>], &[crate::scalar::C<T>])>,
) -> Result<PhiEval<T>> {
    if eps < T::zero() {
        return Err(Error::InvalidProblem("phi needs eps >= 0".into()));
    }
    let inner = inner_minimize(
        problem.a,
        eps,
        problem.s,
        &problem.obj,
        &config.inner,
        engine,
        warm,
    )
    .map_err(|e| match e {
        Error::InvalidProblem(msg) => Error::InvalidProblem(format!("at eps = {eps}: {msg}")),
        other => other,
    })?;
    let dphi = phi_derivative(problem.s, &problem.obj, &inner.triplet)?;
    Ok(PhiEval {
        eps,
        value: inner.f_star,
        dphi,
        inner,
    })
}

/// Result of the outer iteration.
#[derive(Clone, Debug)]
pub struct OuterResult<T> {
    pub eps_star: T,
    pub phi_at_star: T,
    /// Inner solve at eps_star.
    pub inner: InnerResult<T>,
    pub trace: OuterTrace<T>,
    pub n_eig_total: usize,
    pub converged: bool,
}

/// Finds the smallest eps with phi(eps) = r by bracketed Newton/bisection.
///
/// Newton steps are only taken from the left endpoint (phi > r), where phi
/// is smooth; evaluations with phi <= r merely tighten the right endpoint.
pub fn find_epsilon_star<T: Real>(
    problem: &NearnessProblem<'_, T>,
    config: &OuterConfig<T>,
    engine: &EigEngine<T>,
) -> Result<OuterResult<T>> {
    let n_eig0 = engine.n_eig();
    let mut trace = OuterTrace::default();
    let r = problem.r;
    let tol_r = config.tol_r * (T::one() + r.abs());

    // Well-posedness at eps = 0.
    let trip_a = engine.eigentriplet_matrix(problem.a, problem.obj.selector)?;
    let f0 = problem.obj.f_value(trip_a.lambda);
    if f0 <= r {
        return Err(Error::InvalidProblem(format!(
            "f(lambda(A)) = {f0} does not exceed the target level r = {r}"
        )));
    }

    let mut k = 0usize;
    let mut warm_factors: Option<(Vec<crate::scalar::C<T>>, Vec<crate::scalar::C<T>>)> = None;

    let eval_at = |eps: T,
                       step: OuterStepKind,
                       k: &mut usize,
                       trace: &mut OuterTrace<T>,
                       warm_factors: &mut Option<(Vec<crate::scalar::C<T>>, Vec<crate::scalar::C<T>>)>|
     -> Result<PhiEval<T>> {
        let warm = if config.warm_start {
            warm_factors.as_ref().map(|(u, v)| (u.as_slice(), v.as_slice()))
        } else {
            None
        };
        let eval = phi(problem, eps, config, engine, warm)?;
        trace.rows.push(OuterRow {
            k: *k,
            eps,
            phi: eval.value,
            dphi: Some(eval.dphi),
            n_eig: eval.inner.n_eig,
            step,
        });
        *k += 1;
        if config.warm_start {
            *warm_factors = Some((eval.inner.pert.u.clone(), eval.inner.pert.v.clone()));
        }
        Ok(eval)
    };

    // Establish the bracket.
    let mut lo = T::zero();
    let mut phi_lo = f0;
    // phi'(0) from the unperturbed triplet (eq. for the derivative applies
    // with E(0) the initial descent direction).
    let mut dphi_lo = phi_derivative(problem.s, &problem.obj, &trip_a)?;
    let mut hi;
    let mut hi_eval: PhiEval<T>;

    // For functionals bounded below by r (distance to singularity), phi
    // never goes strictly below the target, so "crossed" means within tol_r.
    let crossed = |val: T| val <= r + tol_r;

    match problem.bracket {
        Some((lo0, hi0)) => {
            if lo0 > T::zero() {
                let e = eval_at(lo0, OuterStepKind::Init, &mut k, &mut trace, &mut warm_factors)?;
                if crossed(e.value) {
                    return Err(Error::InvalidProblem(format!(
                        "bracket left endpoint eps = {lo0} has phi = {} <= r",
                        e.value
                    )));
                }
                lo = lo0;
                phi_lo = e.value;
                dphi_lo = e.dphi;
            }
            let e = eval_at(hi0, OuterStepKind::Init, &mut k, &mut trace, &mut warm_factors)?;
            if !crossed(e.value) {
                return Err(Error::InvalidProblem(format!(
                    "bracket right endpoint eps = {hi0} has phi = {} > r",
                    e.value
                )));
            }
            hi = hi0;
            hi_eval = e;
        }
        None => {
            let eps_max = problem.eps0 * config.eps_max_factor;
            let mut eps = problem.eps0;
            loop {
                let e = eval_at(eps, OuterStepKind::Growth, &mut k, &mut trace, &mut warm_factors)?;
                if crossed(e.value) {
                    hi = eps;
                    hi_eval = e;
                    break;
                }
                lo = eps;
                phi_lo = e.value;
                dphi_lo = e.dphi;
                let next = eps * cast::<T>(2.0);
                if next > eps_max {
                    return Err(Error::NoCrossing {
                        eps_max: eps_max.to_f64().unwrap_or(0.0),
                        phi: e.value.to_f64().unwrap_or(0.0),
                        r: r.to_f64().unwrap_or(0.0),
                    });
                }
                eps = next;
            }
        }
    }

    // Newton/bisection refinement. Newton steps launch only from the left
    // endpoint (phi > r), the smooth side; a Newton iterate hitting the
    // target level is accepted as eps_star since it approaches from below.
    let mut converged = false;
    while k < config.max_outer {
        if hi - lo <= config.tol_eps * hi.max(T::min_positive_value()) {
            converged = true;
            break;
        }
        let mut eps_next = T::nan();
        let mut kind = OuterStepKind::Bisection;
        if dphi_lo < -T::epsilon() {
            let newton = lo - (phi_lo - r) / dphi_lo;
            if newton > lo && newton < hi {
                eps_next = newton;
                kind = OuterStepKind::Newton;
            }
        }
        if !eps_next.is_finite() {
            eps_next = (lo + hi) * cast::<T>(0.5);
        }
        let e = eval_at(eps_next, kind, &mut k, &mut trace, &mut warm_factors)?;
        if kind == OuterStepKind::Newton && (e.value - r).abs() <= tol_r {
            hi = eps_next;
            hi_eval = e;
            converged = true;
            break;
        }
        if crossed(e.value) {
            hi = eps_next;
            hi_eval = e;
        } else {
            lo = eps_next;
            phi_lo = e.value;
            dphi_lo = e.dphi;
        }
    }

    let n_eig_total = engine.n_eig() - n_eig0;
    Ok(OuterResult {
        eps_star: hi,
        phi_at_star: hi_eval.value,
        inner: hi_eval.inner,
        trace,
        n_eig_total,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{Rng64};
    use crate::linalg::TargetSelector;
    use crate::objective::ObjectiveKind;
    use crate::scalar::C;
    use crate::structure::FieldKind;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    fn hurwitz_sparse(n: usize, seed: u64) -> (ComplexMatrix<f64>, StructureSpace<f64>) {
        let mut rng = Rng64::seeded(seed);
        let s = crate::linalg::random::sparse_real::<f64>(n, 3.0 / n as f64, &mut rng);
        let mut entries = s.entries().to_vec();
        let mut missing = Vec::new();
        for i in 0..n {
            let shift = c(-1.2 - rng.uniform(), 0.0);
            match entries.binary_search_by_key(&(i, i), |&(r, c, _)| (r, c)) {
                Ok(p) => entries[p].2 += shift,
                Err(_) => missing.push((i, i, shift)),
            }
        }
        entries.extend(missing);
        let sp = crate::linalg::Sparse::from_triplets(n, n, entries).unwrap();
        let pat: Vec<(usize, usize)> = sp.entries().iter().map(|&(i, j, _)| (i, j)).collect();
        let st = StructureSpace::sparsity_pattern(n, pat, FieldKind::RealLinear).unwrap();
        (ComplexMatrix::Sparse(sp), st)
    }

    fn dist2inst_obj() -> Objective<f64> {
        Objective::new(ObjectiveKind::NegRealPart, TargetSelector::Rightmost)
    }

    #[test]
    fn phi_approaches_unperturbed_value_as_eps_vanishes() {
        let (a, s) = hurwitz_sparse(8, 3);
        let obj = dist2inst_obj();
        let eng = EigEngine::default();
        let cfg = OuterConfig::default();
        let problem = NearnessProblem {
            a: &a,
            s: &s,
            obj,
            r: 0.0,
            eps0: 0.1,
            bracket: None,
        };
        let trip = eng.eigentriplet_matrix(&a, obj.selector).unwrap();
        let f0 = obj.f_value(trip.lambda);
        let e = phi(&problem, 1e-7, &cfg, &eng, None).unwrap();
        assert!((e.value - f0).abs() < 1e-5, "phi(1e-7) = {} vs f0 = {f0}", e.value);
    }

    #[test]
    fn phi_is_monotone_nonincreasing_sample() {
        let (a, s) = hurwitz_sparse(10, 5);
        let obj = dist2inst_obj();
        let eng = EigEngine::default();
        let cfg = OuterConfig::default();
        let problem = NearnessProblem {
            a: &a,
            s: &s,
            obj,
            r: 0.0,
            eps0: 0.1,
            bracket: None,
        };
        let mut last = f64::INFINITY;
        for eps in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let e = phi(&problem, eps, &cfg, &eng, None).unwrap();
            assert!(
                e.value <= last + 1e-7,
                "phi({eps}) = {} above phi at smaller eps {last}",
                e.value
            );
            last = e.value;
        }
    }

    #[test]
    fn phi_derivative_trivial_cases() {
        // Pi^S G = 0 gives zero derivative.
        let s0 = StructureSpace::sparsity_pattern(2, vec![(1, 0)], FieldKind::RealLinear).unwrap();
        let obj = dist2inst_obj();
        let trip = Eigentriplet {
            lambda: c(-1.0, 0.0),
            x: vec![c(1.0, 0.0), c(0.0, 0.0)],
            y: vec![c(1.0, 0.0), c(0.0, 0.0)],
            kappa: 1.0,
            gap_warning: false,
        };
        // G = -x y* supported on (0,0); the pattern keeps only (1,0).
        let d = phi_derivative(&s0, &obj, &trip).unwrap();
        assert_eq!(d, 0.0);
        // Full complex structure: -||x y*|| kappa = -kappa.
        let s1 = StructureSpace::full(2, FieldKind::ComplexLinear);
        let trip2 = Eigentriplet {
            kappa: 2.5,
            ..trip
        };
        let d = phi_derivative(&s1, &obj, &trip2).unwrap();
        assert!((d + 2.5).abs() < 1e-14);
    }

    #[test]
    fn phi_derivative_matches_finite_differences() {
        let (a, s) = hurwitz_sparse(8, 11);
        let obj = dist2inst_obj();
        let eng = EigEngine::default();
        let mut cfg = OuterConfig::default();
        cfg.inner.tol_f = 1e-13;
        cfg.inner.tol_stat = 1e-10;
        cfg.inner.max_iter = 4000;
        let problem = NearnessProblem {
            a: &a,
            s: &s,
            obj,
            r: 0.0,
            eps0: 0.1,
            bracket: None,
        };
        let eps = 0.35;
        let mid = phi(&problem, eps, &cfg, &eng, None).unwrap();
        let d = 1e-5;
        let up = phi(&problem, eps + d, &cfg, &eng, Some((&mid.inner.pert.u, &mid.inner.pert.v)))
            .unwrap();
        let dn = phi(&problem, eps - d, &cfg, &eng, Some((&mid.inner.pert.u, &mid.inner.pert.v)))
            .unwrap();
        let fd = (up.value - dn.value) / (2.0 * d);
        assert!(
            (fd - mid.dphi).abs() <= 1e-4 * (1.0 + mid.dphi.abs()),
            "fd {fd} vs analytic {}",
            mid.dphi
        );
        assert!(mid.dphi <= 0.0);
    }

    #[test]
    fn find_epsilon_star_self_consistency() {
        // Choose r = phi(eps_hat); the outer iteration must return eps_hat.
        let (a, s) = hurwitz_sparse(8, 17);
        let obj = dist2inst_obj();
        let eng = EigEngine::default();
        let cfg = OuterConfig::default();
        let problem0 = NearnessProblem {
            a: &a,
            s: &s,
            obj,
            r: 0.0,
            eps0: 0.1,
            bracket: None,
        };
        let eps_hat = 0.4;
        let at = phi(&problem0, eps_hat, &cfg, &eng, None).unwrap();
        let problem = NearnessProblem {
            r: at.value,
            ..problem0
        };
        let res = find_epsilon_star(&problem, &cfg, &eng).unwrap();
        assert!(res.converged);
        assert!(
            (res.eps_star - eps_hat).abs() <= 1e-4 * eps_hat,
            "eps* = {} vs {eps_hat}",
            res.eps_star
        );
    }

    #[test]
    fn distance_to_instability_small_instance() {
        let (a, s) = hurwitz_sparse(12, 23);
        let obj = dist2inst_obj();
        let eng = EigEngine::default();
        let cfg = OuterConfig::default();
        let problem = NearnessProblem {
            a: &a,
            s: &s,
            obj,
            r: 0.0,
            eps0: 0.5,
            bracket: None,
        };
        let res = find_epsilon_star(&problem, &cfg, &eng).unwrap();
        assert!(res.converged);
        // At the distance, the perturbed spectral abscissa vanishes.
        assert!(
            res.inner.triplet.lambda.re.abs() <= 1e-7,
            "alpha(A + eps* E*) = {}",
            res.inner.triplet.lambda.re
        );
        // Bracket invariant: every recorded row is consistent.
        for row in &res.trace.rows {
            assert!(row.eps > 0.0);
            assert!(row.n_eig > 0);
        }
        // The trace must contain at least one Newton step.
        assert!(res
            .trace
            .rows
            .iter()
            .any(|r| r.step == OuterStepKind::Newton));
    }

    #[test]
    fn distance_to_singularity_exceeds_sigma_min() {
        // Unstructured lower bound: eps* >= sigma_min(A).
        let mut rng = Rng64::seeded(29);
        let n = 6;
        let mut d = crate::linalg::random::dense_real::<f64>(n, n, &mut rng);
        for i in 0..n {
            d[(i, i)] = d[(i, i)] + c(3.0, 0.0); // keep it comfortably nonsingular
        }
        let pat: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .collect();
        let s = StructureSpace::sparsity_pattern(n, pat, FieldKind::RealLinear).unwrap();
        let a = ComplexMatrix::Dense(d.clone());
        let obj = Objective::new(
            ObjectiveKind::ModulusSquared,
            TargetSelector::SmallestModulus,
        );
        let eng = EigEngine::default();
        let mut cfg = OuterConfig::default();
        cfg.tol_r = 1e-13;
        cfg.inner.tol_f = 1e-13;
        let problem = NearnessProblem {
            a: &a,
            s: &s,
            obj,
            r: 0.0,
            eps0: 1.0,
            bracket: None,
        };
        let res = find_epsilon_star(&problem, &cfg, &eng).unwrap();
        assert!(res.converged);
        // sigma_min via the Hermitian eigenproblem on A* A.
        let ata = d.adjoint().matmul(&d);
        let t = eng
            .eigentriplet_matrix(&ComplexMatrix::Dense(ata), TargetSelector::SmallestModulus)
            .unwrap();
        let sigma_min = t.lambda.re.max(0.0).sqrt();
        assert!(
            res.eps_star >= sigma_min - 1e-6,
            "eps* = {} below sigma_min = {sigma_min}",
            res.eps_star
        );
        // For the full real pattern the structured distance to singularity
        // coincides with sigma_min (rank-1 real SVD perturbation).
        assert!(
            (res.eps_star - sigma_min).abs() <= 1e-3 * sigma_min,
            "eps* = {} vs sigma_min = {sigma_min}",
            res.eps_star
        );
        // phi at the solution is (essentially) zero: singular perturbation.
        assert!(res.phi_at_star.abs() <= 1e-7);
    }

    #[test]
    fn growth_phase_reports_no_crossing() {
        // r far below any reachable phi with a tiny eps budget.
        let (a, s) = hurwitz_sparse(6, 37);
        let obj = dist2inst_obj();
        let eng = EigEngine::default();
        let cfg = OuterConfig {
            eps_max_factor: 4.0,
            ..Default::default()
        };
        let problem = NearnessProblem {
            a: &a,
            s: &s,
            obj,
            r: -1e6,
            eps0: 1e-3,
            bracket: None,
        };
        assert!(matches!(
            find_epsilon_star(&problem, &cfg, &eng),
            Err(Error::NoCrossing { .. })
        ));
    }

    #[test]
    fn ill_posed_problem_rejected() {
        let (a, s) = hurwitz_sparse(6, 41);
        let obj = dist2inst_obj();
        let eng = EigEngine::default();
        let cfg = OuterConfig::default();
        // A is Hurwitz so f0 = -alpha(A) > 0; r above f0 is ill-posed.
        let trip = eng.eigentriplet_matrix(&a, obj.selector).unwrap();
        let f0 = obj.f_value(trip.lambda);
        let problem = NearnessProblem {
            a: &a,
            s: &s,
            obj,
            r: f0 + 1.0,
            eps0: 0.1,
            bracket: None,
        };
        assert!(matches!(
            find_epsilon_star(&problem, &cfg, &eng),
            Err(Error::InvalidProblem(_))
        ));
    }
}
