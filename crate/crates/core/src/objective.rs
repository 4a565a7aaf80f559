//! The eigenvalue functional f(lambda, conj(lambda)), its Wirtinger
//! derivative, the free gradient G = 2 f_lbar x y*, the structured gradient
//! Pi^S G, the admissible steepest-descent direction, and the slope g that
//! drives the step-size controller.

use crate::error::{Error, Result};
use crate::linalg::matrix::{c_one, re_inner, vdot, Dense};
use crate::linalg::{ComplexMatrix, Eigentriplet, Perturbation, TargetSelector};
use crate::scalar::{cast, tol, C, Real};
use crate::structure::StructureSpace;

/// Closed enumeration of the supported functionals; keeps f_lbar exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObjectiveKind<T> {
    /// f = -Re(lambda); minimizing drives the eigenvalue rightward.
    NegRealPart,
    /// f = Re(lambda).
    RealPart,
    /// f = |lambda|^2.
    ModulusSquared,
    /// f = -|lambda|^2.
    NegModulusSquared,
    /// f = |lambda - z0|^2.
    DistanceToPointSquared(C<T>),
}

impl<T: Real> ObjectiveKind<T> {
    pub fn f_value(&self, lambda: C<T>) -> T {
        match self {
            ObjectiveKind::NegRealPart => -lambda.re,
            ObjectiveKind::RealPart => lambda.re,
            ObjectiveKind::ModulusSquared => lambda.norm_sqr(),
            ObjectiveKind::NegModulusSquared => -lambda.norm_sqr(),
            ObjectiveKind::DistanceToPointSquared(z0) => (lambda - *z0).norm_sqr(),
        }
    }

    /// gamma = 2 * df/d(conj lambda), exact by construction.
    pub fn two_f_lambda_bar(&self, lambda: C<T>) -> C<T> {
        let two = cast::<T>(2.0);
        match self {
            ObjectiveKind::NegRealPart => C::new(-T::one(), T::zero()),
            ObjectiveKind::RealPart => c_one(),
            ObjectiveKind::ModulusSquared => lambda.scale(two),
            ObjectiveKind::NegModulusSquared => -lambda.scale(two),
            ObjectiveKind::DistanceToPointSquared(z0) => (lambda - *z0).scale(two),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::NegRealPart => "neg-real-part",
            ObjectiveKind::RealPart => "real-part",
            ObjectiveKind::ModulusSquared => "modulus-squared",
            ObjectiveKind::NegModulusSquared => "neg-modulus-squared",
            ObjectiveKind::DistanceToPointSquared(_) => "distance-to-point-squared",
        }
    }
}

/// Functional plus the rule that picks the target eigenvalue.
#[derive(Clone, Copy, Debug)]
pub struct Objective<T> {
    pub kind: ObjectiveKind<T>,
    pub selector: TargetSelector<T>,
}

impl<T: Real> Objective<T> {
    pub fn new(kind: ObjectiveKind<T>, selector: TargetSelector<T>) -> Self {
        Objective { kind, selector }
    }

    pub fn f_value(&self, lambda: C<T>) -> T {
        self.kind.f_value(lambda)
    }

    pub fn two_f_lambda_bar(&self, lambda: C<T>) -> C<T> {
        self.kind.two_f_lambda_bar(lambda)
    }
}

/// The rank-1 free gradient G = gamma x y* held in factored form.
#[derive(Clone, Debug)]
pub struct FreeGradient<T> {
    pub gamma: C<T>,
    pub triplet: Eigentriplet<T>,
    /// Set when gamma is numerically zero (e.g. |lambda|^2 at lambda = 0);
    /// the drivers terminate with a degenerate-objective status.
    pub degenerate: bool,
}

/// Free gradient of F_eps at the eigentriplet of the perturbed matrix.
pub fn free_gradient<T: Real>(obj: &Objective<T>, triplet: Eigentriplet<T>) -> FreeGradient<T> {
    let gamma = obj.two_f_lambda_bar(triplet.lambda);
    let degenerate = gamma.norm() <= tol::<T>(1e-14, 4.0) * (T::one() + triplet.lambda.norm());
    FreeGradient {
        gamma,
        triplet,
        degenerate,
    }
}

impl<T: Real> FreeGradient<T> {
    /// ||G||_F = |gamma| for unit eigenvectors.
    pub fn norm(&self) -> T {
        self.gamma.norm()
    }

    pub fn to_dense(&self) -> Dense<T> {
        let n = self.triplet.x.len();
        let mut g = Dense::zeros(n, n);
        g.add_outer(self.gamma, &self.triplet.x, &self.triplet.y);
        g
    }

    /// Structured gradient G^S = Pi^S G.
    pub fn project(&self, s: &StructureSpace<T>) -> Result<Perturbation<T>> {
        s.project_outer(self.gamma, &self.triplet.x, &self.triplet.y)
    }
}

/// Free gradient with its structured projection.
#[derive(Clone, Debug)]
pub struct GradientBundle<T> {
    pub free: FreeGradient<T>,
    pub g_s: Perturbation<T>,
}

pub fn gradient_bundle<T: Real>(
    obj: &Objective<T>,
    s: &StructureSpace<T>,
    triplet: Eigentriplet<T>,
) -> Result<GradientBundle<T>> {
    let free = free_gradient(obj, triplet);
    let g_s = free.project(s)?;
    Ok(GradientBundle { free, g_s })
}

/// Admissible direction of steepest descent on { E in S : ||E||_F = 1 }:
/// Z = (-G^S + Re<G^S, E> E) / mu with mu the norm of the numerator.
///
/// Fails with [`Error::StationaryPoint`] when the numerator vanishes, i.e.
/// E is a real multiple of G^S.
pub fn steepest_direction<T: Real>(
    e: &ComplexMatrix<T>,
    g_s: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    let ip = re_inner(g_s, e)?;
    let w = g_s
        .scale(C::new(-T::one(), T::zero()))
        .add_scaled(C::new(ip, T::zero()), e)?;
    let mu = w.frobenius_norm();
    let floor = tol::<T>(1e-14, 16.0) * g_s.frobenius_norm().max(T::one());
    if mu < floor {
        return Err(Error::StationaryPoint);
    }
    Ok(w.scale(C::new(T::one() / mu, T::zero())))
}

/// Slope of the functional along the rank-1 projected flow:
/// g = eps kappa ( Re<Pi G, Pi P_Y G> - Re<Pi P_Y G, E> Re<Pi G, E> ),
/// so that dF/dt = -g along the projected system.
pub fn slope_g<T: Real>(
    s: &StructureSpace<T>,
    e: &Perturbation<T>,
    u: &[C<T>],
    v: &[C<T>],
    fg: &FreeGradient<T>,
    eps: T,
) -> Result<T> {
    let gamma = fg.gamma;
    let x = &fg.triplet.x;
    let y = &fg.triplet.y;
    let alpha = vdot(u, x);
    let beta = vdot(v, y);
    // P_Y G = gamma ( alpha u y* + conj(beta) x v* - alpha conj(beta) u v* )
    let t1 = s.project_outer(gamma * alpha, u, y)?;
    let t2 = s.project_outer(gamma * beta.conj(), x, v)?;
    let t3 = s.project_outer(gamma * alpha * beta.conj(), u, v)?;
    let one = c_one::<T>();
    let pyg = Perturbation::combine(&[(one, &t1), (one, &t2), (-one, &t3)]);
    let pg = fg.project(s)?;
    let term = pg.re_inner(&pyg) - pyg.re_inner(e) * pg.re_inner(e);
    Ok(eps * fg.triplet.kappa * term)
}

/// Slope for the full-rank gradient flow:
/// g = eps kappa ( ||G^S||^2 - Re<G^S, E>^2 ) >= 0.
pub fn slope_g_full<T: Real>(
    e: &ComplexMatrix<T>,
    g_s: &ComplexMatrix<T>,
    kappa: T,
    eps: T,
) -> Result<T> {
    let gn = g_s.frobenius_norm();
    let ip = re_inner(g_s, e)?;
    Ok(eps * kappa * (gn * gn - ip * ip))
}

/// Residual of the stationarity certificate || E - sign * G^S/||G^S|| ||_F
/// with the sign of Re<G^S, E>. Returns None when G^S is numerically zero.
pub fn stationarity_residual<T: Real>(e: &Perturbation<T>, g_s: &Perturbation<T>) -> Option<T> {
    let gn = g_s.frobenius_norm();
    if gn <= T::epsilon() * cast(16.0) {
        return None;
    }
    let sign = if g_s.re_inner(e) >= T::zero() {
        T::one()
    } else {
        -T::one()
    };
    // ||E - s G/||G||||^2 = ||E||^2 + 1 - 2 s Re<E, G>/||G||
    let e2 = e.re_inner(e);
    let cross = e.re_inner(g_s) / gn;
    let r2 = e2 + T::one() - (T::one() + T::one()) * sign * cross;
    Some(r2.max(T::zero()).sqrt())
}
