//! Scalar abstraction: all numerics are generic over the underlying real
//! floating-point type through this trait, with `f64` as the default in the
//! crate-root type aliases.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`] base type.
pub type C<T> = Complex<T>;

/// Converts an `f64` constant into `T`. Panics only if the constant is not
/// representable, which cannot happen for the literals used in this crate.
#[inline]
pub fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// An f64-calibrated tolerance with a floor of `eps_mult` machine epsilons,
/// so the same nominal tolerance stays meaningful in f32.
#[inline]
pub fn tol<T: Real>(value: f64, eps_mult: f64) -> T {
    cast::<T>(value).max(T::epsilon() * cast(eps_mult))
}

/// |Re z| + |Im z|: the cheap magnitude used in convergence tests.
#[inline]
pub fn abs1<T: Real>(z: C<T>) -> T {
    z.re.abs() + z.im.abs()
}

/// z/|z|, or 1 when z is numerically zero.
#[inline]
pub fn unit_phase<T: Real>(z: C<T>) -> C<T> {
    let n = z.norm();
    if n > T::zero() {
        z / n
    } else {
        C::new(T::one(), T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tol_floors_at_epsilon_multiple() {
        let t32: f32 = tol(1e-12, 64.0);
        assert!(t32 >= 64.0 * f32::EPSILON);
        let t64: f64 = tol(1e-12, 64.0);
        assert_eq!(t64, 1e-12);
    }

    #[test]
    fn unit_phase_of_zero_is_one() {
        let p: C<f64> = unit_phase(C::new(0.0, 0.0));
        assert_eq!(p, C::new(1.0, 0.0));
    }
}
