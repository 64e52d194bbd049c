//! Floating-point scalar abstraction for the numerical core.
//!
//! All math modules are generic over [`Real`]; in practice this is f32 or f64.
//! The shipped device model and experiments instantiate everything at f64
//! (see the aliases at the crate root), which is what the documented
//! tolerances assume.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable throughout the numerical core.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an f64 literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    /// Uniform sample in [0, 1).
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Standard normal sample.
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f32 {
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f32>()
    }

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f64 {
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f64>()
    }

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Shorthand for the complex number type over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

/// i as a complex constant.
pub fn im<T: Real>() -> Cplx<T> {
    Complex::new(T::zero(), T::one())
}

/// 2π as a scalar.
pub fn two_pi<T: Real>() -> T {
    T::PI() + T::PI()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn of_roundtrips_for_f64() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(0.25), 0.25f32);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        use rand::SeedableRng;
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..16 {
            assert_eq!(f64::sample_unit(&mut a), f64::sample_unit(&mut b));
            assert_eq!(f64::sample_normal(&mut a), f64::sample_normal(&mut b));
        }
    }
}
