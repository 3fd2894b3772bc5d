//! Scalar abstraction: every numeric module in this crate is generic over the
//! float width, with `f64` as the working precision of the CLI and the tests.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};

/// Floating-point scalar the library is generic over.
///
/// Validation tolerances are per-type because limits that are natural at f64
/// (row sums within 1e-12) are unreachable in f32 arithmetic.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Display + Debug + LowerExp + Send + Sync + 'static
{
    /// Tolerance for checks of the form "these entries must sum to s".
    fn sum_tol() -> Self;

    /// Truncation tolerance for the uniformization matrix exponential.
    fn expm_tol() -> Self;

    /// Shorthand for converting an f64 constant.
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("constant representable in scalar type")
    }
}

impl Scalar for f64 {
    fn sum_tol() -> Self {
        1e-12
    }
    fn expm_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn sum_tol() -> Self {
        1e-5
    }
    fn expm_tol() -> Self {
        1e-6
    }
}

/// Scalars that can be drawn from the simulators' source distributions.
pub trait SimScalar: Scalar {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn unit_exp<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Uniform draw on the open interval (0, 1).
    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_sim_scalar {
    ($t:ty) => {
        impl SimScalar for $t {
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }
            fn unit_exp<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }
            fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }
        }
    };
}

impl_sim_scalar!(f32);
impl_sim_scalar!(f64);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constants_convert() {
        assert_eq!(f64::of(0.25), 0.25);
        assert_eq!(f32::of(0.25), 0.25f32);
    }

    #[test]
    fn draws_are_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let u: f64 = SimScalar::open01(&mut rng);
            assert!(u > 0.0 && u < 1.0);
            let e: f64 = SimScalar::unit_exp(&mut rng);
            assert!(e >= 0.0);
            let z: f32 = SimScalar::std_normal(&mut rng);
            assert!(z.is_finite());
        }
    }
}
