//! The scalar coefficient ring abstraction.
//!
//! Most of the engine runs over exact rationals. The cocycle evaluator runs the
//! same algebra over polynomials in simplex coordinates, so every structure that
//! carries coefficients is generic over [`Coeff`].

use std::fmt::{Debug, Display};

use num::BigRational;

pub type Rat = BigRational;

/// Commutative ring of scalar coefficients. Implemented by exact rationals and
/// by polynomials in simplex coordinates.
pub trait Coeff: Clone + PartialEq + Eq + Debug + Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_ref(&self, other: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn from_rat(r: Rat) -> Self;
    fn mul_rat(&self, r: &Rat) -> Self;
    /// The rational value, if the element is a constant.
    fn as_rat(&self) -> Option<Rat>;

    fn sub_ref(&self, other: &Self) -> Self {
        self.add_ref(&other.neg_ref())
    }
    fn from_i64(v: i64) -> Self {
        Self::from_rat(Rat::from_integer(v.into()))
    }
}

impl Coeff for Rat {
    fn zero() -> Self {
        num::Zero::zero()
    }
    fn one() -> Self {
        num::One::one()
    }
    fn is_zero(&self) -> bool {
        num::Zero::is_zero(self)
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn from_rat(r: Rat) -> Self {
        r
    }
    fn mul_rat(&self, r: &Rat) -> Self {
        self * r
    }
    fn as_rat(&self) -> Option<Rat> {
        Some(self.clone())
    }
}

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(num.into(), den.into())
}

pub fn rat_int(v: i64) -> Rat {
    Rat::from_integer(v.into())
}

pub fn factorial(k: u64) -> Rat {
    let mut acc = num::BigInt::from(1u64);
    for i in 2..=k {
        acc *= i;
    }
    Rat::from_integer(acc)
}

pub fn binomial(n: u64, k: u64) -> Rat {
    if k > n {
        return rat_int(0);
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}
