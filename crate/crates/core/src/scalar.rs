use num_integer::Integer;
use num_traits::Signed;
use std::fmt::{Debug, Display};
use std::hash::Hash;

/// Coefficient ring for all homological linear algebra.
///
/// Any Euclidean domain with exact arithmetic works. The crate default is
/// arbitrary-precision integers; normal-form pivots can blow up well past
/// machine words even on small inputs, so nothing in a reduction path may
/// assume bounded magnitude.
pub trait Scalar: Integer + Signed + Clone + Hash + Debug + Display + 'static {
    fn from_i64(v: i64) -> Self;
}

impl Scalar for num_bigint::BigInt {
    fn from_i64(v: i64) -> Self {
        num_bigint::BigInt::from(v)
    }
}

impl Scalar for i64 {
    fn from_i64(v: i64) -> Self {
        v
    }
}
