use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{FromPrimitive, Signed, ToPrimitive};

/// Integer coefficient type of the formula kernel.
///
/// The analysis itself runs on [`BigInt`]; fixed-width scalars are used by the
/// finite-domain backend once a query is known to fit.
pub trait Scalar:
    Clone + Ord + Hash + Debug + Display + Signed + FromPrimitive + ToPrimitive + FromStr + Send + Sync
{
    /// Floor division; `rhs` is non-zero.
    fn floor_div(&self, rhs: &Self) -> Self;

    /// Converts between scalar types, `None` on overflow.
    fn convert<T: Scalar>(&self) -> Option<T> {
        if let Some(v) = self.to_i64() {
            return T::from_i64(v);
        }
        T::from_str(&self.to_string()).ok()
    }
}

impl Scalar for BigInt {
    fn floor_div(&self, rhs: &Self) -> Self {
        bigint_floor_div(self, rhs)
    }
}

impl Scalar for i64 {
    fn floor_div(&self, rhs: &Self) -> Self {
        let d = self / rhs;
        if (self % rhs != 0) && ((*self < 0) != (*rhs < 0)) {
            d - 1
        } else {
            d
        }
    }
}

impl Scalar for i128 {
    fn floor_div(&self, rhs: &Self) -> Self {
        let d = self / rhs;
        if (self % rhs != 0) && ((*self < 0) != (*rhs < 0)) {
            d - 1
        } else {
            d
        }
    }
}

fn bigint_floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    let zero = BigInt::from(0);
    let q = a / b;
    let r = a - &q * b;
    if r != zero && ((r < zero) != (*b < zero)) {
        q - 1
    } else {
        q
    }
}
