//! Canonical example groups used by tests, documentation, and the CLI.

use crate::conjugacy::{build_conjugacy, validate_group, ConjugacyData, ToralGroup};
use crate::matrix::IMat;
use crate::poly::IntPoly;
use num_bigint::BigInt;
use num_traits::One;

/// Companion matrix with ones on the subdiagonal and the negated
/// coefficients in the last column.
pub fn companion(p: &IntPoly) -> IMat {
    let d = p.degree();
    let mut m = IMat::zero(d);
    for i in 1..d {
        m.set(i, i - 1, BigInt::one());
    }
    for i in 0..d {
        m.set(i, d - 1, -p.coeffs[i].clone());
    }
    m
}

/// x^3 + x^2 - 2x - 1, the totally real cubic of discriminant 49.
pub fn cubic_poly() -> IntPoly {
    IntPoly::from_i64(&[-1, -2, 1, 1]).unwrap()
}

pub fn cubic_companion() -> IMat {
    companion(&cubic_poly())
}

/// Rank-2 abelian group <A, A^2 - 2I> with A the cubic companion matrix.
pub fn cubic_group() -> ToralGroup {
    let a = cubic_companion();
    let b = a.mul(&a).sub(&IMat::scalar(3, BigInt::from(2)));
    validate_group(vec![a, b]).expect("cubic fixture is valid")
}

pub fn cubic_conjugacy(precision: usize) -> ConjugacyData {
    build_conjugacy(&cubic_group(), precision, 2).expect("cubic fixture reconstructs")
}

/// x^4 - 2x^3 - 2x^2 + x + 1: signature (2,1), unit rank 2.
pub fn quartic_poly() -> IntPoly {
    IntPoly::from_i64(&[1, 1, -2, -2, 1]).unwrap()
}

/// Rank-2 group <A, A^2 - 2A - 2I> for the signature-(2,1) quartic; both
/// generators have determinant one and independent log vectors.
pub fn quartic_group() -> ToralGroup {
    let a = companion(&quartic_poly());
    let two = IMat::scalar(4, BigInt::from(2));
    let b = a.mul(&a).sub(&two.mul(&a)).sub(&two);
    validate_group(vec![a, b]).expect("quartic fixture is valid")
}

pub fn quartic_conjugacy(precision: usize) -> ConjugacyData {
    build_conjugacy(&quartic_group(), precision, 2).expect("quartic fixture reconstructs")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_fixture_valid() {
        let g = quartic_group();
        assert_eq!(g.dim, 4);
        let conj = quartic_conjugacy(128);
        assert_eq!(conj.field.signature(), (2, 1));
        let report = crate::conjugacy::rank_and_maximality(&conj);
        assert_eq!(report.rank, 2);
        assert!(report.maximal);
    }
}
