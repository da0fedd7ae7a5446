//! Exact rational arithmetic helpers.
//!
//! All polyhedral computations in this crate run over arbitrary-precision
//! rationals (`Rat`). The simplex additionally has a fast machine-word
//! scalar (`Q64`) that falls back to `Rat` on overflow.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

pub type Rat = BigRational;

pub fn rat_int(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

pub fn rat_frac(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_from_bigint(v: &BigInt) -> Rat {
    Rat::from_integer(v.clone())
}

/// Formats a rational as `p/q`, or just `p` when the denominator is one.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p/q` or a plain integer `p`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(Rat::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().ok()?;
            Some(Rat::from_integer(p))
        }
    }
}

/// Least common multiple of the denominators of the given rationals.
pub fn denominator_lcm<'a>(vals: impl Iterator<Item = &'a Rat>) -> BigInt {
    let mut acc = BigInt::one();
    for v in vals {
        acc = acc.lcm(v.denom());
    }
    acc
}

/// Renders a nonnegative rational as a decimal with `digits` fractional
/// digits, rounded away from zero. Used for ratio reporting so that the
/// printed value never understates the exact one.
pub fn ceil_decimal(r: &Rat, digits: u32) -> String {
    assert!(!r.is_negative(), "ceil_decimal expects a nonnegative value");
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = r * Rat::from_integer(scale.clone());
    let units = scaled.ceil().to_integer();
    let (int_part, frac_part) = units.div_rem(&scale);
    format!("{}.{:0width$}", int_part, frac_part, width = digits as usize)
}

/// Rational with `i64` numerator and denominator and `i128` intermediates.
/// Every operation is overflow-checked; `None` signals that the caller
/// should redo the computation over `Rat`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Q64 {
    num: i64,
    den: i64, // always > 0, gcd(num, den) == 1
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Q64 {
    pub const ZERO: Q64 = Q64 { num: 0, den: 1 };
    pub const ONE: Q64 = Q64 { num: 1, den: 1 };

    pub fn new(num: i64, den: i64) -> Option<Q64> {
        Q64::reduce(num as i128, den as i128)
    }

    fn reduce(num: i128, den: i128) -> Option<Q64> {
        if den == 0 {
            return None;
        }
        if num == 0 {
            return Some(Q64::ZERO);
        }
        if den == 1 {
            return Some(Q64 { num: i64::try_from(num).ok()?, den: 1 });
        }
        let g = gcd_i128(num, den);
        let sign = if den < 0 { -1 } else { 1 };
        let num = sign * num / g;
        let den = sign * den / g;
        Some(Q64 { num: i64::try_from(num).ok()?, den: i64::try_from(den).ok()? })
    }

    pub fn from_rat(r: &Rat) -> Option<Q64> {
        let num = r.numer().to_i64()?;
        let den = r.denom().to_i64()?;
        Some(Q64 { num, den })
    }

    pub fn to_rat(self) -> Rat {
        Rat::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn signum(&self) -> i32 {
        self.num.signum() as i32
    }

    pub fn checked_add(&self, o: &Q64) -> Option<Q64> {
        if self.den == 1 && o.den == 1 {
            return Some(Q64 { num: self.num.checked_add(o.num)?, den: 1 });
        }
        if self.den == o.den {
            let num = (self.num as i128) + (o.num as i128);
            return Q64::reduce(num, self.den as i128);
        }
        let num = (self.num as i128).checked_mul(o.den as i128)?
            .checked_add((o.num as i128).checked_mul(self.den as i128)?)?;
        Q64::reduce(num, (self.den as i128) * (o.den as i128))
    }

    pub fn checked_sub(&self, o: &Q64) -> Option<Q64> {
        if self.den == 1 && o.den == 1 {
            return Some(Q64 { num: self.num.checked_sub(o.num)?, den: 1 });
        }
        if self.den == o.den {
            let num = (self.num as i128) - (o.num as i128);
            return Q64::reduce(num, self.den as i128);
        }
        let num = (self.num as i128).checked_mul(o.den as i128)?
            .checked_sub((o.num as i128).checked_mul(self.den as i128)?)?;
        Q64::reduce(num, (self.den as i128) * (o.den as i128))
    }

    pub fn checked_mul(&self, o: &Q64) -> Option<Q64> {
        if self.num == 0 || o.num == 0 {
            return Some(Q64::ZERO);
        }
        if self.den == 1 && o.den == 1 {
            if let Some(num) = self.num.checked_mul(o.num) {
                return Some(Q64 { num, den: 1 });
            }
        }
        // Cross-reduce first to keep intermediates small.
        let g1 = gcd_i128(self.num as i128, o.den as i128).max(1);
        let g2 = gcd_i128(o.num as i128, self.den as i128).max(1);
        let num = (self.num as i128 / g1) * (o.num as i128 / g2);
        let den = (self.den as i128 / g2) * (o.den as i128 / g1);
        Q64::reduce(num, den)
    }

    pub fn checked_div(&self, o: &Q64) -> Option<Q64> {
        if o.num == 0 {
            return None;
        }
        self.checked_mul(&Q64 { num: o.den, den: o.num }.normalized())
    }

    fn normalized(self) -> Q64 {
        if self.den < 0 {
            Q64 { num: -self.num, den: -self.den }
        } else {
            self
        }
    }

    pub fn neg(&self) -> Q64 {
        Q64 { num: -self.num, den: self.den }
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for Q64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Q64 {
    fn cmp(&self, other: &Self) -> Ordering {
        // i64 * i64 never overflows i128, so this comparison is exact.
        let lhs = (self.num as i128) * (other.den as i128);
        let rhs = (other.num as i128) * (self.den as i128);
        lhs.cmp(&rhs)
    }
}

/// Adaptive exact rational: machine-word representation with per-value
/// promotion to arbitrary precision on overflow, and demotion back when a
/// result fits again. Keeps the common case fast without giving up
/// exactness anywhere.
#[derive(Clone, Debug, PartialEq)]
pub enum QAda {
    Small(Q64),
    Big(Rat),
}

impl QAda {
    pub const ZERO: QAda = QAda::Small(Q64::ZERO);

    pub fn from_rat(r: &Rat) -> QAda {
        match Q64::from_rat(r) {
            Some(q) => QAda::Small(q),
            None => QAda::Big(r.clone()),
        }
    }

    fn demote(r: Rat) -> QAda {
        match Q64::from_rat(&r) {
            Some(q) => QAda::Small(q),
            None => QAda::Big(r),
        }
    }

    pub fn to_rat(&self) -> Rat {
        match self {
            QAda::Small(q) => q.to_rat(),
            QAda::Big(r) => r.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            QAda::Small(q) => q.is_zero(),
            QAda::Big(r) => num_traits::Zero::is_zero(r),
        }
    }

    pub fn signum(&self) -> i32 {
        match self {
            QAda::Small(q) => q.signum(),
            QAda::Big(r) => match r.numer().sign() {
                num_bigint::Sign::Minus => -1,
                num_bigint::Sign::NoSign => 0,
                num_bigint::Sign::Plus => 1,
            },
        }
    }

    pub fn neg(&self) -> QAda {
        match self {
            QAda::Small(q) => QAda::Small(q.neg()),
            QAda::Big(r) => QAda::Big(-r),
        }
    }

    pub fn add(&self, o: &QAda) -> QAda {
        if let (QAda::Small(a), QAda::Small(b)) = (self, o) {
            if let Some(c) = a.checked_add(b) {
                return QAda::Small(c);
            }
        }
        QAda::demote(self.to_rat() + o.to_rat())
    }

    pub fn sub(&self, o: &QAda) -> QAda {
        if let (QAda::Small(a), QAda::Small(b)) = (self, o) {
            if let Some(c) = a.checked_sub(b) {
                return QAda::Small(c);
            }
        }
        QAda::demote(self.to_rat() - o.to_rat())
    }

    pub fn mul(&self, o: &QAda) -> QAda {
        if let (QAda::Small(a), QAda::Small(b)) = (self, o) {
            if let Some(c) = a.checked_mul(b) {
                return QAda::Small(c);
            }
        }
        QAda::demote(self.to_rat() * o.to_rat())
    }

    pub fn div(&self, o: &QAda) -> QAda {
        if let (QAda::Small(a), QAda::Small(b)) = (self, o) {
            if let Some(c) = a.checked_div(b) {
                return QAda::Small(c);
            }
        }
        QAda::demote(self.to_rat() / o.to_rat())
    }

    pub fn cmp_exact(&self, o: &QAda) -> Ordering {
        match (self, o) {
            (QAda::Small(a), QAda::Small(b)) => a.cmp(b),
            _ => self.to_rat().cmp(&o.to_rat()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            QAda::Small(q) => q.to_f64(),
            QAda::Big(r) => {
                r.numer().to_f64().unwrap_or(f64::MAX) / r.denom().to_f64().unwrap_or(1.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q64_arithmetic_matches_bigrational() {
        let cases = [(1i64, 2i64), (-3, 4), (7, 3), (0, 1), (5, 1), (-11, 13)];
        for &(an, ad) in &cases {
            for &(bn, bd) in &cases {
                let a = Q64::new(an, ad).unwrap();
                let b = Q64::new(bn, bd).unwrap();
                let ra = rat_frac(an, ad);
                let rb = rat_frac(bn, bd);
                assert_eq!(a.checked_add(&b).unwrap().to_rat(), &ra + &rb);
                assert_eq!(a.checked_sub(&b).unwrap().to_rat(), &ra - &rb);
                assert_eq!(a.checked_mul(&b).unwrap().to_rat(), &ra * &rb);
                if bn != 0 {
                    assert_eq!(a.checked_div(&b).unwrap().to_rat(), &ra / &rb);
                }
                assert_eq!(a.cmp(&b), ra.cmp(&rb));
            }
        }
    }

    #[test]
    fn q64_overflow_is_detected() {
        let big = Q64::new(i64::MAX, 1).unwrap();
        assert!(big.checked_mul(&big).is_none());
        assert!(big.checked_add(&Q64::new(1, i64::MAX).unwrap()).is_none());
    }

    #[test]
    fn ceil_decimal_rounds_up() {
        assert_eq!(ceil_decimal(&rat_frac(1, 3), 4), "0.3334");
        assert_eq!(ceil_decimal(&rat_frac(1, 2), 4), "0.5000");
        assert_eq!(ceil_decimal(&rat_int(2), 3), "2.000");
        assert_eq!(ceil_decimal(&rat_frac(1867, 1000), 2), "1.87");
    }

    #[test]
    fn rat_round_trip_formatting() {
        for s in ["3/4", "-7/2", "5", "0", "-12"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(parse_rat(&format_rat(&r)).unwrap(), r);
        }
        assert!(parse_rat("1/0").is_none());
        assert!(parse_rat("x").is_none());
    }
}
