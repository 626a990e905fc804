//! Exact rationals with an inline fast path for values whose reduced numerator
//! and denominator fit in `i64`.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Canonical: `Small(n, d)` is reduced with `d > 0`, and `Big` only holds
/// values that do not fit `Small`. Structural equality is value equality.
#[derive(Clone)]
pub enum Rational {
    Small(i64, i64),
    Big(BigRational),
}

use Rational::{Big, Small};

fn from_i128(n: i128, d: i128) -> Rational {
    debug_assert!(d != 0);
    if d == 1 {
        if let Ok(n) = i64::try_from(n) {
            return Small(n, 1);
        }
    }
    if let (Ok(n64), Ok(d64)) = (i64::try_from(n), i64::try_from(d)) {
        if n64 != i64::MIN && d64 != i64::MIN {
            let g = n64.gcd(&d64);
            let (n, d) = (n64 / g, d64 / g);
            return if d < 0 { Small(-n, -d) } else { Small(n, d) };
        }
    }
    let g = n.gcd(&d);
    let (mut n, mut d) = (n / g, d / g);
    if d < 0 {
        n = -n;
        d = -d;
    }
    match (i64::try_from(n), i64::try_from(d)) {
        (Ok(n), Ok(d)) => Small(n, d),
        _ => Big(BigRational::new_raw(BigInt::from(n), BigInt::from(d))),
    }
}

fn from_big(r: BigRational) -> Rational {
    match (r.numer().to_i64(), r.denom().to_i64()) {
        (Some(n), Some(d)) => Small(n, d),
        _ => Big(r),
    }
}

impl Rational {
    /// Panics on a zero denominator.
    pub fn new(n: BigInt, d: BigInt) -> Self {
        from_big(BigRational::new(n, d))
    }
    pub fn from_integer(n: BigInt) -> Self {
        from_big(BigRational::from_integer(n))
    }
    /// Panics on a zero denominator.
    pub fn from_i64s(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        from_i128(n as i128, d as i128)
    }
    pub fn to_big(&self) -> BigRational {
        match self {
            Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Big(r) => r.clone(),
        }
    }
    pub fn numer(&self) -> BigInt {
        match self {
            Small(n, _) => BigInt::from(*n),
            Big(r) => r.numer().clone(),
        }
    }
    pub fn denom(&self) -> BigInt {
        match self {
            Small(_, d) => BigInt::from(*d),
            Big(r) => r.denom().clone(),
        }
    }
    pub fn is_integer(&self) -> bool {
        match self {
            Small(_, d) => *d == 1,
            Big(r) => r.is_integer(),
        }
    }
    /// Truncates toward zero.
    pub fn to_integer(&self) -> BigInt {
        match self {
            Small(n, d) => BigInt::from(n / d),
            Big(r) => r.to_integer(),
        }
    }
    pub fn ceil(&self) -> Self {
        match self {
            Small(n, d) => from_i128(Integer::div_ceil(&(*n as i128), &(*d as i128)), 1),
            Big(r) => from_big(r.ceil()),
        }
    }
    pub fn floor(&self) -> Self {
        match self {
            Small(n, d) => from_i128(Integer::div_floor(&(*n as i128), &(*d as i128)), 1),
            Big(r) => from_big(r.floor()),
        }
    }
    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }
    pub fn is_positive(&self) -> bool {
        match self {
            Small(n, _) => *n > 0,
            Big(r) => r.is_positive(),
        }
    }
    pub fn is_negative(&self) -> bool {
        match self {
            Small(n, _) => *n < 0,
            Big(r) => r.is_negative(),
        }
    }
    /// Panics on zero.
    pub fn recip(&self) -> Self {
        match self {
            Small(n, d) => {
                assert!(*n != 0, "reciprocal of zero");
                from_i128(*d as i128, *n as i128)
            }
            Big(r) => from_big(r.recip()),
        }
    }
    pub fn pow(&self, k: i32) -> Self {
        let base = if k < 0 { self.recip() } else { self.clone() };
        let mut acc = Rational::one();
        for _ in 0..k.unsigned_abs() {
            acc = &acc * &base;
        }
        acc
    }
    pub fn to_f64(&self) -> Option<f64> {
        match self {
            Small(n, d) => Some(*n as f64 / *d as f64),
            Big(r) => r.to_f64(),
        }
    }
}

impl Default for Rational {
    fn default() -> Self {
        Small(0, 1)
    }
}

impl Zero for Rational {
    fn zero() -> Self {
        Small(0, 1)
    }
    fn is_zero(&self) -> bool {
        matches!(self, Small(0, _))
    }
}

impl One for Rational {
    fn one() -> Self {
        Small(1, 1)
    }
    fn is_one(&self) -> bool {
        matches!(self, Small(1, 1))
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Small(n, 1)
    }
}

impl From<BigRational> for Rational {
    fn from(r: BigRational) -> Self {
        from_big(r)
    }
}

impl PartialEq for Rational {
    fn eq(&self, o: &Self) -> bool {
        match (self, o) {
            (Small(a, b), Small(c, d)) => a == c && b == d,
            (Big(x), Big(y)) => x == y,
            _ => false,
        }
    }
}
impl Eq for Rational {}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, h: &mut H) {
        match self {
            Small(n, d) => {
                0u8.hash(h);
                n.hash(h);
                d.hash(h);
            }
            Big(r) => {
                1u8.hash(h);
                r.hash(h);
            }
        }
    }
}

impl Ord for Rational {
    fn cmp(&self, o: &Self) -> Ordering {
        match (self, o) {
            (Small(a, b), Small(c, d)) => (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128)),
            _ => self.to_big().cmp(&o.to_big()),
        }
    }
}
impl PartialOrd for Rational {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Small(n, 1) => write!(f, "{n}"),
            Small(n, d) => write!(f, "{n}/{d}"),
            Big(r) => write!(f, "{r}"),
        }
    }
}
impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Add<&Rational> for &Rational {
    type Output = Rational;
    fn add(self, o: &Rational) -> Rational {
        match (self, o) {
            (Small(0, _), _) => o.clone(),
            (_, Small(0, _)) => self.clone(),
            (Small(a, b), Small(c, d)) => {
                let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
                if b == d {
                    from_i128(a + c, b)
                } else {
                    from_i128(a * d + c * b, b * d)
                }
            }
            _ => from_big(self.to_big() + o.to_big()),
        }
    }
}
impl Sub<&Rational> for &Rational {
    type Output = Rational;
    fn sub(self, o: &Rational) -> Rational {
        match (self, o) {
            (_, Small(0, _)) => self.clone(),
            (Small(a, b), Small(c, d)) => {
                let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
                if b == d {
                    from_i128(a - c, b)
                } else {
                    from_i128(a * d - c * b, b * d)
                }
            }
            _ => from_big(self.to_big() - o.to_big()),
        }
    }
}
impl Mul<&Rational> for &Rational {
    type Output = Rational;
    fn mul(self, o: &Rational) -> Rational {
        match (self, o) {
            (Small(0, _), _) | (_, Small(0, _)) => Rational::zero(),
            (Small(1, 1), _) => o.clone(),
            (_, Small(1, 1)) => self.clone(),
            (Small(a, b), Small(c, d)) => from_i128(*a as i128 * *c as i128, *b as i128 * *d as i128),
            _ => from_big(self.to_big() * o.to_big()),
        }
    }
}
impl Div<&Rational> for &Rational {
    type Output = Rational;
    /// Panics on division by zero.
    fn div(self, o: &Rational) -> Rational {
        match (self, o) {
            (_, Small(0, _)) => panic!("division by zero"),
            (Small(a, b), Small(c, d)) => from_i128(*a as i128 * *d as i128, *b as i128 * *c as i128),
            _ => from_big(self.to_big() / o.to_big()),
        }
    }
}
impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match self {
            Small(n, d) => from_i128(-(*n as i128), *d as i128),
            Big(r) => from_big(-r),
        }
    }
}
impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

macro_rules! forward {
    ($tr:ident, $m:ident, $atr:ident, $am:ident) => {
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $m(self, o: Rational) -> Rational {
                (&self).$m(&o)
            }
        }
        impl $tr<&Rational> for Rational {
            type Output = Rational;
            fn $m(self, o: &Rational) -> Rational {
                (&self).$m(o)
            }
        }
        impl $tr<Rational> for &Rational {
            type Output = Rational;
            fn $m(self, o: Rational) -> Rational {
                self.$m(&o)
            }
        }
        impl $atr<&Rational> for Rational {
            fn $am(&mut self, o: &Rational) {
                *self = (&*self).$m(o);
            }
        }
        impl $atr<Rational> for Rational {
            fn $am(&mut self, o: Rational) {
                *self = (&*self).$m(&o);
            }
        }
    };
}
forward!(Add, add, AddAssign, add_assign);
forward!(Sub, sub, SubAssign, sub_assign);
forward!(Mul, mul, MulAssign, mul_assign);
forward!(Div, div, DivAssign, div_assign);

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(it: I) -> Rational {
        it.fold(Rational::zero(), |a, b| &a + &b)
    }
}
impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(it: I) -> Rational {
        it.fold(Rational::zero(), |a, b| &a + b)
    }
}
