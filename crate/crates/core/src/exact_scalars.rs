//! Scalars: exact Gaussian rationals, multiprecision complex floats, and an
//! exact carrier for the transcendental constants that residues produce.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::atomic::{AtomicU32, Ordering};

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub use crate::rational::Rational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::from_i64s(n, d)
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from(n)
}

/// `re + i·im` with exact rational parts.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct GaussianRational {
    pub re: Rational,
    pub im: Rational,
}

pub type Gr = GaussianRational;

impl GaussianRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        Self { re, im }
    }
    pub fn zero() -> Self {
        Self::new(Rational::zero(), Rational::zero())
    }
    pub fn one() -> Self {
        Self::from_int(1)
    }
    pub fn i() -> Self {
        Self::new(Rational::zero(), Rational::one())
    }
    pub fn from_int(n: i64) -> Self {
        Self::new(rat_int(n), Rational::zero())
    }
    pub fn from_ratio(n: i64, d: i64) -> Self {
        Self::new(rat(n, d), Rational::zero())
    }
    pub fn from_rational(r: Rational) -> Self {
        Self::new(r, Rational::zero())
    }
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }
    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }
    pub fn norm_sqr(&self) -> Rational {
        &self.re * &self.re + &self.im * &self.im
    }
    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Domain("division by zero".into()));
        }
        let n = self.norm_sqr();
        Ok(Self::new(&self.re / &n, -(&self.im / &n)))
    }
    pub fn scale(&self, r: &Rational) -> Self {
        Self::new(&self.re * r, &self.im * r)
    }
    /// `i^k` for any integer `k`.
    pub fn i_pow(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => Self::one(),
            1 => Self::i(),
            2 => Self::from_int(-1),
            _ => -Self::i(),
        }
    }
    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }
    pub fn to_bigfloat(&self) -> BigFloatC {
        to_bigfloat(self)
    }
}

impl fmt::Debug for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "{}i", self.im),
            _ => write!(f, "({} + {}i)", self.re, self.im),
        }
    }
}

macro_rules! forward_binop {
    ($ty:ty, $tr:ident, $m:ident) => {
        impl $tr<$ty> for $ty {
            type Output = $ty;
            fn $m(self, rhs: $ty) -> $ty {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&$ty> for $ty {
            type Output = $ty;
            fn $m(self, rhs: &$ty) -> $ty {
                (&self).$m(rhs)
            }
        }
        impl $tr<$ty> for &$ty {
            type Output = $ty;
            fn $m(self, rhs: $ty) -> $ty {
                self.$m(&rhs)
            }
        }
    };
}

impl Add<&Gr> for &Gr {
    type Output = Gr;
    fn add(self, rhs: &Gr) -> Gr {
        Gr::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}
impl Sub<&Gr> for &Gr {
    type Output = Gr;
    fn sub(self, rhs: &Gr) -> Gr {
        Gr::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}
impl Mul<&Gr> for &Gr {
    type Output = Gr;
    fn mul(self, rhs: &Gr) -> Gr {
        if self.im.is_zero() && rhs.im.is_zero() {
            return Gr::new(&self.re * &rhs.re, Rational::zero());
        }
        Gr::new(&self.re * &rhs.re - &self.im * &rhs.im, &self.re * &rhs.im + &self.im * &rhs.re)
    }
}
impl Div<&Gr> for &Gr {
    type Output = Gr;
    /// Panics on division by zero; use [`GaussianRational::inv`] to handle it.
    fn div(self, rhs: &Gr) -> Gr {
        self * &rhs.inv().expect("division by zero")
    }
}
forward_binop!(Gr, Add, add);
forward_binop!(Gr, Sub, sub);
forward_binop!(Gr, Mul, mul);
forward_binop!(Gr, Div, div);

impl Neg for Gr {
    type Output = Gr;
    fn neg(self) -> Gr {
        Gr::new(-self.re, -self.im)
    }
}
impl Neg for &Gr {
    type Output = Gr;
    fn neg(self) -> Gr {
        Gr::new(-&self.re, -&self.im)
    }
}
impl AddAssign<&Gr> for Gr {
    fn add_assign(&mut self, rhs: &Gr) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}
impl SubAssign<&Gr> for Gr {
    fn sub_assign(&mut self, rhs: &Gr) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}
impl MulAssign<&Gr> for Gr {
    fn mul_assign(&mut self, rhs: &Gr) {
        *self = &*self * rhs;
    }
}

// ---------------------------------------------------------------------------
// Precision

static PRECISION_DIGITS: AtomicU32 = AtomicU32::new(0);
pub const DEFAULT_DIGITS: u32 = 50;
const GUARD_BITS: usize = 64;

/// Working precision in decimal digits (`RADUL_PRECISION` overrides the default).
pub fn precision_digits() -> u32 {
    let d = PRECISION_DIGITS.load(Ordering::Relaxed);
    if d != 0 {
        return d;
    }
    let d = std::env::var("RADUL_PRECISION")
        .ok()
        .and_then(|s| s.trim().parse::<u32>().ok())
        .filter(|&d| d >= 10)
        .unwrap_or(DEFAULT_DIGITS);
    PRECISION_DIGITS.store(d, Ordering::Relaxed);
    d
}

pub fn set_precision_digits(d: u32) {
    PRECISION_DIGITS.store(d.max(10), Ordering::Relaxed);
}

fn digits_to_bits(d: u32) -> usize {
    (d as f64 * std::f64::consts::LOG2_10).ceil() as usize + GUARD_BITS
}

pub fn precision_bits() -> usize {
    digits_to_bits(precision_digits())
}

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constants"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

fn bf_int(n: &BigInt, p: usize) -> BigFloat {
    if let Some(v) = n.to_i64() {
        return BigFloat::from_i64(v, p);
    }
    with_consts(|cc| BigFloat::parse(&n.to_string(), Radix::Dec, p, RM, cc))
}

fn bf_rat(r: &Rational, p: usize) -> BigFloat {
    if r.is_integer() {
        return bf_int(&r.numer(), p);
    }
    bf_int(&r.numer(), p).div(&bf_int(&r.denom(), p), p, RM)
}

// ---------------------------------------------------------------------------
// BigFloatC

/// Complex multiprecision float; arithmetic uses the global working precision.
#[derive(Clone)]
pub struct BigFloatC {
    pub re: BigFloat,
    pub im: BigFloat,
}

impl BigFloatC {
    pub fn zero() -> Self {
        let p = precision_bits();
        Self { re: BigFloat::from_i32(0, p), im: BigFloat::from_i32(0, p) }
    }
    pub fn from_real(re: BigFloat) -> Self {
        let p = precision_bits();
        Self { re, im: BigFloat::from_i32(0, p) }
    }
    pub fn from_i64(v: i64) -> Self {
        Self::from_real(BigFloat::from_i64(v, precision_bits()))
    }
    pub fn from_rational(r: &Rational) -> Self {
        Self::from_real(bf_rat(r, precision_bits()))
    }
    pub fn from_f64(v: f64) -> Self {
        Self::from_real(BigFloat::from_f64(v, precision_bits()))
    }
    pub fn parse(s: &str) -> Self {
        let p = precision_bits();
        Self::from_real(with_consts(|cc| BigFloat::parse(s, Radix::Dec, p, RM, cc)))
    }
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: BigFloat::neg(&self.im) }
    }
    pub fn scale_real(&self, r: &BigFloat) -> Self {
        let p = precision_bits();
        Self { re: self.re.mul(r, p, RM), im: self.im.mul(r, p, RM) }
    }
    /// `max(|re|, |im|)`, sufficient for tolerance checks.
    pub fn abs_max(&self) -> BigFloat {
        let a = self.re.abs();
        let b = self.im.abs();
        if a.cmp(&b).unwrap_or(0) >= 0 {
            a
        } else {
            b
        }
    }
    pub fn modulus(&self) -> BigFloat {
        let p = precision_bits();
        let s = self.re.mul(&self.re, p, RM).add(&self.im.mul(&self.im, p, RM), p, RM);
        s.sqrt(p, RM)
    }
    /// True when `|re|, |im| < 10^-k`.
    pub fn below_pow10(&self, k: i32) -> bool {
        let t = pow10(-k);
        self.re.abs().cmp(&t).unwrap_or(1) < 0 && self.im.abs().cmp(&t).unwrap_or(1) < 0
    }
    pub fn re_f64(&self) -> f64 {
        bf_to_f64(&self.re)
    }
    pub fn im_f64(&self) -> f64 {
        bf_to_f64(&self.im)
    }
    pub fn abs_f64(&self) -> f64 {
        bf_to_f64(&self.abs_max())
    }
    /// Decimal rendering of both parts with `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> (String, String) {
        (bf_to_string(&self.re, digits), bf_to_string(&self.im, digits))
    }
    /// Nearest Gaussian integer and the distance to it.
    pub fn nearest_integer(&self) -> (i64, i64, f64) {
        let r = self.re_f64().round();
        let i = self.im_f64().round();
        let d = (self - &BigFloatC::from_pair(r, i)).abs_f64();
        (r as i64, i as i64, d)
    }
    fn from_pair(re: f64, im: f64) -> Self {
        let p = precision_bits();
        Self { re: BigFloat::from_f64(re, p), im: BigFloat::from_f64(im, p) }
    }
    pub fn powi(&self, k: u32) -> Self {
        let mut acc = BigFloatC::from_i64(1);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }
}

pub fn pow10(k: i32) -> BigFloat {
    let p = precision_bits() + 64;
    let ten = BigFloat::from_i32(10, p);
    let m = ten.powi(k.unsigned_abs() as usize, p, RM);
    if k >= 0 {
        m
    } else {
        m.reciprocal(p, RM)
    }
}

pub fn bf_to_string(x: &BigFloat, digits: usize) -> String {
    if x.is_zero() {
        return "0".into();
    }
    let p = digits_to_bits(digits as u32).min(x.precision().unwrap_or(64).max(64));
    let mut y = x.clone();
    let _ = y.set_precision(p, RM);
    with_consts(|cc| y.format(Radix::Dec, RM, cc)).unwrap_or_else(|_| "nan".into())
}

pub fn bf_to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    bf_to_string(x, 20).parse::<f64>().unwrap_or(f64::NAN)
}

impl fmt::Debug for BigFloatC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (r, i) = self.to_decimal(20);
        write!(f, "({r}, {i})")
    }
}

impl Add<&BigFloatC> for &BigFloatC {
    type Output = BigFloatC;
    fn add(self, rhs: &BigFloatC) -> BigFloatC {
        let p = precision_bits();
        BigFloatC { re: self.re.add(&rhs.re, p, RM), im: self.im.add(&rhs.im, p, RM) }
    }
}
impl Sub<&BigFloatC> for &BigFloatC {
    type Output = BigFloatC;
    fn sub(self, rhs: &BigFloatC) -> BigFloatC {
        let p = precision_bits();
        BigFloatC { re: self.re.sub(&rhs.re, p, RM), im: self.im.sub(&rhs.im, p, RM) }
    }
}
impl Mul<&BigFloatC> for &BigFloatC {
    type Output = BigFloatC;
    fn mul(self, rhs: &BigFloatC) -> BigFloatC {
        let p = precision_bits();
        let rr = self.re.mul(&rhs.re, p, RM);
        let ii = self.im.mul(&rhs.im, p, RM);
        let ri = self.re.mul(&rhs.im, p, RM);
        let ir = self.im.mul(&rhs.re, p, RM);
        BigFloatC { re: rr.sub(&ii, p, RM), im: ri.add(&ir, p, RM) }
    }
}
impl Div<&BigFloatC> for &BigFloatC {
    type Output = BigFloatC;
    fn div(self, rhs: &BigFloatC) -> BigFloatC {
        let p = precision_bits();
        let n = rhs.re.mul(&rhs.re, p, RM).add(&rhs.im.mul(&rhs.im, p, RM), p, RM);
        let num = self * &rhs.conj();
        BigFloatC { re: num.re.div(&n, p, RM), im: num.im.div(&n, p, RM) }
    }
}
forward_binop!(BigFloatC, Add, add);
forward_binop!(BigFloatC, Sub, sub);
forward_binop!(BigFloatC, Mul, mul);
forward_binop!(BigFloatC, Div, div);

impl Neg for &BigFloatC {
    type Output = BigFloatC;
    fn neg(self) -> BigFloatC {
        BigFloatC { re: BigFloat::neg(&self.re), im: BigFloat::neg(&self.im) }
    }
}
impl Neg for BigFloatC {
    type Output = BigFloatC;
    fn neg(self) -> BigFloatC {
        -&self
    }
}

/// Conversion at the global precision, rounded to nearest.
pub fn to_bigfloat(x: &Gr) -> BigFloatC {
    let p = precision_bits();
    BigFloatC { re: bf_rat(&x.re, p), im: bf_rat(&x.im, p) }
}

// ---------------------------------------------------------------------------
// Elementary functions on real BigFloats at the working precision.

pub fn bf_pi() -> BigFloat {
    let p = precision_bits();
    with_consts(|cc| cc.pi(p, RM))
}
pub fn bf_sqrt(x: &BigFloat) -> BigFloat {
    x.sqrt(precision_bits(), RM)
}
pub fn bf_exp(x: &BigFloat) -> BigFloat {
    let p = precision_bits();
    with_consts(|cc| x.exp(p, RM, cc))
}
pub fn bf_sin(x: &BigFloat) -> BigFloat {
    let p = precision_bits();
    with_consts(|cc| x.sin(p, RM, cc))
}
pub fn bf_cos(x: &BigFloat) -> BigFloat {
    let p = precision_bits();
    with_consts(|cc| x.cos(p, RM, cc))
}
pub fn bf_ln(x: &BigFloat) -> BigFloat {
    let p = precision_bits();
    with_consts(|cc| x.ln(p, RM, cc))
}
pub fn bf_from_rational(r: &Rational) -> BigFloat {
    bf_rat(r, precision_bits())
}
pub fn bf_mul(a: &BigFloat, b: &BigFloat) -> BigFloat {
    a.mul(b, precision_bits(), RM)
}
pub fn bf_add(a: &BigFloat, b: &BigFloat) -> BigFloat {
    a.add(b, precision_bits(), RM)
}
pub fn bf_div(a: &BigFloat, b: &BigFloat) -> BigFloat {
    a.div(b, precision_bits(), RM)
}

// ---------------------------------------------------------------------------
// Gamma at quarter-integers

/// `Γ(r)` for `r ∈ {1/4, 1/2, 3/4}` from the lower incomplete gamma series
/// `γ(r, X) = X^r e^{−X} Σ_k X^k / (r)_{k+1}` with `X ≈ (digits + 10)·ln 10`.
/// The neglected tail satisfies `Γ(r, X) ≤ X^{r−1} e^{−X} < 10^{−digits−10}`.
/// All series terms are positive, so only the e^X growth of the partial sum
/// needs extra working bits.
fn gamma_base(num4: u32, digits: u32) -> BigFloat {
    let x_int = ((digits as f64 + 10.0) * std::f64::consts::LN_10).ceil() as i64;
    let extra = (x_int as f64 * std::f64::consts::LOG2_E).ceil() as usize;
    let p = digits_to_bits(digits) + extra + 32;
    let x = BigFloat::from_i64(x_int, p);
    let r = BigFloat::from_u32(num4, p).div(&BigFloat::from_u32(4, p), p, RM);
    let mut term = BigFloat::from_u32(1, p).div(&r, p, RM);
    let mut sum = term.clone();
    let eps = {
        let ten = BigFloat::from_u32(10, p);
        ten.powi(digits as usize + 20, p, RM).reciprocal(p, RM)
    };
    let mut k: i64 = 0;
    loop {
        k += 1;
        let denom = r.add(&BigFloat::from_i64(k, p), p, RM);
        term = term.mul(&x, p, RM).div(&denom, p, RM);
        sum = sum.add(&term, p, RM);
        if k > x_int && term.div(&sum, p, RM).cmp(&eps).unwrap_or(0) < 0 {
            break;
        }
    }
    let sq = x.sqrt(p, RM);
    let xr = match num4 {
        1 => sq.sqrt(p, RM),
        2 => sq,
        3 => sq.mul(&sq.sqrt(p, RM), p, RM),
        _ => unreachable!(),
    };
    let e = with_consts(|cc| BigFloat::neg(&x).exp(p, RM, cc));
    let mut g = xr.mul(&e, p, RM).mul(&sum, p, RM);
    let _ = g.set_precision(digits_to_bits(digits), RM);
    g
}

thread_local! {
    static GAMMA_CACHE: RefCell<BTreeMap<(u32, u32), BigFloat>> = const { RefCell::new(BTreeMap::new()) };
}

fn gamma_base_cached(num4: u32, digits: u32) -> BigFloat {
    if let Some(v) = GAMMA_CACHE.with(|c| c.borrow().get(&(num4, digits)).cloned()) {
        return v;
    }
    let v = gamma_base(num4, digits);
    GAMMA_CACHE.with(|c| c.borrow_mut().insert((num4, digits), v.clone()));
    v
}

/// `Γ(q)` for positive `q` with denominator dividing 4, to `digits` decimals.
pub fn gamma_quarter(q: &Rational, digits: u32) -> Result<BigFloatC> {
    if !q.is_positive() {
        return Err(Error::Domain(format!("gamma_quarter({q}): argument must be positive")));
    }
    let four_q = q * rat_int(4);
    if !four_q.is_integer() {
        return Err(Error::Domain(format!("gamma_quarter({q}): denominator must divide 4")));
    }
    let m = four_q.to_integer().to_i64().ok_or_else(|| Error::Domain("argument too large".into()))?;
    let (r4, steps) = {
        let r = ((m - 1).rem_euclid(4) + 1) as u32;
        (r, (m - r as i64) / 4)
    };
    let p = digits_to_bits(digits);
    let mut g = if r4 == 4 { BigFloat::from_u32(1, p) } else { gamma_base_cached(r4, digits) };
    let base = rat(r4 as i64, 4);
    for j in 0..steps {
        let f = bf_rat(&(&base + rat_int(j)), p);
        g = g.mul(&f, p, RM);
    }
    Ok(BigFloatC { re: g, im: BigFloat::from_u32(0, p) })
}

// ---------------------------------------------------------------------------
// Exact periods

/// Key `(a, b, c)` of the monomial `Γ(1/4)^a · π^{b/2} · √2^c`, `c ∈ {0, 1}`.
pub type PeriodKey = (i32, i32, u8);

/// Finite `ℚ(i)`-linear combination of period monomials `Γ(1/4)^a π^{b/2} √2^c`.
/// Distinct keys are linearly independent over `ℚ(i)` because `Γ(1/4)` and `π`
/// are algebraically independent, so equality is decidable.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Period {
    pub terms: BTreeMap<PeriodKey, Gr>,
}

impl Period {
    pub fn zero() -> Self {
        Self::default()
    }
    pub fn rational(c: Gr) -> Self {
        Self::monomial((0, 0, 0), c)
    }
    pub fn monomial(k: PeriodKey, c: Gr) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(k, c);
        }
        p
    }
    /// `Γ(m/4)` for positive `m`, reduced to the base monomials.
    pub fn gamma_quarter(m: i64) -> Result<Self> {
        if m <= 0 {
            return Err(Error::Domain(format!("Γ({m}/4) at a pole")));
        }
        let r = (m - 1).rem_euclid(4) + 1;
        let mut coeff = Rational::one();
        let mut j = r;
        while j < m {
            coeff *= rat(j, 4);
            j += 4;
        }
        let key = match r {
            1 => (1, 0, 0),
            2 => (0, 1, 0),
            3 => (-1, 2, 1),
            _ => (0, 0, 0),
        };
        // Γ(3/4) = π√2 / Γ(1/4) by reflection.
        Ok(Self::monomial(key, Gr::from_rational(coeff)))
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn as_rational(&self) -> Option<Gr> {
        match self.terms.len() {
            0 => Some(Gr::zero()),
            1 => self.terms.get(&(0, 0, 0)).cloned(),
            _ => None,
        }
    }
    pub fn scale(&self, c: &Gr) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect() }
    }
    fn insert_add(&mut self, k: PeriodKey, c: Gr) {
        let e = self.terms.entry(k).or_insert_with(Gr::zero);
        *e += &c;
        if e.is_zero() {
            self.terms.remove(&k);
        }
    }
    pub fn inv_monomial(k: PeriodKey) -> (PeriodKey, Rational) {
        // 1/√2 = √2/2
        if k.2 == 1 {
            ((-k.0, -k.1, 1), rat(1, 2))
        } else {
            ((-k.0, -k.1, 0), Rational::one())
        }
    }
    /// Divide by a single monomial.
    pub fn div_monomial(&self, k: PeriodKey) -> Self {
        let (ik, f) = Self::inv_monomial(k);
        (self * &Self::monomial(ik, Gr::one())).scale(&Gr::from_rational(f))
    }
    pub fn to_bigfloat(&self) -> BigFloatC {
        let d = precision_digits();
        let g = gamma_base_cached(1, d);
        let sp = bf_sqrt(&bf_pi());
        let s2 = bf_sqrt(&BigFloat::from_u32(2, precision_bits()));
        let p = precision_bits();
        let mut acc = BigFloatC::zero();
        for ((a, b, c), v) in &self.terms {
            let mut m = BigFloat::from_u32(1, p);
            let ga = g.powi(a.unsigned_abs() as usize, p, RM);
            m = if *a >= 0 { m.mul(&ga, p, RM) } else { m.div(&ga, p, RM) };
            let pb = sp.powi(b.unsigned_abs() as usize, p, RM);
            m = if *b >= 0 { m.mul(&pb, p, RM) } else { m.div(&pb, p, RM) };
            if *c == 1 {
                m = m.mul(&s2, p, RM);
            }
            acc = &acc + &to_bigfloat(v).scale_real(&m);
        }
        acc
    }
}

impl fmt::Debug for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|((a, b, c), v)| {
                if (*a, *b, *c) == (0, 0, 0) {
                    format!("{v}")
                } else {
                    format!("{v}·Γ(1/4)^{a}·π^({b}/2)·√2^{c}")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Add<&Period> for &Period {
    type Output = Period;
    fn add(self, rhs: &Period) -> Period {
        let mut r = self.clone();
        for (k, v) in &rhs.terms {
            r.insert_add(*k, v.clone());
        }
        r
    }
}
impl Sub<&Period> for &Period {
    type Output = Period;
    fn sub(self, rhs: &Period) -> Period {
        let mut r = self.clone();
        for (k, v) in &rhs.terms {
            r.insert_add(*k, -v);
        }
        r
    }
}
impl Mul<&Period> for &Period {
    type Output = Period;
    fn mul(self, rhs: &Period) -> Period {
        let mut r = Period::zero();
        for ((a1, b1, c1), v1) in &self.terms {
            for ((a2, b2, c2), v2) in &rhs.terms {
                let mut v = v1 * v2;
                let mut c = c1 + c2;
                if c == 2 {
                    c = 0;
                    v = v.scale(&rat_int(2));
                }
                r.insert_add((a1 + a2, b1 + b2, c), v);
            }
        }
        r
    }
}
forward_binop!(Period, Add, add);
forward_binop!(Period, Sub, sub);
forward_binop!(Period, Mul, mul);
impl Neg for Period {
    type Output = Period;
    fn neg(self) -> Period {
        self.scale(&Gr::from_int(-1))
    }
}

// ---------------------------------------------------------------------------
// Scalar

/// A cochain or residue value: exact when every ingredient was exact.
#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(Period),
    Float(BigFloatC),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(Period::zero())
    }
    pub fn from_gr(c: Gr) -> Self {
        Scalar::Exact(Period::rational(c))
    }
    pub fn from_int(n: i64) -> Self {
        Self::from_gr(Gr::from_int(n))
    }
    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }
    pub fn to_bigfloat(&self) -> BigFloatC {
        match self {
            Scalar::Exact(p) => p.to_bigfloat(),
            Scalar::Float(f) => f.clone(),
        }
    }
    /// Exactly zero, or a float whose parts are below `10^-tol_digits`.
    pub fn is_zero_within(&self, tol_digits: i32) -> bool {
        match self {
            Scalar::Exact(p) => p.is_zero(),
            Scalar::Float(f) => f.below_pow10(tol_digits),
        }
    }
    pub fn is_exact_zero(&self) -> bool {
        matches!(self, Scalar::Exact(p) if p.is_zero())
    }
    pub fn abs_f64(&self) -> f64 {
        match self {
            Scalar::Exact(p) if p.is_zero() => 0.0,
            _ => self.to_bigfloat().abs_f64(),
        }
    }
    pub fn scale(&self, c: &Gr) -> Self {
        match self {
            Scalar::Exact(p) => Scalar::Exact(p.scale(c)),
            Scalar::Float(f) => Scalar::Float(f * &to_bigfloat(c)),
        }
    }
    pub fn as_rational(&self) -> Option<Gr> {
        match self {
            Scalar::Exact(p) => p.as_rational(),
            Scalar::Float(_) => None,
        }
    }
    pub fn re_f64(&self) -> f64 {
        self.to_bigfloat().re_f64()
    }
    pub fn im_f64(&self) -> f64 {
        self.to_bigfloat().im_f64()
    }
}

impl Add<&Scalar> for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            (Scalar::Exact(a), _) if a.is_zero() => rhs.clone(),
            (_, Scalar::Exact(b)) if b.is_zero() => self.clone(),
            _ => Scalar::Float(&self.to_bigfloat() + &rhs.to_bigfloat()),
        }
    }
}
impl Sub<&Scalar> for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self + &(-rhs)
    }
}
impl Mul<&Scalar> for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            _ if self.is_exact_zero() || rhs.is_exact_zero() => Scalar::zero(),
            _ => Scalar::Float(&self.to_bigfloat() * &rhs.to_bigfloat()),
        }
    }
}
forward_binop!(Scalar, Add, add);
forward_binop!(Scalar, Sub, sub);
forward_binop!(Scalar, Mul, mul);
impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(p) => Scalar::Exact(p.clone().neg()),
            Scalar::Float(f) => Scalar::Float(-f),
        }
    }
}
impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}
impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        *self = &*self + rhs;
    }
}

pub fn factorial(n: u32) -> Rational {
    (1..=n as i64).fold(Rational::one(), |a, k| a * rat_int(k))
}

pub fn binomial(n: i64, k: i64) -> Rational {
    if k < 0 || k > n {
        return Rational::zero();
    }
    let mut r = Rational::one();
    for j in 0..k {
        r = r * rat(n - j, j + 1);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &BigFloatC, b: &BigFloatC, digits: i32) -> bool {
        (a - b).below_pow10(digits)
    }

    #[test]
    fn gamma_one_is_one() {
        let g = gamma_quarter(&rat_int(1), 50).unwrap();
        assert!(close(&g, &BigFloatC::from_i64(1), 60));
    }

    #[test]
    fn gamma_half_is_sqrt_pi() {
        // The oracle is π from the constant cache, independent of the series.
        let g = gamma_quarter(&rat(1, 2), 50).unwrap();
        let sp = BigFloatC::from_real(bf_sqrt(&bf_pi()));
        assert!(close(&g, &sp, 48));
        assert!(g.to_decimal(12).0.starts_with("1.7724538509"));
    }

    #[test]
    fn gamma_recurrence() {
        for num in [1, 2, 3, 5] {
            let q = rat(num, 4);
            let g = gamma_quarter(&q, 50).unwrap();
            let g1 = gamma_quarter(&(&q + rat_int(1)), 50).unwrap();
            let diff = &g1 - &(&g * &BigFloatC::from_rational(&q));
            assert!((&diff / &g1).below_pow10(47), "q = {q}");
        }
        let ratio = &gamma_quarter(&rat(5, 4), 50).unwrap() / &gamma_quarter(&rat(1, 4), 50).unwrap();
        assert!(close(&ratio, &BigFloatC::from_rational(&rat(1, 4)), 48));
    }

    #[test]
    fn gamma_reflection_quarter() {
        let g1 = gamma_quarter(&rat(1, 4), 50).unwrap();
        let g3 = gamma_quarter(&rat(3, 4), 50).unwrap();
        let p = precision_bits();
        let want = BigFloatC::from_real(bf_mul(&bf_pi(), &bf_sqrt(&BigFloat::from_u32(2, p))));
        assert!(close(&(&g1 * &g3), &want, 47));
    }

    #[test]
    fn gamma_domain_errors() {
        assert!(gamma_quarter(&rat_int(0), 50).is_err());
        assert!(gamma_quarter(&rat(-1, 4), 50).is_err());
        assert!(gamma_quarter(&rat(1, 3), 50).is_err());
    }

    #[test]
    fn period_gamma_matches_numeric() {
        for m in 1..=13 {
            let exact = Period::gamma_quarter(m).unwrap().to_bigfloat();
            let num = gamma_quarter(&rat(m, 4), 50).unwrap();
            assert!(close(&exact, &num, 45), "m = {m}");
        }
    }

    #[test]
    fn period_sqrt2_squares_to_two() {
        let s2 = Period::monomial((0, 0, 1), Gr::one());
        assert_eq!(&s2 * &s2, Period::rational(Gr::from_int(2)));
        let g = Period::gamma_quarter(1).unwrap();
        let prod = &g * &Period::gamma_quarter(3).unwrap();
        assert_eq!(prod, Period::monomial((0, 2, 1), Gr::one()));
    }

    #[test]
    fn conversions() {
        let third = to_bigfloat(&Gr::from_ratio(1, 3));
        let s = third.to_decimal(10).0;
        assert!(s.contains("3333333333"), "{s}");
        assert!((third.re_f64() - 1.0 / 3.0).abs() < 1e-15);
        assert!(to_bigfloat(&Gr::zero()).is_zero());
        let i = to_bigfloat(&Gr::i());
        assert_eq!((i.re_f64(), i.im_f64()), (0.0, 1.0));
    }

    #[test]
    fn i_squared() {
        assert_eq!(&Gr::i() * &Gr::i(), Gr::from_int(-1));
        assert_eq!(Gr::i_pow(-1), -Gr::i());
    }

    fn arb_gr() -> impl Strategy<Value = Gr> {
        (-50i64..50, 1i64..20, -50i64..50, 1i64..20).prop_map(|(a, b, c, d)| Gr::new(rat(a, b), rat(c, d)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn distributive(a in arb_gr(), b in arb_gr(), c in arb_gr()) {
            prop_assert_eq!(&(&a + &b) * &c, &(&a * &c) + &(&b * &c));
        }
    }
}
