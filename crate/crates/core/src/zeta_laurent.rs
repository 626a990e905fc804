//! Laurent germs of zeta functions at `z = 0`, higher residues, the generalized
//! Radul cocycle, the exact bivariate series identities behind the local index
//! formula, and the symbol-level expansion of `[Δ^{−z}, Q]`.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::exact_scalars::{factorial, BigFloatC, Gr, Rational, Scalar};
use crate::json::{gr_from_json, rational_to_json, scalar_to_json};
use crate::symbol_algebra::FormalSymbol;
use crate::wodzicki_residue::residue;

// ---------------------------------------------------------------- germs

/// `Σ_{e ≥ −max_pole} c_e z^e`, truncated to finitely many terms.
#[derive(Clone, Debug)]
pub struct LaurentGerm {
    pub max_pole: usize,
    coeffs: BTreeMap<i64, Scalar>,
}

impl LaurentGerm {
    pub fn zero() -> Self {
        Self { max_pole: 0, coeffs: BTreeMap::new() }
    }

    /// Rejects exponents below `−max_pole`.
    pub fn new(max_pole: usize, coeffs: impl IntoIterator<Item = (i64, Scalar)>) -> Result<Self> {
        let mut g = Self { max_pole, coeffs: BTreeMap::new() };
        for (e, c) in coeffs {
            if e < -(max_pole as i64) {
                return Err(Error::Invalid(format!("exponent {e} below the declared pole order {max_pole}")));
            }
            g.add_term(e, &c);
        }
        Ok(g)
    }

    /// `res/z`: the germ of `Tr(PΔ^{−z/r})` when the residue is the only pole.
    pub fn simple_pole(res: Scalar) -> Self {
        let mut g = Self { max_pole: 1, coeffs: BTreeMap::new() };
        g.add_term(-1, &res);
        g
    }

    fn add_term(&mut self, e: i64, c: &Scalar) {
        let v = match self.coeffs.get(&e) {
            Some(x) => x + c,
            None => c.clone(),
        };
        if v.is_exact_zero() {
            self.coeffs.remove(&e);
        } else {
            self.coeffs.insert(e, v);
        }
    }

    pub fn coeff(&self, e: i64) -> Scalar {
        self.coeffs.get(&e).cloned().unwrap_or_else(Scalar::zero)
    }

    /// `⨍^p`: the coefficient of `z^{−p}`; `p = 0` gives the finite part.
    pub fn higher_residue(&self, p: usize) -> Scalar {
        if p > self.max_pole {
            return Scalar::zero();
        }
        self.coeff(-(p as i64))
    }

    /// The constant term of the Laurent expansion.
    pub fn partie_finie(&self) -> Scalar {
        self.coeff(0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut g = Self { max_pole: self.max_pole.max(o.max_pole), coeffs: self.coeffs.clone() };
        for (e, c) in &o.coeffs {
            g.add_term(*e, c);
        }
        g
    }

    pub fn scale(&self, c: &Gr) -> Self {
        let mut g = Self { max_pole: self.max_pole, coeffs: BTreeMap::new() };
        for (e, x) in &self.coeffs {
            g.add_term(*e, &x.scale(c));
        }
        g
    }

    /// `{"maxPole": p, "coeffs": {"-2": …, "-1": …}}`; values are exact
    /// Gaussian rationals, plain numbers, or the exact part of an exported value.
    pub fn from_json(v: &Value) -> Result<Self> {
        let max_pole = v
            .get("maxPole")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Invalid("germ needs an integer maxPole".into()))? as usize;
        let Some(Value::Object(m)) = v.get("coeffs") else {
            return Err(Error::Invalid("germ needs a coeffs object".into()));
        };
        let mut terms = Vec::new();
        for (k, x) in m {
            let e: i64 = k.trim().parse().map_err(|_| Error::Invalid(format!("bad exponent {k:?}")))?;
            let c = match x {
                Value::Number(n) if n.as_i64().is_none() => Scalar::Float(BigFloatC::from_f64(
                    n.as_f64().ok_or_else(|| Error::Invalid(format!("bad number {n}")))?,
                )),
                // Exported germs wrap exact values next to a display value.
                Value::Object(o) if o.contains_key("exact") => Scalar::from_gr(gr_from_json(&o["exact"])?),
                _ => Scalar::from_gr(gr_from_json(x)?),
            };
            terms.push((e, c));
        }
        Self::new(max_pole, terms)
    }

    pub fn to_json(&self) -> Value {
        let coeffs: Map<String, Value> = self.coeffs.iter().map(|(e, c)| (e.to_string(), scalar_to_json(c))).collect();
        json!({"maxPole": self.max_pole, "coeffs": coeffs})
    }
}

/// Supplies the zeta germ `Tr(PΔ^{−z/r})` at `z = 0` for a symbol `P`.
pub trait GermProvider {
    fn germ(&self, p: &FormalSymbol) -> Result<LaurentGerm>;
}

impl<F: Fn(&FormalSymbol) -> Result<LaurentGerm>> GermProvider for F {
    fn germ(&self, p: &FormalSymbol) -> Result<LaurentGerm> {
        self(p)
    }
}

/// The Heisenberg model: zeta functions have at most a simple pole, with
/// residue `⨍P`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeisenbergGerms;

impl GermProvider for HeisenbergGerms {
    fn germ(&self, p: &FormalSymbol) -> Result<LaurentGerm> {
        Ok(LaurentGerm::simple_pole(residue(p)?))
    }
}

/// Arguments are truncated this far below `−ν` before `δ` is iterated.
const WORK_MARGIN: i64 = 4;

/// `c(a₀, a₁) = Σ_{k=1}^{p} ((−1)^{k−1}/k!) ⨍^k a₀ δ^k(a₁)`.
pub fn generalized_radul(a0: &FormalSymbol, a1: &FormalSymbol, p: usize, germs: &dyn GermProvider) -> Result<Scalar> {
    if a0.ctx != a1.ctx {
        return Err(Error::ContextMismatch("generalized Radul cocycle arguments".into()));
    }
    let ctx = a0.ctx;
    let floor = -ctx.nu();
    let a0 = a0.truncate(floor - WORK_MARGIN);
    let mut dk = a1.truncate(floor - WORK_MARGIN);
    let mut acc = Scalar::zero();
    for k in 1..=p {
        dk = dk.delta();
        let g = germs.germ(&a0.star_floor(&dk, floor))?;
        let c = Gr::from_rational(Rational::from(if k % 2 == 1 { 1 } else { -1 }) / factorial(k as u32));
        acc += &g.higher_residue(k).scale(&c);
    }
    Ok(acc)
}

// ---------------------------------------------------------------- bivariate series

/// `Σ c_{ij} z^i X^j` known for `i ≤ z_order`, `j ≤ x_order`, with a formal rational `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BivariateSeries {
    pub r: Rational,
    pub z_order: usize,
    pub x_order: usize,
    c: Vec<Vec<Rational>>,
}

impl BivariateSeries {
    pub fn zero(r: &Rational, z_order: usize, x_order: usize) -> Self {
        Self { r: r.clone(), z_order, x_order, c: vec![vec![Rational::zero(); x_order + 1]; z_order + 1] }
    }

    pub fn one(r: &Rational, z_order: usize, x_order: usize) -> Self {
        let mut s = Self::zero(r, z_order, x_order);
        s.c[0][0] = Rational::one();
        s
    }

    /// A series in `X` alone.
    pub fn from_x(r: &Rational, z_order: usize, xs: &[Rational]) -> Self {
        let mut s = Self::zero(r, z_order, xs.len().saturating_sub(1));
        s.c[0] = xs.to_vec();
        s
    }

    pub fn coeff(&self, i: usize, j: usize) -> Rational {
        self.c.get(i).and_then(|row| row.get(j)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        if i <= self.z_order && j <= self.x_order {
            self.c[i][j] = v;
        }
    }

    fn check(&self, o: &Self) {
        assert!(self.r == o.r && self.z_order == o.z_order && self.x_order == o.x_order, "series shapes differ");
    }

    pub fn add_scaled(&self, o: &Self, k: &Rational) -> Self {
        self.check(o);
        let mut s = self.clone();
        for (row, orow) in s.c.iter_mut().zip(&o.c) {
            for (x, y) in row.iter_mut().zip(orow) {
                *x += &(y * k);
            }
        }
        s
    }

    pub fn scale(&self, k: &Rational) -> Self {
        Self::zero(&self.r, self.z_order, self.x_order).add_scaled(self, k)
    }

    /// Truncated product.
    pub fn mul(&self, o: &Self) -> Self {
        self.check(o);
        let mut s = Self::zero(&self.r, self.z_order, self.x_order);
        for (i, row) in self.c.iter().enumerate() {
            for (j, a) in row.iter().enumerate().filter(|(_, a)| !a.is_zero()) {
                for (k, orow) in o.c.iter().enumerate().take(self.z_order + 1 - i) {
                    for (l, b) in orow.iter().enumerate().take(self.x_order + 1 - j) {
                        if !b.is_zero() {
                            s.c[i + k][j + l] += &(a * b);
                        }
                    }
                }
            }
        }
        s
    }

    /// Multiplication by `z^k`.
    pub fn shift_z(&self, k: usize) -> Self {
        let mut s = Self::zero(&self.r, self.z_order, self.x_order);
        for i in k..=self.z_order {
            s.c[i] = self.c[i - k].clone();
        }
        s
    }

    /// Division by `z`, losing one order in `z`; `None` unless the `z⁰` row vanishes.
    pub fn div_z(&self) -> Option<Self> {
        if self.z_order == 0 || self.c[0].iter().any(|x| !x.is_zero()) {
            return None;
        }
        Some(Self { r: self.r.clone(), z_order: self.z_order - 1, x_order: self.x_order, c: self.c[1..].to_vec() })
    }

    /// Coefficients `(i, j)` where the two series differ.
    pub fn mismatches(&self, o: &Self) -> Vec<(usize, usize)> {
        self.check(o);
        let mut v = Vec::new();
        for i in 0..=self.z_order {
            for j in 0..=self.x_order {
                if self.c[i][j] != o.c[i][j] {
                    v.push((i, j));
                }
            }
        }
        v
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> =
            self.c.iter().map(|row| Value::Array(row.iter().map(rational_to_json).collect())).collect();
        json!({"r": rational_to_json(&self.r), "z_order": self.z_order, "x_order": self.x_order, "coeffs": rows})
    }
}

/// `log(1+X) = Σ_{l≥1} (−1)^{l−1} X^l/l` through `X^d`.
pub fn log1p_coefficients(d: usize) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); d + 1];
    for (l, x) in v.iter_mut().enumerate().skip(1) {
        *x = Rational::new((if l % 2 == 1 { 1 } else { -1 }).into(), (l as i64).into());
    }
    v
}

/// `(1/z) Σ_{k=1}^{D} binom(−z/r, k) X^k`, from the falling-factorial polynomials in `z`.
pub fn binomial_form(r: &Rational, z: usize, d: usize) -> BivariateSeries {
    let mut s = BivariateSeries::zero(r, z + 1, d);
    // poly = Π_{j<k} (−z/r − j), lowest power first.
    let mut poly = vec![Rational::one()];
    let minus_inv_r = -(Rational::one() / r);
    for k in 1..=d {
        let j = Rational::from((k - 1) as i64);
        let mut next = vec![Rational::zero(); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i + 1] += &(c * &minus_inv_r);
            next[i] -= &(c * &j);
        }
        poly = next;
        let kf = factorial(k as u32);
        for (i, c) in poly.iter().enumerate() {
            s.set(i, k, c / &kf);
        }
    }
    s.div_z().expect("binomial coefficients vanish at z = 0")
}

/// `(1/z)((1+X)^{−z/r} − 1)` as `(exp(−(z/r)·log(1+X)) − 1)/z`.
pub fn exponential_form(r: &Rational, z: usize, d: usize) -> BivariateSeries {
    let log = BivariateSeries::from_x(r, z + 1, &log1p_coefficients(d));
    let s = log.shift_z(1).scale(&-(Rational::one() / r));
    let mut acc = BivariateSeries::zero(r, z + 1, d);
    let mut pow = BivariateSeries::one(r, z + 1, d);
    // S has z-valuation 1, so S^m vanishes past m = z + 1.
    for m in 1..=z + 1 {
        pow = pow.mul(&s);
        acc = acc.add_scaled(&pow, &(Rational::one() / factorial(m as u32)));
    }
    acc.div_z().expect("exponential minus one vanishes at z = 0")
}

/// Sign pattern in front of the `q`-th log power.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogSign {
    /// `(−1)^{q−1}`, as displayed in the proof.
    Displayed,
    /// `(−1)^q`, from expanding the exponential.
    Corrected,
}

impl LogSign {
    fn sign(self, q: usize) -> i64 {
        let odd = match self {
            LogSign::Displayed => q % 2 == 0,
            LogSign::Corrected => q % 2 == 1,
        };
        if odd {
            -1
        } else {
            1
        }
    }
}

/// `Σ_{q≥1} (s_q/q!)(z^{q−1}/r^q) P_q(X)` with `P_q = log(1+X)^q`.
pub fn log_power_form(r: &Rational, z: usize, d: usize, sign: LogSign) -> BivariateSeries {
    let log = log1p_coefficients(d);
    power_form(r, z, d, |q| Rational::from(sign.sign(q)), |q| power_of(&log, q))
}

/// `Σ_{q≥1} (1/q!)(z^{q−1}/r^q) C_q(X)` with the composition sums `C_q = (−log(1+X))^q`.
pub fn composition_form(r: &Rational, z: usize, d: usize) -> BivariateSeries {
    power_form(r, z, d, |_| Rational::one(), |q| composition_sum(q, d))
}

fn power_form(
    r: &Rational,
    z: usize,
    d: usize,
    sign: impl Fn(usize) -> Rational,
    series: impl Fn(usize) -> Vec<Rational>,
) -> BivariateSeries {
    let mut acc = BivariateSeries::zero(r, z, d);
    let mut r_pow = Rational::one();
    for q in 1..=(z + 1).min(d) {
        r_pow = &r_pow * r;
        let k = &sign(q) / &(factorial(q as u32) * r_pow.clone());
        let term = BivariateSeries::from_x(r, z, &series(q)).shift_z(q - 1);
        acc = acc.add_scaled(&term, &k);
    }
    acc
}

fn power_of(xs: &[Rational], q: usize) -> Vec<Rational> {
    let d = xs.len() - 1;
    let mut acc = vec![Rational::zero(); d + 1];
    acc[0] = Rational::one();
    for _ in 0..q {
        let mut next = vec![Rational::zero(); d + 1];
        for (i, a) in acc.iter().enumerate().filter(|(_, a)| !a.is_zero()) {
            for (j, b) in xs.iter().enumerate().take(d + 1 - i) {
                next[i + j] += &(a * b);
            }
        }
        acc = next;
    }
    acc
}

/// `Σ_{k ≥ q} Σ_{k₁+…+k_q = k, k_i ≥ 1} ((−1)^k/(k₁⋯k_q)) X^k` through `X^d`, by
/// enumerating compositions.
pub fn composition_sum(q: usize, d: usize) -> Vec<Rational> {
    fn walk(left: usize, parts: usize, prod: i64, out: &mut Rational) {
        if parts == 0 {
            if left == 0 {
                *out += &Rational::new(1.into(), prod.into());
            }
            return;
        }
        for k in 1..=left.saturating_sub(parts - 1) {
            walk(left - k, parts - 1, prod * k as i64, out);
        }
    }
    let mut v = vec![Rational::zero(); d + 1];
    for (k, x) in v.iter_mut().enumerate().skip(q.max(1)) {
        let mut s = Rational::zero();
        walk(k, q, 1, &mut s);
        *x = if k % 2 == 0 { s } else { -s };
    }
    v
}

/// The composition sum next to `log(1+X)^q`, computed independently.
#[derive(Clone, Debug)]
pub struct LogPowerCoefficients {
    pub q: usize,
    pub composition: Vec<Rational>,
    pub log_power: Vec<Rational>,
    /// `s` with `composition = s · log_power`, if either sign works.
    pub relative_sign: Option<i64>,
}

impl LogPowerCoefficients {
    pub fn to_json(&self) -> Value {
        json!({
            "q": self.q,
            "composition": self.composition.iter().map(rational_to_json).collect::<Vec<_>>(),
            "log_power": self.log_power.iter().map(rational_to_json).collect::<Vec<_>>(),
            "relative_sign": self.relative_sign,
        })
    }
}

pub fn log_power_coefficients(q: usize, d: usize) -> LogPowerCoefficients {
    let composition = composition_sum(q, d);
    let log_power = power_of(&log1p_coefficients(d), q);
    let relative_sign = [1i64, -1].into_iter().find(|&s| {
        let s = Rational::from(s);
        composition.iter().zip(&log_power).all(|(a, b)| *a == &s * b)
    });
    LogPowerCoefficients { q, composition, log_power, relative_sign }
}

/// Coefficient-wise comparison of the expansions of `(1/z)((1+X)^{−z/r} − 1)`.
#[derive(Clone, Debug)]
pub struct CmIdentityReport {
    pub r: Rational,
    pub z_order: usize,
    pub x_order: usize,
    pub binomial_vs_exponential: Vec<(usize, usize)>,
    pub corrected_log_power: Vec<(usize, usize)>,
    pub displayed_log_power: Vec<(usize, usize)>,
    /// The displayed log-power form equals minus the function.
    pub displayed_is_negated: bool,
    pub composition_form: Vec<(usize, usize)>,
    /// The `z⁰X¹` coefficient; `−1/r`.
    pub z0_x1: Rational,
}

impl CmIdentityReport {
    /// The identities that must hold exactly.
    pub fn holds(&self) -> bool {
        self.binomial_vs_exponential.is_empty()
            && self.corrected_log_power.is_empty()
            && self.composition_form.is_empty()
            && self.z0_x1 == -(Rational::one() / &self.r)
    }
    pub fn to_json(&self) -> Value {
        let m = |v: &Vec<(usize, usize)>| json!({"mismatches": v.len(), "first": v.first()});
        json!({
            "r": rational_to_json(&self.r),
            "z_order": self.z_order,
            "x_order": self.x_order,
            "binomial_vs_exponential": m(&self.binomial_vs_exponential),
            "log_power_sign_(-1)^q": m(&self.corrected_log_power),
            "log_power_sign_(-1)^(q-1)": m(&self.displayed_log_power),
            "displayed_sign_gives_negative": self.displayed_is_negated,
            "composition_sums_with_1/q!": m(&self.composition_form),
            "z0_x1": rational_to_json(&self.z0_x1),
        })
    }
}

pub fn cm_identity_check(r: &Rational, z: usize, d: usize) -> Result<CmIdentityReport> {
    if z == 0 || d == 0 {
        return Err(Error::Invalid("series orders must be at least 1".into()));
    }
    if r.is_zero() {
        return Err(Error::Invalid("r must be nonzero".into()));
    }
    let bin = binomial_form(r, z, d);
    let exp = exponential_form(r, z, d);
    let displayed = log_power_form(r, z, d, LogSign::Displayed);
    Ok(CmIdentityReport {
        r: r.clone(),
        z_order: z,
        x_order: d,
        binomial_vs_exponential: bin.mismatches(&exp),
        corrected_log_power: exp.mismatches(&log_power_form(r, z, d, LogSign::Corrected)),
        displayed_log_power: exp.mismatches(&displayed),
        displayed_is_negated: exp.scale(&-Rational::one()).mismatches(&displayed).is_empty(),
        composition_form: exp.mismatches(&composition_form(r, z, d)),
        z0_x1: bin.coeff(0, 1),
    })
}

// ---------------------------------------------------------------- CM trick

/// One term `binom(−z, k) · Q^{(k)} ⋆ Δ^{−k}` of `[Δ^{−z}, Q]`.
#[derive(Clone, Debug)]
pub struct CmTerm {
    pub k: usize,
    /// Coefficients of `binom(−z, k)` in `z`, lowest power first.
    pub binomial: Vec<Rational>,
    pub symbol: FormalSymbol,
}

/// `binom(−z, k)` as a polynomial in `z`.
pub fn binomial_minus_z(k: usize) -> Vec<Rational> {
    let mut poly = vec![Rational::one()];
    for j in 0..k {
        let mut next = vec![Rational::zero(); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i + 1] -= c;
            next[i] -= &(c * &Rational::from(j as i64));
        }
        poly = next;
    }
    let kf = factorial(k as u32);
    poly.iter().map(|c| c / &kf).collect()
}

/// The terms `k = 1…n_terms` of `[Δ^{−z}, Q] ∼ Σ binom(−z, k) Q^{(k)} Δ^{−z−k}`,
/// without the common `Δ^{−z}`; `Δ = s⁴` and `Q^{(k)} = ad(Δ)^k Q`. Each term has
/// order at most `ord Q − k` and is kept down to `ord Q − n_terms`.
pub fn cm_operator_expansion(q: &FormalSymbol, n_terms: usize) -> Result<Vec<CmTerm>> {
    if n_terms == 0 {
        return Err(Error::Invalid("need at least one term".into()));
    }
    let ctx = q.ctx;
    let floor = (q.top - n_terms as i64).max(q.cutoff);
    let delta4 = FormalSymbol::s_power(ctx, 4);
    let mut qk = q.clone();
    let mut out = Vec::with_capacity(n_terms);
    for k in 1..=n_terms {
        // Q^{(k)} has order ≤ ord Q + 3k and is needed down to floor + 4k.
        let fl = floor + 4 * k as i64;
        qk = delta4.star_floor(&qk, fl).sub(&qk.star_floor(&delta4, fl));
        let inv = FormalSymbol::s_power(ctx, -4 * k as i32);
        out.push(CmTerm { k, binomial: binomial_minus_z(k), symbol: qk.star_floor(&inv, floor).truncate(floor) });
    }
    Ok(out)
}

/// `Σ_k [z^j] binom(−z, k) · Q^{(k)} Δ^{−k}`.
pub fn cm_z_coefficient(terms: &[CmTerm], j: usize) -> Option<FormalSymbol> {
    let first = terms.first()?;
    let mut acc = FormalSymbol::zero_with(first.symbol.ctx, first.symbol.top, first.symbol.cutoff);
    for t in terms {
        if let Some(c) = t.binomial.get(j) {
            acc = acc.add_scaled(&t.symbol, &Gr::from_rational(c.clone()));
        }
    }
    Some(acc)
}
