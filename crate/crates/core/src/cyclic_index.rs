//! The (B,b)-bicomplex on symbol cochains, the explicit cocycle families
//! (Radul, ψ, φ, γ, γ′), the transgression check, the K₁ pairing and both
//! index formulas. Every cochain is matrix-amplified: arguments are square
//! matrices of symbols and the trace is taken inside the residue.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use serde_json::{json, Value};

use crate::coefficient_backends::CoeffFunction;
use crate::error::{Error, Result};
use crate::exact_scalars::{factorial, rat_int, Gr, Period, Scalar};
use crate::form_calculus::{commutator_with_f, conventions, delta_f, f_multiplier, omega_power, FormSymbol};
use crate::json::{get, get_i64};
use crate::symbol_algebra::{principal_inverse, Component, FormalSymbol, HeisenbergContext, XiMono, EXACT};
use crate::wodzicki_residue::{residue, residue_form, sphere_integral, PointForm};

/// Square matrix of symbols, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymMat {
    pub ctx: HeisenbergContext,
    pub size: usize,
    pub e: Vec<FormalSymbol>,
}

impl SymMat {
    pub fn scalar(a: FormalSymbol) -> Self {
        Self { ctx: a.ctx, size: 1, e: vec![a] }
    }
    pub fn from_rows(rows: Vec<Vec<FormalSymbol>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 || rows.iter().any(|r| r.len() != size) {
            return Err(Error::Invalid("matrix must be square and non-empty".into()));
        }
        let ctx = rows[0][0].ctx;
        let e: Vec<FormalSymbol> = rows.into_iter().flatten().collect();
        if e.iter().any(|a| a.ctx != ctx) {
            return Err(Error::ContextMismatch("matrix entries from different contexts".into()));
        }
        Ok(Self { ctx, size, e })
    }
    pub fn identity(ctx: HeisenbergContext, size: usize) -> Self {
        let e = (0..size * size)
            .map(|k| if k / size == k % size { FormalSymbol::one(ctx) } else { FormalSymbol::zero(ctx) })
            .collect();
        Self { ctx, size, e }
    }
    pub fn get(&self, i: usize, j: usize) -> &FormalSymbol {
        &self.e[i * self.size + j]
    }
    pub fn map(&self, f: impl Fn(&FormalSymbol) -> FormalSymbol) -> Self {
        Self { ctx: self.ctx, size: self.size, e: self.e.iter().map(f).collect() }
    }
    fn zip(&self, o: &Self, f: impl Fn(&FormalSymbol, &FormalSymbol) -> FormalSymbol) -> Self {
        assert_eq!(self.size, o.size, "matrix size mismatch");
        Self { ctx: self.ctx, size: self.size, e: self.e.iter().zip(&o.e).map(|(a, b)| f(a, b)).collect() }
    }
    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.add(b))
    }
    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.sub(b))
    }
    pub fn scale(&self, c: &Gr) -> Self {
        self.map(|a| a.scale(c))
    }
    pub fn truncate(&self, floor: i64) -> Self {
        self.map(|a| a.truncate(floor))
    }
    pub fn cutoff(&self) -> i64 {
        self.e.iter().map(|a| a.cutoff).max().unwrap_or(EXACT)
    }
    pub fn mul_floor(&self, o: &Self, floor: i64) -> Self {
        assert_eq!(self.size, o.size, "matrix size mismatch");
        let n = self.size;
        let mut e = vec![FormalSymbol::zero(self.ctx); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() && a.is_exact() {
                    continue;
                }
                for j in 0..n {
                    let b = o.get(k, j);
                    if b.is_zero() && b.is_exact() {
                        continue;
                    }
                    e[i * n + j] = e[i * n + j].add(&a.star_floor(b, floor));
                }
            }
        }
        Self { ctx: self.ctx, size: n, e }
    }
    pub fn trace(&self) -> FormalSymbol {
        (0..self.size).fold(FormalSymbol::zero(self.ctx), |acc, i| acc.add(self.get(i, i)))
    }
    pub fn block_diag(&self, o: &Self) -> Self {
        let n = self.size + o.size;
        let mut e = vec![FormalSymbol::zero(self.ctx); n * n];
        for i in 0..self.size {
            for j in 0..self.size {
                e[i * n + j] = self.get(i, j).clone();
            }
        }
        for i in 0..o.size {
            for j in 0..o.size {
                e[(i + self.size) * n + j + self.size] = o.get(i, j).clone();
            }
        }
        Self { ctx: self.ctx, size: n, e }
    }
    pub fn principal(&self) -> Vec<Component> {
        self.e.iter().map(|a| a.component(0).unwrap_or_default()).collect()
    }
    pub fn is_constant_multiple_of_one(&self) -> bool {
        let one = FormalSymbol::one(self.ctx);
        self.e.iter().enumerate().all(|(k, a)| {
            let z = a.is_zero();
            if k / self.size == k % self.size {
                a.sub(&one).is_zero()
            } else {
                z
            }
        })
    }
    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> =
            (0..self.size).map(|i| Value::Array((0..self.size).map(|j| self.get(i, j).to_json()).collect())).collect();
        Value::Array(rows)
    }
    pub fn from_json(v: &Value) -> Result<Self> {
        let rows = v.as_array().ok_or_else(|| Error::Invalid("matrix must be an array of rows".into()))?;
        let mut out = Vec::new();
        for r in rows {
            let r = r.as_array().ok_or_else(|| Error::Invalid("matrix row must be an array".into()))?;
            out.push(r.iter().map(FormalSymbol::from_json).collect::<Result<Vec<_>>>()?);
        }
        Self::from_rows(out)
    }
}

/// Arguments a cochain can be evaluated on.
pub trait CochainArg: Clone {
    fn product(&self, o: &Self) -> Self;
    fn unit_like(&self) -> Self;
}

impl CochainArg for SymMat {
    fn product(&self, o: &Self) -> Self {
        self.mul_floor(o, -self.ctx.nu() - WORK_MARGIN)
    }
    fn unit_like(&self) -> Self {
        SymMat::identity(self.ctx, self.size)
    }
}

/// Which formula a cochain evaluates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    Radul,
    Psi(usize),
    Phi(usize),
    Gamma(usize),
    GammaPrime(usize),
    TopPsi(TopPrefactor),
    Custom(String),
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Radul => write!(f, "radul"),
            Rule::Psi(k) => write!(f, "psi_{}", 2 * k - 1),
            Rule::Phi(k) => write!(f, "phi_{}", 2 * k + 1),
            Rule::Gamma(k) => write!(f, "gamma_{}", 2 * k),
            Rule::GammaPrime(k) => write!(f, "gamma'_{}", 2 * k),
            Rule::TopPsi(v) => write!(f, "top_psi[{}]", v.name()),
            Rule::Custom(s) => write!(f, "{s}"),
        }
    }
}

pub type Evaluator<A> = Rc<dyn Fn(&[A]) -> Result<Scalar>>;

/// An element of `CC^degree`: a multilinear functional of `degree + 1` arguments.
#[derive(Clone)]
pub struct Cochain<A> {
    pub degree: usize,
    pub rule: Rule,
    eval: Evaluator<A>,
}

impl<A> fmt::Debug for Cochain<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cochain({}, CC^{})", self.rule, self.degree)
    }
}

impl<A: CochainArg + 'static> Cochain<A> {
    pub fn new(degree: usize, rule: Rule, f: impl Fn(&[A]) -> Result<Scalar> + 'static) -> Self {
        Self { degree, rule, eval: Rc::new(f) }
    }
    pub fn custom(degree: usize, name: &str, f: impl Fn(&[A]) -> Result<Scalar> + 'static) -> Self {
        Self::new(degree, Rule::Custom(name.into()), f)
    }
    pub fn zero(degree: usize) -> Self {
        Self::custom(degree, "0", |_| Ok(Scalar::zero()))
    }
    pub fn arity(&self) -> usize {
        self.degree + 1
    }
    pub fn eval(&self, args: &[A]) -> Result<Scalar> {
        if args.len() != self.arity() {
            return Err(Error::Invalid(format!("{} takes {} arguments, got {}", self.rule, self.arity(), args.len())));
        }
        (self.eval)(args)
    }

    /// `bφ(a₀…a_{k+1}) = Σ_{i≤k} (−1)^i φ(…, a_i a_{i+1}, …) + (−1)^{k+1} φ(a_{k+1}a₀, a₁, …, a_k)`.
    pub fn hochschild_b(&self) -> Self {
        let phi = self.clone();
        let k = self.degree;
        Self::custom(k + 1, &format!("b({})", self.rule), move |a: &[A]| {
            let mut acc = Scalar::zero();
            for i in 0..=k {
                let mut t: Vec<A> = Vec::with_capacity(k + 1);
                t.extend_from_slice(&a[..i]);
                t.push(a[i].product(&a[i + 1]));
                t.extend_from_slice(&a[i + 2..]);
                acc += &phi.eval(&t)?.scale(&sign(i));
            }
            let mut t = vec![a[k + 1].product(&a[0])];
            t.extend_from_slice(&a[1..=k]);
            acc += &phi.eval(&t)?.scale(&sign(k + 1));
            Ok(acc)
        })
    }

    /// `Bφ(a₀…a_k) = Σ_i (−1)^{ik} φ(1, a_i, …, a_k, a₀, …, a_{i−1})`, `CC^{k+1} → CC^k`.
    pub fn connes_b(&self) -> Result<Self> {
        if self.degree == 0 {
            return Err(Error::Invalid("B needs a cochain of degree ≥ 1".into()));
        }
        let phi = self.clone();
        let k = self.degree - 1;
        Ok(Self::custom(k, &format!("B({})", self.rule), move |a: &[A]| {
            let mut acc = Scalar::zero();
            for i in 0..=k {
                let mut t = vec![a[0].unit_like()];
                t.extend_from_slice(&a[i..]);
                t.extend_from_slice(&a[..i]);
                acc += &phi.eval(&t)?.scale(&sign(i * k));
            }
            Ok(acc)
        }))
    }

    pub fn add_scaled(&self, o: &Self, c: &Gr) -> Result<Self> {
        if self.degree != o.degree {
            return Err(Error::Invalid(format!("cannot add CC^{} and CC^{}", self.degree, o.degree)));
        }
        let (p, q, c) = (self.clone(), o.clone(), c.clone());
        Ok(Self::custom(self.degree, &format!("{} + ({c})·{}", self.rule, o.rule), move |a: &[A]| {
            Ok(&p.eval(a)? + &q.eval(a)?.scale(&c))
        }))
    }
    pub fn add(&self, o: &Self) -> Result<Self> {
        self.add_scaled(o, &Gr::one())
    }
    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add_scaled(o, &Gr::from_int(-1))
    }
    pub fn scale(&self, c: &Gr) -> Self {
        let (p, c) = (self.clone(), c.clone());
        Self::custom(self.degree, &format!("({c})·{}", self.rule), move |a: &[A]| Ok(p.eval(a)?.scale(&c)))
    }
}

fn sign(k: usize) -> Gr {
    Gr::from_int(if k % 2 == 0 { 1 } else { -1 })
}

/// Components below `−ν − WORK_MARGIN` never reach the residue: every factor in
/// the cocycle formulas has order at most 2 (the bare `F`).
const WORK_MARGIN: i64 = 4;

// ---------------------------------------------------------------- form matrices

#[derive(Clone, Debug)]
struct FormMat {
    size: usize,
    e: Vec<Option<FormSymbol>>,
}

fn form_top(f: &FormSymbol) -> i64 {
    f.parts.values().chain(f.eps.values()).map(|a| a.top).max().unwrap_or(EXACT)
}

impl FormMat {
    fn from_sym(a: &SymMat, f: impl Fn(&FormalSymbol) -> FormSymbol) -> Self {
        let e = a.e.iter().map(|x| Some(f(x)).filter(|v| !(v.parts.is_empty() && v.eps.is_empty()))).collect();
        Self { size: a.size, e }
    }
    fn diag(x: &FormSymbol, size: usize) -> Self {
        let e = (0..size * size).map(|k| if k / size == k % size { Some(x.clone()) } else { None }).collect();
        Self { size, e }
    }
    fn top(&self) -> i64 {
        self.e.iter().flatten().map(form_top).max().unwrap_or(EXACT)
    }
    fn mul_floor(&self, o: &Self, floor: i64) -> Self {
        let n = self.size;
        let mut e: Vec<Option<FormSymbol>> = vec![None; n * n];
        for i in 0..n {
            for k in 0..n {
                let Some(a) = &self.e[i * n + k] else { continue };
                for j in 0..n {
                    let Some(b) = &o.e[k * n + j] else { continue };
                    let p = a.star_floor(b, floor);
                    let slot = &mut e[i * n + j];
                    *slot = Some(match slot.take() {
                        Some(s) => s.add(&p),
                        None => p,
                    });
                }
            }
        }
        Self { size: n, e }
    }
    fn trace(&self, ctx: HeisenbergContext) -> FormSymbol {
        (0..self.size).filter_map(|i| self.e[i * self.size + i].as_ref()).fold(FormSymbol::zero(ctx), |a, b| a.add(b))
    }
}

/// One term `coeff · ⨍ tr(L[..a] · X · L[b..])`; `X = None` is the empty product.
struct Splice {
    a: usize,
    b: usize,
    x: Option<FormMat>,
    coeff: Gr,
}

/// Sums spliced products sharing prefix and suffix products of `seq`. Floors keep
/// exactly what can still reach degree `−ν` after the remaining factors.
fn spliced_residue(ctx: HeisenbergContext, seq: &[FormMat], splices: &[Splice]) -> Result<Scalar> {
    let nu = ctx.nu();
    let len = seq.len();
    let pos = |t: i64| t.max(0);
    let tops: Vec<i64> = seq.iter().map(|f| pos(f.top())).collect();
    let xtop = splices.iter().filter_map(|s| s.x.as_ref()).map(|x| pos(x.top())).max().unwrap_or(0);
    let after = |a: usize| tops[a..].iter().sum::<i64>();
    let before = |b: usize| tops[..b].iter().sum::<i64>();
    let need_pre = splices.iter().map(|s| s.a).max().unwrap_or(0);
    let need_suf = splices.iter().map(|s| s.b).min().unwrap_or(len);
    let mut pre: Vec<Option<FormMat>> = vec![None; len + 1];
    for a in 1..=need_pre {
        let floor = -nu - xtop - after(a);
        pre[a] = Some(match &pre[a - 1] {
            None => seq[0].clone(),
            Some(p) => p.mul_floor(&seq[a - 1], floor),
        });
    }
    let mut suf: Vec<Option<FormMat>> = vec![None; len + 1];
    for b in (need_suf..len).rev() {
        let floor = -nu - xtop - before(b);
        suf[b] = Some(match &suf[b + 1] {
            None => seq[len - 1].clone(),
            Some(s) => seq[b].mul_floor(s, floor),
        });
    }
    let mut acc = Scalar::zero();
    for s in splices {
        let mut parts: Vec<&FormMat> = Vec::new();
        if let Some(p) = &pre[s.a] {
            parts.push(p);
        }
        if let Some(x) = &s.x {
            parts.push(x);
        }
        if let Some(q) = &suf[s.b] {
            parts.push(q);
        }
        let Some((first, rest)) = parts.split_first() else { continue };
        let mut prod = (*first).clone();
        for (j, f) in rest.iter().enumerate() {
            let later: i64 = rest[j + 1..].iter().map(|g| pos(g.top())).sum();
            prod = prod.mul_floor(f, -nu - later);
        }
        acc += &residue_form(&prod.trace(ctx))?.scale(&s.coeff);
    }
    Ok(acc)
}

fn check_args(args: &[SymMat], want: usize) -> Result<(HeisenbergContext, usize)> {
    if args.len() != want {
        return Err(Error::Invalid(format!("expected {want} arguments, got {}", args.len())));
    }
    let ctx = args[0].ctx;
    let size = args[0].size;
    if args.iter().any(|a| a.ctx != ctx) {
        return Err(Error::ContextMismatch("cochain arguments from different contexts".into()));
    }
    if args.iter().any(|a| a.size != size) {
        return Err(Error::Invalid("cochain arguments of different matrix sizes".into()));
    }
    Ok((ctx, size))
}

/// Arguments truncated to the working window.
fn work(args: &[SymMat]) -> Vec<SymMat> {
    args.iter().map(|a| a.truncate(-a.ctx.nu() - WORK_MARGIN)).collect()
}

fn comm(a: &SymMat) -> FormMat {
    FormMat::from_sym(a, commutator_with_f)
}
fn delta_of(a: &SymMat) -> FormMat {
    FormMat::from_sym(a, |x| FormSymbol::from_symbol(x.delta()))
}
fn as_form(a: &SymMat) -> FormMat {
    FormMat::from_sym(a, |x| FormSymbol::from_symbol(x.clone()))
}

/// `ω^m / n!`.
fn omega_tail(ctx: HeisenbergContext, m: usize, size: usize) -> FormMat {
    let w = omega_power(ctx, m).scale(&Gr::from_rational(factorial(m as u32) / factorial(ctx.n as u32)));
    FormMat::diag(&w, size)
}

fn c_pow_inv(k: usize) -> Gr {
    conventions().c.pow(k as u32).inv().expect("c ≠ 0")
}

fn fact(k: usize) -> Gr {
    Gr::from_rational(factorial(k as u32))
}

fn bare_f(ctx: HeisenbergContext, size: usize) -> Result<FormMat> {
    Ok(FormMat::diag(&f_multiplier(ctx)?, size))
}

/// `c(a₀, a₁) = ⨍ tr(a₀ ⋆ δa₁)`.
pub fn radul_cocycle(args: &[SymMat]) -> Result<Scalar> {
    let (ctx, _) = check_args(args, 2)?;
    let w = work(args);
    let d1 = w[1].map(|x| x.delta());
    residue(&w[0].mul_floor(&d1, -ctx.nu()).trace())
}

/// `ψ_{2k−1}`: `k!/(c^k(2k)!) Σ_{i=0}^{2k−1} (−1)^{i+1} ⨍(a₀[F,a₁]…[F,a_i] δF [F,a_{i+1}]… ⊗ ω^{n−k}/n!)`.
pub fn psi_cocycle(k: usize, args: &[SymMat]) -> Result<Scalar> {
    let (ctx, size) = check_args(args, 2 * k)?;
    if k == 0 || k > ctx.n {
        return Err(Error::Invalid(format!("psi needs 1 ≤ k ≤ n, got k = {k}")));
    }
    let w = work(args);
    let mut seq = vec![as_form(&w[0])];
    seq.extend(w[1..].iter().map(comm));
    seq.push(omega_tail(ctx, ctx.n - k, size));
    let df = FormMat::diag(&delta_f(ctx), size);
    let splices: Vec<Splice> =
        (0..2 * k).map(|i| Splice { a: 1 + i, b: 1 + i, x: Some(df.clone()), coeff: sign(i + 1) }).collect();
    let pref = &(&fact(k) * &c_pow_inv(k)) * &Gr::from_rational(rat_int(1) / factorial(2 * k as u32));
    Ok(spliced_residue(ctx, &seq, &splices)?.scale(&pref))
}

/// `φ_{2k+1}`: `k!/(c^k(2k+1)!) Σ_{i=1}^{2k+1} (−1)^{i−1} ⨍(a₀[F,a₁]…δa_i…[F,a_{2k+1}] ⊗ ω^{n−k}/n!)`.
pub fn phi_cocycle(k: usize, args: &[SymMat]) -> Result<Scalar> {
    let (ctx, size) = check_args(args, 2 * k + 2)?;
    if k > ctx.n {
        return Err(Error::Invalid(format!("phi needs k ≤ n, got k = {k}")));
    }
    let w = work(args);
    let mut seq = vec![as_form(&w[0])];
    seq.extend(w[1..].iter().map(comm));
    seq.push(omega_tail(ctx, ctx.n - k, size));
    let splices: Vec<Splice> =
        (1..=2 * k + 1).map(|i| Splice { a: i, b: i + 1, x: Some(delta_of(&w[i])), coeff: sign(i - 1) }).collect();
    let pref = &(&fact(k) * &c_pow_inv(k)) * &Gr::from_rational(rat_int(1) / factorial(2 * k as u32 + 1));
    Ok(spliced_residue(ctx, &seq, &splices)?.scale(&pref))
}

/// `γ_{2k}`: `k!/(2c^{k+1}(2k+1)!) Σ_{i=0}^{2k} (−1)^i ⨍(a₀F[F,a₁]…[F,a_i] δF [F,a_{i+1}]…[F,a_{2k}] ⊗ ω^{n−k−1}/n!)`.
/// Zero for `k = n`. GAUSSIAN only.
pub fn gamma_even(k: usize, args: &[SymMat]) -> Result<Scalar> {
    let (ctx, size) = check_args(args, 2 * k + 1)?;
    if k >= ctx.n {
        return Ok(Scalar::zero());
    }
    let f = bare_f(ctx, size)?;
    let w = work(args);
    let mut seq = vec![as_form(&w[0]), f];
    seq.extend(w[1..].iter().map(comm));
    seq.push(omega_tail(ctx, ctx.n - k - 1, size));
    let df = FormMat::diag(&delta_f(ctx), size);
    let splices: Vec<Splice> =
        (0..=2 * k).map(|i| Splice { a: 2 + i, b: 2 + i, x: Some(df.clone()), coeff: sign(i) }).collect();
    let pref =
        &(&fact(k) * &c_pow_inv(k + 1)) * &Gr::from_rational(rat_int(1) / (rat_int(2) * factorial(2 * k as u32 + 1)));
    Ok(spliced_residue(ctx, &seq, &splices)?.scale(&pref))
}

/// The two unnormalized pieces of `γ′_{2k}`: `⨍(a₀ δa₁ F [F,a₂]…[F,a_{2k}] ⊗ ω^{n−k}/n!)`
/// and `Σ_{i=1}^{2k} (−1)^{i−1} ⨍(a₀F[F,a₁]…δa_i…[F,a_{2k}] ⊗ ω^{n−k}/n!)`. GAUSSIAN only.
pub fn gamma_prime_parts(k: usize, args: &[SymMat]) -> Result<(Scalar, Scalar)> {
    let (ctx, size) = check_args(args, 2 * k + 1)?;
    if k == 0 || k > ctx.n {
        return Err(Error::Invalid(format!("gamma' needs 1 ≤ k ≤ n, got k = {k}")));
    }
    let f = bare_f(ctx, size)?;
    let w = work(args);
    let tail = omega_tail(ctx, ctx.n - k, size);
    let mut first = vec![as_form(&w[0]), delta_of(&w[1]), f.clone()];
    first.extend(w[2..].iter().map(comm));
    first.push(tail.clone());
    let l = first.len();
    let first = spliced_residue(ctx, &first, &[Splice { a: l, b: l, x: None, coeff: Gr::one() }])?;
    let mut seq = vec![as_form(&w[0]), f];
    seq.extend(w[1..].iter().map(comm));
    seq.push(tail);
    let splices: Vec<Splice> =
        (1..=2 * k).map(|i| Splice { a: 1 + i, b: 2 + i, x: Some(delta_of(&w[i])), coeff: sign(i - 1) }).collect();
    Ok((first, spliced_residue(ctx, &seq, &splices)?))
}

/// `γ′_{2k} = k!/(c^k(2k+1)!)·(first + sum)` over [`gamma_prime_parts`], `1 ≤ k ≤ n`.
pub fn gamma_prime(k: usize, args: &[SymMat]) -> Result<Scalar> {
    let (first, sum) = gamma_prime_parts(k, args)?;
    let pref = &(&fact(k) * &c_pow_inv(k)) * &Gr::from_rational(rat_int(1) / factorial(2 * k as u32 + 1));
    Ok((&first + &sum).scale(&pref))
}

pub fn radul() -> Cochain<SymMat> {
    Cochain::new(1, Rule::Radul, radul_cocycle)
}
pub fn psi(k: usize) -> Cochain<SymMat> {
    Cochain::new(2 * k - 1, Rule::Psi(k), move |a: &[SymMat]| psi_cocycle(k, a))
}
pub fn phi(k: usize) -> Cochain<SymMat> {
    Cochain::new(2 * k + 1, Rule::Phi(k), move |a: &[SymMat]| phi_cocycle(k, a))
}
pub fn gamma(k: usize) -> Cochain<SymMat> {
    Cochain::new(2 * k, Rule::Gamma(k), move |a: &[SymMat]| gamma_even(k, a))
}
pub fn gamma_p(k: usize) -> Cochain<SymMat> {
    Cochain::new(2 * k, Rule::GammaPrime(k), move |a: &[SymMat]| gamma_prime(k, a))
}
pub fn top_psi(n: usize, v: TopPrefactor) -> Cochain<SymMat> {
    Cochain::new(2 * n - 1, Rule::TopPsi(v), move |a: &[SymMat]| top_degree_psi(a, v))
}

// ---------------------------------------------------------------- transgression

/// Deviations of the three form-degree components of
/// `(ψ_{2k−1} + φ_{2k+1}) − (ψ_{2k+1} + φ_{2k+3}) = (B+b)(γ_{2k} − γ′_{2k+2})`.
#[derive(Clone, Debug)]
pub struct TransgressionReport {
    pub k: usize,
    /// `ψ_{2k−1} − Bγ_{2k}` on `2k` arguments (absent for `k = 0`).
    pub low: f64,
    /// `φ_{2k+1} − ψ_{2k+1} − bγ_{2k} + Bγ′_{2k+2}` on `2k+2` arguments.
    pub middle: f64,
    /// `−φ_{2k+3} + bγ′_{2k+2}` on `2k+4` arguments.
    pub high: f64,
}

impl TransgressionReport {
    pub fn max_deviation(&self) -> f64 {
        self.low.max(self.middle).max(self.high)
    }
    pub fn to_json(&self) -> Value {
        json!({"k": self.k, "CC_low": self.low, "CC_middle": self.middle, "CC_high": self.high, "max": self.max_deviation()})
    }
}

/// The transgression identity on sample tuples; tuples must be long enough for
/// the top component (`2k + 4` entries, shorter prefixes are used below).
pub fn check_transgression(k: usize, tuples: &[Vec<SymMat>]) -> Result<TransgressionReport> {
    let Some(ctx) = tuples.first().and_then(|t| t.first()).map(|a| a.ctx) else {
        return Err(Error::Invalid("no sample tuples".into()));
    };
    if k + 1 > ctx.n {
        return Err(Error::Invalid(format!("transgression needs k ≤ n − 1, got k = {k}")));
    }
    let g = gamma(k);
    let gp = gamma_p(k + 1);
    let low = if k == 0 { None } else { Some(psi(k).sub(&g.connes_b()?)?) };
    let mid = phi(k).sub(&psi(k + 1))?.sub(&g.hochschild_b())?.add(&gp.connes_b()?)?;
    let high = phi(k + 1).scale(&Gr::from_int(-1)).add(&gp.hochschild_b())?;
    let mut rep = TransgressionReport { k, low: 0.0, middle: 0.0, high: 0.0 };
    for t in tuples {
        if t.len() < 2 * k + 4 {
            return Err(Error::Invalid(format!("sample tuples need {} entries", 2 * k + 4)));
        }
        if let Some(l) = &low {
            rep.low = rep.low.max(l.eval(&t[..2 * k])?.abs_f64());
        }
        rep.middle = rep.middle.max(mid.eval(&t[..2 * k + 2])?.abs_f64());
        rep.high = rep.high.max(high.eval(&t[..2 * k + 4])?.abs_f64());
    }
    Ok(rep)
}

// ---------------------------------------------------------------- top degree

/// The stated normalizations of the top-degree form of `ψ_{2n−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TopPrefactor {
    /// `(−1)^n / (2πi)^n`.
    Signed,
    /// `(−1)^n / ((2πi)^n (2n−1)!)`.
    SignedFactorial,
    /// `1 / ((2πi)^n (2n−1)!)`.
    Factorial,
}

impl TopPrefactor {
    pub const ALL: [TopPrefactor; 3] = [TopPrefactor::Factorial, TopPrefactor::SignedFactorial, TopPrefactor::Signed];
    pub fn name(self) -> &'static str {
        match self {
            TopPrefactor::Signed => "(-1)^n/(2 pi i)^n",
            TopPrefactor::SignedFactorial => "(-1)^n/((2 pi i)^n (2n-1)!)",
            TopPrefactor::Factorial => "1/((2 pi i)^n (2n-1)!)",
        }
    }
    pub fn value(self, n: usize) -> Scalar {
        let sgn = if n % 2 == 0 { 1 } else { -1 };
        let mut c = two_pi_i_inv(n);
        match self {
            TopPrefactor::Signed => c = c.scale(&Gr::from_int(sgn)),
            TopPrefactor::SignedFactorial => {
                c = c.scale(&Gr::from_rational(rat_int(sgn) / factorial(2 * n as u32 - 1)))
            }
            TopPrefactor::Factorial => c = c.scale(&Gr::from_rational(rat_int(1) / factorial(2 * n as u32 - 1))),
        }
        Scalar::Exact(c)
    }
}

/// `(2πi)^{−n}` as an exact period.
pub fn two_pi_i_inv(n: usize) -> Period {
    let c = (Gr::from_int(1 << n) * Gr::i_pow(n as i64)).inv().expect("nonzero");
    Period::monomial((0, -2 * n as i32, 0), c)
}

/// `∫_{S_H^*} tr(σ₀ dσ₁ … dσ_{2n−1})` on principal symbols.
pub fn principal_sphere_integral(args: &[SymMat]) -> Result<Scalar> {
    let (ctx, size) = check_args(args, 2 * args.first().map(|a| a.ctx.n).unwrap_or(1))?;
    let mut acc = MatForm::function(ctx, &args[0].principal(), size);
    for a in &args[1..] {
        acc = acc.wedge(&MatForm::differential(ctx, &a.principal(), size), ctx);
    }
    sphere_integral(&ctx, &acc.trace())
}

/// `prefactor · ∫_{S_H^*} tr(σ(a₀) dσ(a₁) … dσ(a_{2n−1}))`.
pub fn top_degree_psi(args: &[SymMat], v: TopPrefactor) -> Result<Scalar> {
    let n = args.first().map(|a| a.ctx.n).unwrap_or(1);
    Ok(&v.value(n) * &principal_sphere_integral(args)?)
}

/// Which stated prefactors make the top form agree with `ψ_{2n−1}`, with the
/// maximal deviation of each variant over the tuples.
#[derive(Clone, Debug)]
pub struct PrefactorReport {
    pub n: usize,
    pub matched: Vec<TopPrefactor>,
    pub deviations: Vec<(TopPrefactor, f64)>,
}

impl PrefactorReport {
    pub fn to_json(&self) -> Value {
        let devs: serde_json::Map<String, Value> =
            self.deviations.iter().map(|(v, d)| (v.name().to_string(), json!(d))).collect();
        let matched: Vec<&str> = self.matched.iter().map(|v| v.name()).collect();
        json!({"n": self.n, "matched": matched, "deviations": devs})
    }
}

pub fn resolve_top_prefactor(tuples: &[Vec<SymMat>]) -> Result<PrefactorReport> {
    let Some(ctx) = tuples.first().and_then(|t| t.first()).map(|a| a.ctx) else {
        return Err(Error::Invalid("no sample tuples".into()));
    };
    let n = ctx.n;
    let mut devs: Vec<(TopPrefactor, f64)> = TopPrefactor::ALL.iter().map(|v| (*v, 0.0)).collect();
    let mut scale = 0.0f64;
    for t in tuples {
        let p = psi_cocycle(n, t)?;
        let s = principal_sphere_integral(t)?;
        scale = scale.max(p.abs_f64());
        for (v, d) in devs.iter_mut() {
            *d = d.max((&p - &(&v.value(n) * &s)).abs_f64());
        }
    }
    let tol = 1e-8 * scale.max(1.0);
    let matched =
        if scale == 0.0 { Vec::new() } else { devs.iter().filter(|(_, d)| *d < tol).map(|(v, _)| *v).collect() };
    Ok(PrefactorReport { n, matched, deviations: devs })
}

thread_local! {
    static RESOLVED: RefCell<HashMap<HeisenbergContext, Option<TopPrefactor>>> = RefCell::new(HashMap::new());
}

/// `count` seeded scalar tuples of length `2n` whose principal sphere integral
/// is nonzero; random tuples at `n = 2` are mostly zero by parity.
pub fn top_degree_samples(ctx: HeisenbergContext, count: usize, seed: u64) -> Result<Vec<Vec<SymMat>>> {
    let mut r = crate::rng::rng(seed);
    let b = crate::rng::Budget::rich();
    let mut out = Vec::new();
    for _ in 0..TOP_SAMPLE_ATTEMPTS {
        if out.len() == count {
            return Ok(out);
        }
        let t: Vec<SymMat> = (0..2 * ctx.n)
            .map(|_| SymMat::scalar(crate::rng::random_order0(&ctx, &b, &mut r).truncate(-ctx.nu() - 3)))
            .collect();
        if principal_sphere_integral(&t)?.abs_f64() > 1e-20 {
            out.push(t);
        }
    }
    Err(Error::Invalid(format!("no {count} nondegenerate top-degree samples in {TOP_SAMPLE_ATTEMPTS} draws")))
}

const TOP_SAMPLE_ATTEMPTS: usize = 400;

/// The first matched prefactor for `ctx`, resolved once on seeded nondegenerate tuples.
pub fn resolved_top_prefactor(ctx: HeisenbergContext) -> Result<Option<TopPrefactor>> {
    if let Some(v) = RESOLVED.with(|m| m.borrow().get(&ctx).copied()) {
        return Ok(v);
    }
    let v = resolve_top_prefactor(&top_degree_samples(ctx, 3, 0x70b)?)?.matched.first().copied();
    RESOLVED.with(|m| m.borrow_mut().insert(ctx, v));
    Ok(v)
}

/// Matrices of pointwise forms on principal symbols.
#[derive(Clone, Debug)]
struct MatForm {
    size: usize,
    e: Vec<PointForm>,
}

impl MatForm {
    fn function(_ctx: HeisenbergContext, c: &[Component], size: usize) -> Self {
        Self { size, e: c.iter().map(|x| PointForm::function(x.clone())).collect() }
    }
    fn differential(ctx: HeisenbergContext, c: &[Component], size: usize) -> Self {
        Self { size, e: c.iter().map(|x| PointForm::d_function(&ctx, x)).collect() }
    }
    fn wedge(&self, o: &Self, ctx: HeisenbergContext) -> Self {
        let n = self.size;
        let mut e = vec![PointForm::default(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = &self.e[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &o.e[k * n + j];
                    if b.is_zero() {
                        continue;
                    }
                    e[i * n + j].add_scaled(&a.wedge(b, &ctx), &Gr::one());
                }
            }
        }
        Self { size: n, e }
    }
    fn trace(&self) -> PointForm {
        let mut r = PointForm::default();
        for i in 0..self.size {
            r.add_scaled(&self.e[i * self.size + i], &Gr::one());
        }
        r
    }
}

// ---------------------------------------------------------------- K-theory

/// An invertible order-0 matrix symbol with a stored parametrix.
#[derive(Clone, Debug)]
pub struct KClass {
    pub name: String,
    pub ctx: HeisenbergContext,
    pub size: usize,
    pub u: SymMat,
    pub u_inv: SymMat,
    /// `u_inv` is known on `[−depth, 0]`.
    pub depth: u32,
}

impl KClass {
    /// Builds the parametrix by a Neumann series around `v0` (or the automatic
    /// principal inverse for 1×1 symbols).
    pub fn new(name: &str, u: SymMat, v0: Option<SymMat>, depth: u32) -> Result<Self> {
        let ctx = u.ctx;
        let floor = -(depth as i64);
        if u.e.iter().any(|a| a.top > 0) {
            return Err(Error::Invalid("K-class symbols must have order 0".into()));
        }
        let v0 = match v0 {
            Some(v) => v.map(|a| FormalSymbol::homogeneous(ctx, 0, a.component(0).unwrap_or_default())),
            None if u.size == 1 => {
                SymMat::scalar(FormalSymbol::homogeneous(ctx, 0, principal_inverse(&ctx, &u.e[0].principal_symbol())?))
            }
            None => return Err(Error::NotElliptic("matrix K-classes need a principal inverse v0".into())),
        };
        let one = SymMat::identity(ctx, u.size);
        let mut r = one.sub(&v0.mul_floor(&u, floor));
        for a in r.e.iter_mut() {
            if !a.component_vanishes(0, 30, 7)? {
                return Err(Error::NotElliptic("v0 does not invert the principal symbol".into()));
            }
            a.comps.remove(&0);
            a.top = -1;
        }
        let mut v = v0.truncate(floor);
        let mut term = v.clone();
        for _ in 0..depth {
            term = r.mul_floor(&term, floor);
            if term.e.iter().all(|a| a.is_zero()) {
                break;
            }
            v = v.add(&term);
        }
        let v = v.truncate(floor);
        Ok(Self { name: name.into(), ctx, size: u.size, u, u_inv: v, depth })
    }

    /// `1 − u_inv⋆u` and `1 − u⋆u_inv` vanish on `[−depth, 0]`.
    pub fn check_inverse(&self) -> Result<()> {
        let floor = -(self.depth as i64);
        let one = SymMat::identity(self.ctx, self.size);
        for r in [one.sub(&self.u_inv.mul_floor(&self.u, floor)), one.sub(&self.u.mul_floor(&self.u_inv, floor))] {
            for a in &r.e {
                for d in floor..=0 {
                    if !a.component_vanishes(d, 20, 11)? {
                        return Err(Error::NotElliptic(format!("parametrix fails in degree {d}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn block_diag(&self, o: &KClass) -> Result<KClass> {
        if self.ctx != o.ctx {
            return Err(Error::ContextMismatch("block sum across contexts".into()));
        }
        Ok(KClass {
            name: format!("{}+{}", self.name, o.name),
            ctx: self.ctx,
            size: self.size + o.size,
            u: self.u.block_diag(&o.u),
            u_inv: self.u_inv.block_diag(&o.u_inv),
            depth: self.depth.min(o.depth),
        })
    }

    /// `(u, u⁻¹, u, u⁻¹, …)` of length `m`.
    pub fn alternating(&self, m: usize) -> Vec<SymMat> {
        (0..m).map(|j| if j % 2 == 0 { self.u.clone() } else { self.u_inv.clone() }).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "kind": "kclass",
            "name": self.name,
            "ctx": self.ctx.to_json(),
            "size": self.size,
            "depth": self.depth,
            "u": self.u.to_json(),
            "v0": self.u_inv.map(|a| FormalSymbol::homogeneous(self.ctx, 0, a.component(0).unwrap_or_default())).to_json(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let name = v.get("name").and_then(Value::as_str).unwrap_or("kclass");
        let depth = get_i64(v, "depth")?;
        if !(1..=64).contains(&depth) {
            return Err(Error::Invalid("depth must lie in [1, 64]".into()));
        }
        let u = SymMat::from_json(get(v, "u")?)?;
        let ctx = HeisenbergContext::from_json(get(v, "ctx")?)?;
        if u.ctx != ctx {
            return Err(Error::ContextMismatch("u entries do not match ctx".into()));
        }
        let v0 = match v.get("v0") {
            Some(x) if !x.is_null() => Some(SymMat::from_json(x)?),
            _ => None,
        };
        Self::new(name, u, v0, depth as u32)
    }
}

/// Parametrix depth used by the shipped fixtures.
pub fn default_depth(ctx: &HeisenbergContext) -> u32 {
    (ctx.nu() + WORK_MARGIN + 2) as u32
}

/// `⟨[φ], u⟩ = Σ_k (−1)^k k! (φ_{2k+1} ⊗ tr)(u, u⁻¹, …, u, u⁻¹)` over the
/// odd components of the family.
pub fn k_pairing(family: &[Cochain<SymMat>], kc: &KClass) -> Result<Scalar> {
    let mut acc = Scalar::zero();
    for phi in family {
        if phi.degree % 2 == 0 {
            return Err(Error::Invalid(format!("{} is not an odd cochain", phi.rule)));
        }
        let k = phi.degree / 2;
        let args = kc.alternating(phi.arity());
        acc += &phi.eval(&args)?.scale(&(&sign(k) * &fact(k)));
    }
    Ok(acc)
}

/// `Ind = c(u, u⁻¹)`; the argument order is fixed by the Toeplitz winding oracle.
pub fn index_radul(kc: &KClass) -> Result<Scalar> {
    radul_cocycle(&[kc.u.clone(), kc.u_inv.clone()])
}

/// `−(n−1)!/((2πi)^n(2n−1)!) ∫_{S_H^*} tr(σ⁻¹dσ(dσ⁻¹dσ)^{n−1})` on principal symbols.
pub fn index_top_degree(kc: &KClass) -> Result<Scalar> {
    let ctx = kc.ctx;
    let n = ctx.n;
    let s = kc.u.principal();
    let si = kc.u_inv.principal();
    let ds = MatForm::differential(ctx, &s, kc.size);
    let dsi = MatForm::differential(ctx, &si, kc.size);
    let mut eta = MatForm::function(ctx, &si, kc.size).wedge(&ds, ctx);
    for _ in 1..n {
        eta = eta.wedge(&dsi, ctx).wedge(&ds, ctx);
    }
    let c = Gr::from_rational(-factorial(n as u32 - 1) / factorial(2 * n as u32 - 1));
    Ok((&Scalar::Exact(two_pi_i_inv(n)) * &sphere_integral(&ctx, &eta.trace())?).scale(&c))
}

// ---------------------------------------------------------------- fixtures

fn fourier(ctx: &HeisenbergContext, k: &[i32]) -> CoeffFunction {
    CoeffFunction::fourier(ctx.n, k, Gr::one())
}

/// `χ₊e^{ikx} + χ₋` on TWO_SHEET; its Toeplitz index is `−k`.
pub fn toeplitz_symbol(k: i32) -> FormalSymbol {
    let ctx = HeisenbergContext::two_sheet();
    let mut c = Component::default();
    c.add_term(XiMono::plus(0), &fourier(&ctx, &[k]), &Gr::one());
    c.add_term(XiMono::minus(0), &fourier(&ctx, &[0]), &Gr::one());
    FormalSymbol::homogeneous(ctx, 0, c)
}

pub fn toeplitz_kclass(k: i32) -> Result<KClass> {
    let ctx = HeisenbergContext::two_sheet();
    KClass::new(&format!("toeplitz_{k}"), SymMat::scalar(toeplitz_symbol(k)), None, default_depth(&ctx))
}

/// The constant invertible matrix `[[2, 1], [1, 1]]`.
pub fn constant_kclass(ctx: HeisenbergContext) -> Result<KClass> {
    let c = |v: i64| FormalSymbol::constant(ctx, Gr::from_int(v));
    let u = SymMat::from_rows(vec![vec![c(2), c(1)], vec![c(1), c(1)]])?;
    let v0 = SymMat::from_rows(vec![vec![c(1), c(-1)], vec![c(-1), c(2)]])?;
    KClass::new("constant", u, Some(v0), default_depth(&ctx))
}

pub fn identity_kclass(ctx: HeisenbergContext, size: usize) -> Result<KClass> {
    let one = SymMat::identity(ctx, size);
    KClass::new("identity", one.clone(), Some(one), default_depth(&ctx))
}

/// `[[a, −b̄], [b, ā]]` on TORUS(2, p) with `|a|² + |b|² = 1` on `S_H^*`:
/// `a = e^{ix₁}ξ₁^{w₁}s^{−2}`, `b = e^{ix₂}ξ₂s^{−2}` (`w₁ = 2` for `p = 1`,
/// `1` for `p = 0`). The principal inverse is the adjoint.
pub fn su2_kclass(p: usize) -> Result<KClass> {
    if p > 1 {
        return Err(Error::Invalid("su2 fixture needs p ∈ {0, 1}".into()));
    }
    let ctx = HeisenbergContext::torus(2, p);
    let w1: u16 = if p == 1 { 2 } else { 1 };
    let mono = |alpha: [u16; 2], k: [i32; 2], c: i64| {
        FormalSymbol::monomial(ctx, XiMono::h(&alpha, -2), CoeffFunction::fourier(2, &k, Gr::from_int(c)))
    };
    let a = mono([w1, 0], [1, 0], 1);
    let a_bar = mono([w1, 0], [-1, 0], 1);
    let b = mono([0, 1], [0, 1], 1);
    let b_bar = mono([0, 1], [0, -1], 1);
    let u = SymMat::from_rows(vec![vec![a.clone(), b_bar.neg()], vec![b.clone(), a_bar.clone()]])?;
    let v0 = SymMat::from_rows(vec![vec![a_bar, b_bar], vec![b.neg(), a]])?;
    KClass::new(&format!("su2_p{p}"), u, Some(v0), default_depth(&ctx))
}

/// Every shipped K-class fixture.
pub fn fixtures() -> Result<Vec<KClass>> {
    Ok(vec![
        toeplitz_kclass(1)?,
        toeplitz_kclass(2)?,
        toeplitz_kclass(3)?,
        identity_kclass(HeisenbergContext::two_sheet(), 1)?,
        constant_kclass(HeisenbergContext::two_sheet())?,
        su2_kclass(1)?,
        su2_kclass(0)?,
    ])
}
