//! Formal Heisenberg symbols on `ℝᵖ × ℝᑫ`: homogeneous components in the
//! quotient ring `ℂ[ξ, s^{±1}] / (s⁴ − Σ_{i≤p} ξ_i⁴ − Σ_{j>p} ξ_j²)` with
//! x-dependent coefficients, the star product, `δ = [log s, ·]`, and
//! parametrices. In the TWO_SHEET model (`n = p = 1`) the ξ-part is instead
//! spanned by `P_d = χ₊|ξ|^d` and `M_d = χ₋|ξ|^d`.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use num_traits::Zero;
use serde_json::{json, Value};

use crate::coefficient_backends::{Backend, CoeffFunction, MAX_DIM};
use crate::error::{Error, Result};
use crate::exact_scalars::{bf_from_rational, bf_sqrt, rat, rat_int, BigFloatC, Gr, Rational};
use crate::json::{get, get_i64, int_array};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolBackend {
    Torus,
    Gaussian,
    TwoSheet,
}

impl SymbolBackend {
    pub fn name(self) -> &'static str {
        match self {
            SymbolBackend::Torus => "torus",
            SymbolBackend::Gaussian => "gaussian",
            SymbolBackend::TwoSheet => "two_sheet",
        }
    }
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "torus" => Ok(SymbolBackend::Torus),
            "gaussian" => Ok(SymbolBackend::Gaussian),
            "two_sheet" | "twosheet" | "two-sheet" => Ok(SymbolBackend::TwoSheet),
            _ => Err(Error::Invalid(format!("unknown backend '{s}'"))),
        }
    }
}

/// Dimension `n`, leaf dimension `p`, and the coefficient model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HeisenbergContext {
    pub n: usize,
    pub p: usize,
    pub backend: SymbolBackend,
}

impl HeisenbergContext {
    pub fn new(n: usize, p: usize, backend: SymbolBackend) -> Result<Self> {
        if n == 0 || n > MAX_DIM || p > n {
            return Err(Error::Invalid(format!("need 1 ≤ n ≤ {MAX_DIM} and p ≤ n, got n={n}, p={p}")));
        }
        if backend == SymbolBackend::TwoSheet && (n != 1 || p != 1) {
            return Err(Error::Invalid("TWO_SHEET requires n = p = 1".into()));
        }
        Ok(Self { n, p, backend })
    }
    pub fn torus(n: usize, p: usize) -> Self {
        Self::new(n, p, SymbolBackend::Torus).expect("valid context")
    }
    pub fn gaussian(n: usize, p: usize) -> Self {
        Self::new(n, p, SymbolBackend::Gaussian).expect("valid context")
    }
    pub fn two_sheet() -> Self {
        Self::new(1, 1, SymbolBackend::TwoSheet).expect("valid context")
    }
    pub fn q(&self) -> usize {
        self.n - self.p
    }
    /// Homogeneous dimension `ν = p + 2q`.
    pub fn nu(&self) -> i64 {
        (self.p + 2 * self.q()) as i64
    }
    /// Heisenberg weight of `ξ_i` (0-based): 1 on leaves, 2 transversally.
    pub fn weight(&self, i: usize) -> i64 {
        if i < self.p {
            1
        } else {
            2
        }
    }
    pub fn coeff_backend(&self) -> Backend {
        match self.backend {
            SymbolBackend::Gaussian => Backend::Gaussian,
            _ => Backend::Torus,
        }
    }
    pub fn is_two_sheet(&self) -> bool {
        self.backend == SymbolBackend::TwoSheet
    }
    pub fn to_json(&self) -> Value {
        json!({"n": self.n, "p": self.p, "backend": self.backend.name()})
    }
    pub fn from_json(v: &Value) -> Result<Self> {
        let b = get(v, "backend")?.as_str().ok_or_else(|| Error::Invalid("backend must be a string".into()))?;
        Self::new(get_i64(v, "n")? as usize, get_i64(v, "p")? as usize, SymbolBackend::parse(b)?)
    }
}

/// `ξ^α s^m` (sheet 0) or `P_m` / `M_m` (sheet ±1, TWO_SHEET only).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct XiMono {
    pub alpha: [u16; MAX_DIM],
    pub s: i32,
    pub sheet: i8,
}

impl fmt::Debug for XiMono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sheet {
            1 => write!(f, "P{}", self.s),
            -1 => write!(f, "M{}", self.s),
            _ => write!(f, "ξ{:?}s{}", &self.alpha, self.s),
        }
    }
}

/// Sparse integer combination of ξ-monomials.
pub type XiSum = Vec<(XiMono, i64)>;

impl XiMono {
    pub fn h(alpha: &[u16], s: i32) -> Self {
        let mut m = Self { s, ..Self::default() };
        m.alpha[..alpha.len()].copy_from_slice(alpha);
        m
    }
    pub fn s_pow(s: i32) -> Self {
        Self { s, ..Self::default() }
    }
    pub fn plus(d: i32) -> Self {
        Self { s: d, sheet: 1, ..Self::default() }
    }
    pub fn minus(d: i32) -> Self {
        Self { s: d, sheet: -1, ..Self::default() }
    }
    pub fn degree(&self, ctx: &HeisenbergContext) -> i64 {
        let a: i64 = (0..ctx.n).map(|i| ctx.weight(i) * self.alpha[i] as i64).sum();
        a + self.s as i64
    }
    /// Monomials spanning the unit: `1`, or `P_0 + M_0`.
    pub fn unit(ctx: &HeisenbergContext) -> Vec<XiMono> {
        if ctx.is_two_sheet() {
            vec![Self::plus(0), Self::minus(0)]
        } else {
            vec![Self::s_pow(0)]
        }
    }

    /// Product reduced to normal form.
    pub fn mul(&self, o: &Self, ctx: &HeisenbergContext) -> Rc<XiSum> {
        if ctx.is_two_sheet() {
            if self.sheet != o.sheet {
                return Rc::new(Vec::new());
            }
            return Rc::new(vec![(XiMono { s: self.s + o.s, ..*self }, 1)]);
        }
        let mut m = *self;
        for i in 0..MAX_DIM {
            m.alpha[i] += o.alpha[i];
        }
        m.s += o.s;
        normal_form_mono(ctx, m)
    }

    /// `∂/∂ξ_i` reduced to normal form.
    pub fn d_xi(&self, ctx: &HeisenbergContext, i: usize) -> Vec<(XiMono, Rational)> {
        xi_derivative(ctx, self, i)
    }

    pub fn eval(&self, ctx: &HeisenbergContext, xi: &[BigFloatC], s: &BigFloatC) -> BigFloatC {
        if ctx.is_two_sheet() {
            let positive = xi[0].re.is_positive();
            if (self.sheet == 1) != positive {
                return BigFloatC::zero();
            }
            return pow_i(&BigFloatC::from_real(xi[0].re.abs()), self.s);
        }
        let mut v = pow_i(s, self.s);
        for (i, x) in xi.iter().enumerate().take(ctx.n) {
            v = &v * &x.powi(self.alpha[i] as u32);
        }
        v
    }
}

fn pow_i(x: &BigFloatC, k: i32) -> BigFloatC {
    let p = x.powi(k.unsigned_abs());
    if k >= 0 {
        p
    } else {
        &BigFloatC::from_i64(1) / &p
    }
}

type NfKey = (usize, usize, XiMono);

thread_local! {
    static NF_MEMO: RefCell<HashMap<NfKey, Rc<XiSum>>> = RefCell::new(HashMap::new());
    static DXI_MEMO: RefCell<HashMap<(usize, usize, XiMono, usize), XiSum>> = RefCell::new(HashMap::new());
}

fn add_into(acc: &mut BTreeMap<XiMono, i64>, m: XiMono, c: i64) {
    let e = acc.entry(m).or_insert(0);
    *e += c;
    if *e == 0 {
        acc.remove(&m);
    }
}

/// Eliminates `ξ_n² = s⁴ − Σ_{i≤p} ξ_i⁴ − Σ_{p<j<n} ξ_j²` (q ≥ 1) or
/// `ξ_n⁴ = s⁴ − Σ_{i<n} ξ_i⁴` (q = 0) until the last exponent is below the bound.
fn normal_form_mono(ctx: &HeisenbergContext, m: XiMono) -> Rc<XiSum> {
    let last = ctx.n - 1;
    let step: u16 = if ctx.q() >= 1 { 2 } else { 4 };
    if m.alpha[last] < step {
        return Rc::new(vec![(m, 1)]);
    }
    let key = (ctx.n, ctx.p, m);
    if let Some(v) = NF_MEMO.with(|c| c.borrow().get(&key).cloned()) {
        return v;
    }
    let mut base = m;
    base.alpha[last] -= step;
    let mut acc = BTreeMap::new();
    let mut push = |t: XiMono, c: i64| {
        for (r, rc) in normal_form_mono(ctx, t).iter() {
            add_into(&mut acc, *r, c * rc);
        }
    };
    push(XiMono { s: base.s + 4, ..base }, 1);
    for i in 0..last {
        let mut t = base;
        t.alpha[i] += if i < ctx.p { 4 } else { 2 };
        push(t, -1);
    }
    let v: Rc<XiSum> = Rc::new(acc.into_iter().collect());
    NF_MEMO.with(|c| c.borrow_mut().insert(key, v.clone()));
    v
}

fn d_xi_h(ctx: &HeisenbergContext, m: XiMono, i: usize) -> XiSum {
    let key = (ctx.n, ctx.p, m, i);
    if let Some(v) = DXI_MEMO.with(|c| c.borrow().get(&key).cloned()) {
        return v;
    }
    let mut acc = BTreeMap::new();
    // Coefficients are kept as 2× to stay integral; halved at the end.
    let mut push = |t: XiMono, c2: i64| {
        for (r, rc) in normal_form_mono(ctx, t).iter() {
            add_into(&mut acc, *r, c2 * rc);
        }
    };
    if m.alpha[i] > 0 {
        let mut t = m;
        t.alpha[i] -= 1;
        push(t, 2 * m.alpha[i] as i64);
    }
    if m.s != 0 {
        let mut t = m;
        t.s -= 4;
        if i < ctx.p {
            t.alpha[i] += 3;
            push(t, 2 * m.s as i64);
        } else {
            t.alpha[i] += 1;
            push(t, m.s as i64);
        }
    }
    let v: XiSum = acc.into_iter().collect();
    DXI_MEMO.with(|c| c.borrow_mut().insert(key, v.clone()));
    v
}

/// `∂/∂ξ_i` as rational combination.
pub fn xi_derivative(ctx: &HeisenbergContext, m: &XiMono, i: usize) -> Vec<(XiMono, Rational)> {
    if ctx.is_two_sheet() {
        // ∂P_d = d P_{d−1}, ∂M_d = −d M_{d−1}
        if m.s == 0 {
            return Vec::new();
        }
        let sign = if m.sheet == 1 { 1 } else { -1 };
        return vec![(XiMono { s: m.s - 1, ..*m }, rat_int(sign * m.s as i64))];
    }
    d_xi_h(ctx, *m, i).into_iter().map(|(k, c2)| (k, rat(c2, 2))).collect()
}

// ---------------------------------------------------------------------------
// Components

/// One homogeneous degree: ξ-monomial ↦ x-coefficient.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Component {
    pub terms: BTreeMap<XiMono, CoeffFunction>,
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

impl Component {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn add_term(&mut self, m: XiMono, f: &CoeffFunction, c: &Gr) {
        if f.is_zero() || c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(g) => {
                g.add_scaled(f, c);
                if g.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, f.scale(c));
            }
        }
    }
    pub fn add_scaled(&mut self, o: &Component, c: &Gr) {
        for (m, f) in &o.terms {
            self.add_term(*m, f, c);
        }
    }
    pub fn scale(&self, c: &Gr) -> Component {
        let mut r = Component::default();
        r.add_scaled(self, c);
        r
    }
    /// Pointwise product (no star corrections) in normal form.
    pub fn mul(&self, o: &Component, ctx: &HeisenbergContext) -> Component {
        let mut r = Component::default();
        self.mul_into(o, ctx, &Gr::one(), &mut r);
        r
    }
    fn mul_into(&self, o: &Component, ctx: &HeisenbergContext, c: &Gr, out: &mut Component) {
        for (m1, f1) in &self.terms {
            for (m2, f2) in &o.terms {
                let prod = m1.mul(m2, ctx);
                if prod.is_empty() {
                    continue;
                }
                let f = f1.mul(f2);
                for (m, k) in prod.iter() {
                    let ck = if *k == 1 { c.clone() } else { c.scale(&rat_int(*k)) };
                    out.add_term(*m, &f, &ck);
                }
            }
        }
    }
    pub fn d_x(&self, i: usize) -> Component {
        let mut r = Component::default();
        for (m, f) in &self.terms {
            r.add_term(*m, &f.derivative(i), &Gr::one());
        }
        r
    }
    pub fn d_xi(&self, ctx: &HeisenbergContext, i: usize) -> Component {
        let mut r = Component::default();
        for (m, f) in &self.terms {
            for (dm, c) in xi_derivative(ctx, m, i) {
                r.add_term(dm, f, &Gr::from_rational(c));
            }
        }
        r
    }
    /// Normal form; a no-op on components built by this module.
    pub fn normal_form(&self, ctx: &HeisenbergContext) -> Component {
        let mut r = Component::default();
        for (m, f) in &self.terms {
            if ctx.is_two_sheet() {
                r.add_term(*m, f, &Gr::one());
                continue;
            }
            for (nm, k) in normal_form_mono(ctx, *m).iter() {
                r.add_term(*nm, f, &Gr::from_int(*k));
            }
        }
        r
    }
    pub fn is_x_independent(&self) -> bool {
        self.terms.values().all(|f| f.is_x_independent())
    }
    pub fn eval(&self, ctx: &HeisenbergContext, x: &[Rational], xi: &[BigFloatC], s: &BigFloatC) -> BigFloatC {
        let mut acc = BigFloatC::zero();
        for (m, f) in &self.terms {
            let v = m.eval(ctx, xi, s);
            if v.is_zero() {
                continue;
            }
            acc = &acc + &(&v * &f.eval(x));
        }
        acc
    }
    pub fn map_coeffs(&self, mut g: impl FnMut(&CoeffFunction) -> Result<CoeffFunction>) -> Result<Component> {
        let mut r = Component::default();
        for (m, f) in &self.terms {
            r.add_term(*m, &g(f)?, &Gr::one());
        }
        Ok(r)
    }
}

// ---------------------------------------------------------------------------
// FormalSymbol

/// Cutoff value marking a symbol whose every component is known.
pub const EXACT: i64 = i64::MIN / 4;

pub fn is_exact_cutoff(c: i64) -> bool {
    c <= EXACT / 2
}

/// `Σ_{cutoff ≤ d ≤ top} a_d`; components outside the map are zero, degrees
/// below `cutoff` are unknown.
#[derive(Clone, PartialEq, Eq)]
pub struct FormalSymbol {
    pub ctx: HeisenbergContext,
    pub top: i64,
    pub cutoff: i64,
    pub comps: BTreeMap<i64, Component>,
}

impl fmt::Debug for FormalSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = if self.is_exact() { "exact".to_string() } else { self.cutoff.to_string() };
        write!(f, "Symbol[top {}, cutoff {}] ", self.top, c)?;
        f.debug_map().entries(self.comps.iter().rev()).finish()
    }
}

/// Multi-indices `α ∈ ℕⁿ` with `⟨α⟩ ≤ max_weight`, in graded order.
pub fn multi_indices(ctx: &HeisenbergContext, max_weight: i64) -> Vec<[u16; MAX_DIM]> {
    let mut out = Vec::new();
    fn rec(ctx: &HeisenbergContext, i: usize, left: i64, cur: &mut [u16; MAX_DIM], out: &mut Vec<[u16; MAX_DIM]>) {
        if i == ctx.n {
            out.push(*cur);
            return;
        }
        let w = ctx.weight(i);
        let mut a = 0;
        while a * w <= left {
            cur[i] = a as u16;
            rec(ctx, i + 1, left - a * w, cur, out);
            a += 1;
        }
        cur[i] = 0;
    }
    if max_weight >= 0 {
        rec(ctx, 0, max_weight, &mut [0; MAX_DIM], &mut out);
    }
    out.sort_by_key(|a| (weighted(ctx, a), *a));
    out
}

pub fn weighted(ctx: &HeisenbergContext, a: &[u16; MAX_DIM]) -> i64 {
    (0..ctx.n).map(|i| ctx.weight(i) * a[i] as i64).sum()
}

fn abs_len(a: &[u16; MAX_DIM]) -> i64 {
    a.iter().map(|&v| v as i64).sum()
}

fn alpha_factorial(a: &[u16; MAX_DIM]) -> Rational {
    a.iter().fold(rat_int(1), |acc, &v| acc * crate::exact_scalars::factorial(v as u32))
}

/// `(−i)^{|α|}/α!`.
fn star_coefficient(a: &[u16; MAX_DIM]) -> Gr {
    Gr::i_pow(-abs_len(a)).scale(&(rat_int(1) / alpha_factorial(a)))
}

fn predecessor(a: &[u16; MAX_DIM]) -> Option<([u16; MAX_DIM], usize)> {
    let i = (0..MAX_DIM).rev().find(|&i| a[i] > 0)?;
    let mut b = *a;
    b[i] -= 1;
    Some((b, i))
}

impl FormalSymbol {
    pub fn zero(ctx: HeisenbergContext) -> Self {
        Self { ctx, top: 0, cutoff: EXACT, comps: BTreeMap::new() }
    }
    pub fn zero_with(ctx: HeisenbergContext, top: i64, cutoff: i64) -> Self {
        Self { ctx, top, cutoff, comps: BTreeMap::new() }
    }
    pub fn constant(ctx: HeisenbergContext, c: Gr) -> Self {
        let mut comp = Component::default();
        let f = CoeffFunction::constant(ctx.coeff_backend(), ctx.n, Gr::one());
        for m in XiMono::unit(&ctx) {
            comp.add_term(m, &f, &c);
        }
        Self::homogeneous(ctx, 0, comp)
    }
    pub fn one(ctx: HeisenbergContext) -> Self {
        Self::constant(ctx, Gr::one())
    }
    /// An exact symbol with a single component.
    pub fn homogeneous(ctx: HeisenbergContext, degree: i64, comp: Component) -> Self {
        let mut s = Self::zero_with(ctx, degree, EXACT);
        if !comp.is_zero() {
            s.comps.insert(degree, comp);
        }
        s
    }
    /// The exact symbol `f(x) · m` (m a ξ-monomial).
    pub fn monomial(ctx: HeisenbergContext, m: XiMono, f: CoeffFunction) -> Self {
        let mut comp = Component::default();
        comp.add_term(m, &f, &Gr::one());
        let comp = comp.normal_form(&ctx);
        Self::homogeneous(ctx, m.degree(&ctx), comp)
    }
    /// Coordinate `x_i` (GAUSSIAN only).
    pub fn coordinate_x(ctx: HeisenbergContext, i: usize) -> Result<Self> {
        let f = CoeffFunction::constant(ctx.coeff_backend(), ctx.n, Gr::one()).mul_coordinate(i)?;
        Ok(Self::monomial(ctx, XiMono::s_pow(0), f))
    }
    /// Coordinate `ξ_i` (not available in TWO_SHEET, where it is `P_1 − M_1`).
    pub fn coordinate_xi(ctx: HeisenbergContext, i: usize) -> Self {
        let one = CoeffFunction::constant(ctx.coeff_backend(), ctx.n, Gr::one());
        if ctx.is_two_sheet() {
            let mut c = Component::default();
            c.add_term(XiMono::plus(1), &one, &Gr::one());
            c.add_term(XiMono::minus(1), &one, &Gr::from_int(-1));
            return Self::homogeneous(ctx, 1, c);
        }
        let mut a = [0u16; MAX_DIM];
        a[i] = 1;
        Self::monomial(ctx, XiMono::h(&a[..ctx.n], 0), one)
    }
    /// `s^m` (`|ξ|^m` on both sheets in TWO_SHEET).
    pub fn s_power(ctx: HeisenbergContext, m: i32) -> Self {
        let one = CoeffFunction::constant(ctx.coeff_backend(), ctx.n, Gr::one());
        if ctx.is_two_sheet() {
            let mut c = Component::default();
            c.add_term(XiMono::plus(m), &one, &Gr::one());
            c.add_term(XiMono::minus(m), &one, &Gr::one());
            return Self::homogeneous(ctx, m as i64, c);
        }
        Self::monomial(ctx, XiMono::s_pow(m), one)
    }

    pub fn is_exact(&self) -> bool {
        is_exact_cutoff(self.cutoff)
    }
    /// Degree-`d` component; errors below the cutoff.
    pub fn component(&self, d: i64) -> Result<Component> {
        if d < self.cutoff {
            return Err(Error::Truncation { needed: d, cutoff: self.cutoff });
        }
        Ok(self.comps.get(&d).cloned().unwrap_or_default())
    }
    pub fn principal_symbol(&self) -> Component {
        self.comps.get(&self.top).cloned().unwrap_or_default()
    }
    /// Largest degree carrying a nonzero component.
    pub fn max_degree(&self) -> Option<i64> {
        self.comps.keys().next_back().copied()
    }
    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }
    /// Drop everything below `floor` and mark it unknown.
    pub fn truncate(&self, floor: i64) -> Self {
        let mut s = self.clone();
        if floor > s.cutoff {
            s.cutoff = floor;
            s.comps = s.comps.split_off(&floor);
        }
        s
    }
    /// Lowers the nominal top to the largest nonzero degree, so that products
    /// with it do not reserve room for components known to vanish.
    pub fn tightened(&self) -> Self {
        let mut s = self.clone();
        s.top = s.max_degree().unwrap_or(if s.is_exact() { s.top } else { s.cutoff });
        s
    }
    fn check_ctx(&self, o: &Self) -> Result<()> {
        if self.ctx != o.ctx {
            return Err(Error::ContextMismatch(format!("{:?} vs {:?}", self.ctx, o.ctx)));
        }
        Ok(())
    }
    fn insert(&mut self, d: i64, c: Component) {
        if d < self.cutoff || c.is_zero() {
            return;
        }
        match self.comps.get_mut(&d) {
            Some(e) => {
                e.add_scaled(&c, &Gr::one());
                if e.is_zero() {
                    self.comps.remove(&d);
                }
            }
            None => {
                self.comps.insert(d, c);
            }
        }
    }
    pub fn add_scaled(&self, o: &Self, c: &Gr) -> Self {
        let mut r = Self::zero_with(self.ctx, self.top.max(o.top), self.cutoff.max(o.cutoff));
        for (d, comp) in &self.comps {
            r.insert(*d, comp.clone());
        }
        for (d, comp) in &o.comps {
            r.insert(*d, comp.scale(c));
        }
        r
    }
    pub fn add(&self, o: &Self) -> Self {
        self.add_scaled(o, &Gr::one())
    }
    pub fn sub(&self, o: &Self) -> Self {
        self.add_scaled(o, &Gr::from_int(-1))
    }
    pub fn scale(&self, c: &Gr) -> Self {
        let mut r = Self::zero_with(self.ctx, self.top, self.cutoff);
        if c.is_zero() {
            return r;
        }
        for (d, comp) in &self.comps {
            r.insert(*d, comp.scale(c));
        }
        r
    }
    pub fn neg(&self) -> Self {
        self.scale(&Gr::from_int(-1))
    }

    pub fn d_x(&self, i: usize) -> Self {
        let mut r = Self::zero_with(self.ctx, self.top, self.cutoff);
        for (d, c) in &self.comps {
            r.insert(*d, c.d_x(i));
        }
        r
    }
    pub fn d_xi(&self, i: usize) -> Self {
        let w = self.ctx.weight(i);
        let cutoff = if self.is_exact() { EXACT } else { self.cutoff - w };
        let mut r = Self::zero_with(self.ctx, self.top - w, cutoff);
        for (d, c) in &self.comps {
            r.insert(d - w, c.d_xi(&self.ctx, i));
        }
        r
    }
    pub fn map_coeffs(&self, mut g: impl FnMut(&CoeffFunction) -> Result<CoeffFunction>) -> Result<Self> {
        let mut r = Self::zero_with(self.ctx, self.top, self.cutoff);
        for (d, c) in &self.comps {
            r.insert(*d, c.map_coeffs(&mut g)?);
        }
        Ok(r)
    }
    /// Multiplication by the coordinate `x_i` (GAUSSIAN only).
    pub fn mul_coordinate(&self, i: usize) -> Result<Self> {
        self.map_coeffs(|f| f.mul_coordinate(i))
    }

    /// Star product with validity window `[max(cutoffs, floor), a.top + b.top]`.
    pub fn star_floor(&self, b: &Self, floor: i64) -> Self {
        assert_eq!(self.ctx, b.ctx, "star product of symbols in different contexts");
        let ctx = self.ctx;
        let top = self.top + b.top;
        let natural = (self.cutoff.saturating_add(b.top)).max(b.cutoff.saturating_add(self.top));
        let cutoff = natural.max(floor);
        let mut r = Self::zero_with(ctx, top, if is_exact_cutoff(cutoff) { EXACT } else { cutoff });
        let (Some(amax), Some(bmax)) = (self.max_degree(), b.max_degree()) else {
            return r;
        };
        if is_exact_cutoff(cutoff) {
            return self.star_exact(b, r);
        }
        let max_w = amax + bmax - cutoff;
        if max_w < 0 {
            return r;
        }
        let alphas = multi_indices(&ctx, max_w);
        let mut da: HashMap<[u16; MAX_DIM], Self> = HashMap::new();
        let mut dbx: HashMap<[u16; MAX_DIM], Self> = HashMap::new();
        for a in &alphas {
            let (xa, xb) = match predecessor(a) {
                None => (self.clone(), b.clone()),
                Some((prev, i)) => {
                    let (Some(pa), Some(pb)) = (da.get(&prev), dbx.get(&prev)) else {
                        continue;
                    };
                    // (1/α!)∂ξ^α a, built incrementally.
                    let xa = pa.d_xi(i).scale(&Gr::from_ratio(1, a[i] as i64)).drop_below(cutoff - bmax);
                    (xa, pb.d_x(i))
                }
            };
            if xa.is_zero() || xb.is_zero() {
                // Every descendant vanishes too; do not store it.
                continue;
            }
            let coeff = Gr::i_pow(-abs_len(a));
            for (d1, c1) in &xa.comps {
                for (d2, c2) in &xb.comps {
                    let d = d1 + d2;
                    if d < cutoff {
                        continue;
                    }
                    let mut out = Component::default();
                    c1.mul_into(c2, &ctx, &coeff, &mut out);
                    r.insert(d, out);
                }
            }
            da.insert(*a, xa);
            dbx.insert(*a, xb);
        }
        r
    }

    /// Exact product of exact symbols; the α-series must terminate.
    fn star_exact(&self, b: &Self, mut r: Self) -> Self {
        let ctx = self.ctx;
        let mut level: Vec<([u16; MAX_DIM], Self, Self)> = vec![([0; MAX_DIM], self.clone(), b.clone())];
        let mut depth = 0;
        while !level.is_empty() {
            assert!(depth <= 64, "star product of exact symbols does not terminate; supply a floor");
            let mut next: BTreeMap<[u16; MAX_DIM], (Self, Self)> = BTreeMap::new();
            for (a, xa, xb) in &level {
                let coeff = star_coefficient(a).scale(&alpha_factorial(a));
                for (d1, c1) in &xa.comps {
                    for (d2, c2) in &xb.comps {
                        let mut out = Component::default();
                        c1.mul_into(c2, &ctx, &coeff, &mut out);
                        r.insert(d1 + d2, out);
                    }
                }
                for i in 0..ctx.n {
                    let mut na = *a;
                    na[i] += 1;
                    if next.contains_key(&na) {
                        continue;
                    }
                    let ya = xa.d_xi(i).scale(&Gr::from_ratio(1, na[i] as i64));
                    let yb = xb.d_x(i);
                    if !ya.is_zero() && !yb.is_zero() {
                        next.insert(na, (ya, yb));
                    }
                }
            }
            level = next.into_iter().map(|(a, (x, y))| (a, x, y)).collect();
            depth += 1;
        }
        r
    }

    fn drop_below(mut self, floor: i64) -> Self {
        self.comps = self.comps.split_off(&floor);
        self
    }

    /// Star product with the natural validity window.
    pub fn star(&self, b: &Self) -> Self {
        self.star_floor(b, EXACT)
    }

    pub fn try_star(&self, b: &Self) -> Result<Self> {
        self.check_ctx(b)?;
        Ok(self.star(b))
    }

    pub fn commutator(&self, b: &Self) -> Self {
        let floor = self.cutoff.saturating_add(b.top).max(b.cutoff.saturating_add(self.top));
        self.star_floor(b, floor).sub(&b.star_floor(self, floor))
    }

    /// Equality of components on the common validity window.
    pub fn agrees_with(&self, o: &Self) -> bool {
        let lo = self.cutoff.max(o.cutoff);
        self.ctx == o.ctx && self.comps.range(lo..).eq(o.comps.range(lo..))
    }

    /// Pointwise (commutative) product of full symbols, no star corrections.
    pub fn pointwise(&self, b: &Self) -> Self {
        assert_eq!(self.ctx, b.ctx, "pointwise product of symbols in different contexts");
        let cutoff = (self.cutoff.saturating_add(b.top)).max(b.cutoff.saturating_add(self.top));
        let cutoff = if is_exact_cutoff(cutoff) { EXACT } else { cutoff };
        let mut r = Self::zero_with(self.ctx, self.top + b.top, cutoff);
        for (d1, c1) in &self.comps {
            for (d2, c2) in &b.comps {
                if d1 + d2 >= cutoff {
                    r.insert(d1 + d2, c1.mul(c2, &self.ctx));
                }
            }
        }
        r
    }

    /// `δa = [log s, a] = Σ_{|α|≥1} (−i)^{|α|}/α! ∂ξ^α(log s) ∂x^α a`.
    pub fn delta(&self) -> Self {
        let floor = if self.is_exact() { EXACT } else { self.cutoff - 1 };
        self.delta_floor(floor)
    }

    pub fn delta_floor(&self, floor: i64) -> Self {
        let ctx = self.ctx;
        let natural = if self.is_exact() { EXACT } else { self.cutoff - 1 };
        let cutoff = natural.max(floor);
        let top = self.top - 1;
        let mut r = Self::zero_with(ctx, top, cutoff);
        let Some(amax) = self.max_degree() else { return r };
        if is_exact_cutoff(cutoff) {
            // Exact input: the series terminates only when ∂x^α a does.
            let mut frontier: BTreeMap<[u16; MAX_DIM], Self> = BTreeMap::new();
            frontier.insert([0; MAX_DIM], self.clone());
            let mut depth = 0;
            while !frontier.is_empty() {
                assert!(depth <= 64, "δ of an exact symbol does not terminate; supply a floor");
                let mut next = BTreeMap::new();
                for (a, xa) in &frontier {
                    for i in 0..ctx.n {
                        let mut na = *a;
                        na[i] += 1;
                        if next.contains_key(&na) {
                            continue;
                        }
                        let y = xa.d_x(i);
                        if !y.is_zero() {
                            next.insert(na, y);
                        }
                    }
                }
                for (a, xa) in &next {
                    let l = log_derivative(&ctx, a);
                    let lw = -weighted(&ctx, a);
                    let c = Gr::i_pow(-abs_len(a));
                    for (d, comp) in &xa.comps {
                        let mut out = Component::default();
                        l.mul_into(comp, &ctx, &c, &mut out);
                        r.insert(d + lw, out);
                    }
                }
                frontier = next;
                depth += 1;
            }
            return r;
        }
        let max_w = amax - cutoff;
        let alphas = multi_indices(&ctx, max_w);
        let mut dx: HashMap<[u16; MAX_DIM], Self> = HashMap::new();
        for a in &alphas {
            let xa = match predecessor(a) {
                None => self.clone(),
                Some((prev, i)) => match dx.get(&prev) {
                    Some(p) => p.d_x(i),
                    None => continue,
                },
            };
            if xa.is_zero() {
                continue;
            }
            if abs_len(a) > 0 {
                let l = log_derivative(&ctx, a);
                let lw = -weighted(&ctx, a);
                let c = Gr::i_pow(-abs_len(a));
                for (d, comp) in &xa.comps {
                    if d + lw < cutoff {
                        continue;
                    }
                    let mut out = Component::default();
                    l.mul_into(comp, &ctx, &c, &mut out);
                    r.insert(d + lw, out);
                }
            }
            dx.insert(*a, xa);
        }
        r
    }

    /// Real-locus value of the known components at `(x, ξ)`, `ξ ≠ 0`.
    pub fn eval_real(&self, x: &[Rational], xi: &[Rational]) -> Result<BigFloatC> {
        let (xiv, s) = real_point(&self.ctx, xi)?;
        let mut acc = BigFloatC::zero();
        for c in self.comps.values() {
            acc = &acc + &c.eval(&self.ctx, x, &xiv, &s);
        }
        Ok(acc)
    }

    /// Exact zero test for one component, or real-locus sampling when the
    /// quotient ring has zero divisors (`n = 1` outside TWO_SHEET).
    pub fn component_vanishes(&self, d: i64, samples: usize, seed: u64) -> Result<bool> {
        let c = self.component(d)?;
        if c.is_zero() {
            return Ok(true);
        }
        if self.ctx.n >= 2 || self.ctx.is_two_sheet() {
            return Ok(false);
        }
        Ok(component_vanishes_on_real_locus(&self.ctx, &c, samples, seed))
    }

    pub fn to_json(&self) -> Value {
        let comps: Vec<Value> = self
            .comps
            .iter()
            .rev()
            .map(|(d, c)| json!({"degree": d, "terms": component_terms_json(&self.ctx, c)}))
            .collect();
        let cutoff = if self.is_exact() { Value::String("exact".into()) } else { json!(self.cutoff) };
        json!({"ctx": self.ctx.to_json(), "top": self.top, "cutoff": cutoff, "components": comps})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let ctx = HeisenbergContext::from_json(get(v, "ctx")?)?;
        let top = get_i64(v, "top")?;
        let cutoff = match get(v, "cutoff")? {
            Value::String(s) if s == "exact" => EXACT,
            c => c.as_i64().ok_or_else(|| Error::Invalid("cutoff must be an integer or \"exact\"".into()))?,
        };
        if !is_exact_cutoff(cutoff) && cutoff > top {
            return Err(Error::Invalid(format!("cutoff {cutoff} above top {top}")));
        }
        let mut s = Self::zero_with(ctx, top, cutoff);
        let comps =
            get(v, "components")?.as_array().ok_or_else(|| Error::Invalid("components must be an array".into()))?;
        for c in comps {
            let d = get_i64(c, "degree")?;
            if d > top || d < cutoff {
                return Err(Error::Invalid(format!("component degree {d} outside [{cutoff}, {top}]")));
            }
            let comp = component_from_json(&ctx, d, get(c, "terms")?)?;
            s.insert(d, comp);
        }
        Ok(s)
    }
}

fn real_point(ctx: &HeisenbergContext, xi: &[Rational]) -> Result<(Vec<BigFloatC>, BigFloatC)> {
    if xi.len() != ctx.n || xi.iter().all(|v| v.is_zero()) {
        return Err(Error::Domain("evaluation needs ξ ≠ 0 with n entries".into()));
    }
    let xiv: Vec<BigFloatC> = xi.iter().map(BigFloatC::from_rational).collect();
    let mut q = Rational::zero();
    for (i, v) in xi.iter().enumerate() {
        q += if i < ctx.p { v * v * v * v } else { v * v };
    }
    let s = if ctx.is_two_sheet() {
        BigFloatC::from_real(bf_from_rational(&xi[0]).abs())
    } else {
        BigFloatC::from_real(bf_sqrt(&bf_sqrt(&bf_from_rational(&q))))
    };
    Ok((xiv, s))
}

/// Sampled real-locus zero test at threshold `10^{−digits/2}`.
pub fn component_vanishes_on_real_locus(ctx: &HeisenbergContext, c: &Component, samples: usize, seed: u64) -> bool {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let tol = (crate::exact_scalars::precision_digits() / 2) as i32;
    for _ in 0..samples {
        let x: Vec<Rational> = (0..ctx.n).map(|_| rat(rng.gen_range(-300..300), 97)).collect();
        let mut xi: Vec<Rational> = (0..ctx.n).map(|_| rat(rng.gen_range(-200..200), 53)).collect();
        if xi.iter().all(|v| v.is_zero()) {
            xi[0] = rat_int(1);
        }
        let (xiv, s) = match real_point(ctx, &xi) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if !c.eval(ctx, &x, &xiv, &s).below_pow10(tol) {
            return false;
        }
    }
    true
}

/// Largest modulus of `c` over random real-locus points.
pub fn component_sample_modulus(ctx: &HeisenbergContext, c: &Component, samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max = 0.0f64;
    for _ in 0..samples {
        let x: Vec<Rational> = (0..ctx.n).map(|_| rat(rng.gen_range(-300..300), 97)).collect();
        let mut xi: Vec<Rational> = (0..ctx.n).map(|_| rat(rng.gen_range(-200..200), 53)).collect();
        if xi.iter().all(|v| v.is_zero()) {
            xi[0] = rat_int(1);
        }
        let Ok((xiv, s)) = real_point(ctx, &xi) else { continue };
        max = max.max(c.eval(ctx, &x, &xiv, &s).abs_f64());
    }
    max
}

thread_local! {
    static LOG_MEMO: RefCell<HashMap<(HeisenbergContext, [u16; MAX_DIM]), Rc<Component>>> = RefCell::new(HashMap::new());
}

/// `(1/α!) ∂ξ^α log s` for `|α| ≥ 1`, a single homogeneous component of degree `−⟨α⟩`.
pub fn log_derivative(ctx: &HeisenbergContext, a: &[u16; MAX_DIM]) -> Rc<Component> {
    let key = (*ctx, *a);
    if let Some(v) = LOG_MEMO.with(|m| m.borrow().get(&key).cloned()) {
        return v;
    }
    let (prev, i) = predecessor(a).expect("log derivative needs |α| ≥ 1");
    let one = CoeffFunction::constant(ctx.coeff_backend(), ctx.n, Gr::one());
    let comp = if abs_len(&prev) == 0 {
        let mut c = Component::default();
        if ctx.is_two_sheet() {
            c.add_term(XiMono::plus(-1), &one, &Gr::one());
            c.add_term(XiMono::minus(-1), &one, &Gr::from_int(-1));
        } else {
            let mut al = [0u16; MAX_DIM];
            if i < ctx.p {
                al[i] = 3;
                c.add_term(XiMono::h(&al, -4), &one, &Gr::one());
            } else {
                al[i] = 1;
                c.add_term(XiMono::h(&al, -4), &one, &Gr::from_ratio(1, 2));
            }
            c = c.normal_form(ctx);
        }
        c
    } else {
        log_derivative(ctx, &prev).d_xi(ctx, i).scale(&Gr::from_ratio(1, a[i] as i64))
    };
    let v = Rc::new(comp);
    LOG_MEMO.with(|m| m.borrow_mut().insert(key, v.clone()));
    v
}

/// `∂ξ_i log s` as an exact symbol.
pub fn log_gradient(ctx: HeisenbergContext, i: usize) -> FormalSymbol {
    let mut a = [0u16; MAX_DIM];
    a[i] = 1;
    FormalSymbol::homogeneous(ctx, -ctx.weight(i), (*log_derivative(&ctx, &a)).clone())
}

/// `[log Δ^{1/4}, a] ≈ Σ_{k=1}^{depth} ((−1)^k/k)·(1/4)·a^{(k)} ⋆ Δ^{−k}` with
/// `Δ = s⁴` and `a^{(k)} = ad(Δ)^k a`; right multiplication by `Δ^{−k}`.
pub fn delta_via_ad(a: &FormalSymbol, depth: u32) -> FormalSymbol {
    delta_via_ad_sided(a, depth, true)
}

/// As [`delta_via_ad`], choosing right (`true`) or left multiplication by `Δ^{−k}`.
pub fn delta_via_ad_sided(a: &FormalSymbol, depth: u32, right: bool) -> FormalSymbol {
    let ctx = a.ctx;
    let floor = (a.top - depth as i64).max(a.cutoff);
    let delta4 = FormalSymbol::s_power(ctx, 4);
    let mut acc = FormalSymbol::zero_with(ctx, a.top - 1, floor);
    let mut ak = a.clone();
    for k in 1..=depth as i64 {
        // a^{(k)} has order ≤ top + 3k and is needed down to floor + 4k.
        let fl = floor + 4 * k;
        ak = delta4.star_floor(&ak, fl).sub(&ak.star_floor(&delta4, fl));
        let inv = FormalSymbol::s_power(ctx, -4 * k as i32);
        let term = if right { ak.star_floor(&inv, floor) } else { inv.star_floor(&ak, floor) };
        let c = Gr::from_ratio(if k % 2 == 0 { 1 } else { -1 }, 4 * k);
        acc = acc.add_scaled(&term, &c);
    }
    acc.truncate(floor)
}

/// `v` with `1 − v⋆u` and `1 − u⋆v` vanishing in degrees `[−depth, 0]`,
/// from the Neumann series `Σ_j r^j ⋆ v0`, `r = 1 − v0 ⋆ u`.
pub fn parametrix(u: &FormalSymbol, v0: Option<&Component>, depth: u32) -> Result<FormalSymbol> {
    let ctx = u.ctx;
    if u.top != 0 {
        return Err(Error::Invalid(format!("parametrix needs an order-0 symbol, got order {}", u.top)));
    }
    let floor = -(depth as i64);
    if u.cutoff > floor {
        return Err(Error::Truncation { needed: floor, cutoff: u.cutoff });
    }
    let v0c = match v0 {
        Some(c) => c.clone(),
        None => principal_inverse(&ctx, &u.principal_symbol())?,
    };
    let v0s = FormalSymbol::homogeneous(ctx, 0, v0c);
    let one = FormalSymbol::one(ctx);
    let r = one.sub(&v0s.star_floor(u, floor));
    if !r.component_vanishes(0, 30, 7)? {
        return Err(Error::NotElliptic("supplied principal inverse does not invert the principal symbol".into()));
    }
    let mut r = r;
    r.comps.remove(&0);
    r.top = -1;
    let mut v = v0s.truncate(floor);
    let mut term = v0s.truncate(floor);
    for _ in 0..depth {
        term = r.star_floor(&term, floor);
        if term.is_zero() {
            break;
        }
        v = v.add(&term);
    }
    let mut v = v.truncate(floor);
    v.top = 0;
    Ok(v)
}

/// Principal inverse for invertible constants and, in TWO_SHEET, for
/// sheetwise Fourier monomials `f₊ P_0 + f₋ M_0`.
pub fn principal_inverse(ctx: &HeisenbergContext, c: &Component) -> Result<Component> {
    let not_ell = || Error::NotElliptic("no automatic principal inverse; supply v0".into());
    let inv_fourier = |f: &CoeffFunction| -> Result<CoeffFunction> {
        if f.terms.len() != 1 || f.backend != Backend::Torus {
            return Err(not_ell());
        }
        let (m, a) = f.terms.iter().next().unwrap();
        let mut im = *m;
        for k in im.k.iter_mut() {
            *k = -*k;
        }
        Ok(CoeffFunction::monomial(f.backend, f.n, im, a.inv()?))
    };
    let mut r = Component::default();
    if ctx.is_two_sheet() {
        for m in [XiMono::plus(0), XiMono::minus(0)] {
            let f = c.terms.get(&m).ok_or_else(not_ell)?;
            r.add_term(m, &inv_fourier(f)?, &Gr::one());
        }
        if c.terms.len() != 2 {
            return Err(not_ell());
        }
        return Ok(r);
    }
    let unit = XiMono::s_pow(0);
    match (c.terms.len(), c.terms.get(&unit)) {
        (1, Some(f)) => {
            let k = f.as_constant().ok_or_else(not_ell)?;
            r.add_term(unit, &CoeffFunction::constant(f.backend, f.n, Gr::one()), &k.inv().map_err(|_| not_ell())?);
            Ok(r)
        }
        _ => Err(not_ell()),
    }
}

fn component_terms_json(ctx: &HeisenbergContext, c: &Component) -> Vec<Value> {
    let mut out = Vec::new();
    let term = |alpha: &[u16], s: i64, f: &CoeffFunction| json!({"coeff": f.to_json()["terms"].clone(), "alpha": alpha, "sPower": s});
    if ctx.is_two_sheet() {
        // f₊P_d + f₋M_d = ((f₊+f₋)/2) s^d + ((f₊−f₋)/2) ξ s^{d−1}
        let mut by_d: BTreeMap<i32, (CoeffFunction, CoeffFunction)> = BTreeMap::new();
        let z = CoeffFunction::zero(Backend::Torus, 1);
        for (m, f) in &c.terms {
            let e = by_d.entry(m.s).or_insert_with(|| (z.clone(), z.clone()));
            if m.sheet == 1 {
                e.0 = f.clone();
            } else {
                e.1 = f.clone();
            }
        }
        for (d, (fp, fm)) in by_d {
            let even = fp.add(&fm).scale(&Gr::from_ratio(1, 2));
            let odd = fp.add(&fm.scale(&Gr::from_int(-1))).scale(&Gr::from_ratio(1, 2));
            if !even.is_zero() {
                out.push(term(&[0], d as i64, &even));
            }
            if !odd.is_zero() {
                out.push(term(&[1], d as i64 - 1, &odd));
            }
        }
        return out;
    }
    for (m, f) in &c.terms {
        out.push(term(&m.alpha[..ctx.n], m.s as i64, f));
    }
    out
}

fn component_from_json(ctx: &HeisenbergContext, d: i64, terms: &Value) -> Result<Component> {
    let list = terms.as_array().ok_or_else(|| Error::Invalid("terms must be an array".into()))?;
    let mut c = Component::default();
    for t in list {
        let alpha = int_array(get(t, "alpha")?)?;
        let s = get_i64(t, "sPower")?;
        if alpha.len() != ctx.n || alpha.iter().any(|&a| a < 0) {
            return Err(Error::Invalid("alpha must have n non-negative entries".into()));
        }
        let f = CoeffFunction::terms_from_json(ctx.coeff_backend(), ctx.n, get(t, "coeff")?)?;
        let al: Vec<u16> = alpha.iter().map(|&a| a as u16).collect();
        let m = XiMono::h(&al, s as i32);
        if m.degree(ctx) != d {
            return Err(Error::Invalid(format!("term of degree {} in component {d}", m.degree(ctx))));
        }
        if ctx.is_two_sheet() {
            // ξ^a s^m = P_{a+m} + (−1)^a M_{a+m}
            let dd = (al[0] as i64 + s) as i32;
            c.add_term(XiMono::plus(dd), &f, &Gr::one());
            c.add_term(XiMono::minus(dd), &f, &Gr::from_int(if al[0] % 2 == 0 { 1 } else { -1 }));
        } else {
            for (nm, k) in normal_form_mono(ctx, m).iter() {
                c.add_term(*nm, &f, &Gr::from_int(*k));
            }
        }
    }
    Ok(c)
}

/// Public normal form of a homogeneous component.
pub fn normal_form(ctx: &HeisenbergContext, c: &Component) -> Component {
    c.normal_form(ctx)
}
