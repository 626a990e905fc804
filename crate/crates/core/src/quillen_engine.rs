//! Quillen's cochain picture over order-0 symbols: bar cochains with
//! ε-extended form values, the curvature `K_t = F² + εtδF + [tF + ε log|ξ|′, ρ]`,
//! the finite exponential `e^{K_t}`, and the Hochschild cochain
//! `θ^t = τ^♮(∂ρ·e^{K_t})` with `τ(x + εy) = ⨍ y`.
//!
//! Sign rules, all in total degree (bar degree plus form degree plus ε):
//! `(fg)(a₁…a_{p+q}) = (−1)^{p|g|} f(a₁…a_p) g(…)`, `δ_bar f = (−1)^{|f|+1} f∘b′`,
//! and `(∂f·g)♮(a₁ ⊗ (a₂…a_n)) = (−1)^{|g|} f(a₁) g(a₂…a_n)`.

pub mod bar;
pub mod synthetic;

use std::rc::Rc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::Zero;
use serde_json::{json, Value};

use crate::cyclic_index::{phi_cocycle, psi_cocycle, Cochain, SymMat};
use crate::error::{Error, Result};
use crate::exact_scalars::{binomial, factorial, rat_int, Gr, Rational, Scalar};
use crate::form_calculus::{commutator_with_f, conventions, delta_f, f_multiplier, omega_power, parity, FormSymbol};
use crate::symbol_algebra::{component_sample_modulus, FormalSymbol, HeisenbergContext};
use crate::wodzicki_residue::{residue_form, residue_form_epsilon};

use bar::bar_bprime;

/// Arguments are truncated to `−ν − WORK_MARGIN` before evaluation.
const WORK_MARGIN: i64 = 4;
/// Cochain values keep components down to `−ν − VALUE_MARGIN`: one bare `F`
/// raises the order by one, and everything else has order at most 0.
const VALUE_MARGIN: i64 = 2;

fn value_floor(ctx: &HeisenbergContext) -> i64 {
    -ctx.nu() - VALUE_MARGIN
}

fn sign(k: usize) -> Gr {
    Gr::from_int(if k % 2 == 0 { 1 } else { -1 })
}

fn inv_fact(k: usize) -> Gr {
    Gr::from_rational(rat_int(1) / factorial(k as u32))
}

fn check_ctx(ctx: &HeisenbergContext, t: &[FormalSymbol]) -> Result<()> {
    if t.iter().any(|a| a.ctx != *ctx) {
        return Err(Error::ContextMismatch("bar tensor entries from a different context".into()));
    }
    Ok(())
}

/// Entries truncated to the working window.
pub fn work(t: &[FormalSymbol]) -> Vec<FormalSymbol> {
    t.iter().map(|a| a.truncate(-a.ctx.nu() - WORK_MARGIN)).collect()
}

/// Splits a form symbol into total-degree-even and -odd parts (ε counts as odd).
fn parity_split(x: &FormSymbol) -> (FormSymbol, FormSymbol) {
    let mut even = FormSymbol::zero(x.ctx);
    let mut odd = FormSymbol::zero(x.ctx);
    for (m, a) in &x.parts {
        let tgt = if parity(*m) == 1 { &mut even } else { &mut odd };
        tgt.parts.insert(*m, a.clone());
    }
    for (m, a) in &x.eps {
        let tgt = if parity(*m) == 1 { &mut odd } else { &mut even };
        tgt.eps.insert(*m, a.clone());
    }
    (even, odd)
}

/// Graded commutator `[F, X]` with the bare multiplier `F`, by ⋆-products.
pub fn bare_f_commutator(f: &FormSymbol, x: &FormSymbol, floor: i64) -> FormSymbol {
    let (even, odd) = parity_split(x);
    f.star_floor(x, floor).sub(&even.star_floor(f, floor)).add(&odd.star_floor(f, floor))
}

/// `ε·δ(X)` for the ε-free part of `X`; this is `[ε log|ξ|′, X]`.
fn eps_delta(x: &FormSymbol, floor: i64) -> FormSymbol {
    x.without_epsilon().map(|a| a.delta_floor(floor)).times_epsilon()
}

fn product_chain(seq: &[FormSymbol], floor: i64) -> FormSymbol {
    let mut it = seq.iter();
    let first = it.next().expect("nonempty product").clone();
    it.fold(first, |acc, x| acc.star_floor(x, floor))
}

// ---------------------------------------------------------------- bar cochains

pub type BarEval = Rc<dyn Fn(&[FormalSymbol]) -> Result<FormSymbol>>;

/// An element of `Hom(B, L)[ε]`: one evaluator for every arity, homogeneous in
/// total degree mod 2.
#[derive(Clone)]
pub struct BarCochain {
    pub ctx: HeisenbergContext,
    pub name: String,
    pub parity: usize,
    eval: BarEval,
}

impl std::fmt::Debug for BarCochain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BarCochain({}, parity {})", self.name, self.parity)
    }
}

impl BarCochain {
    pub fn new(
        ctx: HeisenbergContext,
        name: &str,
        parity: usize,
        f: impl Fn(&[FormalSymbol]) -> Result<FormSymbol> + 'static,
    ) -> Self {
        Self { ctx, name: name.into(), parity: parity % 2, eval: Rc::new(f) }
    }

    pub fn eval(&self, t: &[FormalSymbol]) -> Result<FormSymbol> {
        check_ctx(&self.ctx, t)?;
        (self.eval)(t)
    }

    /// Value `1` on the empty tensor.
    pub fn unit(ctx: HeisenbergContext) -> Self {
        Self::new(ctx, "1", 0, move |t| {
            Ok(if t.is_empty() { FormSymbol::from_symbol(FormalSymbol::one(ctx)) } else { FormSymbol::zero(ctx) })
        })
    }

    /// `ρ(a) = a`, zero in other arities; total degree 1.
    pub fn rho(ctx: HeisenbergContext) -> Self {
        Self::new(ctx, "rho", 1, move |t| {
            Ok(if t.len() == 1 { FormSymbol::from_symbol(t[0].clone()) } else { FormSymbol::zero(ctx) })
        })
    }

    /// An arity-0 cochain with value `x` of total parity `parity`.
    pub fn constant(ctx: HeisenbergContext, name: &str, parity: usize, x: FormSymbol) -> Self {
        Self::new(ctx, name, parity, move |t| Ok(if t.is_empty() { x.clone() } else { FormSymbol::zero(ctx) }))
    }

    pub fn add_scaled(&self, o: &Self, c: &Gr) -> Result<Self> {
        if self.parity != o.parity {
            return Err(Error::Invalid(format!("cannot add {} and {} of different parity", self.name, o.name)));
        }
        let (f, g, c) = (self.clone(), o.clone(), c.clone());
        Ok(Self::new(self.ctx, &format!("{} + ({c})·{}", self.name, o.name), self.parity, move |t| {
            Ok(f.eval(t)?.add_scaled(&g.eval(t)?, &c))
        }))
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.add_scaled(o, &Gr::one())
    }

    pub fn scale(&self, c: &Gr) -> Self {
        let (f, c) = (self.clone(), c.clone());
        Self::new(self.ctx, &format!("({c})·{}", self.name), self.parity, move |t| Ok(f.eval(t)?.scale(&c)))
    }

    /// `(fg)(a₁…a_m) = Σ_p (−1)^{p|g|} f(a₁…a_p) g(a_{p+1}…a_m)`.
    pub fn product(&self, o: &Self) -> Self {
        let (f, g) = (self.clone(), o.clone());
        let floor = value_floor(&self.ctx);
        Self::new(self.ctx, &format!("({})({})", self.name, o.name), self.parity + o.parity, move |t| {
            let mut acc = FormSymbol::zero(f.ctx);
            for p in 0..=t.len() {
                let x = f.eval(&t[..p])?;
                if x.is_zero() {
                    continue;
                }
                let y = g.eval(&t[p..])?;
                acc = acc.add_scaled(&x.star_floor(&y, floor), &sign(p * g.parity));
            }
            Ok(acc)
        })
    }

    /// `[f, g] = fg − (−1)^{|f||g|} gf`.
    pub fn graded_commutator(&self, o: &Self) -> Self {
        let r = self.product(o).add_scaled(&o.product(self), &-sign(self.parity * o.parity)).expect("same parity");
        Self { name: format!("[{}, {}]", self.name, o.name), ..r }
    }

    /// `δ_bar f = (−1)^{|f|+1} f∘b′`.
    pub fn delta_bar(&self) -> Self {
        let f = self.clone();
        let floor = -self.ctx.nu() - WORK_MARGIN;
        let s = sign(self.parity + 1);
        Self::new(self.ctx, &format!("δ_bar({})", self.name), self.parity + 1, move |t| {
            let mut acc = FormSymbol::zero(f.ctx);
            for (c, u) in bar_bprime(t, |a, b| a.star_floor(b, floor)) {
                acc = acc.add_scaled(&f.eval(&u)?, &Gr::from_int(c));
            }
            Ok(acc.scale(&s))
        })
    }

    /// `[tF + ε log|ξ|′, f]`, evaluated value-wise with the bare multiplier `F`.
    pub fn ad_nabla(&self, t: &Gr) -> Result<Self> {
        let f = self.clone();
        let bare = f_multiplier(self.ctx)?;
        let t = t.clone();
        let floor = value_floor(&self.ctx);
        Ok(Self::new(self.ctx, &format!("ad∇({})", self.name), self.parity + 1, move |a| {
            let x = f.eval(a)?;
            Ok(bare_f_commutator(&bare, &x, floor).scale(&t).add(&eps_delta(&x, floor)))
        }))
    }

    /// `(δ_bar + ad ρ + ad ∇_t) f` with `∇_t = tF + ε log|ξ|′`.
    pub fn bianchi(&self, t: &Gr) -> Result<Self> {
        let rho = Self::rho(self.ctx);
        let r = self.delta_bar().add(&rho.graded_commutator(self))?.add(&self.ad_nabla(t)?)?;
        Ok(Self { name: format!("D({})", self.name), ..r })
    }
}

// ---------------------------------------------------------------- curvature

/// The constituents of `K_t` shared by its evaluations.
struct Curvature {
    ctx: HeisenbergContext,
    t: Gr,
    /// `F ⋆ F`.
    f2: FormSymbol,
    /// `εtδF`.
    eps_df: FormSymbol,
}

impl Curvature {
    fn new(ctx: HeisenbergContext, t: &Gr) -> Result<Self> {
        let f = f_multiplier(ctx)?;
        let f2 = f.star(&f).map(FormalSymbol::tightened);
        let eps_df = delta_f(ctx).scale(t).times_epsilon();
        Ok(Self { ctx, t: t.clone(), f2, eps_df })
    }
    /// `t[F, a] + εδa`.
    fn arity_one(&self, a: &FormalSymbol, floor: i64) -> FormSymbol {
        commutator_with_f(a).scale(&self.t).add(&FormSymbol::from_symbol(a.delta_floor(floor)).times_epsilon())
    }
    /// `e^{F²} = Σ_{j ≤ n} (F²)^j/j!`.
    fn exp_f2(&self, floor: i64) -> FormSymbol {
        let mut acc = FormSymbol::from_symbol(FormalSymbol::one(self.ctx));
        let mut pow = acc.clone();
        for j in 1..=self.ctx.n {
            pow = pow.star_floor(&self.f2, floor);
            acc = acc.add_scaled(&pow, &inv_fact(j));
        }
        acc
    }
    /// `e^{K_t}(a₁…a_m) = e^{F²}·Σ_N K′^N(a₁…a_m)/N!` with `K′ = K_t − F²`. Words
    /// use each `a_j` once through the arity-1 part and at most one `εtδF`
    /// (ε² = 0), so `N ∈ {m, m+1}`.
    fn exp_eval(&self, t: &[FormalSymbol], floor: i64) -> FormSymbol {
        let m = t.len();
        let one = FormSymbol::from_symbol(FormalSymbol::one(self.ctx));
        // w0[j]: words through a_j without εtδF; w1[j]: with it.
        let mut w0 = one.clone();
        let mut w1 = one.star_floor(&self.eps_df, floor);
        for a in t {
            let k1 = self.arity_one(a, floor);
            w1 = w1.star_floor(&k1, floor).add(&w0.star_floor(&k1, floor).star_floor(&self.eps_df, floor));
            w0 = w0.star_floor(&k1, floor);
        }
        let inner = w0.scale(&inv_fact(m)).add(&w1.scale(&inv_fact(m + 1)));
        self.exp_f2(floor).star_floor(&inner, floor)
    }
}

/// `K_t`: arity 0 `F² + εtδF`, arity 1 `a ↦ t[F, a] + εδa`, zero above. GAUSSIAN only.
pub fn curvature_k(ctx: HeisenbergContext, t: &Gr) -> Result<BarCochain> {
    let k = Curvature::new(ctx, t)?;
    let floor = value_floor(&ctx);
    Ok(BarCochain::new(ctx, &format!("K[t={t}]"), 0, move |a| {
        Ok(match a.len() {
            0 => k.f2.add(&k.eps_df),
            1 => k.arity_one(&a[0], floor),
            _ => FormSymbol::zero(k.ctx),
        })
    }))
}

/// `e^{K_t}` evaluated on the bar tensor `t`.
pub fn exp_k_eval(t: &[FormalSymbol], ctx: HeisenbergContext, tp: &Gr) -> Result<FormSymbol> {
    check_ctx(&ctx, t)?;
    Ok(Curvature::new(ctx, tp)?.exp_eval(&work(t), value_floor(&ctx)))
}

/// `e^{K_t}` as a bar cochain.
pub fn exp_k(ctx: HeisenbergContext, t: &Gr) -> Result<BarCochain> {
    let k = Curvature::new(ctx, t)?;
    let floor = value_floor(&ctx);
    Ok(BarCochain::new(ctx, &format!("exp K[t={t}]"), 0, move |a| Ok(k.exp_eval(&work(a), floor))))
}

/// `(δ_bar + ad ρ + ad ∇_t) K_t` on `t`; vanishes identically.
pub fn bianchi_check(t: &[FormalSymbol], ctx: HeisenbergContext, tp: &Gr) -> Result<FormSymbol> {
    curvature_k(ctx, tp)?.bianchi(tp)?.eval(&work(t))
}

/// `(δ_bar + ad ρ + ad ∇_t) e^{K_t}` on `t`; vanishes identically.
pub fn bianchi_exp_check(t: &[FormalSymbol], ctx: HeisenbergContext, tp: &Gr) -> Result<FormSymbol> {
    exp_k(ctx, tp)?.bianchi(tp)?.eval(&work(t))
}

/// Largest sampled modulus over the components of degree `≥ −ν` of every part;
/// exact zero components contribute 0.
pub fn form_deviation(x: &FormSymbol) -> f64 {
    let nu = x.ctx.nu();
    let mut max = 0.0f64;
    for a in x.parts.values().chain(x.eps.values()) {
        for (d, c) in &a.comps {
            if *d >= -nu && !c.is_zero() {
                max = max.max(component_sample_modulus(&x.ctx, c, 6, 0x5eed ^ (*d as u64)));
            }
        }
    }
    max
}

// ---------------------------------------------------------------- theta

/// `θ^t(a₀, a₁…a_m) = τ(a₀ · e^{K_t}(a₁…a_m))`; the `∂ρ` sign `(−1)^{|e^K|}` is `+1`.
pub fn theta_eval(args: &[FormalSymbol], tp: &Gr) -> Result<Scalar> {
    let Some(a0) = args.first() else {
        return Err(Error::Invalid("theta needs a₀".into()));
    };
    let ctx = a0.ctx;
    check_ctx(&ctx, args)?;
    let w = work(args);
    let floor = -ctx.nu();
    let e = Curvature::new(ctx, tp)?.exp_eval(&w[1..], floor);
    residue_form_epsilon(&FormSymbol::from_symbol(w[0].clone()).star_floor(&e, floor))
}

/// `θ′_{2k}` as displayed with `i` read as `c` (`F⋆F = cω`):
/// `c^{n−k+1}/(2k−1)! Σ_{i=1}^{2k−1} (−1)^i ⨍(a₀[F,a₁]…δa_i…[F,a_{2k−1}] ⊗ ω^{n−k+1}/(n−k+1)!)`.
pub fn theta_prime(k: usize, args: &[FormalSymbol]) -> Result<Scalar> {
    let (ctx, w) = displayed_args(k, args)?;
    if k > ctx.n + 1 {
        return Ok(Scalar::zero());
    }
    let j = ctx.n + 1 - k;
    let floor = -ctx.nu();
    let d: Vec<FormSymbol> = w[1..].iter().map(commutator_with_f).collect();
    let mut acc = Scalar::zero();
    for i in 1..2 * k {
        let mut seq = vec![FormSymbol::from_symbol(w[0].clone())];
        seq.extend_from_slice(&d[..i - 1]);
        seq.push(FormSymbol::from_symbol(w[i].delta_floor(floor)));
        seq.extend_from_slice(&d[i..]);
        seq.push(omega_power(ctx, j));
        acc += &residue_form(&product_chain(&seq, floor))?.scale(&sign(i));
    }
    Ok(acc.scale(&(&conventions().c.pow(j as u32) * &inv_fact(2 * k - 1))))
}

/// `θ″_{2k}` as displayed with `i` read as `c`:
/// `c^{n−k}/(2k)! Σ_{i=0}^{2k−1} (−1)^{i+1} ⨍(a₀[F,a₁]…[F,a_i] δF […]… ⊗ ω^{n−k}/(n−k)!)`.
pub fn theta_second(k: usize, args: &[FormalSymbol]) -> Result<Scalar> {
    let (ctx, w) = displayed_args(k, args)?;
    if k > ctx.n {
        return Ok(Scalar::zero());
    }
    let floor = -ctx.nu();
    let d: Vec<FormSymbol> = w[1..].iter().map(commutator_with_f).collect();
    let df = delta_f(ctx);
    let mut acc = Scalar::zero();
    for i in 0..2 * k {
        let mut seq = vec![FormSymbol::from_symbol(w[0].clone())];
        seq.extend_from_slice(&d[..i]);
        seq.push(df.clone());
        seq.extend_from_slice(&d[i..]);
        seq.push(omega_power(ctx, ctx.n - k));
        acc += &residue_form(&product_chain(&seq, floor))?.scale(&sign(i + 1));
    }
    Ok(acc.scale(&(&conventions().c.pow((ctx.n - k) as u32) * &inv_fact(2 * k))))
}

fn displayed_args(k: usize, args: &[FormalSymbol]) -> Result<(HeisenbergContext, Vec<FormalSymbol>)> {
    if k == 0 || args.len() != 2 * k {
        return Err(Error::Invalid(format!(
            "theta component of index 2k = {} takes 2k ≥ 2 arguments, got {}",
            2 * k,
            args.len()
        )));
    }
    let ctx = args[0].ctx;
    check_ctx(&ctx, args)?;
    Ok((ctx, work(args)))
}

/// Hand-derived proportionality constants: `θ′_{2k} = λ′·φ_{2k−1}` and
/// `θ″_{2k} = λ″·ψ_{2k−1}` with `λ′ = −c^n·C(n, k−1)` and `λ″ = c^n·C(n, k)`.
pub fn expected_theta_constants(n: usize, k: usize) -> (Gr, Gr) {
    let cn = conventions().c.pow(n as u32);
    let b = |j: usize| Gr::from_rational(binomial(n as i64, j as i64));
    (-(&cn * &b(k - 1)), &cn * &b(k))
}

fn to_c64(s: &Scalar) -> Complex64 {
    Complex64::new(s.re_f64(), s.im_f64())
}

/// Measured ratio of a θ component to its cocycle over sample tuples.
#[derive(Clone, Debug)]
pub struct RatioReport {
    pub name: String,
    pub value: Complex64,
    pub spread: f64,
    pub samples: usize,
    pub expected: Complex64,
}

impl RatioReport {
    pub fn deviation_from_expected(&self) -> f64 {
        (self.value - self.expected).norm()
    }
    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "value": [self.value.re, self.value.im],
            "expected": [self.expected.re, self.expected.im],
            "spread": self.spread,
            "samples": self.samples,
        })
    }
}

/// Denominators below this are skipped when measuring ratios.
const RATIO_FLOOR: f64 = 1e-12;

fn ratio_report(name: String, pairs: &[(Scalar, Scalar)], expected: &Gr) -> RatioReport {
    let ratios: Vec<Complex64> =
        pairs.iter().filter(|(_, d)| d.abs_f64() > RATIO_FLOOR).map(|(a, d)| to_c64(a) / to_c64(d)).collect();
    let value = ratios.first().copied().unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    let spread = ratios.iter().map(|r| (r - value).norm()).fold(0.0, f64::max);
    let e = expected.to_bigfloat();
    RatioReport { name, value, spread, samples: ratios.len(), expected: Complex64::new(e.re_f64(), e.im_f64()) }
}

/// `θ′_{2k}/φ_{2k−1}` and `θ″_{2k}/ψ_{2k−1}` on tuples of length `2k`.
pub fn theta_constants(k: usize, tuples: &[Vec<FormalSymbol>]) -> Result<(RatioReport, RatioReport)> {
    let Some(n) = tuples.first().and_then(|t| t.first()).map(|a| a.ctx.n) else {
        return Err(Error::Invalid("no sample tuples".into()));
    };
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("theta constants need 1 ≤ k ≤ n, got k = {k}")));
    }
    let mut prime = Vec::new();
    let mut second = Vec::new();
    for t in tuples {
        let m = mats(t);
        prime.push((theta_prime(k, t)?, phi_cocycle(k - 1, &m)?));
        second.push((theta_second(k, t)?, psi_cocycle(k, &m)?));
    }
    let (lp, ls) = expected_theta_constants(n, k);
    Ok((
        ratio_report(format!("theta'_{}/phi_{}", 2 * k, 2 * k - 1), &prime, &lp),
        ratio_report(format!("theta''_{}/psi_{}", 2 * k, 2 * k - 1), &second, &ls),
    ))
}

fn mats(t: &[FormalSymbol]) -> Vec<SymMat> {
    t.iter().cloned().map(SymMat::scalar).collect()
}

fn scalars(a: &[SymMat]) -> Result<Vec<FormalSymbol>> {
    a.iter()
        .map(|m| {
            if m.size == 1 {
                Ok(m.e[0].clone())
            } else {
                Err(Error::Unsupported("theta cochains take scalar symbols".into()))
            }
        })
        .collect()
}

/// `θ^t` restricted to `arity` arguments, as a Hochschild cochain.
pub fn theta_cochain(arity: usize, tp: &Gr) -> Cochain<SymMat> {
    let tp = tp.clone();
    Cochain::custom(arity - 1, &format!("theta[t={tp}]_{arity}"), move |a: &[SymMat]| theta_eval(&scalars(a)?, &tp))
}

// ---------------------------------------------------------------- t-family

/// Coefficients of the Lagrange basis at `t = 0, 1, …, d`: `out[s][j] = [t^j] L_s(t)`.
fn lagrange_coefficients(d: usize) -> Vec<Vec<Rational>> {
    (0..=d)
        .map(|s| {
            // Π_{r≠s} (t − r)/(s − r), expanded from the lowest power up.
            let mut poly = vec![rat_int(1)];
            let mut denom = rat_int(1);
            for r in (0..=d).filter(|&r| r != s) {
                let mut next = vec![rat_int(0); poly.len() + 1];
                for (j, c) in poly.iter().enumerate() {
                    next[j + 1] += c;
                    next[j] -= &(c * &rat_int(r as i64));
                }
                poly = next;
                denom = denom * rat_int(s as i64 - r as i64);
            }
            poly.iter().map(|c| c / &denom).collect()
        })
        .collect()
}

/// `[t^j] θ^t(args)`. On `m + 1` arguments `θ^t` has degree at most `m + 1` in `t`,
/// so `m + 2` nodes determine it; the Vandermonde system is solved exactly.
pub fn t_coefficient(j: usize, args: &[FormalSymbol]) -> Result<Scalar> {
    let d = args.len();
    if j > d {
        return Ok(Scalar::zero());
    }
    let basis = lagrange_coefficients(d);
    let mut acc = Scalar::zero();
    for (s, l) in basis.iter().enumerate() {
        if l[j].is_zero() {
            continue;
        }
        let v = theta_eval(args, &Gr::from_int(s as i64))?;
        acc += &v.scale(&Gr::from_rational(l[j].clone()));
    }
    Ok(acc)
}

/// `[t^j] θ^t` restricted to `arity` arguments.
pub fn t_coefficient_cochain(j: usize, arity: usize) -> Cochain<SymMat> {
    Cochain::custom(arity - 1, &format!("[t^{j}]theta_{arity}"), move |a: &[SymMat]| t_coefficient(j, &scalars(a)?))
}

// ---------------------------------------------------------------- closedness

/// `(B ∓ b)`-closedness of an even inhomogeneous Hochschild cochain, per odd arity `r`:
/// `B c_{r+1} − b c_{r−1}` and `B c_{r+1} + b c_{r−1}` on `r`-tuples.
#[derive(Clone, Debug)]
pub struct ClosednessReport {
    pub name: String,
    /// Max over tuples and arities of `|Bc − bc|`.
    pub minus: f64,
    /// Max of `|Bc + bc|`.
    pub plus: f64,
    /// Max of `|Bc|` and `|bc|` separately, to exclude vacuous passes.
    pub scale: f64,
}

impl ClosednessReport {
    /// Which sign conventions hold within `tol`.
    pub fn holds(&self, tol: f64) -> (bool, bool) {
        (self.minus < tol, self.plus < tol)
    }
    pub fn to_json(&self) -> Value {
        json!({"name": self.name, "B_minus_b": self.minus, "B_plus_b": self.plus, "scale": self.scale})
    }
}

/// Checks every odd arity in `arities` using the components `part(arity)`.
pub fn closedness(
    name: &str,
    part: impl Fn(usize) -> Option<Cochain<SymMat>>,
    tuples: &[Vec<SymMat>],
    arities: &[usize],
) -> Result<ClosednessReport> {
    let mut rep = ClosednessReport { name: name.into(), minus: 0.0, plus: 0.0, scale: 0.0 };
    for &r in arities {
        if r % 2 == 0 {
            return Err(Error::Invalid("closedness is checked in odd arity".into()));
        }
        let upper = part(r + 1).map(|c| c.connes_b()).transpose()?;
        let lower = if r >= 2 { part(r - 1).map(|c| c.hochschild_b()) } else { None };
        for t in tuples {
            if t.len() < r {
                return Err(Error::Invalid(format!("sample tuples need {r} entries")));
            }
            let bu = upper.as_ref().map(|c| c.eval(&t[..r])).transpose()?.unwrap_or_else(Scalar::zero);
            let bl = lower.as_ref().map(|c| c.eval(&t[..r])).transpose()?.unwrap_or_else(Scalar::zero);
            rep.minus = rep.minus.max((&bu - &bl).abs_f64());
            rep.plus = rep.plus.max((&bu + &bl).abs_f64());
            rep.scale = rep.scale.max(bu.abs_f64()).max(bl.abs_f64());
        }
    }
    Ok(rep)
}

/// `(B ∓ b)θ` at `t = 1` in the odd arities `1, 3, …, 2·max_level + 1`.
pub fn theta_closedness(tuples: &[Vec<SymMat>], max_level: usize) -> Result<ClosednessReport> {
    let arities: Vec<usize> = (0..=max_level).map(|j| 2 * j + 1).collect();
    closedness("theta", |a| (a >= 2).then(|| theta_cochain(a, &Gr::one())), tuples, &arities)
}

/// `(B ∓ b)` of the `t^{2k}` coefficient `θ″_{2k} + θ′_{2k+2}` (arities `2k` and `2k+2`),
/// in the arities `2k − 1`, `2k + 1` and `2k + 3`.
pub fn t_coefficient_closedness(k: usize, tuples: &[Vec<SymMat>]) -> Result<ClosednessReport> {
    let j = 2 * k;
    let arities: Vec<usize> = [2 * k as i64 - 1, 2 * k as i64 + 1, 2 * k as i64 + 3]
        .into_iter()
        .filter(|&a| a >= 1)
        .map(|a| a as usize)
        .collect();
    let part = move |a: usize| ((a == 2 * k && k >= 1) || a == 2 * k + 2).then(|| t_coefficient_cochain(j, a));
    closedness(&format!("[t^{j}]theta"), part, tuples, &arities)
}

// ---------------------------------------------------------------- transgression cochains

/// `Ω = [F, ρ] + ε[log|ξ|′, ρ + F]`: arity 0 `εδF`, arity 1 `[F, a] + εδa`.
struct OmegaLetters {
    eps_df: FormSymbol,
    bare: FormSymbol,
    f2: FormSymbol,
}

impl OmegaLetters {
    /// `Ω^i(a₁…a_m)`: `m` arity-1 letters and `i − m ∈ {0, 1}` letters `εδF`.
    fn power(&self, i: usize, letters: &[FormSymbol], floor: i64) -> FormSymbol {
        let ctx = self.bare.ctx;
        let m = letters.len();
        let one = FormSymbol::from_symbol(FormalSymbol::one(ctx));
        if i < m || i > m + 1 {
            return FormSymbol::zero(ctx);
        }
        let mut w0 = one.clone();
        let mut w1 = self.eps_df.clone();
        for l in letters {
            w1 = w1.star_floor(l, floor).add(&w0.star_floor(l, floor).star_floor(&self.eps_df, floor));
            w0 = w0.star_floor(l, floor);
        }
        if i == m {
            w0
        } else {
            w1
        }
    }
}

/// `μ_k = τ(∂ρ · (e^{F²}/k!) Σ_{i=0}^{k} Ω^i F Ω^{k−i})`; the integrand has odd
/// total degree, so `μ_k(a₀…a_m) = −τ(a₀ · (…)(a₁…a_m))`. GAUSSIAN only.
pub fn mu_eval(k: usize, args: &[FormalSymbol]) -> Result<Scalar> {
    let Some(a0) = args.first() else {
        return Err(Error::Invalid("mu needs a₀".into()));
    };
    let ctx = a0.ctx;
    check_ctx(&ctx, args)?;
    let w = work(args);
    let floor = value_floor(&ctx);
    let bare = f_multiplier(ctx)?;
    let om =
        OmegaLetters { eps_df: delta_f(ctx).times_epsilon(), f2: bare.star(&bare).map(FormalSymbol::tightened), bare };
    let letters: Vec<FormSymbol> = w[1..]
        .iter()
        .map(|a| commutator_with_f(a).add(&FormSymbol::from_symbol(a.delta_floor(floor)).times_epsilon()))
        .collect();
    let m = letters.len();
    let mut sum = FormSymbol::zero(ctx);
    for i in 0..=k {
        for p in 0..=m {
            let left = om.power(i, &letters[..p], floor);
            if left.is_zero() {
                continue;
            }
            let right = om.power(k - i, &letters[p..], floor);
            if right.is_zero() {
                continue;
            }
            let term = left.star_floor(&om.bare, floor).star_floor(&right, floor);
            sum = sum.add_scaled(&term, &sign(p));
        }
    }
    let mut e = FormSymbol::from_symbol(FormalSymbol::one(ctx));
    let mut pow = e.clone();
    for j in 1..=ctx.n {
        pow = pow.star_floor(&om.f2, floor);
        e = e.add_scaled(&pow, &inv_fact(j));
    }
    let g = e.star_floor(&sum, floor).scale(&inv_fact(k));
    let v = residue_form_epsilon(&FormSymbol::from_symbol(w[0].clone()).star_floor(&g, floor))?;
    Ok(-v)
}

/// `μ_k` on `arity` arguments, as a Hochschild cochain.
pub fn mu(k: usize, arity: usize) -> Cochain<SymMat> {
    Cochain::custom(arity - 1, &format!("mu_{k}"), move |a: &[SymMat]| mu_eval(k, &scalars(a)?))
}

/// Coefficients `x` with `X = x₀μ_{2k} + x₁μ_{2k+1}` (arity `2k+1`) and
/// `Y = x₂μ_{2k+2} + x₃μ_{2k+3}` (arity `2k+3`) solving, in least squares over
/// the tuples, `BX = ψ_{2k−1}`, `bX + BY = φ_{2k+1} − ψ_{2k+1}` and `bY = −φ_{2k+3}`:
/// the components of `(ψ_{2k−1} + φ_{2k+1}) − (ψ_{2k+1} + φ_{2k+3}) = (B+b)(X + Y)`.
#[derive(Clone, Debug)]
pub struct MuCombination {
    pub k: usize,
    pub names: Vec<String>,
    pub coefficients: Vec<Complex64>,
    /// Max residual over all equations.
    pub residual: f64,
    /// Max modulus of the right-hand sides.
    pub scale: f64,
}

impl MuCombination {
    pub fn to_json(&self) -> Value {
        let coeffs: Vec<Value> = self
            .names
            .iter()
            .zip(&self.coefficients)
            .map(|(n, c)| json!({"cochain": n, "coefficient": [c.re, c.im]}))
            .collect();
        json!({"k": self.k, "coefficients": coeffs, "residual": self.residual, "scale": self.scale})
    }
}

/// Singular values below this fraction of the largest are treated as zero.
const SVD_RELATIVE_EPS: f64 = 1e-10;

pub fn discover_mu_combination(k: usize, tuples: &[Vec<SymMat>]) -> Result<MuCombination> {
    let Some(ctx) = tuples.first().and_then(|t| t.first()).map(|a| a.ctx) else {
        return Err(Error::Invalid("no sample tuples".into()));
    };
    if k + 1 > ctx.n {
        return Err(Error::Invalid(format!("mu combinations need k ≤ n − 1, got k = {k}")));
    }
    let xs = [mu(2 * k, 2 * k + 1), mu(2 * k + 1, 2 * k + 1)];
    let ys = [mu(2 * k + 2, 2 * k + 3), mu(2 * k + 3, 2 * k + 3)];
    let mut rows: Vec<[Complex64; 4]> = Vec::new();
    let mut rhs: Vec<Complex64> = Vec::new();
    let c = |s: Scalar| to_c64(&s);
    for t in tuples {
        if t.len() < 2 * k + 4 {
            return Err(Error::Invalid(format!("sample tuples need {} entries", 2 * k + 4)));
        }
        let s = |len: usize| &t[..len];
        if k >= 1 {
            let mut row = [Complex64::new(0.0, 0.0); 4];
            for (i, x) in xs.iter().enumerate() {
                row[i] = c(x.connes_b()?.eval(s(2 * k))?);
            }
            rows.push(row);
            rhs.push(c(psi_cocycle(k, s(2 * k))?));
        }
        let mut row = [Complex64::new(0.0, 0.0); 4];
        for (i, x) in xs.iter().enumerate() {
            row[i] = c(x.hochschild_b().eval(s(2 * k + 2))?);
        }
        for (i, y) in ys.iter().enumerate() {
            row[2 + i] = c(y.connes_b()?.eval(s(2 * k + 2))?);
        }
        rows.push(row);
        rhs.push(c(&phi_cocycle(k, s(2 * k + 2))? - &psi_cocycle(k + 1, s(2 * k + 2))?));
        let mut row = [Complex64::new(0.0, 0.0); 4];
        for (i, y) in ys.iter().enumerate() {
            row[2 + i] = c(y.hochschild_b().eval(s(2 * k + 4))?);
        }
        rows.push(row);
        rhs.push(c(-phi_cocycle(k + 1, s(2 * k + 4))?));
    }
    let a = DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs.clone());
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let x = svd
        .solve(&b, smax * SVD_RELATIVE_EPS)
        .map_err(|e| Error::Domain(format!("least-squares solve failed: {e}")))?;
    let res = &a * &x - &b;
    let residual = res.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let names = [2 * k, 2 * k + 1, 2 * k + 2, 2 * k + 3].iter().map(|j| format!("mu_{j}")).collect();
    Ok(MuCombination { k, names, coefficients: x.iter().copied().collect(), residual, scale })
}
