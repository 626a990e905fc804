//! Verification suites: each check evaluates one identity on seeded samples and
//! yields a record; a report collects the records with the sign conventions.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::{json, Value};

use crate::coefficient_backends::{Backend, MAX_DIM};
use crate::cyclic_index::*;
use crate::error::{Error, Result};
use crate::exact_scalars::{
    bf_mul, bf_pi, bf_sqrt, gamma_quarter, precision_bits, precision_digits, rat, set_precision_digits, BigFloatC, Gr,
    Period, Rational, Scalar,
};
use crate::form_calculus::{conventions, d_de_rham, f_multiplier, omega, Conventions};
use crate::quillen_engine::synthetic::{trace_lemma_sides, SynCochain};
use crate::quillen_engine::*;
use crate::rng::{random_coeff, random_order0, random_symbol, rng, Budget};
use crate::samples::{dense, dense_gaussian, dense_tuple, random_probe, tuples};
use crate::symbol_algebra::{delta_via_ad, multi_indices, FormalSymbol, HeisenbergContext, SymbolBackend};
use crate::wodzicki_residue::{quadrature_oracle, residue, sphere_monomial_integral};
use crate::zeta_laurent::*;
use astro_float::BigFloat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Scalars,
    Coeff,
    Symbols,
    Forms,
    Residue,
    Cyclic,
    Quillen,
    Series,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] = [
        Suite::Scalars,
        Suite::Coeff,
        Suite::Symbols,
        Suite::Forms,
        Suite::Residue,
        Suite::Cyclic,
        Suite::Quillen,
        Suite::Series,
    ];
    pub fn name(self) -> &'static str {
        match self {
            Suite::Scalars => "scalars",
            Suite::Coeff => "coeff",
            Suite::Symbols => "symbols",
            Suite::Forms => "forms",
            Suite::Residue => "residue",
            Suite::Cyclic => "cyclic",
            Suite::Quillen => "quillen",
            Suite::Series => "series",
            Suite::All => "all",
        }
    }
    pub fn parse(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown suite '{s}'")))
    }
    fn expand(self) -> Vec<Suite> {
        if self == Suite::All {
            Suite::EACH.to_vec()
        } else {
            vec![self]
        }
    }
}

pub const DEFAULT_PRECISION: u32 = 50;

/// Validated settings of a verification run. `backend` and `cutoff` default by
/// `n`: TWO_SHEET at `n = 1`, TORUS at `n = 2`, and `−ν − 4`.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub suite: Suite,
    pub n: usize,
    pub p: usize,
    pub backend: Option<SymbolBackend>,
    pub precision: u32,
    pub cutoff: Option<i64>,
    pub seed: u64,
    pub zorder: usize,
    pub xorder: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            n: 1,
            p: 1,
            backend: None,
            precision: DEFAULT_PRECISION,
            cutoff: None,
            seed: 0,
            zorder: 8,
            xorder: 12,
        }
    }
}

impl VerifyConfig {
    pub fn backend(&self) -> SymbolBackend {
        self.backend.unwrap_or(if self.n == 1 { SymbolBackend::TwoSheet } else { SymbolBackend::Torus })
    }
    pub fn ctx(&self) -> Result<HeisenbergContext> {
        HeisenbergContext::new(self.n, self.p, self.backend())
    }
    pub fn cutoff(&self) -> i64 {
        let nu = (self.p + 2 * (self.n - self.p)) as i64;
        self.cutoff.unwrap_or(-nu - 4)
    }
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n) {
            return Err(Error::Invalid(format!("--n must be 1 or 2, got {}", self.n)));
        }
        let ctx = self.ctx()?;
        if !(30..=300).contains(&self.precision) {
            return Err(Error::Invalid(format!("--precision must lie in 30..=300, got {}", self.precision)));
        }
        let (c, nu) = (self.cutoff(), ctx.nu());
        if c > -nu - 1 || c < -nu - 12 {
            return Err(Error::Invalid(format!("--cutoff must lie in [{}, {}], got {c}", -nu - 12, -nu - 1)));
        }
        if !(1..=16).contains(&self.zorder) || !(1..=24).contains(&self.xorder) {
            return Err(Error::Invalid("--zorder must lie in 1..=16 and --xorder in 1..=24".into()));
        }
        Ok(())
    }
    pub fn to_json(&self) -> Value {
        json!({
            "suite": self.suite.name(),
            "n": self.n,
            "p": self.p,
            "backend": self.backend().name(),
            "precision": self.precision,
            "cutoff": self.cutoff(),
            "seed": self.seed,
            "zorder": self.zorder,
            "xorder": self.xorder,
        })
    }
    /// Tolerance for float agreements, twenty digits above working precision.
    fn float_tol(&self) -> f64 {
        10f64.powi(-(self.precision as i32 - 20))
    }
}

/// Result of one check.
#[derive(Clone, Debug)]
pub struct CheckRecord {
    pub name: String,
    pub identity: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub exact: bool,
    pub pass: bool,
    pub error: Option<String>,
    pub detail: Value,
    /// Kept out of the JSON so reports are reproducible.
    pub runtime: Duration,
}

/// Fixed-precision rendering, so reports are byte-stable.
pub fn fmt_dev(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.3e}")
    }
}

impl CheckRecord {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "name": self.name,
            "identity": self.identity,
            "exact": self.exact,
            "deviation": fmt_dev(self.deviation),
            "pass": self.pass,
        });
        if !self.exact {
            v["tolerance"] = json!(fmt_dev(self.tolerance));
        }
        if let Some(e) = &self.error {
            v["error"] = json!(e);
        }
        if !self.detail.is_null() {
            v["detail"] = self.detail.clone();
        }
        v
    }
}

/// Max modulus over evaluated scalars, remembering whether all were exact.
struct Tally {
    exact: bool,
    max: f64,
    nonzero_exact: bool,
}

impl Tally {
    fn new() -> Self {
        Self { exact: true, max: 0.0, nonzero_exact: false }
    }
    fn add(&mut self, s: &Scalar) {
        if s.is_exact() {
            if !s.is_exact_zero() {
                self.nonzero_exact = true;
                self.max = self.max.max(s.abs_f64().max(f64::MIN_POSITIVE));
            }
        } else {
            self.exact = false;
            self.max = self.max.max(s.abs_f64());
        }
    }
    fn add_f64(&mut self, x: f64) {
        self.exact = false;
        self.max = self.max.max(x);
    }
}

struct Outcome {
    deviation: f64,
    tolerance: f64,
    exact: bool,
    pass: bool,
    detail: Value,
}

impl Outcome {
    fn tally(t: Tally, tol: f64, detail: Value) -> Self {
        let pass = if t.exact { !t.nonzero_exact } else { !t.nonzero_exact && t.max < tol };
        Outcome { deviation: t.max, tolerance: tol, exact: t.exact, pass, detail }
    }
    fn exact(ok: bool, detail: Value) -> Self {
        Outcome { deviation: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, exact: true, pass: ok, detail }
    }
    fn within(dev: f64, tol: f64, detail: Value) -> Self {
        Outcome { deviation: dev, tolerance: tol, exact: false, pass: dev < tol, detail }
    }
    fn with_pass(mut self, extra: bool) -> Self {
        self.pass &= extra;
        self
    }
}

fn check(out: &mut Vec<CheckRecord>, name: &str, identity: &str, f: impl FnOnce() -> Result<Outcome>) {
    let start = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f));
    let runtime = start.elapsed();
    let base = CheckRecord {
        name: name.into(),
        identity: identity.into(),
        deviation: 0.0,
        tolerance: 0.0,
        exact: false,
        pass: false,
        error: None,
        detail: Value::Null,
        runtime,
    };
    out.push(match res {
        Ok(Ok(o)) => CheckRecord {
            deviation: o.deviation,
            tolerance: o.tolerance,
            exact: o.exact,
            pass: o.pass,
            detail: o.detail,
            ..base
        },
        Ok(Err(e)) => CheckRecord { error: Some(e.to_string()), ..base },
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            CheckRecord { error: Some(format!("panic: {msg}")), ..base }
        }
    });
}

#[derive(Clone, Debug)]
pub struct Report {
    pub config: Value,
    pub records: Vec<CheckRecord>,
    pub conventions: Value,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }
    pub fn has_error(&self) -> bool {
        self.records.iter().any(|r| r.error.is_some())
    }
    /// 0 all pass, 1 some check failed, 3 some check could not run.
    pub fn exit_code(&self) -> i32 {
        if self.has_error() {
            3
        } else if self.all_pass() {
            0
        } else {
            1
        }
    }
    pub fn to_json(&self) -> Value {
        let failed: Vec<&str> = self.records.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
        json!({
            "config": self.config,
            "conventions": self.conventions,
            "checks": self.records.iter().map(CheckRecord::to_json).collect::<Vec<_>>(),
            "summary": {
                "total": self.records.len(),
                "passed": self.records.len() - failed.len(),
                "failed": failed,
                "all_pass": failed.is_empty(),
            },
        })
    }
}

fn gr_pair(g: &Gr) -> Value {
    let b = g.to_bigfloat();
    json!([fmt_dev(b.re_f64()), fmt_dev(b.im_f64())])
}

/// The sign constants with the relations between them and the choices made
/// for pairing order, top-degree prefactor and the δ and θ signs.
pub fn conventions_report() -> Result<Value> {
    let c: &Conventions = conventions();
    let modulus_one = (&c.c * &c.c.conj()) == Gr::one();
    let relation = if c.c_prime == c.c_dprime {
        "c' = c''"
    } else if c.c_prime == -c.c_dprime.clone() {
        "c' = -c''"
    } else {
        "unrelated"
    };
    let prefactor = |ctx| resolved_top_prefactor(ctx).map(|v| v.map_or("none", TopPrefactor::name));
    Ok(json!({
        "c": {"value": crate::json::gr_to_json(&c.c), "defined_by": "F * F = c omega"},
        "c_prime": {"value": crate::json::gr_to_json(&c.c_prime), "defined_by": "[F, a] = c' T(da), T flips dx"},
        "c_double_prime": {"value": crate::json::gr_to_json(&c.c_dprime), "defined_by": "delta F = c'' sum d_xi_i(log s) dxi_i"},
        "c_modulus_is_one": modulus_one,
        "c_prime_vs_c_double_prime": relation,
        "berezin_orientation": {
            "convention": "omega^n/n! = o dx_1..dx_n dxi_1..dxi_n",
            "n=1": Conventions::berezin_orientation(1),
            "n=2": Conventions::berezin_orientation(2),
        },
        "pairing_order": "Ind(u) = radul(u, u^-1)",
        "top_prefactor": {
            "two_sheet": prefactor(HeisenbergContext::two_sheet())?,
            "gaussian_n2": prefactor(HeisenbergContext::gaussian(2, 1))?,
        },
        "delta_via_ad_sign": -1,
        "theta_sign": "theta(t=1) = -(theta' + theta'')",
        "closedness": "(B - b) theta = 0",
        "log_power_sign": "composition sum = (-1)^q log(1+X)^q",
    }))
}

/// Runs the selected suites; records are sorted by name.
pub fn run_verify(cfg: &VerifyConfig) -> Result<Report> {
    cfg.validate()?;
    set_precision_digits(cfg.precision);
    let mut records = Vec::new();
    for s in cfg.suite.expand() {
        let out = &mut records;
        match s {
            Suite::Scalars => scalars(cfg, out),
            Suite::Coeff => coeff(cfg, out),
            Suite::Symbols => symbols(cfg, out),
            Suite::Forms => forms(cfg, out),
            Suite::Residue => residues(cfg, out),
            Suite::Cyclic => cyclic(cfg, out),
            Suite::Quillen => quillen(cfg, out),
            Suite::Series => series(cfg, out),
            Suite::All => unreachable!(),
        }
    }
    records.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(Report { config: cfg.to_json(), records, conventions: conventions_report()? })
}

fn rel_dev(a: &BigFloatC, b: &BigFloatC) -> f64 {
    (a - b).abs_f64() / b.abs_f64()
}

fn scalars(cfg: &VerifyConfig, out: &mut Vec<CheckRecord>) {
    let d = precision_digits();
    let tol = cfg.float_tol();
    check(out, "scalars.gamma_half_squared", "Gamma(1/2)^2 = pi", || {
        let g = gamma_quarter(&rat(1, 2), d)?;
        Ok(Outcome::within(rel_dev(&(&g * &g), &BigFloatC::from_real(bf_pi())), tol, Value::Null))
    });
    check(out, "scalars.gamma_reflection", "Gamma(1/4) Gamma(3/4) = pi sqrt 2", || {
        let g = &gamma_quarter(&rat(1, 4), d)? * &gamma_quarter(&rat(3, 4), d)?;
        let want = BigFloatC::from_real(bf_mul(&bf_pi(), &bf_sqrt(&BigFloat::from_u32(2, precision_bits()))));
        Ok(Outcome::within(rel_dev(&g, &want), tol, Value::Null))
    });
    check(out, "scalars.gamma_duplication", "Gamma(1/4) Gamma(3/4) = sqrt 2 sqrt pi Gamma(1/2)", || {
        let lhs = &gamma_quarter(&rat(1, 4), d)? * &gamma_quarter(&rat(3, 4), d)?;
        let p = precision_bits();
        let root = BigFloatC::from_real(bf_sqrt(&bf_mul(&BigFloat::from_u32(2, p), &bf_pi())));
        Ok(Outcome::within(rel_dev(&lhs, &(&root * &gamma_quarter(&rat(1, 2), d)?)), tol, Value::Null))
    });
    check(out, "scalars.period_gamma_numeric", "exact period Gamma(m/4) matches its numeric value", || {
        let mut t = Tally::new();
        for m in 1..=7 {
            t.add_f64(rel_dev(&Period::gamma_quarter(m)?.to_bigfloat(), &gamma_quarter(&rat(m, 4), d)?));
        }
        Ok(Outcome::tally(t, tol, Value::Null))
    });
}

fn coeff(cfg: &VerifyConfig, out: &mut Vec<CheckRecord>) {
    let Ok(ctx) = cfg.ctx() else { return };
    let seed = cfg.seed;
    let tol = cfg.float_tol();
    check(out, "coeff.integral_of_derivative", "integral of d_i f vanishes", || {
        let mut r = rng(seed ^ 0xC0);
        let mut t = Tally::new();
        for _ in 0..20 {
            let f = random_coeff(&ctx, &Budget::default(), &mut r);
            for i in 0..ctx.n {
                t.add(&f.derivative(i).integrate()?);
            }
        }
        Ok(Outcome::tally(t, tol, json!({"backend": ctx.coeff_backend().name(), "samples": 20})))
    });
    check(out, "coeff.leibniz", "d_i(fg) = d_i(f) g + f d_i(g)", || {
        let mut r = rng(seed ^ 0xC1);
        let mut ok = true;
        for _ in 0..20 {
            let f = random_coeff(&ctx, &Budget::default(), &mut r);
            let g = random_coeff(&ctx, &Budget::default(), &mut r);
            for i in 0..ctx.n {
                ok &= f.mul(&g).derivative(i) == f.derivative(i).mul(&g).add(&f.mul(&g.derivative(i)));
            }
        }
        Ok(Outcome::exact(ok, Value::Null))
    });
    if ctx.coeff_backend() == Backend::Gaussian {
        check(out, "coeff.gaussian_normalization", "normalized integral of 1 is 1", || {
            let one = crate::coefficient_backends::CoeffFunction::gaussian(ctx.n, &[0; MAX_DIM][..ctx.n], 1, Gr::one());
            let mut t = Tally::new();
            t.add(&(&one.normalized_integral()? - &Scalar::from_int(1)));
            Ok(Outcome::tally(t, tol, Value::Null))
        });
    }
}

fn sym_window_eq(a: &FormalSymbol, b: &FormalSymbol, sign: &Gr, hi: i64) -> Result<bool> {
    let lo = a.cutoff.max(b.cutoff);
    for d in lo..=hi {
        if a.component(d)? != b.component(d)?.scale(sign) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn symbols(cfg: &VerifyConfig, out: &mut Vec<CheckRecord>) {
    let Ok(ctx) = cfg.ctx() else { return };
    let (seed, cutoff) = (cfg.seed, cfg.cutoff());
    check(out, "symbols.star_associativity", "(a * b) * c = a * (b * c)", || {
        let mut r = rng(seed ^ 0x51);
        let mut ok = true;
        for _ in 0..5 {
            let [x, y, z] = [(); 3].map(|_| random_symbol(&ctx, 0, cutoff, &Budget::small(), &mut r));
            ok &= sym_window_eq(&x.star(&y).star(&z), &x.star(&y.star(&z)), &Gr::one(), 0)?;
        }
        Ok(Outcome::exact(ok, json!({"samples": 5})))
    });
    check(out, "symbols.delta_is_derivation", "delta(a * b) = delta(a) * b + a * delta(b)", || {
        let mut r = rng(seed ^ 0x52);
        let mut ok = true;
        for _ in 0..5 {
            let x = random_symbol(&ctx, 0, cutoff, &Budget::small(), &mut r);
            let y = random_symbol(&ctx, 0, cutoff, &Budget::small(), &mut r);
            let rhs = x.delta().star(&y).add(&x.star(&y.delta()));
            ok &= sym_window_eq(&x.star(&y).delta(), &rhs, &Gr::one(), -1)?;
        }
        Ok(Outcome::exact(ok, json!({"samples": 5})))
    });
    check(
        out,
        "symbols.delta_matches_log_commutator",
        "delta a agrees with the ad-series of log Delta^(1/4) up to one global sign, depth 4",
        || {
            let mut r = rng(seed ^ 0x53);
            let mut signs = std::collections::BTreeSet::new();
            let mut ok = true;
            for _ in 0..20 {
                let a = random_symbol(&ctx, 0, cutoff.min(-6), &Budget::default(), &mut r);
                let direct = a.delta().truncate(-4);
                let via = delta_via_ad(&a, 4);
                let lo = direct.cutoff.max(via.cutoff);
                // The sign is read off the first nonzero component and must hold throughout.
                let Some(d0) = (lo..=-1).find(|&d| !via.component(d).map(|c| c.is_zero()).unwrap_or(true)) else {
                    continue;
                };
                let sign = if direct.component(d0)? == via.component(d0)? { 1 } else { -1 };
                signs.insert(sign);
                ok &= sym_window_eq(&direct, &via, &Gr::from_int(sign), -1)?;
            }
            let signs: Vec<i64> = signs.into_iter().collect();
            Ok(Outcome::exact(ok && signs.len() == 1, json!({"samples": 20, "global_sign": signs})))
        },
    );
}

fn forms(cfg: &VerifyConfig, out: &mut Vec<CheckRecord>) {
    let Ok(ctx) = cfg.ctx() else { return };
    let seed = cfg.seed;
    check(out, "forms.c_unit_modulus", "|c| = 1 for F * F = c omega", || {
        let c = &conventions().c;
        Ok(Outcome::exact(c * &c.conj() == Gr::one(), json!({"c": gr_pair(c)})))
    });
    check(out, "forms.c_prime_relation", "c' = -c''", || {
        let c = conventions();
        Ok(Outcome::exact(
            c.c_prime == -c.c_dprime.clone(),
            json!({"c_prime": gr_pair(&c.c_prime), "c_double_prime": gr_pair(&c.c_dprime)}),
        ))
    });
    check(out, "forms.f_squared_is_c_omega", "F * F = c omega at n = 2", || {
        let g = HeisenbergContext::gaussian(2, 1);
        let f = f_multiplier(g)?;
        Ok(Outcome::exact(f.star(&f).agrees_with(&omega(g).scale(&conventions().c)), Value::Null))
    });
    check(out, "forms.d_squared", "d(d a) = 0", || {
        let mut r = rng(seed ^ 0xF0);
        let mut ok = true;
        for _ in 0..5 {
            let a = random_symbol(&ctx, 0, -ctx.nu() - 2, &Budget::small(), &mut r);
            ok &= d_de_rham(&a).d().is_zero();
        }
        Ok(Outcome::exact(ok, Value::Null))
    });
}

fn residues(cfg: &VerifyConfig, out: &mut Vec<CheckRecord>) {
    let Ok(ctx) = cfg.ctx() else { return };
    let (seed, tol) = (cfg.seed, cfg.float_tol());
    check(out, "residue.trace_property", "residue of [a, b] vanishes, 100 pairs", || {
        let mut r = rng(seed ^ 0xE1);
        let mut t = Tally::new();
        for _ in 0..100 {
            let a = random_symbol(&ctx, 0, -ctx.nu() - 2, &Budget::small(), &mut r);
            let b = random_symbol(&ctx, 0, -ctx.nu() - 2, &Budget::small(), &mut r);
            t.add(&residue(&a.commutator(&b))?);
        }
        Ok(Outcome::tally(t, tol, json!({"backend": ctx.backend.name(), "samples": 100})))
    });
    check(
        out,
        "residue.sphere_integral_oracle",
        "closed-form sphere integrals match quadrature, 20 even indices",
        || {
            let qctx = HeisenbergContext::torus(ctx.n, ctx.p);
            let evens: Vec<_> =
                multi_indices(&qctx, 64).into_iter().filter(|a| a.iter().all(|v| v % 2 == 0)).take(20).collect();
            let mut worst = 0f64;
            for a in &evens {
                let exact = sphere_monomial_integral(&qctx, a);
                let (est, _) = quadrature_oracle(&qctx, a, 4096)?;
                worst = worst.max(rel_dev(&est, &exact));
            }
            Ok(Outcome::within(worst, 1e-8, json!({"indices": evens.len()})).with_pass(evens.len() == 20))
        },
    );
}

fn max_dev(vals: impl IntoIterator<Item = Scalar>) -> Tally {
    let mut t = Tally::new();
    for v in vals {
        t.add(&v);
    }
    t
}

fn cyclic(cfg: &VerifyConfig, out: &mut Vec<CheckRecord>) {
    let (n, p, seed, tol) = (cfg.n, cfg.p, cfg.seed, cfg.float_tol());
    if n == 1 {
        check(out, "cyclic.toeplitz_index", "Radul and top-degree indices of the Toeplitz symbols equal -k", || {
            let mut t = Tally::new();
            let mut vals = Vec::new();
            for k in 1..=3 {
                let kc = toeplitz_kclass(k)?;
                let (r, top) = (index_radul(&kc)?, index_top_degree(&kc)?);
                t.add(&(&r - &Scalar::from_int(-k as i64)));
                t.add(&(&top - &Scalar::from_int(-k as i64)));
                vals.push(json!({"k": k, "radul": fmt_dev(r.re_f64()), "top": fmt_dev(top.re_f64())}));
            }
            Ok(Outcome::tally(t, 1e-10, json!(vals)))
        });
    }
    check(out, "cyclic.bicomplex", "b b = 0, B B = 0, B b + b B = 0 on 50 probe cases", || {
        let ctx = HeisenbergContext::two_sheet();
        let mut r = rng(seed ^ 0xB0);
        let mut t = Tally::new();
        for case in 0..50 {
            let k = 1 + case % 2;
            let f = random_probe(&ctx, k, &mut r);
            let args = dense_tuple(k + 3, &mut r);
            t.add(&f.hochschild_b().hochschild_b().eval(&args)?);
            let g = random_probe(&ctx, k + 1, &mut r);
            let bb = g.connes_b()?.hochschild_b().add(&g.hochschild_b().connes_b()?)?;
            t.add(&bb.eval(&args[..k + 2])?);
            t.add(&g.connes_b()?.connes_b()?.eval(&args[..k])?);
        }
        Ok(Outcome::tally(t, tol, Value::Null))
    });
    let gctx = HeisenbergContext::gaussian(n, p.max(1).min(n));
    let ctx = cfg.ctx();
    check(out, "cyclic.top_phi_vanishes", "phi_(2n+1) vanishes on order-0 tuples, 20 tuples", || {
        let ctx = ctx.clone()?;
        let ts = tuples(&ctx, 20, 2 * n + 2, &Budget::default(), seed ^ 0xB1);
        let t = max_dev(ts.iter().map(|a| phi(n).eval(a)).collect::<Result<Vec<_>>>()?);
        Ok(Outcome::tally(t, 1e-10, json!({"backend": ctx.backend.name()})))
    });
    check(
        out,
        "cyclic.psi_top_degree",
        "psi_(2n-1) equals the prefactored top-degree sphere integral, 10 tuples",
        || {
            let ctx = ctx.clone()?;
            let rep = resolve_top_prefactor(&top_degree_samples(ctx, 10, seed ^ 0xB2)?)?;
            let best = rep
                .matched
                .first()
                .and_then(|m| rep.deviations.iter().find(|(v, _)| v == m))
                .map_or(f64::INFINITY, |d| d.1);
            let detail = json!({
                "matched": rep.matched.iter().map(|v| v.name()).collect::<Vec<_>>(),
                "deviations": rep.deviations.iter().map(|(v, d)| json!({"variant": v.name(), "deviation": fmt_dev(*d)})).collect::<Vec<_>>(),
            });
            Ok(Outcome::within(best, 1e-8, detail))
        },
    );
    for k in 0..n {
        check(
            out,
            &format!("cyclic.transgression_k{k}"),
            "(b + B) gamma relates the phi and psi families, 10 tuples",
            || {
                let ts = tuples(&gctx, 10, 2 * k + 4, &Budget::rich(), seed ^ (0xB3 + k as u64));
                let rep = check_transgression(k, &ts)?;
                let detail = json!({"low": fmt_dev(rep.low), "middle": fmt_dev(rep.middle), "high": fmt_dev(rep.high)});
                Ok(Outcome::within(rep.max_deviation(), 1e-8, detail))
            },
        );
    }
    check(out, "cyclic.cohomologous_pairing", "Radul and {psi, phi} pair equally with the K-class fixtures", || {
        let mut worst = 0f64;
        let mut vals = Vec::new();
        for kc in fixtures()?.into_iter().filter(|k| k.ctx.n == n) {
            let a = k_pairing(&[radul()], &kc)?;
            let b = k_pairing(&[psi(n), phi(n)], &kc)?;
            worst = worst.max((&a - &b).abs_f64());
            vals.push(json!({"fixture": kc.name, "radul": fmt_dev(a.re_f64()), "psi_phi": fmt_dev(b.re_f64())}));
        }
        Ok(Outcome::within(worst, 1e-6, json!(vals)))
    });
}

fn quillen(cfg: &VerifyConfig, out: &mut Vec<CheckRecord>) {
    let (n, seed) = (cfg.n, cfg.seed);
    let ctx = HeisenbergContext::gaussian(n, cfg.p.max(1).min(n));
    let sym = move |len: usize, s: u64| -> Vec<FormalSymbol> {
        let mut r = rng(s);
        (0..len).map(|_| random_order0(&ctx, &dense_gaussian(), &mut r).truncate(-ctx.nu() - 3)).collect()
    };
    check(out, "quillen.trace_lemma", "the graded trace identity on 50 synthetic-algebra cases", || {
        let mut r = rng(seed ^ 0xA0);
        let (mut ok, mut nonzero) = (true, 0);
        for _ in 0..50 {
            let (p, q) = (r.gen_range(0..=2), r.gen_range(1..=2));
            let df = r.gen_range(0..=2);
            let f = SynCochain::random(p, df, 2, &mut r);
            let g = SynCochain::random(q, 2 - df, 2, &mut r);
            let t: Vec<usize> = (0..p + q).map(|_| r.gen_range(0..2)).collect();
            let (lhs, rhs) = trace_lemma_sides(&f, &g, &t);
            ok &= lhs == rhs;
            nonzero += usize::from(lhs != Rational::from(0));
        }
        Ok(Outcome::exact(ok, json!({"cases": 50, "nonzero": nonzero})))
    });
    let half = Gr::from_ratio(1, 2);
    check(out, "quillen.bianchi", "curvature K and e^K are horizontal, tensors of length <= 4", || {
        let t = sym(4, seed ^ 0xA1);
        let mut t_k = Tally::new();
        let mut per = Vec::new();
        for len in 0..=4 {
            let k = form_deviation(&bianchi_check(&t[..len], ctx, &half)?);
            t_k.add_f64(k);
            let e = if n == 1 || len <= 2 {
                Some(form_deviation(&bianchi_exp_check(&t[..len], ctx, &half)?))
            } else {
                None
            };
            if let Some(e) = e {
                t_k.add_f64(e);
            }
            per.push(json!({"length": len, "K": fmt_dev(k), "exp_K": e.map(fmt_dev)}));
        }
        Ok(Outcome::tally(t_k, 1e-8, json!(per)))
    });
    check(out, "quillen.theta_constants", "theta components are fixed multiples of phi and psi", || {
        let ts: Vec<_> = (0..3).map(|s| sym(2, seed ^ (0xA2 + s))).collect();
        let (pr, se) = theta_constants(1, &ts)?;
        let dev = pr.deviation_from_expected().max(se.deviation_from_expected()).max(pr.spread).max(se.spread);
        let enough = pr.samples >= 2 && se.samples >= 2;
        Ok(Outcome::within(dev, 1e-8, json!({"theta_prime": pr.to_json(), "theta_second": se.to_json()}))
            .with_pass(enough))
    });
    let mats = |t: Vec<FormalSymbol>| -> Vec<SymMat> { t.into_iter().map(SymMat::scalar).collect() };
    if n == 1 {
        check(out, "quillen.theta_vanishes_at_n1", "theta vanishes identically at n = 1", || {
            let mut t = Tally::new();
            for len in [2, 4] {
                t.add(&theta_eval(&sym(len, seed ^ 0xA3), &Gr::one())?);
            }
            Ok(Outcome::tally(t, 1e-30, Value::Null))
        });
        return;
    }
    check(out, "quillen.theta_closedness", "(B - b) theta = 0", || {
        let ts: Vec<_> = (0..2).map(|s| mats(sym(5, seed ^ (0xA4 + s)))).collect();
        let rep = theta_closedness(&ts, 2)?;
        Ok(Outcome::within(rep.minus, 1e-8, rep.to_json()).with_pass(rep.scale > 1e-4))
    });
    check(out, "quillen.t_squared_closedness", "(B - b) of the t^2 coefficient of theta vanishes", || {
        let rep = t_coefficient_closedness(1, &[mats(sym(5, seed ^ 0xA6))])?;
        Ok(Outcome::within(rep.minus, 1e-8, rep.to_json()).with_pass(rep.scale > 1e-4))
    });
    check(out, "quillen.mu_combination", "least-squares transgression by the mu family at k = 0", || {
        let ts: Vec<_> = (0..2).map(|s| mats(sym(4, seed ^ (0xA7 + s)))).collect();
        let rep = discover_mu_combination(0, &ts)?;
        Ok(Outcome::within(rep.residual, 1e-10, rep.to_json()).with_pass(rep.scale > 1e-4))
    });
}

fn series(cfg: &VerifyConfig, out: &mut Vec<CheckRecord>) {
    let (z, x, seed) = (cfg.zorder, cfg.xorder, cfg.seed);
    check(out, "series.binomial_exponential_log", "binomial, exponential and log-power forms agree", || {
        let mut ok = true;
        let mut reps = Vec::new();
        for r in [rat(1, 1), rat(4, 1), rat(3, 2), rat(-2, 5)] {
            let rep = cm_identity_check(&r, z, x)?;
            ok &= rep.holds();
            reps.push(
                json!({"r": r.to_string(), "holds": rep.holds(), "displayed_sign_negated": rep.displayed_is_negated}),
            );
        }
        Ok(Outcome::exact(ok, json!({"zorder": z, "xorder": x, "cases": reps})))
    });
    check(out, "series.log_power_sign", "composition sums equal (-1)^q log(1+X)^q", || {
        let mut ok = true;
        let mut signs = Vec::new();
        for q in 1..=8 {
            let rep = log_power_coefficients(q, x);
            let want = if q % 2 == 0 { 1 } else { -1 };
            ok &= rep.relative_sign == Some(want);
            signs.push(json!({"q": q, "relative_sign": rep.relative_sign}));
        }
        Ok(Outcome::exact(ok, json!({"displayed_sign": "(-1)^(q-1), negated", "signs": signs})))
    });
    // Exact backends only, so every record here is an exact equality.
    let ctx = if cfg.n == 1 { HeisenbergContext::two_sheet() } else { HeisenbergContext::torus(2, cfg.p) };
    check(
        out,
        "series.generalized_radul",
        "the higher-pole Radul form reduces to Radul on simple-pole germs, p = 1, 2, 3",
        || {
            let mut r = rng(seed ^ 0x5E);
            let mut t = Tally::new();
            let mut nonzero = 0;
            for _ in 0..20 {
                let a0 = random_order0(&ctx, &dense(), &mut r).truncate(-ctx.nu() - 3);
                let a1 = random_order0(&ctx, &dense(), &mut r).truncate(-ctx.nu() - 3);
                let rad = radul_cocycle(&[SymMat::scalar(a0.clone()), SymMat::scalar(a1.clone())])?;
                nonzero += usize::from(!rad.is_exact_zero());
                for p in 1..=3 {
                    t.add(&(&generalized_radul(&a0, &a1, p, &HeisenbergGerms)? - &rad));
                }
            }
            Ok(Outcome::tally(t, 1e-10, json!({"pairs": 20, "nonzero_radul": nonzero})).with_pass(nonzero > 0))
        },
    );
    check(out, "series.cm_linear_term", "z-linear part of the operator expansion is -4 delta Q", || {
        let mut r = rng(seed ^ 0x5F);
        let mut ok = true;
        for _ in 0..3 {
            let q = random_symbol(&ctx, 0, -6, &Budget::default(), &mut r);
            let lin = cm_z_coefficient(&cm_operator_expansion(&q, 4)?, 1)
                .ok_or_else(|| Error::Invalid("empty expansion".into()))?;
            let direct = q.delta().truncate(-4).scale(&Gr::from_int(-4));
            ok &= sym_window_eq(&lin, &direct, &Gr::one(), 0)?;
        }
        Ok(Outcome::exact(ok, Value::Null))
    });
}

/// The K-theory index computations for one class.
pub fn index_report(kc: &KClass, radul_method: bool, top_method: bool) -> Result<Value> {
    let mut v = json!({"name": kc.name, "n": kc.ctx.n, "backend": kc.ctx.backend.name()});
    let mut vals = Vec::new();
    for (on, key, f) in
        [(radul_method, "radul", index_radul as fn(&KClass) -> Result<Scalar>), (top_method, "top", index_top_degree)]
    {
        if on {
            let s = f(kc)?;
            let (re, im, dist) = s.to_bigfloat().nearest_integer();
            v[key] = json!({
                "value": [fmt_dev(s.re_f64()), fmt_dev(s.im_f64())],
                "exact": s.is_exact(),
                "nearest_integer": re,
                "rounding_distance": fmt_dev(dist),
            });
            let _ = im;
            vals.push(s);
        }
    }
    if let [a, b] = &vals[..] {
        let d = a - b;
        v["agree"] = json!(if d.is_exact() { d.is_exact_zero() } else { d.abs_f64() < 1e-6 });
    }
    Ok(v)
}

/// Residue of a symbol with the degree `−ν` component it was read from.
pub fn residue_report(a: &FormalSymbol) -> Result<Value> {
    let d = -a.ctx.nu();
    let comp = a.component(d)?;
    let v = residue(a)?;
    Ok(json!({
        "residue": crate::json::scalar_to_json(&v),
        "degree": d,
        "component": FormalSymbol::homogeneous(a.ctx, d, comp).to_json(),
    }))
}

/// Higher residue `⨍^p` read from a germ.
pub fn germ_report(g: &LaurentGerm, p: usize) -> Value {
    json!({"order": p, "value": crate::json::scalar_to_json(&g.higher_residue(p))})
}
