//! The residue trace `⨍ a = (2π)^{−n} ∫_x ∫_{|ξ|′=1} a_{−ν} ι_L(dξ)` on formal
//! symbols and form symbols, the cosphere integral of pointwise forms, and a
//! quadrature oracle for the sphere weights.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use crate::coefficient_backends::MAX_DIM;
use crate::error::{Error, Result};
use crate::exact_scalars::{BigFloatC, Gr, Period, Scalar};
use crate::form_calculus::{
    berezin_top, berezin_top_epsilon, dx_bit, dxi_bit, volume_mask, wedge_sign, Conventions, FormSymbol, Mask,
};
use crate::symbol_algebra::{log_derivative, Component, FormalSymbol, HeisenbergContext, XiMono};

thread_local! {
    static W_MEMO: RefCell<HashMap<(usize, usize, [u16; MAX_DIM]), Period>> = RefCell::new(HashMap::new());
}

/// `W(α) = ∫_{|ξ|′=1} ξ^α ι_L(dξ₁…dξₙ)
///       = 4 Π_{i≤p} I₄(α_i) Π_{j>p} I₂(α_j) / Γ((⟨α⟩+ν)/4)`
/// with `I₄(a) = Γ((a+1)/4)/2`, `I₂(a) = Γ((a+1)/2)` for even `a`, zero otherwise.
pub fn sphere_weight(ctx: &HeisenbergContext, alpha: &[u16; MAX_DIM]) -> Period {
    let key = (ctx.n, ctx.p, *alpha);
    if let Some(v) = W_MEMO.with(|m| m.borrow().get(&key).cloned()) {
        return v;
    }
    let v = if alpha[..ctx.n].iter().any(|a| a % 2 == 1) {
        Period::zero()
    } else {
        let mut acc = Period::rational(Gr::from_int(4));
        let mut weighted = 0i64;
        for i in 0..ctx.n {
            let a = alpha[i] as i64;
            let f = if i < ctx.p {
                Period::gamma_quarter(a + 1).unwrap().scale(&Gr::from_ratio(1, 2))
            } else {
                Period::gamma_quarter(2 * (a + 1)).unwrap()
            };
            acc = &acc * &f;
            weighted += ctx.weight(i) * a;
        }
        let denom = Period::gamma_quarter(weighted + ctx.nu()).unwrap();
        let (&k, c) = denom.terms.iter().next().unwrap();
        acc.div_monomial(k).scale(&c.inv().unwrap())
    };
    W_MEMO.with(|m| m.borrow_mut().insert(key, v.clone()));
    v
}

pub fn sphere_monomial_integral(ctx: &HeisenbergContext, alpha: &[u16; MAX_DIM]) -> BigFloatC {
    sphere_weight(ctx, alpha).to_bigfloat()
}

/// Sphere weight of one ξ-monomial; `P_d`, `M_d` are the two unit points.
fn mono_weight(ctx: &HeisenbergContext, m: &XiMono) -> Period {
    if m.sheet != 0 {
        Period::rational(Gr::one())
    } else {
        sphere_weight(ctx, &m.alpha)
    }
}

/// `Σ_terms W(m) · (2π)^{−n}∫f dx` for a single component.
pub fn component_residue(ctx: &HeisenbergContext, c: &Component) -> Result<Scalar> {
    let mut acc = Scalar::zero();
    for (m, f) in &c.terms {
        let w = mono_weight(ctx, m);
        if w.is_zero() {
            continue;
        }
        acc += &(&Scalar::Exact(w) * &f.normalized_integral()?);
    }
    Ok(acc)
}

/// `⨍ a`: reads the degree `−ν` component, which must lie in the validity window.
pub fn residue(a: &FormalSymbol) -> Result<Scalar> {
    let nu = a.ctx.nu();
    let c = a.component(-nu)?;
    component_residue(&a.ctx, &c)
}

/// `⨍` of the Berezin top coefficient; the ε-part is ignored.
pub fn residue_form(a: &FormSymbol) -> Result<Scalar> {
    residue(&berezin_top(a))
}

/// The Quillen trace `τ(X + εY) = ⨍ Y`.
pub fn residue_form_epsilon(a: &FormSymbol) -> Result<Scalar> {
    residue(&berezin_top_epsilon(a))
}

/// A form whose coefficients are multiplied pointwise, with no degree bookkeeping.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PointForm {
    pub parts: BTreeMap<Mask, Component>,
}

impl PointForm {
    pub fn function(c: Component) -> Self {
        let mut r = Self::default();
        r.add_part(0, &c, &Gr::one());
        r
    }
    pub fn add_part(&mut self, m: Mask, c: &Component, k: &Gr) {
        let e = self.parts.entry(m).or_default();
        e.add_scaled(c, k);
        if e.is_zero() {
            self.parts.remove(&m);
        }
    }
    pub fn add_scaled(&mut self, o: &PointForm, k: &Gr) {
        for (m, c) in &o.parts {
            self.add_part(*m, c, k);
        }
    }
    pub fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }
    pub fn wedge(&self, o: &PointForm, ctx: &HeisenbergContext) -> PointForm {
        let mut r = PointForm::default();
        for (m1, a) in &self.parts {
            for (m2, b) in &o.parts {
                if let Some(s) = wedge_sign(*m1, *m2) {
                    r.add_part(m1 | m2, &a.mul(b, ctx), &Gr::from_int(s));
                }
            }
        }
        r
    }
    /// `dc = Σ ∂x_i c dx_i + ∂ξ_i c dξ_i` of a function.
    pub fn d_function(ctx: &HeisenbergContext, c: &Component) -> PointForm {
        let mut r = PointForm::default();
        for i in 0..ctx.n {
            r.add_part(dx_bit(i), &c.d_x(i), &Gr::one());
            r.add_part(dxi_bit(ctx, i), &c.d_xi(ctx, i), &Gr::one());
        }
        r
    }
    /// `ds/s = Σ ∂ξ_i(log s) dξ_i`.
    pub fn dlog_s(ctx: &HeisenbergContext) -> PointForm {
        let mut r = PointForm::default();
        for i in 0..ctx.n {
            let mut a = [0u16; MAX_DIM];
            a[i] = 1;
            r.add_part(dxi_bit(ctx, i), &log_derivative(ctx, &a), &Gr::one());
        }
        r
    }
}

/// `∫_{S_H^*ℝⁿ} η` for a dilation-invariant `(2n−1)`-form, with `S_H^*` oriented
/// by `ι_L(ω^n/n!) = ο(−1)^n dx₁…dxₙ ι_L(dξ₁…dξₙ)`: writes `(ds/s) ∧ η = m·vol`
/// and integrates the `dx ι_L(dξ)` coefficient with that sign.
pub fn sphere_integral(ctx: &HeisenbergContext, eta: &PointForm) -> Result<Scalar> {
    let mu = PointForm::dlog_s(ctx).wedge(eta, ctx);
    let Some(m) = mu.parts.get(&volume_mask(ctx)) else {
        return Ok(Scalar::zero());
    };
    let two_pi_n = Period::monomial((0, 2 * ctx.n as i32, 0), Gr::from_int(1 << ctx.n));
    let sign = if ctx.n % 2 == 0 { 1 } else { -1 } * Conventions::berezin_orientation(ctx.n);
    Ok((&Scalar::Exact(two_pi_n) * &component_residue(ctx, m)?).scale(&Gr::from_int(sign)))
}

/// `∫_{S_H^*} σ₀ dσ₁ ∧ … ∧ dσ_{2n−1}` for degree-0 components.
pub fn sphere_form_integral(ctx: &HeisenbergContext, sigma: &[Component]) -> Result<Scalar> {
    if sigma.len() != 2 * ctx.n {
        return Err(Error::Invalid(format!("need {} components, got {}", 2 * ctx.n, sigma.len())));
    }
    let mut eta = PointForm::function(sigma[0].clone());
    for s in &sigma[1..] {
        eta = eta.wedge(&PointForm::d_function(ctx, s), ctx);
    }
    sphere_integral(ctx, &eta)
}

/// Numerical `W(α)` by parametrizing `{|ξ|′ = 1}` directly; returns the
/// estimate and the difference between `N` and `N/2` trapezoid panels.
///
/// `n = 1`: the two points `ξ = ±1`, each carrying `w·ξ^α` with the boundary
/// orientation. `n = 2`: `ξ = ρ(φ)(cos φ, sin φ)` with `ρ` solving
/// `|ρu|′ = 1`, integrating `w₁ξ₁dξ₂ − w₂ξ₂dξ₁` over the periodic angle.
pub fn quadrature_oracle(ctx: &HeisenbergContext, alpha: &[u16; MAX_DIM], samples: usize) -> Result<(BigFloatC, f64)> {
    match ctx.n {
        1 => {
            let w = ctx.weight(0) as f64;
            let v = w * (1.0 + if alpha[0] % 2 == 0 { 1.0 } else { -1.0 });
            Ok((BigFloatC::from_f64(v), 0.0))
        }
        2 => {
            let full = curve_trapezoid(ctx, alpha, samples);
            let half = curve_trapezoid(ctx, alpha, samples / 2);
            Ok((BigFloatC::from_f64(full), (full - half).abs()))
        }
        _ => Err(Error::Unsupported("quadrature oracle implemented for n ≤ 2".into())),
    }
}

fn curve_trapezoid(ctx: &HeisenbergContext, alpha: &[u16; MAX_DIM], samples: usize) -> f64 {
    let quartic = |i: usize| i < ctx.p;
    let (w1, w2) = (ctx.weight(0) as f64, ctx.weight(1) as f64);
    let g = |x: f64, y: f64| {
        let a = if quartic(0) { x.powi(4) } else { x * x };
        let b = if quartic(1) { y.powi(4) } else { y * y };
        a + b
    };
    let grad = |x: f64, y: f64| {
        (if quartic(0) { 4.0 * x.powi(3) } else { 2.0 * x }, if quartic(1) { 4.0 * y.powi(3) } else { 2.0 * y })
    };
    let h = 2.0 * std::f64::consts::PI / samples as f64;
    let mut acc = 0.0;
    for k in 0..samples {
        let phi = k as f64 * h;
        let (c, s) = (phi.cos(), phi.sin());
        // g(ρu) = 1 with g mixing degrees 4 and 2 in ρ: Newton from ρ = 1.
        let mut rho = 1.0f64;
        for _ in 0..60 {
            let (gx, gy) = grad(rho * c, rho * s);
            let step = (g(rho * c, rho * s) - 1.0) / (gx * c + gy * s);
            rho -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (x, y) = (rho * c, rho * s);
        let (gx, gy) = grad(x, y);
        let drho = -rho * (gx * -s + gy * c) / (gx * c + gy * s);
        let dx = drho * c - rho * s;
        let dy = drho * s + rho * c;
        let mono = x.powi(alpha[0] as i32) * y.powi(alpha[1] as i32);
        acc += mono * (w1 * x * dy - w2 * y * dx);
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient_backends::CoeffFunction;
    use crate::exact_scalars::{bf_pi, bf_sqrt, gamma_quarter, precision_digits};
    use crate::form_calculus::{commutator_with_f, omega_power};
    use crate::rng::{random_order0, random_symbol, rng, Budget};

    fn al(a: &[u16]) -> [u16; MAX_DIM] {
        let mut r = [0; MAX_DIM];
        r[..a.len()].copy_from_slice(a);
        r
    }

    #[test]
    fn sphere_weight_examples() {
        let c11 = HeisenbergContext::torus(1, 1);
        assert_eq!(sphere_weight(&c11, &al(&[0])), Period::rational(Gr::from_int(2)));
        assert!(sphere_weight(&c11, &al(&[3])).is_zero());
        let c21 = HeisenbergContext::torus(2, 1);
        assert!(sphere_weight(&c21, &al(&[1, 2])).is_zero());
        // 2·√π·Γ(1/4)/Γ(3/4)
        let w = sphere_monomial_integral(&c21, &al(&[0, 0]));
        let d = precision_digits();
        let g14 = gamma_quarter(&crate::exact_scalars::rat(1, 4), d).unwrap();
        let g34 = gamma_quarter(&crate::exact_scalars::rat(3, 4), d).unwrap();
        let want = &(&g14 / &g34)
            * &BigFloatC::from_real(bf_sqrt(&bf_pi()))
                .scale_real(&crate::exact_scalars::bf_from_rational(&crate::exact_scalars::rat_int(2)));
        assert!((&w - &want).below_pow10(40));
        // Circle with weight-2 contraction: 4π.
        let c20 = HeisenbergContext::torus(2, 0);
        let w = sphere_monomial_integral(&c20, &al(&[0, 0]));
        assert!((&w
            - &BigFloatC::from_real(bf_pi())
                .scale_real(&crate::exact_scalars::bf_from_rational(&crate::exact_scalars::rat_int(4))))
            .below_pow10(40));
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let mut count = 0;
        for (n, p) in [(2usize, 0usize), (2, 1), (2, 2)] {
            let ctx = HeisenbergContext::torus(n, p);
            for a in [[0, 0], [2, 0], [0, 2], [2, 2], [4, 0], [4, 2], [0, 4]] {
                let exact = sphere_monomial_integral(&ctx, &al(&a)).re_f64();
                let (est, err) = quadrature_oracle(&ctx, &al(&a), 4096).unwrap();
                assert!(((est.re_f64() - exact) / exact).abs() < 1e-8, "{n} {p} {a:?}: {} vs {exact}", est.re_f64());
                assert!(err < 1e-6);
                count += 1;
            }
            let (odd, _) = quadrature_oracle(&ctx, &al(&[1, 2]), 4096).unwrap();
            assert!(odd.abs_f64() < 1e-8);
        }
        assert!(count >= 20);
        let (two, _) = quadrature_oracle(&HeisenbergContext::torus(1, 1), &al(&[0]), 10).unwrap();
        assert_eq!(two.re_f64(), 2.0);
    }

    #[test]
    fn residue_examples() {
        let ctx = HeisenbergContext::torus(1, 1);
        let a = FormalSymbol::s_power(ctx, -1);
        assert_eq!(residue(&a).unwrap().as_rational(), Some(Gr::from_int(2)));
        let f = CoeffFunction::fourier(1, &[0], Gr::from_int(3)).add(&CoeffFunction::fourier(1, &[2], Gr::one()));
        let b = FormalSymbol::monomial(ctx, XiMono::s_pow(-1), f);
        assert_eq!(residue(&b).unwrap().as_rational(), Some(Gr::from_int(6)));
        assert!(residue(&FormalSymbol::one(ctx)).unwrap().is_exact_zero());
        let t = FormalSymbol::one(ctx).truncate(0);
        assert!(matches!(residue(&t), Err(Error::Truncation { .. })));
        let ts = HeisenbergContext::two_sheet();
        assert_eq!(residue(&FormalSymbol::s_power(ts, -1)).unwrap().as_rational(), Some(Gr::from_int(2)));
    }

    #[test]
    fn residue_form_examples() {
        let ctx = HeisenbergContext::torus(2, 1);
        let mut r = rng(1);
        let a = random_symbol(&ctx, 0, -6, &Budget::default(), &mut r);
        let vol = FormSymbol::from_part(volume_mask(&ctx), a.clone());
        assert!((&residue_form(&vol).unwrap() + &residue(&a).unwrap()).is_exact_zero());
        let sym = FormSymbol::from_part(volume_mask(&ctx), a.clone()).scale(&Gr::from_int(-1));
        assert!((&residue_form(&sym).unwrap() - &residue(&a).unwrap()).is_exact_zero());
        assert!(residue_form(&FormSymbol::from_part(dx_bit(0), a)).unwrap().is_exact_zero());
        for ctx in [HeisenbergContext::two_sheet(), HeisenbergContext::torus(2, 1)] {
            let w = omega_power(ctx, ctx.n - 1);
            for _ in 0..20 {
                let a = random_order0(&ctx, &Budget::small(), &mut r).truncate(-ctx.nu() - 2);
                let c = commutator_with_f(&a).star(&w);
                assert!(residue_form(&c).unwrap().is_exact_zero());
            }
        }
    }

    #[test]
    fn trace_property_exact() {
        for ctx in [HeisenbergContext::two_sheet(), HeisenbergContext::torus(1, 1), HeisenbergContext::torus(2, 1)] {
            let mut r = rng(17);
            for _ in 0..10 {
                let a = random_symbol(&ctx, 0, -ctx.nu() - 2, &Budget::small(), &mut r);
                let b = random_symbol(&ctx, 0, -ctx.nu() - 2, &Budget::small(), &mut r);
                let c = a.commutator(&b);
                assert!(residue(&c).unwrap().is_exact_zero(), "{ctx:?}");
            }
        }
    }

    #[test]
    fn trace_property_gaussian() {
        let ctx = HeisenbergContext::gaussian(2, 1);
        let mut r = rng(2);
        for _ in 0..5 {
            let a = random_symbol(&ctx, 0, -ctx.nu() - 2, &Budget::small(), &mut r);
            let b = random_symbol(&ctx, 0, -ctx.nu() - 2, &Budget::small(), &mut r);
            let v = residue(&a.commutator(&b)).unwrap();
            assert!(v.is_zero_within(30), "{v:?}");
        }
    }

    #[test]
    fn sphere_form_integral_toeplitz() {
        let ctx = HeisenbergContext::two_sheet();
        let one = CoeffFunction::fourier(1, &[0], Gr::one());
        let mk = |k: i32| {
            let mut c = Component::default();
            c.add_term(XiMono::plus(0), &CoeffFunction::fourier(1, &[k], Gr::one()), &Gr::one());
            c.add_term(XiMono::minus(0), &one, &Gr::one());
            c
        };
        let v = sphere_form_integral(&ctx, &[mk(-1), mk(1)]).unwrap();
        let want =
            Period::monomial((0, 2, 0), Gr::new(crate::exact_scalars::rat_int(0), crate::exact_scalars::rat_int(2)));
        assert!(matches!(&v, Scalar::Exact(p) if *p == want), "{v:?}");
        let c = FormalSymbol::constant(ctx, Gr::from_int(2)).principal_symbol();
        assert!(sphere_form_integral(&ctx, &[c.clone(), c]).unwrap().is_exact_zero());
        assert!(sphere_form_integral(&ctx, &[mk(1)]).is_err());
    }
}
