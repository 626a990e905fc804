use num_complex::Complex64;
use radul_core::cyclic_index::{phi_cocycle, psi_cocycle, SymMat};
use radul_core::exact_scalars::{Gr, Rational, Scalar};
use radul_core::quillen_engine::synthetic::{trace_lemma_sides, SynCochain};
use radul_core::quillen_engine::*;
use radul_core::rng::{random_order0, rng};
use radul_core::samples::dense_gaussian;
use radul_core::symbol_algebra::{FormalSymbol, HeisenbergContext};
use rand::Rng;

fn symbols(ctx: &HeisenbergContext, len: usize, seed: u64) -> Vec<FormalSymbol> {
    let mut r = rng(seed);
    (0..len).map(|_| random_order0(ctx, &dense_gaussian(), &mut r).truncate(-ctx.nu() - 3)).collect()
}

fn mats(t: &[FormalSymbol]) -> Vec<SymMat> {
    t.iter().cloned().map(SymMat::scalar).collect()
}

fn half() -> Gr {
    Gr::from_ratio(1, 2)
}

#[test]
fn trace_lemma_is_exact() {
    let mut r = rng(101);
    let mut nonzero = 0;
    for _ in 0..50 {
        // τ kills graded commutators of constants, so at least one argument is used.
        let (p, q) = (r.gen_range(0..=2), r.gen_range(1..=2));
        let dim = 2;
        // τ only sees exterior degree 2, so the value degrees add up to 2.
        let df = r.gen_range(0..=2);
        let f = SynCochain::random(p, df, dim, &mut r);
        let g = SynCochain::random(q, 2 - df, dim, &mut r);
        let t: Vec<usize> = (0..p + q).map(|_| r.gen_range(0..dim)).collect();
        let (lhs, rhs) = trace_lemma_sides(&f, &g, &t);
        assert_eq!(lhs, rhs, "p={p} q={q} t={t:?}");
        nonzero += usize::from(lhs != Rational::from(0));
    }
    assert!(nonzero >= 25, "only {nonzero} nontrivial cases");
}

#[test]
fn bianchi_identity_holds_at_n1() {
    let ctx = HeisenbergContext::gaussian(1, 1);
    let t = symbols(&ctx, 4, 1);
    for tp in [Gr::zero(), half(), Gr::one()] {
        for len in 0..=4 {
            assert_eq!(form_deviation(&bianchi_check(&t[..len], ctx, &tp).unwrap()), 0.0, "K, t={tp} len={len}");
            assert_eq!(form_deviation(&bianchi_exp_check(&t[..len], ctx, &tp).unwrap()), 0.0, "e^K, t={tp} len={len}");
        }
    }
}

#[test]
fn bianchi_identity_holds_at_n2() {
    let ctx = HeisenbergContext::gaussian(2, 1);
    let t = symbols(&ctx, 4, 5);
    for len in 0..=4 {
        assert_eq!(form_deviation(&bianchi_check(&t[..len], ctx, &half()).unwrap()), 0.0, "K len={len}");
    }
    for len in 0..=2 {
        assert_eq!(form_deviation(&bianchi_exp_check(&t[..len], ctx, &half()).unwrap()), 0.0, "e^K len={len}");
    }
}

#[test]
fn bianchi_check_detects_wrong_connections() {
    let ctx = HeisenbergContext::gaussian(1, 1);
    let t = symbols(&ctx, 2, 2);
    let k = curvature_k(ctx, &half()).unwrap();
    // ∇ with the wrong multiple of F.
    assert!(form_deviation(&k.bianchi(&Gr::one()).unwrap().eval(&t[..1]).unwrap()) > 1e-3);
    // Dropping the ad ρ term.
    let no_rho = k.delta_bar().add(&k.ad_nabla(&half()).unwrap()).unwrap();
    assert!(form_deviation(&no_rho.eval(&t).unwrap()) > 1e-3);
    // Flipping the sign of δ_bar.
    let flipped = k.bianchi(&half()).unwrap().add_scaled(&k.delta_bar(), &Gr::from_int(-2)).unwrap();
    assert!(form_deviation(&flipped.eval(&t).unwrap()) > 1e-3);
}

#[test]
fn exponential_matches_the_power_series() {
    let ctx = HeisenbergContext::gaussian(1, 1);
    let t = symbols(&ctx, 2, 3);
    let k = curvature_k(ctx, &half()).unwrap();
    // Each argument feeds one letter, εtδF occurs at most once and (F²)^{n+1} = 0.
    let mut series = BarCochain::unit(ctx);
    let mut pow = BarCochain::unit(ctx);
    let mut fact = 1;
    for j in 1..=t.len() + 1 + ctx.n {
        pow = pow.product(&k);
        fact *= j as i64;
        series = series.add_scaled(&pow, &Gr::from_ratio(1, fact)).unwrap();
    }
    for len in 0..=2 {
        let d = exp_k_eval(&t[..len], ctx, &half()).unwrap().sub(&series.eval(&work(&t[..len])).unwrap());
        assert_eq!(form_deviation(&d), 0.0, "len={len}");
    }
}

#[test]
fn product_is_unital_and_associative() {
    let ctx = HeisenbergContext::gaussian(1, 1);
    let t = work(&symbols(&ctx, 3, 4));
    let (rho, k) = (BarCochain::rho(ctx), curvature_k(ctx, &Gr::one()).unwrap());
    let one = BarCochain::unit(ctx);
    for len in 0..=3 {
        let s = &t[..len];
        assert_eq!(form_deviation(&one.product(&k).eval(s).unwrap().sub(&k.eval(s).unwrap())), 0.0);
        assert_eq!(form_deviation(&rho.product(&one).eval(s).unwrap().sub(&rho.eval(s).unwrap())), 0.0);
        let left = rho.product(&k).product(&rho).eval(s).unwrap();
        let right = rho.product(&k.product(&rho)).eval(s).unwrap();
        assert_eq!(form_deviation(&left.sub(&right)), 0.0, "len={len}");
    }
}

#[test]
fn theta_is_minus_the_displayed_components() {
    let ctx = HeisenbergContext::gaussian(2, 1);
    let mut nontrivial = 0;
    for (k, seed) in [(1, 7), (2, 7), (2, 8)] {
        let t = symbols(&ctx, 2 * k, seed);
        let th = theta_eval(&t, &Gr::one()).unwrap();
        let parts = &theta_prime(k, &t).unwrap() + &theta_second(k, &t).unwrap();
        nontrivial += usize::from(th.abs_f64() > 1e-8);
        assert!((&th + &parts).abs_f64() < 1e-30, "k={k}: {th:?} vs {parts:?}");
    }
    assert!(nontrivial >= 1);
}

#[test]
fn theta_components_are_multiples_of_the_cocycles() {
    // Frozen values of −c^n C(n, k−1) and c^n C(n, k) with c = −i.
    let cases = [
        (1, 1, Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)),
        (2, 1, Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.0)),
    ];
    for (n, k, lp, ls) in cases {
        let ctx = HeisenbergContext::gaussian(n, 1);
        let tuples: Vec<_> = (0..3).map(|s| symbols(&ctx, 2 * k, 20 + s)).collect();
        let (p, s) = theta_constants(k, &tuples).unwrap();
        for (rep, frozen) in [(&p, lp), (&s, ls)] {
            assert!(rep.samples >= 2, "{}", rep.to_json());
            assert!(rep.spread < 1e-8, "{}", rep.to_json());
            assert!((rep.value - frozen).norm() < 1e-8, "{}", rep.to_json());
            assert!(rep.deviation_from_expected() < 1e-8, "{}", rep.to_json());
        }
    }
}

#[test]
fn theta_is_b_minus_b_closed_at_n2() {
    let ctx = HeisenbergContext::gaussian(2, 1);
    let tuples: Vec<Vec<SymMat>> = (0..2).map(|s| mats(&symbols(&ctx, 5, 30 + s))).collect();
    let rep = theta_closedness(&tuples, 2).unwrap();
    assert!(rep.scale > 1e-4, "{}", rep.to_json());
    assert_eq!(rep.holds(1e-8), (true, false), "{}", rep.to_json());
}

#[test]
fn t_squared_coefficient_is_closed_at_n2() {
    let ctx = HeisenbergContext::gaussian(2, 1);
    let tuples = vec![mats(&symbols(&ctx, 5, 31))];
    let rep = t_coefficient_closedness(1, &tuples).unwrap();
    assert!(rep.scale > 1e-4, "{}", rep.to_json());
    assert!(rep.holds(1e-8).0, "{}", rep.to_json());
}

#[test]
fn t_coefficients_reassemble_theta() {
    let ctx = HeisenbergContext::gaussian(2, 1);
    let t = symbols(&ctx, 2, 5);
    let coeffs: Vec<Scalar> = (0..=2).map(|j| t_coefficient(j, &t).unwrap()).collect();
    let total = coeffs.iter().fold(Scalar::zero(), |acc, c| &acc + c);
    assert!((&total - &theta_eval(&t, &Gr::one()).unwrap()).abs_f64() < 1e-30);
    let at_half = &coeffs[0] + &coeffs[2].scale(&Gr::from_ratio(1, 4));
    assert!((&at_half - &theta_eval(&t, &half()).unwrap()).abs_f64() < 1e-30);
    // Only even powers of t occur; on two arguments t⁰ carries −θ′₂ and t² carries −θ″₂.
    assert!(coeffs[1].abs_f64() < 1e-30);
    assert!(coeffs[0].abs_f64() > 1e-6);
    assert!((&coeffs[0] + &theta_prime(1, &t).unwrap()).abs_f64() < 1e-30);
    assert!((&coeffs[2] + &theta_second(1, &t).unwrap()).abs_f64() < 1e-30);
}

#[test]
fn frozen_mu_combination_transgresses_at_n2() {
    // X = −μ₁/8 on one argument and Y = μ₂/12 on three.
    let ctx = HeisenbergContext::gaussian(2, 1);
    let t = mats(&symbols(&ctx, 4, 9));
    let x = mu(1, 1).scale(&Gr::from_ratio(-1, 8));
    let y = mu(2, 3).scale(&Gr::from_ratio(1, 12));
    let mid = &(&x.hochschild_b().eval(&t[..2]).unwrap() + &y.connes_b().unwrap().eval(&t[..2]).unwrap())
        - &(&phi_cocycle(0, &t[..2]).unwrap() - &psi_cocycle(1, &t[..2]).unwrap());
    let top = &y.hochschild_b().eval(&t).unwrap() + &phi_cocycle(1, &t).unwrap();
    assert!(phi_cocycle(0, &t[..2]).unwrap().abs_f64() > 1e-6);
    assert!(mid.abs_f64() < 1e-10, "{mid:?}");
    assert!(top.abs_f64() < 1e-10, "{top:?}");
}

#[test]
fn mu_combination_is_recovered_by_least_squares() {
    let ctx = HeisenbergContext::gaussian(2, 1);
    let tuples: Vec<Vec<SymMat>> = (0..2).map(|s| mats(&symbols(&ctx, 4, 40 + s))).collect();
    let rep = discover_mu_combination(0, &tuples).unwrap();
    assert!(rep.scale > 1e-4 && rep.residual < 1e-10, "{}", rep.to_json());
    let c = &rep.coefficients;
    assert!((c[1] - Complex64::new(-0.125, 0.0)).norm() < 1e-8, "{}", rep.to_json());
    assert!((c[2] - Complex64::new(1.0 / 12.0, 0.0)).norm() < 1e-8, "{}", rep.to_json());
}
