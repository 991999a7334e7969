//! Special functions checked against extended-precision oracles.

use astro_float::{BigFloat, Consts, RoundingMode};
use latent_finsler::gp::Kernel;
use latent_finsler::metric::alpha_coefficient;
use latent_finsler::specfun::{kummer_1f1, kummer_1f1_derivative, ln_gamma, log_gamma_ratio};

const RM: RoundingMode = RoundingMode::ToEven;

struct Ext {
    p: usize,
    cc: Consts,
}

impl Ext {
    fn new(p: usize) -> Self {
        Self {
            p,
            cc: Consts::new().unwrap(),
        }
    }

    fn num(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }

    fn ln(&mut self, x: &BigFloat) -> BigFloat {
        x.ln(self.p, RM, &mut self.cc)
    }

    fn exp(&mut self, x: &BigFloat) -> BigFloat {
        x.exp(self.p, RM, &mut self.cc)
    }

    /// `ln Γ(x)` for `x > 0`: shift by 40, then the Stirling series through
    /// `B₃₀`.
    fn ln_gamma(&mut self, x: f64) -> BigFloat {
        const BERNOULLI: [(f64, f64); 15] = [
            (1.0, 6.0),
            (-1.0, 30.0),
            (1.0, 42.0),
            (-1.0, 30.0),
            (5.0, 66.0),
            (-691.0, 2730.0),
            (7.0, 6.0),
            (-3617.0, 510.0),
            (43867.0, 798.0),
            (-174611.0, 330.0),
            (854513.0, 138.0),
            (-236364091.0, 2730.0),
            (8553103.0, 6.0),
            (-23749461029.0, 870.0),
            (8615841276005.0, 14322.0),
        ];
        let p = self.p;
        let shift = 40;
        let mut y = self.num(x);
        let mut log_prod = self.num(0.0);
        for _ in 0..shift {
            let l = self.ln(&y);
            log_prod = log_prod.add(&l, p, RM);
            y = y.add(&self.num(1.0), p, RM);
        }
        let ln_y = self.ln(&y);
        let two_pi = self.cc.pi(p, RM).mul(&self.num(2.0), p, RM);
        let half_ln_two_pi = self.ln(&two_pi).mul(&self.num(0.5), p, RM);
        let mut s = y
            .sub(&self.num(0.5), p, RM)
            .mul(&ln_y, p, RM)
            .sub(&y, p, RM)
            .add(&half_ln_two_pi, p, RM);
        let y_sq = y.mul(&y, p, RM);
        let mut y_pow = y.clone();
        for (k, (num, den)) in BERNOULLI.iter().enumerate() {
            let two_k = 2.0 * (k as f64 + 1.0);
            let coeff = self.num(*num).div(&self.num(den * two_k * (two_k - 1.0)), p, RM);
            s = s.add(&coeff.div(&y_pow, p, RM), p, RM);
            y_pow = y_pow.mul(&y_sq, p, RM);
        }
        s.sub(&log_prod, p, RM)
    }

    /// Direct Maclaurin series of `₁F₁(a; b; x)`.
    fn kummer(&self, a: f64, b: f64, x: f64, max_terms: usize) -> BigFloat {
        let p = self.p;
        let (a, b, x) = (self.num(a), self.num(b), self.num(x));
        let mut term = self.num(1.0);
        let mut sum = self.num(1.0);
        let tiny = self.num(1e-40);
        for k in 0..max_terms {
            let kf = self.num(k as f64);
            term = term
                .mul(&a.add(&kf, p, RM), p, RM)
                .div(&b.add(&kf, p, RM), p, RM)
                .mul(&x, p, RM)
                .div(&self.num(k as f64 + 1.0), p, RM);
            sum = sum.add(&term, p, RM);
            if term.is_zero() || (k > 10 && term.abs().cmp(&tiny.mul(&sum.abs(), p, RM)) == Some(-1)) {
                break;
            }
        }
        sum
    }
}

fn to_f64(x: &BigFloat) -> f64 {
    x.to_string().parse().expect("decimal rendering of a finite BigFloat")
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn oracle_reproduces_known_gamma_values() {
    let mut ext = Ext::new(256);
    let half_ln_pi = 0.5 * std::f64::consts::PI.ln();
    assert!((to_f64(&ext.ln_gamma(0.5)) - half_ln_pi).abs() < 1e-15);
    assert!(to_f64(&ext.ln_gamma(1.0)).abs() < 1e-15);
    assert!((to_f64(&ext.ln_gamma(5.0)) - 24f64.ln()).abs() < 1e-14);
}

#[test]
fn ln_gamma_matches_extended_precision() {
    let mut ext = Ext::new(256);
    for x in [0.5, 1.5, 2.25, 3.7, 10.0, 50.5, 123.456, 500.0, 500.5, 1e4] {
        let want = to_f64(&ext.ln_gamma(x));
        let got = ln_gamma(x).unwrap();
        assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "lnΓ({x}): {got} vs {want}");
    }
}

#[test]
fn gamma_ratio_at_large_arguments() {
    let mut ext = Ext::new(256);
    let want = to_f64(&ext.ln_gamma(500.5).sub(&ext.ln_gamma(500.0), 256, RM));
    let got = log_gamma_ratio(500.5, 500.0).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert!((got - 0.5 * 500f64.ln()).abs() < 1e-3);
}

#[test]
fn gamma_ratio_grid() {
    let mut ext = Ext::new(256);
    for d in [1usize, 2, 3, 7, 16, 64, 100, 1024] {
        let h = d as f64 / 2.0;
        let want = to_f64(&ext.ln_gamma(h + 0.5).sub(&ext.ln_gamma(h), 256, RM));
        let got = log_gamma_ratio(h + 0.5, h).unwrap();
        assert!((got - want).abs() < 1e-13, "D={d}: {got} vs {want}");
    }
}

#[test]
fn alpha_at_large_dimension() {
    let mut ext = Ext::new(256);
    let ratio = ext.ln_gamma(500.5).sub(&ext.ln_gamma(500.0), 256, RM);
    let want = 2.0 * to_f64(&ext.exp(&ratio.mul(&ext.num(2.0), 256, RM)));
    let got = alpha_coefficient(1000);
    assert!(rel_err(got, want) < 1e-12, "{got} vs {want}");
    assert!((got - 999.5).abs() < 1e-3);
}

#[test]
fn kummer_reference_point() {
    let ext = Ext::new(256);
    let want = to_f64(&ext.kummer(-0.5, 1.0, -2.0, 200));
    let got = kummer_1f1(-0.5, 1.0, -2.0).unwrap();
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn kummer_matches_series_across_the_working_range() {
    let ext = Ext::new(1024);
    for b in [0.5, 1.0, 1.5, 2.5, 10.0, 50.0, 512.0] {
        for x in [-300.0, -120.0, -40.0, -10.0, -2.0, -0.3, 0.0, 0.7, 4.0] {
            let want = to_f64(&ext.kummer(-0.5, b, x, 5_000));
            let got = kummer_1f1(-0.5, b, x).unwrap();
            assert!(rel_err(got, want) < 1e-12, "1F1(-0.5, {b}, {x}): {got} vs {want}");
        }
    }
}

#[test]
fn kummer_in_the_asymptotic_regime() {
    let ext = Ext::new(4096);
    for (b, x) in [(0.5, -750.0), (1.0, -1000.0), (32.0, -1500.0)] {
        let want = to_f64(&ext.kummer(-0.5, b, x, 20_000));
        let got = kummer_1f1(-0.5, b, x).unwrap();
        assert!(rel_err(got, want) < 1e-10, "1F1(-0.5, {b}, {x}): {got} vs {want}");
    }
}

#[test]
fn kummer_derivative_matches_shifted_series() {
    let ext = Ext::new(1024);
    for (a, b, x) in [(-0.5, 1.0, -2.0), (-0.5, 2.5, -40.0), (-0.5, 10.0, 3.0), (-1.0, 4.0, 1.0), (0.5, 1.5, -7.0)] {
        let want = a / b * to_f64(&ext.kummer(a + 1.0, b + 1.0, x, 5_000));
        let got = kummer_1f1_derivative(a, b, x).unwrap();
        assert!(rel_err(got, want) < 1e-11, "d1F1({a}, {b}, {x}): {got} vs {want}");
    }
}

#[test]
fn matern52_at_unit_distance() {
    let mut ext = Ext::new(256);
    let p = 256;
    let s5 = ext.num(5.0).sqrt(p, RM);
    let poly = ext
        .num(1.0)
        .add(&s5, p, RM)
        .add(&ext.num(5.0).div(&ext.num(3.0), p, RM), p, RM);
    let want = to_f64(&poly.mul(&ext.exp(&s5.neg()), p, RM));
    let got = Kernel::matern52(1.0, 1.0).unwrap().eval(&[0.0], &[1.0]);
    assert!(rel_err(got, want) < 1e-14, "{got} vs {want}");
    assert!((got - 0.52399).abs() < 1e-5);
}
