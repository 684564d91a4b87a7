use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tightsurf::grid::SampledGrid;
use tightsurf::numeric::loglog_slope;
use tightsurf::surface::{codazzi_residuals, eval_jet, Orientation};
use tightsurf::{FormSource, ParamPoint, Surface};

fn random_points(seed: u64, n: usize, u: (f64, f64), v: (f64, f64)) -> Vec<ParamPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| ParamPoint::new(rng.gen_range(u.0..u.1), rng.gen_range(v.0..v.1))).collect()
}

fn torus_position(big_r: f64, r: f64, p: ParamPoint) -> [f64; 3] {
    let rho = big_r + r * p.u.cos();
    [rho * p.v.cos(), rho * p.v.sin(), r * p.u.sin()]
}

#[test]
fn torus_matches_revolution_formulas() {
    let (big_r, r) = (2.0, 1.0);
    let s = Surface::torus(big_r, r).unwrap();
    for p in random_points(1, 100, (0.0, 2.0 * PI), (0.0, 2.0 * PI)) {
        let x = eval_jet(&s, p).unwrap().position;
        let y = torus_position(big_r, r, p);
        assert!((0..3).all(|k| (x[k] - y[k]).abs() < 1e-12));
        let fd = s.forms(p).unwrap();
        let rho = big_r + r * p.u.cos();
        let expected = [r * r, 0.0, rho * rho, r, 0.0, rho * p.u.cos()];
        let got = [fd.e, fd.f, fd.g, fd.l, fd.m, fd.n];
        for k in 0..6 {
            assert!((got[k] - expected[k]).abs() < 1e-12, "{p:?} component {k}");
        }
        assert!((fd.k - p.u.cos() / (r * rho)).abs() < 1e-12);
    }
}

#[test]
fn torus_connection_at_top_circle() {
    let s = Surface::torus(2.0, 1.0).unwrap();
    let fd = s.forms(ParamPoint::new(PI / 2.0, 0.7)).unwrap();
    assert!((fd.christoffels.g122 - 2.0).abs() < 1e-12);
    assert!((fd.christoffels.g212 + 0.5).abs() < 1e-12);
    assert!((fd.coeffs.gamma + 0.5).abs() < 1e-12);
    assert!((fd.coeffs.alpha + 2.0).abs() < 1e-12);
}

#[test]
fn sampled_torus_reproduces_positions() {
    let s = Surface::torus(2.0, 1.0).unwrap();
    let grid = Surface::sampled(SampledGrid::sample(&s, 256, 256).unwrap());
    let mut worst = 0.0f64;
    for p in random_points(2, 200, (0.0, 2.0 * PI), (0.0, 2.0 * PI)) {
        let x = eval_jet(&grid, p).unwrap().position;
        let y = torus_position(2.0, 1.0, p);
        worst = (0..3).map(|k| (x[k] - y[k]).abs()).fold(worst, f64::max);
    }
    assert!(worst < 1e-6, "{worst}");
}

fn analytic_families() -> Vec<(Surface, (f64, f64), (f64, f64))> {
    let full = (0.0, 2.0 * PI);
    vec![
        (Surface::torus(2.0, 1.0).unwrap(), full, full),
        (Surface::perturbed_torus(2.0, 1.0, 0.1, 2, 1).unwrap(), full, full),
        (Surface::sphere(1.5).unwrap(), (-1.4, 1.4), full),
        (Surface::cubic_collar(2.0, 0.3).unwrap(), (-0.29, 0.29), full),
        (Surface::graph(0.7, -0.2, -1.1, 1.0).unwrap(), (-0.9, 0.9), (-0.9, 0.9)),
    ]
}

#[test]
fn gauss_identity_on_every_family() {
    for (s, u, v) in analytic_families() {
        for p in random_points(3, 100, u, v) {
            let fd = s.forms(p).unwrap();
            let lhs = fd.k * fd.det_i;
            let rhs = fd.l * fd.n - fd.m * fd.m;
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "{} at {p:?}", s.family.name());
        }
    }
}

/// Christoffels of the first fundamental form by centered differences of
/// `E`, `F`, `G`.
fn christoffels_by_differences(s: &Surface, p: ParamPoint) -> [f64; 6] {
    let h = 1e-5;
    let metric = |du: f64, dv: f64| {
        let fd = s.forms(ParamPoint::new(p.u + du, p.v + dv)).unwrap();
        [fd.e, fd.f, fd.g]
    };
    let (up, um, vp, vm) = (metric(h, 0.0), metric(-h, 0.0), metric(0.0, h), metric(0.0, -h));
    let d = |k: usize| [(up[k] - um[k]) / (2.0 * h), (vp[k] - vm[k]) / (2.0 * h)];
    let ([e_u, e_v], [f_u, f_v], [g_u, g_v]) = (d(0), d(1), d(2));
    let [e, f, g] = metric(0.0, 0.0);
    let det = e * g - f * f;
    // first kind symbols [ij, k], then raise with the inverse metric
    let (s111, s112, s122) = (0.5 * e_u, 0.5 * e_v, f_v - 0.5 * g_u);
    let (s211, s212, s222) = (f_u - 0.5 * e_v, 0.5 * g_u, 0.5 * g_v);
    let raise = |a: f64, b: f64| [(g * a - f * b) / det, (e * b - f * a) / det];
    let [g111, g211] = raise(s111, s211);
    let [g112, g212] = raise(s112, s212);
    let [g122, g222] = raise(s122, s222);
    [g111, g112, g122, g211, g212, g222]
}

#[test]
fn connection_coefficients_match_metric_differences() {
    for (s, u, v) in analytic_families() {
        for p in random_points(4, 40, u, v) {
            let fd = s.forms(p).unwrap();
            let [g111, g112, g122, g211, g212, g222] = christoffels_by_differences(&s, p);
            let expected = [-g112, g111 - g212, g211, -g122, g112 - g222, g212];
            let k = fd.coeffs;
            let got = [k.a, k.b, k.c, k.alpha, k.beta, k.gamma];
            for i in 0..6 {
                assert!((got[i] - expected[i]).abs() < 1e-7 * (1.0 + expected[i].abs()), "{} {p:?} {i}", s.family.name());
            }
        }
    }
}

#[test]
fn two_gamma_plus_b_is_half_log_det_derivative() {
    let s = Surface::perturbed_torus(2.0, 1.0, 0.1, 2, 1).unwrap();
    let h = 1e-5;
    for p in random_points(5, 100, (0.0, 2.0 * PI), (0.0, 2.0 * PI)) {
        let fd = s.forms(p).unwrap();
        let det = |du: f64| s.forms(ParamPoint::new(p.u + du, p.v)).unwrap().det_i.ln();
        let rhs = 0.5 * (det(h) - det(-h)) / (2.0 * h);
        let lhs = 2.0 * fd.coeffs.gamma + fd.coeffs.b;
        assert!((lhs - rhs).abs() < 1e-7, "{p:?}: {lhs} vs {rhs}");
    }
}

#[test]
fn codazzi_residuals_converge_at_second_order() {
    let s = Surface::torus(2.0, 1.0).unwrap();
    let hs = [1e-2, 1e-3, 1e-4];
    let points = random_points(6, 100, (PI / 2.0 + 0.1, 1.5 * PI - 0.1), (0.0, 2.0 * PI));
    let worst: Vec<f64> = hs
        .iter()
        .map(|&h| points.iter().map(|&p| codazzi_residuals(&s, p, h).unwrap().max_abs()).fold(0.0, f64::max))
        .collect();
    let slope = loglog_slope(&hs, &worst);
    assert!(slope >= 1.9, "{worst:?} slope {slope}");
}

#[test]
fn sphere_residuals_are_pure_truncation() {
    // the latitude chart is not constant, so only the h² decay is exact
    let s = Surface::sphere(1.0).unwrap();
    for p in random_points(7, 20, (-1.2, 1.2), (0.0, 2.0 * PI)) {
        let a = codazzi_residuals(&s, p, 1e-3).unwrap().max_abs();
        let b = codazzi_residuals(&s, p, 1e-4).unwrap().max_abs();
        assert!(a < 1e-5 && b < 1e-7 && b <= a, "{a} {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn flipping_orientation_negates_second_form(u in 0.0..2.0 * PI, v in 0.0..2.0 * PI) {
        let s = Surface::perturbed_torus(2.0, 1.0, 0.1, 2, 1).unwrap();
        let f = s.clone().with_orientation(Orientation::Flipped);
        let p = ParamPoint::new(u, v);
        let (a, b) = (s.forms(p).unwrap(), f.forms(p).unwrap());
        prop_assert_eq!(a.l, -b.l);
        prop_assert_eq!(a.m, -b.m);
        prop_assert_eq!(a.n, -b.n);
        prop_assert_eq!(a.h, -b.h);
        prop_assert!((a.k - b.k).abs() <= 1e-15 * a.k.abs().max(1.0));
        prop_assert_eq!([a.e, a.f, a.g], [b.e, b.f, b.g]);
    }
}
