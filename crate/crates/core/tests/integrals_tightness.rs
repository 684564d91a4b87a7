use std::f64::consts::PI;

use tightsurf::contour::{decompose_regions, DecompositionSpec};
use tightsurf::integrals::{surface_integral, tightness_report, QuadratureSpec, Region};
use tightsurf::{FundamentalData, Surface};

#[test]
fn torus_is_tight_with_closed_form_integrals() {
    let s = Surface::torus(2.0, 1.0).unwrap();
    let rep = tightness_report(&s, Some(0), &QuadratureSpec::default()).unwrap();
    assert!(rep.tight);
    // K dA = cos u du dv
    assert!((rep.positive_curvature - 4.0 * PI).abs() < 1e-6);
    assert!((rep.total_absolute - 8.0 * PI).abs() < 1e-6);
    assert!((rep.absolute_bound.unwrap() - 8.0 * PI).abs() < 1e-12);
    assert!(rep.gauss_bonnet_defect.unwrap().abs() < 1e-8);
}

#[test]
fn sphere_is_tight_and_everywhere_positive() {
    let s = Surface::sphere(1.0).unwrap();
    let rep = tightness_report(&s, Some(2), &QuadratureSpec::default()).unwrap();
    assert!(rep.tight);
    assert!((rep.total_curvature - 4.0 * PI).abs() < 1e-8);
    assert!((rep.total_absolute - 4.0 * PI).abs() < 1e-8);
}

#[test]
fn gauss_bonnet_on_built_in_families() {
    for (s, chi) in [
        (Surface::sphere(0.7).unwrap(), 2),
        (Surface::torus(3.0, 1.2).unwrap(), 0),
        (Surface::perturbed_torus(2.0, 1.0, 0.1, 2, 1).unwrap(), 0),
    ] {
        let rep = tightness_report(&s, Some(chi), &QuadratureSpec::default()).unwrap();
        assert!(rep.gauss_bonnet_defect.unwrap().abs() < 1e-6, "{}: {rep:?}", s.family.name());
    }
}

#[test]
fn wavy_torus_is_not_tight() {
    let s = Surface::perturbed_torus(2.0, 1.0, 0.3, 3, 2).unwrap();
    let rep = tightness_report(&s, Some(0), &QuadratureSpec::default()).unwrap();
    assert!(!rep.tight);
    assert!(rep.positive_curvature > 4.0 * PI + 1e-3, "{}", rep.positive_curvature);
    assert!(rep.total_absolute > rep.absolute_bound.unwrap());
}

#[test]
fn refinement_shrinks_error_estimates() {
    let s = Surface::perturbed_torus(2.0, 1.0, 0.1, 2, 1).unwrap();
    let estimates: Vec<[f64; 3]> = [16, 32, 64]
        .into_iter()
        .map(|n| tightness_report(&s, Some(0), &QuadratureSpec::with_resolution(n)).unwrap().error_estimates)
        .collect();
    for k in 0..3 {
        assert!(estimates[1][k] < estimates[0][k] && estimates[2][k] < estimates[1][k], "{estimates:?}");
    }
}

#[test]
fn torus_regions_split_at_the_top_and_bottom_circles() {
    let s = Surface::torus(2.0, 1.0).unwrap();
    let mut area_errors = Vec::new();
    for n in [64, 128] {
        let d = decompose_regions(&s, Some(0), &DecompositionSpec { nu: n, nv: n, ..DecompositionSpec::default() }).unwrap();
        assert_eq!(d.parabolic_curves.len(), 2);
        assert_eq!(d.negative_components.len(), 1);
        assert_eq!(d.negative_components[0].boundary_curves.len(), 2);
        for c in &d.parabolic_curves {
            assert!(c.monotone);
            // H = 1/2 where the meridian curvature 1/r meets a flat parallel
            assert!((c.min_abs_h - 0.5).abs() < 1e-6, "{}", c.min_abs_h);
            let target = if c.curve.samples[0].point.u < PI { PI / 2.0 } else { 1.5 * PI };
            let err = c.curve.samples.iter().map(|s| (s.point.u - target).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "{err}");
        }
        // 4π² R r in total, 2πr(πR - 2r) with K < 0
        let total = 8.0 * PI * PI;
        assert!((d.positive_area + d.negative_area - total).abs() < 1e-9 * total);
        area_errors.push((d.negative_area - (4.0 * PI * PI - 4.0 * PI)).abs());
    }
    assert!(area_errors[0] < 0.02 && area_errors[0] / area_errors[1] > 3.5, "{area_errors:?}");
}

#[test]
fn sphere_has_no_negative_region() {
    let s = Surface::sphere(1.0).unwrap();
    let d = decompose_regions(&s, Some(2), &DecompositionSpec { nu: 64, nv: 64, ..DecompositionSpec::default() }).unwrap();
    assert!(d.negative_components.is_empty() && d.parabolic_curves.is_empty());
}

#[test]
fn area_splits_add_up() {
    let s = Surface::perturbed_torus(2.0, 1.0, 0.1, 2, 1).unwrap();
    let one = |_: &FundamentalData| 1.0;
    let spec = QuadratureSpec::with_resolution(128);
    let parts: f64 = [Region::Positive, Region::Negative]
        .into_iter()
        .map(|r| surface_integral(&s, &one, r, &spec).unwrap().value)
        .sum();
    let whole = surface_integral(&s, &one, Region::Whole, &spec).unwrap().value;
    assert!((parts - whole).abs() < 1e-8 * whole, "{parts} vs {whole}");
}

#[test]
fn sampled_multi_band_surface_has_two_boundaries_per_component() {
    use tightsurf::grid::SampledGrid;
    // three-lobed tube profile: four bands with K < 0 around the axis
    let s = Surface::perturbed_torus(2.0, 0.8, 0.3, 3, 0).unwrap();
    let g = Surface::sampled(SampledGrid::sample(&s, 256, 256).unwrap());
    let d = decompose_regions(&g, Some(0), &DecompositionSpec { nu: 128, nv: 128, ..DecompositionSpec::default() }).unwrap();
    assert_eq!(d.negative_components.len(), 4);
    assert!(d.negative_components.iter().all(|c| c.boundary_curves.len() == 2));
    assert!(d.unclosed.is_empty() && d.parabolic_curves.iter().all(|c| c.monotone));
}
