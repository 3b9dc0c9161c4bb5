mod common;

use std::sync::Arc;

use pnct_core::fidelity::CurvatureOperator;
use pnct_core::geometry::{Geometry, SystemMatrix};
use pnct_core::phantom::simulate_noiseless;
use pnct_core::{linalg, FidelityOracle, FidelityOracle32, Image, Sinogram};

use common::*;

#[test]
fn gradient_matches_central_differences() {
    let inst = instance(8, 12, 12, 3);
    let l = inst.fidelity().unwrap();
    let mut rng = rng(1);
    for _ in 0..5 {
        let x = uniform(&mut rng, 64, 0.0, 0.01);
        let g = l.gradient(&x);
        let fd = central_gradient(|y| l.value(y), &x, 1e-7);
        let err = relative_error(&g, &fd);
        assert!(err <= 1e-5, "relative error {err}");
    }
}

#[test]
fn hessian_matches_differences_of_gradient() {
    let inst = instance(8, 12, 12, 4);
    let l = inst.fidelity().unwrap();
    let mut rng = rng(2);
    let x = uniform(&mut rng, 64, 0.0, 0.01);
    for _ in 0..5 {
        let v = uniform(&mut rng, 64, -1.0, 1.0);
        let hv = l.hessian_apply(&x, &v).unwrap();
        let fd = central_directional(|y| l.gradient(y), &x, &v, 1e-6);
        let err = relative_error(&hv, &fd);
        assert!(err <= 1e-4, "relative error {err}");
    }
}

#[test]
fn hessian_matches_dense_assembly() {
    let inst = instance(8, 12, 12, 5);
    let l = inst.fidelity().unwrap();
    let a = inst.matrix.to_dense();
    let (m, n) = (inst.matrix.n_rows(), inst.matrix.n_cols());
    let mut rng = rng(3);
    let x = uniform(&mut rng, n, 0.0, 0.01);
    let ax = inst.matrix.forward(&x).unwrap();
    let w: Vec<f64> = ax.iter().map(|p| 1e5 * (-p).exp()).collect();
    let v = uniform(&mut rng, n, -1.0, 1.0);
    let dense = dense_weighted_normal(&a, m, n, &w, &v);
    let err = relative_error(&l.hessian_apply(&x, &v).unwrap(), &dense);
    assert!(err <= 1e-12, "relative error {err}");
}

#[test]
fn adjoint_identity_on_default_geometry() {
    let g = Geometry::new(64, 512.0, 90, 180.0, 90).unwrap();
    let a = SystemMatrix::<f64>::build(&g);
    let mut rng = rng(4);
    for _ in 0..3 {
        let x = uniform(&mut rng, a.n_cols(), -1.0, 1.0);
        let t = uniform(&mut rng, a.n_rows(), -1.0, 1.0);
        let lhs = linalg::dot(&a.forward(&x).unwrap(), &t);
        let rhs = linalg::dot(&x, &a.adjoint(&t).unwrap());
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }
}

#[test]
fn data_term_is_nonnegative_and_convex_along_lines() {
    let inst = instance(16, 20, 20, 6);
    let l = inst.fidelity().unwrap();
    let mut rng = rng(5);
    for _ in 0..20 {
        let x = uniform(&mut rng, 256, -0.005, 0.02);
        let y = uniform(&mut rng, 256, -0.005, 0.02);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fx, fy, fm) = (l.value(&x), l.value(&y), l.value(&mid));
        assert!(fx >= 0.0 && fy >= 0.0 && fm >= 0.0);
        assert!(fm <= 0.5 * (fx + fy) * (1.0 + 1e-12));
    }
}

#[test]
fn noiseless_truth_is_a_stationary_point() {
    // With d = I0·exp(−A·x_true) every residual d − g vanishes, so l(x_true) = 0 and ∇l = 0.
    let g = Geometry::new(16, 512.0, 20, 180.0, 20).unwrap();
    let a = Arc::new(SystemMatrix::build(&g));
    let truth = Image::from_vec(16, 16, uniform(&mut rng(6), 256, 0.0, 0.01)).unwrap();
    let d = simulate_noiseless(&a, &truth, 1e5, 20, 20).unwrap();
    let l = FidelityOracle::new(a, &d, 1e5).unwrap();
    let (v, grad) = l.value_and_gradient(&truth.data);
    assert!(v.abs() < 1e-8, "{v}");
    assert!(linalg::norm(&grad) < 1e-6);
}

#[test]
fn expected_counts_follow_single_pixel_chord() {
    // One bright pixel, horizontal rays at 0°: the ray through its centre crosses one pixel
    // width, so the count is I0·exp(−μ·w).
    let g = Geometry::new(4, 8.0, 1, 180.0, 4).unwrap();
    let a = SystemMatrix::build(&g);
    let mut img = Image::zeros(4, 4);
    img.set(1, 2, 0.3);
    let d = simulate_noiseless(&a, &img, 1e4, 1, 4).unwrap();
    let hit: Vec<usize> = (0..4).filter(|&k| d.get(0, k) < 1e4).collect();
    assert_eq!(hit.len(), 1);
    assert!((d.get(0, hit[0]) - 1e4 * (-0.3f64 * 2.0).exp()).abs() < 1e-8);
}

#[test]
fn single_precision_agrees_with_double() {
    let inst = instance(16, 20, 20, 7);
    let a32 = Arc::new(SystemMatrix::<f32>::build(&inst.geometry));
    let d32 = Sinogram::from_vec(
        20,
        20,
        inst.measurements.data.iter().map(|&v| v as f32).collect(),
    )
    .unwrap();
    let l32 = FidelityOracle32::new(a32, &d32, 1e5).unwrap();
    let l64 = inst.fidelity().unwrap();
    let x = uniform(&mut rng(8), 256, 0.0, 0.01);
    let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let g64 = l64.gradient(&x);
    let g32: Vec<f64> = l32.gradient(&x32).into_iter().map(f64::from).collect();
    assert!(relative_error(&g32, &g64) < 1e-3);
    let c = l32.curvature_at(&x32);
    let v = vec![1.0f32; 256];
    let hv: Vec<f64> = c.apply(&v).into_iter().map(f64::from).collect();
    let hv64 = l64.hessian_apply(&x, &vec![1.0; 256]).unwrap();
    assert!(relative_error(&hv, &hv64) < 1e-3);
}
