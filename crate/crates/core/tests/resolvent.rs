use lumpwave::geometry::{DampingProfile, SurfaceProfile};
use lumpwave::resolvent::{
    assemble_semiclassical, cutoff_resolvent_estimate, scan_inverse_norm, CutoffModel, ScanBox, Variant,
};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

const HS: [f64; 3] = [1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0];

fn line_only() -> ScanBox {
    ScanBox { n_re: 0, ..ScanBox::default() }
}

#[test]
fn smallest_singular_value_matches_a_dense_svd() {
    let (a, p) = (DampingProfile::default(), SurfaceProfile::default());
    for v in Variant::all() {
        let op = assemble_semiclassical(v, C64::new(1.05, 0.02), 0.1, &a, &p, 30.0).unwrap();
        let dense = DMatrix::from_fn(op.n, op.n, |i, j| op.matrix.entry(i, j));
        let sv = dense.singular_values();
        let exact = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let s = op.s_min(1e-10, 5).unwrap().value;
        assert!((s - exact).abs() <= 1e-6 * exact, "{}: {s} vs {exact}", v.name());
    }
}

#[test]
fn barrier_loses_more_than_the_flat_case_as_h_shrinks() {
    let (a, p) = (DampingProfile::default(), SurfaceProfile::default());
    let flat = scan_inverse_norm(Variant::ViscousFlat, &a, &p, &HS, &line_only(), 30.0, 1).unwrap();
    let barrier = scan_inverse_norm(Variant::ViscousBarrier, &a, &p, &HS, &line_only(), 30.0, 1).unwrap();
    let ratio: Vec<f64> = flat.s_line.iter().zip(&barrier.s_line).map(|(f, b)| f / b).collect();
    assert!(ratio.windows(2).all(|w| w[1] > w[0]), "{ratio:?}");
    assert!(barrier.fit.nu > flat.fit.nu, "{} vs {}", barrier.fit.nu, flat.fit.nu);
    assert!(flat.apriori_residual <= 1e-8 && barrier.apriori_residual <= 1e-8);
}

#[test]
fn uniform_damping_keeps_the_inverse_bounded() {
    let scan = scan_inverse_norm(
        Variant::ViscousFlat,
        &DampingProfile::constant(1.0),
        &SurfaceProfile::default(),
        &HS,
        &line_only(),
        30.0,
        1,
    )
    .unwrap();
    assert!(scan.s_line.iter().all(|&s| s >= 0.1), "{:?}", scan.s_line);
    assert!(scan.fit.nu.abs() <= 0.2, "{}", scan.fit.nu);
}

#[test]
fn cutoff_norms_separate_trapping_from_free_motion() {
    let free = cutoff_resolvent_estimate(&CutoffModel { barrier: false, ..CutoffModel::default() }, &HS, 3).unwrap();
    let trapped = cutoff_resolvent_estimate(&CutoffModel::default(), &HS, 3).unwrap();
    assert!((free.fit.nu - 1.0).abs() <= 0.15, "{}", free.fit.nu);
    assert!(trapped.fit.nu > 1.0 && trapped.fit.nu < 2.0, "{}", trapped.fit.nu);
    assert!(trapped.norms.iter().zip(&free.norms).all(|(t, f)| t > f));
}
