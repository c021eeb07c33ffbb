use lfgp::manifold::{embed, lle_weights};
use lfgp::{EmbeddingConfig, EmbeddingMethod};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A gently curved 3 × 1 sheet; the aspect ratio keeps the leading
/// embedding directions well separated.
fn sheet(n: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut x = Array2::zeros((n, 3));
    for mut row in x.rows_mut() {
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        row.assign(&ndarray::aview1(&[3.0 * u, v, 0.1 * (3.0 * u).sin()]));
    }
    x
}

fn rigid_motion(x: &Array2<f64>) -> Array2<f64> {
    let (a, b) = (0.7f64, -1.1f64);
    let rz = ndarray::array![[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]];
    let rx = ndarray::array![[1.0, 0.0, 0.0], [0.0, b.cos(), -b.sin()], [0.0, b.sin(), b.cos()]];
    let r = rz.dot(&rx);
    let mut y = x.dot(&r.t());
    for mut row in y.rows_mut() {
        row += &ndarray::aview1(&[5.0, -3.0, 2.0]);
    }
    y
}

/// Relative Frobenius distance between `a` and the best orthogonal
/// transform of `b` (both centered first).
fn procrustes(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let a = a - &a.mean_axis(Axis(0)).unwrap();
    let b = b - &b.mean_axis(Axis(0)).unwrap();
    // R = M (MᵀM)^(-1/2) with M = bᵀa, from the 2 × 2 eigendecomposition
    let m = b.t().dot(&a);
    let s = m.t().dot(&m);
    let (p, q, r) = (s[[0, 0]], s[[0, 1]], s[[1, 1]]);
    let mid = 0.5 * (p + r);
    let rad = (0.25 * (p - r).powi(2) + q * q).sqrt();
    let (l1, l2) = (mid + rad, mid - rad);
    let v1 = if q.abs() > 1e-300 { ndarray::array![l1 - r, q] } else if p >= r { ndarray::array![1.0, 0.0] } else { ndarray::array![0.0, 1.0] };
    let v1 = &v1 / v1.dot(&v1).sqrt();
    let v2 = ndarray::array![-v1[1], v1[0]];
    let inv_sqrt = Array2::from_shape_fn((2, 2), |(i, j)| v1[i] * v1[j] / l1.sqrt() + v2[i] * v2[j] / l2.sqrt());
    let rot = m.dot(&inv_sqrt);
    let diff = &b.dot(&rot) - &a;
    (diff.iter().map(|v| v * v).sum::<f64>() / a.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

fn check_invariances(method: EmbeddingMethod) {
    let x = sheet(300);
    let config = EmbeddingConfig::new(method, 12, 2);
    let base = embed(x.view(), &config).unwrap();
    assert_eq!(base.points.dim(), (300, 2));

    let moved = embed(rigid_motion(&x).view(), &config).unwrap();
    let d = procrustes(&base.points, &moved.points);
    assert!(d <= 1e-6, "{method:?} under a rigid motion: {d:e}");

    // reversed input rows must give reversed output rows
    let reversed = x.slice(ndarray::s![..;-1, ..]).to_owned();
    let back = embed(reversed.view(), &config).unwrap();
    let unreversed = back.points.slice(ndarray::s![..;-1, ..]).to_owned();
    let d = procrustes(&base.points, &unreversed);
    assert!(d <= 1e-6, "{method:?} under row reversal: {d:e}");
}

#[test]
fn lle_is_invariant_to_rigid_motions_and_row_order() {
    check_invariances(EmbeddingMethod::Lle);
}

#[test]
fn isomap_is_invariant_to_rigid_motions_and_row_order() {
    check_invariances(EmbeddingMethod::Isomap);
}

#[test]
fn isomap_recovers_sheet_coordinates() {
    let x = sheet(300);
    let e = embed(x.view(), &EmbeddingConfig::new(EmbeddingMethod::Isomap, 12, 2)).unwrap();
    // geodesics along the sheet: the leading coordinate follows arc length in u
    let u = x.column(0).to_owned();
    let first = e.points.column(0).to_owned();
    let (mu, mf) = (u.mean().unwrap(), first.mean().unwrap());
    let cov = (&u - mu).dot(&(&first - mf));
    let corr = cov / ((&u - mu).dot(&(&u - mu)) * (&first - mf).dot(&(&first - mf))).sqrt();
    assert!(corr.abs() > 0.99, "correlation {corr}");
}

#[test]
fn lle_weights_are_affine() {
    let x = sheet(200);
    let w = lle_weights(x.view(), 10).unwrap();
    assert_eq!(w.len(), 200);
    for (i, row) in w.iter().enumerate() {
        assert_eq!(row.len(), 10);
        assert!(row.iter().all(|&(j, _)| j != i));
        let s: f64 = row.iter().map(|&(_, v)| v).sum();
        assert!((s - 1.0).abs() <= 1e-10, "row {i} sums to {s}");
    }
}

#[test]
fn disconnected_graph_is_rejected() {
    let mut x = sheet(100);
    for i in 50..100 {
        x[[i, 0]] += 1000.0;
    }
    for method in [EmbeddingMethod::Lle, EmbeddingMethod::Isomap] {
        assert!(embed(x.view(), &EmbeddingConfig::new(method, 5, 2)).is_err());
    }
}
