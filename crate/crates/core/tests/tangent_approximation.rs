//! Frobenius distances between whitened tangent vectors at a base point
//! approximate the Riemannian distance near that point. No tolerance is
//! asserted; the discrepancy is printed and must shrink with the radius.

use spd_transport::random;
use spd_transport::spd::{distance, from_whitened_tangent, whitened_tangent, SpdMatrix};

fn worst_discrepancy(radius: f64, seed: u64) -> f64 {
    let mut rng = random::rng(seed);
    let base = random::spd(&mut rng, 5, 1e3);
    let cluster: Vec<SpdMatrix> = (0..12)
        .map(|_| {
            let s = random::symmetric(&mut rng, 5);
            from_whitened_tangent(&base, &s.scale(radius / s.frobenius_norm())).unwrap()
        })
        .collect();
    let tangents: Vec<_> = cluster.iter().map(|p| whitened_tangent(&base, p).unwrap()).collect();
    let mut worst = 0.0f64;
    for i in 0..cluster.len() {
        for j in i + 1..cluster.len() {
            let exact = distance(&cluster[i], &cluster[j]).unwrap();
            let approx = tangents[i].sub(&tangents[j]).unwrap().frobenius_norm();
            worst = worst.max((approx - exact).abs() / exact);
        }
    }
    worst
}

#[test]
fn tangent_distances_approach_riemannian_distances() {
    let radii = [1.0, 0.3, 0.1, 0.03, 0.01];
    let errors: Vec<f64> = radii.iter().map(|&r| worst_discrepancy(r, 17)).collect();
    for (r, e) in radii.iter().zip(&errors) {
        eprintln!("radius {r:<5} max relative discrepancy {e:.3e}");
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}
