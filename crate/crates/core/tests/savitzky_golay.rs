//! Filter coefficients checked against an independent least-squares
//! solution (normal equations, Gaussian elimination) and exact fractions.

use autotwin::signal::{savitzky_golay, sg_coefficients, FilterSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Centre-point smoothing weights from (AᵀA)⁻¹Aᵀ, first row.
fn normal_equation_weights(window: usize, order: usize) -> Vec<f64> {
    let h = (window / 2) as i64;
    let n = order + 1;
    let mut ata = vec![vec![0.0f64; n]; n];
    for z in -h..=h {
        for (r, row) in ata.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v += (z as f64).powi((r + c) as i32);
            }
        }
    }
    // invert by Gauss-Jordan with partial pivoting
    let mut aug: Vec<Vec<f64>> = ata
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        aug[col].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                let pivot_row = aug[col].clone();
                aug[r]
                    .iter_mut()
                    .zip(&pivot_row)
                    .for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    (-h..=h)
        .map(|z| {
            (0..n)
                .map(|k| aug[0][n + k] * (z as f64).powi(k as i32))
                .sum()
        })
        .collect()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "index {i}: {x} vs {y}");
    }
}

#[test]
fn quadratic_five_point_weights() {
    let c = sg_coefficients(&FilterSpec::new(5, 2).unwrap());
    let exact: Vec<f64> = [-3.0, 12.0, 17.0, 12.0, -3.0]
        .iter()
        .map(|v| v / 35.0)
        .collect();
    assert_close(&c, &exact, 1e-9);
}

#[test]
fn quadratic_seven_point_weights() {
    let c = sg_coefficients(&FilterSpec::new(7, 2).unwrap());
    let exact: Vec<f64> = [-2.0, 3.0, 6.0, 7.0, 6.0, 3.0, -2.0]
        .iter()
        .map(|v| v / 21.0)
        .collect();
    assert_close(&c, &exact, 1e-9);
}

#[test]
fn weights_match_normal_equations() {
    for (w, o) in [(5, 2), (7, 2), (7, 3), (9, 4), (11, 3), (15, 5), (21, 2)] {
        let c = sg_coefficients(&FilterSpec::new(w, o).unwrap());
        assert_close(&c, &normal_equation_weights(w, o), 1e-9);
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cubic_series_pass_through_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (w, o) in [(11, 3), (5, 3), (7, 3), (9, 4), (13, 5)] {
        let spec = FilterSpec::new(w, o).unwrap();
        for _ in 0..20 {
            let k: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let n = rng.random_range(w..60);
            let series: Vec<f64> = (0..n)
                .map(|i| {
                    let x = i as f64 / 10.0;
                    k[0] + k[1] * x + k[2] * x * x + k[3] * x * x * x
                })
                .collect();
            let out = savitzky_golay(&series, &spec).unwrap();
            assert_close(&out, &series, 1e-9);
        }
    }
}

#[test]
fn white_noise_variance_drops_by_the_weight_energy() {
    let spec = FilterSpec::new(11, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let series: Vec<f64> = (0..20_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let out = savitzky_golay(&series, &spec).unwrap();
    let var = |s: &[f64]| {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len() as f64
    };
    let h = spec.half_width();
    let interior = &out[h..out.len() - h];
    let expected: f64 = sg_coefficients(&spec).iter().map(|c| c * c).sum();
    let ratio = var(interior) / var(&series);
    assert!(
        (ratio - expected).abs() < 0.03,
        "ratio {ratio}, expected {expected}"
    );
}

#[test]
fn rejects_even_windows_and_short_series() {
    assert!(FilterSpec::new(4, 3).is_err());
    assert!(FilterSpec::new(5, 5).is_err());
    let spec = FilterSpec::new(11, 3).unwrap();
    assert!(savitzky_golay(&[1.0; 10], &spec).is_err());
}
