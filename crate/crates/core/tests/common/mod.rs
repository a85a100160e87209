#![allow(dead_code)]

/// Brute-force minimizer over the simplex in 2 or 3 dimensions: scans a
/// coarse grid of the free coordinates, then repeatedly zooms in around the
/// best point with a ten times finer grid.
pub fn grid_minimize(dim: usize, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    assert!(dim == 2 || dim == 3);
    let free = dim - 1;
    let point = |c: &[f64]| {
        let mut z = c.to_vec();
        z.push((1.0 - c.iter().sum::<f64>()).max(0.0));
        z
    };
    let mut center = vec![0.5 / free as f64; free];
    let mut half_width: f64 = 1.0;
    let mut step: f64 = 0.01;
    let mut best = (f64::INFINITY, point(&center));
    while step > 1e-8 {
        let n = (2.0 * half_width / step).round() as i64;
        let axis = |k: usize, i: i64| center[k] - half_width + i as f64 * step;
        let mut visit = |c: &[f64]| {
            if c.iter().any(|x| *x < 0.0 || *x > 1.0) || c.iter().sum::<f64>() > 1.0 {
                return;
            }
            let z = point(c);
            let v = f(&z);
            if v < best.0 {
                best = (v, z);
            }
        };
        for i in 0..=n {
            let a = axis(0, i).clamp(0.0, 1.0);
            if free == 1 {
                visit(&[a]);
            } else {
                for j in 0..=n {
                    visit(&[a, axis(1, j).clamp(0.0, 1.0)]);
                }
            }
        }
        center = best.1[..free].to_vec();
        half_width = 3.0 * step;
        step /= 10.0;
    }
    best.1
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
