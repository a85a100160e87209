mod common;

use common::{grid_minimize, max_abs_diff};
use mixest_core::estimators::{exp_smd_step, sgd_step, SignConvention};
use mixest_core::simplex::{kl_divergence, project_simplex, r_phi, ENTROPY_FLOOR};
use mixest_core::{MirrorKind, MirrorMap, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_simplex(rng: &mut ChaCha8Rng, dim: usize) -> WeightVector {
    let raw: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    WeightVector::normalized(raw).unwrap()
}

#[test]
fn projection_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dim in [2, 3] {
        for _ in 0..25 {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            let fast = project_simplex(&v).unwrap();
            let slow = grid_minimize(dim, |z| z.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum());
            assert!(max_abs_diff(fast.as_slice(), &slow) < 1e-6, "{v:?}");
        }
    }
}

#[test]
fn pinsker_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let dim = rng.random_range(2..8);
        let p = random_simplex(&mut rng, dim);
        let q = random_simplex(&mut rng, dim);
        let kl = kl_divergence(p.as_slice(), q.as_slice()).unwrap();
        let tv = p.l1_distance(&q);
        assert!(kl + 1e-12 >= 0.5 * tv * tv);
    }
}

#[test]
fn r_phi_matches_range_search() {
    // R_φ² is the range of φ over the simplex.
    for kind in [MirrorKind::Euclidean, MirrorKind::NegativeEntropy] {
        let steps = 300;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                let z = [a as f64, b as f64, (steps - a - b) as f64].map(|x| x / steps as f64);
                let v = kind.phi(&z).unwrap();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let closed = r_phi(&kind, 3).unwrap();
        assert!((closed - (hi - lo).sqrt()).abs() < 1e-4, "{kind:?}: {closed} vs {}", (hi - lo).sqrt());
    }
}

#[test]
fn closed_form_steps_solve_the_prox_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for dim in [2, 3] {
        for _ in 0..20 {
            let m = random_simplex(&mut rng, dim);
            let g: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..4.0)).collect();
            let gamma = rng.random_range(0.01..1.0);

            let euclid = sgd_step(&m, &g, gamma, SignConvention::Descent).unwrap();
            let prox = grid_minimize(dim, |z| {
                let d: f64 = z.iter().zip(m.iter()).map(|(a, b)| 0.5 * (a - b).powi(2)).sum();
                d - gamma * z.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
            });
            assert!(max_abs_diff(euclid.as_slice(), &prox) < 1e-4);

            let entropic = exp_smd_step(&m, &g, gamma).unwrap();
            let prox = grid_minimize(dim, |z| {
                kl_divergence(z, m.as_slice()).unwrap() - gamma * z.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
            });
            assert!(max_abs_diff(entropic.as_slice(), &prox) < 1e-4);
        }
    }
}

#[test]
fn literal_sign_moves_the_other_way() {
    let m = WeightVector::uniform(2).unwrap();
    let g = [4.0 / 3.0, 2.0 / 3.0];
    let up = sgd_step(&m, &g, 0.3, SignConvention::Descent).unwrap();
    let down = sgd_step(&m, &g, 0.3, SignConvention::Literal).unwrap();
    assert!((up.as_slice()[0] - 0.6).abs() < 1e-12);
    assert!((down.as_slice()[0] - 0.4).abs() < 1e-12);
}

#[test]
fn exp_step_keeps_floor() {
    let m = WeightVector::new(vec![1.0, 0.0, 0.0]).unwrap();
    let next = exp_smd_step(&m, &[50.0, 0.0, 0.0], 1.0).unwrap();
    assert!(next.min() >= ENTROPY_FLOOR);
    assert!((next.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
