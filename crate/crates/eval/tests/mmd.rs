mod common;

use anfm_eval::{mmd2, Kernel};
use proptest::prelude::*;
use rand::Rng;

fn oracle_kernel(kernel: Kernel, x: &[f64], y: &[f64]) -> f64 {
    let len = x.len().max(y.len());
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.resize(len, 0.0);
    ys.resize(len, 0.0);
    match kernel {
        Kernel::GaussianTv { sigma } => {
            let mut l1 = 0.0;
            for i in 0..len {
                l1 += (xs[i] - ys[i]).abs();
            }
            let tv = 0.5 * l1;
            (-(tv * tv) / (2.0 * sigma * sigma)).exp()
        }
        Kernel::Rbf { sigma } => {
            let mut d2 = 0.0;
            for i in 0..len {
                d2 += (xs[i] - ys[i]) * (xs[i] - ys[i]);
            }
            (-d2 / (2.0 * sigma * sigma)).exp()
        }
    }
}

fn oracle_mmd(x: &[Vec<f64>], y: &[Vec<f64>], kernel: Kernel) -> f64 {
    let (n, m) = (x.len() as f64, y.len() as f64);
    let mut kxx = 0.0;
    for a in x {
        for b in x {
            kxx += oracle_kernel(kernel, a, b);
        }
    }
    let mut kyy = 0.0;
    for a in y {
        for b in y {
            kyy += oracle_kernel(kernel, a, b);
        }
    }
    let mut kxy = 0.0;
    for a in x {
        for b in y {
            kxy += oracle_kernel(kernel, a, b);
        }
    }
    kxx / (n * n) + kyy / (m * m) - 2.0 * kxy / (n * m)
}

fn random_sets(seed: u64, n: usize, m: usize, scale: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut r = common::rng(seed);
    let mut draw = |count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let len = r.random_range(1..12);
                (0..len).map(|_| r.random::<f64>() * scale).collect()
            })
            .collect()
    };
    (draw(n), draw(m))
}

fn kernels() -> [Kernel; 3] {
    [Kernel::GaussianTv { sigma: 1.0 }, Kernel::GaussianTv { sigma: 0.1 }, Kernel::Rbf { sigma: 30.0 }]
}

#[test]
fn rejects_empty_sets() {
    assert!(mmd2(&[], &[vec![1.0]], Kernel::Rbf { sigma: 1.0 }).is_err());
}

#[test]
fn separated_sets_give_positive_mmd() {
    let x = vec![vec![1.0, 0.0]; 5];
    let y = vec![vec![0.0, 1.0]; 7];
    let r = mmd2(&x, &y, Kernel::GaussianTv { sigma: 1.0 }).unwrap();
    assert!((r.value - 2.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-12);
    assert_eq!((r.n, r.m), (5, 7));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_double_loop_oracle(seed in any::<u64>(), n in 1usize..20, m in 1usize..20, scale in 0.1f64..50.0) {
        let (x, y) = random_sets(seed, n, m, scale);
        for kernel in kernels() {
            let got = mmd2(&x, &y, kernel).unwrap().value;
            let want = oracle_mmd(&x, &y, kernel);
            prop_assert!((got - want).abs() < 1e-12, "{kernel:?}: {got} vs {want}");
        }
    }

    #[test]
    fn self_distance_is_exactly_zero(seed in any::<u64>(), n in 1usize..20, scale in 0.1f64..50.0) {
        let (x, _) = random_sets(seed, n, 1, scale);
        for kernel in kernels() {
            prop_assert_eq!(mmd2(&x, &x, kernel).unwrap().value, 0.0);
        }
    }

    #[test]
    fn symmetric_exactly(seed in any::<u64>(), n in 1usize..20, m in 1usize..20) {
        let (x, y) = random_sets(seed, n, m, 1.0);
        for kernel in kernels() {
            prop_assert_eq!(mmd2(&x, &y, kernel).unwrap().value, mmd2(&y, &x, kernel).unwrap().value);
        }
    }
}
