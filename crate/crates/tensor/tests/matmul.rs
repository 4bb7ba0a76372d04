mod common;

use anfm_tensor::{Tape, Tensor};
use common::*;
use proptest::prelude::*;

fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, ta: bool, tb: bool) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                let x = if ta { a[p * m + i] } else { a[i * k + p] };
                let y = if tb { b[j * k + p] } else { b[p * n + j] };
                c[i * n + j] += x * y;
            }
        }
    }
    c
}

#[test]
fn two_by_three_times_three_by_two() {
    let a = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let b = Tensor::new(vec![3, 2], vec![0.5, -1.0, 2.0, 0.25, -3.0, 1.5]).unwrap();
    let mut tape = Tape::new();
    let (va, vb) = (tape.constant(a.clone()).unwrap(), tape.constant(b.clone()).unwrap());
    let c = tape.matmul(va, vb).unwrap();
    let expect = naive(&a.data, &b.data, 2, 3, 2, false, false);
    assert_eq!(tape.shape(c), [2, 2]);
    for (x, y) in tape.value(c).data.iter().zip(&expect) {
        assert!((x - y).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn batched_products_match_loops(m in 1usize..9, k in 1usize..9, n in 1usize..9, batch in 1usize..4, ta in any::<bool>(), tb in any::<bool>(), mode in 0usize..3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a_mat = if ta { vec![k, m] } else { vec![m, k] };
        let b_mat = if tb { vec![n, k] } else { vec![k, n] };
        let a_batched = mode != 2;
        let b_batched = mode != 1;
        let a_shape = if a_batched { [&[batch][..], &a_mat].concat() } else { a_mat };
        let b_shape = if b_batched { [&[batch][..], &b_mat].concat() } else { b_mat };
        let a = uniform(&mut r, &a_shape, -2.0, 2.0);
        let b = uniform(&mut r, &b_shape, -2.0, 2.0);
        let mut tape = Tape::new();
        let (va, vb) = (tape.constant(a.clone()).unwrap(), tape.constant(b.clone()).unwrap());
        let c = tape.matmul_ex(va, vb, ta, tb).unwrap();
        let c = tape.value(c);
        prop_assert_eq!(&c.shape, &vec![batch, m, n]);
        for i in 0..batch {
            let ab = if a_batched { &a.data[i * m * k..(i + 1) * m * k] } else { &a.data[..] };
            let bb = if b_batched { &b.data[i * k * n..(i + 1) * k * n] } else { &b.data[..] };
            let expect = naive(ab, bb, m, k, n, ta, tb);
            for (x, y) in c.data[i * m * n..(i + 1) * m * n].iter().zip(&expect) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
