use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensor_core::rng::cnormal_vec;
use tensor_core::{direct_sum, kron, vec_matrix, CMatrix, CTensor3, TensorError, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_vec(r, c, cnormal_vec(rng, r * c, 1.0))
}

#[test]
fn vectorize_identity_and_layout() {
    let t = CTensor3::from_vec((1, 1, 1), vec![c(2.0, -1.0)]).unwrap();
    assert_eq!(t.vectorize(), vec![c(2.0, -1.0)]);

    let (a, b, cc, d) = (c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0));
    let t = CTensor3::from_vec((2, 1, 2), vec![a, b, cc, d]).unwrap();
    assert_eq!(t.get(0, 0, 0), a);
    assert_eq!(t.get(1, 0, 0), b);
    assert_eq!(t.get(0, 0, 1), cc);
    assert_eq!(t.get(1, 0, 1), d);
    assert_eq!(t.vectorize(), vec![a, b, cc, d]);
}

#[test]
fn vectorize_round_trip_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = CTensor3::from_vec((3, 4, 2), cnormal_vec(&mut rng, 24, 1.0)).unwrap();
    let back = CTensor3::devectorize((3, 4, 2), &t.vectorize()).unwrap();
    assert_eq!(back, t);
}

#[test]
fn from_vec_rejects_bad_input() {
    assert!(matches!(
        CTensor3::from_vec((2, 2, 2), vec![c(0.0, 0.0); 7]),
        Err(TensorError::LengthMismatch {
            expected: 8,
            got: 7,
            ..
        })
    ));
    assert!(matches!(
        CTensor3::from_vec((1, 1, 2), vec![c(0.0, 0.0), c(f64::NAN, 0.0)]),
        Err(TensorError::NonFinite(1))
    ));
}

#[test]
fn slices_follow_first_index() {
    let t = CTensor3::from_fn((2, 3, 2), |i, j, k| c(i as f64, (j + 3 * k) as f64));
    let s = t.slice_first(1);
    assert_eq!((s.nrows(), s.ncols()), (3, 2));
    assert_eq!(s[(2, 1)], c(1.0, 5.0));
    let mut u = CTensor3::zeros((2, 3, 2));
    u.set_slice_first(1, &s);
    assert_eq!(u.get(1, 2, 1), c(1.0, 5.0));
    assert_eq!(u.get(0, 2, 1), c(0.0, 0.0));
}

#[test]
fn direct_sum_cases() {
    let i2 = CMatrix::identity(2, 2);
    assert_eq!(direct_sum(std::slice::from_ref(&i2)).unwrap(), i2);

    let d = direct_sum(&[
        CMatrix::from_element(1, 1, c(1.0, 0.0)),
        CMatrix::from_element(1, 1, c(2.0, 0.0)),
    ])
    .unwrap();
    assert_eq!(
        d,
        CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]))
    );

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_matrix(&mut rng, 2, 3);
    let b = random_matrix(&mut rng, 2, 3);
    let d = direct_sum(&[a.clone(), b.clone()]).unwrap();
    assert_eq!((d.nrows(), d.ncols()), (4, 6));
    for r in 0..2 {
        for cc in 3..6 {
            assert_eq!(d[(r, cc)], c(0.0, 0.0));
            assert_eq!(d[(r + 2, cc - 3)], c(0.0, 0.0));
        }
    }
    assert_eq!(d.view((0, 0), (2, 3)), a);
    assert_eq!(d.view((2, 3), (2, 3)), b);

    assert!(matches!(direct_sum(&[]), Err(TensorError::EmptyDirectSum)));
}

#[test]
fn direct_sum_acts_blockwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random_matrix(&mut rng, 3, 2);
    let b = random_matrix(&mut rng, 2, 4);
    let u = DVector::from_vec(cnormal_vec(&mut rng, 2, 1.0));
    let v = DVector::from_vec(cnormal_vec(&mut rng, 4, 1.0));
    let stacked = DVector::from_iterator(6, u.iter().chain(v.iter()).copied());
    let out = direct_sum(&[a.clone(), b.clone()]).unwrap() * stacked;
    let expect: Vec<C64> = (&a * &u).iter().chain((&b * &v).iter()).copied().collect();
    for (x, y) in out.iter().zip(&expect) {
        assert!((x - y).norm() < 1e-14);
    }
}

#[test]
fn kron_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let b = random_matrix(&mut rng, 2, 3);
    assert_eq!(kron(&CMatrix::identity(1, 1), &b), b);

    let swap = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let k = kron(&swap, &CMatrix::identity(2, 2));
    let expect = CMatrix::from_fn(4, 4, |r, cc| {
        if (r + 2) % 4 == cc {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    assert_eq!(k, expect);

    let b = random_matrix(&mut rng, 3, 3);
    let x = random_matrix(&mut rng, 3, 2);
    let lhs = vec_matrix(&(&b * &x));
    let rhs = kron(&CMatrix::identity(2, 2), &b) * vec_matrix(&x);
    assert!((lhs - rhs).norm() < 1e-12);
}

#[test]
fn kron_vec_identity_general() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let a = random_matrix(&mut rng, 3, 4);
        let x = random_matrix(&mut rng, 4, 2);
        let b = random_matrix(&mut rng, 2, 5);
        let lhs = vec_matrix(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec_matrix(&x);
        assert!((&lhs - &rhs).norm() <= 1e-12 * lhs.norm());
    }
}

proptest! {
    #[test]
    fn prop_vectorize_bijection(d1 in 1usize..5, d2 in 1usize..5, d3 in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = cnormal_vec(&mut rng, d1 * d2 * d3, 1.0);
        let t = CTensor3::devectorize((d1, d2, d3), &v).unwrap();
        prop_assert_eq!(t.vectorize(), v);
        for k in 0..d3 { for j in 0..d2 { for i in 0..d1 {
            prop_assert_eq!(t.get(i, j, k), t.data()[i + d1 * (j + d2 * k)]);
        }}}
    }

    #[test]
    fn prop_kron_vec(seed in any::<u64>(), m in 1usize..4, n in 1usize..4, p in 1usize..4, q in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, m, n);
        let x = random_matrix(&mut rng, n, p);
        let b = random_matrix(&mut rng, p, q);
        let lhs = vec_matrix(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec_matrix(&x);
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * lhs.norm().max(1e-300));
    }
}
