use encoders::linear::decomplexify;
use encoders::{
    assemble_block, complexify, data_gain, source_energy, subspace_source_prior, EncoderError,
    LinearEncoder, PilotKind, PilotScheme,
};
use nalgebra::DVector;
use proptest::prelude::*;
use tensor_core::rng::{normal_vec, stream_rng};
use tensor_core::{CMatrix, C64};

fn identity_encoder() -> LinearEncoder {
    LinearEncoder::new(CMatrix::identity(4, 4), 1.0, 8, 2, 2, 1.0).unwrap()
}

#[test]
fn complexify_pairs_and_pads() {
    assert_eq!(
        complexify(&[1.0, 2.0, 3.0]),
        vec![C64::new(1.0, 2.0), C64::new(3.0, 0.0)]
    );
    assert_eq!(
        decomplexify(&complexify(&[1.0, 2.0, 3.0]), 3),
        vec![1.0, 2.0, 3.0]
    );
}

#[test]
fn identity_encoder_cases() {
    let enc = identity_encoder();
    let mut s = vec![0.0; 8];
    s[0] = 1.0;
    let x = enc.encode(&s).unwrap();
    assert_eq!(x[(0, 0)], C64::new(1.0, 0.0));
    assert_eq!(x.iter().filter(|z| z.norm() > 0.0).count(), 1);

    let x = enc.encode(&[0.0; 8]).unwrap();
    assert!(x.iter().all(|z| z.norm() == 0.0));

    let j = enc.jacobian();
    for col in 0..8 {
        for row in 0..4 {
            let want = if row == col / 2 {
                if col % 2 == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 1.0)
                }
            } else {
                C64::new(0.0, 0.0)
            };
            assert_eq!(j[(row, col)], want);
        }
    }
}

#[test]
fn encoder_validation() {
    assert!(matches!(
        LinearEncoder::new(CMatrix::zeros(4, 2), 1.0, 4, 2, 2, 1.0),
        Err(EncoderError::RankDeficient)
    ));
    assert!(LinearEncoder::new(CMatrix::identity(4, 4), 1.0, 8, 2, 3, 1.0).is_err());
    let enc = identity_encoder();
    assert!(matches!(
        enc.encode(&[1.0; 3]),
        Err(EncoderError::LengthMismatch {
            expected: 8,
            got: 3
        })
    ));
    let big = vec![10.0; 8];
    assert!(matches!(
        enc.encode(&big),
        Err(EncoderError::PowerOverflow { .. })
    ));
    assert!(LinearEncoder::random_orthonormal(2, 2, 10, 1.0, 10.0, 0).is_err());
}

#[test]
fn monte_carlo_power_meets_budget() {
    let m = 12;
    let enc = LinearEncoder::random_orthonormal(4, 6, m, 1.0, m as f64, 3).unwrap();
    let mut rng = stream_rng(4, 0);
    let n = 10_000;
    let mean: f64 = (0..n)
        .map(|_| {
            enc.encode_unchecked(&normal_vec(&mut rng, m))
                .unwrap()
                .norm_squared()
        })
        .sum::<f64>()
        / n as f64;
    assert!(
        (mean / enc.budget() - 1.0).abs() < 0.02,
        "mean power {mean}"
    );
}

#[test]
fn jacobian_matches_finite_differences() {
    let enc = LinearEncoder::random_orthonormal(2, 3, 5, 1.0, 5.0, 9).unwrap();
    let mut rng = stream_rng(2, 0);
    let s = normal_vec(&mut rng, 5);
    let shift = CMatrix::from_fn(2, 3, |i, j| C64::new(i as f64, -(j as f64)));
    let j = enc.jacobian();
    let h = 1e-6;
    for col in 0..5 {
        let mut sp = s.clone();
        let mut sm = s.clone();
        sp[col] += h;
        sm[col] -= h;
        let fd = ((enc.encode_unchecked(&sp).unwrap() + &shift)
            - (enc.encode_unchecked(&sm).unwrap() + &shift))
            / C64::new(2.0 * h, 0.0);
        for row in 0..6 {
            let want = j[(row, col)];
            assert!((fd.as_slice()[row] - want).norm() <= 1e-6 * want.norm().max(1e-3));
        }
    }
}

#[test]
fn pseudo_inverse_round_trip() {
    for m in [6, 7, 24] {
        let enc = LinearEncoder::random_orthonormal(4, 3, m, 1.0, m as f64, m as u64).unwrap();
        let mut rng = stream_rng(m as u64, 1);
        let s = normal_vec(&mut rng, m);
        let back = enc.decode_ls(&enc.encode_unchecked(&s).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&s) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn encoder_file_round_trip() {
    let enc = LinearEncoder::random_orthonormal(2, 3, 6, 1.0, 6.0, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ctb");
    enc.save(&path).unwrap();
    assert_eq!(LinearEncoder::load(&path).unwrap(), enc);
}

#[test]
fn pilot_lengths() {
    let none = PilotScheme::orthogonal(0.0, 2, 6, 2, 1.0, 0).unwrap();
    assert_eq!(none.kind, PilotKind::None);
    assert_eq!(none, PilotScheme::none());

    let op = PilotScheme::orthogonal(0.5, 74, 14, 4, 1.0, 0).unwrap();
    assert_eq!(op.pilot_symbols(), 7);
    assert_eq!(op.t_data(14), 7);

    assert!(matches!(
        PilotScheme::orthogonal(0.3, 2, 6, 1, 1.0, 0),
        Err(EncoderError::NonIntegerPilotLength(_))
    ));
    assert!(PilotScheme::orthogonal(1.0 / 6.0, 2, 6, 2, 1.0, 0).is_err());
    assert!(PilotScheme::superimposed(0.0, 2, 6, 2, 1.0, 0).is_err());
}

#[test]
fn orthogonal_pilots_are_orthogonal() {
    let op = PilotScheme::orthogonal(0.5, 3, 8, 4, 2.0, 5).unwrap();
    for p in &op.pilots {
        let gram = p.adjoint() * p;
        for k in 0..4 {
            for j in 0..4 {
                if k != j {
                    assert!(gram[(k, j)].norm() < 1e-12);
                }
            }
        }
    }
    assert_eq!(op, PilotScheme::orthogonal(0.5, 3, 8, 4, 2.0, 5).unwrap());
}

#[test]
fn orthogonal_block_layout_and_power() {
    let (n_f, t_s, n_t, p) = (2, 6, 2, 1.0);
    let op = PilotScheme::orthogonal(0.5, n_f, t_s, n_t, p, 1).unwrap();
    let cw: Vec<CMatrix> = (0..n_t)
        .map(|k| CMatrix::from_element(n_f, 3, C64::new(k as f64 + 1.0, 0.0)))
        .collect();
    let x = assemble_block(&cw, &op, t_s, 10.0).unwrap();
    for k in 0..n_t {
        for f in 0..n_f {
            for t in 0..3 {
                assert_eq!(x.x.get(f, t, k), op.pilots[f][(t, k)]);
                assert_eq!(x.x.get(f, 3 + t, k), C64::new(k as f64 + 1.0, 0.0));
            }
        }
        let pilot_energy: f64 = op.pilots.iter().map(|m| m.column(k).norm_squared()).sum();
        assert!((pilot_energy - (n_f * 3) as f64 * p).abs() < 1e-12);
    }
}

#[test]
fn alpha_zero_block_equals_none() {
    let cw = vec![CMatrix::from_element(2, 6, C64::new(0.5, 0.5)); 2];
    let a = assemble_block(&cw, &PilotScheme::none(), 6, 1.0).unwrap();
    let b = assemble_block(
        &cw,
        &PilotScheme::orthogonal(0.0, 2, 6, 2, 1.0, 0).unwrap(),
        6,
        1.0,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn superimposed_power_in_expectation() {
    let (n_f, t_s, n_t, p) = (4, 6, 2, 1.0);
    let sp = PilotScheme::superimposed(0.5, n_f, t_s, n_t, p, 3).unwrap();
    assert!((data_gain(&sp) - 0.5f64.sqrt()).abs() < 1e-15);
    let m = 16;
    let encs: Vec<LinearEncoder> = (0..n_t)
        .map(|k| LinearEncoder::random_orthonormal(n_f, t_s, m, p, m as f64, k as u64).unwrap())
        .collect();
    let mut rng = stream_rng(6, 0);
    let n = 10_000;
    let mut total = vec![0.0; n_t];
    for _ in 0..n {
        let cw: Vec<CMatrix> = encs
            .iter()
            .map(|e| e.encode_unchecked(&normal_vec(&mut rng, m)).unwrap())
            .collect();
        let x = encoders::block::assemble_unchecked(&cw, &sp, t_s).unwrap();
        let tx = encoders::TransmitTensor { x };
        for (k, acc) in total.iter_mut().enumerate() {
            *acc += tx.user_energy(k);
        }
    }
    for acc in total {
        let mean = acc / n as f64;
        assert!((mean / (n_f * t_s) as f64 - 1.0).abs() < 0.02, "{mean}");
    }
}

#[test]
fn budget_violation_detected() {
    let cw = vec![CMatrix::from_element(1, 2, C64::new(3.0, 0.0))];
    assert!(matches!(
        assemble_block(&cw, &PilotScheme::none(), 2, 1.0),
        Err(EncoderError::BudgetViolation { user: 0, .. })
    ));
    let wrong = vec![CMatrix::zeros(1, 3)];
    assert!(assemble_block(&wrong, &PilotScheme::none(), 2, 1.0).is_err());
}

#[test]
fn subspace_source_prior_shape() {
    let prior = subspace_source_prior(12, 6, 0.5, 1.0, 4).unwrap();
    let c = &prior.components()[0];
    assert_eq!(c.rank(), 6);
    assert!((c.mean().norm_squared() - 12.0).abs() < 1e-9);
    assert!((c.basis().transpose() * c.mean()).norm() < 1e-10);
    assert!((source_energy(&prior) - 15.0).abs() < 1e-9);
    let full = subspace_source_prior(4, 4, 1.0, 1.0, 0).unwrap();
    assert!(full.mean().norm() < 1e-12);
    assert!(subspace_source_prior(4, 5, 1.0, 1.0, 0).is_err());
}

proptest! {
    #[test]
    fn prop_encode_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let enc = LinearEncoder::random_orthonormal(2, 4, 7, 1.0, 7.0, seed).unwrap();
        let mut rng = stream_rng(seed, 1);
        let s = normal_vec(&mut rng, 7);
        let t = normal_vec(&mut rng, 7);
        let comb: Vec<f64> = s.iter().zip(&t).map(|(x, y)| a * x + y).collect();
        let lhs = enc.encode_unchecked(&comb).unwrap();
        let rhs = enc.encode_unchecked(&s).unwrap() * C64::new(a, 0.0) + enc.encode_unchecked(&t).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
        let v = enc.jacobian() * DVector::from_vec(s.iter().map(|&x| C64::new(x, 0.0)).collect());
        prop_assert!((v - DVector::from_column_slice(enc.encode_unchecked(&s).unwrap().as_slice())).norm() < 1e-12);
    }
}
