use channel_sim::{ChannelTensor, SystemDims, TransmitTensor};
use encoders::{LinearEncoder, PilotScheme};
use pfm_decoder::{LikelihoodModel, TransmitModel};
use tensor_core::rng::{cnormal_vec, normal_vec, stream_rng};
use tensor_core::{real_to_complex_score, CMatrix, CTensor3, RealIso, C64};

fn rand_tensor(dims: (usize, usize, usize), seed: u64) -> CTensor3 {
    let mut rng = stream_rng(seed, 0);
    CTensor3::from_vec(dims, cnormal_vec(&mut rng, dims.0 * dims.1 * dims.2, 1.0)).unwrap()
}

fn siso(x: f64, y: f64, noise_var: f64) -> LikelihoodModel {
    let dims = SystemDims::new(1, 1, 1, 1);
    let xt = TransmitTensor {
        x: CTensor3::from_vec((1, 1, 1), vec![C64::new(x, 0.0)]).unwrap(),
    };
    let yt = CTensor3::from_vec((1, 1, 1), vec![C64::new(y, 0.0)]).unwrap();
    LikelihoodModel::new(dims, yt, TransmitModel::Known(xt), noise_var).unwrap()
}

fn channel(v: C64) -> ChannelTensor {
    ChannelTensor {
        h: CTensor3::from_vec((1, 1, 1), vec![v]).unwrap(),
    }
}

fn encoded_model(
    scheme: PilotScheme,
    seed: u64,
) -> (LikelihoodModel, ChannelTensor, Vec<Vec<f64>>) {
    let mut dims = SystemDims::new(2, 2, 3, 4);
    dims.noise_var = 0.7;
    let t_data = scheme.t_data(dims.t_s);
    let encs: Vec<LinearEncoder> = (0..2)
        .map(|k| LinearEncoder::random_orthonormal(2, t_data, 3, 1.0, 3.0, seed + k).unwrap())
        .collect();
    let y = rand_tensor(dims.receive_shape(), seed + 10);
    let h = ChannelTensor {
        h: rand_tensor(dims.channel_shape(), seed + 11),
    };
    let mut rng = stream_rng(seed, 5);
    let s = vec![normal_vec(&mut rng, 3), normal_vec(&mut rng, 3)];
    let lm = LikelihoodModel::new(
        dims,
        y,
        TransmitModel::Encoded {
            encoders: encs,
            scheme,
        },
        0.7,
    )
    .unwrap();
    (lm, h, s)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += eps;
            m[i] -= eps;
            (f(&p) - f(&m)) / (2.0 * eps)
        })
        .collect()
}

#[test]
fn siso_score_hand_value() {
    let lm = siso(1.0, 2.0, 1.0);
    let g = lm.score_h(&channel(C64::new(1.0, 0.0)), &[]).unwrap();
    let w = real_to_complex_score(&RealIso::from_stacked(&g).unwrap());
    assert!((w[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn scalar_density_oracle() {
    let lm = siso(0.8, 1.3, 0.5);
    let h = C64::new(0.4, -0.9);
    let y = C64::new(1.3, 0.0);
    let r = y - 0.8 * h;
    let density = (-r.norm_sqr() / 0.5).exp() / (std::f64::consts::PI * 0.5);
    let ll = lm.log_likelihood(&channel(h), &[]).unwrap();
    assert!((ll - density.ln()).abs() < 1e-13);
}

#[test]
fn perfect_fit_gives_constant_and_zero_scores() {
    let (lm, h, s) = encoded_model(PilotScheme::orthogonal(0.5, 2, 4, 2, 1.0, 3).unwrap(), 1);
    let x = lm.transmit_block(&s).unwrap();
    let y = lm.y.sub(&lm.residual(&x, &h.h));
    let fit = LikelihoodModel::new(lm.dims, y, lm.model.clone(), lm.noise_var).unwrap();
    let n = fit.y.len() as f64;
    let ll = fit.log_likelihood(&h, &s).unwrap();
    assert!((ll + n * (std::f64::consts::PI * 0.7).ln()).abs() < 1e-10);
    let sc = fit.scores(&h.h, &s).unwrap();
    assert!(sc.h.iter().all(|v| v.abs() < 1e-12));
    assert!(sc.s.iter().flatten().all(|v| v.abs() < 1e-12));
}

#[test]
fn doubling_residual_quadruples_penalty() {
    let lm = siso(1.0, 2.0, 0.3);
    let c = -(std::f64::consts::PI * 0.3).ln();
    let p1 = c - lm
        .log_likelihood(&channel(C64::new(1.5, 0.0)), &[])
        .unwrap();
    let p2 = c - lm
        .log_likelihood(&channel(C64::new(1.0, 0.0)), &[])
        .unwrap();
    assert!((p2 - 4.0 * p1).abs() < 1e-12);
}

#[test]
fn channel_score_matches_finite_difference() {
    for scheme in [
        PilotScheme::none(),
        PilotScheme::orthogonal(0.5, 2, 4, 2, 1.0, 3).unwrap(),
        PilotScheme::superimposed(0.4, 2, 4, 2, 1.0, 3).unwrap(),
    ] {
        let (lm, h, s) = encoded_model(scheme, 2);
        let shape = h.h.dims();
        let f = |v: &[f64]| {
            lm.log_likelihood(&ChannelTensor::from_real(shape, v).unwrap(), &s)
                .unwrap()
        };
        let fd = central_diff(f, &h.to_real(), 1e-5);
        let g = lm.score_h(&h, &s).unwrap();
        assert!(rel_err(&g, &fd) < 1e-6, "{}", rel_err(&g, &fd));
    }
}

#[test]
fn source_score_matches_finite_difference() {
    for scheme in [
        PilotScheme::none(),
        PilotScheme::orthogonal(0.5, 2, 4, 2, 1.0, 3).unwrap(),
        PilotScheme::superimposed(0.4, 2, 4, 2, 1.0, 3).unwrap(),
    ] {
        let (lm, h, s) = encoded_model(scheme, 4);
        for k in 0..2 {
            let f = |v: &[f64]| {
                let mut ss = s.clone();
                ss[k] = v.to_vec();
                lm.log_likelihood(&h, &ss).unwrap()
            };
            let fd = central_diff(f, &s[k], 1e-5);
            let g = lm.score_s(&h, &s, k).unwrap();
            assert!(rel_err(&g, &fd) < 1e-6, "user {k}: {}", rel_err(&g, &fd));
        }
    }
}

#[test]
fn identity_encoder_score_is_column_x_score() {
    let mut dims = SystemDims::new(2, 2, 3, 2);
    dims.noise_var = 0.5;
    let encs: Vec<LinearEncoder> = (0..2)
        .map(|_| LinearEncoder::new(CMatrix::identity(4, 4), 1.0, 8, 2, 2, 1.0).unwrap())
        .collect();
    let y = rand_tensor(dims.receive_shape(), 20);
    let h = rand_tensor(dims.channel_shape(), 21);
    let mut rng = stream_rng(22, 0);
    let s = vec![normal_vec(&mut rng, 8), normal_vec(&mut rng, 8)];
    let lm = LikelihoodModel::new(
        dims,
        y.clone(),
        TransmitModel::Encoded {
            encoders: encs,
            scheme: PilotScheme::none(),
        },
        0.5,
    )
    .unwrap();
    let x = lm.transmit_block(&s).unwrap();
    let r = lm.residual(&x, &h);
    let sc = lm.scores(&h, &s).unwrap();
    for k in 0..2 {
        for t in 0..2 {
            for f in 0..2 {
                let mut gx = C64::new(0.0, 0.0);
                for rr in 0..3 {
                    gx += r.get(f, t, rr) * h.get(f, k, rr).conj() / 0.5;
                }
                let j = f + 2 * t;
                assert!((sc.s[k][2 * j] - 2.0 * gx.re).abs() < 1e-12);
                assert!((sc.s[k][2 * j + 1] - 2.0 * gx.im).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn likelihood_invariant_under_factor_permutation() {
    let mut dims = SystemDims::new(3, 3, 4, 5);
    dims.noise_var = 0.9;
    let x = rand_tensor(dims.transmit_shape(), 30);
    let h = rand_tensor(dims.channel_shape(), 31);
    let y = rand_tensor(dims.receive_shape(), 32);
    let perm = [2usize, 0, 1];
    let xp = CTensor3::from_fn(x.dims(), |f, t, k| x.get(f, t, perm[k]));
    let hp = CTensor3::from_fn(h.dims(), |f, k, r| h.get(f, perm[k], r));
    let ll = |x: CTensor3, h: CTensor3| {
        LikelihoodModel::new(
            dims,
            y.clone(),
            TransmitModel::Known(TransmitTensor { x }),
            0.9,
        )
        .unwrap()
        .log_likelihood(&ChannelTensor { h }, &[])
        .unwrap()
    };
    let a = ll(x, h);
    let b = ll(xp, hp);
    assert!((a - b).abs() <= 1e-12 * a.abs());
}

#[test]
fn shape_mismatch_is_rejected() {
    let dims = SystemDims::new(2, 2, 3, 4);
    let y = rand_tensor((2, 4, 2), 1);
    let x = TransmitTensor {
        x: rand_tensor(dims.transmit_shape(), 2),
    };
    assert!(LikelihoodModel::new(dims, y, TransmitModel::Known(x.clone()), 1.0).is_err());
    let lm = LikelihoodModel::new(
        dims,
        rand_tensor(dims.receive_shape(), 3),
        TransmitModel::Known(x),
        1.0,
    )
    .unwrap();
    let bad = ChannelTensor {
        h: rand_tensor((2, 2, 2), 4),
    };
    assert!(lm.log_likelihood(&bad, &[]).is_err());
}
