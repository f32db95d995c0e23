use channel_sim::{ChannelTensor, SystemDims};
use encoders::block::assemble_unchecked;
use encoders::{data_gain, data_symbol_offset, LinearEncoder, PilotKind, PilotScheme};
use tensor_core::{CMatrix, CTensor3, C64};

use crate::error::BaselineError;
use crate::lmmse::{ls_detect, pilot_observation, pilot_operator, LmmseEstimator};

#[derive(Debug, Clone)]
pub struct SeparateEstimate {
    pub h: ChannelTensor,
    pub s: Vec<Vec<f64>>,
    /// Re-encoded block `assemble(encode(ŝ_k))`.
    pub x: CTensor3,
}

/// LMMSE channel estimate from the pilots, then least-squares detection of the data
/// symbols and least-squares source decoding. Under superimposed pilots the data part is
/// treated as white interference of variance `(1−ρ)·P·tr(C)/(n_f n_r)` and removed from
/// `Y` by subtracting the estimated pilot contribution before detection.
pub fn separate_estimate(
    y: &CTensor3,
    dims: &SystemDims,
    scheme: &PilotScheme,
    encoders: &[LinearEncoder],
    channel_covariance: &CMatrix,
    noise_var: f64,
) -> Result<SeparateEstimate, BaselineError> {
    let (y_p, pilots) = pilot_observation(y, scheme)?;
    let a = pilot_operator(&pilots, dims.n_r)?;
    let interference = match scheme.kind {
        PilotKind::Superimposed => {
            (1.0 - scheme.pilot_power_fraction) * dims.power_p * channel_covariance.trace().re
                / (dims.n_f * dims.n_r) as f64
        }
        _ => 0.0,
    };
    let est = LmmseEstimator::new(channel_covariance.clone(), a, noise_var + interference)?;
    let h = est.estimate(&y_p, dims.channel_shape())?;

    let off = data_symbol_offset(scheme);
    let t_data = scheme.t_data(dims.t_s);
    let mut y_d = CTensor3::from_fn((dims.n_f, t_data, dims.n_r), |f, t, r| y.get(f, off + t, r));
    if scheme.kind == PilotKind::Superimposed {
        let a = C64::new(scheme.pilot_power_fraction.sqrt(), 0.0);
        for f in 0..dims.n_f {
            let p = &scheme.pilots[f] * a;
            let contrib = p * h.h.slice_first(f);
            y_d.set_slice_first(f, &(y_d.slice_first(f) - contrib));
        }
    }
    let x_d = ls_detect(&y_d, &h)?;
    let gain = data_gain(scheme);
    let mut s = Vec::with_capacity(encoders.len());
    let mut codewords = Vec::with_capacity(encoders.len());
    for (k, enc) in encoders.iter().enumerate() {
        let cw = CMatrix::from_fn(dims.n_f, t_data, |f, t| x_d.get(f, t, k) / gain);
        let sk = enc.decode_ls(&cw)?;
        codewords.push(enc.encode_unchecked(&sk)?);
        s.push(sk);
    }
    let x = assemble_unchecked(&codewords, scheme, dims.t_s)?;
    Ok(SeparateEstimate { h, s, x })
}
