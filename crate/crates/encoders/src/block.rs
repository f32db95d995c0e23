use channel_sim::TransmitTensor;
use tensor_core::{CMatrix, CTensor3, C64};

use crate::error::EncoderError;
use crate::linear::OVERFLOW_FACTOR;
use crate::pilots::{PilotKind, PilotScheme};

/// Amplitude applied to data symbols: `√(1−ρ)` for superimposed pilots, else 1.
pub fn data_gain(scheme: &PilotScheme) -> f64 {
    match scheme.kind {
        PilotKind::Superimposed => (1.0 - scheme.pilot_power_fraction).sqrt(),
        _ => 1.0,
    }
}

/// Index of the first data symbol within the block.
pub fn data_symbol_offset(scheme: &PilotScheme) -> usize {
    scheme.pilot_symbols()
}

/// Places per-user codewords (`n_f × t_data`) and pilots into an `n_f × t_s × n_t` block.
/// Each transmitter's energy must stay within `OVERFLOW_FACTOR·n_f·t_s·P`.
pub fn assemble_block(
    codewords: &[CMatrix],
    scheme: &PilotScheme,
    t_s: usize,
    power_p: f64,
) -> Result<TransmitTensor, EncoderError> {
    let x = assemble_unchecked(codewords, scheme, t_s)?;
    let (n_f, _, n_t) = x.dims();
    let limit = OVERFLOW_FACTOR * (n_f * t_s) as f64 * power_p;
    let tx = TransmitTensor { x };
    for k in 0..n_t {
        let energy = tx.user_energy(k);
        if energy > limit {
            return Err(EncoderError::BudgetViolation {
                user: k,
                energy,
                limit,
            });
        }
    }
    Ok(tx)
}

/// [`assemble_block`] without the budget check.
pub fn assemble_unchecked(
    codewords: &[CMatrix],
    scheme: &PilotScheme,
    t_s: usize,
) -> Result<CTensor3, EncoderError> {
    let n_t = codewords.len();
    if n_t == 0 {
        return Err(EncoderError::InvalidScheme("no codewords".into()));
    }
    let n_f = codewords[0].nrows();
    let t_data = scheme.t_data(t_s);
    for c in codewords {
        if c.nrows() != n_f || c.ncols() != t_data {
            return Err(EncoderError::InvalidScheme(format!(
                "codeword is {}x{}, scheme needs {n_f}x{t_data}",
                c.nrows(),
                c.ncols()
            )));
        }
    }
    if scheme.kind != PilotKind::None
        && (scheme.pilots.len() != n_f || scheme.pilots[0].ncols() != n_t)
    {
        return Err(EncoderError::InvalidScheme(
            "pilot matrices do not match block shape".into(),
        ));
    }
    let off = data_symbol_offset(scheme);
    let g = C64::new(data_gain(scheme), 0.0);
    let mut x = CTensor3::zeros((n_f, t_s, n_t));
    for (k, c) in codewords.iter().enumerate() {
        for t in 0..t_data {
            for f in 0..n_f {
                x.set(f, off + t, k, c[(f, t)] * g);
            }
        }
    }
    match scheme.kind {
        PilotKind::None => {}
        PilotKind::Orthogonal => {
            for (f, p) in scheme.pilots.iter().enumerate() {
                for k in 0..n_t {
                    for t in 0..p.nrows() {
                        x.set(f, t, k, p[(t, k)]);
                    }
                }
            }
        }
        PilotKind::Superimposed => {
            let a = C64::new(scheme.pilot_power_fraction.sqrt(), 0.0);
            for (f, p) in scheme.pilots.iter().enumerate() {
                for k in 0..n_t {
                    for t in 0..t_s {
                        let v = x.get(f, t, k) + p[(t, k)] * a;
                        x.set(f, t, k, v);
                    }
                }
            }
        }
    }
    Ok(x)
}
