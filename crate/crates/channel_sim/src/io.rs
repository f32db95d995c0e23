use std::path::Path;

use serde_json::json;
use tensor_core::blob::{complex_from_payload, complex_payload, read_blob, write_blob};
use tensor_core::CTensor3;

use crate::error::ChannelError;
use crate::model::ChannelTensor;

/// Writes channels back to back with a header `{dims, count, prior_id, seed}`.
pub fn save_channel_ensemble(
    path: &Path,
    channels: &[ChannelTensor],
    prior_id: &str,
    seed: u64,
) -> Result<(), ChannelError> {
    let first = channels.first().ok_or(ChannelError::EmptyEnsemble)?;
    let dims = first.h.dims();
    let mut payload = Vec::new();
    for c in channels {
        if c.h.dims() != dims {
            return Err(ChannelError::ShapeMismatch(
                "ensemble members differ in shape".into(),
            ));
        }
        payload.extend(complex_payload(c.h.data()));
    }
    let header = json!({
        "format": "channel_ensemble",
        "dims": [dims.0, dims.1, dims.2],
        "count": channels.len(),
        "prior_id": prior_id,
        "seed": seed,
    });
    write_blob(path, &header, &payload)?;
    Ok(())
}

pub fn load_channel_ensemble(
    path: &Path,
) -> Result<(serde_json::Value, Vec<ChannelTensor>), ChannelError> {
    let (header, payload) = read_blob(path)?;
    let bad = |m: &str| ChannelError::ShapeMismatch(m.to_string());
    let d: Vec<usize> = header["dims"]
        .as_array()
        .ok_or_else(|| bad("dims"))?
        .iter()
        .map(|v| v.as_u64().map(|x| x as usize).ok_or_else(|| bad("dims")))
        .collect::<Result<_, _>>()?;
    if d.len() != 3 {
        return Err(bad("dims"));
    }
    let dims = (d[0], d[1], d[2]);
    let z = complex_from_payload(&payload)?;
    let per = dims.0 * dims.1 * dims.2;
    if per == 0 || z.len() % per != 0 {
        return Err(bad("payload length"));
    }
    let channels = z
        .chunks(per)
        .map(|c| CTensor3::from_vec(dims, c.to_vec()).map(|h| ChannelTensor { h }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, channels))
}
