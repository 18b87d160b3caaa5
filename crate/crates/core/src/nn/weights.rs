//! Weights container.
//!
//! Layout: the 8-byte magic `HELIODET`, a version byte, a little-endian
//! `u32` header length, a UTF-8 JSON header (input shape, layer specs,
//! parameter shapes, free-form metadata), then every parameter tensor as raw
//! little-endian f32 in declaration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerSpec, Network};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 8] = b"HELIODET";
const VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    params: Vec<ParamEntry>,
    meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    layer: usize,
    name: String,
    shape: Vec<usize>,
}

/// Serializes the network and an arbitrary metadata document.
pub fn encode_weights(net: &Network, meta: &serde_json::Value) -> Vec<u8> {
    let params = net
        .layers()
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            l.params().iter().map(move |p| ParamEntry {
                layer: i,
                name: p.name.to_string(),
                shape: p.value.shape().to_vec(),
            })
        })
        .collect();
    let header = Header {
        input_shape: net.input_shape().to_vec(),
        layers: net.specs(),
        params,
        meta: meta.clone(),
    };
    let text = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(13 + text.len() + 4 * net.param_count());
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(&text);
    for p in net.params() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn bad(offset: usize, message: impl Into<String>) -> Error {
    Error::Decode {
        offset,
        message: message.into(),
    }
}

/// Rebuilds a network and its metadata from [`encode_weights`] output.
pub fn decode_weights(bytes: &[u8]) -> Result<(Network, serde_json::Value)> {
    if bytes.len() < 13 || &bytes[..8] != WEIGHTS_MAGIC {
        return Err(bad(0, "not a weights file (bad magic)"));
    }
    if bytes[8] != VERSION {
        return Err(bad(8, format!("unsupported weights version {}", bytes[8])));
    }
    let len = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let body = 13usize
        .checked_add(len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| bad(9, "header length exceeds file"))?;
    let header: Header =
        serde_json::from_slice(&bytes[13..body]).map_err(|e| bad(13, format!("bad header: {e}")))?;
    let mut net = Network::build(&header.input_shape, &header.layers, 0)?;
    let declared: Vec<(usize, Vec<usize>)> = header.params.iter().map(|p| (p.layer, p.shape.clone())).collect();
    let actual: Vec<(usize, Vec<usize>)> = net
        .layers()
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.params().iter().map(move |p| (i, p.value.shape().to_vec())))
        .collect();
    if declared != actual {
        return Err(bad(13, "parameter table does not match the layer specs"));
    }
    let blob = &bytes[body..];
    if blob.len() != 4 * net.param_count() {
        return Err(bad(
            body,
            format!("expected {} parameter bytes, found {}", 4 * net.param_count(), blob.len()),
        ));
    }
    let values: Vec<f32> = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    net.set_flat_params(&values)?;
    Ok((net, header.meta))
}

pub fn save_weights(path: impl AsRef<Path>, net: &Network, meta: &serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_weights(net, meta)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(Network, serde_json::Value)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}
