//! Versioned JSON checkpoints.
//!
//! Parameter arrays are written as flat row-major lists with 17 significant
//! digits, which round-trips every `f64` exactly; everything else uses
//! serde's default float formatting (also exact).

use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::nn::{Activation, DenseLayer, Matrix, Network};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn ser_f64s<S: Serializer>(values: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut text = String::with_capacity(values.len() * 24 + 2);
    text.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            text.push(',');
        }
        if !v.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite parameter {v}")));
        }
        text.push_str(&fmt_f64(*v));
    }
    text.push(']');
    let raw = RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    #[serde(serialize_with = "ser_f64s")]
    pub weights: Vec<f64>,
    #[serde(serialize_with = "ser_f64s")]
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub input_dim: usize,
    pub layers: Vec<LayerRecord>,
}

impl NetworkRecord {
    pub fn from_network(net: &Network) -> Self {
        Self {
            input_dim: net.input_dim(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation(),
                    weights: l.weights().data().to_vec(),
                    bias: l.bias().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_network(&self) -> Result<Network> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let w = Matrix::from_vec(l.out_dim, l.in_dim, l.weights.clone())
                    .map_err(|e| Error::Checkpoint(format!("layer weights: {e}")))?;
                DenseLayer::from_parts(w, l.bias.clone(), l.activation)
                    .map_err(|e| Error::Checkpoint(format!("layer bias: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Network::from_layers(self.input_dim, layers).map_err(|e| Error::Checkpoint(format!("network: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateRecord {
    #[serde(serialize_with = "ser_f64s")]
    pub weights: Vec<f64>,
    #[serde(serialize_with = "ser_f64s")]
    pub bias: Vec<f64>,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    model_kind: String,
}

/// Parses `text`, checking the version and kind before the full decode.
pub(crate) fn decode<T: serde::de::DeserializeOwned>(text: &str, kind: &str) -> Result<T> {
    let header: Header =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format_version {} is not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    if header.model_kind != kind {
        return Err(Error::Checkpoint(format!(
            "model_kind '{}' where '{kind}' was expected",
            header.model_kind
        )));
    }
    serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))
}

pub(crate) fn encode<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes via a temporary sibling and a rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
