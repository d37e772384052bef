//! Wire format: one JSON object per line, UTF-8, with a `tag` naming the
//! message and `v` carrying the protocol version. Reals are written with 17
//! significant digits so every value survives the round trip bit-for-bit.

use std::fmt::Write as _;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::privacy::Variant;

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Handshake {
    pub n: usize,
    pub k: usize,
    /// Alice's feature dimension; Bob needs it for `C_p`.
    pub p: usize,
    pub variant: Variant,
    /// Public seed of the row permutation applied before blocking, if any.
    pub shuffle_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// 1-based projection index.
    pub k: usize,
    /// 1-based inclusive row range `[start, end]`.
    pub rows: (usize, usize),
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variance {
    pub value: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams {
    pub sigma: f64,
    pub w2: f64,
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolMessage {
    Handshake(Handshake),
    Projection(Projection),
    Variance(Variance),
    NoiseParams(NoiseParams),
    End,
}

impl ProtocolMessage {
    pub fn tag(&self) -> &'static str {
        match self {
            ProtocolMessage::Handshake(_) => "handshake",
            ProtocolMessage::Projection(_) => "projection",
            ProtocolMessage::Variance(_) => "variance",
            ProtocolMessage::NoiseParams(_) => "noise-params",
            ProtocolMessage::End => "end",
        }
    }
}

/// Formats a finite real with 17 significant digits.
pub fn format_real(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!("cannot encode non-finite value {v}")));
    }
    Ok(format!("{v:.16e}"))
}

/// Encodes a message as one line of JSON, without the trailing newline.
pub fn encode_message(m: &ProtocolMessage) -> Result<String> {
    let mut s = String::with_capacity(64);
    write!(s, "{{\"tag\":\"{}\",\"v\":{PROTOCOL_VERSION}", m.tag()).unwrap();
    match m {
        ProtocolMessage::Handshake(h) => {
            write!(s, ",\"n\":{},\"k\":{},\"p\":{},\"variant\":\"{}\"", h.n, h.k, h.p, h.variant)
                .unwrap();
            if let Some(seed) = h.shuffle_seed {
                write!(s, ",\"shuffle_seed\":{seed}").unwrap();
            }
        }
        ProtocolMessage::Projection(p) => {
            write!(s, ",\"k\":{},\"rows\":[{},{}],\"values\":[", p.k, p.rows.0, p.rows.1).unwrap();
            for (i, v) in p.values.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(&format_real(*v)?);
            }
            s.push(']');
        }
        ProtocolMessage::Variance(v) => {
            write!(
                s,
                ",\"value\":{},\"epsilon\":{}",
                format_real(v.value)?,
                format_real(v.epsilon)?
            )
            .unwrap();
        }
        ProtocolMessage::NoiseParams(np) => {
            write!(
                s,
                ",\"sigma\":{},\"w2\":{},\"epsilon\":{},\"delta\":{}",
                format_real(np.sigma)?,
                format_real(np.w2)?,
                format_real(np.epsilon)?,
                format_real(np.delta)?
            )
            .unwrap();
        }
        ProtocolMessage::End => {}
    }
    s.push('}');
    Ok(s)
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| Error::Decode(format!("missing field `{name}`")))
}

fn get_usize(obj: &Map<String, Value>, name: &str) -> Result<usize> {
    field(obj, name)?
        .as_u64()
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| Error::Decode(format!("field `{name}` is not a non-negative integer")))
}

fn get_real(obj: &Map<String, Value>, name: &str) -> Result<f64> {
    field(obj, name)?
        .as_f64()
        .ok_or_else(|| Error::Decode(format!("field `{name}` is not a number")))
}

/// Parses one line produced by [`encode_message`].
pub fn decode_message(line: &str) -> Result<ProtocolMessage> {
    let value: Value = serde_json::from_str(line.trim_end_matches(['\r', '\n']))
        .map_err(|e| Error::Decode(format!("malformed JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Decode("message is not a JSON object".into()))?;
    let version = field(obj, "v")?
        .as_u64()
        .ok_or_else(|| Error::Decode("field `v` is not an integer".into()))?;
    if version != PROTOCOL_VERSION {
        return Err(Error::Decode(format!(
            "unsupported protocol version {version}, expected {PROTOCOL_VERSION}"
        )));
    }
    let tag = field(obj, "tag")?
        .as_str()
        .ok_or_else(|| Error::Decode("field `tag` is not a string".into()))?;
    match tag {
        "handshake" => {
            let variant = field(obj, "variant")?
                .as_str()
                .ok_or_else(|| Error::Decode("field `variant` is not a string".into()))?
                .parse::<Variant>()
                .map_err(|e| Error::Decode(e.to_string()))?;
            let shuffle_seed = match obj.get("shuffle_seed") {
                None | Some(Value::Null) => None,
                Some(v) => Some(
                    v.as_u64()
                        .ok_or_else(|| Error::Decode("field `shuffle_seed` is not a u64".into()))?,
                ),
            };
            Ok(ProtocolMessage::Handshake(Handshake {
                n: get_usize(obj, "n")?,
                k: get_usize(obj, "k")?,
                p: get_usize(obj, "p")?,
                variant,
                shuffle_seed,
            }))
        }
        "projection" => {
            let rows = field(obj, "rows")?
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| Error::Decode("field `rows` must be [start, end]".into()))?;
            let bound = |v: &Value| {
                v.as_u64()
                    .and_then(|x| usize::try_from(x).ok())
                    .ok_or_else(|| Error::Decode("row bound is not an integer".into()))
            };
            let values = field(obj, "values")?
                .as_array()
                .ok_or_else(|| Error::Decode("field `values` is not an array".into()))?
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| Error::Decode("projection value is not a number".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ProtocolMessage::Projection(Projection {
                k: get_usize(obj, "k")?,
                rows: (bound(&rows[0])?, bound(&rows[1])?),
                values,
            }))
        }
        "variance" => Ok(ProtocolMessage::Variance(Variance {
            value: get_real(obj, "value")?,
            epsilon: get_real(obj, "epsilon")?,
        })),
        "noise-params" => Ok(ProtocolMessage::NoiseParams(NoiseParams {
            sigma: get_real(obj, "sigma")?,
            w2: get_real(obj, "w2")?,
            epsilon: get_real(obj, "epsilon")?,
            delta: get_real(obj, "delta")?,
        })),
        "end" => Ok(ProtocolMessage::End),
        other => Err(Error::Decode(format!("unknown tag {other:?}"))),
    }
}
