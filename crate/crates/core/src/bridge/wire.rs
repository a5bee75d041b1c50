//! Length-prefixed frames shared with the external model process.
//!
//! A frame is a little-endian `u32` header length, a UTF-8 header of
//! `key=value` lines, then the raw little-endian `f32` payload of every
//! tensor named in the header, in header order. Tensor lines read
//! `tensor=<name>:<d0>,<d1>,...`. Values escape `\` as `\\` and newlines
//! as `\n`.

use std::io::{Read, Write};

use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;
/// Headers and payloads beyond these sizes are rejected before allocation.
pub const MAX_HEADER_BYTES: usize = 1 << 24;
pub const MAX_PAYLOAD_FLOATS: usize = 1 << 28;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("frame too large: {0}")]
    TooLarge(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            dims,
            data,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    pub fields: Vec<(String, String)>,
    pub tensors: Vec<Tensor>,
}

impl Frame {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.fields.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, WireError> {
        self.get(key).ok_or_else(|| WireError::Malformed(format!("missing field {key}")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, WireError> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| WireError::Malformed(format!("field {key}: cannot parse {raw:?}")))
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut header = String::new();
        for (k, v) in &self.fields {
            check_key(k)?;
            header.push_str(k);
            header.push('=');
            header.push_str(&escape(v));
            header.push('\n');
        }
        for t in &self.tensors {
            check_name(&t.name)?;
            let expected: usize = t.dims.iter().product();
            if expected != t.data.len() {
                return Err(WireError::Malformed(format!(
                    "tensor {} has {} values for dims {:?}",
                    t.name,
                    t.data.len(),
                    t.dims
                )));
            }
            let dims: Vec<String> = t.dims.iter().map(usize::to_string).collect();
            header.push_str(&format!("tensor={}:{}\n", t.name, dims.join(",")));
        }
        if header.len() > MAX_HEADER_BYTES {
            return Err(WireError::TooLarge(format!("header of {} bytes", header.len())));
        }
        let payload: usize = self.tensors.iter().map(|t| t.data.len()).sum();
        let mut out = Vec::with_capacity(4 + header.len() + 4 * payload);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), WireError> {
        w.write_all(&self.encode()?)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, WireError> {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let len = u32::from_le_bytes(len) as usize;
        if len > MAX_HEADER_BYTES {
            return Err(WireError::TooLarge(format!("header of {len} bytes")));
        }
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)?;
        let header = String::from_utf8(header).map_err(|_| WireError::Malformed("header is not UTF-8".into()))?;
        let mut frame = Frame::default();
        let mut specs = Vec::new();
        let mut total = 0usize;
        for line in header.split_terminator('\n') {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| WireError::Malformed(format!("header line without '=': {line:?}")))?;
            if k == "tensor" {
                let (name, dims) = parse_tensor_spec(v)?;
                let n = dims
                    .iter()
                    .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                    .filter(|&n| n <= MAX_PAYLOAD_FLOATS)
                    .ok_or_else(|| WireError::TooLarge(format!("tensor {name} dims {dims:?}")))?;
                total = total
                    .checked_add(n)
                    .filter(|&t| t <= MAX_PAYLOAD_FLOATS)
                    .ok_or_else(|| WireError::TooLarge("payload".into()))?;
                specs.push((name, dims, n));
            } else {
                frame.fields.push((k.to_string(), unescape(v)?));
            }
        }
        for (name, dims, n) in specs {
            let mut bytes = vec![0u8; 4 * n];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            frame.tensors.push(Tensor { name, dims, data });
        }
        Ok(frame)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut cursor = bytes;
        let frame = Self::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(WireError::Malformed(format!("{} trailing bytes", cursor.len())));
        }
        Ok(frame)
    }
}

fn check_key(k: &str) -> Result<(), WireError> {
    if k.is_empty() || k == "tensor" || k.contains(['=', '\n']) {
        return Err(WireError::Malformed(format!("invalid field name {k:?}")));
    }
    Ok(())
}

fn check_name(n: &str) -> Result<(), WireError> {
    if n.is_empty() || n.contains([':', '\n', '\\']) {
        return Err(WireError::Malformed(format!("invalid tensor name {n:?}")));
    }
    Ok(())
}

fn parse_tensor_spec(v: &str) -> Result<(String, Vec<usize>), WireError> {
    let (name, dims) = v
        .rsplit_once(':')
        .ok_or_else(|| WireError::Malformed(format!("tensor spec {v:?}")))?;
    check_name(name)?;
    let dims = if dims.is_empty() {
        Vec::new()
    } else {
        dims.split(',')
            .map(|d| d.parse().map_err(|_| WireError::Malformed(format!("tensor {name}: bad dim {d:?}"))))
            .collect::<Result<_, _>>()?
    };
    Ok((name.to_string(), dims))
}

fn escape(v: &str) -> String {
    v.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(v: &str) -> Result<String, WireError> {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            other => return Err(WireError::Malformed(format!("bad escape \\{other:?}"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut f = Frame::default();
        f.push("op", "predict-noise");
        f.push("prompt", "a \\ weird\nprompt = yes");
        f.tensors.push(Tensor::new("latent.0", vec![2, 3, 1], vec![1.0, -2.5, 0.0, f32::MIN_POSITIVE, 3.25, -0.0]));
        f.tensors.push(Tensor::new("empty", vec![0, 4], vec![]));
        let bytes = f.encode().unwrap();
        assert_eq!(Frame::decode(&bytes).unwrap(), f);
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(Frame::decode(&[1, 0]).is_err());
        let mut bytes = 5u32.to_le_bytes().to_vec();
        bytes.extend_from_slice(b"nokey");
        assert!(matches!(Frame::decode(&bytes), Err(WireError::Malformed(_))));
        let mut huge = u32::MAX.to_le_bytes().to_vec();
        huge.push(0);
        assert!(matches!(Frame::decode(&huge), Err(WireError::TooLarge(_))));
        let mut f = Frame::default();
        f.tensors.push(Tensor::new("x", vec![2], vec![1.0]));
        assert!(f.encode().is_err());
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let mut f = Frame::default();
        f.tensors.push(Tensor::new("x", vec![4], vec![1.0; 4]));
        let bytes = f.encode().unwrap();
        assert!(Frame::decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
