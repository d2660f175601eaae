//! Hidden-state container, one sequence per file.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! offset  size      field
//! 0       8         magic "SLNKHS01"
//! 8       1         float width in bytes (4 or 8)
//! 9       3         zero padding
//! 12      4         T  (u32) token count
//! 16      4         d  (u32) hidden size
//! 20      4         M  (u32) marker pairs
//! 24      4·M       α  (u32 each) open-marker positions
//! ..      4·M       ω  (u32 each) close-marker positions
//! ..      w·T·d     hidden states, row-major
//! ..      4         N  (u32) candidate names, 0 or M
//! ..      per name  u16 byte length, then UTF-8 "table.column"
//! ```
//!
//! The JSON variant carries the same fields:
//! `{"alpha": [..], "omega": [..], "hidden": [[..], ..], "candidates": [..]}`.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{HeadError, Matrix, TokenSequence};
use crate::schema::QualifiedColumn;
use crate::Scalar;

pub const EXCHANGE_MAGIC: &[u8; 8] = b"SLNKHS01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloatWidth {
    F32,
    F64,
}

impl FloatWidth {
    fn bytes(self) -> u8 {
        match self {
            FloatWidth::F32 => 4,
            FloatWidth::F64 => 8,
        }
    }
}

fn exchange(msg: impl Into<String>) -> HeadError {
    HeadError::Exchange(msg.into())
}

fn to_u32(v: usize, what: &str) -> Result<u32, HeadError> {
    u32::try_from(v).map_err(|_| exchange(format!("{what} {v} exceeds u32")))
}

pub fn write_hidden_states<T: Scalar, W: Write>(
    mut out: W,
    seq: &TokenSequence<T>,
    width: FloatWidth,
) -> Result<(), HeadError> {
    let h = seq.hidden();
    out.write_all(EXCHANGE_MAGIC)?;
    out.write_all(&[width.bytes(), 0, 0, 0])?;
    out.write_u32::<LittleEndian>(to_u32(h.rows(), "token count")?)?;
    out.write_u32::<LittleEndian>(to_u32(h.cols(), "hidden size")?)?;
    out.write_u32::<LittleEndian>(to_u32(seq.pair_count(), "pair count")?)?;
    for &p in seq.alpha().iter().chain(seq.omega()) {
        out.write_u32::<LittleEndian>(to_u32(p, "marker position")?)?;
    }
    for &v in h.as_slice() {
        match width {
            FloatWidth::F32 => out.write_f32::<LittleEndian>(v.to_f32().unwrap_or(f32::NAN))?,
            FloatWidth::F64 => out.write_f64::<LittleEndian>(v.to_f64().unwrap_or(f64::NAN))?,
        }
    }
    out.write_u32::<LittleEndian>(to_u32(seq.candidates().len(), "candidate count")?)?;
    for c in seq.candidates() {
        let name = c.to_string();
        let len = u16::try_from(name.len()).map_err(|_| exchange(format!("candidate name `{name}` too long")))?;
        out.write_u16::<LittleEndian>(len)?;
        out.write_all(name.as_bytes())?;
    }
    Ok(())
}

/// Reads a binary container; values are converted to `T` whatever the
/// stored width.
pub fn read_hidden_states<T: Scalar, R: Read>(mut input: R) -> Result<TokenSequence<T>, HeadError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != EXCHANGE_MAGIC {
        return Err(exchange("bad magic, not a hidden-state container"));
    }
    let mut header = [0u8; 4];
    input.read_exact(&mut header)?;
    let width = match header[0] {
        4 => FloatWidth::F32,
        8 => FloatWidth::F64,
        w => return Err(exchange(format!("unsupported float width {w}"))),
    };
    let t = input.read_u32::<LittleEndian>()? as usize;
    let d = input.read_u32::<LittleEndian>()? as usize;
    let m = input.read_u32::<LittleEndian>()? as usize;
    let mut positions = vec![0usize; 2 * m];
    for p in positions.iter_mut() {
        *p = input.read_u32::<LittleEndian>()? as usize;
    }
    let omega = positions.split_off(m);
    let mut data = Vec::with_capacity(t * d);
    for _ in 0..t * d {
        let v = match width {
            FloatWidth::F32 => T::from_f32(input.read_f32::<LittleEndian>()?),
            FloatWidth::F64 => T::from_f64(input.read_f64::<LittleEndian>()?),
        };
        data.push(v.ok_or_else(|| exchange("hidden value not representable"))?);
    }
    let n = input.read_u32::<LittleEndian>()? as usize;
    let mut candidates = Vec::with_capacity(n);
    for _ in 0..n {
        let len = input.read_u16::<LittleEndian>()? as usize;
        let mut buf = vec![0u8; len];
        input.read_exact(&mut buf)?;
        let name = String::from_utf8(buf).map_err(|_| exchange("candidate name is not UTF-8"))?;
        candidates.push(parse_candidate(&name)?);
    }
    let seq = TokenSequence::from_positions(positions, omega, Matrix::new(t, d, data)?)?;
    if candidates.is_empty() {
        Ok(seq)
    } else {
        seq.with_candidates(candidates)
    }
}

fn parse_candidate(name: &str) -> Result<QualifiedColumn, HeadError> {
    name.parse()
        .map_err(|_| exchange(format!("candidate `{name}` is not table.column")))
}

#[derive(Serialize, Deserialize)]
struct JsonSequence {
    alpha: Vec<usize>,
    omega: Vec<usize>,
    hidden: Vec<Vec<f64>>,
    #[serde(default)]
    candidates: Vec<String>,
}

pub fn write_hidden_states_json<T: Scalar>(seq: &TokenSequence<T>) -> String {
    let h = seq.hidden();
    let record = JsonSequence {
        alpha: seq.alpha().to_vec(),
        omega: seq.omega().to_vec(),
        hidden: (0..h.rows())
            .map(|r| h.row(r).iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
            .collect(),
        candidates: seq.candidates().iter().map(ToString::to_string).collect(),
    };
    serde_json::to_string(&record).expect("plain data serializes")
}

pub fn read_hidden_states_json<T: Scalar>(text: &str) -> Result<TokenSequence<T>, HeadError> {
    let record: JsonSequence = serde_json::from_str(text).map_err(|e| exchange(e.to_string()))?;
    let rows: Vec<Vec<T>> = record
        .hidden
        .iter()
        .map(|r| r.iter().map(|&v| T::from_f64(v).ok_or_else(|| exchange("bad value"))).collect())
        .collect::<Result<_, _>>()?;
    let seq = TokenSequence::from_positions(record.alpha, record.omega, Matrix::from_rows(&rows)?)?;
    if record.candidates.is_empty() {
        return Ok(seq);
    }
    let candidates = record
        .candidates
        .iter()
        .map(|c| parse_candidate(c))
        .collect::<Result<_, _>>()?;
    seq.with_candidates(candidates)
}
