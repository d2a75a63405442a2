//! Packed binary matrix format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "KDMX" | version: u8 | element width: u8 | rows: u32 | cols: u32
//! | rows x (name length: u16 | UTF-8 name bytes)
//! | rows*cols cells, row-major (f64 for sensors, u32 for profiles)
//! ```

use super::MemoryError;

pub const MAGIC: &[u8; 4] = b"KDMX";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementWidth {
    U32,
    F64,
}

impl ElementWidth {
    fn bytes(self) -> u8 {
        match self {
            ElementWidth::U32 => 4,
            ElementWidth::F64 => 8,
        }
    }
}

pub(crate) struct Decoded<'a> {
    pub row_names: Vec<String>,
    pub cols: usize,
    pub cells: &'a [u8],
}

pub(crate) fn encode(
    row_names: &[String],
    cols: usize,
    width: ElementWidth,
    write_cells: impl FnOnce(&mut Vec<u8>),
) -> Vec<u8> {
    let names_len: usize = row_names.iter().map(|n| 2 + n.len()).sum();
    let mut out = Vec::with_capacity(14 + names_len + row_names.len() * cols * width.bytes() as usize);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(width.bytes());
    out.extend_from_slice(&(row_names.len() as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for name in row_names {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    write_cells(&mut out);
    out
}

pub(crate) fn decode(bytes: &[u8], expected: ElementWidth) -> Result<Decoded<'_>, MemoryError> {
    let corrupt = |msg: &str| MemoryError::CorruptBlob(msg.to_string());
    if bytes.len() < 14 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if bytes[4] != VERSION {
        return Err(corrupt(&format!("unsupported version {}", bytes[4])));
    }
    if bytes[5] != expected.bytes() {
        return Err(corrupt(&format!("element width {} not {}", bytes[5], expected.bytes())));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
    let mut pos = 14;
    let mut row_names = Vec::with_capacity(rows);
    for _ in 0..rows {
        let len_bytes = bytes.get(pos..pos + 2).ok_or_else(|| corrupt("truncated name table"))?;
        let len = u16::from_le_bytes(len_bytes.try_into().expect("2 bytes")) as usize;
        pos += 2;
        let name = bytes.get(pos..pos + len).ok_or_else(|| corrupt("truncated name"))?;
        row_names.push(String::from_utf8(name.to_vec()).map_err(|_| corrupt("non-utf8 name"))?);
        pos += len;
    }
    let cells = &bytes[pos..];
    if cells.len() != rows * cols * expected.bytes() as usize {
        return Err(corrupt("cell section length mismatch"));
    }
    Ok(Decoded { row_names, cols, cells })
}
