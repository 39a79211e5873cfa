//! GDSC: the binary container for per-frame global descriptors.
//!
//! Layout (little-endian): magic `GDSC`, version byte (1), metric byte
//! (0 = chi-squared, 1 = Euclidean), two reserved zero bytes, `u32` count,
//! `u32` dimension, then `count * dim` `f32` values in frame order.

use std::path::Path;

use crate::descriptor::{DescriptorSet, GlobalDescriptor, Metric};
use crate::error::{Error, Result};
use crate::io::{read_file, write_atomic, ByteReader};

pub const MAGIC: &[u8; 4] = b"GDSC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;

pub fn encode(set: &DescriptorSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + set.len() * set.dim() * 4);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(set.metric().tag());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(set.len() as u32).to_le_bytes());
    out.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for d in set {
        for v in d.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], source_label: &str) -> Result<DescriptorSet> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, "bad magic, expected GDSC"));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let tag = r.u8("metric")?;
    let metric =
        Metric::from_tag(tag).ok_or_else(|| Error::format(5, format!("unknown metric {tag}")))?;
    let reserved = r.take(2, "reserved")?;
    if reserved != [0, 0] {
        return Err(Error::format(6, "reserved bytes must be zero"));
    }
    let count = r.u32("count")? as usize;
    let dim = r.u32("dimension")? as usize;
    if dim == 0 {
        return Err(Error::format(12, "dimension must be positive"));
    }
    let payload = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(8, "count * dim overflows"))?;
    if r.remaining() < payload {
        return Err(Error::format(
            (HEADER_LEN + r.remaining() / (dim * 4) * dim * 4) as u64,
            format!(
                "truncated payload: header declares {count} records of dim {dim}, \
                 file holds {} bytes of {payload}",
                r.remaining()
            ),
        ));
    }
    if r.remaining() > payload {
        return Err(Error::format(
            (HEADER_LEN + payload) as u64,
            "trailing bytes after payload",
        ));
    }
    let mut set = DescriptorSet::new(dim, metric, source_label)?;
    for _ in 0..count {
        let start = r.offset();
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(r.f32("value")?);
        }
        let d = GlobalDescriptor::new(values, metric)
            .map_err(|e| Error::format(start, format!("invalid record: {e}")))?;
        set.push(d)?;
    }
    Ok(set)
}

pub fn write_descriptor_set(set: &DescriptorSet, path: &Path) -> Result<()> {
    write_atomic(path, &encode(set))
}

pub fn read_descriptor_set(path: &Path) -> Result<DescriptorSet> {
    let bytes = read_file(path)?;
    let label = path.display().to_string();
    decode(&bytes, &label).map_err(|e| e.with_path(path))
}
