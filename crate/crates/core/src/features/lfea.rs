//! LFEA: the binary container for per-image local features.
//!
//! Layout (little-endian): magic `LFEA`, version byte (1), then for each
//! image a `u32` image id, a `u32` feature count, and `count` records of
//! `f32 x`, `f32 y`, 32 descriptor bytes.

use std::path::Path;

use super::{BinaryDescriptor, FeatureSet, LocalFeature};
use crate::error::{Error, Result};
use crate::io::{read_file, write_atomic, ByteReader};

pub const MAGIC: &[u8; 4] = b"LFEA";
pub const VERSION: u8 = 1;
const RECORD_LEN: usize = 4 + 4 + BinaryDescriptor::BYTES;

pub fn encode(sets: &[FeatureSet]) -> Vec<u8> {
    let total: usize = sets.iter().map(|s| 8 + s.len() * RECORD_LEN).sum();
    let mut out = Vec::with_capacity(5 + total);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for s in sets {
        out.extend_from_slice(&s.image_id.to_le_bytes());
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        for f in &s.features {
            out.extend_from_slice(&f.x.to_le_bytes());
            out.extend_from_slice(&f.y.to_le_bytes());
            out.extend_from_slice(&f.descriptor.to_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<FeatureSet>> {
    let mut r = ByteReader::new(bytes);
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, expected LFEA"));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let mut sets = Vec::new();
    while r.remaining() > 0 {
        let image_id = r.u32("image id")?;
        let count_at = r.offset();
        let count = r.u32("feature count")? as usize;
        if count.saturating_mul(RECORD_LEN) > r.remaining() {
            return Err(Error::format(
                count_at,
                format!(
                    "image {image_id} declares {count} features but only {} bytes remain",
                    r.remaining()
                ),
            ));
        }
        let mut features = Vec::with_capacity(count);
        for _ in 0..count {
            let at = r.offset();
            let x = r.f32("x")?;
            let y = r.f32("y")?;
            if !x.is_finite() || !y.is_finite() || x < 0.0 || y < 0.0 {
                return Err(Error::format(at, format!("invalid keypoint ({x}, {y})")));
            }
            let raw: &[u8; 32] = r.take(32, "descriptor")?.try_into().unwrap();
            features.push(LocalFeature {
                x,
                y,
                descriptor: BinaryDescriptor::from_bytes(raw),
            });
        }
        sets.push(FeatureSet::new(image_id, features));
    }
    Ok(sets)
}

pub fn write_feature_sets(sets: &[FeatureSet], path: &Path) -> Result<()> {
    write_atomic(path, &encode(sets))
}

pub fn read_feature_sets(path: &Path) -> Result<Vec<FeatureSet>> {
    decode(&read_file(path)?).map_err(|e| e.with_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feature(x: f32, y: f32, fill: u8) -> LocalFeature {
        LocalFeature {
            x,
            y,
            descriptor: BinaryDescriptor::from_bytes(&[fill; 32]),
        }
    }

    #[test]
    fn layout() {
        let sets = vec![FeatureSet::new(7, vec![feature(1.5, 2.0, 0xAB)])];
        let b = encode(&sets);
        assert_eq!(&b[..4], b"LFEA");
        assert_eq!(b[4], 1);
        assert_eq!(&b[5..9], &7u32.to_le_bytes());
        assert_eq!(&b[9..13], &1u32.to_le_bytes());
        assert_eq!(&b[13..17], &1.5f32.to_le_bytes());
        assert_eq!(b[21], 0xAB);
        assert_eq!(b.len(), 5 + 8 + 40);
    }

    #[test]
    fn truncation_reports_offset() {
        let sets = vec![
            FeatureSet::new(0, vec![feature(1.0, 1.0, 1)]),
            FeatureSet::new(1, vec![feature(2.0, 2.0, 2), feature(3.0, 3.0, 3)]),
        ];
        let mut b = encode(&sets);
        b.truncate(b.len() - 1);
        match decode(&b) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 5 + 48 + 4),
            other => panic!("{other:?}"),
        }
        assert!(decode(b"LFEB\x01").is_err());
        assert!(decode(b"LFEA\x02").is_err());
        assert_eq!(decode(b"LFEA\x01").unwrap(), vec![]);
    }

    proptest! {
        #[test]
        fn roundtrip(
            sets in prop::collection::vec(
                (any::<u32>(), prop::collection::vec((0.0f32..2000.0, 0.0f32..2000.0, any::<[u8; 32]>()), 0..12)),
                0..6)
        ) {
            let sets: Vec<FeatureSet> = sets.into_iter().map(|(id, fs)| FeatureSet::new(
                id,
                fs.into_iter().map(|(x, y, d)| LocalFeature { x, y, descriptor: BinaryDescriptor::from_bytes(&d) }).collect(),
            )).collect();
            prop_assert_eq!(decode(&encode(&sets)).unwrap(), sets);
        }
    }
}
