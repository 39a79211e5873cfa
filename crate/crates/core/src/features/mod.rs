//! Local binary features and image-level geometric verification.

mod extract;
pub mod lfea;
mod matching;

pub use extract::{describe, extract_local_features, ExtractParams, PATCH_RADIUS};
pub use matching::{
    geometric_inliers, hamming_match, image_likelihoods, match_score, Correspondence,
    RansacParams, LIKELIHOOD_FLOOR,
};

/// Default cap on features per image.
pub const MAX_FEATURES: usize = 500;

/// A 256-bit binary descriptor stored as four little-endian words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BinaryDescriptor(pub [u64; 4]);

impl BinaryDescriptor {
    pub const BYTES: usize = 32;

    pub fn from_bytes(b: &[u8; 32]) -> Self {
        let mut w = [0u64; 4];
        for (i, chunk) in b.chunks_exact(8).enumerate() {
            w[i] = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        Self(w)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (i, w) in self.0.iter().enumerate() {
            out[i * 8..i * 8 + 8].copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    #[inline]
    pub fn hamming(&self, other: &Self) -> u32 {
        (self.0[0] ^ other.0[0]).count_ones()
            + (self.0[1] ^ other.0[1]).count_ones()
            + (self.0[2] ^ other.0[2]).count_ones()
            + (self.0[3] ^ other.0[3]).count_ones()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i / 64] ^= 1 << (i % 64);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFeature {
    pub x: f32,
    pub y: f32,
    pub descriptor: BinaryDescriptor,
}

/// All local features of one image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub image_id: u32,
    pub features: Vec<LocalFeature>,
}

impl FeatureSet {
    pub fn new(image_id: u32, features: Vec<LocalFeature>) -> Self {
        Self { image_id, features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}
