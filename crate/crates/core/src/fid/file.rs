//! S2RF feature files: `b"S2RF"`, little-endian `u32` version (1), `u32` n,
//! `u32` d, then `n * d` little-endian `f32` values in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureMatrix, FidError};

pub const MAGIC: [u8; 4] = *b"S2RF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

pub fn encode_features(feats: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * feats.values().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(feats.n() as u32).to_le_bytes());
    out.extend_from_slice(&(feats.d() as u32).to_le_bytes());
    for v in feats.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix, FidError> {
    if bytes.len() < HEADER_LEN {
        return Err(FidError::SizeMismatch {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    if bytes[..4] != MAGIC {
        return Err(FidError::BadMagic);
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != VERSION {
        return Err(FidError::UnknownVersion(version));
    }
    let (n, d) = (word(8) as u64, word(12) as u64);
    let expected = HEADER_LEN as u64 + 4 * n * d;
    if bytes.len() as u64 != expected {
        return Err(FidError::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    FeatureMatrix::new(n as usize, d as usize, values)
}

pub fn write_feature_file(path: impl AsRef<Path>, feats: &FeatureMatrix) -> Result<(), FidError> {
    let mut file = std::fs::File::create(path.as_ref())?;
    file.write_all(&encode_features(feats))?;
    file.flush()?;
    Ok(())
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureMatrix, FidError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    decode_features(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(n: u32, d: u32) -> Vec<u8> {
        let mut b = MAGIC.to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&n.to_le_bytes());
        b.extend_from_slice(&d.to_le_bytes());
        b
    }

    #[test]
    fn layout_is_bit_exact() {
        let m = FeatureMatrix::new(2, 2, vec![1.0, -2.5, 0.0, 3.25]).unwrap();
        let bytes = encode_features(&m);
        assert_eq!(&bytes[..4], &[0x53, 0x32, 0x52, 0x46]);
        assert_eq!(bytes.len(), 16 + 4 * 4);
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[20..24], &(-2.5f32).to_le_bytes());
    }

    #[test]
    fn bad_magic() {
        let mut b = header(1, 1);
        b[0] = b'X';
        b.extend_from_slice(&0f32.to_le_bytes());
        assert!(matches!(decode_features(&b), Err(FidError::BadMagic)));
        assert!(decode_features(&b).unwrap_err().to_string().contains("bad magic"));
    }

    #[test]
    fn size_mismatch_and_version() {
        let mut b = header(3, 4);
        b.extend_from_slice(&[0u8; 4 * 11]);
        let err = decode_features(&b).unwrap_err();
        assert!(err.to_string().contains("size mismatch"), "{err}");
        let mut b = header(1, 1);
        b[4] = 2;
        b.extend_from_slice(&[0u8; 4]);
        assert!(matches!(decode_features(&b), Err(FidError::UnknownVersion(2))));
        assert!(matches!(decode_features(&b[..7]), Err(FidError::SizeMismatch { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.s2rf");
        let values: Vec<f32> = (0..5 * 64).map(|i| (i as f32 * 0.37).sin() * 1e3).collect();
        let m = FeatureMatrix::new(5, 64, values).unwrap();
        write_feature_file(&path, &m).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 16 + 4 * 5 * 64);
        let back = read_feature_file(&path).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(n in 1usize..6, d in 1usize..9, seed in any::<u32>()) {
            let values: Vec<f32> = (0..n * d)
                .map(|i| f32::from_bits((seed.wrapping_mul(2654435761).wrapping_add(i as u32 * 40503)) & 0x7f7f_ffff))
                .collect();
            let m = FeatureMatrix::new(n, d, values).unwrap();
            let back = decode_features(&encode_features(&m)).unwrap();
            prop_assert_eq!(
                back.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
