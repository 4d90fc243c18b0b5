//! Binary feature container.
//!
//! Layout (little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `HADF` |
//! | 2     | version (1) |
//! | 2     | flags (0) |
//! | 4     | D, u32 |
//! | 8     | N, u64 |
//! | 4·N·D | rows, f32, row-major |
//! | 8     | metadata length in bytes, u64 |
//! | …     | metadata, JSON lines, one object per row |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureMatrix, RowMeta};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"HADF";
pub const FEATURE_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 8;

pub fn write_features(m: &FeatureMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(m, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn encode<W: Write>(m: &FeatureMatrix, w: &mut W) -> std::io::Result<()> {
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes())?;
    w.write_all(&0u16.to_le_bytes())?;
    w.write_all(&(m.dim() as u32).to_le_bytes())?;
    w.write_all(&(m.len() as u64).to_le_bytes())?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut meta = Vec::new();
    for row in m.meta() {
        serde_json::to_writer(&mut meta, row)?;
        meta.push(b'\n');
    }
    w.write_all(&(meta.len() as u64).to_le_bytes())?;
    w.write_all(&meta)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes, &path.display().to_string())
}

/// Like [`read_features`], additionally requiring the declared dimension.
pub fn read_features_expect_dim(path: &Path, dim: usize) -> Result<FeatureMatrix> {
    let m = read_features(path)?;
    if m.dim() != dim {
        return Err(Error::DimMismatch {
            expected: dim,
            actual: m.dim(),
        });
    }
    Ok(m)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Truncated(format!("{what}: need {n} bytes at offset {pos}, file has {}", bytes.len())))?;
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

pub(crate) fn decode(bytes: &[u8], name: &str) -> Result<FeatureMatrix> {
    if bytes.len() < 4 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::BadMagic(name.to_string()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated("header".into()));
    }
    let mut pos = 4;
    let version = u16::from_le_bytes(take(bytes, &mut pos, 2, "version")?.try_into().unwrap());
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let _flags = u16::from_le_bytes(take(bytes, &mut pos, 2, "flags")?.try_into().unwrap());
    let dim = u32::from_le_bytes(take(bytes, &mut pos, 4, "dim")?.try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(take(bytes, &mut pos, 8, "count")?.try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::DimMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let payload_len = n
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Truncated("row count overflows".into()))?;
    let payload = take(bytes, &mut pos, payload_len, "rows")?;
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let meta_len = u64::from_le_bytes(take(bytes, &mut pos, 8, "metadata length")?.try_into().unwrap()) as usize;
    let meta_bytes = take(bytes, &mut pos, meta_len, "metadata")?;
    let text = std::str::from_utf8(meta_bytes).map_err(|e| Error::MalformedMetadata(e.to_string()))?;
    let meta: Vec<RowMeta> = text
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::MalformedMetadata(e.to_string())))
        .collect::<Result<_>>()?;
    if meta.len() != n {
        return Err(Error::MalformedMetadata(format!(
            "{} metadata rows for {n} feature rows",
            meta.len()
        )));
    }
    if pos != bytes.len() {
        return Err(Error::MalformedMetadata(format!("{} trailing bytes", bytes.len() - pos)));
    }
    FeatureMatrix::new(dim, data, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::test_util::*;
    use crate::features::{Label, TissueClass};
    use proptest::prelude::*;

    fn to_bytes(m: &FeatureMatrix) -> Vec<u8> {
        let mut v = Vec::new();
        encode(m, &mut v).unwrap();
        v
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.hadf");
        let m = matrix(&[&[1.5, -0.0], &[f32::MIN_POSITIVE, 3.0e38]], TissueClass::NearOe, Label::Anomalous);
        write_features(&m, &p).unwrap();
        let back = read_features(&p).unwrap();
        assert_eq!(back.meta(), m.meta());
        let bits = |m: &FeatureMatrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
        assert!(matches!(read_features_expect_dim(&p, 3), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let m = FeatureMatrix::empty(16);
        let b = to_bytes(&m);
        assert_eq!(b.len(), HEADER_LEN + 8);
        let back = decode(&b, "x").unwrap();
        assert_eq!(back.dim(), 16);
        assert!(back.is_empty());
    }

    #[test]
    fn truncated_payload() {
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32; 3]).collect();
        let refs: Vec<&[f32]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix(&refs, TissueClass::Eval, Label::Unknown);
        let b = to_bytes(&m);
        // keep header + 9 rows
        let cut = &b[..HEADER_LEN + 9 * 3 * 4];
        assert!(matches!(decode(cut, "x"), Err(Error::Truncated(_))));
    }

    #[test]
    fn bad_magic_and_version() {
        let m = FeatureMatrix::empty(2);
        let mut b = to_bytes(&m);
        b[0] = b'X';
        assert!(matches!(decode(&b, "x"), Err(Error::BadMagic(_))));
        let mut b = to_bytes(&m);
        b[4] = 9;
        assert!(matches!(decode(&b, "x"), Err(Error::UnsupportedVersion(9))));
        assert!(matches!(decode(b"HA", "x"), Err(Error::BadMagic(_))));
    }

    #[test]
    fn metadata_count_mismatch() {
        let m = matrix(&[&[1.0], &[2.0]], TissueClass::Eval, Label::Unknown);
        let mut b = to_bytes(&m);
        // drop the last metadata line, fix up the length prefix
        let meta_start = HEADER_LEN + 2 * 4 + 8;
        let text = String::from_utf8(b[meta_start..].to_vec()).unwrap();
        let first = text.lines().next().unwrap().to_string() + "\n";
        b.truncate(meta_start - 8);
        b.extend((first.len() as u64).to_le_bytes());
        b.extend(first.as_bytes());
        assert!(matches!(decode(&b, "x"), Err(Error::MalformedMetadata(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn roundtrip_bit_exact(dim in 1usize..6, rows in proptest::collection::vec(any::<u32>(), 0..40)) {
            let n = rows.len() / dim;
            let data: Vec<f32> = rows[..n * dim]
                .iter()
                .map(|&b| f32::from_bits(b))
                .map(|v| if v.is_finite() { v } else { -0.0 })
                .collect();
            let meta = (0..n).map(|i| meta("slide,with \"quotes\"", i, TissueClass::FarOe, Label::Anomalous)).collect();
            let m = FeatureMatrix::new(dim, data, meta).unwrap();
            let back = decode(&to_bytes(&m), "x").unwrap();
            prop_assert_eq!(back.meta(), m.meta());
            let a: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = m.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
