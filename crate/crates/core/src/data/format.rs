//! The `PSEG` binary container.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "PSEG"
//! 4       1         kind: b'F' feature map, b'M' mask, b'W' weights
//! 5       2         version, u16 LE (currently 1)
//! 7       1         rank r
//! 8       4*r       dims, u32 LE each
//! 8+4r    ...       payload
//! ```
//!
//! Feature payloads are f64 LE in row-major order, H×W×D. Mask payloads are
//! u16 LE, H×W. A weights file has rank 1 with `dims[0]` = tensor count, and
//! its payload is that many records of `rank u8, dims u32 LE…, f64 LE data`.

use std::path::Path;

use crate::data::MaskMap;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::prototype::FeatureMap;

pub const MAGIC: &[u8; 4] = b"PSEG";
pub const KIND_FEATURE: u8 = b'F';
pub const KIND_MASK: u8 = b'M';
pub const KIND_WEIGHTS: u8 = b'W';
pub const FORMAT_VERSION: u16 = 1;

fn write_header(out: &mut Vec<u8>, kind: u8, dims: &[usize]) -> Result<()> {
    out.extend_from_slice(MAGIC);
    out.push(kind);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    write_dims(out, dims)
}

fn write_dims(out: &mut Vec<u8>, dims: &[usize]) -> Result<()> {
    let rank = u8::try_from(dims.len())
        .map_err(|_| Error::ShapeMismatch(format!("rank {} too large", dims.len())))?;
    out.push(rank);
    for &d in dims {
        let d = u32::try_from(d)
            .map_err(|_| Error::ShapeMismatch(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.pos,
                format!(
                    "truncated: need {n} bytes for {what}, {} left",
                    self.bytes.len() - self.pos
                ),
            )),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn dims(&mut self) -> Result<Vec<usize>> {
        let rank = self.u8("rank")?;
        (0..rank).map(|_| Ok(self.u32("dimension")? as usize)).collect()
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let start = self.pos;
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::format(start, "payload size overflows"))?,
            "f64 payload",
        )?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(start + 8 * i, "non-finite value"));
        }
        Ok(values)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.pos,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn read_header(r: &mut Reader<'_>, kind: u8) -> Result<Vec<usize>> {
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, "bad magic, not a PSEG file"));
    }
    let found = r.u8("kind")?;
    if found != kind {
        return Err(Error::format(
            4,
            format!(
                "expected kind '{}', found '{}'",
                kind as char,
                found.escape_ascii()
            ),
        ));
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format(5, format!("unsupported version {version}")));
    }
    r.dims()
}

fn element_count(dims: &[usize], offset: usize) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(offset, "element count overflows"))
}

pub fn encode_feature_map(f: &FeatureMap) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + f.data().len() * 8);
    write_header(&mut out, KIND_FEATURE, f.tensor().shape())?;
    for v in f.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    let mut r = Reader::new(bytes);
    let dims = read_header(&mut r, KIND_FEATURE)?;
    if dims.len() != 3 || dims[2] == 0 {
        return Err(Error::format(7, format!("feature map dims {dims:?}, need H×W×D")));
    }
    let n = element_count(&dims, 8)?;
    let data = r.f64s(n)?;
    r.finish()?;
    FeatureMap::new(dims[0], dims[1], dims[2], data)
}

pub fn encode_mask(m: &MaskMap) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + m.labels.len() * 2);
    write_header(&mut out, KIND_MASK, &[m.height, m.width])?;
    for l in &m.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_mask(bytes: &[u8]) -> Result<MaskMap> {
    let mut r = Reader::new(bytes);
    let dims = read_header(&mut r, KIND_MASK)?;
    if dims.len() != 2 {
        return Err(Error::format(7, format!("mask dims {dims:?}, need H×W")));
    }
    let n = element_count(&dims, 8)?;
    let payload = r.take(
        n.checked_mul(2)
            .ok_or_else(|| Error::format(8, "payload size overflows"))?,
        "u16 payload",
    )?;
    let labels = payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    r.finish()?;
    MaskMap::new(dims[0], dims[1], labels)
}

pub fn encode_tensor_list(tensors: &[Tensor]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_header(&mut out, KIND_WEIGHTS, &[tensors.len()])?;
    for t in tensors {
        write_dims(&mut out, t.shape())?;
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_tensor_list(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut r = Reader::new(bytes);
    let dims = read_header(&mut r, KIND_WEIGHTS)?;
    if dims.len() != 1 {
        return Err(Error::format(7, format!("weights header dims {dims:?}, need [count]")));
    }
    let mut tensors = Vec::with_capacity(dims[0].min(1024));
    for _ in 0..dims[0] {
        let at = r.pos;
        let shape = r.dims()?;
        let n = element_count(&shape, at)?;
        let data = r.f64s(n)?;
        tensors.push(Tensor::new(shape, data).map_err(|e| Error::format(at, e.to_string()))?);
    }
    r.finish()?;
    Ok(tensors)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    decode_feature_map(&read_file(path.as_ref())?)
}

pub fn save_feature_map(f: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_feature_map(f)?)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskMap> {
    decode_mask(&read_file(path.as_ref())?)
}

pub fn save_mask(m: &MaskMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_mask(m)?)
}

pub fn load_tensor_list(path: impl AsRef<Path>) -> Result<Vec<Tensor>> {
    decode_tensor_list(&read_file(path.as_ref())?)
}

pub fn save_tensor_list(tensors: &[Tensor], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_tensor_list(tensors)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn random_map(rng: &mut SeededRng, h: usize, w: usize, d: usize) -> FeatureMap {
        FeatureMap::new(h, w, d, (0..h * w * d).map(|_| rng.normal()).collect()).unwrap()
    }

    #[test]
    fn header_layout_is_exact() {
        let m = MaskMap::new(1, 2, vec![3, 258]).unwrap();
        let bytes = encode_mask(&m).unwrap();
        assert_eq!(
            bytes,
            vec![
                b'P', b'S', b'E', b'G', b'M', 1, 0, 2, 1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 2, 1
            ]
        );
    }

    #[test]
    fn feature_round_trip_via_file() {
        let mut rng = SeededRng::new(8);
        let f = random_map(&mut rng, 8, 8, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pseg");
        save_feature_map(&f, &path).unwrap();
        let g = load_feature_map(&path).unwrap();
        assert_eq!(f.data().len(), g.data().len());
        for (a, b) in f.data().iter().zip(g.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_reports_offset() {
        let mut rng = SeededRng::new(9);
        let bytes = encode_feature_map(&random_map(&mut rng, 2, 2, 2)).unwrap();
        let err = decode_feature_map(&bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 20),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            decode_feature_map(&bytes[..6]),
            Err(Error::Format { offset: 5, .. })
        ));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let m = MaskMap::filled(2, 2, 1);
        let bytes = encode_mask(&m).unwrap();
        assert!(matches!(
            decode_feature_map(&bytes),
            Err(Error::Format { offset: 4, .. })
        ));
        let mut rng = SeededRng::new(1);
        let bytes = encode_feature_map(&random_map(&mut rng, 1, 1, 1)).unwrap();
        assert!(matches!(decode_mask(&bytes), Err(Error::Format { .. })));
        assert!(matches!(decode_tensor_list(&bytes), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_magic_and_trailing_bytes() {
        assert!(matches!(
            decode_mask(b"NOPE\x4d\x01\x00\x00"),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut bytes = encode_mask(&MaskMap::filled(1, 1, 0)).unwrap();
        bytes.push(0);
        assert!(matches!(decode_mask(&bytes), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn save_load_save_is_byte_stable(
            seed in any::<u64>(), h in 1usize..6, w in 1usize..6, d in 1usize..5,
        ) {
            let mut rng = SeededRng::new(seed);
            let f = random_map(&mut rng, h, w, d);
            let bytes = encode_feature_map(&f).unwrap();
            prop_assert_eq!(&encode_feature_map(&decode_feature_map(&bytes).unwrap()).unwrap(), &bytes);

            let m = MaskMap::new(h, w, (0..h * w).map(|_| rng.below(9) as u16).collect()).unwrap();
            let bytes = encode_mask(&m).unwrap();
            prop_assert_eq!(&encode_mask(&decode_mask(&bytes).unwrap()).unwrap(), &bytes);

            let ts = vec![
                Tensor::new(vec![h, d], (0..h * d).map(|_| rng.normal()).collect()).unwrap(),
                Tensor::new(vec![w], (0..w).map(|_| rng.normal()).collect()).unwrap(),
            ];
            let bytes = encode_tensor_list(&ts).unwrap();
            let back = decode_tensor_list(&bytes).unwrap();
            prop_assert_eq!(&back, &ts);
            prop_assert_eq!(&encode_tensor_list(&back).unwrap(), &bytes);
        }
    }
}
