//! Netpbm (P5/P6) images and the `WTNS` named-tensor container.
//!
//! Container layout, all integers little-endian:
//!
//! ```text
//! "WTNS" | version u8 = 1 | dtype u8 (0 = f32, 1 = f64) | count u32
//! per record: name_len u16 | name (UTF-8) | rank u8 | dims u64 * rank | payload
//! ```

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"WTNS";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Self::F32 => 0,
            Self::F64 => 1,
        }
    }

    fn size(self) -> usize {
        match self {
            Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

pub fn encode_tensors(records: &[(String, Tensor)], dtype: Dtype) -> Result<Vec<u8>> {
    let mut seen = HashSet::new();
    for (name, _) in records {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateName(name.clone()));
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype.code());
    let count = u32::try_from(records.len()).map_err(|_| Error::ShapeMismatch("too many records".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, t) in records {
        let len = u16::try_from(name.len()).map_err(|_| Error::ShapeMismatch(format!("name `{name}` too long")))?;
        let rank = u8::try_from(t.rank()).map_err(|_| Error::ShapeMismatch("rank above 255".into()))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(rank);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match dtype {
            Dtype::F64 => t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Dtype::F32 => t.data().iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let rest = self.buf.len() - self.pos;
        if rest < n {
            return Err(Error::TruncatedPayload { expected: n, found: rest });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decodes a container; values are widened to `f64` and the stored dtype
/// is returned alongside the records.
pub fn decode_tensors(bytes: &[u8]) -> Result<(Vec<(String, Tensor)>, Dtype)> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedPayload { expected: 4, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dtype = match r.u8()? {
        0 => Dtype::F32,
        1 => Dtype::F64,
        other => return Err(Error::MalformedHeader(format!("unknown dtype code {other}"))),
    };
    let count = r.u32()?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::MalformedHeader("record name is not UTF-8".into()))?
            .to_string();
        if !seen.insert(name.clone()) {
            return Err(Error::DuplicateName(name));
        }
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(usize::try_from(r.u64()?).map_err(|_| Error::MalformedHeader("dimension overflow".into()))?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(dtype.size()))
            .ok_or_else(|| Error::MalformedHeader("payload size overflow".into()))?;
        let payload = r.take(n)?;
        let data: Vec<f64> = match dtype {
            Dtype::F64 => payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8"))).collect(),
            Dtype::F32 => {
                payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4")) as f64).collect()
            }
        };
        records.push((name, Tensor::new(shape, data)?));
    }
    Ok((records, dtype))
}

pub fn write_tensors(path: impl AsRef<Path>, records: &[(String, Tensor)], dtype: Dtype) -> Result<()> {
    std::fs::write(path, encode_tensors(records, dtype)?)?;
    Ok(())
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>> {
    Ok(decode_tensors(&std::fs::read(path)?)?.0)
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn header_int(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    skip_space_and_comments(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedHeader(format!("missing or invalid {what}")))
}

/// Decodes a binary PGM (P5) or PPM (P6) into `[C, H, W]` with values
/// `v / 255`.
pub fn decode_pnm(bytes: &[u8]) -> Result<Tensor> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::MalformedHeader("expected P5 or P6 magic".into())),
    };
    let mut pos = 2;
    let width = header_int(bytes, &mut pos, "width")? as usize;
    let height = header_int(bytes, &mut pos, "height")? as usize;
    let maxval = header_int(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader("zero image dimension".into()));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::MalformedHeader("no whitespace after maxval".into())),
    }
    let expected = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    let plane = width * height;
    let mut data = vec![0.0; expected];
    for (i, &v) in payload[..expected].iter().enumerate() {
        let (px, c) = (i / channels, i % channels);
        data[c * plane + px] = v as f64 / 255.0;
    }
    Tensor::new(vec![channels, height, width], data)
}

/// Encodes `[H, W]`, `[1, H, W]` (P5) or `[3, H, W]` (P6), mapping values
/// with `round(clamp(x, 0, 1) * 255)`.
pub fn encode_pnm(img: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = match *img.shape() {
        [h, w] => (1, h, w),
        [c @ (1 | 3), h, w] => (c, h, w),
        _ => return Err(Error::ShapeMismatch(format!("cannot write image of shape {:?}", img.shape()))),
    };
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    let src = img.data();
    for px in 0..plane {
        for ch in 0..c {
            let v = src[ch * plane + px];
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            out.push((v * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Tensor> {
    decode_pnm(&std::fs::read(path)?)
}

pub fn write_image(path: impl AsRef<Path>, img: &Tensor) -> Result<()> {
    std::fs::write(path, encode_pnm(img)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_example() {
        let img = decode_pnm(b"P5\n2 2\n255\n\x00\xff\x80\x40").unwrap();
        assert_eq!(img.shape(), &[1, 2, 2]);
        let want = [0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0];
        assert_eq!(img.data(), &want);
        assert!((img.data()[2] - 0.50196).abs() < 1e-5);
    }

    #[test]
    fn header_comments_and_errors() {
        let img = decode_pnm(b"P5 # made by hand\n# second\n1 1 255\n\x07").unwrap();
        assert_eq!(img.data(), &[7.0 / 255.0]);
        assert!(matches!(decode_pnm(b"P5\n1 1\n65535\n\x00\x00"), Err(Error::UnsupportedMaxval(65535))));
        assert!(matches!(decode_pnm(b"P5\n2 2\n255\n\x00"), Err(Error::TruncatedPayload { expected: 4, found: 1 })));
        assert!(matches!(decode_pnm(b"P2\n1 1\n255\n0"), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn ppm_interleaving() {
        let img = Tensor::from_fn(&[3, 1, 2], |i| i as f64 / 5.0);
        let back = decode_pnm(&encode_pnm(&img).unwrap()).unwrap();
        assert!(back.max_abs_diff(&img) <= 0.5 / 255.0 + 1e-12);
    }

    #[test]
    fn container_errors() {
        let recs = vec![("w".to_string(), Tensor::zeros(&[2])), ("w".to_string(), Tensor::zeros(&[1]))];
        assert!(matches!(encode_tensors(&recs, Dtype::F64), Err(Error::DuplicateName(_))));
        let mut bytes = encode_tensors(&recs[..1], Dtype::F64).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_tensors(&bytes), Err(Error::BadMagic(m)) if &m == b"XTNS"));
        bytes[0] = b'W';
        bytes[4] = 2;
        assert!(matches!(decode_tensors(&bytes), Err(Error::UnsupportedVersion(2))));
        bytes[4] = 1;
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(decode_tensors(cut), Err(Error::TruncatedPayload { .. })));
    }
}
