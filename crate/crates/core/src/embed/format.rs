//! CLBE embedding files (binary and text) and CLBT transform files.
//!
//! Binary CLBE layout, all integers little-endian:
//!
//! ```text
//! "CLBE" | u16 version=1 | u8 flags=0 | u8 reserved | u64 n | u32 d
//! n × (u32 byte length, UTF-8 key)
//! n·d × f32, row-major
//! ```
//!
//! Text CLBE is a `n d` header line followed by `key v1 … vd` lines.
//!
//! CLBT layout:
//!
//! ```text
//! "CLBT" | u16 version=1 | u32 out_dim | u32 in_dim | u8 method | u8 orthogonal
//! f64 objective | u64 n_train | out_dim·in_dim × f64, row-major
//! ```
//!
//! Readers load the whole file and validate it before returning anything.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EmbeddingMatrix;
use crate::error::{Error, Position, Result};
use crate::fit::{FitMethod, TransformMatrix};
use crate::linalg::Matrix;

pub const CLBE_MAGIC: &[u8; 4] = b"CLBE";
pub const CLBE_VERSION: u16 = 1;
pub const CLBT_MAGIC: &[u8; 4] = b"CLBT";
pub const CLBT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingFormat {
    #[default]
    Binary,
    Text,
}

impl EmbeddingFormat {
    /// Binary if the data starts with the CLBE magic, text otherwise.
    pub fn detect(head: &[u8]) -> Self {
        if head.starts_with(CLBE_MAGIC) {
            EmbeddingFormat::Binary
        } else {
            EmbeddingFormat::Text
        }
    }
}

impl std::str::FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(EmbeddingFormat::Binary),
            "text" => Ok(EmbeddingFormat::Text),
            other => Err(Error::InvalidInput(format!(
                "unknown format {other:?} (expected text or binary)"
            ))),
        }
    }
}

/// Reads an embedding file; `None` sniffs the format from the magic bytes.
pub fn read_embeddings(path: impl AsRef<Path>, format: Option<EmbeddingFormat>) -> Result<EmbeddingMatrix> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let format = format.unwrap_or_else(|| EmbeddingFormat::detect(&buf));
    read_embeddings_from(&buf, format)
}

pub fn read_embeddings_from(bytes: &[u8], format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    match format {
        EmbeddingFormat::Binary => read_binary(bytes),
        EmbeddingFormat::Text => read_text(bytes),
    }
}

pub fn write_embeddings(path: impl AsRef<Path>, emb: &EmbeddingMatrix, format: EmbeddingFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embeddings_to(&mut w, emb, format)?;
    w.flush()?;
    Ok(())
}

/// Values are narrowed to `f32` on write.
pub fn write_embeddings_to<W: Write>(w: &mut W, emb: &EmbeddingMatrix, format: EmbeddingFormat) -> Result<()> {
    match format {
        EmbeddingFormat::Binary => {
            w.write_all(CLBE_MAGIC)?;
            w.write_all(&CLBE_VERSION.to_le_bytes())?;
            w.write_all(&[0u8, 0u8])?;
            w.write_all(&(emb.len() as u64).to_le_bytes())?;
            w.write_all(&dim_u32(emb.dim())?.to_le_bytes())?;
            for k in emb.keys() {
                w.write_all(&(k.len() as u32).to_le_bytes())?;
                w.write_all(k.as_bytes())?;
            }
            for &v in emb.vectors().as_slice() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        EmbeddingFormat::Text => {
            writeln!(w, "{} {}", emb.len(), emb.dim())?;
            for (k, row) in emb.keys().iter().zip(emb.vectors().row_iter()) {
                w.write_all(k.as_bytes())?;
                for &v in row {
                    // shortest repr that reads back to the same f32
                    write!(w, " {}", v as f32)?;
                }
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::InvalidDimension(format!("dimension {d} exceeds u32")))
}

struct ByteCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        ByteCursor { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::format(Position::Byte(self.pos as u64), reason)
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.err(format!(
                "truncated file: {what} needs {n} bytes, {} left",
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.err(format!("{} unexpected trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

fn read_binary(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let mut c = ByteCursor::new(bytes);
    let magic = c.take(4, "magic")?;
    if magic != CLBE_MAGIC {
        return Err(Error::format(Position::Byte(0), "bad magic, not a CLBE file"));
    }
    let version = c.u16("version")?;
    if version != CLBE_VERSION {
        return Err(Error::format(
            Position::Byte(4),
            format!("unsupported CLBE version {version}"),
        ));
    }
    let flags = c.u8("flags")?;
    if flags != 0 {
        return Err(Error::format(Position::Byte(6), format!("unsupported flags {flags:#04x}")));
    }
    let _reserved = c.u8("reserved byte")?;
    let n = c.u64("row count")?;
    let d = c.u32("dimension")? as usize;
    // each key record is at least 4 bytes; reject absurd counts before allocating
    let n = usize::try_from(n)
        .ok()
        .filter(|&n| n <= c.remaining() / 4)
        .ok_or_else(|| c.err(format!("row count {n} exceeds file size")))?;

    let mut keys = Vec::with_capacity(n);
    for _ in 0..n {
        let len = c.u32("key length")? as usize;
        let start = c.pos;
        let raw = c.take(len, "key")?;
        let key = std::str::from_utf8(raw)
            .map_err(|_| Error::format(Position::Byte(start as u64), "key is not valid UTF-8"))?;
        keys.push(key.to_string());
    }

    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| c.err("vector block size overflows"))?;
    let block_start = c.pos;
    let block = c.take(expected, "vector block")?;
    let mut data = Vec::with_capacity(n * d);
    for (i, chunk) in block.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("chunks of 4"));
        if !v.is_finite() {
            return Err(Error::format(
                Position::Byte((block_start + 4 * i) as u64),
                "non-finite value",
            ));
        }
        data.push(f64::from(v));
    }
    c.finish()?;

    let start_of_keys = 20u64;
    EmbeddingMatrix::new(keys, Matrix::from_raw(n, d, data)).map_err(|e| match e {
        Error::InvalidInput(reason) => Error::format(Position::Byte(start_of_keys), reason),
        other => other,
    })
}

fn read_text(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        Error::format(Position::Byte(e.valid_up_to() as u64), "file is not valid UTF-8")
    })?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(Position::Line(1), "empty file, expected \"n d\" header"))?;
    let header: Vec<&str> = header.split_whitespace().collect();
    let (n, d) = match header.as_slice() {
        [n, d] => match (n.parse::<usize>(), d.parse::<usize>()) {
            (Ok(n), Ok(d)) => (n, d),
            _ => return Err(Error::format(Position::Line(1), "header must be two integers \"n d\"")),
        },
        _ => return Err(Error::format(Position::Line(1), "header must be two integers \"n d\"")),
    };

    let mut keys = Vec::with_capacity(n.min(1 << 20));
    let mut data = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in lines {
        if keys.len() == n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::format(
                Position::Line(lineno),
                format!("more than the {n} rows announced in the header"),
            ));
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let key = fields
            .next()
            .ok_or_else(|| Error::format(Position::Line(lineno), "empty row"))?;
        let mut count = 0;
        for f in fields {
            let v: f32 = f.parse().map_err(|_| {
                Error::format(Position::Line(lineno), format!("bad value {f:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::format(Position::Line(lineno), "non-finite value"));
            }
            data.push(f64::from(v));
            count += 1;
        }
        if count != d {
            return Err(Error::format(
                Position::Line(lineno),
                format!("row has {count} values, expected {d}"),
            ));
        }
        if !seen.insert(key) {
            return Err(Error::format(Position::Line(lineno), format!("duplicate key {key:?}")));
        }
        keys.push(key.to_string());
    }
    if keys.len() != n {
        return Err(Error::format(
            Position::Line(keys.len() + 2),
            format!("truncated file: {} of {n} rows present", keys.len()),
        ));
    }
    EmbeddingMatrix::new(keys, Matrix::from_raw(n, d, data))
}

pub fn write_transform(path: impl AsRef<Path>, t: &TransformMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_transform_to(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn write_transform_to<W: Write>(w: &mut W, t: &TransformMatrix) -> Result<()> {
    w.write_all(CLBT_MAGIC)?;
    w.write_all(&CLBT_VERSION.to_le_bytes())?;
    w.write_all(&dim_u32(t.out_dim())?.to_le_bytes())?;
    w.write_all(&dim_u32(t.in_dim())?.to_le_bytes())?;
    w.write_all(&[t.method().code(), u8::from(t.is_orthogonal())])?;
    w.write_all(&t.objective().to_le_bytes())?;
    w.write_all(&(t.n_train() as u64).to_le_bytes())?;
    for &v in t.matrix().as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_transform(path: impl AsRef<Path>) -> Result<TransformMatrix> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    read_transform_from(&buf)
}

pub fn read_transform_from(bytes: &[u8]) -> Result<TransformMatrix> {
    let mut c = ByteCursor::new(bytes);
    if c.take(4, "magic")? != CLBT_MAGIC {
        return Err(Error::format(Position::Byte(0), "bad magic, not a CLBT file"));
    }
    let version = c.u16("version")?;
    if version != CLBT_VERSION {
        return Err(Error::format(
            Position::Byte(4),
            format!("unsupported CLBT version {version}"),
        ));
    }
    let out_dim = c.u32("output dimension")? as usize;
    let in_dim = c.u32("input dimension")? as usize;
    let method_pos = c.pos;
    let method = FitMethod::from_code(c.u8("method")?)
        .ok_or_else(|| Error::format(Position::Byte(method_pos as u64), "unknown fit method code"))?;
    let orthogonal = match c.u8("orthogonal flag")? {
        0 => false,
        1 => true,
        other => {
            return Err(Error::format(
                Position::Byte(method_pos as u64 + 1),
                format!("orthogonal flag must be 0 or 1, got {other}"),
            ))
        }
    };
    let objective = c.f64("objective")?;
    let n_train = c.u64("training count")?;
    let count = out_dim
        .checked_mul(in_dim)
        .filter(|&c2| c2.checked_mul(8).is_some_and(|b| b <= c.remaining()))
        .ok_or_else(|| c.err(format!("truncated file: {out_dim}x{in_dim} matrix does not fit")))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        data.push(c.f64("matrix entry")?);
    }
    c.finish()?;
    let w = Matrix::from_vec(out_dim, in_dim, data)
        .map_err(|e| Error::format(Position::Byte(32), e.to_string()))?;
    TransformMatrix::new(w, method, orthogonal, objective, n_train as usize)
        .map_err(|e| Error::format(Position::Byte(16), e.to_string()))
}
