//! On-disk formats: single-tensor files and multi-tensor checkpoints.
//!
//! Tensor file layout, all integers little-endian:
//! magic `QTNSR1`, dtype byte (0 = f32, 1 = f64), rank byte, `rank` u32
//! dims, then the row-major payload. A checkpoint is magic `QCKPT1`, a
//! u32-length-prefixed UTF-8 header (schema line, step line, full run
//! config), a u32 tensor count, then length-prefixed names each followed
//! by a complete tensor blob. Round-trips are bitwise exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::qcore::{Dtype, QTensor, Real};

use super::config::RunConfig;

pub const TENSOR_MAGIC: &[u8; 6] = b"QTNSR1";
pub const CHECKPOINT_MAGIC: &[u8; 6] = b"QCKPT1";
pub const CHECKPOINT_SCHEMA: u32 = 1;

/// Position-tracking reader so every failure names its byte offset.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::Format {
                offset: self.pos as u64,
                detail: format!(
                    "truncated: need {n} bytes for {what}, have {}",
                    self.bytes.len() - self.pos
                ),
            }),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: &[u8; 6], what: &str) -> Result<()> {
        let at = self.pos as u64;
        let got = self.take(6, what)?;
        if got != expected {
            return Err(Error::Format {
                offset: at,
                detail: format!("bad {what}: expected {expected:?}, got {got:?}"),
            });
        }
        Ok(())
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn tensor_to_bytes<T: Real>(t: &QTensor<T>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + 4 * t.shape().len() + T::DTYPE.size() * t.len());
    append_tensor(&mut out, t)?;
    Ok(out)
}

pub fn append_tensor<T: Real>(out: &mut Vec<u8>, t: &QTensor<T>) -> Result<()> {
    let rank = t.shape().len();
    if rank > u8::MAX as usize {
        return Err(Error::Contract(format!("tensor rank {rank} exceeds format limit 255")));
    }
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(T::DTYPE.code());
    out.push(rank as u8);
    for &d in t.shape() {
        let d = u32::try_from(d)
            .map_err(|_| Error::Contract(format!("dim {d} exceeds format limit {}", u32::MAX)))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &x in t.data() {
        x.write_le(out);
    }
    Ok(())
}

fn read_tensor_blob<T: Real>(r: &mut Reader) -> Result<QTensor<T>> {
    r.magic(TENSOR_MAGIC, "tensor magic")?;
    let dtype_at = r.pos as u64;
    let code = r.u8("dtype byte")?;
    let dtype = Dtype::from_code(code).ok_or_else(|| Error::Format {
        offset: dtype_at,
        detail: format!("unknown dtype code {code}"),
    })?;
    if dtype != T::DTYPE {
        return Err(Error::Format {
            offset: dtype_at,
            detail: format!("stored dtype {dtype}, requested {}", T::DTYPE),
        });
    }
    let rank = r.u8("rank byte")? as usize;
    let mut shape = Vec::with_capacity(rank);
    for i in 0..rank {
        shape.push(r.u32(&format!("dim {i}"))? as usize);
    }
    let n: usize = shape.iter().product();
    let payload = r.take(n * dtype.size(), "tensor payload")?;
    let data: Vec<T> = payload.chunks_exact(dtype.size()).map(T::read_le).collect();
    QTensor::from_vec(shape, data)
}

/// A tensor read without knowing its precision up front.
#[derive(Debug, Clone)]
pub enum AnyTensor {
    F32(QTensor<f32>),
    F64(QTensor<f64>),
}

impl AnyTensor {
    pub fn dtype(&self) -> Dtype {
        match self {
            AnyTensor::F32(_) => Dtype::F32,
            AnyTensor::F64(_) => Dtype::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    /// Converts to the requested precision, casting elementwise if needed.
    pub fn cast<T: Real>(&self) -> QTensor<T> {
        let (shape, data): (Vec<usize>, Vec<T>) = match self {
            AnyTensor::F32(t) => (
                t.shape().to_vec(),
                t.data().iter().map(|&x| T::from_f64(x as f64)).collect(),
            ),
            AnyTensor::F64(t) => (
                t.shape().to_vec(),
                t.data().iter().map(|&x| T::from_f64(x)).collect(),
            ),
        };
        QTensor::from_vec(shape, data).expect("shape/data agree by construction")
    }
}

fn read_any_blob(r: &mut Reader) -> Result<AnyTensor> {
    let start = r.pos;
    r.magic(TENSOR_MAGIC, "tensor magic")?;
    let dtype_at = r.pos as u64;
    let code = r.u8("dtype byte")?;
    let dtype = Dtype::from_code(code).ok_or_else(|| Error::Format {
        offset: dtype_at,
        detail: format!("unknown dtype code {code}"),
    })?;
    r.pos = start;
    Ok(match dtype {
        Dtype::F32 => AnyTensor::F32(read_tensor_blob::<f32>(r)?),
        Dtype::F64 => AnyTensor::F64(read_tensor_blob::<f64>(r)?),
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.display().to_string(),
                detail: e.to_string(),
            })?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

pub fn write_tensor<T: Real>(path: impl AsRef<Path>, t: &QTensor<T>) -> Result<()> {
    write_file(path.as_ref(), &tensor_to_bytes(t)?)
}

/// Reads a tensor stored at exactly this element type.
pub fn read_tensor<T: Real>(path: impl AsRef<Path>) -> Result<QTensor<T>> {
    let bytes = read_file(path.as_ref())?;
    let mut r = Reader::new(&bytes);
    let t = read_tensor_blob::<T>(&mut r)?;
    expect_end(&r)?;
    Ok(t)
}

pub fn read_tensor_any(path: impl AsRef<Path>) -> Result<AnyTensor> {
    let bytes = read_file(path.as_ref())?;
    let mut r = Reader::new(&bytes);
    let t = read_any_blob(&mut r)?;
    expect_end(&r)?;
    Ok(t)
}

fn expect_end(r: &Reader) -> Result<()> {
    if !r.done() {
        return Err(Error::Format {
            offset: r.pos as u64,
            detail: format!("{} trailing bytes after payload", r.bytes.len() - r.pos),
        });
    }
    Ok(())
}

/// A complete serialized model state: run config, step counter, and every
/// parameter tensor in visit order.
#[derive(Debug, Clone)]
pub struct Checkpoint<T: Real> {
    pub config: RunConfig,
    pub step: u64,
    pub tensors: Vec<(String, QTensor<T>)>,
}

impl<T: Real> Checkpoint<T> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = format!(
            "schema = {CHECKPOINT_SCHEMA}\nstep = {}\n{}",
            self.step,
            self.config.to_text()
        );
        let header_len = u32::try_from(header.len())
            .map_err(|_| Error::Contract("checkpoint header exceeds 4 GiB".into()))?;
        let count = u32::try_from(self.tensors.len())
            .map_err(|_| Error::Contract("checkpoint tensor count exceeds u32".into()))?;

        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        for (name, tensor) in &self.tensors {
            let name_len = u32::try_from(name.len())
                .map_err(|_| Error::Contract(format!("tensor name '{name}' exceeds u32 length")))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            append_tensor(&mut out, tensor)?;
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(CHECKPOINT_MAGIC, "checkpoint magic")?;
        let header_len = r.u32("header length")? as usize;
        let header_at = r.pos as u64;
        let header_bytes = r.take(header_len, "header")?;
        let header = std::str::from_utf8(header_bytes).map_err(|e| Error::Format {
            offset: header_at + e.valid_up_to() as u64,
            detail: "header is not UTF-8".into(),
        })?;
        let (step, config) = parse_header(header)?;

        let count = r.u32("tensor count")? as usize;
        let mut tensors = Vec::with_capacity(count);
        for i in 0..count {
            let name_len = r.u32(&format!("name length of tensor {i}"))? as usize;
            let name_at = r.pos as u64;
            let name_bytes = r.take(name_len, &format!("name of tensor {i}"))?;
            let name = std::str::from_utf8(name_bytes)
                .map_err(|_| Error::Format {
                    offset: name_at,
                    detail: format!("tensor {i} name is not UTF-8"),
                })?
                .to_string();
            let tensor = read_tensor_blob::<T>(&mut r)?;
            tensors.push((name, tensor));
        }
        expect_end(&r)?;
        Ok(Checkpoint { config, step, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Checkpoint::from_bytes(&read_file(path.as_ref())?)
    }

    /// Name-keyed view for `load_values`.
    pub fn tensor_map(&self) -> std::collections::BTreeMap<String, QTensor<T>> {
        self.tensors.iter().cloned().collect()
    }
}

fn parse_header(header: &str) -> Result<(u64, RunConfig)> {
    let mut schema: Option<u32> = None;
    let mut step: Option<u64> = None;
    let mut config_text = String::new();
    for line in header.lines() {
        let trimmed = line.trim();
        let key = trimmed.split_once('=').map(|(k, _)| k.trim());
        match key {
            Some("schema") => {
                let v = trimmed.split_once('=').unwrap().1.trim();
                schema = Some(v.parse().map_err(|_| {
                    Error::Format { offset: 10, detail: format!("bad schema '{v}'") }
                })?);
            }
            Some("step") => {
                let v = trimmed.split_once('=').unwrap().1.trim();
                step = Some(v.parse().map_err(|_| {
                    Error::Format { offset: 10, detail: format!("bad step '{v}'") }
                })?);
            }
            _ => {
                config_text.push_str(line);
                config_text.push('\n');
            }
        }
    }
    match schema {
        Some(CHECKPOINT_SCHEMA) => {}
        Some(v) => {
            return Err(Error::Format {
                offset: 10,
                detail: format!("unsupported checkpoint schema {v}, expected {CHECKPOINT_SCHEMA}"),
            })
        }
        None => {
            return Err(Error::Format { offset: 10, detail: "header missing schema line".into() })
        }
    }
    let step = step
        .ok_or_else(|| Error::Format { offset: 10, detail: "header missing step line".into() })?;
    let config = RunConfig::parse(&config_text)?;
    Ok((step, config))
}
