//! Binary parameter checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes   "MMSACKPT"
//! version    u32       1
//! meta_len   u32       byte length of the metadata block
//! meta       UTF-8     JSON document (model spec)
//! count      u32       number of tensors
//! per tensor:
//!   name_len u32, name UTF-8 (layer path, e.g. "fusion.lstm.w_input")
//!   ndim     u32, dims u64 × ndim
//!   data     f64 × product(dims), row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::autodiff::{ParamSet, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MMSACKPT";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, meta: &str, params: &ParamSet) -> Result<()> {
    let io = |e| Error::io("<checkpoint>", e);
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    write_bytes(&mut out, meta.as_bytes()).map_err(io)?;
    out.write_all(&(params.len() as u32).to_le_bytes()).map_err(io)?;
    for (_, name, t) in params.iter() {
        write_bytes(&mut out, name.as_bytes()).map_err(io)?;
        out.write_all(&(t.shape().len() as u32).to_le_bytes()).map_err(io)?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn write_bytes<W: Write>(out: &mut W, bytes: &[u8]) -> std::io::Result<()> {
    out.write_all(&(bytes.len() as u32).to_le_bytes())?;
    out.write_all(bytes)
}

/// Returns the metadata string and the parameters in file order.
pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(String, ParamSet)> {
    let mut magic = [0u8; 8];
    read_exact(&mut input, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let meta = read_string(&mut input)?;
    let count = read_u32(&mut input)?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name = read_string(&mut input)?;
        let ndim = read_u32(&mut input)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            read_exact(&mut input, &mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        read_exact(&mut input, &mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        params.insert(name, t)?;
    }
    Ok((meta, params))
}

pub fn save(path: &Path, meta: &str, params: &ParamSet) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(BufWriter::new(f), meta, params)
}

pub fn load(path: &Path) -> Result<(String, ParamSet)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input
        .read_exact(buf)
        .map_err(|e| Error::Checkpoint(format!("truncated: {e}")))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string<R: Read>(input: &mut R) -> Result<String> {
    let n = read_u32(input)? as usize;
    let mut b = vec![0u8; n];
    read_exact(input, &mut b)?;
    String::from_utf8(b).map_err(|e| Error::Checkpoint(format!("invalid utf-8: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let mut p = ParamSet::new();
        p.insert("a.weight", Tensor::matrix(2, 3, vec![0.1, -0.0, 1e-300, 5.5, f64::MIN_POSITIVE, -7.25]).unwrap())
            .unwrap();
        p.insert("a.bias", Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, "{\"k\":1}", &p).unwrap();
        assert_eq!(&buf[..8], b"MMSACKPT");
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        let (meta, q) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(meta, "{\"k\":1}");
        for ((_, na, ta), (_, nb, tb)) in p.iter().zip(q.iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.shape(), tb.shape());
            assert!(ta.data().iter().zip(tb.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOTACKPT"[..]).is_err());
        let mut p = ParamSet::new();
        p.insert("x", Tensor::scalar(1.0)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, "", &p).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(Error::Checkpoint(_))));
    }
}
