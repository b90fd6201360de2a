//! `VXCK` parameter checkpoints.
//!
//! Layout (little-endian): magic `VXCK`, `u32` parameter count, then per
//! parameter: `u32` name length, UTF-8 name bytes, `u32` rank, `rank × u32`
//! dims, and `product(dims) × f32` values.

use std::io::{Read, Write};

use crate::tensor::{Scalar, Tensor};
use crate::Error;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VXCK";

pub fn write_checkpoint<T: Scalar, W: Write>(
    mut w: W,
    params: &[(String, Tensor<T>)],
) -> Result<(), Error> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], Error> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|_| Error::Checkpoint {
            offset: self.offset,
            reason: "truncated".into(),
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, Error> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint<T: Scalar, R: Read>(r: R) -> Result<Vec<(String, Tensor<T>)>, Error> {
    let mut c = Cursor { inner: r, offset: 0 };
    let magic: [u8; 4] = c.bytes()?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint {
            offset: 0,
            reason: format!("bad magic, expected \"VXCK\", found {magic:?}"),
        });
    }
    let count = c.u32()?;
    let mut out = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let at = c.offset;
        let name_len = c.u32()? as usize;
        if name_len > 1 << 16 {
            return Err(Error::Checkpoint {
                offset: at,
                reason: format!("implausible name length {name_len}"),
            });
        }
        let mut name = vec![0u8; name_len];
        c.inner.read_exact(&mut name).map_err(|_| Error::Checkpoint {
            offset: c.offset,
            reason: "truncated".into(),
        })?;
        c.offset += name_len as u64;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint {
            offset: at + 4,
            reason: "parameter name is not UTF-8".into(),
        })?;
        let rank = c.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(c.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len.min(1 << 24));
        for _ in 0..len {
            let v = f32::from_le_bytes(c.bytes()?);
            data.push(T::from_f64_lossy(v as f64));
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let params = vec![
            ("w".to_string(), Tensor::new(vec![2, 2], vec![1.0f32, -2.5, 3.25, 0.0]).unwrap()),
            ("b".to_string(), Tensor::new(vec![3], vec![0.1f32, 0.2, 0.3]).unwrap()),
        ];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &params).unwrap();
        let back: Vec<(String, Tensor<f32>)> = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let err = read_checkpoint::<f32, _>(&b"NOPE\0\0\0\0"[..]).unwrap_err();
        assert!(err.to_string().contains("VXCK"));
        let params = vec![("w".to_string(), Tensor::<f32>::ones(&[4]))];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &params).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(read_checkpoint::<f32, _>(buf.as_slice()).is_err());
    }
}
