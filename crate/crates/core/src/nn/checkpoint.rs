//! Versioned binary checkpoint of a [`DenseNet`].
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      b"HDWN"
//! version    u32 (= 1)
//! layers     u32 L
//! sizes      (L + 1) x u32
//! per layer  u8 activation code (0 relu, 1 sigmoid, 2 identity, 3 softmax)
//!            f64 temperature (0 unless softmax)
//! count      u64 parameter count
//! params     count x f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, DenseNet};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HDWN";
const VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Format(format!("checkpoint i/o: {e}"))
}

impl DenseNet {
    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        let layers = self.sizes.len() - 1;
        let mut buf = Vec::with_capacity(16 + 8 * self.params.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(layers as u32).to_le_bytes());
        for &s in &self.sizes {
            buf.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for act in &self.activations {
            let (code, tau) = match *act {
                Activation::Relu => (0u8, 0.0),
                Activation::Sigmoid => (1, 0.0),
                Activation::Identity => (2, 0.0),
                Activation::Softmax { tau } => (3, tau),
            };
            buf.push(code);
            buf.extend_from_slice(&f64::to_le_bytes(tau));
        }
        buf.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf).map_err(io_err)
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a network checkpoint".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let layers = read_u32(r)? as usize;
        if layers == 0 || layers > 1024 {
            return Err(Error::Format(format!("implausible layer count {layers}")));
        }
        let sizes = (0..=layers)
            .map(|_| read_u32(r).map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut acts = Vec::with_capacity(layers);
        for _ in 0..layers {
            let mut code = [0u8; 1];
            r.read_exact(&mut code).map_err(io_err)?;
            let tau = read_f64(r)?;
            acts.push(match code[0] {
                0 => Activation::Relu,
                1 => Activation::Sigmoid,
                2 => Activation::Identity,
                3 => Activation::Softmax { tau },
                c => return Err(Error::Format(format!("unknown activation code {c}"))),
            });
        }
        let mut net = DenseNet::zeros(&sizes, &acts).map_err(|e| Error::Format(e.to_string()))?;
        let mut count = [0u8; 8];
        r.read_exact(&mut count).map_err(io_err)?;
        let count = u64::from_le_bytes(count) as usize;
        if count != net.params.len() {
            return Err(Error::Format(format!(
                "parameter count {count} does not match layer sizes ({})",
                net.params.len()
            )));
        }
        for p in net.params.iter_mut() {
            *p = read_f64(r)?;
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        self.write_checkpoint(&mut bytes)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(&mut bytes.as_slice())
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(f64::from_le_bytes(b))
}
