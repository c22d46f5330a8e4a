//! Binary network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "LDLM"  u32 version  u32 layer_count
//! per layer:
//!   u64 in  u64 out  u8 activation_tag  f64 activation_param  u8 has_mask
//!   [mask: out rows of ceil(in/8) bytes, LSB first]
//!   f64 weights[out*in] (row-major)  f64 bias[out]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::{Activation, AffineLayer, Mask, Network};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LDLM";
pub const CHECKPOINT_VERSION: u32 = 1;

// Guards allocation when reading corrupt headers.
const MAX_WIDTH: u64 = 1 << 24;

pub fn write_network<W: Write>(net: &Network, w: &mut W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for layer in net.layers() {
        w.write_all(&(layer.inputs() as u64).to_le_bytes())?;
        w.write_all(&(layer.outputs() as u64).to_le_bytes())?;
        let (tag, param) = layer.activation.tag();
        w.write_all(&[tag])?;
        w.write_all(&param.to_le_bytes())?;
        match &layer.mask {
            Some(m) => {
                w.write_all(&[1])?;
                w.write_all(&m.to_packed_rows())?;
            }
            None => w.write_all(&[0])?,
        }
        for v in layer.weights.as_slice().iter().chain(&layer.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_network<R: Read>(r: &mut R, origin: &Path) -> Result<Network> {
    let bad = |reason: String| Error::Format {
        path: origin.to_path_buf(),
        reason,
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("not a network checkpoint (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let count = read_u32(r)? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for l in 0..count {
        let inputs = read_u64(r)?;
        let outputs = read_u64(r)?;
        if inputs == 0 || outputs == 0 || inputs > MAX_WIDTH || outputs > MAX_WIDTH {
            return Err(bad(format!(
                "layer {l} has invalid shape {outputs}x{inputs}"
            )));
        }
        let (inputs, outputs) = (inputs as usize, outputs as usize);
        let tag = read_u8(r)?;
        let param = read_f64(r)?;
        let activation = Activation::from_tag(tag, param)
            .ok_or_else(|| bad(format!("layer {l} has unknown activation tag {tag}")))?;
        let mask = match read_u8(r)? {
            0 => None,
            1 => {
                let mut bytes = vec![0u8; outputs * inputs.div_ceil(8)];
                r.read_exact(&mut bytes)?;
                Some(Mask::from_packed_rows(outputs, inputs, &bytes)?)
            }
            f => return Err(bad(format!("layer {l} has invalid mask flag {f}"))),
        };
        let weights = Matrix::from_vec(outputs, inputs, read_f64s(r, outputs * inputs)?)?;
        let bias = read_f64s(r, outputs)?;
        let layer = AffineLayer::new(weights.clone(), bias, mask, activation)?;
        if layer.weights != weights {
            return Err(bad(format!(
                "layer {l} has nonzero weights outside its mask"
            )));
        }
        layers.push(layer);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after last layer".into()));
    }
    Network::new(layers)
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_network(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network> {
    let mut r = BufReader::new(File::open(path)?);
    read_network(&mut r, path)
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}
