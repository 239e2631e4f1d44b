//! Binary checkpoint files: a versioned container holding the architecture
//! descriptor followed by named little-endian parameter arrays. Round trips
//! are bit-exact.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::net::{Architecture, Head, Layer, NetworkParams};
use super::tensor::Tensor;

const MAGIC: &[u8; 8] = b"ARMRLNET";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(CheckpointError::Format(format!("string length {len} implausible")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CheckpointError::Format(e.to_string()))
}

fn write_layer<W: Write>(w: &mut W, layer: &Layer) -> io::Result<()> {
    match layer {
        Layer::Dense { inputs, outputs } => {
            w.write_all(&[0])?;
            write_u32(w, *inputs as u32)?;
            write_u32(w, *outputs as u32)
        }
        Layer::Conv { in_channels, out_channels, kernel, stride } => {
            w.write_all(&[1])?;
            write_u32(w, *in_channels as u32)?;
            write_u32(w, *out_channels as u32)?;
            write_u32(w, *kernel as u32)?;
            write_u32(w, *stride as u32)
        }
        Layer::Relu => w.write_all(&[2]),
        Layer::Tanh => w.write_all(&[3]),
        Layer::Flatten => w.write_all(&[4]),
    }
}

fn read_layer<R: Read>(r: &mut R) -> Result<Layer, CheckpointError> {
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    Ok(match tag[0] {
        0 => Layer::Dense {
            inputs: read_u32(r)? as usize,
            outputs: read_u32(r)? as usize,
        },
        1 => Layer::Conv {
            in_channels: read_u32(r)? as usize,
            out_channels: read_u32(r)? as usize,
            kernel: read_u32(r)? as usize,
            stride: read_u32(r)? as usize,
        },
        2 => Layer::Relu,
        3 => Layer::Tanh,
        4 => Layer::Flatten,
        t => return Err(CheckpointError::Format(format!("unknown layer tag {t}"))),
    })
}

/// Write `params` to `path`, replacing any existing file.
pub fn save(params: &NetworkParams, path: &Path) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;

    let arch = &params.arch;
    write_u32(&mut w, arch.input_shape.len() as u32)?;
    for &d in &arch.input_shape {
        write_u64(&mut w, d as u64)?;
    }
    write_u32(&mut w, arch.layers.len() as u32)?;
    for layer in &arch.layers {
        write_layer(&mut w, layer)?;
    }
    write_u32(&mut w, arch.heads.len() as u32)?;
    for head in &arch.heads {
        write_str(&mut w, &head.name)?;
        write_u32(&mut w, head.outputs as u32)?;
    }

    write_u32(&mut w, params.tensors.len() as u32)?;
    for (name, tensor) in &params.tensors {
        write_str(&mut w, name)?;
        write_u32(&mut w, tensor.shape().len() as u32)?;
        for &d in tensor.shape() {
            write_u64(&mut w, d as u64)?;
        }
        for v in tensor.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint written by [`save`].
pub fn load(path: &Path) -> Result<NetworkParams, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }

    let input_dims = read_u32(&mut r)? as usize;
    let mut input_shape = Vec::with_capacity(input_dims);
    for _ in 0..input_dims {
        input_shape.push(read_u64(&mut r)? as usize);
    }
    let layer_count = read_u32(&mut r)? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        layers.push(read_layer(&mut r)?);
    }
    let head_count = read_u32(&mut r)? as usize;
    let mut heads = Vec::with_capacity(head_count);
    for _ in 0..head_count {
        let name = read_str(&mut r)?;
        let outputs = read_u32(&mut r)? as usize;
        heads.push(Head { name, outputs });
    }
    let arch = Architecture {
        input_shape,
        layers,
        heads,
    };

    let tensor_count = read_u32(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(tensor_count);
    for _ in 0..tensor_count {
        let name = read_str(&mut r)?;
        let ndims = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            shape.push(read_u64(&mut r)? as usize);
        }
        let len: usize = shape.iter().product();
        if len > 1 << 28 {
            return Err(CheckpointError::Format(format!(
                "tensor {name} with {len} elements implausible"
            )));
        }
        let mut values = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        tensors.push((name, Tensor::new(shape, values)));
    }

    let params = NetworkParams { arch, tensors };
    params
        .arch
        .validate()
        .map_err(|e| CheckpointError::Format(e.to_string()))?;
    Ok(params)
}
