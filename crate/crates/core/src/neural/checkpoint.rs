//! Binary network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! b"BTNN"  u32 version  u32 layer_count
//! per layer:
//!   u32 inputs  u32 outputs  u8 activation  u32 bound_count  bound_count x (f64 lo, f64 hi)
//!   outputs*inputs f64 weights (row-major)  outputs f64 biases
//! ```
//!
//! Activation tags: 0 identity, 1 relu, 2 scaled sigmoid, 3 relu clamp.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Activation, Layer, Mlp};

pub const MAGIC: &[u8; 4] = b"BTNN";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a network checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("unknown activation tag {0}")]
    Activation(u8),
    #[error("implausible layer size {inputs}x{outputs}")]
    Size { inputs: u32, outputs: u32 },
    #[error("network contains non-finite parameters")]
    NonFinite,
}

fn put_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn tag(act: &Activation) -> (u8, &[(f64, f64)]) {
    match act {
        Activation::Identity => (0, &[]),
        Activation::Relu => (1, &[]),
        Activation::ScaledSigmoid { bounds } => (2, bounds),
        Activation::ReluClamp { bounds } => (3, bounds),
    }
}

pub fn write_network(w: &mut impl Write, net: &Mlp) -> Result<(), CheckpointError> {
    if !net.is_finite() {
        return Err(CheckpointError::NonFinite);
    }
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, net.layers.len() as u32)?;
    for l in &net.layers {
        put_u32(w, l.inputs as u32)?;
        put_u32(w, l.outputs as u32)?;
        let (t, bounds) = tag(&l.activation);
        w.write_all(&[t])?;
        put_u32(w, bounds.len() as u32)?;
        for (lo, hi) in bounds {
            put_f64(w, *lo)?;
            put_f64(w, *hi)?;
        }
        for v in l.weights.iter().chain(&l.bias) {
            put_f64(w, *v)?;
        }
    }
    Ok(())
}

const MAX_UNITS: u32 = 1 << 16;

pub fn read_network(r: &mut impl Read) -> Result<Mlp, CheckpointError> {
    let mut magic = [0; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let n = get_u32(r)?;
    let mut layers = Vec::with_capacity(n.min(64) as usize);
    for _ in 0..n {
        let inputs = get_u32(r)?;
        let outputs = get_u32(r)?;
        if inputs == 0 || outputs == 0 || inputs > MAX_UNITS || outputs > MAX_UNITS {
            return Err(CheckpointError::Size { inputs, outputs });
        }
        let mut t = [0u8; 1];
        r.read_exact(&mut t)?;
        let nb = get_u32(r)?;
        if nb > outputs {
            return Err(CheckpointError::Size { inputs, outputs });
        }
        let bounds = (0..nb).map(|_| Ok((get_f64(r)?, get_f64(r)?))).collect::<io::Result<Vec<_>>>()?;
        let activation = match t[0] {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::ScaledSigmoid { bounds },
            3 => Activation::ReluClamp { bounds },
            other => return Err(CheckpointError::Activation(other)),
        };
        let (inputs, outputs) = (inputs as usize, outputs as usize);
        let weights = (0..inputs * outputs).map(|_| get_f64(r)).collect::<io::Result<Vec<_>>>()?;
        let bias = (0..outputs).map(|_| get_f64(r)).collect::<io::Result<Vec<_>>>()?;
        layers.push(Layer { inputs, outputs, weights, bias, activation });
    }
    let net = Mlp { layers };
    if !net.is_finite() {
        return Err(CheckpointError::NonFinite);
    }
    Ok(net)
}

pub fn save(path: &Path, net: &Mlp) -> Result<(), CheckpointError> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    write_network(&mut f, net)?;
    f.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp, CheckpointError> {
    read_network(&mut io::BufReader::new(std::fs::File::open(path)?))
}
