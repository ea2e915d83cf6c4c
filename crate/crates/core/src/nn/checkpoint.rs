//! Binary network checkpoints.
//!
//! Layout: the 6-byte magic `COLNN1`, a little-endian `u32` count of layer
//! widths, one little-endian `u32` per width, one activation code byte per
//! weight layer, then for each layer in order its row-major weights
//! (`inputs x outputs`) and its biases as little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, NetworkParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"COLNN1";

pub fn write_network<W: Write>(params: &NetworkParams, mut out: W) -> std::io::Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(params.layer_sizes().len() as u32).to_le_bytes())?;
    for &w in params.layer_sizes() {
        out.write_all(&(w as u32).to_le_bytes())?;
    }
    for layer in params.layers() {
        out.write_all(&[layer.activation.code()])?;
    }
    // Flat storage already follows declaration order.
    for v in params.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_network<R: Read>(mut input: R) -> Result<NetworkParams> {
    let bad = |msg: &str| Error::Validation(format!("checkpoint: {msg}"));
    let mut magic = [0u8; 6];
    input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let count = u32::from_le_bytes(word) as usize;
    if !(2..=64).contains(&count) {
        return Err(bad("implausible layer count"));
    }
    let mut sizes = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut word).map_err(|_| bad("truncated layer sizes"))?;
        sizes.push(u32::from_le_bytes(word) as usize);
    }
    let mut codes = vec![0u8; count - 1];
    input.read_exact(&mut codes).map_err(|_| bad("truncated activations"))?;
    let activations = codes
        .iter()
        .map(|&c| Activation::from_code(c).ok_or_else(|| bad("unknown activation code")))
        .collect::<Result<Vec<_>>>()?;
    let mut params = NetworkParams::zeros(&sizes, &activations)?;
    let mut buf = [0u8; 8];
    for v in params.values_mut() {
        input.read_exact(&mut buf).map_err(|_| bad("truncated parameters"))?;
        *v = f64::from_le_bytes(buf);
    }
    if input.read(&mut buf).map_err(|e| bad(&e.to_string()))? != 0 {
        return Err(bad("trailing bytes"));
    }
    if !params.all_finite() {
        return Err(bad("non-finite parameter"));
    }
    Ok(params)
}

pub fn save_network(params: &NetworkParams, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_network(params, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<NetworkParams> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_network(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let p = NetworkParams::init(&[3, 2], Activation::Elu, Activation::Tanh, 1).unwrap();
        let mut bytes = Vec::new();
        write_network(&p, &mut bytes).unwrap();
        assert_eq!(&bytes[..6], b"COLNN1");
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &3u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &2u32.to_le_bytes());
        assert_eq!(bytes[18], Activation::Tanh.code());
        assert_eq!(&bytes[19..27], &p.weights(0)[0].to_le_bytes());
        assert_eq!(bytes.len(), 19 + 8 * p.num_params());
        assert_eq!(read_network(&bytes[..]).unwrap(), p);
    }

    #[test]
    fn rejects_corruption() {
        let p = NetworkParams::init(&[3, 4, 2], Activation::Elu, Activation::Tanh, 1).unwrap();
        let mut bytes = Vec::new();
        write_network(&p, &mut bytes).unwrap();
        assert!(read_network(&bytes[..bytes.len() - 1]).is_err());
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(read_network(&trailing[..]).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(read_network(&magic[..]).is_err());
    }
}
