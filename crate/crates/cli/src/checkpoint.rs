//! Model checkpoints.
//!
//! Layout, all little-endian: the 8 bytes `RPLLMDL1`, a `u64` count of layer
//! dims, the dims as `u64`, then every parameter as `f64` in declaration
//! order (per layer: weights `in × out` row-major, then bias). The output head
//! is not stored; it follows from the training method.

use std::fs;
use std::path::Path;

use robust_pll_core::nn::{Activation, Mlp};
use robust_pll_core::{Classifier, Head};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"RPLLMDL1";

pub fn encode(mlp: &Mlp) -> Vec<u8> {
    let dims = mlp.layer_dims();
    let mut out = Vec::with_capacity(16 + 8 * (dims.len() + mlp.num_params()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dims.len() as u64).to_le_bytes());
    for d in &dims {
        out.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    for v in mlp.flatten_params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], head: Head, path: &Path) -> Result<Classifier> {
    let err = |offset: usize, reason: String| CliError::Format {
        path: path.display().to_string(),
        unit: "byte",
        offset: offset as u64,
        reason,
    };
    let word = |at: usize| -> Result<[u8; 8]> {
        bytes
            .get(at..at + 8)
            .map(|b| b.try_into().expect("eight bytes"))
            .ok_or_else(|| err(bytes.len(), "truncated checkpoint".into()))
    };
    if &word(0)? != MAGIC {
        return Err(err(0, "not an RPLLMDL1 checkpoint".into()));
    }
    let count = u64::from_le_bytes(word(8)?) as usize;
    if !(2..=64).contains(&count) {
        return Err(err(8, format!("implausible layer count {count}")));
    }
    let dims = (0..count)
        .map(|i| word(16 + 8 * i).map(|w| u64::from_le_bytes(w) as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 16 + 8 * count;
    let output = match head {
        Head::Evidential => Activation::Relu,
        Head::Softmax => Activation::Identity,
    };
    let mut mlp = Mlp::zeros(&dims, output).map_err(|e| err(16, e.to_string()))?;
    let expected = start + 8 * mlp.num_params();
    if bytes.len() != expected {
        return Err(err(
            bytes.len().min(expected),
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let params: Vec<f64> = bytes[start..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    if let Some(i) = params.iter().position(|v| !v.is_finite()) {
        return Err(err(start + 8 * i, "non-finite parameter".into()));
    }
    mlp.load_params(&params)?;
    Ok(Classifier::new(mlp, head)?)
}

pub fn save(classifier: &Classifier, path: &Path) -> Result<()> {
    fs::write(path, encode(classifier.mlp())).map_err(CliError::io(path))
}

pub fn load(path: &Path, head: Head) -> Result<Classifier> {
    decode(&fs::read(path).map_err(CliError::io(path))?, head, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = Mlp::new(&[4, 6, 3], Activation::Relu, &mut rng).unwrap();
        let c = Classifier::new(mlp, Head::Evidential).unwrap();
        let bytes = encode(c.mlp());
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(bytes.len(), 16 + 8 * 3 + 8 * (4 * 6 + 6 + 6 * 3 + 3));
        let back = decode(&bytes, Head::Evidential, Path::new("mem")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_truncation() {
        let mlp = Mlp::zeros(&[2, 2], Activation::Identity).unwrap();
        let bytes = encode(&mlp);
        assert!(decode(&bytes[..bytes.len() - 1], Head::Softmax, Path::new("mem")).is_err());
        assert!(decode(b"RPLLMDL0", Head::Softmax, Path::new("mem")).is_err());
    }
}
