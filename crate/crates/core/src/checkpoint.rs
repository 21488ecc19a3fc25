//! Versioned binary checkpoint format for [`NeuralModel`]. Round trips are
//! bit-exact.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "PMXCKPT1"
//! 8       4     k (class count, u32)
//! 12      4     layer count L (u32)
//!               then per layer:
//!               4     rows (u32)
//!               4     cols (u32)
//!               1     nonlinearity tag (0 = none, 1 = relu)
//!               8*rows*cols   weights, row-major f64 bit patterns
//!               8*rows        biases, f64 bit patterns
//! last    1     head tag (0 = softmax, 1 = softrmax)
//! ```

use std::fs;
use std::path::Path;

use crate::activations::HeadActivation;
use crate::models::{Layer, NeuralModel, Nonlinearity};
use crate::numeric::Matrix;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"PMXCKPT1";

pub fn save_model(model: &NeuralModel, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(model.k as u32).to_le_bytes());
    bytes.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for layer in &model.layers {
        bytes.extend_from_slice(&(layer.weights.rows() as u32).to_le_bytes());
        bytes.extend_from_slice(&(layer.weights.cols() as u32).to_le_bytes());
        bytes.push(match layer.nonlinearity {
            Nonlinearity::None => 0,
            Nonlinearity::Relu => 1,
        });
        for v in layer.weights.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for v in &layer.bias {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes.push(match model.head {
        HeadActivation::Softmax => 0,
        HeadActivation::Softrmax => 1,
    });
    fs::write(path, bytes)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::CheckpointFormat(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_model(path: &Path) -> Result<NeuralModel> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::CheckpointFormat("bad magic".into()));
    }
    let k = r.u32()? as usize;
    let layer_count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let nonlinearity = match r.u8()? {
            0 => Nonlinearity::None,
            1 => Nonlinearity::Relu,
            tag => {
                return Err(Error::CheckpointFormat(format!(
                    "unknown nonlinearity tag {tag}"
                )))
            }
        };
        let weights = Matrix::new(rows, cols, r.f64s(rows * cols)?)?;
        let bias = r.f64s(rows)?;
        layers.push(Layer {
            weights,
            bias,
            nonlinearity,
        });
    }
    let head = match r.u8()? {
        0 => HeadActivation::Softmax,
        1 => HeadActivation::Softrmax,
        tag => return Err(Error::CheckpointFormat(format!("unknown head tag {tag}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::CheckpointFormat(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let model = NeuralModel::from_layers(layers, head)?;
    if model.k != k {
        return Err(Error::CheckpointFormat(format!(
            "declared k {k} does not match final layer width {}",
            model.k
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::InitScheme;
    use crate::numeric::RngState;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = RngState::from_seed(77);
        for head in [HeadActivation::Softmax, HeadActivation::Softrmax] {
            let model =
                NeuralModel::init(&[5, 7, 3], head, InitScheme::FanInBarycenter, &mut rng)
                    .unwrap();
            let path = dir.path().join(format!("{}.ckpt", head.name()));
            save_model(&model, &path).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back.k, model.k);
            assert_eq!(back.head, model.head);
            for (a, b) in back.layers.iter().zip(&model.layers) {
                assert_eq!(a.weights.data(), b.weights.data());
                assert_eq!(a.bias, b.bias);
                assert_eq!(a.nonlinearity, b.nonlinearity);
            }
            // byte-identical re-save
            let path2 = dir.path().join("again.ckpt");
            save_model(&back, &path2).unwrap();
            assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTMAGIC rest").unwrap();
        assert!(matches!(
            load_model(&path),
            Err(Error::CheckpointFormat(_))
        ));
    }

    #[test]
    fn truncation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = RngState::from_seed(7);
        let model = NeuralModel::init(
            &[3, 2],
            HeadActivation::Softmax,
            InitScheme::FanInBarycenter,
            &mut rng,
        )
        .unwrap();
        let path = dir.path().join("model.ckpt");
        save_model(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_model(&path).is_err());
    }
}
