//! Trainable projection encoder: maps query-side feature vectors into the
//! shared embedding space through one affine layer with an optional tanh.
//!
//! Params file (`.rspe`), binary little-endian: magic `RSPE`, version
//! `u32` = 1, `F` as `u32`, `D` as `u32`, activation `u8` (0 = identity,
//! 1 = tanh), then `F·D` `f32` weights row-major, then `D` `f32` bias.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const PARAMS_MAGIC: &[u8; 4] = b"RSPE";
const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output `y = act(x)`.
    pub(crate) fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Weights and bias of the projection encoder. Kept in `f64` for training
/// math; the on-disk format stores `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    weight: Matrix, // F x D
    bias: Vec<f64>, // D
    activation: Activation,
}

impl EncoderParams {
    /// Seed-deterministic initialization: weights uniform in `[-s, s]` with
    /// `s = sqrt(6 / (F + D))`, bias zero.
    pub fn init(f_dim: usize, d_dim: usize, activation: Activation, seed: u64) -> Result<Self> {
        if f_dim == 0 || d_dim == 0 {
            return Err(Error::InvalidDimension(format!(
                "encoder dims must be at least 1, got F={f_dim}, D={d_dim}"
            )));
        }
        let bound = (6.0 / (f_dim + d_dim) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weight = Matrix::zeros(f_dim, d_dim);
        for w in weight.data_mut() {
            *w = rng.random_range(-bound..=bound);
        }
        Ok(Self {
            weight,
            bias: vec![0.0; d_dim],
            activation,
        })
    }

    pub fn from_parts(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.rows() == 0 || weight.cols() == 0 {
            return Err(Error::InvalidDimension(
                "encoder dims must be at least 1".into(),
            ));
        }
        if bias.len() != weight.cols() {
            return Err(Error::dims(weight.cols(), bias.len()));
        }
        weight.check_finite("encoder weight")?;
        if let Some(i) = bias.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("encoder bias entry {i}")));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn weight_mut(&mut self) -> &mut Matrix {
        &mut self.weight
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(PARAMS_MAGIC)?;
        w.write_all(&PARAMS_VERSION.to_le_bytes())?;
        w.write_all(&(self.feature_dim() as u32).to_le_bytes())?;
        w.write_all(&(self.embedding_dim() as u32).to_le_bytes())?;
        w.write_all(&[self.activation.code()])?;
        for &v in self.weight.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        for &v in &self.bias {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let name = path.as_ref().display().to_string();
        let fail = |msg: String| Error::Format(format!("{name}: {msg}"));
        let mut r = BufReader::new(File::open(path.as_ref())?);

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| fail("truncated while reading magic".into()))?;
        if &magic != PARAMS_MAGIC {
            return Err(fail(format!("bad magic {magic:?}")));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)
            .map_err(|_| fail("truncated while reading version".into()))?;
        let version = u32::from_le_bytes(word);
        if version != PARAMS_VERSION {
            return Err(fail(format!("unsupported version {version}")));
        }
        r.read_exact(&mut word)
            .map_err(|_| fail("truncated while reading F".into()))?;
        let f_dim = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)
            .map_err(|_| fail("truncated while reading D".into()))?;
        let d_dim = u32::from_le_bytes(word) as usize;
        let mut act = [0u8; 1];
        r.read_exact(&mut act)
            .map_err(|_| fail("truncated while reading activation".into()))?;
        let activation = Activation::from_code(act[0])
            .ok_or_else(|| fail(format!("unknown activation code {}", act[0])))?;

        let read_f32s = |r: &mut BufReader<File>, count: usize, what: &str| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; count * 4];
            r.read_exact(&mut bytes)
                .map_err(|_| fail(format!("truncated while reading {what}")))?;
            let mut out = Vec::with_capacity(count);
            for (i, chunk) in bytes.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes(chunk.try_into().unwrap());
                if !v.is_finite() {
                    return Err(fail(format!("non-finite {what} value at index {i}")));
                }
                out.push(v as f64);
            }
            Ok(out)
        };
        let weight_data = read_f32s(&mut r, f_dim * d_dim, "weight")?;
        let bias = read_f32s(&mut r, d_dim, "bias")?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(fail("trailing bytes after params data".into()));
        }
        Self::from_parts(Matrix::from_vec(f_dim, d_dim, weight_data)?, bias, activation)
    }
}

/// Applies the encoder to one feature vector, narrowing the result to
/// embedding storage precision.
pub fn encode(params: &EncoderParams, features: &[f64]) -> Result<Embedding> {
    if features.len() != params.feature_dim() {
        return Err(Error::dims(params.feature_dim(), features.len()));
    }
    if let Some(i) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("feature entry {i}")));
    }
    let row = encode_row(params, features);
    Embedding::from_f64(&row)
}

/// Row-wise batch encoding, kept in `f64` for the training path.
pub fn encode_batch(params: &EncoderParams, features: &Matrix) -> Result<Matrix> {
    if features.cols() != params.feature_dim() {
        return Err(Error::dims(params.feature_dim(), features.cols()));
    }
    features.check_finite("features")?;
    let mut out = Matrix::zeros(features.rows(), params.embedding_dim());
    for m in 0..features.rows() {
        let row = encode_row(params, features.row(m));
        out.row_mut(m).copy_from_slice(&row);
    }
    Ok(out)
}

fn encode_row(params: &EncoderParams, features: &[f64]) -> Vec<f64> {
    let d_dim = params.embedding_dim();
    let mut out = params.bias.clone();
    for (f, &x) in features.iter().enumerate() {
        let w_row = params.weight.row(f);
        for d in 0..d_dim {
            out[d] += x * w_row[d];
        }
    }
    for v in &mut out {
        *v = params.activation.apply(*v);
    }
    out
}
