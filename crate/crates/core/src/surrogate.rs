//! The surrogate family: a fully connected network with a scalar output.
//!
//! Model files are a small versioned binary format:
//!
//! | bytes | field                                  |
//! |-------|----------------------------------------|
//! | 4     | magic `GMSM`                           |
//! | 4     | format version (u32 LE, currently 1)   |
//! | 4     | activation code (0 identity, 1 leaky)  |
//! | 8     | init seed (u64 LE)                     |
//! | 4     | input dimension d (u32 LE)             |
//! | 4     | hidden layer count h (u32 LE)          |
//! | 4·h   | hidden widths (u32 LE each)            |
//! | 8     | parameter count (u64 LE)               |
//! | 8·n   | parameters, f64 LE, in layer order     |

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Activation, ParamLayout, ParamVector};
use crate::error::{check_dim, Error, Result};
use crate::objective::Objective;

pub const DEFAULT_HIDDEN: [usize; 3] = [512, 128, 32];

const MAGIC: &[u8; 4] = b"GMSM";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
}

impl ArchitectureSpec {
    /// `d → 512 → 128 → 32 → 1` with leaky ReLU.
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: DEFAULT_HIDDEN.to_vec(),
            activation: Activation::LeakyRelu,
        }
    }

    /// A single affine layer, `g_φ(x) = aᵀx + b`.
    pub fn linear(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: Vec::new(),
            activation: Activation::Identity,
        }
    }

    pub fn layout(&self) -> Result<ParamLayout> {
        ParamLayout::new(self.input_dim, &self.hidden_layers, self.activation)
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.layout()?.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateModel {
    arch: ArchitectureSpec,
    params: ParamVector,
    seed: u64,
}

/// Weights and biases of each layer uniform in `[-1/√fan_in, 1/√fan_in]`.
pub fn init_surrogate(arch: &ArchitectureSpec, seed: u64) -> Result<SurrogateModel> {
    let layout = arch.layout()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(layout.len());
    for shape in layout.layers() {
        let bound = 1.0 / (shape.fan_in as f64).sqrt();
        values.extend((0..shape.len()).map(|_| rng.random_range(-bound..=bound)));
    }
    Ok(SurrogateModel {
        arch: arch.clone(),
        params: ParamVector::new(layout, values)?,
        seed,
    })
}

impl SurrogateModel {
    pub fn from_params(arch: ArchitectureSpec, params: ParamVector, seed: u64) -> Result<Self> {
        if params.layout() != &arch.layout()? {
            return Err(Error::Config(
                "parameter layout does not match the architecture".into(),
            ));
        }
        Ok(Self { arch, params, seed })
    }

    pub fn arch(&self) -> &ArchitectureSpec {
        &self.arch
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    /// Copy of this model carrying new parameters.
    pub fn with_params(&self, params: ParamVector) -> Result<Self> {
        Self::from_params(self.arch.clone(), params, self.seed)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        autodiff::forward_value(&self.params, x)
    }

    pub fn predict_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        autodiff::input_gradient(&self.params, x)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let hidden = &self.arch.hidden_layers;
        let mut out = Vec::with_capacity(36 + 4 * hidden.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.arch.activation.code().to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.arch.input_dim as u32).to_le_bytes());
        out.extend_from_slice(&(hidden.len() as u32).to_le_bytes());
        for &w in hidden {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for v in self.params.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.fail(0, "bad magic bytes"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(r.fail(4, format!("unsupported format version {version}")));
        }
        let act_code = r.u32()?;
        let activation = Activation::from_code(act_code)
            .ok_or_else(|| r.fail(8, format!("unknown activation code {act_code}")))?;
        let seed = r.u64()?;
        let input_dim = r.u32()? as usize;
        let n_hidden = r.u32()? as usize;
        // Each width takes four bytes; reject counts the file cannot hold.
        if n_hidden > bytes.len() / 4 {
            return Err(r.fail(r.pos - 4, format!("implausible hidden layer count {n_hidden}")));
        }
        let hidden_layers = (0..n_hidden)
            .map(|_| r.u32().map(|w| w as usize))
            .collect::<Result<Vec<_>>>()?;
        let arch = ArchitectureSpec {
            input_dim,
            hidden_layers,
            activation,
        };
        let layout = arch
            .layout()
            .map_err(|e| r.fail(r.pos, format!("invalid architecture: {e}")))?;
        let count_at = r.pos;
        let count = r.u64()? as usize;
        if count != layout.len() {
            return Err(r.fail(
                count_at,
                format!("parameter count {count} does not match architecture ({})", layout.len()),
            ));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
        }
        if r.pos != bytes.len() {
            return Err(r.fail(r.pos, "trailing bytes after parameters"));
        }
        let params = ParamVector::new(layout, values)
            .map_err(|e| Error::Parse { offset: count_at + 8, reason: e.to_string() })?;
        Ok(Self { arch, params, seed })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Loads a model and checks it accepts `expected_dim`-dimensional inputs.
    pub fn load_for_dim(path: impl AsRef<Path>, expected_dim: usize) -> Result<Self> {
        let model = Self::load(path)?;
        check_dim("loaded model input", expected_dim, model.input_dim())?;
        Ok(model)
    }
}

impl Objective for SurrogateModel {
    fn dim(&self) -> usize {
        self.arch.input_dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.predict(x).expect("caller checked the input dimension")
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.predict_gradient(x)
            .expect("caller checked the input dimension")
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Parse {
            offset,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(self.pos, format!("truncated: needed {n} more bytes")));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_param_count_for_d4() {
        // 4·512+512 + 512·128+128 + 128·32+32 + 32·1+1
        assert_eq!(ArchitectureSpec::new(4).param_count().unwrap(), 72_385);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let arch = ArchitectureSpec {
            input_dim: 3,
            hidden_layers: vec![8, 4],
            activation: Activation::LeakyRelu,
        };
        let a = init_surrogate(&arch, 11).unwrap();
        let b = init_surrogate(&arch, 11).unwrap();
        let c = init_surrogate(&arch, 12).unwrap();
        assert_eq!(a.params().values(), b.params().values());
        assert_ne!(a.params().values(), c.params().values());
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let arch = ArchitectureSpec::new(4);
        let m = init_surrogate(&arch, 3).unwrap();
        for shape in m.params().layout().layers() {
            let bound = 1.0 / (shape.fan_in as f64).sqrt();
            let block = &m.params().values()[shape.offset..shape.offset + shape.len()];
            assert!(block.iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn fresh_model_is_finite_on_box() {
        let m = init_surrogate(&ArchitectureSpec::new(4), 5).unwrap();
        for x in [[-10.0; 4], [10.0; 4], [-10.0, 10.0, -10.0, 10.0], [0.0; 4]] {
            assert!(m.predict(&x).unwrap().is_finite());
        }
    }

    #[test]
    fn zero_width_rejected() {
        let arch = ArchitectureSpec {
            input_dim: 2,
            hidden_layers: vec![0],
            activation: Activation::LeakyRelu,
        };
        assert!(matches!(init_surrogate(&arch, 0), Err(Error::Config(_))));
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let m = init_surrogate(&ArchitectureSpec::new(2), 9).unwrap();
        let back = SurrogateModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        let x = [0.3, -1.7];
        assert_eq!(back.predict(&x).unwrap().to_bits(), m.predict(&x).unwrap().to_bits());
    }

    #[test]
    fn truncated_bytes_report_offset() {
        let m = init_surrogate(&ArchitectureSpec::linear(3), 1).unwrap();
        let bytes = m.to_bytes();
        let err = SurrogateModel::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, bytes.len() - 8),
            other => panic!("unexpected {other:?}"),
        }
        assert!(SurrogateModel::from_bytes(&bytes[..2]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(SurrogateModel::from_bytes(&extra).is_err());
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = init_surrogate(&ArchitectureSpec::linear(1), 1).unwrap().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            SurrogateModel::from_bytes(&bytes),
            Err(Error::Parse { offset: 0, .. })
        ));
    }
}
