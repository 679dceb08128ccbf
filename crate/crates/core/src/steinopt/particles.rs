use std::fmt::Debug;
use std::sync::Arc;

use crate::sigcore::Path;
use crate::{Error, Result};

/// Maps a flat parameter vector to the path a signature kernel compares.
/// Fixed coordinates (endpoints) live in the decoder, not the parameters.
pub trait Decoder: Send + Sync + Debug {
    fn param_len(&self) -> usize;
    fn decode(&self, params: &[f64]) -> Path;
    /// Chain rule from a row-major per-vertex gradient to the parameters.
    fn pullback(&self, params: &[f64], vertex_grad: &[f64]) -> Vec<f64>;
}

/// Parameters are the row-major vertices of a uniformly timed sequence,
/// optionally preceded by a fixed first vertex.
#[derive(Clone, Debug)]
pub struct SequenceDecoder {
    dim: usize,
    steps: usize,
    anchor: Option<Vec<f64>>,
}

impl SequenceDecoder {
    pub fn new(dim: usize, steps: usize) -> Result<Self> {
        if dim == 0 || steps == 0 {
            return Err(Error::invalid("sequence needs positive dimension and length"));
        }
        Ok(SequenceDecoder { dim, steps, anchor: None })
    }

    /// Fixed vertex prepended to every decoded path.
    pub fn anchored(dim: usize, steps: usize, anchor: Vec<f64>) -> Result<Self> {
        if anchor.len() != dim {
            return Err(Error::invalid("anchor dimension mismatch"));
        }
        let mut d = SequenceDecoder::new(dim, steps)?;
        d.anchor = Some(anchor);
        Ok(d)
    }
}

impl Decoder for SequenceDecoder {
    fn param_len(&self) -> usize {
        self.dim * self.steps
    }

    fn decode(&self, params: &[f64]) -> Path {
        let mut pts = Vec::with_capacity(params.len() + self.dim);
        if let Some(a) = &self.anchor {
            pts.extend_from_slice(a);
        }
        pts.extend_from_slice(params);
        let s = pts.len() / self.dim;
        let times = (0..s).map(|i| i as f64).collect();
        Path::new_unchecked(times, pts, self.dim)
    }

    fn pullback(&self, _params: &[f64], vertex_grad: &[f64]) -> Vec<f64> {
        let skip = if self.anchor.is_some() { self.dim } else { 0 };
        vertex_grad[skip..].to_vec()
    }
}

/// Particles of equal length sharing one decoder.
#[derive(Clone, Debug)]
pub struct ParticleSet {
    params: Vec<Vec<f64>>,
    decoder: Arc<dyn Decoder>,
}

impl ParticleSet {
    pub fn new(params: Vec<Vec<f64>>, decoder: Arc<dyn Decoder>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::invalid("particle set is empty"));
        }
        let p = decoder.param_len();
        if params.iter().any(|x| x.len() != p) {
            return Err(Error::invalid(format!("every particle must have {p} parameters")));
        }
        Ok(ParticleSet { params, decoder })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param_len(&self) -> usize {
        self.decoder.param_len()
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.params
    }

    pub fn decoder(&self) -> &Arc<dyn Decoder> {
        &self.decoder
    }

    pub fn decode(&self, i: usize) -> Path {
        self.decoder.decode(&self.params[i])
    }

    pub fn decode_all(&self) -> Vec<Path> {
        self.params.iter().map(|p| self.decoder.decode(p)).collect()
    }

    pub(crate) fn flat(&self) -> Vec<f64> {
        self.params.iter().flatten().copied().collect()
    }

    pub(crate) fn set_flat(&mut self, flat: &[f64]) {
        let p = self.param_len();
        for (x, chunk) in self.params.iter_mut().zip(flat.chunks(p)) {
            x.copy_from_slice(chunk);
        }
    }
}
