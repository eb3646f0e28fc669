use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major n-dimensional array of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading (batch) dimension.
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Shape without the batch dimension.
    pub fn sample_shape(&self) -> &[usize] {
        &self.shape[1..]
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        let per = self.data.len() / self.shape[0];
        &self.data[n * per..(n + 1) * per]
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// Stacks equally shaped samples along a new leading dimension.
    pub fn stack(samples: &[&Tensor]) -> Result<Tensor> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("cannot stack zero tensors"))?;
        let mut data = Vec::with_capacity(first.len() * samples.len());
        for s in samples {
            if s.shape != first.shape {
                return Err(Error::Shape(format!("stack {:?} with {:?}", first.shape, s.shape)));
            }
            data.extend_from_slice(&s.data);
        }
        let mut shape = vec![samples.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Tensor { shape, data })
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
