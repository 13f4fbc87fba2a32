use crate::error::{Error, Result};

/// Rank-4 row-major real array, laid out as (batch, frequency, time, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Tensor4 {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::shape(format!(
                "dims {dims:?} need {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor4 { dims, data })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, b: usize, f: usize, t: usize, c: usize) -> usize {
        let [_, nf, nt, nc] = self.dims;
        ((b * nf + f) * nt + t) * nc + c
    }

    #[inline]
    pub fn get(&self, b: usize, f: usize, t: usize, c: usize) -> f64 {
        self.data[self.offset(b, f, t, c)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, f: usize, t: usize, c: usize, value: f64) {
        let i = self.offset(b, f, t, c);
        self.data[i] = value;
    }

    /// Elements of one batch entry.
    pub fn example(&self, b: usize) -> &[f64] {
        let n = self.example_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn example_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.example_len();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn example_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    /// Copies the listed batch entries, in order, into a new tensor.
    pub fn gather(&self, indices: &[usize]) -> Tensor4 {
        let n = self.example_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &b in indices {
            data.extend_from_slice(self.example(b));
        }
        Tensor4 {
            dims: [indices.len(), self.dims[1], self.dims[2], self.dims[3]],
            data,
        }
    }

    /// Concatenates tensors along the batch axis.
    pub fn concat(parts: &[&Tensor4]) -> Result<Tensor4> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("cannot concatenate zero tensors"))?;
        let tail = &first.dims[1..];
        let mut batch = 0;
        let mut data = Vec::new();
        for p in parts {
            if &p.dims[1..] != tail {
                return Err(Error::shape(format!(
                    "cannot concatenate {:?} with {:?}",
                    first.dims, p.dims
                )));
            }
            batch += p.dims[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor4 {
            dims: [batch, tail[0], tail[1], tail[2]],
            data,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
