use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major tensor of 32-bit floats.
///
/// The shape is a list of positive dimensions and `data.len()` always
/// equals the product of the shape. Batched activations put the batch
/// axis first; spatial tensors are laid out channels-last as
/// `[height, width, channels]` so the stride-2 convolutions reduce to
/// contiguous GEMM panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!(
                "tensor shape {shape:?} has a zero dimension"
            )));
        }
        if data.len() != expected {
            return Err(Error::Config(format!(
                "tensor shape {shape:?} wants {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Reinterprets the buffer under a new shape with the same length.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::Config(format!(
                "cannot reshape {:?} ({} values) to {shape:?} ({expected} values)",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Largest absolute entry; 0 for the empty tensor.
    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Row-major single-precision GEMM: `c = a(m×k) · b(k×n) + beta·c`.
///
/// One chokepoint for every dense/conv contraction in the crate so the
/// kernels below stay readable.
pub fn sgemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], beta: f32, c: &mut [f32]) {
    assert_eq!(a.len(), m * k, "gemm lhs size");
    assert_eq!(b.len(), k * n, "gemm rhs size");
    assert_eq!(c.len(), m * n, "gemm out size");
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `a(m×k)ᵀ · b(m×n) + beta·c`, i.e. GEMM with the lhs transposed.
pub fn sgemm_tn(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], beta: f32, c: &mut [f32]) {
    assert_eq!(a.len(), m * k, "gemm lhs size");
    assert_eq!(b.len(), m * n, "gemm rhs size");
    assert_eq!(c.len(), k * n, "gemm out size");
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::sgemm(
            k,
            m,
            n,
            1.0,
            a.as_ptr(),
            1,
            k as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `a(m×k) · b(n×k)ᵀ + beta·c`, i.e. GEMM with the rhs transposed.
pub fn sgemm_nt(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], beta: f32, c: &mut [f32]) {
    assert_eq!(a.len(), m * k, "gemm lhs size");
    assert_eq!(b.len(), n * k, "gemm rhs size");
    assert_eq!(c.len(), m * n, "gemm out size");
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::from_vec(&[2, 0], vec![]).is_err());
    }

    #[test]
    fn gemm_small_known_product() {
        // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0f32; 4];
        sgemm(2, 2, 2, &a, &b, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn gemm_transposed_variants_agree_with_plain() {
        let a = [1.0f32, -2.0, 0.5, 3.0, 1.5, -1.0]; // 2x3
        let b = [2.0f32, 1.0, 0.0, -1.0, 1.0, 4.0]; // 3x2
        let mut c = [0.0f32; 4];
        sgemm(2, 3, 2, &a, &b, 0.0, &mut c);

        // at: 3x2 transpose of a; sgemm_tn(m=2 rows of at^T ... ) computes a*b again.
        let at = [1.0f32, 3.0, -2.0, 1.5, 0.5, -1.0];
        let mut c_tn = [0.0f32; 4];
        sgemm_tn(3, 2, 2, &at, &b, 0.0, &mut c_tn);
        // (atᵀ)(3x2 lhs read as m=3,k=2) — here at is 3x2, so atᵀ·b needs b 3 rows.
        // Instead check nt: a · (bᵀ)ᵀ with bt as 2x3.
        let bt = [2.0f32, 0.0, 1.0, 1.0, -1.0, 4.0];
        let mut c_nt = [0.0f32; 4];
        sgemm_nt(2, 3, 2, &a, &bt, 0.0, &mut c_nt);

        for i in 0..4 {
            assert!((c[i] - c_nt[i]).abs() < 1e-6);
        }
        // tn case: lhs is at (3x2) interpreted as (2x3)ᵀ·b where b is 3x2 — same product.
        for i in 0..4 {
            assert!((c[i] - c_tn[i]).abs() < 1e-6, "{c:?} vs {c_tn:?}");
        }
    }
}
