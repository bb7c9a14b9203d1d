use std::fmt;
use std::io::{self, Read, Write};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use super::AutodiffError;

/// Element precision of a tensor, recorded in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    pub fn size_bytes(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Scalar types the graph can differentiate through: `f32` for training
/// speed, `f64` for finite-difference gradient checks.
pub trait Real:
    Copy
    + PartialOrd
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + ndarray::LinalgScalar
{
    const DTYPE: Dtype;
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;
    fn write_le<W: Write>(data: &[Self], w: &mut W) -> io::Result<()>;
    fn read_le<R: Read>(data: &mut [Self], r: &mut R) -> io::Result<()>;
}

macro_rules! impl_real {
    ($ty:ty, $dtype:expr) => {
        impl Real for $ty {
            const DTYPE: Dtype = $dtype;
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $ty
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn exp(self) -> Self {
                self.exp()
            }
            #[inline]
            fn ln(self) -> Self {
                self.ln()
            }
            #[inline]
            fn tanh(self) -> Self {
                self.tanh()
            }
            #[inline]
            fn sqrt(self) -> Self {
                self.sqrt()
            }
            #[inline]
            fn abs(self) -> Self {
                self.abs()
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$ty>::is_finite(self)
            }

            fn write_le<W: Write>(data: &[Self], w: &mut W) -> io::Result<()> {
                for v in data {
                    w.write_all(&v.to_le_bytes())?;
                }
                Ok(())
            }

            fn read_le<R: Read>(data: &mut [Self], r: &mut R) -> io::Result<()> {
                let mut buf = [0u8; std::mem::size_of::<$ty>()];
                for v in data.iter_mut() {
                    r.read_exact(&mut buf)?;
                    *v = <$ty>::from_le_bytes(buf);
                }
                Ok(())
            }
        }
    };
}

impl_real!(f32, Dtype::F32);
impl_real!(f64, Dtype::F64);

/// Dense n-dimensional array in row-major layout. A scalar has the empty
/// shape `[]`. All dimensions are positive and `product(shape) == data.len()`.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self, AutodiffError> {
        if shape.iter().any(|&d| d == 0) {
            return Err(AutodiffError::ZeroDim { shape });
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(AutodiffError::DataShapeMismatch {
                len: data.len(),
                shape,
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::ZERO)
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        let numel: usize = shape.iter().product();
        assert!(shape.iter().all(|&d| d > 0), "zero dimension in {shape:?}");
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; numel],
        }
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<T>) -> Self {
        assert!(!data.is_empty(), "empty vector");
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, AutodiffError> {
        Self::from_vec(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single element of a scalar (or 1-element) tensor.
    pub fn item(&self) -> T {
        assert!(
            self.is_scalar(),
            "item() on tensor with shape {:?}",
            self.shape
        );
        self.data[0]
    }

    /// Rows/cols of a rank-2 tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize), AutodiffError> {
        if self.rank() != 2 {
            return Err(AutodiffError::NotAMatrix {
                op,
                shape: self.shape.clone(),
            });
        }
        Ok((self.shape[0], self.shape[1]))
    }

    pub fn assert_finite(&self, context: &str) -> Result<(), AutodiffError> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(AutodiffError::NonFinite {
                    context: context.to_string(),
                    value: v.to_f64(),
                    index: i,
                });
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64()).collect()
    }
}

impl<T: Real> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        write!(f, "Tensor{:?} [", self.shape)?;
        for (i, v) in self.data.iter().take(PREVIEW).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        if self.data.len() > PREVIEW {
            write!(f, ", ... {} total", self.data.len())?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_shape_product() {
        let err = Tensor::<f64>::from_vec(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, AutodiffError::DataShapeMismatch { .. }));
        let t = Tensor::<f64>::from_vec(vec![2, 3], vec![1.0; 6]).unwrap();
        assert_eq!(t.numel(), 6);
    }

    #[test]
    fn zero_dims_rejected() {
        let err = Tensor::<f32>::from_vec(vec![2, 0], vec![]).unwrap_err();
        assert!(matches!(err, AutodiffError::ZeroDim { .. }));
    }

    #[test]
    fn scalar_has_empty_shape() {
        let s = Tensor::scalar(3.5f64);
        assert_eq!(s.shape(), &[] as &[usize]);
        assert!(s.is_scalar());
        assert_eq!(s.item(), 3.5);
    }

    #[test]
    fn finite_validation_reports_index() {
        let mut t = Tensor::<f64>::zeros(&[3]);
        t.data_mut()[2] = f64::NAN;
        let err = t.assert_finite("loss").unwrap_err();
        match err {
            AutodiffError::NonFinite { index, .. } => assert_eq!(index, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn le_round_trip_is_bitwise() {
        let values = vec![1.0f32, -0.0, f32::MIN_POSITIVE, 3.14159, 1e30];
        let mut buf = Vec::new();
        f32::write_le(&values, &mut buf).unwrap();
        let mut back = vec![0.0f32; values.len()];
        f32::read_le(&mut back, &mut &buf[..]).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
