use super::NnError;

/// Scalar the engine runs on. Training uses `f32`; gradient checks run the
/// identical code in `f64`.
pub trait Scalar:
    num_traits::Float + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense n-dimensional array with an optional gradient slot of the same
/// shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T: Scalar = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, NnError> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || numel != data.len() {
            return Err(NnError::Tensor(format!(
                "shape {shape:?} does not describe {} values",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); numel],
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Store a gradient; must match the tensor shape.
    pub fn set_grad(&mut self, grad: Vec<T>) -> Result<(), NnError> {
        if grad.len() != self.data.len() {
            return Err(NnError::Tensor(format!(
                "gradient length {} does not match tensor of {} values",
                grad.len(),
                self.data.len()
            )));
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Cast elementwise through f64.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            grad: None,
        }
    }
}
