use crate::real::Real;

/// Dense row-major tensor of rank 1 or 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Option<Self> {
        (shape.iter().product::<usize>() == data.len()).then(|| Tensor { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = T::zero());
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|x| U::of(x.f64())).collect() }
    }
}

/// `out[c] = bias[c] + Σ_r input[r]·kernel[r][c]`.
#[inline]
pub(crate) fn affine<T: Real>(input: &[T], kernel: &Tensor<T>, bias: &[T], out: &mut [T]) {
    out.copy_from_slice(bias);
    for (r, &x) in input.iter().enumerate() {
        if x == T::zero() {
            continue;
        }
        for (o, &k) in out.iter_mut().zip(kernel.row(r)) {
            *o += x * k;
        }
    }
}

/// Backward of [`affine`]: accumulates kernel/bias gradients and writes `d input`.
#[inline]
pub(crate) fn affine_backward<T: Real>(
    input: &[T],
    kernel: &Tensor<T>,
    d_out: &[T],
    d_kernel: &mut Tensor<T>,
    d_bias: &mut [T],
    d_input: &mut [T],
) {
    for (b, &g) in d_bias.iter_mut().zip(d_out) {
        *b += g;
    }
    for (r, &x) in input.iter().enumerate() {
        let krow = kernel.row(r);
        let mut acc = T::zero();
        for (&k, &g) in krow.iter().zip(d_out) {
            acc += k * g;
        }
        d_input[r] = acc;
        if x != T::zero() {
            for (dk, &g) in d_kernel.row_mut(r).iter_mut().zip(d_out) {
                *dk += x * g;
            }
        }
    }
}
