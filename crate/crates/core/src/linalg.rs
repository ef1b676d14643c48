//! Small dense helpers used by the forward and backward passes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::scalar::Scalar;

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub fn log_sum_exp<T: Scalar>(xs: ArrayView1<T>) -> T {
    let m = xs.fold(T::neg_infinity(), |a, &b| a.max(b));
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

pub fn softmax<T: Scalar>(xs: ArrayView1<T>) -> Array1<T> {
    let m = xs.fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut out = xs.mapv(|x| (x - m).exp());
    let z = out.sum();
    out.mapv_inplace(|v| v / z);
    out
}

pub fn softmax_rows<T: Scalar>(xs: ArrayView2<T>) -> Array2<T> {
    let mut out = Array2::zeros(xs.raw_dim());
    for (src, mut dst) in xs.rows().into_iter().zip(out.rows_mut()) {
        dst.assign(&softmax(src));
    }
    out
}

/// Backward of `y = softmax(z)`: returns `dz` given `y` and `dy`.
pub fn softmax_backward<T: Scalar>(y: ArrayView1<T>, dy: ArrayView1<T>) -> Array1<T> {
    let dot = y.dot(&dy);
    let mut dz = dy.to_owned();
    dz.zip_mut_with(&y, |d, &p| *d = p * (*d - dot));
    dz
}

pub fn softmax_rows_backward<T: Scalar>(y: ArrayView2<T>, dy: ArrayView2<T>) -> Array2<T> {
    let mut dz = Array2::zeros(y.raw_dim());
    for ((yr, dyr), mut out) in y.rows().into_iter().zip(dy.rows()).zip(dz.rows_mut()) {
        out.assign(&softmax_backward(yr, dyr));
    }
    dz
}

/// `acc += a ⊗ b`
pub fn add_outer<T: Scalar>(acc: &mut Array2<T>, a: ArrayView1<T>, b: ArrayView1<T>) {
    for (mut row, &ai) in acc.rows_mut().into_iter().zip(a.iter()) {
        if ai != T::zero() {
            row.scaled_add(ai, &b);
        }
    }
}

pub fn select_rows<T: Scalar>(m: ArrayView2<T>, idx: &[usize]) -> Array2<T> {
    m.select(Axis(0), idx)
}

pub fn all_finite<T: Scalar>(xs: impl IntoIterator<Item = T>) -> bool {
    xs.into_iter().all(|x| x.is_finite())
}
