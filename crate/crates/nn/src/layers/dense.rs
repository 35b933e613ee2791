use crate::error::{NnError, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Fully connected layer on `[N]` vectors or row-wise on `[R, N]` matrices.
/// Weight is `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

/// `y[r] = x[r] · W + b` for every row `r` of a `[R, in]` slice.
pub(crate) fn matmul_rows<F: Real>(x: &[F], w: &[F], b: Option<&[F]>, rows: usize, n_in: usize, n_out: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(rows * n_out);
    let mut acc = vec![0f64; n_out];
    for r in 0..rows {
        match b {
            Some(b) => acc.iter_mut().zip(b).for_each(|(a, v)| *a = v.as_f64()),
            None => acc.fill(0.0),
        }
        for (i, &xv) in x[r * n_in..][..n_in].iter().enumerate() {
            let xv = xv.as_f64();
            if xv == 0.0 {
                continue;
            }
            for (a, &wv) in acc.iter_mut().zip(&w[i * n_out..][..n_out]) {
                *a += xv * wv.as_f64();
            }
        }
        out.extend(acc.iter().map(|&a| F::from_f64(a)));
    }
    out
}

/// Given `dy = dL/dy` for `y = x·W (+ b)`, returns `dx` and accumulates
/// `dW` (and `db` when given).
pub(crate) fn matmul_rows_backward<F: Real>(
    x: &[F],
    w: &[F],
    dy: &[F],
    rows: usize,
    n_in: usize,
    n_out: usize,
    dw: &mut [F],
    db: Option<&mut [F]>,
) -> Vec<F> {
    let mut dx = Vec::with_capacity(rows * n_in);
    let mut dw64 = vec![0f64; n_in * n_out];
    let mut db64 = vec![0f64; n_out];
    for r in 0..rows {
        let g = &dy[r * n_out..][..n_out];
        for (d, &gv) in db64.iter_mut().zip(g) {
            *d += gv.as_f64();
        }
        for (i, &xv) in x[r * n_in..][..n_in].iter().enumerate() {
            let xv = xv.as_f64();
            let mut s = 0.0;
            let wrow = &w[i * n_out..][..n_out];
            let dwrow = &mut dw64[i * n_out..][..n_out];
            for ((dwv, &wv), &gv) in dwrow.iter_mut().zip(wrow).zip(g) {
                let gv = gv.as_f64();
                s += wv.as_f64() * gv;
                *dwv += xv * gv;
            }
            dx.push(F::from_f64(s));
        }
    }
    dw.iter_mut().zip(&dw64).for_each(|(d, &v)| *d = *d + F::from_f64(v));
    if let Some(db) = db {
        db.iter_mut().zip(&db64).for_each(|(d, &v)| *d = *d + F::from_f64(v));
    }
    dx
}

impl<F: Real> Dense<F> {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense { weight: Tensor::zeros(&[n_in, n_out]), bias: Tensor::zeros(&[n_out]) }
    }

    pub fn in_features(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn out_features(&self) -> usize {
        self.weight.dims()[1]
    }

    fn rows(&self, x: &Tensor<F>) -> Result<(usize, Vec<usize>)> {
        let n_in = self.in_features();
        match *x.dims() {
            [n] if n == n_in => Ok((1, vec![self.out_features()])),
            [r, n] if n == n_in => Ok((r, vec![r, self.out_features()])),
            _ => Err(NnError::shape("dense", format!("[{n_in}] or [R,{n_in}]"), x.dims())),
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let (rows, dims) = self.rows(x)?;
        let data =
            matmul_rows(x.data(), self.weight.data(), Some(self.bias.data()), rows, self.in_features(), self.out_features());
        Tensor::new(&dims, data)
    }

    /// `grads` = `[d_weight, d_bias]`.
    pub fn backward(&self, x: &Tensor<F>, dy: &Tensor<F>, grads: &mut [Tensor<F>]) -> Result<Tensor<F>> {
        let (rows, dims) = self.rows(x)?;
        if dy.dims() != dims.as_slice() {
            return Err(NnError::shape("dense backward", dims, dy.dims()));
        }
        let (gw, gb) = grads.split_at_mut(1);
        let dx = matmul_rows_backward(
            x.data(),
            self.weight.data(),
            dy.data(),
            rows,
            self.in_features(),
            self.out_features(),
            gw[0].data_mut(),
            Some(gb[0].data_mut()),
        );
        Tensor::new(x.dims(), dx)
    }
}
