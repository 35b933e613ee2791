use crate::error::{NnError, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlattenMode {
    /// `[H, W, C]` to `[H·W·C]`.
    All,
    /// `[H, W, C]` to `[H·W, C]`, one token per spatial cell.
    Spatial,
}

pub fn flatten<F: Real>(x: &Tensor<F>, mode: FlattenMode) -> Result<Tensor<F>> {
    let &[h, w, c] = x.dims() else {
        return Err(NnError::shape("flatten", "[H,W,C]", x.dims()));
    };
    match mode {
        FlattenMode::All => x.clone().reshape(&[h * w * c]),
        FlattenMode::Spatial => x.clone().reshape(&[h * w, c]),
    }
}

/// Concatenates `[H, W, C_i]` maps along the channel axis.
pub fn concat_channels<F: Real>(parts: &[&Tensor<F>]) -> Result<Tensor<F>> {
    let Some(first) = parts.first() else {
        return Err(NnError::shape("concat", "at least one tensor", 0));
    };
    let &[h, w, _] = first.dims() else {
        return Err(NnError::shape("concat", "[H,W,C]", first.dims()));
    };
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        match *p.dims() {
            [ph, pw, c] if ph == h && pw == w => widths.push(c),
            _ => return Err(NnError::shape("concat", format!("[{h},{w},C]"), p.dims())),
        }
    }
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(h * w * total);
    for cell in 0..h * w {
        for (p, &c) in parts.iter().zip(&widths) {
            data.extend_from_slice(&p.data()[cell * c..][..c]);
        }
    }
    Tensor::new(&[h, w, total], data)
}

/// Inverse of [`concat_channels`].
pub fn split_channels<F: Real>(x: &Tensor<F>, widths: &[usize]) -> Result<Vec<Tensor<F>>> {
    let &[h, w, c] = x.dims() else {
        return Err(NnError::shape("split", "[H,W,C]", x.dims()));
    };
    if widths.iter().sum::<usize>() != c {
        return Err(NnError::shape("split", c, widths));
    }
    let mut out: Vec<Vec<F>> = widths.iter().map(|&wd| Vec::with_capacity(h * w * wd)).collect();
    for cell in x.data().chunks(c) {
        let mut off = 0;
        for (o, &wd) in out.iter_mut().zip(widths) {
            o.extend_from_slice(&cell[off..off + wd]);
            off += wd;
        }
    }
    out.into_iter().zip(widths).map(|(d, &wd)| Tensor::new(&[h, w, wd], d)).collect()
}

/// Learned additive embedding for an `[N, D]` token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalEmbedding<F> {
    pub table: Tensor<F>,
}

impl<F: Real> PositionalEmbedding<F> {
    pub fn zeros(tokens: usize, dim: usize) -> Self {
        PositionalEmbedding { table: Tensor::zeros(&[tokens, dim]) }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        if x.dims() != self.table.dims() {
            return Err(NnError::shape("positional_embedding", self.table.dims(), x.dims()));
        }
        let mut y = x.clone();
        y.add_assign(&self.table);
        Ok(y)
    }

    pub fn backward(&self, dy: &Tensor<F>, grads: &mut [Tensor<F>]) -> Tensor<F> {
        grads[0].add_assign(dy);
        dy.clone()
    }
}

/// Mean over tokens: `[N, D]` to `[D]`.
pub fn mean_pool<F: Real>(x: &Tensor<F>) -> Result<Tensor<F>> {
    let &[n, d] = x.dims() else {
        return Err(NnError::shape("mean_pool", "[N,D]", x.dims()));
    };
    let mut acc = vec![0f64; d];
    for row in x.data().chunks(d.max(1)) {
        acc.iter_mut().zip(row).for_each(|(a, v)| *a += v.as_f64());
    }
    Tensor::new(&[d], acc.into_iter().map(|a| F::from_f64(a / n as f64)).collect())
}

pub fn mean_pool_backward<F: Real>(input_dims: &[usize], dy: &Tensor<F>) -> Tensor<F> {
    let n = input_dims[0];
    let d = input_dims[1];
    let inv = 1.0 / n as f64;
    Tensor::from_fn(input_dims, |i| F::from_f64(dy.data()[i % d].as_f64() * inv))
}
