use crate::error::{NnError, Result};
use crate::layers::dense::{matmul_rows, matmul_rows_backward};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Multi-head self-attention over `[N, D]` tokens with a residual
/// connection: `y = x + (concat_h softmax(Q_h K_hᵀ / √d) V_h) · Wo + bo`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention<F> {
    pub heads: usize,
    pub wq: Tensor<F>,
    pub bq: Tensor<F>,
    pub wk: Tensor<F>,
    pub bk: Tensor<F>,
    pub wv: Tensor<F>,
    pub bv: Tensor<F>,
    pub wo: Tensor<F>,
    pub bo: Tensor<F>,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<F> {
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// `[heads, N, N]` attention weights.
    pub probs: Vec<f64>,
    attended: Vec<F>,
}

impl<F: Real> MultiHeadAttention<F> {
    pub fn zeros(dim: usize, heads: usize) -> Result<Self> {
        if heads == 0 || dim % heads != 0 {
            return Err(NnError::shape("multi_head_attention", format!("D divisible by heads ({heads})"), dim));
        }
        let w = || Tensor::zeros(&[dim, dim]);
        let b = || Tensor::zeros(&[dim]);
        Ok(MultiHeadAttention { heads, wq: w(), bq: b(), wk: w(), bk: b(), wv: w(), bv: b(), wo: w(), bo: b() })
    }

    /// Identity projections with zero biases.
    pub fn identity(dim: usize, heads: usize) -> Result<Self> {
        let mut a = Self::zeros(dim, heads)?;
        for w in [&mut a.wq, &mut a.wk, &mut a.wv, &mut a.wo] {
            *w = Tensor::from_fn(&[dim, dim], |i| if i / dim == i % dim { F::one() } else { F::zero() });
        }
        Ok(a)
    }

    pub fn dim(&self) -> usize {
        self.wq.dims()[0]
    }

    fn head_dim(&self) -> usize {
        self.dim() / self.heads
    }

    fn tokens(&self, x: &Tensor<F>) -> Result<usize> {
        match *x.dims() {
            [n, d] if d == self.dim() && n > 0 => Ok(n),
            _ => Err(NnError::shape("multi_head_attention", format!("[N,{}]", self.dim()), x.dims())),
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<(Tensor<F>, AttentionCache<F>)> {
        let n = self.tokens(x)?;
        let d = self.dim();
        let hd = self.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let proj = |w: &Tensor<F>, b: &Tensor<F>| matmul_rows(x.data(), w.data(), Some(b.data()), n, d, d);
        let (q, k, v) = (proj(&self.wq, &self.bq), proj(&self.wk, &self.bk), proj(&self.wv, &self.bv));
        let mut probs = vec![0f64; self.heads * n * n];
        let mut attended = vec![F::zero(); n * d];
        for h in 0..self.heads {
            let off = h * hd;
            for i in 0..n {
                let row = &mut probs[(h * n + i) * n..][..n];
                let qi = &q[i * d + off..][..hd];
                for (j, p) in row.iter_mut().enumerate() {
                    let kj = &k[j * d + off..][..hd];
                    *p = qi.iter().zip(kj).map(|(a, b)| a.as_f64() * b.as_f64()).sum::<f64>() * scale;
                }
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.iter_mut().for_each(|p| *p = (*p - m).exp());
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= s);
                for c in 0..hd {
                    let a: f64 = row.iter().enumerate().map(|(j, p)| p * v[j * d + off + c].as_f64()).sum();
                    attended[i * d + off + c] = F::from_f64(a);
                }
            }
        }
        let out = matmul_rows(&attended, self.wo.data(), Some(self.bo.data()), n, d, d);
        let y = out.iter().zip(x.data()).map(|(&o, &xv)| o + xv).collect();
        Ok((Tensor::new(&[n, d], y)?, AttentionCache { q, k, v, probs, attended }))
    }

    /// `grads` = `[wq, bq, wk, bk, wv, bv, wo, bo]`.
    pub fn backward(&self, x: &Tensor<F>, cache: &AttentionCache<F>, dy: &Tensor<F>, grads: &mut [Tensor<F>]) -> Result<Tensor<F>> {
        let n = self.tokens(x)?;
        if dy.dims() != x.dims() {
            return Err(NnError::shape("multi_head_attention backward", x.dims(), dy.dims()));
        }
        let d = self.dim();
        let hd = self.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let (gq, rest) = grads.split_at_mut(2);
        let (gk, rest) = rest.split_at_mut(2);
        let (gv, go) = rest.split_at_mut(2);

        let (gwo, gbo) = go.split_at_mut(1);
        let dattended =
            matmul_rows_backward(&cache.attended, self.wo.data(), dy.data(), n, d, d, gwo[0].data_mut(), Some(gbo[0].data_mut()));

        let mut dq = vec![0f64; n * d];
        let mut dk = vec![0f64; n * d];
        let mut dv = vec![0f64; n * d];
        let mut dp = vec![0f64; n];
        for h in 0..self.heads {
            let off = h * hd;
            for i in 0..n {
                let p = &cache.probs[(h * n + i) * n..][..n];
                let da = &dattended[i * d + off..][..hd];
                for (j, dpj) in dp.iter_mut().enumerate() {
                    let vj = &cache.v[j * d + off..][..hd];
                    *dpj = da.iter().zip(vj).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
                    for c in 0..hd {
                        dv[j * d + off + c] += p[j] * da[c].as_f64();
                    }
                }
                let dot: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
                for j in 0..n {
                    let ds = p[j] * (dp[j] - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for c in 0..hd {
                        dq[i * d + off + c] += ds * cache.k[j * d + off + c].as_f64();
                        dk[j * d + off + c] += ds * cache.q[i * d + off + c].as_f64();
                    }
                }
            }
        }
        let mut dx: Vec<f64> = dy.data().iter().map(|v| v.as_f64()).collect();
        for (g, w, dproj) in [(gq, &self.wq, dq), (gk, &self.wk, dk), (gv, &self.wv, dv)] {
            let dproj: Vec<F> = dproj.into_iter().map(F::from_f64).collect();
            let (gw, gb) = g.split_at_mut(1);
            let part = matmul_rows_backward(x.data(), w.data(), &dproj, n, d, d, gw[0].data_mut(), Some(gb[0].data_mut()));
            dx.iter_mut().zip(part).for_each(|(a, b)| *a += b.as_f64());
        }
        Tensor::new(x.dims(), dx.into_iter().map(F::from_f64).collect())
    }
}
