//! 2-D cross-correlation over `[H, W, C]` feature maps.

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding; output extent `ceil(in / stride)`.
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Geometry {
    h: usize,
    w: usize,
    cin: usize,
    oh: usize,
    ow: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad_top: usize,
    pad_left: usize,
}

fn geometry(in_dims: &[usize], w_dims: &[usize], stride: usize, padding: Padding) -> Result<Geometry> {
    let (&[h, w, cin], &[k, k2, wcin, cout]) = (in_dims, w_dims) else {
        return Err(NnError::shape("conv2d", "input [H,W,Cin], weights [k,k,Cin,Cout]", (in_dims, w_dims)));
    };
    if k != k2 || wcin != cin || stride == 0 || k == 0 {
        return Err(NnError::shape("conv2d", format!("weights [k,k,{cin},Cout], stride>=1"), (w_dims, stride)));
    }
    let (oh, ow, pad_top, pad_left) = match padding {
        Padding::Same => {
            let oh = h.div_ceil(stride);
            let ow = w.div_ceil(stride);
            let ph = ((oh - 1) * stride + k).saturating_sub(h);
            let pw = ((ow - 1) * stride + k).saturating_sub(w);
            (oh, ow, ph / 2, pw / 2)
        }
        Padding::Valid => {
            if h < k || w < k {
                return Err(NnError::shape("conv2d", format!("input at least {k}x{k}"), in_dims));
            }
            ((h - k) / stride + 1, (w - k) / stride + 1, 0, 0)
        }
    };
    Ok(Geometry { h, w, cin, oh, ow, cout, k, stride, pad_top, pad_left })
}

impl Geometry {
    /// Input coordinate for output `o` and kernel tap `t`, if inside the image.
    #[inline]
    fn src(o: usize, t: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        (o * stride + t).checked_sub(pad).filter(|&i| i < extent)
    }
}

/// Cross-correlation: `out[y,x,o] = b[o] + Σ in[y·s+i−p, x·s+j−p, c] · w[i,j,c,o]`.
pub fn conv2d_forward<F: Real>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<F>> {
    let g = geometry(input.dims(), weights.dims(), stride, padding)?;
    if bias.dims() != [g.cout] {
        return Err(NnError::shape("conv2d bias", [g.cout], bias.dims()));
    }
    let x = input.data();
    let wt = weights.data();
    let mut out = Tensor::zeros(&[g.oh, g.ow, g.cout]);
    let mut acc = vec![0f64; g.cout];
    let o = out.data_mut();
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            acc.iter_mut().zip(bias.data()).for_each(|(a, b)| *a = b.as_f64());
            for ky in 0..g.k {
                let Some(iy) = Geometry::src(oy, ky, g.stride, g.pad_top, g.h) else { continue };
                for kx in 0..g.k {
                    let Some(ix) = Geometry::src(ox, kx, g.stride, g.pad_left, g.w) else { continue };
                    let xrow = &x[(iy * g.w + ix) * g.cin..][..g.cin];
                    let wbase = (ky * g.k + kx) * g.cin * g.cout;
                    for (ci, &xv) in xrow.iter().enumerate() {
                        let xv = xv.as_f64();
                        if xv == 0.0 {
                            continue;
                        }
                        let wrow = &wt[wbase + ci * g.cout..][..g.cout];
                        for (a, &wv) in acc.iter_mut().zip(wrow) {
                            *a += xv * wv.as_f64();
                        }
                    }
                }
            }
            let dst = &mut o[(oy * g.ow + ox) * g.cout..][..g.cout];
            dst.iter_mut().zip(&acc).for_each(|(d, &a)| *d = F::from_f64(a));
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`]: `(d_input, d_weights, d_bias)`.
pub fn conv2d_backward<F: Real>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    stride: usize,
    padding: Padding,
    d_out: &Tensor<F>,
) -> Result<(Tensor<F>, Tensor<F>, Tensor<F>)> {
    let g = geometry(input.dims(), weights.dims(), stride, padding)?;
    if d_out.dims() != [g.oh, g.ow, g.cout] {
        return Err(NnError::shape("conv2d backward", [g.oh, g.ow, g.cout], d_out.dims()));
    }
    let x = input.data();
    let wt = weights.data();
    let dy = d_out.data();
    let mut dx = vec![0f64; x.len()];
    let mut dw = vec![0f64; wt.len()];
    let mut db = vec![0f64; g.cout];
    let mut grow = vec![0f64; g.cout];
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let src = &dy[(oy * g.ow + ox) * g.cout..][..g.cout];
            grow.iter_mut().zip(src).for_each(|(a, b)| *a = b.as_f64());
            if grow.iter().all(|&v| v == 0.0) {
                continue;
            }
            db.iter_mut().zip(&grow).for_each(|(d, &v)| *d += v);
            for ky in 0..g.k {
                let Some(iy) = Geometry::src(oy, ky, g.stride, g.pad_top, g.h) else { continue };
                for kx in 0..g.k {
                    let Some(ix) = Geometry::src(ox, kx, g.stride, g.pad_left, g.w) else { continue };
                    let xbase = (iy * g.w + ix) * g.cin;
                    let wbase = (ky * g.k + kx) * g.cin * g.cout;
                    for ci in 0..g.cin {
                        let xv = x[xbase + ci].as_f64();
                        let wrow = &wt[wbase + ci * g.cout..][..g.cout];
                        let dwrow = &mut dw[wbase + ci * g.cout..][..g.cout];
                        let mut s = 0.0;
                        for ((dwv, &wv), &gv) in dwrow.iter_mut().zip(wrow).zip(&grow) {
                            s += wv.as_f64() * gv;
                            *dwv += xv * gv;
                        }
                        dx[xbase + ci] += s;
                    }
                }
            }
        }
    }
    let cast = |v: Vec<f64>, dims: &[usize]| Tensor::from_fn(dims, |i| F::from_f64(v[i]));
    Ok((cast(dx, input.dims()), cast(dw, weights.dims()), cast(db, &[g.cout])))
}

/// A convolution layer with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<F> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
    pub stride: usize,
    pub padding: Padding,
}

impl<F: Real> Conv2d<F> {
    pub fn zeros(k: usize, cin: usize, cout: usize, stride: usize, padding: Padding) -> Self {
        Conv2d { weight: Tensor::zeros(&[k, k, cin, cout]), bias: Tensor::zeros(&[cout]), stride, padding }
    }

    pub fn kernel(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[3]
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        conv2d_forward(x, &self.weight, &self.bias, self.stride, self.padding)
    }

    /// Returns `d_input` and writes `[d_weight, d_bias]` into `grads`.
    pub fn backward(&self, x: &Tensor<F>, dy: &Tensor<F>, grads: &mut [Tensor<F>]) -> Result<Tensor<F>> {
        let (dx, dw, db) = conv2d_backward(x, &self.weight, self.stride, self.padding, dy)?;
        grads[0].add_assign(&dw);
        grads[1].add_assign(&db);
        Ok(dx)
    }
}

/// A 1×1 channel-mixing convolution followed by a k×k spatial convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseSeparableConv<F> {
    pub mix: Conv2d<F>,
    pub spatial: Conv2d<F>,
}

impl<F: Real> PointwiseSeparableConv<F> {
    pub fn zeros(k: usize, cin: usize, cmid: usize, cout: usize, stride: usize) -> Self {
        PointwiseSeparableConv {
            mix: Conv2d::zeros(1, cin, cmid, 1, Padding::Same),
            spatial: Conv2d::zeros(k, cmid, cout, stride, Padding::Same),
        }
    }

    /// Returns the output and the intermediate (mixed) map.
    pub fn forward(&self, x: &Tensor<F>) -> Result<(Tensor<F>, Tensor<F>)> {
        let mid = self.mix.forward(x)?;
        let out = self.spatial.forward(&mid)?;
        Ok((out, mid))
    }

    /// `grads` = `[mix.weight, mix.bias, spatial.weight, spatial.bias]`.
    pub fn backward(&self, x: &Tensor<F>, mid: &Tensor<F>, dy: &Tensor<F>, grads: &mut [Tensor<F>]) -> Result<Tensor<F>> {
        let (g_mix, g_spatial) = grads.split_at_mut(2);
        let dmid = self.spatial.backward(mid, dy, g_spatial)?;
        self.mix.backward(x, &dmid, g_mix)
    }
}

/// `pointwise_separable_conv(input, mix, spatial)` with zero biases on both
/// stages. `mix` is `[Cin, Cmid]`, `spatial` is `[k, k, Cmid, Cout]`.
pub fn pointwise_separable_conv<F: Real>(
    input: &Tensor<F>,
    mix: &Tensor<F>,
    spatial: &Tensor<F>,
    stride: usize,
) -> Result<Tensor<F>> {
    let &[cin, cmid] = mix.dims() else {
        return Err(NnError::shape("pointwise_separable_conv", "mix [Cin,Cmid]", mix.dims()));
    };
    let mix4 = mix.clone().reshape(&[1, 1, cin, cmid])?;
    let cout = *spatial.dims().last().unwrap_or(&0);
    let mid = conv2d_forward(input, &mix4, &Tensor::zeros(&[cmid]), 1, Padding::Same)?;
    conv2d_forward(&mid, spatial, &Tensor::zeros(&[cout]), stride, Padding::Same)
}
