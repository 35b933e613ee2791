use crate::error::{NnError, Result};
use crate::layers::activation::{relu, relu_backward};
use crate::layers::conv::{Conv2d, Padding};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// `ReLU(x + conv2(ReLU(conv1(x))))`, both convs 3×3, stride 1, same padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock<F> {
    pub conv1: Conv2d<F>,
    pub conv2: Conv2d<F>,
}

/// Intermediates saved by [`ResidualBlock::forward`].
#[derive(Debug, Clone)]
pub struct ResidualCache<F> {
    pub pre1: Tensor<F>,
    pub act1: Tensor<F>,
    pub sum: Tensor<F>,
}

impl<F: Real> ResidualBlock<F> {
    pub fn zeros(channels: usize) -> Self {
        ResidualBlock {
            conv1: Conv2d::zeros(3, channels, channels, 1, Padding::Same),
            conv2: Conv2d::zeros(3, channels, channels, 1, Padding::Same),
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<(Tensor<F>, ResidualCache<F>)> {
        if x.dims().len() != 3 || x.dims()[2] != self.conv1.in_channels() {
            return Err(NnError::shape("residual_block", format!("[H,W,{}]", self.conv1.in_channels()), x.dims()));
        }
        let pre1 = self.conv1.forward(x)?;
        let act1 = relu(&pre1);
        let mut sum = self.conv2.forward(&act1)?;
        sum.add_assign(x);
        Ok((relu(&sum), ResidualCache { pre1, act1, sum }))
    }

    /// `grads` = `[conv1.w, conv1.b, conv2.w, conv2.b]`.
    pub fn backward(&self, x: &Tensor<F>, cache: &ResidualCache<F>, dy: &Tensor<F>, grads: &mut [Tensor<F>]) -> Result<Tensor<F>> {
        let (g1, g2) = grads.split_at_mut(2);
        let dsum = relu_backward(&cache.sum, dy);
        let dact1 = self.conv2.backward(&cache.act1, &dsum, g2)?;
        let dpre1 = relu_backward(&cache.pre1, &dact1);
        let mut dx = self.conv1.backward(x, &dpre1, g1)?;
        dx.add_assign(&dsum);
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_relu_of_input() {
        let block = ResidualBlock::<f32>::zeros(2);
        let x = Tensor::new(&[2, 2, 2], vec![-1.0, 2.0, 0.5, -0.5, 3.0, -3.0, 0.0, 1.0]).unwrap();
        let (y, _) = block.forward(&x).unwrap();
        assert_eq!(y, relu(&x));
    }

    #[test]
    fn zero_input_gives_zero() {
        let mut block = ResidualBlock::<f64>::zeros(3);
        block.conv1.weight.fill(0.3);
        block.conv2.weight.fill(-0.2);
        let (y, _) = block.forward(&Tensor::zeros(&[4, 4, 3])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_channel_change() {
        let block = ResidualBlock::<f32>::zeros(3);
        assert!(matches!(block.forward(&Tensor::zeros(&[4, 4, 2])), Err(NnError::ShapeMismatch { .. })));
    }
}
