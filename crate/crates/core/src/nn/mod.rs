//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat `Vec<f64>`; each layer owns a contiguous
//! weight block (row-major, `inputs x outputs`) followed by its bias block.
//! Batched inputs are row-major `batch x width` slices.

mod checkpoint;

pub use checkpoint::{load_network, read_network, save_network, write_network, CHECKPOINT_MAGIC};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Elu,
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Elu => 0,
            Activation::Tanh => 1,
            Activation::Relu => 2,
            Activation::Linear => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Elu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Relu),
            3 => Some(Activation::Linear),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Elu => {
                if a > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerLayout {
    pub fn weight_len(&self) -> usize {
        self.inputs * self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layer_sizes: Vec<usize>,
    layers: Vec<LayerLayout>,
    values: Vec<f64>,
}

/// One real per parameter of the network it was created for.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub values: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        GradientSet {
            values: vec![0.0; params.values.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (g, o) in self.values.iter_mut().zip(&other.values) {
            *g += scale * o;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&g| g == 0.0)
    }
}

/// Activations recorded during a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache always holds the input")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl NetworkParams {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
    ///
    /// `hidden_activation` applies to every layer but the last, which uses
    /// `output_activation`.
    pub fn init(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(layer_sizes, hidden_activation, output_activation, &mut rng)
    }

    pub fn init_with_rng<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let activations: Vec<Activation> = (0..layer_sizes.len().saturating_sub(1))
            .map(|i| {
                if i + 2 == layer_sizes.len() {
                    output_activation
                } else {
                    hidden_activation
                }
            })
            .collect();
        let mut params = Self::zeros(layer_sizes, &activations)?;
        for layer in params.layers.clone() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut params.values[layer.weight_offset..layer.weight_offset + layer.weight_len()] {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Ok(params)
    }

    /// All-zero network with one activation per weight layer.
    pub fn zeros(layer_sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "a network needs at least an input and an output width, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be positive, got {layer_sizes:?}"
            )));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(Error::shape(
                "activation list",
                layer_sizes.len() - 1,
                activations.len(),
            ));
        }
        let mut layers = Vec::with_capacity(activations.len());
        let mut offset = 0;
        for (pair, &activation) in layer_sizes.windows(2).zip(activations) {
            let (inputs, outputs) = (pair[0], pair[1]);
            let weight_offset = offset;
            let bias_offset = weight_offset + inputs * outputs;
            offset = bias_offset + outputs;
            layers.push(LayerLayout {
                inputs,
                outputs,
                activation,
                weight_offset,
                bias_offset,
            });
        }
        Ok(NetworkParams {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            values: vec![0.0; offset],
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[LayerLayout] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let l = &self.layers[layer];
        &self.values[l.weight_offset..l.weight_offset + l.weight_len()]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.values[l.weight_offset..l.weight_offset + l.weight_len()]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let l = &self.layers[layer];
        &self.values[l.bias_offset..l.bias_offset + l.outputs]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.values[l.bias_offset..l.bias_offset + l.outputs]
    }

    /// True when `other` has the same widths and activations.
    pub fn same_shape(&self, other: &NetworkParams) -> bool {
        self.layers == other.layers
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input, 1)?.activations.pop().unwrap())
    }

    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.forward_cached(inputs, batch)?.activations.pop().unwrap())
    }

    pub fn forward_cached(&self, inputs: &[f64], batch: usize) -> Result<ForwardCache> {
        let width = self.input_width();
        if inputs.len() != batch * width {
            return Err(Error::shape("network input", batch * width, inputs.len()));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.to_vec());
        for layer in &self.layers {
            let x = activations.last().unwrap();
            let mut z = Vec::with_capacity(batch * layer.outputs);
            let bias = &self.values[layer.bias_offset..layer.bias_offset + layer.outputs];
            for _ in 0..batch {
                z.extend_from_slice(bias);
            }
            let w = &self.values[layer.weight_offset..layer.weight_offset + layer.weight_len()];
            gemm(
                batch,
                layer.inputs,
                layer.outputs,
                x,
                (layer.inputs, 1),
                w,
                (layer.outputs, 1),
                &mut z,
                layer.outputs,
            );
            if layer.activation != Activation::Linear {
                z.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            }
            activations.push(z);
        }
        Ok(ForwardCache { batch, activations })
    }

    /// Single-sample convenience over [`NetworkParams::backward_batch`].
    ///
    /// Returns the gradient of `upstream . output` with respect to the
    /// parameters and to the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(GradientSet, Vec<f64>)> {
        let cache = self.forward_cached(input, 1)?;
        let mut grads = GradientSet::zeros_like(self);
        let input_grad = self.backward_batch(&cache, upstream, Some(&mut grads))?;
        Ok((grads, input_grad))
    }

    /// Reverse pass over a cached batch.
    ///
    /// Parameter gradients are *accumulated* into `param_grads` when given,
    /// summed over the batch; any averaging belongs in `upstream`. Returns
    /// the input gradient (`batch x input_width`).
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        mut param_grads: Option<&mut GradientSet>,
    ) -> Result<Vec<f64>> {
        let batch = cache.batch;
        if upstream.len() != batch * self.output_width() {
            return Err(Error::shape(
                "upstream gradient",
                batch * self.output_width(),
                upstream.len(),
            ));
        }
        if let Some(g) = param_grads.as_deref() {
            if g.values.len() != self.values.len() {
                return Err(Error::shape("gradient set", self.values.len(), g.values.len()));
            }
        }
        let mut delta = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.activations[i + 1];
            if layer.activation != Activation::Linear {
                for (d, &a) in delta.iter_mut().zip(out) {
                    *d *= layer.activation.derivative_from_output(a);
                }
            }
            let x = &cache.activations[i];
            if let Some(g) = param_grads.as_deref_mut() {
                let (gw, rest) = g.values[layer.weight_offset..].split_at_mut(layer.weight_len());
                // dW += X^T . delta
                gemm(
                    layer.inputs,
                    batch,
                    layer.outputs,
                    x,
                    (1, layer.inputs),
                    &delta,
                    (layer.outputs, 1),
                    gw,
                    layer.outputs,
                );
                let gb = &mut rest[..layer.outputs];
                for row in delta.chunks_exact(layer.outputs) {
                    for (b, d) in gb.iter_mut().zip(row) {
                        *b += d;
                    }
                }
            }
            // dX = delta . W^T
            let w = &self.values[layer.weight_offset..layer.weight_offset + layer.weight_len()];
            let mut next = vec![0.0; batch * layer.inputs];
            gemm(
                batch,
                layer.outputs,
                layer.inputs,
                &delta,
                (layer.outputs, 1),
                w,
                (1, layer.outputs),
                &mut next,
                layer.inputs,
            );
            delta = next;
        }
        Ok(delta)
    }

    /// Sum of squared weights (biases excluded) and its gradient.
    pub fn l2_penalty(&self) -> (f64, GradientSet) {
        let mut grads = GradientSet::zeros_like(self);
        let mut total = 0.0;
        for layer in &self.layers {
            let range = layer.weight_offset..layer.weight_offset + layer.weight_len();
            for (g, &w) in grads.values[range.clone()].iter_mut().zip(&self.values[range]) {
                total += w * w;
                *g = 2.0 * w;
            }
        }
        (total, grads)
    }

    /// Polyak averaging: `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &NetworkParams, tau: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("tau must lie in [0, 1], got {tau}")));
        }
        if !self.same_shape(online) {
            return Err(Error::shape("soft update", self.values.len(), online.values.len()));
        }
        if tau == 1.0 {
            self.values.copy_from_slice(&online.values);
            return Ok(());
        }
        for (t, &o) in self.values.iter_mut().zip(&online.values) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        Ok(())
    }
}

/// Functional form of [`NetworkParams::soft_update_from`].
pub fn soft_update(target: &NetworkParams, online: &NetworkParams, tau: f64) -> Result<NetworkParams> {
    let mut next = target.clone();
    next.soft_update_from(online, tau)?;
    Ok(next)
}

/// `c (m x n, row stride ldc) += a (m x k) . b (k x n)`, strides as (row, col).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    c: &mut [f64],
    ldc: usize,
) {
    debug_assert!(c.len() >= m * ldc);
    // SAFETY: the slice lengths cover every index addressed by the strides;
    // all call sites above pass dense row-major or transposed views.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            1.0,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        Self::with_betas(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(params: &NetworkParams, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; params.num_params()],
            second_moment: vec![0.0; params.num_params()],
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// One bias-corrected Adam step. Non-finite gradients reject the update
    /// and leave both the parameters and the optimizer state untouched.
    #[allow(clippy::needless_range_loop)]
    pub fn step(&mut self, params: &mut NetworkParams, grads: &GradientSet, learning_rate: f64) -> Result<()> {
        let n = params.num_params();
        if grads.values.len() != n || self.first_moment.len() != n {
            return Err(Error::shape("adam step", n, grads.values.len()));
        }
        if let Some(i) = grads.values.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient component {} at index {i}",
                grads.values[i]
            )));
        }
        let t = self.step + 1;
        let correction1 = 1.0 - self.beta1.powf(t as f64);
        let correction2 = 1.0 - self.beta2.powf(t as f64);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let mut updated = params.values.clone();
        for i in 0..n {
            let g = grads.values[i];
            let m = b1 * self.first_moment[i] + (1.0 - b1) * g;
            let v = b2 * self.second_moment[i] + (1.0 - b2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / correction1;
            let v_hat = v / correction2;
            updated[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
        if let Some(i) = updated.iter().position(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!("adam step produced a non-finite parameter at index {i}")));
        }
        params.values = updated;
        self.step = t;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(w: f64, b: f64) -> NetworkParams {
        let mut p = NetworkParams::zeros(&[1, 1], &[Activation::Linear]).unwrap();
        p.weights_mut(0)[0] = w;
        p.biases_mut(0)[0] = b;
        p
    }

    #[test]
    fn init_biases_zero_and_deterministic() {
        let a = NetworkParams::init(&[2, 1], Activation::Elu, Activation::Linear, 7).unwrap();
        let b = NetworkParams::init(&[2, 1], Activation::Elu, Activation::Linear, 7).unwrap();
        assert_eq!(a.biases(0), &[0.0]);
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn init_shapes_chain() {
        let p = NetworkParams::init(&[8, 128, 128, 128, 2], Activation::Elu, Activation::Tanh, 1).unwrap();
        let shapes: Vec<(usize, usize)> = p.layers().iter().map(|l| (l.inputs, l.outputs)).collect();
        assert_eq!(shapes, vec![(8, 128), (128, 128), (128, 128), (128, 2)]);
        for (i, l) in p.layers().iter().enumerate() {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            assert!(p.weights(i).iter().all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(matches!(
            NetworkParams::init(&[], Activation::Elu, Activation::Linear, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            NetworkParams::init(&[3], Activation::Elu, Activation::Linear, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            NetworkParams::init(&[3, 0, 1], Activation::Elu, Activation::Linear, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn forward_zero_network() {
        let p = NetworkParams::zeros(&[3, 4, 2], &[Activation::Elu, Activation::Linear]).unwrap();
        assert_eq!(p.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_affine() {
        assert_eq!(affine(2.0, 1.0).forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn forward_tanh_bounded() {
        let mut p = NetworkParams::init(&[2, 3, 2], Activation::Relu, Activation::Tanh, 3).unwrap();
        p.values_mut().iter_mut().for_each(|v| *v *= 50.0);
        let y = p.forward(&[100.0, -40.0]).unwrap();
        assert!(y.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn forward_shape_mismatch() {
        let p = affine(1.0, 0.0);
        assert!(matches!(p.forward(&[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_zero_upstream() {
        let p = NetworkParams::init(&[3, 5, 2], Activation::Elu, Activation::Tanh, 9).unwrap();
        let (g, dx) = p.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(g.is_zero());
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_affine_closed_form() {
        let mut p = NetworkParams::zeros(&[2, 2], &[Activation::Linear]).unwrap();
        // W is inputs x outputs: W[i][j] maps input i to output j.
        p.weights_mut(0).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        p.biases_mut(0).copy_from_slice(&[0.5, -0.5]);
        let x = [2.0, -1.0];
        let g = [0.3, -0.7];
        let (grads, dx) = p.backward(&x, &g).unwrap();
        // d/dW[i][j] = x_i g_j
        assert_eq!(&grads.values[..4], &[0.6, -1.4, -0.3, 0.7]);
        assert_eq!(&grads.values[4..], &[0.3, -0.7]);
        // input grad = W g
        assert!((dx[0] - (1.0 * 0.3 + 2.0 * -0.7)).abs() < 1e-15);
        assert!((dx[1] - (3.0 * 0.3 + 4.0 * -0.7)).abs() < 1e-15);
    }

    #[test]
    fn backward_batch_matches_sum_of_singles() {
        let p = NetworkParams::init(&[3, 6, 2], Activation::Elu, Activation::Tanh, 4).unwrap();
        let xs = [0.1, -0.3, 0.8, 1.2, 0.4, -0.9];
        let ups = [0.5, -1.0, 0.25, 2.0];
        let cache = p.forward_cached(&xs, 2).unwrap();
        let mut batch_grads = GradientSet::zeros_like(&p);
        let dx = p.backward_batch(&cache, &ups, Some(&mut batch_grads)).unwrap();
        let (g0, dx0) = p.backward(&xs[..3], &ups[..2]).unwrap();
        let (g1, dx1) = p.backward(&xs[3..], &ups[2..]).unwrap();
        for i in 0..g0.len() {
            assert!((batch_grads.values[i] - g0.values[i] - g1.values[i]).abs() < 1e-12);
        }
        for i in 0..3 {
            assert!((dx[i] - dx0[i]).abs() < 1e-12);
            assert!((dx[3 + i] - dx1[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_zero_grads_leave_params() {
        let mut p = NetworkParams::init(&[2, 3, 1], Activation::Elu, Activation::Linear, 5).unwrap();
        let before = p.clone();
        let mut opt = AdamState::new(&p);
        opt.step(&mut p, &GradientSet::zeros_like(&before), 1e-3).unwrap();
        assert_eq!(p, before);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut p = affine(0.0, 0.0);
        let mut opt = AdamState::new(&p);
        let g = GradientSet { values: vec![1.0, 0.0] };
        opt.step(&mut p, &g, 1e-3).unwrap();
        assert!((p.weights(0)[0] + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut p = affine(0.5, 0.0);
        let mut opt = AdamState::new(&p);
        let g = GradientSet { values: vec![f64::NAN, 0.0] };
        assert!(matches!(opt.step(&mut p, &g, 1e-3), Err(Error::Numeric(_))));
        assert_eq!(opt.step, 0);
        assert_eq!(p.weights(0)[0], 0.5);
    }

    #[test]
    fn adam_descends_quadratic() {
        // f(w) = w^2, gradient 2w
        let mut p = affine(1.0, 0.0);
        let mut opt = AdamState::new(&p);
        for _ in 0..100 {
            let w = p.weights(0)[0];
            opt.step(&mut p, &GradientSet { values: vec![2.0 * w, 0.0] }, 1e-2).unwrap();
        }
        let w = p.weights(0)[0];
        assert!(w.abs() < 1.0);
        // Reference value from an independent scalar replay of the recurrence.
        assert!((w - 0.224_446_045_231_879_08).abs() < 1e-12, "{w}");
    }

    #[test]
    fn l2_examples() {
        let zero = NetworkParams::zeros(&[2, 2], &[Activation::Linear]).unwrap();
        let (v, g) = zero.l2_penalty();
        assert_eq!(v, 0.0);
        assert!(g.is_zero());

        let p = affine(3.0, 5.0);
        let (v, g) = p.l2_penalty();
        assert_eq!(v, 9.0);
        assert_eq!(g.values, vec![6.0, 0.0]);
    }

    #[test]
    fn soft_update_examples() {
        let online = affine(2.0, -4.0);
        let target = affine(0.0, 0.0);
        assert_eq!(soft_update(&target, &online, 1.0).unwrap(), online);
        assert_eq!(soft_update(&target, &online, 0.0).unwrap(), target);
        let half = soft_update(&target, &online, 0.5).unwrap();
        assert_eq!(half.values(), &[1.0, -2.0]);
        assert!(matches!(soft_update(&target, &online, 1.5), Err(Error::Config(_))));
        assert!(matches!(soft_update(&target, &online, -0.1), Err(Error::Config(_))));
    }
}
