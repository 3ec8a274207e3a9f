//! Small fully connected networks with tanh hidden layers, a linear output
//! layer and hand-written backpropagation.

use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass: `activations[0]` is the input,
/// `activations[k]` the output of layer `k - 1` (after tanh when hidden).
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// Xavier-uniform weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let mut layer = Dense::zeros(pair[0], pair[1]);
            let limit = (6.0 / (pair[0] + pair[1]) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| Error::config(e.to_string()))?;
            for w in layer.weights.iter_mut() {
                *w = dist.sample(rng);
            }
            layers.push(layer);
        }
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(&activations[k], &mut out);
            if k != last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
        }
        ForwardCache { activations }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).activations.pop().unwrap_or_default()
    }

    /// Accumulates into `grads` the parameter gradient of a scalar loss whose
    /// gradient with respect to the network output is `grad_output`.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64], grads: &mut Mlp) {
        let mut delta = grad_output.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &cache.activations[k];
            let g = &mut grads.layers[k];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if k == 0 {
                break;
            }
            // propagate through the weights, then through tanh of layer k-1
            let mut prev = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.bias);
        }
        v
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::config(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                values.len()
            )));
        }
        let mut at = 0;
        for l in self.layers.iter_mut() {
            let n = l.weights.len();
            l.weights.copy_from_slice(&values[at..at + n]);
            at += n;
            let n = l.bias.len();
            l.bias.copy_from_slice(&values[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn param_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    /// Plain SGD: `p -= lr * g`.
    pub fn sgd_step(&mut self, grads: &Mlp, lr: f64) -> Result<()> {
        for (p, g) in self.params_mut().zip(grads.param_iter()) {
            *p -= lr * g;
        }
        if self.param_iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("network parameters became non-finite".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.param_iter().all(f64::is_finite)
    }

    pub fn scale(&mut self, factor: f64) {
        self.params_mut().for_each(|p| *p *= factor);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn shapes_and_param_round_trip() {
        let mut rng = seed::rng(1);
        let mut net = Mlp::new(&[5, 32, 32, 4], &mut rng).unwrap();
        assert_eq!(net.sizes(), vec![5, 32, 32, 4]);
        assert_eq!(net.num_params(), 5 * 32 + 32 + 32 * 32 + 32 + 32 * 4 + 4);
        assert_eq!(net.forward(&[0.1; 5]).len(), 4);
        let p = net.params();
        let mut other = net.zeros_like();
        other.set_params(&p).unwrap();
        assert_eq!(other, net);
        assert!(net.set_params(&p[1..]).is_err());
        net.scale(0.0);
        assert!(net.forward(&[1.0; 5]).iter().all(|v| *v == 0.0));
        assert!(Mlp::new(&[5], &mut rng).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seed::rng(2);
        let net = Mlp::new(&[3, 4, 2], &mut rng).unwrap();
        let x = [0.3, -0.7, 1.1];
        // loss = 0.7 * y0 - 1.3 * y1
        let coeffs = [0.7, -1.3];
        let loss = |n: &Mlp| {
            let y = n.forward(&x);
            y[0] * coeffs[0] + y[1] * coeffs[1]
        };
        let mut grads = net.zeros_like();
        net.backward(&net.forward_cached(&x), &coeffs, &mut grads);
        let analytic = grads.params();
        let base = net.params();
        let h = 1e-6;
        for i in 0..base.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut p = base.clone();
            p[i] += h;
            plus.set_params(&p).unwrap();
            p[i] -= 2.0 * h;
            minus.set_params(&p).unwrap();
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!((numeric - analytic[i]).abs() < 1e-7, "param {i}");
        }
    }
}
