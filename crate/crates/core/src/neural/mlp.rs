use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Relu => (out > 0.0) as u8 as f64,
            Activation::Tanh => 1.0 - out * out,
            Activation::Identity => 1.0,
            Activation::Sigmoid => out * (1.0 - out),
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
            Activation::Sigmoid => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            2 => Activation::Identity,
            3 => Activation::Sigmoid,
            _ => return None,
        })
    }
}

/// Dense layer. `weights` is row-major `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Layer { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs], activation }
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, b)| {
            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            self.activation.apply(b + dot)
        }));
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Multilayer perceptron. Also used as its own gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer outputs of one forward pass; `values[0]` is the input.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub values: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// Random network with layer widths `sizes` (input first). ReLU layers use
    /// He-normal initialisation, the rest Xavier-normal; biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        assert_eq!(sizes.len(), activations.len() + 1, "one activation per layer");
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (inputs, outputs) = (w[0], w[1]);
                let std = match activation {
                    Activation::Relu => (2.0 / inputs as f64).sqrt(),
                    _ => (2.0 / (inputs + outputs) as f64).sqrt(),
                };
                let normal = Normal::new(0.0, std).expect("finite std");
                Layer {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs).map(|_| normal.sample(rng)).collect(),
                    bias: vec![0.0; outputs],
                    activation,
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs, l.activation)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn forward_trace(&self, x: &[f64], trace: &mut Trace) {
        trace.values.resize_with(self.layers.len() + 1, Vec::new);
        trace.values[0].clear();
        trace.values[0].extend_from_slice(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = trace.values.split_at_mut(i + 1);
            layer.forward_into(&done[i], &mut rest[0]);
        }
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`,
    /// and returns `d loss / d input`.
    pub fn backward(&self, trace: &Trace, grad_output: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let mut upstream = grad_output.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.values[i];
            let output = &trace.values[i + 1];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(output)
                .map(|(g, &o)| g * layer.activation.derivative_from_output(o))
                .collect();
            let g = &mut grads.layers[i];
            let mut down = vec![0.0; layer.inputs];
            for (o, &dl) in delta.iter().enumerate() {
                if dl == 0.0 {
                    continue;
                }
                g.bias[o] += dl;
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let grow = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for j in 0..layer.inputs {
                    grow[j] += dl * input[j];
                    down[j] += dl * row[j];
                }
            }
            upstream = down;
        }
        upstream
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.flatten_into(&mut out);
        out
    }

    /// Overwrites all parameters from `flat`; returns the number consumed.
    pub fn load_flat(&mut self, flat: &[f64]) -> usize {
        let mut pos = 0;
        for l in &mut self.layers {
            let (nw, nb) = (l.weights.len(), l.bias.len());
            l.weights.copy_from_slice(&flat[pos..pos + nw]);
            l.bias.copy_from_slice(&flat[pos + nw..pos + nw + nb]);
            pos += nw + nb;
        }
        pos
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(&mut f);
        }
    }

    /// `self += scale * other` over matching shapes.
    pub fn add_scaled(&mut self, other: &Mlp, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += scale * y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += scale * y);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

/// SGD with classical momentum over one network.
pub(crate) struct Momentum {
    velocity: Mlp,
    momentum: f64,
}

impl Momentum {
    pub(crate) fn new(net: &Mlp, momentum: f64) -> Self {
        Momentum { velocity: net.zeros_like(), momentum }
    }

    pub(crate) fn step(&mut self, net: &mut Mlp, grad: &Mlp, lr: f64) {
        for (v, g) in self.velocity.layers.iter_mut().zip(&grad.layers) {
            v.weights.iter_mut().zip(&g.weights).for_each(|(v, g)| *v = self.momentum * *v - lr * g);
            v.bias.iter_mut().zip(&g.bias).for_each(|(v, g)| *v = self.momentum * *v - lr * g);
        }
        net.add_scaled(&self.velocity, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn forward_shapes_and_zero_network() {
        let mut net = Mlp::new(&[3, 5, 2], &[Activation::Relu, Activation::Sigmoid], &mut rng::seeded(0));
        assert_eq!(net.forward(&[1.0, 0.0, 1.0]).len(), 2);
        net.for_each_param_mut(|p| *p = 0.0);
        assert_eq!(net.forward(&[1.0, 0.0, 1.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let acts = [Activation::Tanh, Activation::Relu, Activation::Sigmoid];
        let net = Mlp::new(&[4, 6, 5, 3], &acts, &mut rng::seeded(3));
        let x = [0.3, -0.7, 1.1, 0.2];
        let w = [0.5, -1.0, 2.0];
        let loss = |n: &Mlp| n.forward(&x).iter().zip(&w).map(|(o, w)| o * w).sum::<f64>();
        let mut trace = Trace::default();
        net.forward_trace(&x, &mut trace);
        let mut grads = net.zeros_like();
        net.backward(&trace, &w, &mut grads);
        let analytic = grads.flatten();
        let base = net.flatten();
        for i in 0..base.len() {
            let mut p = base.clone();
            let h = 1e-6;
            p[i] += h;
            let mut up = net.clone();
            up.load_flat(&p);
            p[i] -= 2.0 * h;
            let mut down = net.clone();
            down.load_flat(&p);
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            assert!((fd - analytic[i]).abs() < 1e-6, "param {i}: fd {fd} vs {}", analytic[i]);
        }
    }

    #[test]
    fn flatten_round_trip() {
        let net = Mlp::new(&[2, 3, 1], &[Activation::Relu, Activation::Identity], &mut rng::seeded(1));
        let mut other = net.zeros_like();
        assert_eq!(other.load_flat(&net.flatten()), net.param_count());
        assert_eq!(other, net);
    }
}
