//! Fully connected Q-network with rectified hidden layers and a linear head.

use std::io::{BufRead, Write};

use rand::Rng;

use super::{Experience, LearnerError};

const CHECKPOINT_MAGIC: &str = "adr-qnet";
const CHECKPOINT_VERSION: u32 = 1;

/// Affine layer `y = W x + b`, weights stored row-major (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in self.weights.chunks_exact(self.inputs).enumerate() {
            out[o] = self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

/// Parameters of the value (or target) network.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<DenseLayer>,
}

/// Parameter-shaped gradient of the batch loss.
pub type Gradients = QNetwork;

impl QNetwork {
    /// He-uniform initialisation, zero biases.
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        hidden: &[usize],
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(inputs, hidden, outputs);
        for layer in &mut net.layers {
            let bound = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn zeros(inputs: usize, hidden: &[usize], outputs: usize) -> Self {
        let widths: Vec<usize> = std::iter::once(inputs)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(outputs))
            .collect();
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self, LearnerError> {
        if layers.is_empty() {
            return Err(LearnerError::Checkpoint("network without layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(LearnerError::Checkpoint(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].outputs, pair[1].inputs
                )));
            }
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(LearnerError::Checkpoint(
                    "layer buffer sizes mismatch".into(),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Every parameter, layer by layer, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), LearnerError> {
        if x.len() != self.input_size() {
            return Err(LearnerError::Dimension {
                expected: self.input_size(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, LearnerError> {
        self.check_input(x)?;
        let mut acts = Activations::for_network(self);
        self.forward_into(x, &mut acts);
        Ok(acts.output().to_vec())
    }

    /// Forward pass keeping every post-activation for backpropagation.
    fn forward_into(&self, x: &[f64], acts: &mut Activations) {
        acts.values[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = acts.values.split_at_mut(k + 1);
            let out = &mut rest[0];
            layer.affine(&done[k], out);
            if k < last {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
    }

    /// Copies every parameter from `other` (same shape).
    pub fn copy_from(&mut self, other: &QNetwork) {
        self.layers.clone_from(&other.layers);
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
        writeln!(w, "layers {}", self.layers.len())?;
        for layer in &self.layers {
            writeln!(w, "dense {} {}", layer.inputs, layer.outputs)?;
            for row in layer.weights.chunks_exact(layer.inputs) {
                write_row(&mut w, row)?;
            }
            write_row(&mut w, &layer.biases)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self, LearnerError> {
        let bad = |m: &str| LearnerError::Checkpoint(m.to_string());
        let mut lines = r.lines();
        let mut next = || -> Result<String, LearnerError> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end of checkpoint"))?
                .map_err(|e| LearnerError::Checkpoint(e.to_string()))
        };
        let head = next()?;
        let mut it = head.split_whitespace();
        if it.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("not a Q-network checkpoint"));
        }
        if it.next().and_then(|v| v.parse().ok()) != Some(CHECKPOINT_VERSION) {
            return Err(bad("unsupported checkpoint version"));
        }
        let count: usize = tagged(&next()?, "layers")?[0];
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let dims = tagged(&next()?, "dense")?;
            if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
                return Err(bad("malformed layer shape"));
            }
            let (inputs, outputs) = (dims[0], dims[1]);
            let mut weights = Vec::with_capacity(inputs * outputs);
            for _ in 0..outputs {
                let row = parse_row(&next()?)?;
                if row.len() != inputs {
                    return Err(bad("weight row has the wrong length"));
                }
                weights.extend(row);
            }
            let biases = parse_row(&next()?)?;
            if biases.len() != outputs {
                return Err(bad("bias row has the wrong length"));
            }
            layers.push(DenseLayer {
                inputs,
                outputs,
                weights,
                biases,
            });
        }
        Self::from_layers(layers)
    }
}

fn write_row<W: Write>(w: &mut W, row: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            w.write_all(b" ")?;
        }
        first = false;
        // Display prints the shortest representation that parses back exactly
        write!(w, "{v}")?;
    }
    w.write_all(b"\n")
}

fn parse_row(line: &str) -> Result<Vec<f64>, LearnerError> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| LearnerError::Checkpoint(format!("bad value `{t}`")))
        })
        .collect()
}

fn tagged(line: &str, tag: &str) -> Result<Vec<usize>, LearnerError> {
    let mut it = line.split_whitespace();
    if it.next() != Some(tag) {
        return Err(LearnerError::Checkpoint(format!("expected `{tag}` line")));
    }
    let values = it
        .map(|t| t.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| LearnerError::Checkpoint(format!("bad `{tag}` line")))?;
    if values.is_empty() {
        return Err(LearnerError::Checkpoint(format!("empty `{tag}` line")));
    }
    Ok(values)
}

/// Per-layer activation buffers; `values[0]` is the input.
#[derive(Debug, Clone)]
pub struct Activations {
    values: Vec<Vec<f64>>,
}

impl Activations {
    pub fn for_network(net: &QNetwork) -> Self {
        let values = std::iter::once(net.input_size())
            .chain(net.layers.iter().map(|l| l.outputs))
            .map(|w| vec![0.0; w])
            .collect();
        Self { values }
    }

    pub fn output(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }
}

/// Reusable buffers for repeated forward/backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Activations,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn for_network(net: &QNetwork) -> Self {
        Self {
            acts: Activations::for_network(net),
            delta: net.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }

    /// Forward pass into the workspace; returns the Q-values.
    pub fn forward(&mut self, net: &QNetwork, x: &[f64]) -> Result<&[f64], LearnerError> {
        net.check_input(x)?;
        net.forward_into(x, &mut self.acts);
        Ok(self.acts.output())
    }
}

/// Mean squared TD error `mean_i (y_i − Q(s_i, a_i))²`.
pub fn loss(batch: &[&Experience], value: &QNetwork, targets: &[f64]) -> Result<f64, LearnerError> {
    check_batch(batch, targets)?;
    let mut ws = Workspace::for_network(value);
    let mut total = 0.0;
    for (e, y) in batch.iter().zip(targets) {
        check_action(value, e.action)?;
        let q = ws.forward(value, &e.state)?[e.action];
        total += (y - q) * (y - q);
    }
    Ok(total / batch.len() as f64)
}

fn check_batch(batch: &[&Experience], targets: &[f64]) -> Result<(), LearnerError> {
    if batch.is_empty() {
        return Err(LearnerError::EmptyBatch);
    }
    if batch.len() != targets.len() {
        return Err(LearnerError::Dimension {
            expected: batch.len(),
            found: targets.len(),
        });
    }
    Ok(())
}

fn check_action(net: &QNetwork, action: usize) -> Result<(), LearnerError> {
    if action >= net.output_size() {
        return Err(LearnerError::Dimension {
            expected: net.output_size(),
            found: action + 1,
        });
    }
    Ok(())
}

/// Analytic gradient of [`loss`] with respect to every parameter of `value`.
/// Targets are constants. Returns the loss alongside the gradient.
pub fn backward(
    value: &QNetwork,
    batch: &[&Experience],
    targets: &[f64],
) -> Result<(f64, Gradients), LearnerError> {
    let mut grads = QNetwork::zeros_like(value);
    let mut ws = Workspace::for_network(value);
    let loss = backward_into(value, batch, targets, &mut ws, &mut grads)?;
    Ok((loss, grads))
}

/// [`backward`] with caller-owned buffers; `grads` is overwritten.
pub fn backward_into(
    value: &QNetwork,
    batch: &[&Experience],
    targets: &[f64],
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> Result<f64, LearnerError> {
    check_batch(batch, targets)?;
    grads.params_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / batch.len() as f64;
    let last = value.layers.len() - 1;
    let mut total = 0.0;

    for (e, &y) in batch.iter().zip(targets) {
        check_action(value, e.action)?;
        ws.forward(value, &e.state)?;
        let q = ws.acts.output()[e.action];
        let err = y - q;
        total += err * err;

        // dL/dQ(s, a) = -2 (y - Q) / B; other outputs receive nothing
        ws.delta[last].fill(0.0);
        ws.delta[last][e.action] = -2.0 * err * scale;

        for k in (0..=last).rev() {
            let layer = &value.layers[k];
            let input = &ws.acts.values[k];
            let g = &mut grads.layers[k];
            for (o, &d) in ws.delta[k].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if k == 0 {
                break;
            }
            let (lower, upper) = ws.delta.split_at_mut(k);
            let below = &mut lower[k - 1];
            below.fill(0.0);
            for (o, &d) in upper[0].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (b, w) in below.iter_mut().zip(row) {
                    *b += d * w;
                }
            }
            // rectifier derivative: zero where the unit was inactive
            for (b, a) in below.iter_mut().zip(&ws.acts.values[k]) {
                if *a <= 0.0 {
                    *b = 0.0;
                }
            }
        }
    }
    Ok(total * scale)
}

impl QNetwork {
    pub fn zeros_like(other: &QNetwork) -> Self {
        Self {
            layers: other
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn sample(state: Vec<f64>, action: usize) -> Experience {
        Experience {
            next_state: vec![0.0; state.len()],
            state,
            action,
            reward: 0.0,
            done: true,
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(3, &[4, 4], 2);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            net.forward(&[1.0]),
            Err(LearnerError::Dimension {
                expected: 3,
                found: 1
            })
        ));
    }

    #[test]
    fn two_neuron_hand_trace() {
        // x -> h1 = relu(2x + 1) -> h2 = relu(-h1 + 5) -> q = 3 h2 - 1
        let layers = vec![
            DenseLayer {
                inputs: 1,
                outputs: 1,
                weights: vec![2.0],
                biases: vec![1.0],
            },
            DenseLayer {
                inputs: 1,
                outputs: 1,
                weights: vec![-1.0],
                biases: vec![5.0],
            },
            DenseLayer {
                inputs: 1,
                outputs: 1,
                weights: vec![3.0],
                biases: vec![-1.0],
            },
        ];
        let net = QNetwork::from_layers(layers).unwrap();
        // x = 1: h1 = 3, h2 = 2, q = 5
        assert_eq!(net.forward(&[1.0]).unwrap(), vec![5.0]);
        // x = 4: h1 = 9, h2 = relu(-4) = 0, q = -1
        assert_eq!(net.forward(&[4.0]).unwrap(), vec![-1.0]);
        // x = -3: h1 = relu(-5) = 0, h2 = 5, q = 14
        assert_eq!(net.forward(&[-3.0]).unwrap(), vec![14.0]);
    }

    #[test]
    fn loss_examples() {
        let net = QNetwork::zeros(2, &[3], 2);
        let e = sample(vec![1.0, 1.0], 0);
        assert_eq!(loss(&[&e], &net, &[0.0]).unwrap(), 0.0);
        assert_eq!(loss(&[&e], &net, &[2.0]).unwrap(), 4.0);
        // errors 1 and 3 against Q = 0
        assert_eq!(loss(&[&e, &e], &net, &[1.0, 3.0]).unwrap(), 5.0);
        assert!(matches!(
            loss(&[], &net, &[]),
            Err(LearnerError::EmptyBatch)
        ));
    }

    #[test]
    fn single_sample_loss_of_one() {
        let mut net = QNetwork::zeros(1, &[1], 1);
        net.layers_mut()[1].biases[0] = 1.0;
        let e = sample(vec![0.5], 0);
        assert_eq!(loss(&[&e], &net, &[2.0]).unwrap(), 1.0);
    }

    #[test]
    fn exact_fit_has_zero_gradient() {
        let mut rng = stream_rng(3, Stream::Agent);
        let net = QNetwork::new(4, &[5, 5], 3, &mut rng);
        let e = sample(vec![0.1, 0.2, -0.3, 0.4], 2);
        let q = net.forward(&e.state).unwrap()[2];
        let (l, g) = backward(&net, &[&e], &[q]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.params().all(|&v| v == 0.0));
    }

    #[test]
    fn unselected_heads_get_no_gradient() {
        let mut rng = stream_rng(4, Stream::Agent);
        let net = QNetwork::new(3, &[6, 6], 4, &mut rng);
        let e = sample(vec![0.3, -0.1, 0.7], 1);
        let (_, g) = backward(&net, &[&e], &[5.0]).unwrap();
        let head = &g.layers()[2];
        for o in [0, 2, 3] {
            assert_eq!(head.biases[o], 0.0);
            assert!(head.weights[o * head.inputs..(o + 1) * head.inputs]
                .iter()
                .all(|&w| w == 0.0));
        }
        assert_ne!(head.biases[1], 0.0);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = stream_rng(5, Stream::Agent);
        let net = QNetwork::new(7, &[5, 3], 2, &mut rng);
        let mut buf = Vec::new();
        net.write_checkpoint(&mut buf).unwrap();
        let back = QNetwork::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(net.layers().len(), back.layers().len());
        for (a, b) in net.params().zip(back.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(QNetwork::read_checkpoint("hello\n".as_bytes()).is_err());
        let truncated = "adr-qnet 1\nlayers 1\ndense 2 1\n0.5\n0\n";
        assert!(QNetwork::read_checkpoint(truncated.as_bytes()).is_err());
    }
}
