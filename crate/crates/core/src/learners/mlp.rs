//! Small feedforward network for independent DQN: rectifier hidden layers,
//! identity output, plain gradient descent on the squared TD error.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Fully connected layer; weights are stored output-major
/// (`w[out * fan_in + in]`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl DenseLayer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        DenseLayer {
            w: vec![0.0; fan_in * fan_out],
            b: vec![0.0; fan_out],
            fan_in,
            fan_out,
        }
    }
}

/// Feedforward network; `dims` = [input, hidden..., output].
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn zeros(dims: &[usize]) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Mlp { layers }
    }

    /// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases.
    pub fn init_uniform(dims: &[usize], rng: &mut ChaCha12Rng) -> Self {
        let mut net = Mlp::zeros(dims);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            for w in &mut layer.w {
                *w = rng.random_range(-bound..bound);
            }
            for b in &mut layer.b {
                *b = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].fan_in];
        dims.extend(self.layers.iter().map(|l| l.fan_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").fan_out
    }

    /// Total parameter count: sum over layers of fan_in*fan_out + fan_out.
    pub fn flat_len(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flatten layer by layer, weights then biases.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        self.flatten_into(&mut out);
        out
    }

    /// Rebuild a network of shape `dims` from a flat parameter vector.
    pub fn from_flat(dims: &[usize], flat: &[f64]) -> Result<Self> {
        let mut net = Mlp::zeros(dims);
        if flat.len() != net.flat_len() {
            return Err(Error::Contract(format!(
                "flat vector length {} does not match network size {}",
                flat.len(),
                net.flat_len()
            )));
        }
        let mut offset = 0;
        for l in &mut net.layers {
            let wl = l.w.len();
            l.w.copy_from_slice(&flat[offset..offset + wl]);
            offset += wl;
            let bl = l.b.len();
            l.b.copy_from_slice(&flat[offset..offset + bl]);
            offset += bl;
        }
        Ok(net)
    }

    /// Forward pass storing pre-activations and activations for backprop.
    fn forward_cached(&self, input: &[f64], cache: &mut ForwardCache) {
        cache.activations.clear();
        cache.preacts.clear();
        cache.activations.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = cache.activations.last().expect("seeded with input");
            let mut z = layer.b.clone();
            for o in 0..layer.fan_out {
                let row = &layer.w[o * layer.fan_in..(o + 1) * layer.fan_in];
                let mut acc = 0.0;
                for (wi, xi) in row.iter().zip(prev.iter()) {
                    acc += wi * xi;
                }
                z[o] += acc;
            }
            let a = if li == last {
                z.clone()
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            cache.preacts.push(z);
            cache.activations.push(a);
        }
    }
}

#[derive(Default)]
struct ForwardCache {
    activations: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

/// Deterministic feedforward evaluation: Q-values for one encoded state.
pub fn mlp_forward(params: &Mlp, state_encoding: &[f64]) -> Result<Vec<f64>> {
    if state_encoding.len() != params.input_dim() {
        return Err(Error::Contract(format!(
            "input length {} does not match network input dim {}",
            state_encoding.len(),
            params.input_dim()
        )));
    }
    let mut cache = ForwardCache::default();
    params.forward_cached(state_encoding, &mut cache);
    Ok(cache.activations.pop().expect("output activation"))
}

/// A minibatch of encoded transitions, rows packed contiguously.
pub struct DqnBatch<'a> {
    pub states: &'a [f64],
    pub next_states: &'a [f64],
    pub enc_dim: usize,
    pub actions: &'a [usize],
    pub rewards: &'a [f64],
    pub terminals: &'a [bool],
}

impl DqnBatch<'_> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.enc_dim..(i + 1) * self.enc_dim]
    }

    fn next_state(&self, i: usize) -> &[f64] {
        &self.next_states[i * self.enc_dim..(i + 1) * self.enc_dim]
    }
}

/// One plain-SGD step on the mean squared TD error
/// L = mean_i (r_i + gamma * max_b Q_target(s'_i, b) * [not terminal_i]
///             - Q_online(s_i, a_i))^2.
///
/// Gradients flow through the online network only; returns the loss.
pub fn dqn_update(
    online: &mut Mlp,
    target: &Mlp,
    batch: &DqnBatch,
    learning_rate: f64,
    gamma: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("dqn_update requires a non-empty batch".to_string()));
    }
    let b = batch.len() as f64;
    let mut grads: Vec<DenseLayer> = online
        .layers
        .iter()
        .map(|l| DenseLayer::zeros(l.fan_in, l.fan_out))
        .collect();
    let mut cache = ForwardCache::default();
    let mut loss = 0.0;

    for i in 0..batch.len() {
        let bootstrap = if batch.terminals[i] {
            0.0
        } else {
            mlp_forward(target, batch.next_state(i))?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let target_value = batch.rewards[i] + gamma * bootstrap;

        online.forward_cached(batch.state(i), &mut cache);
        let q = cache.activations.last().expect("output")[batch.actions[i]];
        let err = q - target_value;
        loss += err * err / b;

        // Output delta: d/dq of mean squared error, nonzero at the taken
        // action only.
        let n_layers = online.layers.len();
        let mut delta = vec![0.0; online.output_dim()];
        delta[batch.actions[i]] = 2.0 * err / b;

        for li in (0..n_layers).rev() {
            let layer = &online.layers[li];
            let prev_act = &cache.activations[li];
            let g = &mut grads[li];
            for o in 0..layer.fan_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut g.w[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (gw, &a) in row.iter_mut().zip(prev_act.iter()) {
                        *gw += d * a;
                    }
                    g.b[o] += d;
                }
            }
            if li > 0 {
                let mut next_delta = vec![0.0; layer.fan_in];
                for o in 0..layer.fan_out {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &layer.w[o * layer.fan_in..(o + 1) * layer.fan_in];
                        for (nd, &w) in next_delta.iter_mut().zip(row.iter()) {
                            *nd += d * w;
                        }
                    }
                }
                // Rectifier gate from the previous layer's pre-activation.
                let z = &cache.preacts[li - 1];
                for (nd, &zv) in next_delta.iter_mut().zip(z.iter()) {
                    if zv <= 0.0 {
                        *nd = 0.0;
                    }
                }
                delta = next_delta;
            }
        }
    }

    for (layer, g) in online.layers.iter_mut().zip(grads.iter()) {
        for (w, gw) in layer.w.iter_mut().zip(g.w.iter()) {
            *w -= learning_rate * gw;
        }
        for (bv, gb) in layer.b.iter_mut().zip(g.b.iter()) {
            *bv -= learning_rate * gb;
        }
    }
    Ok(loss)
}

/// Copy the online parameters into the target every `every_k` updates.
pub fn sync_target(online: &Mlp, target: &mut Mlp, every_k: u64, h: u64) {
    if every_k >= 1 && h.is_multiple_of(every_k) {
        *target = online.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    /// Straightforward re-implementation used as an independent oracle.
    fn forward_naive(net: &Mlp, input: &[f64]) -> Vec<f64> {
        let mut a = input.to_vec();
        let last = net.layers().len() - 1;
        for (li, layer) in net.layers().iter().enumerate() {
            let mut out = vec![0.0; layer.fan_out];
            for (o, outv) in out.iter_mut().enumerate() {
                let mut acc = layer.b[o];
                for i in 0..layer.fan_in {
                    acc += layer.w[o * layer.fan_in + i] * a[i];
                }
                *outv = if li == last { acc } else { acc.max(0.0) };
            }
            a = out;
        }
        a
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2]);
        let out = mlp_forward(&net, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let mut net = Mlp::zeros(&[2, 2]);
        // identity weight matrix
        net.layers[0].w[0] = 1.0;
        net.layers[0].w[3] = 1.0;
        let out = mlp_forward(&net, &[0.3, -0.7]).unwrap();
        assert_eq!(out, vec![0.3, -0.7]);
    }

    #[test]
    fn forward_matches_naive_reimplementation() {
        let net = Mlp::init_uniform(&[5, 7, 7, 3], &mut rng(3));
        let input = [0.1, -0.4, 0.9, 0.0, 2.0];
        let fast = mlp_forward(&net, &input).unwrap();
        let slow = forward_naive(&net, &input);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_contract_violation() {
        let net = Mlp::zeros(&[3, 2]);
        assert!(mlp_forward(&net, &[1.0]).is_err());
    }

    #[test]
    fn flatten_round_trip_is_exact_and_local() {
        let net = Mlp::init_uniform(&[2, 4, 2], &mut rng(9));
        let flat = net.flatten();
        assert_eq!(flat.len(), net.flat_len());
        let rebuilt = Mlp::from_flat(&net.dims(), &flat).unwrap();
        assert_eq!(rebuilt, net);

        // Perturbing one flat index changes exactly one scalar in one layer.
        for idx in [0usize, 7, flat.len() - 1] {
            let mut perturbed = flat.clone();
            perturbed[idx] += 1.0;
            let net2 = Mlp::from_flat(&net.dims(), &perturbed).unwrap();
            let mut diffs = 0;
            for (l1, l2) in net.layers().iter().zip(net2.layers().iter()) {
                diffs += l1.w.iter().zip(l2.w.iter()).filter(|(a, b)| a != b).count();
                diffs += l1.b.iter().zip(l2.b.iter()).filter(|(a, b)| a != b).count();
            }
            assert_eq!(diffs, 1, "index {idx}");
        }
    }

    fn toy_batch<'a>(
        states: &'a [f64],
        next_states: &'a [f64],
        actions: &'a [usize],
        rewards: &'a [f64],
        terminals: &'a [bool],
        enc_dim: usize,
    ) -> DqnBatch<'a> {
        DqnBatch {
            states,
            next_states,
            enc_dim,
            actions,
            rewards,
            terminals,
        }
    }

    #[test]
    fn zero_learning_rate_leaves_params_bitwise_unchanged() {
        let mut online = Mlp::init_uniform(&[2, 4, 2], &mut rng(1));
        let target = online.clone();
        let before = online.flatten();
        let states = [0.2, 0.4, 0.1, 0.9];
        let next = [0.5, 0.5, 0.3, 0.3];
        let batch = toy_batch(&states, &next, &[0, 1], &[1.0, -1.0], &[false, true], 2);
        dqn_update(&mut online, &target, &batch, 0.0, 0.9).unwrap();
        assert_eq!(online.flatten(), before);
    }

    #[test]
    fn zero_td_error_batch_keeps_params_fixed() {
        // Zero network, zero rewards, terminal transitions: every TD error
        // is exactly zero, so the gradient vanishes.
        let mut online = Mlp::zeros(&[2, 3, 2]);
        let target = online.clone();
        let before = online.flatten();
        let states = [0.2, 0.4];
        let next = [0.0, 0.0];
        let batch = toy_batch(&states, &next, &[1], &[0.0], &[true], 2);
        let loss = dqn_update(&mut online, &target, &batch, 0.1, 0.9).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(online.flatten(), before);
    }

    #[test]
    fn empty_batch_is_contract_violation() {
        let mut online = Mlp::zeros(&[2, 2]);
        let target = online.clone();
        let batch = toy_batch(&[], &[], &[], &[], &[], 2);
        assert!(dqn_update(&mut online, &target, &batch, 0.1, 0.9).is_err());
    }

    #[test]
    fn sync_copies_exactly_on_schedule() {
        let online = Mlp::init_uniform(&[2, 3, 2], &mut rng(5));
        let mut target = Mlp::zeros(&[2, 3, 2]);
        sync_target(&online, &mut target, 100, 50);
        assert_ne!(target, online);
        sync_target(&online, &mut target, 100, 100);
        assert_eq!(target.flatten(), online.flatten());

        let mut every_step = Mlp::zeros(&[2, 3, 2]);
        sync_target(&online, &mut every_step, 1, 7);
        assert_eq!(every_step, online);
    }

    #[test]
    fn backprop_matches_central_finite_differences() {
        // 2-layer net, double precision, perturbation 1e-5.
        let dims = [3usize, 8, 2];
        let online = Mlp::init_uniform(&dims, &mut rng(12));
        let target = Mlp::init_uniform(&dims, &mut rng(13));
        let mut r = rng(14);
        let n = 6;
        let mut states = Vec::new();
        let mut next = Vec::new();
        let mut actions = Vec::new();
        let mut rewards = Vec::new();
        let mut terminals = Vec::new();
        for i in 0..n {
            for _ in 0..dims[0] {
                states.push(r.random_range(-1.0..1.0));
                next.push(r.random_range(-1.0..1.0));
            }
            actions.push(i % 2);
            rewards.push(r.random_range(-1.0..1.0));
            terminals.push(i % 3 == 0);
        }
        let batch = toy_batch(&states, &next, &actions, &rewards, &terminals, dims[0]);
        let gamma = 0.9;

        // Analytic gradient recovered from a unit-learning-rate step.
        let mut stepped = online.clone();
        dqn_update(&mut stepped, &target, &batch, 1.0, gamma).unwrap();
        let analytic: Vec<f64> = online
            .flatten()
            .iter()
            .zip(stepped.flatten().iter())
            .map(|(w0, w1)| w0 - w1)
            .collect();

        // Loss as a function of the flat parameter vector.
        let loss_at = |flat: &[f64]| -> f64 {
            let net = Mlp::from_flat(&dims, flat).unwrap();
            let mut total = 0.0;
            for i in 0..n {
                let bootstrap = if terminals[i] {
                    0.0
                } else {
                    mlp_forward(&target, &next[i * dims[0]..(i + 1) * dims[0]])
                        .unwrap()
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let t = rewards[i] + gamma * bootstrap;
                let q = mlp_forward(&net, &states[i * dims[0]..(i + 1) * dims[0]]).unwrap()[actions[i]];
                total += (q - t) * (q - t) / n as f64;
            }
            total
        };

        let flat = online.flatten();
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for idx in 0..flat.len() {
            let mut plus = flat.clone();
            plus[idx] += h;
            let mut minus = flat.clone();
            minus[idx] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let denom = analytic[idx].abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max((analytic[idx] - numeric).abs() / denom);
        }
        assert!(max_rel < 1e-4, "max relative gradient error {max_rel}");
    }
}
