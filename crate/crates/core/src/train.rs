//! Small full-precision ReLU regression trainer (Adam, minibatches) for
//! comparing network topologies on sampled Q-function data.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{mpc, Error, FeatureMap, Interval, Layer, Matrix, QFunctionSpec, ReluNetwork, Result};

/// Input lifting plus hidden widths; the output layer is always scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub feature_map: FeatureMap,
    pub widths: Vec<usize>,
}

impl Topology {
    pub fn new(feature_map: FeatureMap, widths: Vec<usize>) -> Self {
        Topology { feature_map, widths }
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.widths.len() + 2);
        d.push(self.feature_map.output_dim());
        d.extend_from_slice(&self.widths);
        d.push(1);
        d
    }

    /// Weights plus biases over all affine layers.
    pub fn param_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Training pairs `(x, u) -> Q(x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<[f64; 2]>,
    pub targets: Vec<f64>,
    pub seed: u64,
    /// Sampling rectangle `X x U`.
    pub domain: (Interval, Interval),
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

const STALL_WINDOW: usize = 100_000;
const MIN_ACCEPTANCE: f64 = 0.01;

/// Uniform rejection sampling over `X x U`, keeping pairs whose successor lies
/// in the domain of `V_{N-1}`.
pub fn sample_dataset(spec: &QFunctionSpec, count: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (xs, us) = (spec.problem.x_set, spec.problem.u_set);
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    let mut draws = 0usize;
    while targets.len() < count {
        let x = rng.gen_range(xs.lower()..=xs.upper());
        let u = rng.gen_range(us.lower()..=us.upper());
        draws += 1;
        if let Ok(q) = mpc::q_eval(spec, x, u) {
            inputs.push([x, u]);
            targets.push(q);
        }
        if draws.is_multiple_of(STALL_WINDOW) && (targets.len() as f64) < MIN_ACCEPTANCE * draws as f64 {
            return Err(Error::SamplingStalled {
                accepted: targets.len(),
                draws,
            });
        }
    }
    Ok(Dataset {
        inputs,
        targets,
        seed,
        domain: (xs, us),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    #[default]
    Adam,
    /// Plain gradient steps; the moment parameters are ignored.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ReluNetwork,
    /// Training-set RMSE after the last epoch.
    pub rmse: f64,
    /// Training-set RMSE before the first update.
    pub initial_rmse: f64,
}

/// Glorot-uniform weights, zero biases.
pub fn init_network<R: Rng>(topology: &Topology, rng: &mut R) -> ReluNetwork {
    let dims = topology.dims();
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let data = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            Layer::new(
                Matrix::from_row_major(fan_out, fan_in, data).expect("sized above"),
                vec![0.0; fan_out],
            )
            .expect("sized above")
        })
        .collect();
    ReluNetwork::new(topology.feature_map, layers).expect("dims chain by construction")
}

/// Lifted features for every sample.
pub fn features(feature_map: FeatureMap, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    data.inputs.iter().map(|p| feature_map.apply(p)).collect()
}

/// Per-layer gradient buffers shaped like the network.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub w: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
}

impl Gradient {
    fn zeros_like(net: &ReluNetwork) -> Self {
        Gradient {
            w: net.layers().iter().map(|l| vec![0.0; l.w.as_slice().len()]).collect(),
            a: net.layers().iter().map(|l| vec![0.0; l.a.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.w.iter_mut().chain(self.a.iter_mut()).for_each(|g| g.fill(0.0));
    }
}

/// Scratch space for one forward/backward pass.
struct Workspace {
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`
    /// (post-ReLU for hidden layers).
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(net: &ReluNetwork) -> Self {
        let mut acts = vec![vec![0.0; net.layers()[0].in_dim()]];
        acts.extend(net.layers().iter().map(|l| vec![0.0; l.out_dim()]));
        let deltas = net.layers().iter().map(|l| vec![0.0; l.out_dim()]).collect();
        Workspace { acts, deltas }
    }
}

fn forward_into(net: &ReluNetwork, xi: &[f64], ws: &mut Workspace) -> f64 {
    let layers = net.layers();
    ws.acts[0].copy_from_slice(xi);
    for (l, layer) in layers.iter().enumerate() {
        let (before, after) = ws.acts.split_at_mut(l + 1);
        let input = &before[l];
        let out = &mut after[0];
        let cols = layer.w.cols();
        let w = layer.w.as_slice();
        let hidden = l + 1 < layers.len();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &w[i * cols..(i + 1) * cols];
            let z: f64 = row.iter().zip(input.iter()).map(|(a, b)| a * b).sum::<f64>() + layer.a[i];
            *o = if hidden { z.max(0.0) } else { z };
        }
    }
    ws.acts[layers.len()][0]
}

/// Adds `scale * d(output)/d(params)` into `grad`; the ReLU derivative at
/// exactly zero is taken as zero.
fn backward_into(net: &ReluNetwork, ws: &mut Workspace, scale: f64, grad: &mut Gradient) {
    let layers = net.layers();
    let last = layers.len() - 1;
    ws.deltas[last][0] = scale;
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let cols = layer.w.cols();
        let input = &ws.acts[l];
        let gw = &mut grad.w[l];
        for (i, &d) in ws.deltas[l].iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.a[l][i] += d;
            for (g, x) in gw[i * cols..(i + 1) * cols].iter_mut().zip(input.iter()) {
                *g += d * x;
            }
        }
        if l == 0 {
            break;
        }
        let (lower, upper) = ws.deltas.split_at_mut(l);
        let prev = &mut lower[l - 1];
        let w = layer.w.as_slice();
        for (j, p) in prev.iter_mut().enumerate() {
            *p = if ws.acts[l][j] > 0.0 {
                upper[0]
                    .iter()
                    .enumerate()
                    .map(|(i, d)| d * w[i * cols + j])
                    .sum()
            } else {
                0.0
            };
        }
    }
}

/// Mean squared error over `idx` and its gradient.
fn batch_loss_grad(
    net: &ReluNetwork,
    feats: &[Vec<f64>],
    targets: &[f64],
    idx: &[usize],
    ws: &mut Workspace,
    grad: &mut Gradient,
) -> f64 {
    grad.clear();
    let inv = 1.0 / idx.len() as f64;
    let mut loss = 0.0;
    for &k in idx {
        let y = forward_into(net, &feats[k], ws);
        let r = y - targets[k];
        loss += r * r * inv;
        backward_into(net, ws, 2.0 * r * inv, grad);
    }
    loss
}

/// Full-batch MSE and gradient, exposed for gradient checking.
pub fn loss_and_gradient(net: &ReluNetwork, feats: &[Vec<f64>], targets: &[f64]) -> (f64, Gradient) {
    let mut ws = Workspace::new(net);
    let mut grad = Gradient::zeros_like(net);
    let idx: Vec<usize> = (0..targets.len()).collect();
    let loss = batch_loss_grad(net, feats, targets, &idx, &mut ws, &mut grad);
    (loss, grad)
}

pub fn mse(net: &ReluNetwork, feats: &[Vec<f64>], targets: &[f64]) -> f64 {
    let mut ws = Workspace::new(net);
    let n = targets.len() as f64;
    feats
        .iter()
        .zip(targets)
        .map(|(f, t)| {
            let r = forward_into(net, f, &mut ws) - t;
            r * r / n
        })
        .sum()
}

/// Training-set root-mean-square error.
pub fn rmse(net: &ReluNetwork, data: &Dataset) -> Result<f64> {
    let feats = features(net.feature_map(), data)?;
    Ok(libm::sqrt(mse(net, &feats, &data.targets)))
}

/// Adam, or plain gradient descent when so configured.
struct Adam {
    cfg: TrainConfig,
    step: i32,
    m: Gradient,
    v: Gradient,
}

impl Adam {
    fn new(net: &ReluNetwork, cfg: TrainConfig) -> Self {
        Adam {
            cfg,
            step: 0,
            m: Gradient::zeros_like(net),
            v: Gradient::zeros_like(net),
        }
    }

    fn update(&mut self, net: &mut ReluNetwork, grad: &Gradient) {
        let c = self.cfg;
        if c.optimizer == Optimizer::Sgd {
            for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                let params = layer.w.as_mut_slice().iter_mut().chain(layer.a.iter_mut());
                let grads = grad.w[l].iter().chain(&grad.a[l]);
                for (p, g) in params.zip(grads) {
                    *p -= c.learning_rate * g;
                }
            }
            return;
        }
        self.step += 1;
        let bc1 = 1.0 - libm::pow(c.beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, self.step as f64);
        let apply = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= c.learning_rate * mh / (libm::sqrt(vh) + c.epsilon);
            }
        };
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            apply(layer.w.as_mut_slice(), &grad.w[l], &mut self.m.w[l], &mut self.v.w[l]);
            apply(&mut layer.a, &grad.a[l], &mut self.m.a[l], &mut self.v.a[l]);
        }
    }
}

/// Trains a freshly initialized network of the given topology.
pub fn train(topology: &Topology, data: &Dataset, epochs: usize, seed: u64) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    train_with(topology, data, cfg, seed)
}

pub fn train_with(topology: &Topology, data: &Dataset, cfg: TrainConfig, seed: u64) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = init_network(topology, &mut rng);
    train_from(net, data, cfg, &mut rng)
}

/// Continues training from `net`. `rng` drives minibatch shuffling.
pub fn train_from<R: Rng>(mut net: ReluNetwork, data: &Dataset, cfg: TrainConfig, rng: &mut R) -> Result<TrainOutcome> {
    if net.output_dim() != 1 {
        return Err(Error::DimensionMismatch("trainer needs a scalar network"));
    }
    let feats = features(net.feature_map(), data)?;
    let targets = &data.targets;
    let initial_rmse = libm::sqrt(mse(&net, &feats, targets));
    let mut ws = Workspace::new(&net);
    let mut grad = Gradient::zeros_like(&net);
    let mut adam = Adam::new(&net, cfg);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let batch = cfg.batch_size.max(1);

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            epoch_loss += batch_loss_grad(&net, &feats, targets, chunk, &mut ws, &mut grad);
            adam.update(&mut net, &grad);
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
    }
    let rmse = libm::sqrt(mse(&net, &feats, targets));
    if !rmse.is_finite() {
        return Err(Error::Diverged { epoch: cfg.epochs });
    }
    Ok(TrainOutcome {
        net,
        rmse,
        initial_rmse,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub topology: Topology,
    pub param_count: usize,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub rmses: Vec<f64>,
}

/// Trains every topology `trials` times on the shared dataset with seeds
/// `base_seed + trial`. Rows follow the order of `configs`.
pub fn experiment(
    configs: &[Topology],
    data: &Dataset,
    trials: usize,
    base_seed: u64,
    cfg: TrainConfig,
) -> Result<Vec<ExperimentRow>> {
    configs
        .iter()
        .map(|topology| {
            let rmses = (0..trials)
                .map(|t| train_with(topology, data, cfg, base_seed + t as u64).map(|o| o.rmse))
                .collect::<Result<Vec<f64>>>()?;
            Ok(summarize(topology.clone(), rmses))
        })
        .collect()
}

/// Mean and (population) standard deviation of per-trial RMSEs.
pub fn summarize(topology: Topology, rmses: Vec<f64>) -> ExperimentRow {
    let n = rmses.len().max(1) as f64;
    let mean = rmses.iter().sum::<f64>() / n;
    let var = rmses.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    ExperimentRow {
        param_count: topology.param_count(),
        topology,
        mean_rmse: mean,
        std_rmse: libm::sqrt(var),
        rmses,
    }
}

/// The seven topologies of the learning comparison: `h'_q` inputs with one
/// hidden layer of width 5..=8, then raw `(x, u)` inputs with widths
/// `[12]`, `[5, 5]` and `[4, 4, 4]`.
pub fn reference_topologies() -> Vec<Topology> {
    let hq = FeatureMap::HqPrime { n: 1, m: 1 };
    let xu = FeatureMap::Identity { dim: 2 };
    vec![
        Topology::new(hq, vec![5]),
        Topology::new(hq, vec![6]),
        Topology::new(hq, vec![7]),
        Topology::new(hq, vec![8]),
        Topology::new(xu, vec![12]),
        Topology::new(xu, vec![5, 5]),
        Topology::new(xu, vec![4, 4, 4]),
    ]
}
