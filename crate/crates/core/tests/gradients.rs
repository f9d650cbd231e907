use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pwqnet_core::train::{self, Topology};
use pwqnet_core::{FeatureMap, Layer, ReluNetwork};

const DELTA: f64 = 1e-6;
const KINK: f64 = 1e-8;

fn perturbed(net: &ReluNetwork, layer: usize, bias: bool, idx: usize, by: f64) -> ReluNetwork {
    let fm = net.feature_map();
    let mut layers: Vec<Layer> = net.clone().into_layers();
    if bias {
        layers[layer].a[idx] += by;
    } else {
        layers[layer].w.as_mut_slice()[idx] += by;
    }
    ReluNetwork::new(fm, layers).unwrap()
}

/// Smallest hidden pre-activation magnitude over the samples.
fn min_hidden_preactivation(net: &ReluNetwork, feats: &[Vec<f64>]) -> f64 {
    let mut least = f64::INFINITY;
    for f in feats {
        let mut h = f.clone();
        for layer in &net.layers()[..net.layers().len() - 1] {
            let z = layer.w.mul_vec(&h).unwrap();
            let z: Vec<f64> = z.iter().zip(&layer.a).map(|(z, a)| z + a).collect();
            least = z.iter().fold(least, |m, v| m.min(v.abs()));
            h = z.iter().map(|v| v.max(0.0)).collect();
        }
    }
    least
}

#[test]
fn analytic_gradients_match_central_differences() {
    let topologies = [
        Topology::new(FeatureMap::Identity { dim: 2 }, vec![4]),
        Topology::new(FeatureMap::Identity { dim: 2 }, vec![3, 3]),
        Topology::new(FeatureMap::HqPrime { n: 1, m: 1 }, vec![5]),
        Topology::new(FeatureMap::Identity { dim: 2 }, vec![2, 3, 2]),
        Topology::new(FeatureMap::HqPrime { n: 1, m: 1 }, vec![3, 2]),
    ];
    let mut checked = 0;
    let mut worst = 0.0f64;
    for trial in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let topo = &topologies[trial as usize % topologies.len()];
        let mut net = train::init_network(topo, &mut rng);
        // nonzero biases so every parameter kind is exercised
        let fm = net.feature_map();
        let mut layers = net.into_layers();
        for l in &mut layers {
            l.a.iter_mut().for_each(|a| *a = rng.gen_range(-0.5..0.5));
        }
        net = ReluNetwork::new(fm, layers).unwrap();

        let feats: Vec<Vec<f64>> = (0..12)
            .map(|_| {
                let raw = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0)];
                fm.apply(&raw).unwrap()
            })
            .collect();
        let targets: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // a pre-activation within the finite-difference reach of a kink
        // makes the numerical derivative meaningless
        if min_hidden_preactivation(&net, &feats) < KINK.max(100.0 * DELTA) {
            continue;
        }

        let (_, grad) = train::loss_and_gradient(&net, &feats, &targets);
        for (l, layer) in net.layers().iter().enumerate() {
            let params = layer.w.as_slice().len() + layer.a.len();
            for p in 0..params {
                let (bias, idx) = if p < layer.w.as_slice().len() {
                    (false, p)
                } else {
                    (true, p - layer.w.as_slice().len())
                };
                let up = train::mse(&perturbed(&net, l, bias, idx, DELTA), &feats, &targets);
                let down = train::mse(&perturbed(&net, l, bias, idx, -DELTA), &feats, &targets);
                let numeric = (up - down) / (2.0 * DELTA);
                let analytic = if bias { grad.a[l][idx] } else { grad.w[l][idx] };
                let scale = analytic.abs().max(numeric.abs());
                if scale < 1e-7 {
                    assert!((analytic - numeric).abs() < 1e-9, "layer {l} param {p}");
                } else {
                    let rel = (analytic - numeric).abs() / scale;
                    worst = worst.max(rel);
                    assert!(rel < 1e-4, "trial {trial} layer {l} param {p}: {analytic} vs {numeric}");
                }
            }
        }
        checked += 1;
    }
    assert!(checked >= 8, "only {checked} networks were kink-free");
    assert!(worst < 1e-4);
}

#[test]
fn loss_matches_mse_helper() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = train::init_network(&Topology::new(FeatureMap::Identity { dim: 2 }, vec![3]), &mut rng);
    let feats = vec![vec![0.3, -0.2], vec![1.0, 0.5]];
    let targets = vec![1.0, -1.0];
    let (loss, _) = train::loss_and_gradient(&net, &feats, &targets);
    assert!((loss - train::mse(&net, &feats, &targets)).abs() < 1e-15);
}
