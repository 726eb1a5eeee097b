//! Gradient checks over a matrix of layer configurations.

mod common;

use rand::Rng;
use common::{rng, tensor};
use soadv::nn::FeedForwardModel;

#[test]
fn input_gradients_match_central_differences_across_architectures() {
    let configs: &[&[usize]] = &[
        &[4, 3],
        &[6, 8, 4],
        &[5, 10, 10, 3],
        &[8, 16, 2],
    ];
    let mut r = rng(2211);
    for (ci, sizes) in configs.iter().enumerate() {
        let model = FeedForwardModel::new_mlp(sizes, 1000 + ci as u64).unwrap();
        for point in 0..10 {
            let x = tensor(
                &(0..sizes[0])
                    .map(|_| r.gen_range(0.05..0.95))
                    .collect::<Vec<_>>(),
            );
            let y = point % sizes[sizes.len() - 1];
            let grad = model.input_gradient(&x, y).unwrap();
            let h = 1e-6;
            for i in 0..sizes[0] {
                let mut plus = x.as_slice().to_vec();
                let mut minus = plus.clone();
                plus[i] += h;
                minus[i] -= h;
                let fd = (model.loss(&tensor(&plus), y).unwrap()
                    - model.loss(&tensor(&minus), y).unwrap())
                    / (2.0 * h);
                assert!(
                    (grad.as_slice()[i] - fd).abs() < 1e-5,
                    "config {ci} point {point} coord {i}: {} vs {}",
                    grad.as_slice()[i],
                    fd
                );
            }
        }
    }
}

#[test]
fn gradient_vanishes_at_a_loss_minimum() {
    // Zero weights make the loss constant in x: a (degenerate) stationary
    // point where the input gradient must vanish identically.
    let model = FeedForwardModel::from_layers(vec![soadv::nn::Layer::new(
        3,
        4,
        vec![0.0; 12],
        vec![0.0; 4],
        soadv::nn::Activation::Identity,
    )
    .unwrap()])
    .unwrap();
    let g = model.input_gradient(&tensor(&[0.3, 0.5, 0.7]), 1).unwrap();
    assert!(g.l2_norm() < 1e-8);
}
