use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use super::gemm::im2col;
use super::*;
use crate::optics::{ChipConfig, ChipState};
use crate::rng::SimRng;
use crate::{Error, Exec};

fn toy_spec() -> NetworkSpec {
    NetworkSpec::automap(6, 4, 5, 2)
}

fn random_net(seed: u64) -> Network {
    let mut net = Network::init(toy_spec(), seed).unwrap();
    let mut r = SimRng::seed_from_u64(seed ^ 0xb1a5);
    for p in &mut net.params {
        p.bias.iter_mut().for_each(|b| *b = r.random_range(-0.3..0.3));
    }
    net
}

fn random_vec(n: usize, r: &mut SimRng) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn objective(net: &Network, input: &[f64], truth: &[f64], mode: DomainMode, lambda: f64) -> f64 {
    let t = net.forward(input, Backend::Exact, mode, &ErrorInjection::none(), 0).unwrap();
    loss(t.output(), truth, t.h(), lambda).unwrap()
}

fn param(net: &mut Network, layer: usize, bias: bool, i: usize) -> &mut f64 {
    let p = &mut net.params[layer];
    if bias {
        &mut p.bias[i]
    } else {
        &mut p.weights[i]
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn zero_input_and_biases_give_zero_output() {
    let net = Network::init(toy_spec(), 3).unwrap();
    let out = net.infer(&[0.0; 6], DomainMode::Cbd).unwrap();
    assert!(out.iter().all(|v| *v == 0.0));
}

#[test]
fn wrong_input_length_is_rejected() {
    let net = Network::init(toy_spec(), 3).unwrap();
    assert!(matches!(net.infer(&[0.0; 5], DomainMode::Cbd), Err(Error::ShapeMismatch(_))));
}

#[test]
fn loss_examples() {
    let truth = [0.5, -0.2, 0.1, 0.0];
    assert_eq!(loss(&truth, &truth, &[0.0; 4], 1e-4).unwrap(), 0.0);
    let off: Vec<f64> = truth.iter().map(|t| t + 0.1).collect();
    assert!((loss(&off, &truth, &[0.0; 4], 1e-4).unwrap() - 0.01).abs() < 1e-15);
    assert!((loss(&truth, &truth, &[1.0; 4], 1e-4).unwrap() - 1e-4).abs() < 1e-18);
}

#[test]
fn loss_decomposes_into_mse_and_linear_penalty() {
    let mut r = SimRng::seed_from_u64(9);
    let y = random_vec(16, &mut r);
    let t = random_vec(16, &mut r);
    let h = random_vec(48, &mut r);
    let mse = y.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 16.0;
    assert_eq!(loss(&y, &t, &h, 0.0).unwrap(), mse);
    let p1 = loss(&y, &t, &h, 1e-3).unwrap() - mse;
    let p2 = loss(&y, &t, &h, 2e-3).unwrap() - mse;
    assert!((p2 - 2.0 * p1).abs() < 1e-15);
    assert!((p1 - 1e-3 / (3.0 * 16.0) * h.iter().map(|v| v.abs()).sum::<f64>()).abs() < 1e-15);
}

#[test]
fn gradients_match_central_differences() {
    let eps = 1e-6;
    for mode in DomainMode::ALL {
        for seed in 0..5 {
            let mut net = random_net(seed);
            let mut r = SimRng::seed_from_u64(100 + seed);
            let input = random_vec(6, &mut r);
            let truth = random_vec(16, &mut r);
            let lambda = 0.05;
            let trace = net.forward(&input, Backend::Exact, mode, &ErrorInjection::none(), 0).unwrap();
            let grads = net.backward(&trace, &truth, mode, lambda).unwrap();
            for l in 0..net.params.len() {
                for bias in [false, true] {
                    let n = if bias { net.params[l].bias.len() } else { net.params[l].weights.len() };
                    let mut fd = vec![0.0; n];
                    for (i, fd) in fd.iter_mut().enumerate() {
                        let orig = *param(&mut net, l, bias, i);
                        *param(&mut net, l, bias, i) = orig + eps;
                        let up = objective(&net, &input, &truth, mode, lambda);
                        *param(&mut net, l, bias, i) = orig - eps;
                        let down = objective(&net, &input, &truth, mode, lambda);
                        *param(&mut net, l, bias, i) = orig;
                        *fd = (up - down) / (2.0 * eps);
                    }
                    let g = if bias { &grads[l].bias } else { &grads[l].weights };
                    let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
                    let scale = norm(g).max(norm(&fd)).max(1e-12);
                    let rel = norm(&diff) / scale;
                    assert!(rel <= 1e-4, "{mode:?} seed {seed} layer {l} bias {bias}: rel err {rel}");
                }
            }
        }
    }
}

#[test]
fn perfect_fit_without_penalty_has_zero_gradients() {
    let net = random_net(4);
    let input = [0.3, -0.1, 0.8, 0.0, -0.5, 0.2];
    let trace = net.forward(&input, Backend::Exact, DomainMode::Cbd, &ErrorInjection::none(), 0).unwrap();
    let truth = trace.output().to_vec();
    let grads = net.backward(&trace, &truth, DomainMode::Cbd, 0.0).unwrap();
    assert!(grads.iter().all(|g| g.weights.iter().chain(&g.bias).all(|v| *v == 0.0)));
}

#[test]
fn penalty_gradient_of_second_conv_is_sign_pattern() {
    let spec = NetworkSpec::automap(6, 4, 5, 1);
    let net = random_net_with(spec, 11);
    let input = [0.9, -0.4, 0.3, 0.6, -0.8, 0.1];
    let lambda = 0.3;
    let trace = net.forward(&input, Backend::Exact, DomainMode::Cbd, &ErrorInjection::none(), 0).unwrap();
    let truth = trace.output().to_vec();
    let grads = net.backward(&trace, &truth, DomainMode::Cbd, lambda).unwrap();
    let l = trace.penalty_layer.unwrap();
    let h = &trace.outputs[l];
    let patches = im2col(&trace.inputs[l], 1, 4, 5, 2);
    let c = lambda / 16.0;
    // h = ReLU(z) ≥ 0, so sign(h)·ReLU'(z) is the indicator of h > 0.
    let expect_b: f64 = h.iter().map(|&v| if v > 0.0 { c } else { 0.0 }).sum();
    let expect_w: Vec<f64> = (0..25)
        .map(|t| h.iter().enumerate().map(|(p, &v)| if v > 0.0 { c * patches[t * 16 + p] } else { 0.0 }).sum())
        .collect();
    for (g, e) in grads[l].weights.iter().zip(&expect_w) {
        assert!((g - e).abs() < 1e-12, "{g} vs {e}");
    }
    assert!((grads[l].bias[0] - expect_b).abs() < 1e-12);
}

fn random_net_with(spec: NetworkSpec, seed: u64) -> Network {
    let mut net = Network::init(spec, seed).unwrap();
    let mut r = SimRng::seed_from_u64(seed);
    for p in &mut net.params {
        p.bias.iter_mut().for_each(|b| *b = r.random_range(-0.3..0.3));
    }
    net
}

#[test]
fn exact_and_ideal_chip_backends_agree() {
    let chip = ChipState::ideal(&ChipConfig::default(), 0).unwrap();
    for seed in 0..3 {
        let net = random_net(seed);
        let mut r = SimRng::seed_from_u64(seed + 40);
        let input = random_vec(6, &mut r);
        for mode in DomainMode::ALL {
            let exact = net.forward(&input, Backend::Exact, mode, &ErrorInjection::none(), 0).unwrap();
            let sim = net
                .forward(&input, Backend::Chip { chip: &chip, seed: 1, exec: Exec::Sequential }, mode, &ErrorInjection::none(), 0)
                .unwrap();
            for (a, b) in exact.outputs.iter().flatten().zip(sim.outputs.iter().flatten()) {
                assert!((a - b).abs() < 1e-6, "{mode:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn injection_is_deterministic_and_zero_is_exact() {
    let net = random_net(2);
    let input = [0.1, 0.2, -0.3, 0.4, 0.0, -0.9];
    let exact = net.infer(&input, DomainMode::Cbd).unwrap();
    assert_eq!(net.infer_with_injection(&input, DomainMode::Cbd, 0.0, 5, 0).unwrap(), exact);
    let a = net.infer_with_injection(&input, DomainMode::Cbd, 0.05, 5, 3).unwrap();
    let b = net.infer_with_injection(&input, DomainMode::Cbd, 0.05, 5, 3).unwrap();
    let c = net.infer_with_injection(&input, DomainMode::Cbd, 0.05, 6, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, exact);
}

proptest! {
    #[test]
    fn mode_outputs_are_non_negative(seed in 0u64..1000, input in prop::collection::vec(-3.0f64..3.0, 6)) {
        let net = random_net(seed);
        for mode in [DomainMode::Cid, DomainMode::Inon] {
            let t = net.forward(&input, Backend::Exact, mode, &ErrorInjection::none(), 0).unwrap();
            for out in &t.outputs {
                prop_assert!(out.iter().all(|v| *v >= 0.0));
            }
        }
        let t = net.forward(&input, Backend::Exact, DomainMode::Ncbd, &ErrorInjection::none(), 0).unwrap();
        for (l, out) in t.outputs.iter().enumerate() {
            if net.spec.layers[l].is_fc() {
                prop_assert!(out.iter().all(|v| *v >= 0.0));
            }
        }
    }
}

fn toy_data(n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut r = SimRng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = random_vec(6, &mut r);
            let y = (0..16).map(|i| 0.5 * (x[i % 6] - x[(i + 1) % 6])).collect();
            (x, y)
        })
        .collect()
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let data = toy_data(20, 1);
    let mut net = random_net(0);
    let before = net.clone();
    let cfg = TrainConfig { learning_rate: 0.0, decayed_learning_rate: 0.0, epochs: 4, batch_size: 6, ..Default::default() };
    let log = train(&mut net, &data[..16], &data[16..], &cfg, DomainMode::Cbd, Exec::Sequential).unwrap();
    assert_eq!(net, before);
    let first = log.epochs[0];
    assert!(log.epochs.iter().all(|e| e.train_loss == first.train_loss && e.val_loss == first.val_loss));
}

#[test]
fn training_is_deterministic_across_policies() {
    let data = toy_data(30, 2);
    let cfg = TrainConfig { epochs: 5, batch_size: 4, learning_rate: 1e-2, ..Default::default() };
    let mut a = random_net(1);
    let mut b = random_net(1);
    let la = train(&mut a, &data[..24], &data[24..], &cfg, DomainMode::Cbd, Exec::Sequential).unwrap();
    let lb = train(&mut b, &data[..24], &data[24..], &cfg, DomainMode::Cbd, Exec::Parallel).unwrap();
    assert_eq!(la, lb);
    assert_eq!(a, b);
    assert!(la.epochs.last().unwrap().train_loss < la.epochs[0].train_loss);
}

#[test]
fn non_finite_loss_aborts() {
    let mut data = toy_data(8, 3);
    data[2].0[1] = f64::NAN;
    let mut net = random_net(0);
    let cfg = TrainConfig { epochs: 2, ..Default::default() };
    assert!(matches!(
        train(&mut net, &data, &data, &cfg, DomainMode::Cbd, Exec::Sequential),
        Err(Error::NonFiniteLoss { epoch: 0, .. })
    ));
}

#[test]
fn train_log_csv_has_header_and_rows() {
    let data = toy_data(10, 4);
    let mut net = random_net(0);
    let cfg = TrainConfig { epochs: 3, ..Default::default() };
    let log = train(&mut net, &data, &data, &cfg, DomainMode::Cbd, Exec::Sequential).unwrap();
    let mut buf = Vec::new();
    log.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("epoch,train_loss,val_loss,lr\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn checkpoint_round_trips() {
    let net = random_net(7);
    let bytes = checkpoint::to_bytes(&net);
    assert_eq!(&bytes[..4], b"OCDW");
    let back = checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, net);
    assert_eq!(back.checksum(), net.checksum());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.ocdw");
    checkpoint::save(&net, &path).unwrap();
    assert_eq!(checkpoint::load(&path).unwrap(), net);
}

#[test]
fn checkpoint_rejects_corruption() {
    let net = random_net(7);
    let mut bytes = checkpoint::to_bytes(&net);
    assert!(checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    bytes.push(0);
    assert!(checkpoint::from_bytes(&bytes).is_err());
    bytes[0] = b'X';
    assert!(matches!(checkpoint::from_bytes(&bytes), Err(Error::Format(_))));
}
