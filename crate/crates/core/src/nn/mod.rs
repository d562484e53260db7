//! Dense feed-forward networks trained by backpropagation.
//!
//! The same engine backs the autoencoder, GAN, routing and diagnostics
//! experiments. Models are plain values: inference borrows them immutably,
//! training takes `&mut`.

mod gradcheck;
mod layer;
mod loss;
mod model;
mod scaler;
mod train;

pub use gradcheck::{grad_check, relative_error};
pub use layer::{sigmoid, softmax_in_place, Activation, DenseLayer};
pub use loss::{check_one_hot, Loss, PROB_FLOOR};
pub use model::{ForwardPass, Gradients, LayerDoc, MlpModel, ModelDoc};
pub use scaler::Scaler;
pub use train::{dropout_mask, train, LabeledDataset, Optimizer, OptimizerKind, TrainConfig, TrainHistory};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor2;
    use rand::Rng;

    fn xor() -> LabeledDataset {
        let x = Tensor2::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let y = Tensor2::from_rows(&[[0.0], [1.0], [1.0], [0.0]]).unwrap();
        LabeledDataset::new(x, y).unwrap()
    }

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Tensor2 {
        let mut rng = crate::seed::rng(seed);
        Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn one_hot(rows: usize, classes: usize, seed: u64) -> Tensor2 {
        let mut rng = crate::seed::rng(seed);
        let mut t = Tensor2::zeros(rows, classes);
        for i in 0..rows {
            t[(i, rng.random_range(0..classes))] = 1.0;
        }
        t
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = DenseLayer { weights: Tensor2::identity(3), biases: vec![0.0; 3], activation: Activation::Identity };
        let m = MlpModel::from_layers(vec![layer]).unwrap();
        let x = random_batch(5, 3, 1);
        assert_eq!(m.predict(&x).unwrap(), x);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let layer = DenseLayer { weights: Tensor2::zeros(2, 2), biases: vec![0.0; 2], activation: Activation::Softmax };
        let m = MlpModel::from_layers(vec![layer]).unwrap();
        let out = m.predict(&Tensor2::from_rows(&[[3.0, -7.0]]).unwrap()).unwrap();
        assert_eq!(out.data(), &[0.5, 0.5]);
    }

    #[test]
    fn hand_computed_two_layer_relu() {
        // h = relu([[1,2],[-1,1]] x + [0.5,0]) ; y = [2,-3] h + 1
        let l1 = DenseLayer {
            weights: Tensor2::from_rows(&[[1.0, 2.0], [-1.0, 1.0]]).unwrap(),
            biases: vec![0.5, 0.0],
            activation: Activation::Relu,
        };
        let l2 = DenseLayer {
            weights: Tensor2::from_rows(&[[2.0, -3.0]]).unwrap(),
            biases: vec![1.0],
            activation: Activation::Identity,
        };
        let m = MlpModel::from_layers(vec![l1, l2]).unwrap();
        let pass = m.forward(&Tensor2::from_rows(&[[1.0, -1.0]]).unwrap(), None).unwrap();
        // pre-activations: 1−2+0.5 = −0.5 → 0 ; −1−1 = −2 → 0 ; output 1
        assert_eq!(pass.outputs[0].data(), &[0.0, 0.0]);
        assert_eq!(pass.output().data(), &[1.0]);
        let pass = m.forward(&Tensor2::from_rows(&[[2.0, 0.5]]).unwrap(), None).unwrap();
        // pre: 2+1+0.5 = 3.5 ; −2+0.5 = −1.5 → 0 ; y = 7 + 1
        assert_eq!(pass.output().data(), &[8.0]);
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let m = MlpModel::new(&[3, 2], &[Activation::Tanh], 0).unwrap();
        assert!(matches!(m.forward(&Tensor2::zeros(1, 4), None), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn softmax_only_on_final_layer() {
        let r = MlpModel::new(&[2, 3, 2], &[Activation::Softmax, Activation::Identity], 0);
        assert!(matches!(r, Err(crate::Error::Contract(_))));
    }

    #[test]
    fn exact_fit_has_zero_gradient() {
        let m = MlpModel::new(&[3, 4, 2], &[Activation::Tanh, Activation::Identity], 5).unwrap();
        let x = random_batch(6, 3, 2);
        let y = m.predict(&x).unwrap();
        let pass = m.forward(&x, None).unwrap();
        let g = m.backward(&pass, &y, Loss::Mse).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn linear_mse_gradient_matches_closed_form() {
        // single output, no bias contribution checked separately
        let n = 9;
        let x = random_batch(n, 3, 11);
        let y = random_batch(n, 1, 12);
        let m = MlpModel::new(&[3, 1], &[Activation::Identity], 13).unwrap();
        let w = m.layers()[0].weights.data().to_vec();
        let pass = m.forward(&x, None).unwrap();
        let g = m.backward(&pass, &y, Loss::Mse).unwrap();
        // 2/N · Xᵀ(Xw − y)
        for j in 0..3 {
            let mut s = 0.0;
            for i in 0..n {
                let r: f64 = (0..3).map(|k| x[(i, k)] * w[k]).sum::<f64>() - y[(i, 0)];
                s += x[(i, j)] * r;
            }
            let expect = 2.0 / n as f64 * s;
            assert!((g.weights[0].data()[j] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_check_every_activation_and_loss() {
        use Activation::*;
        for (k, hidden) in [Relu, Tanh, Sigmoid, Identity].into_iter().enumerate() {
            let m = MlpModel::new(&[4, 6, 5, 3], &[hidden, Tanh, Identity], 100 + k as u64).unwrap();
            let x = random_batch(5, 4, 7);
            let y = random_batch(5, 3, 8);
            let e = grad_check(&m, &x, &y, Loss::Mse, 1e-5).unwrap();
            assert!(e <= 1e-4, "{hidden:?}/mse: {e}");

            let m = MlpModel::new(&[4, 6, 3], &[hidden, Softmax], 200 + k as u64).unwrap();
            let e = grad_check(&m, &x, &one_hot(5, 3, 9), Loss::CrossEntropy, 1e-5).unwrap();
            assert!(e <= 1e-4, "{hidden:?}/ce: {e}");

            let m = MlpModel::new(&[4, 5, 2], &[hidden, Sigmoid], 300 + k as u64).unwrap();
            let e = grad_check(&m, &x, &random_batch(5, 2, 10), Loss::Mse, 1e-5).unwrap();
            assert!(e <= 1e-4, "{hidden:?}/sigmoid-mse: {e}");
        }
        // softmax head trained with squared error exercises the full softmax Jacobian
        let m = MlpModel::new(&[3, 4], &[Softmax], 17).unwrap();
        let e = grad_check(&m, &random_batch(4, 3, 1), &random_batch(4, 4, 2), Loss::Mse, 1e-5).unwrap();
        assert!(e <= 1e-4);
    }

    #[test]
    fn identity_gradient_check_is_tight() {
        let m = MlpModel::new(&[3, 2], &[Activation::Identity], 4).unwrap();
        let e = grad_check(&m, &random_batch(4, 3, 5), &random_batch(4, 2, 6), Loss::Mse, 1e-4).unwrap();
        assert!(e <= 1e-8, "{e}");
    }

    #[test]
    fn grad_check_rejects_bad_epsilon() {
        let m = MlpModel::new(&[1, 1], &[Activation::Identity], 0).unwrap();
        let x = Tensor2::zeros(1, 1);
        assert!(grad_check(&m, &x, &x, Loss::Mse, 1e-2).is_err());
    }

    #[test]
    fn xor_converges_with_adam() {
        let mut m = MlpModel::new(&[2, 8, 1], &[Activation::Tanh, Activation::Identity], 42).unwrap();
        let cfg = TrainConfig { learning_rate: 0.02, batch_size: 4, epochs: 2000, seed: 1, ..Default::default() };
        let h = train(&mut m, &xor(), &cfg).unwrap();
        assert_eq!(h.loss.len(), 2000);
        let mse = Loss::Mse.value(&m.predict(&xor().inputs).unwrap(), &xor().targets).unwrap();
        assert!(mse < 1e-2, "final mse {mse}");
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        for opt in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut m = MlpModel::new(&[2, 8, 1], &[Activation::Tanh, Activation::Identity], 42).unwrap();
            let before = m.clone();
            let cfg = TrainConfig { optimizer: opt, learning_rate: 0.0, epochs: 5, batch_size: 2, ..Default::default() };
            train(&mut m, &xor(), &cfg).unwrap();
            assert_eq!(m, before);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig { learning_rate: 0.01, batch_size: 2, epochs: 50, seed: 9, dropout_rate: 0.2, ..Default::default() };
        let run = || {
            let mut m = MlpModel::new(&[2, 8, 1], &[Activation::Tanh, Activation::Identity], 3).unwrap();
            let h = train(&mut m, &xor(), &cfg).unwrap();
            (m, h)
        };
        let (m1, h1) = run();
        let (m2, h2) = run();
        assert_eq!(h1, h2);
        assert_eq!(m1.flat_params(), m2.flat_params());
    }

    #[test]
    fn zero_dropout_equals_no_dropout() {
        let cfg = TrainConfig { learning_rate: 0.01, batch_size: 2, epochs: 30, seed: 9, ..Default::default() };
        let mut a = MlpModel::new(&[2, 8, 1], &[Activation::Tanh, Activation::Identity], 3).unwrap();
        let mut b = a.clone();
        train(&mut a, &xor(), &cfg).unwrap();
        // explicit all-ones masks must leave the trajectory untouched as well
        let mut opt = Optimizer::new(&cfg, &b);
        let mut rng = crate::seed::rng(cfg.seed);
        let data = xor();
        let mut order: Vec<usize> = (0..4).collect();
        for _ in 0..cfg.epochs {
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
            for chunk in order.chunks(2) {
                let batch = data.subset(chunk);
                let masks = vec![Some(dropout_mask(chunk.len(), 2, 0.0, &mut crate::seed::rng(0))), None];
                let pass = b.forward(&batch.inputs, Some(&masks)).unwrap();
                let g = b.backward(&pass, &batch.targets, Loss::Mse).unwrap();
                opt.step(&mut b, &g);
            }
        }
        assert_eq!(a.flat_params(), b.flat_params());
    }

    #[test]
    fn small_sgd_step_reduces_quadratic_loss() {
        let x = random_batch(10, 3, 21);
        let y = random_batch(10, 1, 22);
        let mut m = MlpModel::new(&[3, 1], &[Activation::Identity], 23).unwrap();
        let data = LabeledDataset::new(x.clone(), y.clone()).unwrap();
        let before = Loss::Mse.value(&m.predict(&x).unwrap(), &y).unwrap();
        let cfg = TrainConfig { optimizer: OptimizerKind::Sgd, learning_rate: 1e-4, batch_size: 10, epochs: 1, ..Default::default() };
        train(&mut m, &data, &cfg).unwrap();
        let after = Loss::Mse.value(&m.predict(&x).unwrap(), &y).unwrap();
        assert!(after < before);
    }

    #[test]
    fn divergence_is_reported() {
        let x = Tensor2::from_rows(&[[1e200, 1e200]]).unwrap();
        let y = Tensor2::from_rows(&[[0.0]]).unwrap();
        let mut m = MlpModel::new(&[2, 1], &[Activation::Identity], 0).unwrap();
        let r = train(&mut m, &LabeledDataset::new(x, y).unwrap(), &TrainConfig { epochs: 3, ..Default::default() });
        assert!(matches!(r, Err(crate::Error::Diverged { .. })));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = MlpModel::new(&[5, 7, 3], &[Activation::Relu, Activation::Softmax], 77).unwrap();
        let text = m.to_json();
        assert!(text.contains("\"activation\": \"ReLU\""));
        assert_eq!(MlpModel::from_json(&text).unwrap(), m);
    }

    proptest::proptest! {
        #[test]
        fn softmax_rows_are_distributions(logits in proptest::collection::vec(-15.0f64..15.0, 1..12)) {
            let mut row = logits.clone();
            softmax_in_place(&mut row);
            let s: f64 = row.iter().sum();
            proptest::prop_assert!((s - 1.0).abs() <= 1e-12);
            proptest::prop_assert!(row.iter().all(|&p| p > 0.0 && p < 1.0 || logits.len() == 1));
        }
    }
}
