use popinit::gating::spearman;
use popinit::neural::{
    finetune_decoder, load_surrogate, save_surrogate, train_vae, FinetuneConfig, Latent, LossWeights, TrainConfig,
    VaeSurrogate,
};
use popinit::problems::{generate_instance, EvaluatedSample};
use popinit::repository::collect_experience;
use popinit::rng::seeded;
use popinit::{Objective, ProblemClass, Solution};

fn hand_set_surrogate() -> VaeSurrogate {
    let mut vae = VaeSurrogate::with_widths(2, 1, &[], &[], &[], &mut seeded(0));
    let enc = &mut vae.encoder.layers[0];
    enc.weights = vec![0.5, -0.25, 0.1, 0.2];
    enc.bias = vec![0.1, -0.3];
    let dec = &mut vae.decoder.layers[0];
    dec.weights = vec![1.0, -2.0];
    dec.bias = vec![0.0, 0.5];
    let sco = &mut vae.scorer.layers[0];
    sco.weights = vec![0.3];
    sco.bias = vec![0.1];
    vae
}

#[test]
fn loss_matches_hand_computation() {
    // mu = 0.6, log sigma = -0.2, eps = 0.5; decoder sigmoid(z), sigmoid(0.5 - 2z);
    // scorer 0.3 z + 0.1 against target 0.8. Values worked out separately.
    let vae = hand_set_surrogate();
    let batch = vec![(vec![1.0, 0.0], 0.8)];
    let noise = vec![vec![0.5]];
    let only = |r, s, k| vae.loss(&batch, LossWeights { reconstruction: r, score: s, kl: k }, Some(&noise));
    assert!((only(1.0, 0.0, 0.0) - 0.10361816506996967).abs() < 1e-12);
    assert!((only(0.0, 1.0, 0.0) - 0.15776020355563677).abs() < 1e-12);
    assert!((only(0.0, 0.0, 1.0) - 0.2151600230178196).abs() < 1e-12);
    assert!((vae.loss(&batch, LossWeights::new(1.0, 0.1), Some(&noise)) - 0.2828943709273884).abs() < 1e-12);
}

#[test]
fn perfect_reconstruction_without_extra_terms_is_zero() {
    let mut vae = VaeSurrogate::with_widths(2, 1, &[], &[], &[], &mut seeded(0));
    vae.encoder.layers[0].weights.fill(0.0);
    let dec = &mut vae.decoder.layers[0];
    dec.weights.fill(0.0);
    // sigmoid(+-40) is 1 / 0 to within f64 rounding.
    dec.bias = vec![40.0, -40.0];
    let batch = vec![(vec![1.0, 0.0], 0.0)];
    let loss = vae.loss(&batch, LossWeights { reconstruction: 1.0, score: 0.0, kl: 0.0 }, None);
    assert!(loss < 1e-30);
}

#[test]
fn standard_normal_latent_has_zero_kl() {
    let mut vae = VaeSurrogate::with_widths(3, 2, &[], &[4], &[4], &mut seeded(1));
    vae.encoder.layers[0].weights.fill(0.0);
    vae.encoder.layers[0].bias.fill(0.0);
    let batch = vec![(vec![1.0, 0.0, 1.0], 0.5)];
    let kl = vae.loss(&batch, LossWeights { reconstruction: 0.0, score: 0.0, kl: 1.0 }, None);
    assert!(kl.abs() < 1e-15);
}

#[test]
fn forward_shapes() {
    let vae = VaeSurrogate::with_widths(10, 4, &[8], &[8], &[8], &mut seeded(2));
    let out = vae.forward(&[1.0; 10], Latent::<popinit::rng::Rng>::Mean).unwrap();
    assert_eq!((out.mu.len(), out.sigma.len(), out.reconstruction.len()), (4, 4, 10));
    assert!(out.sigma.iter().all(|&s| s > 0.0));
    assert!(vae.forward(&[1.0; 9], Latent::<popinit::rng::Rng>::Mean).is_err());
}

#[test]
fn overfits_a_single_repeated_point() {
    let x = Solution::from_bitstring("10110010").unwrap();
    let data: Vec<EvaluatedSample> = (0..32).map(|_| EvaluatedSample { solution: x.clone(), objective: 4.0 }).collect();
    let cfg = TrainConfig { epochs: 500, learning_rate: 0.05, seed: 3, ..TrainConfig::default() };
    let trained = train_vae(&data, &cfg).unwrap();
    let r = trained.surrogate.decode(&trained.surrogate.latent_mean(&x.to_f64()));
    let mse: f64 = r.iter().zip(x.bits()).map(|(r, &b)| (r - b as f64).powi(2)).sum::<f64>() / 8.0;
    assert!(mse < 1e-2, "mse {mse}");
}

#[test]
fn training_lowers_the_loss_and_ranks_one_max() {
    let inst = generate_instance(ProblemClass::OneMax, 8, 5).unwrap();
    let data = collect_experience(&inst, 400, &mut seeded(6)).unwrap();
    let trained = train_vae(&data, &TrainConfig { seed: 7, ..TrainConfig::default() }).unwrap();
    assert!(trained.loss_history.last().unwrap() <= &trained.initial_loss);

    let mut r = seeded(8);
    let xs: Vec<Solution> = (0..100).map(|_| Solution::random(8, &mut r)).collect();
    let truth: Vec<f64> = xs.iter().map(|x| inst.evaluate(x).unwrap()).collect();
    let pred = trained.surrogate.predict_scores(&xs).unwrap();
    let rho = spearman(&pred, &truth);
    assert!(rho > 0.5, "spearman {rho}");
}

#[test]
fn finetune_collapses_onto_a_single_target() {
    let inst = generate_instance(ProblemClass::OneMax, 8, 1).unwrap();
    let data = collect_experience(&inst, 200, &mut seeded(2)).unwrap();
    let trained = train_vae(&data, &TrainConfig { epochs: 50, seed: 3, ..TrainConfig::default() }).unwrap();
    let target = Solution::from_bitstring("1100101001").unwrap();
    let inputs: Vec<Solution> = data.iter().take(16).map(|s| s.solution.clone()).collect();
    let pairs: Vec<_> = inputs.iter().map(|x| (x.clone(), target.clone())).collect();
    let cfg = FinetuneConfig { learning_rate: 0.5, epochs: 400, ..FinetuneConfig::default() };
    let tuned = finetune_decoder(&trained.surrogate, &pairs, 10, &cfg).unwrap();
    assert_eq!(tuned.surrogate.output_dim(), 10);
    for x in &inputs {
        let r = tuned.surrogate.decode(&tuned.surrogate.latent_mean(&x.to_f64()));
        for (v, &t) in r.iter().zip(target.bits()) {
            assert!((v - t as f64).abs() < 0.1, "{v} vs {t}");
        }
    }
    assert!(tuned.loss_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn identity_finetune_does_not_lose_reconstruction_quality() {
    let inst = generate_instance(ProblemClass::Knapsack, 10, 4).unwrap();
    let data = collect_experience(&inst, 200, &mut seeded(5)).unwrap();
    let trained = train_vae(&data, &TrainConfig { epochs: 30, seed: 6, ..TrainConfig::default() }).unwrap();
    let pairs: Vec<_> = data.iter().take(64).map(|s| (s.solution.clone(), s.solution.clone())).collect();
    let before = trained.surrogate.transfer_loss(&pairs) / pairs.len() as f64;
    let tuned = finetune_decoder(&trained.surrogate, &pairs, 10, &FinetuneConfig::default()).unwrap();
    let after = tuned.surrogate.transfer_loss(&pairs) / pairs.len() as f64;
    assert!(after <= before, "{after} > {before}");
    assert_eq!(tuned.surrogate.encoder, trained.surrogate.encoder);
    assert_eq!(tuned.surrogate.scorer, trained.surrogate.scorer);
}

#[test]
fn surrogate_blob_round_trip_keeps_predictions() {
    let vae = VaeSurrogate::new(12, &mut seeded(9));
    let back = load_surrogate(&save_surrogate(&vae)).unwrap();
    let mut r = seeded(10);
    let xs: Vec<Solution> = (0..20).map(|_| Solution::random(12, &mut r)).collect();
    assert_eq!(vae.predict_scores(&xs).unwrap(), back.predict_scores(&xs).unwrap());
}
