use corefbench_core::encoder::{build_vocab, EncoderConfig};
use corefbench_core::objectives::Objective;
use corefbench_core::stats::{aggregate, t_test_pooled};
use corefbench_core::synthetic::{generate_schemas, lexicon, split};
use corefbench_core::training::{evaluate, prepare_set, train_run_observed, RunConfig, RunData};

#[test]
fn trained_parameters_reproduce_the_reported_dev_accuracy() {
    let vocab = build_vocab(&lexicon(), 1).unwrap();
    let (train, dev) = split(generate_schemas(40, 11), 30);
    let encoder = EncoderConfig {
        num_layers: 1,
        hidden: 16,
        ffn: 32,
        ..EncoderConfig::toy(vocab.len())
    };
    let mut results = Vec::new();
    for objective in Objective::ALL {
        for seed in 0..2 {
            let config = RunConfig {
                learning_rate: 1e-3,
                num_epochs: 2,
                batch_size: 8,
                seed,
                ..RunConfig::new(objective, encoder)
            };
            let mut steps = 0;
            let data = RunData {
                train: &train,
                dev: &dev,
                vocab: &vocab,
                pretrained: None,
            };
            let run = train_run_observed(&config, data, |_| steps += 1).unwrap();
            assert_eq!(steps, 2 * train.len().div_ceil(8), "{objective}");
            let set = prepare_set(objective, &dev, &vocab).unwrap();
            let eval = evaluate(&run.model, &run.store, &set).unwrap();
            assert_eq!(eval.accuracy, run.result.final_dev_accuracy, "{objective}");
            assert_eq!(run.result.epoch_dev_accuracy.len(), 2);
            results.push(run.result);
        }
    }
    let all = aggregate(&results, false).unwrap();
    assert_eq!(all.n, 8);
    let accs: Vec<f64> = results.iter().map(|r| r.final_dev_accuracy).collect();
    assert!(accs.iter().all(|a| (0.0..=1.0).contains(a)));
    let t = t_test_pooled(&accs[..4], &accs[4..]).unwrap();
    assert_eq!(t.degrees_of_freedom, 6);
}
