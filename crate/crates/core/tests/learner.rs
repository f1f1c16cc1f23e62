use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pbcoreset::learner::{self, decode_model, encode_model, load_model, save_model};
use pbcoreset::scenarios;
use pbcoreset::{Dataset, InnerConfig, LabeledExample, LearnerKind, Mask};

fn random_dataset(n: usize, d: usize, c: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let x = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            LabeledExample::new(x, i % c)
        })
        .collect();
    Dataset::new(examples, c, d).unwrap()
}

/// Minimizer of `(1/N) sum_i m_i ||W x_i + b - e_{y_i}||^2 + (l2/2) ||[W b]||^2`
/// from the normal equations, solved with a dense LU factorization.
fn ridge_reference(ds: &Dataset, mask: &Mask, l2: f64) -> DMatrix<f64> {
    let d = ds.feature_dim();
    let c = ds.num_classes();
    let idx = mask.indices();
    let x = DMatrix::from_fn(idx.len(), d + 1, |r, k| {
        if k < d {
            ds.example(idx[r]).features[k]
        } else {
            1.0
        }
    });
    let y = DMatrix::from_fn(idx.len(), c, |r, k| f64::from(ds.example(idx[r]).label == k));
    let n = idx.len() as f64;
    let a = x.transpose() * &x / n + DMatrix::identity(d + 1, d + 1) * (0.5 * l2);
    let rhs = x.transpose() * y / n;
    a.lu().solve(&rhs).expect("non-singular")
}

#[test]
fn ridge_matches_normal_equations() {
    for seed in 0..5 {
        let ds = random_dataset(30, 4, 3, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let mask = Mask::new((0..30).map(|_| rng.random_bool(0.6)).collect());
        let l2 = 0.05 * (seed + 1) as f64;
        let model = learner::fit(&ds, &mask, &InnerConfig::ridge(l2), &mut rng).unwrap();
        let reference = ridge_reference(&ds, &mask, l2);
        let p = model.params();
        for class in 0..3 {
            for f in 0..4 {
                assert!((p[class * 4 + f] - reference[(f, class)]).abs() < 1e-9);
            }
            assert!((p[12 + class] - reference[(4, class)]).abs() < 1e-9);
        }
    }
}

#[test]
fn ridge_solution_is_stationary_for_the_training_objective() {
    let ds = random_dataset(25, 3, 2, 7);
    let mask = Mask::from_indices(25, &[0, 3, 4, 8, 9, 15, 20, 24]).unwrap();
    let cfg = InnerConfig::ridge(0.2);
    let model = learner::fit(&ds, &mask, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let (_, grad) =
        learner::objective_and_gradient(model.architecture(), model.params(), &ds, &mask.indices(), 8.0, 0.2);
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm < 1e-10, "gradient norm {norm}");
}

#[test]
fn iterative_learners_reduce_their_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ds = scenarios::gen_blobs(40, 3, 3, 3.0, &mut rng).unwrap();
    let mask = Mask::ones(ds.len());
    for kind in [LearnerKind::Logistic, LearnerKind::Mlp] {
        let cfg = InnerConfig {
            kind,
            hidden_width: 16,
            epochs: 50,
            ..InnerConfig::default()
        };
        let out = learner::fit_with_history(&ds, &mask, &cfg, None, &mut rng).unwrap();
        let first = out.history[0];
        let last = *out.history.last().unwrap();
        assert!(last < 0.5 * first, "{kind:?}: {first} -> {last}");
        let acc = learner::accuracy(&out.model, &ds);
        assert!(acc >= 0.85, "{kind:?}: accuracy {acc}");
    }
}

#[test]
fn model_file_round_trip() {
    let ds = random_dataset(20, 3, 2, 1);
    let cfg = InnerConfig {
        kind: LearnerKind::Mlp,
        hidden_width: 5,
        epochs: 5,
        ..InnerConfig::default()
    };
    let model = learner::fit(&ds, &Mask::ones(20), &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded.params(), model.params());
    assert_eq!(loaded.architecture(), model.architecture());
    assert_eq!(encode_model(&decode_model(&encode_model(&model)).unwrap()), encode_model(&model));
}

#[test]
fn corrupt_model_file_is_rejected() {
    let ds = random_dataset(10, 2, 2, 2);
    let model = learner::fit(&ds, &Mask::ones(10), &InnerConfig::ridge(0.1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut bytes = encode_model(&model);
    assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
    bytes[0] ^= 0xff;
    assert!(decode_model(&bytes).is_err());
}
