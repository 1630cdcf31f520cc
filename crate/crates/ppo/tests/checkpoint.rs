use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trafficlab_ppo::{load_checkpoint, save_checkpoint, Agent, CheckpointError, Hyperparams};

fn agent<T: trafficlab_ppo::Scalar>() -> (Agent<T>, Hyperparams) {
    let hp = Hyperparams { hidden_units: 12, curiosity_encoding_size: 6, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut a = Agent::new(5, 2, &hp, &mut rng);
    a.obs_norm.update_batch(&[vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![-1.0, 0.5, 9.0, 0.0, 2.0]]);
    a.step = 777;
    (a, hp)
}

#[test]
fn round_trip_preserves_inference() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    let (a, hp) = agent::<f32>();
    save_checkpoint(&path, &a, &hp).unwrap();
    let (b, hp2) = load_checkpoint::<f32>(&path).unwrap();
    assert_eq!(a, b);
    assert_eq!(hp, hp2);
    let obs = [0.3, -2.0, 7.0, 1.0, 0.0];
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(a.action(&obs, &mut r1, true), b.action(&obs, &mut r2, true));
    assert_eq!(a.action(&obs, &mut r1, false), b.action(&obs, &mut r2, false));
    assert_eq!(a.value(&obs), b.value(&obs));
}

#[test]
fn rejects_other_version_and_width() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    let (a, hp) = agent::<f64>();
    save_checkpoint(&path, &a, &hp).unwrap();
    assert!(matches!(load_checkpoint::<f32>(&path), Err(CheckpointError::Scalar { .. })));

    let text = std::fs::read_to_string(&path).unwrap().replacen("\"format_version\":1", "\"format_version\":99", 1);
    std::fs::write(&path, text).unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(CheckpointError::Version { found: 99, .. })));
}

#[test]
fn missing_file_is_io_error() {
    let err = load_checkpoint::<f32>(std::path::Path::new("/nonexistent/ckpt.json")).unwrap_err();
    assert!(matches!(err, CheckpointError::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/ckpt.json"));
}

#[test]
fn deterministic_inference_is_repeatable() {
    let (a, _) = agent::<f32>();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let obs = [1.0, 1.0, 1.0, 1.0, 1.0];
    let x = a.action(&obs, &mut rng, true);
    for _ in 0..10 {
        assert_eq!(a.action(&obs, &mut rng, true), x);
    }
}
