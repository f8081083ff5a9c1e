use chunkvqa::features::FeatureMode;
use chunkvqa::image::Image;
use chunkvqa::losses::{mae_loss, total_loss, total_loss_grad, Batch};
use chunkvqa::training::{QualityModel, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(c: usize, h: usize, w: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..c * h * w).map(|_| rng.random::<f32>()).collect();
    Image::from_data(c, h, w, data).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Check analytic d(score)/d(param) against central differences for a
/// spread of parameters in every group.
fn check_model_gradient(mode: FeatureMode) {
    let mut cfg = TrainConfig::stub();
    cfg.feature_mode = mode;
    cfg.hidden_units = 16;
    let mut model = QualityModel::new(&cfg, 3.0).unwrap();
    let s = cfg.sampling.crop_size;
    let key = random_image(3, s, s, 11);
    let frames: Vec<Image> = (0..cfg.sampling.motion_frames)
        .map(|t| random_image(3, cfg.sampling.motion_size, cfg.sampling.motion_size, 100 + t as u64))
        .collect();
    let motion = model.motion_embedding(&frames).unwrap();

    let fwd = model.forward_chunk(Some(&key), &motion).unwrap();
    let grads = model.backward_chunk(&fwd, 1.0).unwrap();

    let eps = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let n_groups = grads.0.len();
    for g in 0..n_groups {
        let len = grads.0[g].len();
        let stride = (len / 12).max(1);
        for k in (0..len).step_by(stride) {
            let orig = model.params_mut()[g][k];
            model.params_mut()[g][k] = orig + eps;
            let up = model.forward_chunk(Some(&key), &motion).unwrap().score;
            model.params_mut()[g][k] = orig - eps;
            let down = model.forward_chunk(Some(&key), &motion).unwrap().score;
            model.params_mut()[g][k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.0[g][k];
            if analytic.abs() < 1e-7 && numeric.abs() < 1e-7 {
                continue;
            }
            worst = worst.max(rel_err(analytic, numeric));
            checked += 1;
        }
    }
    assert!(checked > 20, "too few parameters exercised: {checked}");
    assert!(worst < 1e-3, "worst relative gradient error {worst}");
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    check_model_gradient(FeatureMode::Full);
}

#[test]
fn spatial_model_gradient_matches_finite_differences() {
    check_model_gradient(FeatureMode::Spatial);
}

#[test]
fn deeper_backbone_gradient_matches_finite_differences() {
    let mut cfg = TrainConfig::stub();
    cfg.backbone = "stub-conv3".into();
    cfg.feature_mode = FeatureMode::Spatial;
    cfg.hidden_units = 8;
    let mut model = QualityModel::new(&cfg, 0.0).unwrap();
    let key = random_image(3, 24, 24, 5);
    let fwd = model.forward_chunk(Some(&key), &[]).unwrap();
    let grads = model.backward_chunk(&fwd, 1.0).unwrap();
    let eps = 1e-5;
    // first conv layer weights: the longest backprop path
    for k in (0..grads.0[0].len()).step_by(17) {
        let orig = model.params_mut()[0][k];
        model.params_mut()[0][k] = orig + eps;
        let up = model.forward_chunk(Some(&key), &[]).unwrap().score;
        model.params_mut()[0][k] = orig - eps;
        let down = model.forward_chunk(Some(&key), &[]).unwrap().score;
        model.params_mut()[0][k] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grads.0[0][k];
        if analytic.abs() < 1e-7 && numeric.abs() < 1e-7 {
            continue;
        }
        assert!(rel_err(analytic, numeric) < 1e-3, "k={k}: {analytic} vs {numeric}");
    }
}

#[test]
fn lambda_zero_gives_mae_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = rng.random_range(1..10);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let batch = Batch::new(&p, &g).unwrap();
        let grad = total_loss_grad(&batch, 0.0);
        for i in 0..n {
            let expected = (p[i] - g[i]).signum() / n as f64;
            assert!((grad[i] - expected).abs() < 1e-12);
        }
        assert_eq!(total_loss(&batch, 0.0), mae_loss(&batch));
    }
}
