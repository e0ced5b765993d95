use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nn::grad_check;
use crate::pointgroup::GroupName;

fn config(mode: FeatureMode, pooling: Pooling, group: &str, dim: usize) -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        hidden: 8,
        feature_mode: mode,
        pooling,
        group: Some(group.parse().unwrap()),
        dim,
    }
}

fn states(n: usize, dim: usize, count: usize) -> Vec<SystemState> {
    random_states(n, dim, count, 77).unwrap()
}

#[test]
fn validation() {
    let mut c = config(FeatureMode::Degnn, Pooling::Sum, "D2h", 3);
    assert!(c.validate().is_ok());
    c.group = None;
    assert!(c.validate().is_err());
    c.feature_mode = FeatureMode::Plain;
    assert!(c.validate().is_ok());
    c.num_layers = 0;
    assert!(c.validate().is_err());
    let two_d = config(FeatureMode::Degnn, Pooling::Sum, "D2", 3);
    assert!(two_d.validate().is_err());
}

#[test]
fn config_serializes_with_tags() {
    let c = config(FeatureMode::Degnn, Pooling::Attn, "D4h:z", 3);
    let v = serde_json::to_value(&c).unwrap();
    assert_eq!(v["feature_mode"], "degnn");
    assert_eq!(v["pooling"], "attn");
    assert_eq!(v["group"], "D4h:z");
    let back: ModelConfig = serde_json::from_value(v).unwrap();
    assert_eq!(back, c);
}

#[test]
fn silent_messages_give_euler_drift() {
    let c = ModelConfig {
        num_layers: 3,
        ..config(FeatureMode::Degnn, Pooling::Attn, "D2h", 3)
    };
    let (model, mut params) = Model::new(c, 5).unwrap();
    for id in model.message_output_weights() {
        params.get_mut(id).data.fill(0.0);
    }
    for (w, b) in model.velocity_gate_output() {
        params.get_mut(w).data.fill(0.0);
        params.get_mut(b).data.fill(1.0);
    }
    let s = &states(4, 3, 1)[0];
    let pred = model.forward(&params, s).unwrap();
    for (k, p) in pred.iter().enumerate() {
        let want = s.q[k] + 3.0 * s.qdot[k];
        assert!((p - want).abs() < 1e-12, "{p} vs {want}");
    }
    // a closed gate freezes the positions
    for (_, b) in model.velocity_gate_output() {
        params.get_mut(b).data.fill(0.0);
    }
    assert_eq!(model.forward(&params, s).unwrap(), s.q);
}

#[test]
fn node_update_commutes_with_rotation() {
    let (model, params) = Model::new(config(FeatureMode::Degnn, Pooling::Sum, "Oh", 3), 2).unwrap();
    let q = [0.3, -0.7, 1.1];
    let v = [0.2, 0.1, -0.4];
    let m = [0.05, -0.3, 0.2];
    let h: Vec<f64> = (0..8).map(|k| (k as f64 * 0.37).sin()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let o = random_orthogonal(3, &mut rng);
    let (q1, v1, h1) = model.node_update(&params, 0, &q, &v, &h, &m).unwrap();
    let rot = |x: &[f64]| o.apply(x, None).unwrap();
    let (q2, v2, h2) = model.node_update(&params, 0, &rot(&q), &rot(&v), &h, &rot(&m)).unwrap();
    for (a, b) in rot(&q1).iter().zip(&q2).chain(rot(&v1).iter().zip(&v2)) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in h1.iter().zip(&h2) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn pooled_models_are_group_equivariant() {
    let cases = [("Ci", 3), ("D2", 2), ("D2h", 3), ("D4h:y", 3), ("Oh", 3)];
    for (group, dim) in cases {
        for pooling in Pooling::all() {
            let (model, params) = Model::new(config(FeatureMode::Degnn, pooling, group, dim), 3).unwrap();
            let elements = model.orbit_group().elements().to_vec();
            let report = check_equivariance(&model, &params, &elements, &states(5, dim, 3)).unwrap();
            assert!(report.passed(1e-9), "{group}/{pooling}: {report:?}");
            assert!(report.max_embedding_deviation <= 1e-12, "{group}/{pooling}: {report:?}");
        }
    }
}

#[test]
fn identity_only_group_is_exact() {
    let (model, params) = Model::new(config(FeatureMode::Degnn, Pooling::Attn, "C1", 3), 3).unwrap();
    assert_eq!(model.orbit_group().name(), GroupName::C1);
    let report = check_equivariance(&model, &params, model.orbit_group().elements(), &states(4, 3, 2)).unwrap();
    assert_eq!(report.max_deviation, 0.0);
}

#[test]
fn plain_model_breaks_the_symmetry() {
    let (model, params) = Model::new(config(FeatureMode::Plain, Pooling::Sum, "D2h", 3), 3).unwrap();
    assert_eq!(model.orbit_group().len(), 1);
    let g = model.config().group().unwrap().unwrap();
    let report = check_equivariance(&model, &params, g.elements(), &states(5, 3, 3)).unwrap();
    assert!(report.max_deviation > 1e-3, "{report:?}");
    assert_ne!(report.worst_element.as_deref(), Some("identity"));
}

#[test]
fn distance_only_model_is_fully_orthogonal_and_translation_equivariant() {
    let c = ModelConfig {
        group: None,
        ..config(FeatureMode::En, Pooling::Mean, "C1", 3)
    };
    let (model, params) = Model::new(c, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rotations: Vec<_> = (0..10).map(|_| random_orthogonal(3, &mut rng)).collect();
    let report = check_equivariance(&model, &params, &rotations, &states(5, 3, 4)).unwrap();
    assert!(report.passed(1e-9), "{report:?}");

    let s = &states(5, 3, 1)[0];
    let shift = [0.7, -1.3, 2.1];
    let mut moved = s.clone();
    moved.q.iter_mut().enumerate().for_each(|(k, x)| *x += shift[k % 3]);
    let a = model.forward(&params, s).unwrap();
    let b = model.forward(&params, &moved).unwrap();
    for (k, (x, y)) in a.iter().zip(&b).enumerate() {
        assert!((x + shift[k % 3] - y).abs() < 1e-9);
    }
}

#[test]
fn inversion_pair_sorts_the_same_either_way() {
    let (model, params) = Model::new(config(FeatureMode::Tn, Pooling::Rank, "Ci", 3), 6).unwrap();
    let x = vec![0.4, -0.2, 0.9];
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let rest = vec![0.1; 2 * 8 + 1];
    let a = model.message_weight(&params, 0, &[x.clone(), neg.clone()], &rest).unwrap();
    let b = model.message_weight(&params, 0, &[neg, x], &rest).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn single_image_attention_is_a_plain_mlp_message() {
    // With one image, attention weights are all 1 and the row mean is the
    // value vector itself.
    let (model, params) = Model::new(config(FeatureMode::Tn, Pooling::Attn, "C1", 3), 6).unwrap();
    let rest = vec![0.3; 17];
    let w = model.message_weight(&params, 1, &[vec![0.5, 0.1, -0.2]], &rest).unwrap();
    assert!(w.is_finite());
}

#[test]
fn gradients_match_finite_differences() {
    for (mode, pooling) in [
        (FeatureMode::Degnn, Pooling::Attn),
        (FeatureMode::Degnn, Pooling::Rank),
        (FeatureMode::Plain, Pooling::Sum),
    ] {
        let c = ModelConfig {
            hidden: 4,
            ..config(mode, pooling, "D2h", 3)
        };
        let (model, params) = Model::new(c, 8).unwrap();
        let s = &states(3, 3, 1)[0];
        let target: Vec<f64> = s.q.iter().map(|x| x + 0.3).collect();
        let report = grad_check(&params, 1e-5, |p| model.loss_and_grad(p, s, &target)).unwrap();
        // Tiny entries sit below the difference quotient's rounding noise,
        // so they are measured against the gradient's overall scale.
        assert!(report.max_scaled_error < 1e-6, "{mode}/{pooling}: {report:?}");
    }
}

#[test]
fn forward_rejects_mismatched_dimension() {
    let (model, params) = Model::new(config(FeatureMode::Degnn, Pooling::Sum, "D2h", 3), 1).unwrap();
    let s = &states(3, 2, 1)[0];
    assert!(model.forward(&params, s).is_err());
}

#[test]
fn rebuild_from_params_matches() {
    let c = config(FeatureMode::Degnn, Pooling::Mean, "D4h:x", 3);
    let (model, params) = Model::new(c.clone(), 12).unwrap();
    let mut changed = params.clone();
    changed.tensors_mut()[0].data[0] += 1.0;
    let (again, loaded) = Model::from_params(c, &changed).unwrap();
    let s = &states(3, 3, 1)[0];
    assert_eq!(again.forward(&loaded, s).unwrap(), model.forward(&changed, s).unwrap());
}
