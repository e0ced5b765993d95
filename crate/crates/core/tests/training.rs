use degnn::model::{FeatureMode, Model, ModelConfig, Pooling};
use degnn::pointgroup::{make_group, Axis, GroupName};
use degnn::sim::{make_dataset, BoxSpec, SimConfig, SystemKind};
use degnn::train::{generalization_eval, train, TrainConfig, Trained};

#[test]
fn desk_run_halves_the_training_loss_and_generalizes_exactly() {
    let cfg = SimConfig::new(5, BoxSpec::new(vec![5.0, 4.0, 4.0]).unwrap(), SystemKind::Gravity);
    let (tr, va, te) = make_dataset(&cfg, (50, 20, 20), 25, 3).unwrap();
    let group = make_group(GroupName::D4h, 3, Some(Axis::X)).unwrap();
    let config = ModelConfig {
        num_layers: 2,
        hidden: 8,
        feature_mode: FeatureMode::Degnn,
        pooling: Pooling::Mean,
        group: Some(group.id()),
        dim: 3,
    };
    let (model, params) = Model::new(config, 2).unwrap();
    let (best, m) = train(&model, params, &tr, &va, &TrainConfig::desk()).unwrap();
    let last = m.epochs.last().unwrap().train_loss;
    assert!(last <= 0.5 * m.initial_train_loss, "{} -> {last}", m.initial_train_loss);
    assert!(m.epochs.iter().all(|r| r.train_loss.is_finite() && r.val_loss >= 0.0));

    let t = Trained { model: &model, params: &best };
    for e in group.elements() {
        let g = generalization_eval(&t, &te, e).unwrap();
        assert!((g.ratio - 1.0).abs() <= 1e-6, "{}: {}", g.element, g.ratio);
    }
}
