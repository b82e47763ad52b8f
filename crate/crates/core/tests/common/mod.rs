#![allow(dead_code)]

use sths_core::dataset::{
    generate_synthetic, AttributeScheme, HardClasses, HardnessAnchor, Imbalance, SyntheticConfig, ZslDataset,
};
use sths_core::hardness::PolicyKind;
use sths_core::models::{EmbeddingParams, ModelSpec};
use sths_core::selftrain::{PriorSource, SthsConfig};

pub fn small_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        name: "small".into(),
        n_seen: 6,
        n_unseen: 4,
        feature_dim: 8,
        attribute_dim: 6,
        train_per_class: 12,
        test_seen_per_class: 5,
        unseen: Imbalance::Zipf {
            exponent: 1.0,
            total: 80,
        },
        attributes: AttributeScheme::Gaussian,
        noise: 1.0,
        separation: 3.0,
        prototype_jitter: 0.3,
        hardness: HardClasses::Fraction { fraction: 0.5 },
        hardness_strength: 0.5,
        hardness_anchor: HardnessAnchor::Unseen,
        seed,
    }
}

pub fn small(seed: u64) -> ZslDataset {
    generate_synthetic(&small_config(seed)).unwrap()
}

pub fn sths(policy: PolicyKind, prior: PriorSource, seed: u64) -> SthsConfig {
    SthsConfig {
        steps: 3,
        policy,
        k: 2,
        model: ModelSpec::Embedding(EmbeddingParams {
            lambda: 1.0,
            ..Default::default()
        }),
        prior,
        seed,
        keep_models: true,
    }
}
