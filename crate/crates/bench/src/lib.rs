//! Shared fixtures for the benchmarks.

use cawe::{AcousticFeatureSequence, Matrix, ModelConfig, ModelParams, Rng, Transcript};

/// Desk-scale model (16-dim input, 38 words) with a random 60-frame
/// utterance and a 6-word transcript.
pub fn desk_fixture() -> (ModelParams, AcousticFeatureSequence, Transcript) {
    let params = ModelParams::init(ModelConfig::desk(16, 38), 1).expect("valid config");
    let mut rng = Rng::new(2);
    let data = (0..60 * 16).map(|_| rng.gaussian()).collect();
    let features = AcousticFeatureSequence {
        utterance_id: 0,
        frames: Matrix::from_vec(60, 16, data).expect("shape"),
    };
    let transcript = Transcript::new((0..6).map(|_| rng.range_inclusive(3, 37)).collect());
    (params, features, transcript)
}

pub fn gaussian_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    (0..n).map(|_| rng.gaussian()).collect()
}
