//! Shared inputs for the criterion benchmarks in `benches/`.

use linearvc::synth::generate;
use linearvc::{FeatureMatrix, SynthSpec};

/// `k` speakers of `n × d` synthetic features with a rank-`r` content space.
pub fn speakers(n: usize, d: usize, r: usize, k: usize) -> Vec<FeatureMatrix> {
    let spec = SynthSpec {
        n_frames: n,
        d,
        r_true: r,
        k_speakers: k,
        ..SynthSpec::default()
    };
    generate(&spec).expect("valid bench spec").0
}
