use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{LabeledDataset, Split};
use crate::matrix::Matrix;
use crate::rng::{substream, Purpose};

/// Two concentric square outlines centred at the origin. Points are drawn
/// uniformly along each perimeter and then jittered uniformly inside a band
/// of the given width (`±width/2` per coordinate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramesConfig {
    pub inner_side: f64,
    pub inner_band: f64,
    pub outer_side: f64,
    pub outer_band: f64,
}

impl Default for FramesConfig {
    fn default() -> Self {
        FramesConfig {
            inner_side: 2.0,
            inner_band: 0.1,
            outer_side: 4.0,
            outer_band: 0.2,
        }
    }
}

impl FramesConfig {
    pub fn generate(&self, per_class: usize, seed: u64, split: Split) -> LabeledDataset {
        let purpose = match split {
            Split::Train => Purpose::FramesTrain,
            Split::Test => Purpose::FramesTest,
        };
        let mut rows = Vec::with_capacity(2 * per_class);
        let mut labels = Vec::with_capacity(2 * per_class);
        for (class, side, band) in [
            (0u8, self.inner_side, self.inner_band),
            (1, self.outer_side, self.outer_band),
        ] {
            let mut rng = substream(seed, purpose, class as u64, 0);
            for _ in 0..per_class {
                rows.push(frame_point(&mut rng, side, band));
                labels.push(class);
            }
        }
        LabeledDataset {
            inputs: Matrix::from_rows(&rows),
            labels,
            split,
        }
    }
}

fn frame_point<R: Rng>(rng: &mut R, side: f64, band: f64) -> [f64; 2] {
    let half = side / 2.0;
    let s = rng.gen_range(0.0..4.0 * side);
    let edge = (s / side) as usize;
    let t = s - edge as f64 * side - half;
    let (x, y) = match edge.min(3) {
        0 => (t, -half),
        1 => (half, t),
        2 => (-t, half),
        _ => (-half, -t),
    };
    let jitter = Uniform::new_inclusive(-band / 2.0, band / 2.0);
    [x + jitter.sample(rng), y + jitter.sample(rng)]
}

/// Train and test picture frames. Test points come from an independent
/// stream of the same distribution.
pub fn gen_picture_frames(
    n_train_per_class: usize,
    n_test_per_class: usize,
    seed: u64,
) -> (LabeledDataset, LabeledDataset) {
    let cfg = FramesConfig::default();
    (
        cfg.generate(n_train_per_class, seed, Split::Train),
        cfg.generate(n_test_per_class, seed, Split::Test),
    )
}
