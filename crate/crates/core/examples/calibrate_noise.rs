//! Noise calibration on a synthetic sensor: the first frame is the baseline,
//! and the threshold is the mean over the following frames of the largest
//! channel-averaged difference against it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tactile_slip::{DetectionConfig, Detector, Dims, SensorId, TactileFrame};

fn main() -> tactile_slip::Result<()> {
    let dims = Dims::new(32, 32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // sigma = 0 shows the fallback to one gray level.
    for sigma in [0.0, 0.005, 0.01, 0.02] {
        let config = DetectionConfig::default();
        let mut detector = Detector::new(SensorId::S1, config)?;
        let mut t = 0;
        let calibration = loop {
            let data = match Normal::new(0.0, sigma) {
                Ok(noise) if sigma > 0.0 => (0..dims.samples())
                    .map(|_| (0.5_f64 + noise.sample(&mut rng)).clamp(0.0, 1.0))
                    .collect(),
                _ => vec![0.5; dims.samples()],
            };
            let frame = TactileFrame::new(SensorId::S1, t, dims, data)?;
            t += 1;
            if let Some(cal) = detector.calibrate_step(&frame)? {
                break cal;
            }
        };
        println!(
            "sigma={sigma:<6} tau_n={:.5} over {} frames (raw mean {:.5})",
            calibration.tau_n, calibration.sample_count, calibration.raw_mean
        );
    }
    Ok(())
}
