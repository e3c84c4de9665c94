//! Particle weights, effective sample size and systematic resampling.

use mbf::particle::{effective_sample_size, normalize_log_weights, systematic_indices, weighted_mean, ParticleBelief};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> mbf::Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let points: Vec<DVector<f64>> = (0..8).map(|i| DVector::from_element(1, i as f64)).collect();

    // Log-domain weights survive likelihoods far below f64's range.
    let log_w: Vec<f64> = points.iter().map(|x| -1000.0 - 0.5 * (x[0] - 5.0).powi(2)).collect();
    let w = normalize_log_weights(&log_w)?;
    println!("weights {:.4?}", w);
    println!("ESS {:.2} of {}", effective_sample_size(&w), w.len());
    println!("weighted mean {:.4}", weighted_mean(&points, &w)[0]);

    let idx = systematic_indices(&w, 8, &mut rng);
    println!("systematic draw {idx:?}");

    let belief = ParticleBelief::new(points, w)?;
    let resampled = belief.systematic_resample(&mut rng);
    println!("resampled {} particles with uniform weights", resampled.len());
    Ok(())
}
