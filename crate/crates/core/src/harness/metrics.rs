use nalgebra::DVector;

use crate::error::{Error, Result};

/// `sqrt(mean_k mean_g ‖x_k[g] − x̂_k[g]‖²)` where each group `g` lists the
/// coordinates of one target's block.
pub fn rmse(truth: &[DVector<f64>], estimates: &[DVector<f64>], groups: &[Vec<usize>]) -> Result<f64> {
    if truth.len() != estimates.len() {
        return Err(Error::LengthMismatch { left: truth.len(), right: estimates.len() });
    }
    if truth.is_empty() || groups.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    let mut acc = 0.0;
    for (x, e) in truth.iter().zip(estimates) {
        if x.len() != e.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: e.len() });
        }
        for g in groups {
            acc += g.iter().map(|&i| (x[i] - e[i]).powi(2)).sum::<f64>();
        }
    }
    Ok((acc / (truth.len() * groups.len()) as f64).sqrt())
}

/// Whether some target's position error stays above `threshold` for
/// `window` consecutive steps.
pub fn lost_track(
    truth: &[DVector<f64>],
    estimates: &[DVector<f64>],
    positions: &[[usize; 2]],
    threshold: f64,
    window: usize,
) -> bool {
    positions.iter().any(|&[a, b]| {
        let mut run = 0;
        truth.iter().zip(estimates).any(|(x, e)| {
            let err = ((x[a] - e[a]).powi(2) + (x[b] - e[b]).powi(2)).sqrt();
            run = if err <= threshold { 0 } else { run + 1 };
            run >= window
        })
    })
}

/// Fraction of flagged runs.
pub fn divergence_probability(flags: impl IntoIterator<Item = bool>) -> Result<f64> {
    let (mut n, mut d) = (0usize, 0usize);
    for f in flags {
        n += 1;
        d += f as usize;
    }
    if n == 0 {
        return Err(Error::EmptyRecordSet);
    }
    Ok(d as f64 / n as f64)
}

/// Standard error of a binomial proportion estimated from `n` runs.
pub fn binomial_std_error(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn perfect_estimates_have_zero_error() {
        let t = vec![v(&[1.0, 2.0]), v(&[3.0, 4.0])];
        assert_eq!(rmse(&t, &t, &[vec![0, 1]]).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset() {
        let t = vec![v(&[0.0, 0.0]); 5];
        let e = vec![v(&[1.0, 1.0]); 5];
        assert!((rmse(&t, &e, &[vec![0, 1]]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_step_is_euclidean_error() {
        let t = vec![v(&[0.0, 0.0, 9.0])];
        let e = vec![v(&[3.0, 4.0, 0.0])];
        assert_eq!(rmse(&t, &e, &[vec![0, 1]]).unwrap(), 5.0);
    }

    #[test]
    fn targets_are_averaged() {
        let t = vec![v(&[0.0, 0.0])];
        let e = vec![v(&[2.0, 0.0])];
        assert_eq!(rmse(&t, &e, &[vec![0], vec![1]]).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(rmse(&[v(&[0.0])], &[], &[vec![0]]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn divergence_counts() {
        assert_eq!(divergence_probability([false; 4]).unwrap(), 0.0);
        assert_eq!(divergence_probability([true; 4]).unwrap(), 1.0);
        let flags = (0..10).map(|i| i < 2);
        assert_eq!(divergence_probability(flags).unwrap(), 0.2);
        assert!(matches!(divergence_probability([]), Err(Error::EmptyRecordSet)));
    }

    #[test]
    fn lost_track_needs_consecutive_steps() {
        let t = vec![v(&[0.0, 0.0]); 30];
        let mut e = t.clone();
        for (k, x) in e.iter_mut().enumerate() {
            if k % 10 < 9 {
                x[0] = 200.0;
            }
        }
        assert!(!lost_track(&t, &e, &[[0, 1]], 100.0, 10));
        assert!(lost_track(&t, &e, &[[0, 1]], 100.0, 9));
        e[9][1] = f64::NAN;
        assert!(lost_track(&t, &e, &[[0, 1]], 100.0, 10));
    }
}
