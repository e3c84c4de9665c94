//! Gaussian message algebra: products in canonical form, correlation
//! integrals and moment matching of a mixture.

use mbf::gaussian::{
    from_canonical, gaussian_correlation, gaussian_product, moment_match_mixture, to_canonical, GaussianBelief,
    MixtureComponent,
};
use nalgebra::{dmatrix, dvector};

fn main() -> mbf::Result<()> {
    let a = GaussianBelief::new(dvector![0.0, 1.0], dmatrix![2.0, 0.3; 0.3, 1.0])?;
    let b = GaussianBelief::new(dvector![1.0, -1.0], dmatrix![1.0, 0.0; 0.0, 4.0])?;

    let product = from_canonical(&gaussian_product(&to_canonical(&a)?, &to_canonical(&b)?)?)?;
    println!("product mean {}", product.mean().transpose());
    println!("product cov {}", product.cov());
    println!("∫ N_a N_b dx = {:.6}", gaussian_correlation(&a, &b)?);

    // Two particles, each carrying a Gaussian over a 2-D linear block.
    let mix = vec![
        MixtureComponent { weight: 0.25, point: dvector![0.0], gauss: Some(a.clone()) },
        MixtureComponent { weight: 0.75, point: dvector![2.0], gauss: Some(b) },
    ];
    let matched = moment_match_mixture(&mix)?;
    println!("moment-matched mean {}", matched.mean().transpose());
    println!("moment-matched cov {}", matched.cov());
    Ok(())
}
