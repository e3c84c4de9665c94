//! Message computations shared by DBF, SDBF and MBFA.
//!
//! Filter F1 is a Gaussian filter, filter F2 a particle filter over `x^N`.
//! Messages follow the schedule: F1 measurement update (`m2`), then per
//! iteration the product `m3 = m2 · m4`, the particle weights from the
//! measurement (`w1`) and from the linear-block feedback (`w3`),
//! resampling, conditional prediction of the particles and the
//! pseudo-measurement message `m4` handed back to F1.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::conditional::innovation;
use crate::error::{Error, Result};
use crate::filters::{information_update, InformationPosterior};
use crate::gaussian::{block_marginal, log_gaussian_correlation, moment_match_mixture, GaussianBelief, MixtureComponent};
use crate::linalg::{self, Spd};
use crate::model::sample_gaussian;

/// F1's first filtered pdf and its linear-block marginal.
#[derive(Clone, Debug)]
pub struct Phase1 {
    pub post: InformationPosterior,
    pub linear: GaussianBelief,
}

/// Measurement update of F1 with the linearised model `y ≈ Hᵀ x + v`.
pub fn phase1(
    pred: &GaussianBelief,
    h: &DMatrix<f64>,
    v: &DVector<f64>,
    w_e: &DMatrix<f64>,
    y: &DVector<f64>,
    dim_l: usize,
) -> Result<Phase1> {
    let post = information_update(pred, h, v, w_e, y).map_err(Error::diverged)?;
    crate::filters::check_belief(&post.belief)?;
    let linear = block_marginal(&post.belief, 0..dim_l)?;
    Ok(Phase1 { post, linear })
}

/// `m3 = m2 · m4`. The first iteration and a flat `m4` return `m2`
/// unchanged; otherwise `C3 = W C4`, `η3 = W (C4 w2 + η4)` with
/// `W = (C4 W2 + I)⁻¹`, which stays defined for singular `C4`.
pub fn combine_with_pseudo(m2: &InformationPosterior, m4: Option<&GaussianBelief>, n: usize) -> Result<GaussianBelief> {
    let m4 = match m4 {
        Some(m4) if n > 1 => m4,
        _ => return Ok(m2.belief.clone()),
    };
    let d = m2.tmean.len();
    let c4 = m4.cov();
    let lhs = linalg::matmul(c4, &m2.prec) + DMatrix::identity(d, d);
    crate::complexity::counter::add({
        let d = d as f64;
        2.0 * d * d * d
    });
    let w = lhs.try_inverse().ok_or_else(|| Error::FilterDiverged("singular C4 W2 + I".into()))?;
    let cov = linalg::symmetrize(&linalg::matmul(&w, c4));
    let mean = linalg::matvec(&w, &linalg::add_vec(&linalg::matvec(c4, &m2.tmean), m4.mean()));
    let out = GaussianBelief::from_parts(mean, cov);
    crate::filters::check_belief(&out)?;
    Ok(out)
}

/// `log N(y; B η̃1 + g, B C̃1 Bᵀ + C_e)`
pub fn measurement_log_weight(
    b: &DMatrix<f64>,
    g: &DVector<f64>,
    lin1: &GaussianBelief,
    cov_e: &DMatrix<f64>,
    e_factor: &Spd,
    y: &DVector<f64>,
) -> Result<f64> {
    Ok(innovation(b, g, lin1, cov_e, Some(e_factor), y)?.log_likelihood())
}

/// Evaluates [`measurement_log_weight`] for many particles sharing one
/// linear belief, refactorising the innovation covariance only when `B`
/// changes between calls.
pub struct MeasurementWeigher<'a> {
    lin1: &'a GaussianBelief,
    cov_e: &'a DMatrix<f64>,
    e_factor: &'a Spd,
    y: &'a DVector<f64>,
    last: Option<(DMatrix<f64>, Spd)>,
}

impl<'a> MeasurementWeigher<'a> {
    pub fn new(lin1: &'a GaussianBelief, cov_e: &'a DMatrix<f64>, e_factor: &'a Spd, y: &'a DVector<f64>) -> Self {
        Self { lin1, cov_e, e_factor, y, last: None }
    }

    pub fn log_weight(&mut self, b: &DMatrix<f64>, g: &DVector<f64>) -> Result<f64> {
        let predicted = linalg::add_vec(&linalg::matvec(b, self.lin1.mean()), g);
        let residual = linalg::sub_vec(self.y, &predicted);
        let reuse = matches!(&self.last, Some((last_b, _)) if last_b == b);
        if !reuse {
            let inn = innovation(b, g, self.lin1, self.cov_e, Some(self.e_factor), self.y)?;
            self.last = Some((b.clone(), inn.factor));
        }
        let (_, factor) = self.last.as_ref().expect("factor cached above");
        Ok(factor.log_density(&residual))
    }
}

/// Statistics of the linear pseudo-measurement seen by one particle:
/// `η̌z = A^L (η̃3 − η̃2) + f^L`, `Čz = C_w^L + A^L (C̃3 − C̃2) A^Lᵀ`.
pub fn pseudo_measurement_stats(
    a_l: &DMatrix<f64>,
    f_l: &DVector<f64>,
    cov_w_l: &DMatrix<f64>,
    lin2: &GaussianBelief,
    lin3: &GaussianBelief,
) -> GaussianBelief {
    let d_eta = linalg::sub_vec(lin3.mean(), lin2.mean());
    let d_cov = linalg::sub(lin3.cov(), lin2.cov());
    GaussianBelief::from_parts(
        linalg::add_vec(&linalg::matvec(a_l, &d_eta), f_l),
        linalg::add(cov_w_l, &linalg::congruence(a_l, &d_cov)),
    )
}

/// `log ∫ N(z; η̌z, Čz) N(z; f^L, C_w^L) dz`
pub fn feedback_log_weight(
    a_l: &DMatrix<f64>,
    f_l: &DVector<f64>,
    cov_w_l: &DMatrix<f64>,
    lin2: &GaussianBelief,
    lin3: &GaussianBelief,
) -> Result<f64> {
    let z = pseudo_measurement_stats(a_l, f_l, cov_w_l, lin2, lin3);
    let prior = GaussianBelief::from_parts(f_l.clone(), cov_w_l.clone());
    log_gaussian_correlation(&z, &prior)
}

/// Draws `x^N_{k+1} ~ N(A^N η̃1 + f^N, A^N C̃1 A^Nᵀ + C_w^N)`.
pub fn sample_conditional_prediction<R: Rng + ?Sized>(
    a_n: &DMatrix<f64>,
    f_n: &DVector<f64>,
    cov_w_n: &DMatrix<f64>,
    lin1: &GaussianBelief,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let mean = linalg::add_vec(&linalg::matvec(a_n, lin1.mean()), f_n);
    let cov = linalg::add(&linalg::congruence(a_n, lin1.cov()), cov_w_n);
    let sqrt = match Spd::new(&cov) {
        Ok(f) => f.lower(),
        Err(_) => linalg::psd_sqrt(&cov)?,
    };
    Ok(sample_gaussian(&mean, &sqrt, rng))
}

/// Linear-block pseudo-posterior of one particle from
/// `z = x^N_{k+1} − f^N`: precision `A^Nᵀ W_w^N A^N` and transformed mean
/// `A^Nᵀ W_w^N z`. Returns `None` when the precision stays singular after
/// adding `reg · trace/D_L · I`.
pub fn linear_pseudo_posterior(
    a_n: &DMatrix<f64>,
    w_w_n: &DMatrix<f64>,
    z: &DVector<f64>,
    reg: f64,
) -> Option<GaussianBelief> {
    let aw = linalg::tr_matmul(a_n, w_w_n);
    let prec = linalg::symmetrize(&linalg::matmul(&aw, a_n));
    let tmean = linalg::matvec(&aw, z);
    let factor = Spd::new(&prec).ok().or_else(|| {
        let d = prec.nrows();
        let eps = reg * prec.trace() / d as f64;
        if eps > 0.0 {
            Spd::new(&(&prec + DMatrix::identity(d, d) * eps)).ok()
        } else {
            None
        }
    })?;
    let cov = factor.inverse();
    let mean = linalg::matvec(&cov, &tmean);
    Some(GaussianBelief::from_parts(mean, cov))
}

/// Moment-matches the equally weighted mixture of point masses at the
/// resampled particles, each paired with its linear pseudo-posterior.
/// A single flat linear block makes the whole message flat.
pub fn pseudo_measurement_message(
    particles: &[DVector<f64>],
    linear: Vec<Option<GaussianBelief>>,
) -> Result<Option<GaussianBelief>> {
    if linear.iter().any(Option::is_none) {
        return Ok(None);
    }
    let w = 1.0 / particles.len() as f64;
    let comps: Vec<MixtureComponent> = particles
        .iter()
        .zip(linear)
        .map(|(x, g)| MixtureComponent { weight: w, point: x.clone(), gauss: g })
        .collect();
    crate::complexity::counter::add({
        let n = comps.len() as f64;
        let d = comps[0].point.len() as f64 + comps[0].gauss.as_ref().map_or(0, GaussianBelief::dim) as f64;
        n * (2.0 * d * d + d)
    });
    moment_match_mixture(&comps).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::gaussian::{from_canonical, gaussian_product, to_canonical, CanonicalGaussian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_spd(d: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    }

    fn random_belief(d: usize, rng: &mut ChaCha12Rng) -> GaussianBelief {
        GaussianBelief::new(DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)), random_spd(d, rng)).unwrap()
    }

    fn posterior_of(g: &GaussianBelief) -> InformationPosterior {
        let c = to_canonical(g).unwrap();
        InformationPosterior { prec: c.prec().clone(), tmean: c.tmean().clone(), belief: g.clone() }
    }

    #[test]
    fn first_iteration_returns_m2() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let m2 = posterior_of(&random_belief(4, &mut rng));
        let m4 = random_belief(4, &mut rng);
        assert_eq!(combine_with_pseudo(&m2, Some(&m4), 1).unwrap(), m2.belief);
        assert_eq!(combine_with_pseudo(&m2, None, 3).unwrap(), m2.belief);
    }

    #[test]
    fn combination_matches_canonical_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..20 {
            let m2 = posterior_of(&random_belief(4, &mut rng));
            let m4 = random_belief(4, &mut rng);
            let direct = combine_with_pseudo(&m2, Some(&m4), 2).unwrap();
            let canon = gaussian_product(
                &CanonicalGaussian::from_parts(m2.prec.clone(), m2.tmean.clone()),
                &to_canonical(&m4).unwrap(),
            )
            .unwrap();
            let oracle = from_canonical(&canon).unwrap();
            assert_relative_eq!(direct.mean(), oracle.mean(), epsilon = 1e-9, max_relative = 1e-9);
            assert_relative_eq!(direct.cov(), oracle.cov(), epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn very_wide_pseudo_message_leaves_m2() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let m2 = posterior_of(&random_belief(3, &mut rng));
        let wide = GaussianBelief::isotropic(DVector::zeros(3), 1e14);
        let out = combine_with_pseudo(&m2, Some(&wide), 2).unwrap();
        assert_relative_eq!(out.mean(), m2.belief.mean(), epsilon = 1e-9);
        assert_relative_eq!(out.cov(), m2.belief.cov(), epsilon = 1e-9);
    }

    #[test]
    fn feedback_weight_matches_exponent_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..20 {
            let d = 2;
            let a_l = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let f_l = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let cw = random_spd(d, &mut rng);
            let lin2 = random_belief(d, &mut rng);
            let lin3 = GaussianBelief::from_parts(
                DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
                lin2.cov() * 0.9,
            );
            let lw = feedback_log_weight(&a_l, &f_l, &cw, &lin2, &lin3).unwrap();

            // canonical-form evaluation of the same correlation integral
            let z = pseudo_measurement_stats(&a_l, &f_l, &cw, &lin2, &lin3);
            if Spd::new(z.cov()).is_err() {
                continue;
            }
            let wz = z.cov().clone().try_inverse().unwrap();
            let ww = cw.clone().try_inverse().unwrap();
            let w3 = &wz + &ww;
            let t3 = &wz * z.mean() + &ww * &f_l;
            let quad = (t3.transpose() * w3.clone().try_inverse().unwrap() * &t3)[(0, 0)]
                - (z.mean().transpose() * &wz * z.mean())[(0, 0)]
                - (f_l.transpose() * &ww * &f_l)[(0, 0)];
            let log_norm = -(d as f64) / 2.0 * (2.0 * std::f64::consts::PI).ln()
                - 0.5 * z.cov().determinant().ln()
                - 0.5 * cw.determinant().ln()
                - 0.5 * w3.determinant().ln();
            let expo = log_norm + 0.5 * quad;
            assert_relative_eq!(lw.exp(), expo.exp(), max_relative = 1e-9);
        }
    }

    #[test]
    fn invertible_dynamics_recover_pseudo_state() {
        let a_n = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -0.3, 1.0]);
        let w = DMatrix::identity(2, 2) * 1e12;
        let z = DVector::from_vec(vec![1.0, -2.0]);
        let g = linear_pseudo_posterior(&a_n, &w, &z, 1e-9).unwrap();
        let exact = a_n.clone().try_inverse().unwrap() * &z;
        assert_relative_eq!(g.mean(), &exact, epsilon = 1e-9);
    }

    #[test]
    fn singular_dynamics_give_flat_message() {
        let a_n = DMatrix::zeros(2, 2);
        let w = DMatrix::identity(2, 2);
        assert!(linear_pseudo_posterior(&a_n, &w, &DVector::zeros(2), 1e-9).is_none());
        let parts = vec![DVector::zeros(2)];
        assert!(pseudo_measurement_message(&parts, vec![None]).unwrap().is_none());
    }

    #[test]
    fn single_particle_message_collapses() {
        let lin = GaussianBelief::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::identity(2, 2) * 0.3).unwrap();
        let x = DVector::from_vec(vec![5.0, 6.0]);
        let m4 = pseudo_measurement_message(&[x.clone()], vec![Some(lin.clone())]).unwrap().unwrap();
        assert_eq!(m4.mean().rows(2, 2), x.rows(0, 2));
        assert_relative_eq!(m4.cov().view((0, 0), (2, 2)).into_owned(), lin.cov().clone(), epsilon = 1e-15);
        assert_eq!(m4.cov().view((0, 2), (4, 2)).amax(), 0.0);
    }
}
