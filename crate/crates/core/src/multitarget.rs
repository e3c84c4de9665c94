//! Models made of `N` independent targets observed through one joint
//! measurement.
//!
//! The joint state groups blocks by kind: `[x^L_1, …, x^L_N, x^N_1, …, x^N_N]`,
//! so the joint model is itself a CLG model with the usual `[x^L; x^N]` layout.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{sample_gaussian, stack, ClgModel, ClgSystem};

#[derive(Clone, Debug)]
pub struct MultiTargetModel {
    targets: usize,
    template: ClgModel,
    target_cov: DMatrix<f64>,
    target_sqrt: DMatrix<f64>,
    joint: ClgSystem,
}

impl MultiTargetModel {
    /// `template` describes one target's dynamics (its measurement pieces
    /// describe that target observed alone); `target_cov` is the exact
    /// per-target process covariance in `[x^L; x^N]` order.
    pub fn new(template: ClgModel, target_cov: DMatrix<f64>, targets: usize, joint: ClgSystem) -> Result<Self> {
        if targets == 0 {
            return Err(Error::InvalidParameter("at least one target is required".into()));
        }
        template.validate()?;
        linalg::check_covariance(&target_cov)?;
        if target_cov.nrows() != template.dim() {
            return Err(Error::DimensionMismatch { expected: template.dim(), found: target_cov.nrows() });
        }
        if joint.clg.dim_l != targets * template.dim_l || joint.clg.dim_n != targets * template.dim_n {
            return Err(Error::DimensionMismatch { expected: targets * template.dim(), found: joint.clg.dim() });
        }
        let target_sqrt = linalg::psd_sqrt(&target_cov)?;
        Ok(Self { targets, template, target_cov, target_sqrt, joint })
    }

    /// Wraps a single-target system.
    pub fn single(system: ClgSystem) -> Result<Self> {
        let cov = system.general.cov_w().clone();
        Self::new(system.clg.clone(), cov, 1, system)
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn template(&self) -> &ClgModel {
        &self.template
    }

    pub fn target_cov(&self) -> &DMatrix<f64> {
        &self.target_cov
    }

    pub fn joint(&self) -> &ClgSystem {
        &self.joint
    }

    pub fn dim(&self) -> usize {
        self.joint.clg.dim()
    }

    /// Position of target `i`'s linear block in the joint vector.
    pub fn linear_range(&self, i: usize) -> Range<usize> {
        let dl = self.template.dim_l;
        i * dl..(i + 1) * dl
    }

    /// Position of target `i`'s nonlinear block in the joint vector.
    pub fn nonlinear_range(&self, i: usize) -> Range<usize> {
        let dn = self.template.dim_n;
        let off = self.targets * self.template.dim_l;
        off + i * dn..off + (i + 1) * dn
    }

    /// `[x^L_i; x^N_i]` extracted from a joint state.
    pub fn target_state(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        let l = self.linear_range(i);
        let n = self.nonlinear_range(i);
        stack(&x.rows(l.start, l.len()).into_owned(), &x.rows(n.start, n.len()).into_owned())
    }

    /// Joint state from per-target `[x^L_i; x^N_i]` vectors.
    pub fn assemble(&self, per_target: &[DVector<f64>]) -> DVector<f64> {
        let dl = self.template.dim_l;
        let dn = self.template.dim_n;
        let mut x = DVector::zeros(self.dim());
        for (i, t) in per_target.iter().enumerate() {
            x.rows_mut(i * dl, dl).copy_from(&t.rows(0, dl));
            let n = self.nonlinear_range(i);
            x.rows_mut(n.start, dn).copy_from(&t.rows(dl, dn));
        }
        x
    }

    /// Joint nonlinear block from per-target nonlinear blocks.
    pub fn assemble_nonlinear(&self, blocks: &[&DVector<f64>]) -> DVector<f64> {
        let dn = self.template.dim_n;
        let mut x = DVector::zeros(self.targets * dn);
        for (i, b) in blocks.iter().enumerate() {
            x.rows_mut(i * dn, dn).copy_from(b);
        }
        x
    }

    /// One noisy step of a single target with the exact (possibly
    /// correlated) per-target noise.
    pub fn sample_target_transition<R: Rng + ?Sized>(&self, k: usize, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        sample_gaussian(&self.template.transition(k, x), &self.target_sqrt, rng)
    }
}
