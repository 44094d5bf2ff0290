//! Gaussian fits of feature populations and the Fréchet distance between them.
//!
//! `d² = ‖μp − μq‖² + Tr(Σp) + Tr(Σq) − 2 Tr((Σp Σq)^½)`
//!
//! The trace of the product square root is taken from the eigenvalues of
//! `Σp^½ Σq Σp^½`, which is symmetric positive semidefinite and shares its
//! spectrum with `Σp Σq`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::FidelityError;

/// Added to both covariance diagonals when the product has a clearly negative eigenvalue.
pub const JITTER: f64 = 1e-6;
/// Eigenvalues below `-NEG_TOLERANCE * max(1, λmax)` count as non-PSD.
pub const NEG_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePopulation {
    features: Option<DMatrix<f64>>,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    count: usize,
}

impl FeaturePopulation {
    /// Fits mean and unbiased covariance to `m × f` row-major features.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, FidelityError> {
        let m = rows.len();
        if m < 2 {
            return Err(FidelityError::TooFewSamples { count: m });
        }
        let f = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != f) {
            return Err(FidelityError::DimensionMismatch { left: f, right: bad.len() });
        }
        let x = DMatrix::from_fn(m, f, |i, j| rows[i][j]);
        let mean = DVector::from_fn(f, |j, _| x.column(j).sum() / m as f64);
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = centered.transpose() * &centered / (m as f64 - 1.0);
        let covariance = (&cov + cov.transpose()) * 0.5;
        Ok(Self { features: Some(x), mean, covariance, count: m })
    }

    /// A population given directly by its moments.
    pub fn from_moments(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self, FidelityError> {
        let f = mean.len();
        if covariance.nrows() != f || covariance.ncols() != f {
            return Err(FidelityError::DimensionMismatch { left: f, right: covariance.nrows() });
        }
        let asym = (&covariance - covariance.transpose()).abs().max();
        if asym > 1e-10 {
            return Err(FidelityError::NotSymmetric { deviation: asym });
        }
        Ok(Self { features: None, mean: DVector::from_vec(mean), covariance, count: 0 })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of fitted rows; 0 for populations built from moments.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn features(&self) -> Option<&DMatrix<f64>> {
        self.features.as_ref()
    }
}

/// Square root of a symmetric PSD matrix; tiny negative eigenvalues are clamped.
fn sqrt_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

fn product_spectrum(sp: &DMatrix<f64>, sq: &DMatrix<f64>) -> DVector<f64> {
    let root = sqrt_psd(sp);
    let m = &root * sq * &root;
    let m = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(m).eigenvalues
}

fn worst_negative(eigs: &DVector<f64>) -> Option<f64> {
    let scale = eigs.iter().fold(1.0f64, |acc, l| acc.max(l.abs()));
    let min = eigs.min();
    (min < -NEG_TOLERANCE * scale).then_some(min)
}

/// `Tr((Σp Σq)^½)`, retrying once with diagonal jitter if needed.
pub fn trace_sqrt_product(sp: &DMatrix<f64>, sq: &DMatrix<f64>) -> Result<f64, FidelityError> {
    let mut eigs = product_spectrum(sp, sq);
    if worst_negative(&eigs).is_some() {
        let eye = DMatrix::<f64>::identity(sp.nrows(), sp.ncols()) * JITTER;
        eigs = product_spectrum(&(sp + &eye), &(sq + &eye));
        if let Some(min) = worst_negative(&eigs) {
            return Err(FidelityError::NotPsd { eigenvalue: min });
        }
    }
    Ok(eigs.iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// Fréchet distance between two Gaussian fits, clamped at zero.
pub fn frechet_distance(p: &FeaturePopulation, q: &FeaturePopulation) -> Result<f64, FidelityError> {
    if p.dim() != q.dim() {
        return Err(FidelityError::DimensionMismatch { left: p.dim(), right: q.dim() });
    }
    let diff = (&p.mean - &q.mean).norm_squared();
    let tr = p.covariance.trace() + q.covariance.trace() - 2.0 * trace_sqrt_product(&p.covariance, &q.covariance)?;
    Ok((diff + tr).max(0.0))
}
