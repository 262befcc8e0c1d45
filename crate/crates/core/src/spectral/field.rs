use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::SpectralGrid;
use crate::error::{Error, Result};

/// Real samples of a scalar on a [`SpectralGrid`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<SpectralGrid>,
    values: Vec<f64>,
}

/// Fourier coefficients of a real scalar (Hermitian symmetric).
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<SpectralGrid>,
    coeffs: Vec<Complex64>,
}

/// Planar vector field `(u1, u2)`; both components share one grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    x: ScalarField,
    y: ScalarField,
}

/// Fourier coefficients of a [`VectorField`].
#[derive(Debug, Clone)]
pub struct VectorSpectrum {
    pub x: Spectrum,
    pub y: Spectrum,
}

pub(crate) fn same_grid(a: &Arc<SpectralGrid>, b: &Arc<SpectralGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

impl ScalarField {
    pub fn new(grid: Arc<SpectralGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<SpectralGrid>, value: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x1, x2)` at every grid point.
    pub fn from_fn(grid: &Arc<SpectralGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.coordinates(idx);
                f(x, y)
            })
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self.grid.forward(&self.values),
        }
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// `∫ f dx` by the lattice rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Discrete `L²` norm, `(Σ f² Δx²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    /// Discrete `L^p` norm; `p = ∞` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.grid.cell_area())
            .powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Discrete `L²` inner product.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_area())
    }

    /// Field with the mean removed.
    pub fn mean_free(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Translate by whole grid cells (periodic).
    pub fn shifted(&self, s1: usize, s2: usize) -> Self {
        let n = self.grid.n();
        let mut values = vec![0.0; self.values.len()];
        for i2 in 0..n {
            for i1 in 0..n {
                values[((i2 + s2) % n) * n + (i1 + s1) % n] = self.values[i2 * n + i1];
            }
        }
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }
}

impl Spectrum {
    pub fn new(grid: Arc<SpectralGrid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Spectrum { grid, coeffs })
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Spectrum {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.grid.inverse(&self.coeffs),
        }
    }

    pub fn zero_mode(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Multiply every coefficient by a real per-mode factor.
    pub fn map_modes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(idx, &c)| f(idx, c))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_modes(|_, c| c * s)
    }

    /// Linear combination `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Spectrum) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Spectrum {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| a + b * s)
                .collect(),
        })
    }

    /// `L²` norm through Parseval: `L·(Σ|f̂|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.area()).sqrt()
    }

    /// `L²` inner product through Parseval.
    pub fn inner(&self, other: &Spectrum) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum::<f64>()
            * self.grid.area())
    }

    /// Largest deviation from `f̂(-ξ) = conj f̂(ξ)`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|idx| {
                let c = self.grid.conjugate_offset(idx);
                (self.coeffs[idx] - self.coeffs[c].conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        same_grid(&x.grid, &y.grid)?;
        Ok(VectorField { x, y })
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        VectorField {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn x(&self) -> &ScalarField {
        &self.x
    }

    pub fn y(&self) -> &ScalarField {
        &self.y
    }

    pub fn components_mut(&mut self) -> (&mut ScalarField, &mut ScalarField) {
        (&mut self.x, &mut self.y)
    }

    pub fn into_components(self) -> (ScalarField, ScalarField) {
        (self.x, self.y)
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.x.grid
    }

    pub fn spectrum(&self) -> VectorSpectrum {
        let (x, y) = self.x.grid.forward_pair(&self.x.values, &self.y.values);
        VectorSpectrum {
            x: Spectrum {
                grid: self.x.grid.clone(),
                coeffs: x,
            },
            y: Spectrum {
                grid: self.x.grid.clone(),
                coeffs: y,
            },
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.x.l2_norm().hypot(self.y.l2_norm())
    }

    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        Ok(self.x.inner(&other.x)? + self.y.inner(&other.y)?)
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        VectorField::new(self.x.add(&other.x)?, self.y.add(&other.y)?)
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        VectorField::new(self.x.sub(&other.x)?, self.y.sub(&other.y)?)
    }

    pub fn scaled(&self, s: f64) -> Self {
        VectorField {
            x: self.x.scaled(s),
            y: self.y.scaled(s),
        }
    }

    /// Largest pointwise Euclidean magnitude.
    pub fn max_magnitude(&self) -> f64 {
        self.x
            .values
            .iter()
            .zip(&self.y.values)
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    pub fn all_finite(&self) -> bool {
        self.x.all_finite() && self.y.all_finite()
    }

    pub fn shifted(&self, s1: usize, s2: usize) -> Self {
        VectorField {
            x: self.x.shifted(s1, s2),
            y: self.y.shifted(s1, s2),
        }
    }
}

impl VectorSpectrum {
    pub fn new(x: Spectrum, y: Spectrum) -> Result<Self> {
        same_grid(&x.grid, &y.grid)?;
        Ok(VectorSpectrum { x, y })
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        VectorSpectrum {
            x: Spectrum::zeros(grid),
            y: Spectrum::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.x.grid
    }

    pub fn to_field(&self) -> VectorField {
        let grid = self.x.grid.clone();
        let (x, y) = grid.inverse_pair(&self.x.coeffs, &self.y.coeffs);
        VectorField {
            x: ScalarField {
                grid: grid.clone(),
                values: x,
            },
            y: ScalarField { grid, values: y },
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.x.l2_norm().hypot(self.y.l2_norm())
    }

    pub fn axpy(&self, s: f64, other: &VectorSpectrum) -> Result<Self> {
        Ok(VectorSpectrum {
            x: self.x.axpy(s, &other.x)?,
            y: self.y.axpy(s, &other.y)?,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        VectorSpectrum {
            x: self.x.scaled(s),
            y: self.y.scaled(s),
        }
    }
}

/// Random Hermitian spectrum with Gaussian coefficients on `|m1|, |m2| <= max_index`.
///
/// The zero mode is left empty and Nyquist lines are never populated, so
/// the result is mean-free and band-limited.
pub fn random_spectrum(grid: &Arc<SpectralGrid>, rng: &mut impl Rng, max_index: usize) -> Spectrum {
    let limit = (max_index as i64).min(grid.n() as i64 / 2 - 1);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    for m2 in -limit..=limit {
        for m1 in -limit..=limit {
            // Canonical half of each ±ξ pair.
            if (m2, m1) <= (0, 0) {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let c = Complex64::new(re, im);
            coeffs[grid.mode_offset(m1, m2)] = c;
            coeffs[grid.mode_offset(-m1, -m2)] = c.conj();
        }
    }
    Spectrum {
        grid: grid.clone(),
        coeffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_and_parseval() {
        let grid = SpectralGrid::new(32, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let values: Vec<f64> = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
            let f = ScalarField::new(grid.clone(), values).unwrap();
            let s = f.spectrum();
            assert!(s.hermitian_defect() < 1e-14);
            let back = s.to_field();
            let err = back.sub(&f).unwrap().l2_norm() / f.l2_norm();
            assert!(err < 1e-12, "round trip {err}");
            let rel = (s.l2_norm() - f.l2_norm()).abs() / f.l2_norm();
            assert!(rel < 1e-12, "parseval {rel}");
        }
    }

    #[test]
    fn random_spectrum_is_real_and_mean_free() {
        let grid = SpectralGrid::new(16, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_spectrum(&grid, &mut rng, 5);
        assert_eq!(s.hermitian_defect(), 0.0);
        assert_eq!(s.zero_mode().norm(), 0.0);
        for idx in 0..grid.len() {
            if grid.is_nyquist(idx) {
                assert_eq!(s.coeffs()[idx].norm(), 0.0);
            }
        }
    }

    #[test]
    fn shift_preserves_norm() {
        let grid = SpectralGrid::new(8, 1.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x, y| (x * 3.0).sin() + y);
        let g = f.shifted(3, 5);
        assert!((f.l2_norm() - g.l2_norm()).abs() < 1e-14);
        assert_eq!(g.values()[5 * 8 + 3], f.values()[0]);
    }
}
