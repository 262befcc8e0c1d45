use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic square box `[0, L)²` sampled on an `n × n` lattice.
///
/// Samples are stored row-major with `x1` as the fast index: sample
/// `(i1, i2)` sits at `(i1·Δx, i2·Δx)` and lives at offset `i2·n + i1`.
/// Fourier coefficients use the same layout. The forward transform divides
/// by `n²`, so a coefficient is the mean of `f·e^{-iξ·x}` over the box and
/// the inverse transform is a plain sum.
///
/// Differentiation and every Fourier multiplier use the *resolved*
/// wavevector, whose component is zeroed on the Nyquist line. This keeps all
/// operators real-to-real; the Nyquist lines are removed by the dealiasing
/// mask anyway.
pub struct SpectralGrid {
    n: usize,
    box_length: f64,
    lattice: Vec<f64>,
    resolved: Vec<f64>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    kmag: Vec<f64>,
    dealias: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.box_length == other.box_length
    }
}

/// Signed integer lattice index for a 1-D FFT slot (Nyquist maps to `-n/2`).
fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl SpectralGrid {
    pub fn new(n_points: usize, box_length: f64) -> Result<Arc<Self>> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box_length must be positive and finite, got {box_length}"
            )));
        }
        let n = n_points;
        let scale = 2.0 * PI / box_length;
        let lattice: Vec<f64> = (0..n).map(|i| scale * signed_index(i, n) as f64).collect();
        let resolved: Vec<f64> = (0..n)
            .map(|i| if i == n / 2 { 0.0 } else { lattice[i] })
            .collect();
        // 2/3 rule: |m| < n/3 in integer lattice units.
        let keep: Vec<bool> = (0..n)
            .map(|i| 3 * signed_index(i, n).unsigned_abs() < n as u64)
            .collect();

        let len = n * n;
        let mut kx = Vec::with_capacity(len);
        let mut ky = Vec::with_capacity(len);
        let mut kmag = Vec::with_capacity(len);
        let mut dealias = Vec::with_capacity(len);
        for i2 in 0..n {
            for i1 in 0..n {
                let (x, y) = (resolved[i1], resolved[i2]);
                kx.push(x);
                ky.push(y);
                kmag.push(x.hypot(y));
                dealias.push(keep[i1] && keep[i2]);
            }
        }

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Arc::new(SpectralGrid {
            n,
            box_length,
            lattice,
            resolved,
            kx,
            ky,
            kmag,
            dealias,
            forward,
            inverse,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of samples (`n²`).
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn dx(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Quadrature weight of one sample, `Δx²`.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dx()
    }

    /// Box area `L²`; the Parseval factor for the declared normalization.
    pub fn area(&self) -> f64 {
        self.box_length * self.box_length
    }

    /// Lattice wavenumber of a 1-D slot, in `[-πn/L, πn/L)`.
    pub fn lattice_wavenumber(&self, i: usize) -> f64 {
        self.lattice[i]
    }

    /// Wavenumber used by derivatives and multipliers (Nyquist slot is zero).
    pub fn resolved_wavenumber(&self, i: usize) -> f64 {
        self.resolved[i]
    }

    /// Integer lattice indices `(m1, m2)` of a flat mode offset.
    pub fn mode_indices(&self, idx: usize) -> (i64, i64) {
        (
            signed_index(idx % self.n, self.n),
            signed_index(idx / self.n, self.n),
        )
    }

    /// Flat offset of the integer mode `(m1, m2)` (taken modulo `n`).
    pub fn mode_offset(&self, m1: i64, m2: i64) -> usize {
        let n = self.n as i64;
        (m2.rem_euclid(n) * n + m1.rem_euclid(n)) as usize
    }

    /// Flat offset of the mode `-ξ`.
    pub fn conjugate_offset(&self, idx: usize) -> usize {
        let n = self.n;
        let (i1, i2) = (idx % n, idx / n);
        ((n - i2) % n) * n + (n - i1) % n
    }

    /// Resolved wavevector components of every mode.
    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    /// `|ξ|` of the resolved wavevector of every mode.
    pub fn kmag(&self) -> &[f64] {
        &self.kmag
    }

    /// True where the mode survives the 2/3-rule dealiasing.
    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias
    }

    /// Whether a mode lies on a Nyquist line (unresolved).
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = self.n / 2;
        idx % self.n == half || idx / self.n == half
    }

    /// Smallest nonzero `|ξ|`, i.e. `2π/L`.
    pub fn min_wavenumber(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Largest resolved `|ξ|` on the lattice.
    pub fn max_wavenumber(&self) -> f64 {
        let m = (self.n / 2 - 1) as f64;
        self.min_wavenumber() * m * std::f64::consts::SQRT_2
    }

    /// Largest `|ξ|` admitted by the dealiasing mask.
    pub fn max_dealiased_wavenumber(&self) -> f64 {
        let m = ((self.n - 1) / 3) as f64;
        self.min_wavenumber() * m * std::f64::consts::SQRT_2
    }

    /// Sample coordinates `(x1, x2)` of a flat offset.
    pub fn coordinates(&self, idx: usize) -> (f64, f64) {
        let dx = self.dx();
        ((idx % self.n) as f64 * dx, (idx / self.n) as f64 * dx)
    }

    fn fft2(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        // Batches of rows share one scratch allocation inside rustfft.
        let batch = n * ROWS_PER_BATCH.min(n);
        data.par_chunks_mut(batch).for_each(|rows| plan.process(rows));
        transpose_in_place(data, n);
        data.par_chunks_mut(batch).for_each(|rows| plan.process(rows));
        transpose_in_place(data, n);
    }

    /// Forward transform of real samples (divides by `n²`).
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.len());
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut data, &self.forward);
        let norm = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= norm);
        data
    }

    /// Inverse transform; returns the real part of the synthesized samples.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.len());
        let mut data = coeffs.to_vec();
        self.fft2(&mut data, &self.inverse);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Forward transforms of two real fields with one complex transform.
    pub fn forward_pair(&self, f: &[f64], g: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        let mut data: Vec<Complex64> = f
            .iter()
            .zip(g)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.fft2(&mut data, &self.forward);
        let norm = 0.5 / self.len() as f64;
        let len = self.len();
        let mut fh = vec![Complex64::new(0.0, 0.0); len];
        let mut gh = vec![Complex64::new(0.0, 0.0); len];
        for idx in 0..len {
            let z = data[idx];
            let zc = data[self.conjugate_offset(idx)].conj();
            fh[idx] = (z + zc) * norm;
            // (z - zc) / (2i)
            let w = (z - zc) * norm;
            gh[idx] = Complex64::new(w.im, -w.re);
        }
        (fh, gh)
    }

    /// Inverse transforms of two Hermitian spectra with one complex transform.
    pub fn inverse_pair(&self, f: &[Complex64], g: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        let i = Complex64::new(0.0, 1.0);
        let mut data: Vec<Complex64> = f.iter().zip(g).map(|(&a, &b)| a + i * b).collect();
        self.fft2(&mut data, &self.inverse);
        data.into_iter().map(|c| (c.re, c.im)).unzip()
    }
}

const ROWS_PER_BATCH: usize = 16;
const TILE: usize = 16;

/// Square in-place transpose, tile by tile.
fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for r0 in (0..n).step_by(TILE) {
        for c0 in (r0..n).step_by(TILE) {
            for r in r0..(r0 + TILE).min(n) {
                let c_start = if c0 == r0 { r + 1 } else { c0 };
                for c in c_start..(c0 + TILE).min(n) {
                    data.swap(r * n + c, c * n + r);
                }
            }
        }
    }
}
