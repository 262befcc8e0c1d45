//! Exact mode-wise solutions of the system linearized at the equilibrium.
//!
//! Per wavevector `ξ ≠ 0`, with `d̂ = iξ·û/|ξ|`:
//!
//! ```text
//! ∂ₜâ = -|ξ|d̂
//! ∂ₜd̂ = |ξ|(P'(1)â + b̂) - ν|ξ|²d̂
//! ∂ₜb̂ = -|ξ|d̂
//! ```
//!
//! and the solenoidal part of `û` decays at rate `μ|ξ|²`. In terms of the
//! linearized `φ̂ = P'(1)â + b̂` the acoustic pair is
//! `∂ₜ(φ̂, d̂) = [[0, -(P'(1)+1)|ξ|], [|ξ|, -ν|ξ|²]](φ̂, d̂)`.

use std::collections::HashMap;

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{ScalarField, VectorField};
use crate::state::{PerturbationState, PhysicalParams};

/// Symbols of the linearized operator at one wavenumber magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSymbol {
    pub xi_mag: f64,
    /// Acts on `(φ̂, d̂)`.
    pub mat2: Matrix2<f64>,
    /// Acts on `(â, d̂, b̂)`.
    pub mat3: Matrix3<f64>,
    /// `-μ|ξ|²`.
    pub heat_rate: f64,
}

impl ModeSymbol {
    pub fn new(xi_mag: f64, params: &PhysicalParams) -> Result<Self> {
        if !(xi_mag > 0.0 && xi_mag.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "|xi| must be positive and finite, got {xi_mag}"
            )));
        }
        let k = xi_mag;
        let nu = params.nu();
        let slope = params.pressure_slope();
        #[rustfmt::skip]
        let mat3 = Matrix3::new(
            0.0,       -k,           0.0,
            slope * k, -nu * k * k,  k,
            0.0,       -k,           0.0,
        );
        #[rustfmt::skip]
        let mat2 = Matrix2::new(
            0.0, -params.acoustic_stiffness() * k,
            k,   -nu * k * k,
        );
        Ok(ModeSymbol {
            xi_mag,
            mat2,
            mat3,
            heat_rate: -params.mu * k * k,
        })
    }

    /// `exp(t·mat3)`.
    pub fn propagator3(&self, t: f64) -> Matrix3<f64> {
        (self.mat3 * t).exp()
    }

    /// `exp(t·mat2)`.
    pub fn propagator2(&self, t: f64) -> Matrix2<f64> {
        (self.mat2 * t).exp()
    }
}

/// Roots of `λ² + ν|ξ|²λ + (P'(1)+1)|ξ|² = 0`, slow root (larger real part)
/// first.
pub fn acoustic_eigenvalues(xi_mag: f64, params: &PhysicalParams) -> Result<(Complex64, Complex64)> {
    if !(xi_mag > 0.0 && xi_mag.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "|xi| must be positive and finite, got {xi_mag}"
        )));
    }
    let k2 = xi_mag * xi_mag;
    let b = params.nu() * k2;
    let c = params.acoustic_stiffness() * k2;
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        // Avoid cancellation in the slow root.
        let fast = -0.5 * (b + disc.sqrt());
        let slow = c / fast;
        Ok((Complex64::new(slow, 0.0), Complex64::new(fast, 0.0)))
    } else {
        let im = 0.5 * (-disc).sqrt();
        Ok((Complex64::new(-0.5 * b, im), Complex64::new(-0.5 * b, -im)))
    }
}

/// `exp(t·mat)` for a square matrix of dimension at most 4 (Padé
/// scaling-and-squaring).
pub fn matrix_exponential(mat: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !mat.is_square() || mat.nrows() == 0 || mat.nrows() > 4 {
        return Err(Error::InvalidParameter(format!(
            "matrix exponential needs a square matrix of dimension 1..=4, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    if !t.is_finite() || mat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite matrix exponential input".into()));
    }
    Ok((mat * t).exp())
}

/// Exact solution of the linearized system at time `state0.t + t`.
///
/// Zero modes (and modes whose resolved wavevector vanishes) are frozen.
pub fn evolve_linear_exact(state0: &PerturbationState, t: f64, params: &PhysicalParams) -> Result<PerturbationState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be finite and >= 0, got {t}")));
    }
    params.validate()?;
    let grid = state0.grid().clone();
    let (mut a, mut b) = grid.forward_pair(state0.a.values(), state0.b.values());
    let (mut ux, mut uy) = grid.forward_pair(state0.u.x().values(), state0.u.y().values());
    let unit = grid.min_wavenumber();
    let mut cache: HashMap<u64, (Matrix3<f64>, f64)> = HashMap::new();
    let i = Complex64::new(0.0, 1.0);

    for idx in 0..grid.len() {
        let (k1, k2) = (grid.kx()[idx], grid.ky()[idx]);
        let k = grid.kmag()[idx];
        if k == 0.0 {
            continue;
        }
        let key = ((k / unit).powi(2)).round() as u64;
        let (prop, heat) = *cache.entry(key).or_insert_with(|| {
            let sym = ModeSymbol::new(k, params).expect("positive wavenumber");
            (sym.propagator3(t), (sym.heat_rate * t).exp())
        });

        let kdotu = k1 * ux[idx] + k2 * uy[idx];
        let (qx, qy) = (kdotu * k1 / (k * k), kdotu * k2 / (k * k));
        let (px, py) = (ux[idx] - qx, uy[idx] - qy);
        let d = i * kdotu / k;

        let v = [a[idx], d, b[idx]];
        let apply = |row: usize| -> Complex64 { (0..3).map(|c| v[c] * prop[(row, c)]).sum() };
        let (na, nd, nb) = (apply(0), apply(1), apply(2));

        a[idx] = na;
        b[idx] = nb;
        // Qu = -iξ/|ξ| d
        ux[idx] = heat * px - i * k1 / k * nd;
        uy[idx] = heat * py - i * k2 / k * nd;
    }

    let (a, b) = grid.inverse_pair(&a, &b);
    let (ux, uy) = grid.inverse_pair(&ux, &uy);
    let f = |v| ScalarField::new(grid.clone(), v).expect("length matches grid");
    PerturbationState::new(f(a), VectorField::new(f(ux), f(uy))?, f(b), state0.t + t)
}

/// Applies `exp(t·mat3)` to a single mode `(â, d̂, b̂)`.
pub fn evolve_mode(symbol: &ModeSymbol, state: Vector3<f64>, t: f64) -> Vector3<f64> {
    symbol.propagator3(t) * state
}
