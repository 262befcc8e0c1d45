//! Evolved perturbation unknowns and the auxiliary unknowns built from them.
//!
//! The state is `(a, u, b)` with `a = ρ - 1`, `b = m - 1` around the
//! equilibrium `ρ = 1, u = 0, m = 1`. The derived fields are the good
//! unknown `φ = P(1+a) + ½(1+b)² - (A + ½)`, the compressible scalar
//! `d = Λ⁻¹div u`, the effective velocity `G = Qu - ½Δ⁻¹∇φ`, the transport
//! unknown `δ = φ - 3a` and the rational factor `I(a) = a/(1+a)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::ops::helmholtz_spectrum;
use crate::spectral::{ScalarField, SpectralGrid, Spectrum, VectorField, VectorSpectrum};

/// Bound on `sup|a|` defining the small-perturbation regime.
pub const SMALL_A_BOUND: f64 = 0.5;

/// Viscosities and pressure law `P(ρ) = Aρ^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub mu: f64,
    pub lambda: f64,
    pub pressure_a: f64,
    pub gamma: f64,
}

impl Default for PhysicalParams {
    /// `μ = 1, λ = 0, A = 1, γ = 2`, so `ν = λ + 2μ = 2`.
    fn default() -> Self {
        PhysicalParams {
            mu: 1.0,
            lambda: 0.0,
            pressure_a: 1.0,
            gamma: 2.0,
        }
    }
}

impl PhysicalParams {
    pub fn new(mu: f64, lambda: f64, pressure_a: f64, gamma: f64) -> Result<Self> {
        let p = PhysicalParams {
            mu,
            lambda,
            pressure_a,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.nu() > 0.0) {
            return bad(format!("lambda + 2 mu must be positive, got {}", self.nu()));
        }
        if !(self.pressure_a > 0.0) {
            return bad(format!("A must be positive, got {}", self.pressure_a));
        }
        if !(self.gamma >= 1.0) {
            return bad(format!("gamma must be >= 1, got {}", self.gamma));
        }
        Ok(())
    }

    /// Bulk (potential-part) viscosity `ν = λ + 2μ`.
    pub fn nu(&self) -> f64 {
        self.lambda + 2.0 * self.mu
    }

    /// `P'(1) = Aγ`, the linearized pressure slope.
    pub fn pressure_slope(&self) -> f64 {
        self.pressure_a * self.gamma
    }

    /// `P'(1) + 1`, the linear acoustic stiffness (3 with the defaults).
    pub fn acoustic_stiffness(&self) -> f64 {
        self.pressure_slope() + 1.0
    }

    /// `P'(1+a) = Aγ(1+a)^{γ-1}`.
    pub fn pressure_derivative(&self, a: f64) -> f64 {
        self.pressure_slope() * (1.0 + a).powf(self.gamma - 1.0)
    }

    /// `φ` at a point: `A((1+a)^γ - 1) + b + ½b²`.
    pub fn phi(&self, a: f64, b: f64) -> f64 {
        let pressure_excess = if self.gamma == 2.0 {
            a * (2.0 + a)
        } else {
            (self.gamma * a.ln_1p()).exp_m1()
        };
        self.pressure_a * pressure_excess + b + 0.5 * b * b
    }

    /// Fast magnetosonic speed `sqrt(P'(1+a) + (1+b)²/(1+a))`.
    pub fn fast_speed(&self, a: f64, b: f64) -> f64 {
        (self.pressure_derivative(a) + (1.0 + b) * (1.0 + b) / (1.0 + a)).sqrt()
    }
}

/// Perturbation `(a, u, b)` at time `t`.
#[derive(Debug, Clone)]
pub struct PerturbationState {
    pub a: ScalarField,
    pub u: VectorField,
    pub b: ScalarField,
    pub t: f64,
}

impl PerturbationState {
    pub fn equilibrium(grid: &Arc<SpectralGrid>) -> Self {
        PerturbationState {
            a: ScalarField::zeros(grid),
            u: VectorField::zeros(grid),
            b: ScalarField::zeros(grid),
            t: 0.0,
        }
    }

    pub fn new(a: ScalarField, u: VectorField, b: ScalarField, t: f64) -> Result<Self> {
        crate::spectral::same_grid(a.grid(), u.grid())?;
        crate::spectral::same_grid(a.grid(), b.grid())?;
        Ok(PerturbationState { a, u, b, t })
    }

    /// Builds the perturbation from primitive `(ρ, u, m)`.
    pub fn from_primitive(rho: &ScalarField, u: VectorField, m: &ScalarField, t: f64) -> Result<Self> {
        Self::new(rho.map(|r| r - 1.0), u, m.map(|v| v - 1.0), t)
    }

    /// Primitive `(ρ, u, m)`.
    pub fn to_primitive(&self) -> (ScalarField, VectorField, ScalarField) {
        (
            self.a.map(|a| 1.0 + a),
            self.u.clone(),
            self.b.map(|b| 1.0 + b),
        )
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        self.a.grid()
    }

    /// Scales every perturbation field by `s` (same time).
    pub fn scaled(&self, s: f64) -> Self {
        PerturbationState {
            a: self.a.scaled(s),
            u: self.u.scaled(s),
            b: self.b.scaled(s),
            t: self.t,
        }
    }

    pub fn shifted(&self, s1: usize, s2: usize) -> Self {
        PerturbationState {
            a: self.a.shifted(s1, s2),
            u: self.u.shifted(s1, s2),
            b: self.b.shifted(s1, s2),
            t: self.t,
        }
    }
}

/// Outcome of the validity scan of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    pub sup_abs_a: f64,
    pub min_one_plus_a: f64,
    pub sup_abs_b: f64,
    pub non_finite: usize,
}

impl ValidityReport {
    pub fn small_a_violated(&self) -> bool {
        !(self.sup_abs_a <= SMALL_A_BOUND)
    }

    pub fn is_valid(&self) -> bool {
        self.non_finite == 0 && !self.small_a_violated()
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sup|a| = {:e}, min(1+a) = {}, sup|b| = {:e}, non-finite samples = {}",
            self.sup_abs_a, self.min_one_plus_a, self.sup_abs_b, self.non_finite
        )?;
        if self.small_a_violated() {
            write!(f, " [sup|a| > 1/2]")?;
        }
        Ok(())
    }
}

pub fn validate_state(state: &PerturbationState) -> ValidityReport {
    let count = |f: &ScalarField| f.values().iter().filter(|v| !v.is_finite()).count();
    let non_finite =
        count(&state.a) + count(&state.b) + count(state.u.x()) + count(state.u.y());
    let sup = |f: &ScalarField| {
        f.values()
            .iter()
            .fold(0.0_f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { m })
    };
    let min_one_plus_a = state
        .a
        .values()
        .iter()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, |m, &v| m.min(1.0 + v));
    ValidityReport {
        sup_abs_a: sup(&state.a),
        min_one_plus_a,
        sup_abs_b: sup(&state.b),
        non_finite,
    }
}

/// `φ = P(1+a) + ½(1+b)² - (A + ½)`, pointwise.
pub fn compute_phi(state: &PerturbationState, params: &PhysicalParams) -> ScalarField {
    state
        .a
        .zip_with(&state.b, |a, b| params.phi(a, b))
        .expect("state fields share a grid")
}

/// `d̂ = i ξ·û / |ξ|`, zero where `ξ` vanishes.
pub fn compute_d_spectrum(u: &VectorSpectrum) -> Spectrum {
    let g = u.grid().clone();
    let uy = u.y.coeffs();
    u.x.map_modes(|idx, ux| {
        let k = g.kmag()[idx];
        if k == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0) * (g.kx()[idx] * ux + g.ky()[idx] * uy[idx]) / k
        }
    })
}

/// Compressible scalar `d = Λ⁻¹div u`; `Qu = -Λ⁻¹∇d`.
pub fn compute_d(u: &VectorField) -> ScalarField {
    compute_d_spectrum(&u.spectrum()).to_field()
}

/// `-Λ⁻¹∇d`, the potential velocity carried by `d`.
pub fn potential_velocity_from_d(d: &Spectrum) -> VectorSpectrum {
    let g = d.grid().clone();
    let minus_i = Complex64::new(0.0, -1.0);
    let along = |comp: &[f64]| {
        d.map_modes(|idx, c| {
            let k = g.kmag()[idx];
            if k == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                minus_i * comp[idx] / k * c
            }
        })
    };
    VectorSpectrum {
        x: along(g.kx()),
        y: along(g.ky()),
    }
}

/// `G = Qu - ½Δ⁻¹∇φ`. Only the mean-free part of `φ` enters; its mean is
/// dropped since the gradient annihilates it.
pub fn compute_effective_velocity_spectrum(u: &VectorSpectrum, phi: &Spectrum) -> VectorSpectrum {
    let (_, q) = helmholtz_spectrum(u);
    let g = u.grid().clone();
    let correction = |comp: &[f64], base: &Spectrum| {
        base.map_modes(|idx, c| {
            let k = g.kmag()[idx];
            if k == 0.0 {
                c
            } else {
                // -½ · iξ φ̂ / (-|ξ|²)
                c + Complex64::new(0.0, 0.5) * comp[idx] / (k * k) * phi.coeffs()[idx]
            }
        })
    };
    VectorSpectrum {
        x: correction(g.kx(), &q.x),
        y: correction(g.ky(), &q.y),
    }
}

pub fn compute_effective_velocity(u: &VectorField, phi: &ScalarField) -> VectorField {
    compute_effective_velocity_spectrum(&u.spectrum(), &phi.spectrum()).to_field()
}

/// `δ = φ - 3a`.
pub fn compute_delta(phi: &ScalarField, a: &ScalarField) -> Result<ScalarField> {
    phi.zip_with(a, |p, a| p - 3.0 * a)
}

/// `I(a) = a/(1+a)`; requires `inf(1 + a) >= 1/2`.
pub fn rational_a(a: &ScalarField) -> Result<ScalarField> {
    let min_one_plus_a = 1.0 + a.min();
    if !(min_one_plus_a >= 0.5) {
        return Err(Error::OutsideSmallRegime { min_one_plus_a });
    }
    Ok(a.map(|a| a / (1.0 + a)))
}

/// All auxiliary unknowns of a state.
#[derive(Debug, Clone)]
pub struct DerivedFields {
    pub phi: ScalarField,
    pub d: ScalarField,
    pub g: VectorField,
    pub delta: ScalarField,
    pub ia: ScalarField,
}

impl DerivedFields {
    pub fn compute(state: &PerturbationState, params: &PhysicalParams) -> Result<Self> {
        let phi = compute_phi(state, params);
        let us = state.u.spectrum();
        let d = compute_d_spectrum(&us).to_field();
        let g = compute_effective_velocity_spectrum(&us, &phi.spectrum()).to_field();
        let delta = compute_delta(&phi, &state.a)?;
        let ia = rational_a(&state.a)?;
        Ok(DerivedFields {
            phi,
            d,
            g,
            delta,
            ia,
        })
    }
}
