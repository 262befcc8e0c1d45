//! Right-hand sides of the perturbation system and its nonlinear forcings.
//!
//! Tendencies of `(a, u, b)`:
//!
//! ```text
//! ∂ₜa = -div u - div(a u)
//! ∂ₜu = -u·∇u + μΔu + (λ+μ)∇div u - (P'(1+a)∇a + (1+b)∇b)
//!       + I(a)(P'(1+a)∇a + (1+b)∇b - μΔu - (λ+μ)∇div u)
//! ∂ₜb = -div u - div(b u)
//! ```
//!
//! Products are formed on the grid and the 2/3 mask is applied once to each
//! composite nonlinear term; linear terms are applied exactly per mode.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::ops::dealias_spectrum;
use crate::spectral::{ScalarField, SpectralGrid, Spectrum, VectorField, VectorSpectrum};
use crate::state::{compute_phi, rational_a, validate_state, PerturbationState, PhysicalParams, ValidityReport};

type C = Complex64;
const I: C = Complex64::new(0.0, 1.0);
const ZERO: C = Complex64::new(0.0, 0.0);

/// Time derivatives of `(a, u, b)`.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub da: ScalarField,
    pub du: VectorField,
    pub db: ScalarField,
}

impl Tendency {
    pub fn sub(&self, other: &Tendency) -> Result<Tendency> {
        Ok(Tendency {
            da: self.da.sub(&other.da)?,
            du: self.du.sub(&other.du)?,
            db: self.db.sub(&other.db)?,
        })
    }

    /// `sqrt(‖da‖² + ‖du‖² + ‖db‖²)`.
    pub fn l2_norm(&self) -> f64 {
        let (a, u, b) = (self.da.l2_norm(), self.du.l2_norm(), self.db.l2_norm());
        (a * a + u * u + b * b).sqrt()
    }
}

fn ensure_valid(state: &PerturbationState) -> Result<()> {
    let report = validate_state(state);
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::InvalidState(report))
    }
}

/// Full nonlinear tendency.
pub fn rhs_full(state: &PerturbationState, params: &PhysicalParams) -> Result<Tendency> {
    ensure_valid(state)?;
    let grid = state.grid().clone();
    let modal = ModalState::from_state(state, None);
    let (mut n, _) = explicit_tendency(&grid, params, &modal);
    let (vx, vy) = viscous_spectrum(&grid, params, &modal.ux, &modal.uy);
    for (c, v) in n.ux.iter_mut().zip(&vx) {
        *c += v;
    }
    for (c, v) in n.uy.iter_mut().zip(&vy) {
        *c += v;
    }
    Ok(n.to_tendency(&grid))
}

/// Linear part of the system at the equilibrium, applied exactly per mode:
/// `∂ₜa = ∂ₜb = -div u`, `∂ₜu = μΔu + (λ+μ)∇div u - ∇(P'(1)a + b)`.
pub fn linearize_rhs(state: &PerturbationState, params: &PhysicalParams) -> Tendency {
    let grid = state.grid().clone();
    let m = ModalState::from_state(state, None);
    let (vx, vy) = viscous_spectrum(&grid, params, &m.ux, &m.uy);
    let slope = params.pressure_slope();
    let len = grid.len();
    let (kx, ky) = (grid.kx(), grid.ky());
    let mut out = ModalState::zeros(len, false);
    for idx in 0..len {
        let div = I * (kx[idx] * m.ux[idx] + ky[idx] * m.uy[idx]);
        let p = slope * m.a[idx] + m.b[idx];
        out.a[idx] = -div;
        out.b[idx] = -div;
        out.ux[idx] = vx[idx] - I * kx[idx] * p;
        out.uy[idx] = vy[idx] - I * ky[idx] * p;
    }
    out.to_tendency(&grid)
}

/// `F(a, u, φ) = I(a)∇φ - I(a)(μΔu + (λ+μ)∇div u)`.
pub fn forcing_f(
    a: &ScalarField,
    u: &VectorField,
    phi: &ScalarField,
    params: &PhysicalParams,
) -> Result<VectorField> {
    crate::spectral::same_grid(a.grid(), u.grid())?;
    crate::spectral::same_grid(a.grid(), phi.grid())?;
    let ia = rational_a(a)?;
    let grid = a.grid().clone();
    let grad_phi = crate::spectral::gradient(phi);
    let us = u.spectrum();
    let (vx, vy) = viscous_spectrum(&grid, params, us.x.coeffs(), us.y.coeffs());
    let (vx, vy) = grid.inverse_pair(&vx, &vy);
    let fx: Vec<f64> = (0..grid.len())
        .map(|i| ia.values()[i] * (grad_phi.x().values()[i] - vx[i]))
        .collect();
    let fy: Vec<f64> = (0..grid.len())
        .map(|i| ia.values()[i] * (grad_phi.y().values()[i] - vy[i]))
        .collect();
    Ok(dealiased_vector(&grid, &fx, &fy).to_field())
}

/// Forcings of the `(φ, d)` system,
/// `∂ₜφ + (P'(1)+1)Λd = f₁` and `∂ₜd - νΔd - Λφ = f₂`:
///
/// `f₁ = -u·∇φ - (P'(1+a)(1+a) + (1+b)² - P'(1) - 1) div u`, which is
/// `-u·∇φ - 2φ div u` for `A = 1, γ = 2`.
/// `f₂ = Λ⁻¹div(-u·∇u + F(a, u, φ))`.
///
/// The zero mode of `f₁` is kept; `f₂` is mean-free by construction.
pub fn forcing_f1_f2(state: &PerturbationState, params: &PhysicalParams) -> Result<(ScalarField, ScalarField)> {
    ensure_valid(state)?;
    let f1 = forcing_f1(state, params);
    let grid = state.grid().clone();
    let phi = compute_phi(state, params);
    let f = forcing_f(&state.a, &state.u, &phi, params)?;
    let adv = advection(&state.u, &state.u);
    let adv = dealiased_vector(&grid, adv.x().values(), adv.y().values());
    let fs = f.spectrum();
    let (kx, ky, k) = (grid.kx(), grid.ky(), grid.kmag());
    let f2 = adv.x.map_modes(|idx, ax| {
        if k[idx] == 0.0 {
            return ZERO;
        }
        let vx = fs.x.coeffs()[idx] - ax;
        let vy = fs.y.coeffs()[idx] - adv.y.coeffs()[idx];
        I * (kx[idx] * vx + ky[idx] * vy) / k[idx]
    });
    Ok((f1, f2.to_field()))
}

fn forcing_f1(state: &PerturbationState, params: &PhysicalParams) -> ScalarField {
    let grid = state.grid().clone();
    let phi = compute_phi(state, params);
    let grad_phi = crate::spectral::gradient(&phi);
    let div = crate::spectral::divergence(&state.u);
    let lin = params.acoustic_stiffness();
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (a, b) = (state.a.values()[i], state.b.values()[i]);
            let stiffness = params.pressure_derivative(a) * (1.0 + a) + (1.0 + b) * (1.0 + b) - lin;
            -(state.u.x().values()[i] * grad_phi.x().values()[i]
                + state.u.y().values()[i] * grad_phi.y().values()[i])
                - stiffness * div.values()[i]
        })
        .collect();
    let mut s = grid.forward(&values);
    mask(&grid, &mut s);
    Spectrum::new(grid, s).expect("length matches grid").to_field()
}

/// Tendency of `φ` implied by the `(a, b)` equations:
/// `∂ₜφ = -(P'(1)+1) div u + f₁`, i.e. `-3 div u - u·∇φ - 2φ div u` for `A = 1, γ = 2`.
pub fn phi_tendency(state: &PerturbationState, params: &PhysicalParams) -> Result<ScalarField> {
    ensure_valid(state)?;
    let f1 = forcing_f1(state, params);
    let div = crate::spectral::divergence(&state.u);
    f1.zip_with(&div, |f, d| f - params.acoustic_stiffness() * d)
}

/// Tendency of `δ = φ - 3a` under `∂ₜδ + u·∇δ + δ div u + φ div u = 0`,
/// written as `-div(δu) - φ div u`.
pub fn delta_tendency(state: &PerturbationState, delta: &ScalarField, params: &PhysicalParams) -> Result<ScalarField> {
    ensure_valid(state)?;
    crate::spectral::same_grid(state.grid(), delta.grid())?;
    let grid = state.grid().clone();
    let modal = ModalState::from_state(state, Some(delta));
    let (n, _) = explicit_tendency(&grid, params, &modal);
    let coeffs = n.delta.expect("delta requested");
    Ok(Spectrum::new(grid, coeffs).expect("length matches grid").to_field())
}

fn advection(u: &VectorField, v: &VectorField) -> VectorField {
    let gx = crate::spectral::gradient(v.x());
    let gy = crate::spectral::gradient(v.y());
    let (ux, uy) = (u.x().values(), u.y().values());
    let ax: Vec<f64> = (0..ux.len())
        .map(|i| ux[i] * gx.x().values()[i] + uy[i] * gx.y().values()[i])
        .collect();
    let ay: Vec<f64> = (0..ux.len())
        .map(|i| ux[i] * gy.x().values()[i] + uy[i] * gy.y().values()[i])
        .collect();
    let g = u.grid();
    VectorField::new(
        ScalarField::new(g.clone(), ax).expect("length matches grid"),
        ScalarField::new(g.clone(), ay).expect("length matches grid"),
    )
    .expect("same grid")
}

fn dealiased_vector(grid: &Arc<SpectralGrid>, fx: &[f64], fy: &[f64]) -> VectorSpectrum {
    let (sx, sy) = grid.forward_pair(fx, fy);
    let mk = |c| dealias_spectrum(&Spectrum::new(grid.clone(), c).expect("length matches grid"));
    VectorSpectrum { x: mk(sx), y: mk(sy) }
}

fn mask(grid: &SpectralGrid, c: &mut [C]) {
    for (c, &keep) in c.iter_mut().zip(grid.dealias_mask()) {
        if !keep {
            *c = ZERO;
        }
    }
}

/// `μΔu + (λ+μ)∇div u` per mode.
pub(crate) fn viscous_spectrum(grid: &SpectralGrid, params: &PhysicalParams, ux: &[C], uy: &[C]) -> (Vec<C>, Vec<C>) {
    let (kx, ky) = (grid.kx(), grid.ky());
    let lm = params.lambda + params.mu;
    let mut vx = Vec::with_capacity(ux.len());
    let mut vy = Vec::with_capacity(ux.len());
    for idx in 0..ux.len() {
        let k2 = kx[idx] * kx[idx] + ky[idx] * ky[idx];
        let kdotu = kx[idx] * ux[idx] + ky[idx] * uy[idx];
        vx.push(-params.mu * k2 * ux[idx] - lm * kx[idx] * kdotu);
        vy.push(-params.mu * k2 * uy[idx] - lm * ky[idx] * kdotu);
    }
    (vx, vy)
}

/// Coefficient-space state used by the stepper, with an optional transported `δ`.
#[derive(Debug, Clone)]
pub(crate) struct ModalState {
    pub a: Vec<C>,
    pub ux: Vec<C>,
    pub uy: Vec<C>,
    pub b: Vec<C>,
    pub delta: Option<Vec<C>>,
}

impl ModalState {
    pub fn zeros(len: usize, with_delta: bool) -> Self {
        ModalState {
            a: vec![ZERO; len],
            ux: vec![ZERO; len],
            uy: vec![ZERO; len],
            b: vec![ZERO; len],
            delta: with_delta.then(|| vec![ZERO; len]),
        }
    }

    pub fn from_state(state: &PerturbationState, delta: Option<&ScalarField>) -> Self {
        let grid = state.grid();
        let (a, b) = grid.forward_pair(state.a.values(), state.b.values());
        let (ux, uy) = grid.forward_pair(state.u.x().values(), state.u.y().values());
        ModalState {
            a,
            ux,
            uy,
            b,
            delta: delta.map(|d| grid.forward(d.values())),
        }
    }

    pub fn to_state(&self, grid: &Arc<SpectralGrid>, t: f64) -> PerturbationState {
        let (a, b) = grid.inverse_pair(&self.a, &self.b);
        let (ux, uy) = grid.inverse_pair(&self.ux, &self.uy);
        let f = |v| ScalarField::new(grid.clone(), v).expect("length matches grid");
        PerturbationState {
            a: f(a),
            u: VectorField::new(f(ux), f(uy)).expect("same grid"),
            b: f(b),
            t,
        }
    }

    pub fn delta_field(&self, grid: &Arc<SpectralGrid>) -> Option<ScalarField> {
        self.delta
            .as_ref()
            .map(|d| ScalarField::new(grid.clone(), grid.inverse(d)).expect("length matches grid"))
    }

    fn to_tendency(&self, grid: &Arc<SpectralGrid>) -> Tendency {
        let s = self.to_state(grid, 0.0);
        Tendency {
            da: s.a,
            du: s.u,
            db: s.b,
        }
    }

    fn fields_mut(&mut self) -> impl Iterator<Item = &mut Vec<C>> {
        [&mut self.a, &mut self.ux, &mut self.uy, &mut self.b]
            .into_iter()
            .chain(self.delta.as_mut())
    }

    fn fields(&self) -> impl Iterator<Item = &Vec<C>> {
        [&self.a, &self.ux, &self.uy, &self.b]
            .into_iter()
            .chain(self.delta.as_ref())
    }

    /// `self += s·other`.
    pub fn axpy(&mut self, s: f64, other: &ModalState) {
        for (x, y) in self.fields_mut().zip(other.fields()) {
            for (xi, yi) in x.iter_mut().zip(y) {
                *xi += s * yi;
            }
        }
    }

    /// `self + s·other`.
    pub fn plus(&self, s: f64, other: &ModalState) -> ModalState {
        let mut out = self.clone();
        out.axpy(s, other);
        out
    }

    /// Applies the exact viscous semigroup `exp(h(μΔ + (λ+μ)∇div))` to `u`;
    /// `a`, `b` and `δ` are untouched.
    pub fn apply_viscous(&mut self, factors: &ViscousFactors) {
        let (kx, ky) = (&factors.kx, &factors.ky);
        for idx in 0..self.ux.len() {
            let (em, en) = (factors.solenoidal[idx], factors.potential[idx]);
            if em == 1.0 && en == 1.0 {
                continue;
            }
            let k2 = kx[idx] * kx[idx] + ky[idx] * ky[idx];
            let (ux, uy) = (self.ux[idx], self.uy[idx]);
            let q = (kx[idx] * ux + ky[idx] * uy) / k2 * (en - em);
            self.ux[idx] = em * ux + q * kx[idx];
            self.uy[idx] = em * uy + q * ky[idx];
        }
    }
}

/// Per-mode factors `e^{-μ|ξ|²h}` (solenoidal) and `e^{-ν|ξ|²h}` (potential).
#[derive(Debug, Clone)]
pub(crate) struct ViscousFactors {
    pub h: f64,
    solenoidal: Vec<f64>,
    potential: Vec<f64>,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl ViscousFactors {
    pub fn new(grid: &SpectralGrid, params: &PhysicalParams, h: f64) -> Self {
        let k = grid.kmag();
        ViscousFactors {
            h,
            solenoidal: k.iter().map(|k| (-params.mu * k * k * h).exp()).collect(),
            potential: k.iter().map(|k| (-params.nu() * k * k * h).exp()).collect(),
            kx: grid.kx().to_vec(),
            ky: grid.ky().to_vec(),
        }
    }
}

/// Pointwise statistics gathered while evaluating a tendency.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScanStats {
    pub max_speed: f64,
    pub max_fast: f64,
    pub report: ValidityReport,
}

fn inverse_derivatives(grid: &SpectralGrid, f: &[C]) -> (Vec<f64>, Vec<f64>) {
    let (kx, ky) = (grid.kx(), grid.ky());
    let dx: Vec<C> = f.iter().zip(kx).map(|(c, k)| I * k * c).collect();
    let dy: Vec<C> = f.iter().zip(ky).map(|(c, k)| I * k * c).collect();
    grid.inverse_pair(&dx, &dy)
}

/// Everything except the viscous operator, in coefficient space, together
/// with pointwise statistics of the input state.
pub(crate) fn explicit_tendency(
    grid: &Arc<SpectralGrid>,
    params: &PhysicalParams,
    s: &ModalState,
) -> (ModalState, ScanStats) {
    let len = grid.len();
    let (a, b) = grid.inverse_pair(&s.a, &s.b);
    let (ux, uy) = grid.inverse_pair(&s.ux, &s.uy);
    let (ax, ay) = inverse_derivatives(grid, &s.a);
    let (bx, by) = inverse_derivatives(grid, &s.b);
    let (uxx, uxy) = inverse_derivatives(grid, &s.ux);
    let (uyx, uyy) = inverse_derivatives(grid, &s.uy);
    let (vhx, vhy) = viscous_spectrum(grid, params, &s.ux, &s.uy);
    let (vx, vy) = grid.inverse_pair(&vhx, &vhy);
    let delta = s.delta.as_ref().map(|d| grid.inverse(d));

    let slope = params.pressure_slope();
    let quadratic_pressure = params.gamma == 2.0;
    let mut nlx = vec![0.0; len];
    let mut nly = vec![0.0; len];
    let mut fax = vec![0.0; len];
    let mut fay = vec![0.0; len];
    let mut fbx = vec![0.0; len];
    let mut fby = vec![0.0; len];
    let (mut fdx, mut fdy, mut phidiv) = if delta.is_some() {
        (vec![0.0; len], vec![0.0; len], vec![0.0; len])
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };

    let mut max_speed = 0.0_f64;
    let mut max_fast = 0.0_f64;
    let mut sup_a = 0.0_f64;
    let mut sup_b = 0.0_f64;
    let mut min_one_plus_a = f64::INFINITY;
    let mut non_finite = 0usize;

    for i in 0..len {
        let (ai, bi, u1, u2) = (a[i], b[i], ux[i], uy[i]);
        let one = 1.0 + ai;
        let pd = if quadratic_pressure {
            slope * one
        } else {
            params.pressure_derivative(ai)
        };
        let mb = 1.0 + bi;
        let force_x = pd * ax[i] + mb * bx[i];
        let force_y = pd * ay[i] + mb * by[i];
        let lin_x = slope * ax[i] + bx[i];
        let lin_y = slope * ay[i] + by[i];
        let ia = ai / one;
        nlx[i] = -(u1 * uxx[i] + u2 * uxy[i]) - force_x / one + lin_x - ia * vx[i];
        nly[i] = -(u1 * uyx[i] + u2 * uyy[i]) - force_y / one + lin_y - ia * vy[i];
        fax[i] = ai * u1;
        fay[i] = ai * u2;
        fbx[i] = bi * u1;
        fby[i] = bi * u2;
        if let Some(d) = &delta {
            fdx[i] = d[i] * u1;
            fdy[i] = d[i] * u2;
            phidiv[i] = params.phi(ai, bi) * (uxx[i] + uyy[i]);
        }

        if ai.is_finite() && bi.is_finite() && u1.is_finite() && u2.is_finite() {
            sup_a = sup_a.max(ai.abs());
            sup_b = sup_b.max(bi.abs());
            min_one_plus_a = min_one_plus_a.min(one);
            // squared speeds; roots taken once after the loop
            max_speed = max_speed.max(u1 * u1 + u2 * u2);
            if one > 0.0 {
                max_fast = max_fast.max(pd + mb * mb / one);
            }
        } else {
            non_finite += 1;
        }
    }

    let (nlx, nly) = grid.forward_pair(&nlx, &nly);
    let (fax, fay) = grid.forward_pair(&fax, &fay);
    let (fbx, fby) = grid.forward_pair(&fbx, &fby);
    let delta_fluxes = delta.as_ref().map(|_| {
        let (x, y) = grid.forward_pair(&fdx, &fdy);
        (x, y, grid.forward(&phidiv))
    });

    let (kx, ky) = (grid.kx(), grid.ky());
    let keep = grid.dealias_mask();
    let mut out = ModalState::zeros(len, delta.is_some());
    for idx in 0..len {
        let (k1, k2) = (kx[idx], ky[idx]);
        let div = I * (k1 * s.ux[idx] + k2 * s.uy[idx]);
        let p = slope * s.a[idx] + s.b[idx];
        let mut da = -div;
        let mut db = -div;
        let mut dux = -I * k1 * p;
        let mut duy = -I * k2 * p;
        if keep[idx] {
            da -= I * (k1 * fax[idx] + k2 * fay[idx]);
            db -= I * (k1 * fbx[idx] + k2 * fby[idx]);
            dux += nlx[idx];
            duy += nly[idx];
            if let (Some((fx, fy, pd)), Some(dd)) = (&delta_fluxes, out.delta.as_mut()) {
                dd[idx] = -I * (k1 * fx[idx] + k2 * fy[idx]) - pd[idx];
            }
        }
        out.a[idx] = da;
        out.b[idx] = db;
        out.ux[idx] = dux;
        out.uy[idx] = duy;
    }

    let stats = ScanStats {
        max_speed: max_speed.sqrt(),
        max_fast: max_fast.sqrt(),
        report: ValidityReport {
            sup_abs_a: sup_a,
            min_one_plus_a,
            sup_abs_b: sup_b,
            non_finite,
        },
    };
    (out, stats)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spectral::{divergence, helmholtz_project, random_spectrum};

    fn grid(n: usize) -> Arc<SpectralGrid> {
        SpectralGrid::new(n, 2.0 * PI).unwrap()
    }

    /// Band-limited random state with unit sup-norm per field.
    fn shape(grid: &Arc<SpectralGrid>, seed: u64, band: usize) -> PerturbationState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = || {
            let s = random_spectrum(grid, &mut rng, band).to_field();
            let m = s.max_abs();
            s.scaled(1.0 / m)
        };
        let a = f();
        let b = f();
        let u = VectorField::new(f(), f()).unwrap();
        PerturbationState::new(a, u, b, 0.0).unwrap()
    }

    #[test]
    fn equilibrium_is_steady() {
        let g = grid(32);
        let p = PhysicalParams::default();
        let t = rhs_full(&PerturbationState::equilibrium(&g), &p).unwrap();
        assert_eq!(t.l2_norm(), 0.0);
        let (f1, f2) = forcing_f1_f2(&PerturbationState::equilibrium(&g), &p).unwrap();
        assert_eq!(f1.max_abs() + f2.max_abs(), 0.0);
    }

    #[test]
    fn incompressible_collapse() {
        let g = grid(32);
        let p = PhysicalParams::default();
        let s = shape(&g, 1, 5);
        let (sol, _) = helmholtz_project(&s.u);
        let st = PerturbationState::new(ScalarField::zeros(&g), sol.scaled(0.1), ScalarField::zeros(&g), 0.0).unwrap();
        let t = rhs_full(&st, &p).unwrap();
        assert!(t.da.max_abs() < 1e-14);
        assert!(t.db.max_abs() < 1e-14);
        // Navier-Stokes: -u·∇u + μΔu
        let adv = advection(&st.u, &st.u);
        let lap = VectorField::new(
            crate::spectral::laplacian(st.u.x()),
            crate::spectral::laplacian(st.u.y()),
        )
        .unwrap();
        let expected = lap.sub(&adv).unwrap();
        assert!(t.du.sub(&expected).unwrap().l2_norm() < 1e-12 * expected.l2_norm());
    }

    #[test]
    fn conservation_zero_mode() {
        let g = grid(32);
        let p = PhysicalParams::default();
        for seed in 0..10 {
            let s = shape(&g, seed, 12).scaled(0.3);
            let t = rhs_full(&s, &p).unwrap();
            assert!(t.da.mean().abs() < 1e-14);
            assert!(t.db.mean().abs() < 1e-14);
        }
    }

    #[test]
    fn nonlinear_residual_is_quadratic() {
        let g = grid(32);
        let p = PhysicalParams::default();
        let base = shape(&g, 3, 6);
        let res = |eps: f64| {
            let s = base.scaled(eps);
            rhs_full(&s, &p).unwrap().sub(&linearize_rhs(&s, &p)).unwrap().l2_norm()
        };
        let r: Vec<f64> = [1e-3, 5e-4, 2.5e-4].iter().map(|&e| res(e)).collect();
        for w in r.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "order {order}");
        }
    }

    #[test]
    fn forcing_examples() {
        let g = grid(32);
        let p = PhysicalParams::default();
        let s = shape(&g, 4, 6).scaled(0.2);
        let phi = compute_phi(&s, &p);
        let f = forcing_f(&ScalarField::zeros(&g), &s.u, &phi, &p).unwrap();
        assert_eq!(f.max_magnitude(), 0.0);

        let a = ScalarField::constant(&g, 0.1);
        let phi = ScalarField::from_fn(&g, |x, _| x.sin());
        let f = forcing_f(&a, &VectorField::zeros(&g), &phi, &p).unwrap();
        let expected = ScalarField::from_fn(&g, |x, _| x.cos() / 11.0);
        assert!(f.x().sub(&expected).unwrap().max_abs() < 1e-14);
        assert!(f.y().max_abs() < 1e-14);

        assert!(forcing_f(&ScalarField::constant(&g, -0.6), &s.u, &phi, &p).is_err());
    }

    #[test]
    fn phi_form_momentum_matches_full() {
        // -u·∇u + visc - ∇φ + F equals the full du for band-limited states.
        let g = grid(64);
        let p = PhysicalParams::default();
        for seed in 0..5 {
            let s = shape(&g, 10 + seed, 6).scaled(0.05);
            let full = rhs_full(&s, &p).unwrap();
            let phi = compute_phi(&s, &p);
            let f = forcing_f(&s.a, &s.u, &phi, &p).unwrap();
            let adv = advection(&s.u, &s.u);
            let adv = dealiased_vector(&g, adv.x().values(), adv.y().values()).to_field();
            let us = s.u.spectrum();
            let (vx, vy) = viscous_spectrum(&g, &p, us.x.coeffs(), us.y.coeffs());
            let visc = VectorSpectrum::new(
                Spectrum::new(g.clone(), vx).unwrap(),
                Spectrum::new(g.clone(), vy).unwrap(),
            )
            .unwrap()
            .to_field();
            let du = visc
                .sub(&adv)
                .unwrap()
                .sub(&crate::spectral::gradient(&phi))
                .unwrap()
                .add(&f)
                .unwrap();
            let err = du.sub(&full.du).unwrap().l2_norm();
            assert!(err < 1e-10 * full.du.l2_norm(), "err {err}");
        }
    }

    #[test]
    fn f1_f2_properties() {
        let g = grid(32);
        let p = PhysicalParams::default();
        let s = shape(&g, 5, 6);
        let (sol, _) = helmholtz_project(&s.u);
        let st = PerturbationState::new(ScalarField::zeros(&g), sol.scaled(0.1), ScalarField::zeros(&g), 0.0).unwrap();
        let (f1, _) = forcing_f1_f2(&st, &p).unwrap();
        assert!(f1.max_abs() < 1e-14);

        let norm = |e: f64| {
            let (f1, f2) = forcing_f1_f2(&s.scaled(e), &p).unwrap();
            f1.l2_norm() + f2.l2_norm()
        };
        let order = (norm(1e-3) / norm(5e-4)).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
        let (_, f2) = forcing_f1_f2(&s.scaled(0.1), &p).unwrap();
        assert!(f2.mean().abs() < 1e-15);
    }

    #[test]
    fn f1_closed_form_for_default_params() {
        let g = grid(64);
        let p = PhysicalParams::default();
        let s = shape(&g, 6, 6).scaled(0.1);
        let (f1, _) = forcing_f1_f2(&s, &p).unwrap();
        let phi = compute_phi(&s, &p);
        let gp = crate::spectral::gradient(&phi);
        let div = divergence(&s.u);
        let raw: Vec<f64> = (0..g.len())
            .map(|i| {
                -(s.u.x().values()[i] * gp.x().values()[i] + s.u.y().values()[i] * gp.y().values()[i])
                    - 2.0 * phi.values()[i] * div.values()[i]
            })
            .collect();
        let expected = crate::spectral::dealias(&ScalarField::new(g.clone(), raw).unwrap());
        assert!(f1.sub(&expected).unwrap().l2_norm() < 1e-12 * expected.l2_norm());
    }

    #[test]
    fn phi_tendency_matches_chain_rule() {
        // band 6 on 64 points: cubic products stay inside the 2/3 mask
        let g = grid(64);
        let p = PhysicalParams::default();
        for seed in 0..5 {
            let s = shape(&g, 20 + seed, 6).scaled(0.05);
            let t = rhs_full(&s, &p).unwrap();
            let chain: Vec<f64> = (0..g.len())
                .map(|i| {
                    let (a, b) = (s.a.values()[i], s.b.values()[i]);
                    p.pressure_derivative(a) * t.da.values()[i] + (1.0 + b) * t.db.values()[i]
                })
                .collect();
            let chain = ScalarField::new(g.clone(), chain).unwrap();
            let direct = phi_tendency(&s, &p).unwrap();
            let err = direct.sub(&chain).unwrap().l2_norm();
            assert!(err < 1e-10 * chain.l2_norm(), "err {err}");
        }
    }

    #[test]
    fn delta_tendency_consistent() {
        let g = grid(64);
        let p = PhysicalParams::default();
        let s = shape(&g, 30, 6).scaled(0.05);
        let phi = compute_phi(&s, &p);
        let delta = crate::state::compute_delta(&phi, &s.a).unwrap();
        let dd = delta_tendency(&s, &delta, &p).unwrap();
        let da = rhs_full(&s, &p).unwrap().da;
        let expected = phi_tendency(&s, &p).unwrap().sub(&da.scaled(3.0)).unwrap();
        let err = dd.sub(&expected).unwrap().l2_norm();
        assert!(err < 1e-10 * expected.l2_norm(), "err {err}");
    }

    #[test]
    fn linearization_examples() {
        let g = grid(32);
        let p = PhysicalParams::default();
        assert_eq!(linearize_rhs(&PerturbationState::equilibrium(&g), &p).l2_norm(), 0.0);

        let psi = ScalarField::from_fn(&g, |x, y| (2.0 * x + 3.0 * y).cos());
        let gp = crate::spectral::gradient(&psi);
        let u = VectorField::new(gp.y().scaled(-1.0), gp.x().clone()).unwrap();
        let st = PerturbationState::new(ScalarField::zeros(&g), u.clone(), ScalarField::zeros(&g), 0.0).unwrap();
        let t = linearize_rhs(&st, &p);
        assert!(t.du.sub(&u.scaled(-13.0)).unwrap().max_magnitude() < 1e-12 * 13.0 * u.max_magnitude());
        assert!(t.da.max_abs() < 1e-12 && t.db.max_abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_state() {
        let g = grid(16);
        let mut s = PerturbationState::equilibrium(&g);
        s.a.values_mut()[0] = 0.7;
        assert!(matches!(rhs_full(&s, &PhysicalParams::default()), Err(Error::InvalidState(_))));
    }

    #[test]
    fn viscous_factors_split_helmholtz() {
        let g = grid(16);
        let p = PhysicalParams::default();
        let s = shape(&g, 40, 5);
        let mut m = ModalState::from_state(&s, None);
        let h = 0.01;
        m.apply_viscous(&ViscousFactors::new(&g, &p, h));
        let out = m.to_state(&g, 0.0);
        let (ps, qs) = helmholtz_project(&s.u);
        let (po, qo) = helmholtz_project(&out.u);
        let heat = |v: &VectorField, rate: f64| {
            let sp = v.spectrum();
            let f = |c: &Spectrum| {
                c.map_modes(|idx, z| z * (-rate * g.kmag()[idx].powi(2) * h).exp())
            };
            VectorSpectrum::new(f(&sp.x), f(&sp.y)).unwrap().to_field()
        };
        assert!(po.sub(&heat(&ps, p.mu)).unwrap().l2_norm() < 1e-13);
        assert!(qo.sub(&heat(&qs, p.nu())).unwrap().l2_norm() < 1e-13);
        assert!(out.a.sub(&s.a).unwrap().max_abs() < 1e-14);
    }
}
