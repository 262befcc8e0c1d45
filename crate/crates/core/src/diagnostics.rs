//! Functionals monitored along a run: Besov panels, the block energy
//! functional, the solution norm `𝒳(t)`, the Lyapunov functional,
//! negative-index semi-norms, conserved totals and decay-exponent fits.
//!
//! All Besov quantities use `p = 2`, `r = 1` and go through Parseval. A
//! tuple norm is the sum of its components' norms; a vector component
//! (`u`, `Qu`, `Pu`) is measured with its Euclidean block norm.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::littlewood_paley::{LittlewoodPaley, Part, SplitEnergies};
use crate::spectral::ops::helmholtz_spectrum;
use crate::spectral::{ScalarField, SpectralGrid, Spectrum, VectorSpectrum};
use crate::state::{compute_d_spectrum, compute_phi, PerturbationState, PhysicalParams};

/// Low/high threshold and negative index used by the panels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    pub j0: i32,
    pub sigma: f64,
    /// Exponent `γ₁` of the extra `‖Λ^{γ₁}(φ, u)‖_{L²}` decay quantity.
    pub gamma1: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            j0: 0,
            sigma: 1.0,
            gamma1: -0.5,
        }
    }
}

/// Besov panel entries (`p = 2`, `r = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BesovPanel {
    /// `‖(φ, u)‖ℓ_{Ḃ⁰}`.
    pub low_phi_u_b0: f64,
    /// `‖φ‖ʰ_{Ḃ¹}`.
    pub high_phi_b1: f64,
    /// `‖u‖ʰ_{Ḃ⁰}`.
    pub high_u_b0: f64,
    /// `‖(φ, u)‖ℓ_{Ḃ²}`.
    pub low_phi_u_b2: f64,
    /// `‖u‖ʰ_{Ḃ²}`.
    pub high_u_b2: f64,
}

/// Instantaneous ingredients of `𝒳(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolutionNormParts {
    /// `‖(aℓ, Quℓ, bℓ)‖_{Ḃ⁰}`.
    pub low_a_qu_b_b0: f64,
    /// `‖(aʰ, bʰ)‖_{Ḃ¹}`.
    pub high_a_b_b1: f64,
    /// `‖(Pu, Quʰ)‖_{Ḃ⁰}`.
    pub pu_quh_b0: f64,
    /// `‖(φℓ, Quℓ)‖_{Ḃ²}`, integrated in time.
    pub low_phi_qu_b2: f64,
    /// `‖φʰ‖_{Ḃ¹}`, integrated in time.
    pub high_phi_b1: f64,
    /// `‖(Pu, Quʰ)‖_{Ḃ²}`, integrated in time.
    pub pu_quh_b2: f64,
}

impl SolutionNormParts {
    /// The sup-in-time part evaluated at one instant (`𝒳₀` at `t = 0`).
    pub fn sup_part(&self) -> f64 {
        self.low_a_qu_b_b0 + self.high_a_b_b1 + self.pu_quh_b0
    }

    fn integrands(&self) -> [f64; 3] {
        [self.low_phi_qu_b2, self.high_phi_b1, self.pu_quh_b2]
    }

    fn sups(&self) -> [f64; 3] {
        [self.low_a_qu_b_b0, self.high_a_b_b1, self.pu_quh_b0]
    }
}

/// `Ḃ^{-σ}_{2,∞}` low-frequency semi-norms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NegIndexPanel {
    pub a: f64,
    pub b: f64,
    pub phi: f64,
    pub u: f64,
}

impl NegIndexPanel {
    pub fn values(&self) -> [(&'static str, f64); 4] {
        [("a", self.a), ("b", self.b), ("phi", self.phi), ("u", self.u)]
    }
}

/// `∫a`, `∫b` (lattice quadrature) and `min(1 + a)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Totals {
    pub total_a: f64,
    pub total_b: f64,
    pub min_rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub l2_phi: f64,
    pub l2_u: f64,
    pub l2_a: f64,
    pub l2_b: f64,
    pub besov: BesovPanel,
    pub x_parts: SolutionNormParts,
    /// `(j, L²ₖ)` for the low blocks `j <= j0`.
    pub lk_table: Vec<(i32, f64)>,
    pub neg_index: NegIndexPanel,
    pub totals: Totals,
    pub lyapunov: f64,
    /// `‖(φ, u)‖_{L²}` without the zero modes.
    pub decay_l2: f64,
    /// `‖Λ^{γ₁}(φ, u)‖_{L²}`.
    pub decay_gamma1: f64,
    /// `𝒳(t)` over the history up to this record (0 until tracked).
    pub x_t: f64,
}

impl DiagnosticsRecord {
    pub fn all_finite(&self) -> bool {
        let scalars = [
            self.t,
            self.l2_phi,
            self.l2_u,
            self.l2_a,
            self.l2_b,
            self.besov.low_phi_u_b0,
            self.besov.high_phi_b1,
            self.besov.high_u_b0,
            self.besov.low_phi_u_b2,
            self.besov.high_u_b2,
            self.lyapunov,
            self.x_t,
            self.neg_index.a,
            self.neg_index.b,
            self.neg_index.phi,
            self.neg_index.u,
            self.totals.total_a,
            self.totals.total_b,
            self.totals.min_rho,
            self.decay_l2,
            self.decay_gamma1,
        ];
        scalars.iter().all(|v| v.is_finite()) && self.lk_table.iter().all(|(_, v)| v.is_finite())
    }
}

/// Spectra shared by every functional of one state.
struct Spectra {
    a: Spectrum,
    b: Spectrum,
    phi: Spectrum,
    u: VectorSpectrum,
    pu: VectorSpectrum,
    qu: VectorSpectrum,
    d: Spectrum,
}

impl Spectra {
    fn new(state: &PerturbationState, phi: &ScalarField) -> Self {
        let grid = state.grid().clone();
        let (a, b) = grid.forward_pair(state.a.values(), state.b.values());
        let (ux, uy) = grid.forward_pair(state.u.x().values(), state.u.y().values());
        let mk = |c| Spectrum::new(grid.clone(), c).expect("length matches grid");
        let u = VectorSpectrum {
            x: mk(ux),
            y: mk(uy),
        };
        let (pu, qu) = helmholtz_spectrum(&u);
        let d = compute_d_spectrum(&u);
        Spectra {
            a: mk(a),
            b: mk(b),
            phi: phi.spectrum(),
            u,
            pu,
            qu,
            d,
        }
    }
}

/// Builds diagnostics records for one grid.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    lp: LittlewoodPaley,
    cfg: DiagnosticsConfig,
    params: PhysicalParams,
}

impl Diagnostics {
    pub fn new(grid: Arc<SpectralGrid>, params: PhysicalParams, cfg: DiagnosticsConfig) -> Result<Self> {
        if !(cfg.sigma > 0.0 && cfg.sigma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must lie in (0, 1], got {}",
                cfg.sigma
            )));
        }
        Ok(Diagnostics {
            lp: LittlewoodPaley::with_default_cutoffs(grid),
            cfg,
            params,
        })
    }

    pub fn with_lp(lp: LittlewoodPaley, params: PhysicalParams, cfg: DiagnosticsConfig) -> Self {
        Diagnostics { lp, cfg, params }
    }

    pub fn lp(&self) -> &LittlewoodPaley {
        &self.lp
    }

    pub fn config(&self) -> &DiagnosticsConfig {
        &self.cfg
    }

    pub fn record(&self, state: &PerturbationState) -> Result<DiagnosticsRecord> {
        let phi = compute_phi(state, &self.params);
        let sp = Spectra::new(state, &phi);
        let (low, high) = (Part::Low(self.cfg.j0), Part::High(self.cfg.j0));
        let u = [&sp.u.x, &sp.u.y];
        let pu = [&sp.pu.x, &sp.pu.y];
        let qu = [&sp.qu.x, &sp.qu.y];

        let j0 = self.cfg.j0;
        let split = |c: &[&Spectrum]| self.lp.split_block_energies(c, j0);
        let (ea, eb, ephi) = (split(&[&sp.a]), split(&[&sp.b]), split(&[&sp.phi]));
        let (eu, epu, equ) = (split(&u), split(&pu), split(&qu));
        let b = |e: &SplitEnergies, s: f64, part: Part| e.besov(s, 1.0, part);

        let besov = BesovPanel {
            low_phi_u_b0: b(&ephi, 0.0, low) + b(&eu, 0.0, low),
            high_phi_b1: b(&ephi, 1.0, high),
            high_u_b0: b(&eu, 0.0, high),
            low_phi_u_b2: b(&ephi, 2.0, low) + b(&eu, 2.0, low),
            high_u_b2: b(&eu, 2.0, high),
        };
        let x_parts = SolutionNormParts {
            low_a_qu_b_b0: b(&ea, 0.0, low) + b(&equ, 0.0, low) + b(&eb, 0.0, low),
            high_a_b_b1: b(&ea, 1.0, high) + b(&eb, 1.0, high),
            pu_quh_b0: b(&epu, 0.0, Part::All) + b(&equ, 0.0, high),
            low_phi_qu_b2: b(&ephi, 2.0, low) + b(&equ, 2.0, low),
            high_phi_b1: besov.high_phi_b1,
            pu_quh_b2: b(&epu, 2.0, Part::All) + b(&equ, 2.0, high),
        };
        let lk_table = lk_table_spectrum(&self.lp, &sp.phi, &sp.d, j0);
        let sigma = self.cfg.sigma;
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must lie in (0, 1], got {sigma}"
            )));
        }
        let neg_index = NegIndexPanel {
            a: ea.negative_index(sigma, j0),
            b: eb.negative_index(sigma, j0),
            phi: ephi.negative_index(sigma, j0),
            u: eu.negative_index(sigma, j0),
        };
        let fields = [&sp.phi, &sp.u.x, &sp.u.y];
        Ok(DiagnosticsRecord {
            t: state.t,
            l2_phi: phi.l2_norm(),
            l2_u: state.u.l2_norm(),
            l2_a: state.a.l2_norm(),
            l2_b: state.b.l2_norm(),
            lyapunov: lyapunov_functional(&besov),
            besov,
            x_parts,
            lk_table,
            neg_index,
            totals: conservation_report(state),
            decay_l2: homogeneous_l2(&fields, 0.0),
            decay_gamma1: homogeneous_l2(&fields, self.cfg.gamma1),
            x_t: 0.0,
        })
    }

    fn lk_spectrum(&self, phi: &Spectrum, d: &Spectrum, j: i32) -> Result<f64> {
        if j > self.cfg.j0 {
            return Err(Error::InvalidParameter(format!(
                "block {j} is above the low-frequency threshold j0 = {}",
                self.cfg.j0
            )));
        }
        Ok(block_energy_form(&self.lp, phi, d, j, self.cfg.j0))
    }

    /// `L²ₖ` of block `j <= j0` for a pair `(φ, d)`.
    pub fn energy_functional_lk(&self, phi: &ScalarField, d: &ScalarField, j: i32) -> Result<f64> {
        self.lk_spectrum(&phi.spectrum(), &d.spectrum(), j)
    }

    pub fn negative_index_panel(&self, state: &PerturbationState, phi: &ScalarField) -> Result<NegIndexPanel> {
        negative_index_panel(&self.lp, state, phi, self.cfg.sigma, self.cfg.j0)
    }
}

fn block_energy_form(lp: &LittlewoodPaley, phi: &Spectrum, d: &Spectrum, j: i32, j0: i32) -> f64 {
    let grid = lp.grid();
    let area = grid.area();
    let (mut pp, mut dd, mut cross, mut lp2) = (0.0, 0.0, 0.0, 0.0);
    for idx in 0..grid.len() {
        let w = lp.block_weight(idx, j) * lp.part_weight(idx, Part::Low(j0));
        if w == 0.0 {
            continue;
        }
        let k = grid.kmag()[idx];
        let (p, q) = (phi.coeffs()[idx] * w, d.coeffs()[idx] * w);
        pp += p.norm_sqr();
        dd += q.norm_sqr();
        cross += (q.conj() * p).re * k;
        lp2 += p.norm_sqr() * k * k;
    }
    area * (3.0 * pp + 9.0 * dd - cross + 2.0 / 3.0 * lp2)
}

/// `L²ₖ` for every block `j_min <= j <= j0` in one pass.
fn lk_table_spectrum(lp: &LittlewoodPaley, phi: &Spectrum, d: &Spectrum, j0: i32) -> Vec<(i32, f64)> {
    let grid = lp.grid();
    let (j_min, j_max) = lp.j_range();
    if j0 < j_min {
        return Vec::new();
    }
    let mut sums = vec![[0.0; 4]; (j0 - j_min + 1) as usize];
    for idx in 0..grid.len() {
        let Some(blocks) = lp.mode_blocks(idx) else {
            continue;
        };
        let pw = lp.part_weight(idx, Part::Low(j0));
        if pw == 0.0 {
            continue;
        }
        let k = grid.kmag()[idx];
        for (j, wj) in blocks {
            if j < j_min || j > j0.min(j_max) || wj == 0.0 {
                continue;
            }
            let w = wj * pw;
            let (p, q) = (phi.coeffs()[idx] * w, d.coeffs()[idx] * w);
            let acc = &mut sums[(j - j_min) as usize];
            acc[0] += p.norm_sqr();
            acc[1] += q.norm_sqr();
            acc[2] += (q.conj() * p).re * k;
            acc[3] += p.norm_sqr() * k * k;
        }
    }
    let area = grid.area();
    sums.iter()
        .enumerate()
        .map(|(i, [pp, dd, cross, lp2])| {
            (j_min + i as i32, area * (3.0 * pp + 9.0 * dd - cross + 2.0 / 3.0 * lp2))
        })
        .collect()
}

/// `L²ₖ = 3‖φₖ‖² + 9‖dₖ‖² - ⟨dₖ, Λφₖ⟩ + (2/3)‖Λφₖ‖²` with `zₖ = Δ̇ⱼ(zℓ)`,
/// `j <= j0`.
pub fn energy_functional_lk(
    lp: &LittlewoodPaley,
    phi: &ScalarField,
    d: &ScalarField,
    j: i32,
    j0: i32,
) -> Result<f64> {
    if j > j0 {
        return Err(Error::InvalidParameter(format!(
            "block {j} is above the low-frequency threshold j0 = {j0}"
        )));
    }
    Ok(block_energy_form(lp, &phi.spectrum(), &d.spectrum(), j, j0))
}

/// `‖(φ, u)‖ℓ_{Ḃ⁰} + ‖φ‖ʰ_{Ḃ¹} + ‖u‖ʰ_{Ḃ⁰}`.
pub fn lyapunov_functional(panel: &BesovPanel) -> f64 {
    panel.low_phi_u_b0 + panel.high_phi_b1 + panel.high_u_b0
}

/// `sqrt(Σ_{ξ≠0} |ξ|^{2γ}|f̂(ξ)|²)·L` summed over the components.
pub fn homogeneous_l2(components: &[&Spectrum], gamma: f64) -> f64 {
    let Some(first) = components.first() else {
        return 0.0;
    };
    let grid = first.grid();
    let mut acc = 0.0;
    for idx in 0..grid.len() {
        let k = grid.kmag()[idx];
        if k == 0.0 {
            continue;
        }
        let amp: f64 = components.iter().map(|c| c.coeffs()[idx].norm_sqr()).sum();
        if amp > 0.0 {
            acc += if gamma == 0.0 { amp } else { k.powf(2.0 * gamma) * amp };
        }
    }
    (acc * grid.area()).sqrt()
}

pub fn conservation_report(state: &PerturbationState) -> Totals {
    Totals {
        total_a: state.a.integral(),
        total_b: state.b.integral(),
        min_rho: 1.0 + state.a.min(),
    }
}

pub fn negative_index_panel(
    lp: &LittlewoodPaley,
    state: &PerturbationState,
    phi: &ScalarField,
    sigma: f64,
    j0: i32,
) -> Result<NegIndexPanel> {
    let us = state.u.spectrum();
    Ok(NegIndexPanel {
        a: lp.negative_index_seminorm(&state.a, sigma, j0)?,
        b: lp.negative_index_seminorm(&state.b, sigma, j0)?,
        phi: lp.negative_index_seminorm(phi, sigma, j0)?,
        u: lp.negative_index_seminorm_spectrum(&[&us.x, &us.y], sigma, j0)?,
    })
}

/// Running `𝒳(t)`: component-wise running maxima of the sup parts plus
/// trapezoid integrals of the time-integrated parts.
#[derive(Debug, Clone, Default)]
pub struct SolutionNormTracker {
    sups: [f64; 3],
    integrals: [f64; 3],
    last: Option<(f64, [f64; 3])>,
}

impl SolutionNormTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds in the parts at time `t` and returns `𝒳(t)`.
    pub fn push(&mut self, t: f64, parts: &SolutionNormParts) -> f64 {
        for (s, v) in self.sups.iter_mut().zip(parts.sups()) {
            *s = s.max(v);
        }
        let now = parts.integrands();
        if let Some((t_prev, prev)) = self.last {
            let h = t - t_prev;
            for k in 0..3 {
                self.integrals[k] += 0.5 * h * (prev[k] + now[k]);
            }
        }
        self.last = Some((t, now));
        self.value()
    }

    pub fn value(&self) -> f64 {
        self.sups.iter().sum::<f64>() + self.integrals.iter().sum::<f64>()
    }

    pub fn sup_components(&self) -> [f64; 3] {
        self.sups
    }

    pub fn integral_components(&self) -> [f64; 3] {
        self.integrals
    }

    /// Fills `record.x_t`.
    pub fn track(&mut self, record: &mut DiagnosticsRecord) {
        record.x_t = self.push(record.t, &record.x_parts);
    }
}

/// `𝒳` over a record history (0 for an empty history).
pub fn solution_norm_x(history: &[DiagnosticsRecord]) -> f64 {
    let mut tracker = SolutionNormTracker::new();
    for r in history {
        tracker.push(r.t, &r.x_parts);
    }
    tracker.value()
}

/// Least-squares power-law fit `value ≈ C(1+t)^exponent`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub quantity: String,
    pub window: (f64, f64),
    pub exponent: f64,
    pub r_squared: f64,
    pub predicted: Option<f64>,
    pub samples: usize,
}

impl DecayFit {
    /// `|exponent - predicted| <= tol` and `r² >= min_r2`.
    pub fn within(&self, tol: f64, min_r2: f64) -> bool {
        match self.predicted {
            Some(p) => (self.exponent - p).abs() <= tol && self.r_squared >= min_r2,
            None => false,
        }
    }
}

pub const MIN_FIT_SAMPLES: usize = 20;

/// Fits the slope of `log(value)` against `log(1 + t)` over samples with
/// `t` in the closed window.
pub fn fit_decay_exponent(
    quantity: &str,
    series: &[(f64, f64)],
    window: (f64, f64),
    predicted: Option<f64>,
) -> Result<DecayFit> {
    let (t0, t1) = window;
    if !(t1 > t0 && t0 >= 0.0) {
        return Err(Error::Fit(format!("window [{t0}, {t1}] must satisfy t1 > t0 >= 0")));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= t0 && *t <= t1)
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{quantity}: {} samples in [{t0}, {t1}], need at least {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!(
            "{quantity}: non-positive value {v} at t = {t} (noise floor reached?)"
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| t.ln_1p()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit(format!("{quantity}: all samples share one time")));
    }
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        quantity: quantity.to_string(),
        window,
        exponent: slope,
        r_squared,
        predicted,
        samples: pts.len(),
    })
}

/// Predicted exponent `-(γ₁ + σ)/2` of `‖Λ^{γ₁}(φ, u)‖_{L²}`.
pub fn predicted_decay_exponent(gamma1: f64, sigma: f64) -> f64 {
    -(gamma1 + sigma) / 2.0
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::linear::evolve_linear_exact;
    use crate::spectral::{random_spectrum, VectorField};
    use crate::state::compute_d;

    fn diag(n: usize, l: f64) -> Diagnostics {
        Diagnostics::new(SpectralGrid::new(n, l).unwrap(), PhysicalParams::default(), DiagnosticsConfig::default())
            .unwrap()
    }

    #[test]
    fn equilibrium_record() {
        let d = diag(32, 2.0 * PI);
        let g = d.lp().grid().clone();
        let r = d.record(&PerturbationState::equilibrium(&g)).unwrap();
        assert_eq!(r.lyapunov, 0.0);
        assert_eq!(r.neg_index, NegIndexPanel::default());
        assert_eq!(r.totals, Totals { total_a: 0.0, total_b: 0.0, min_rho: 1.0 });
        assert!(r.lk_table.iter().all(|(_, v)| *v == 0.0));
        assert!(r.all_finite());
    }

    #[test]
    fn lk_single_block_examples() {
        // mode |ξ| = 1.4: φ_0 weight 1, only block 0
        let d = diag(64, 2.0 * PI * 5.0);
        let g = d.lp().grid().clone();
        let m = 7.0; // |ξ| = 7/5
        let k = m / 5.0;
        let dfield = ScalarField::from_fn(&g, |x, _| (k * x).cos());
        let zero = ScalarField::zeros(&g);
        let norm2 = dfield.l2_norm().powi(2);
        let lk = d.energy_functional_lk(&zero, &dfield, 0).unwrap();
        assert!((lk - 9.0 * norm2).abs() < 1e-12 * lk);

        let lk = d.energy_functional_lk(&dfield, &zero, 0).unwrap();
        let expected = (3.0 + 2.0 / 3.0 * k * k) * norm2;
        assert!((lk - expected).abs() < 1e-12 * lk);
        assert!(d.energy_functional_lk(&dfield, &zero, 1).is_err());
    }

    #[test]
    fn lk_equivalence_and_positivity() {
        let d = diag(32, 2.0 * PI * 8.0);
        let g = d.lp().grid().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (j_min, _) = d.lp().j_range();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for _ in 0..200 {
            let phi = random_spectrum(&g, &mut rng, 12);
            let dd = random_spectrum(&g, &mut rng, 12);
            let j = rng.gen_range(j_min..=0);
            let lk = block_energy_form(d.lp(), &phi, &dd, j, 0);
            let w = |idx: usize| d.lp().block_weight(idx, j) * d.lp().part_weight(idx, Part::Low(0));
            let pf = phi.map_modes(|idx, c| c * w(idx));
            let df = dd.map_modes(|idx, c| c * w(idx));
            let base = pf.l2_norm().powi(2) + df.l2_norm().powi(2);
            if base == 0.0 {
                continue;
            }
            assert!(lk > 0.0);
            lo = lo.min(lk / base);
            hi = hi.max(lk / base);
        }
        assert!(lo > 0.0 && hi <= 20.0, "constants {lo} {hi}");
    }

    #[test]
    fn lk_decays_on_linear_runs() {
        let d = diag(32, 64.0);
        let g = d.lp().grid().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = || random_spectrum(&g, &mut rng, 10).to_field().scaled(1e-4);
        let s0 = PerturbationState::new(f(), VectorField::new(f(), f()).unwrap(), f(), 0.0).unwrap();
        let t = 40.0;
        let s1 = evolve_linear_exact(&s0, t, &PhysicalParams::default()).unwrap();
        let p = PhysicalParams::default();
        let lin_phi = |s: &PerturbationState| s.a.scaled(p.pressure_slope()).add(&s.b).unwrap();
        let (j_min, _) = d.lp().j_range();
        for j in j_min..=-2 {
            let l0 = d.energy_functional_lk(&lin_phi(&s0), &compute_d(&s0.u), j).unwrap();
            let l1 = d.energy_functional_lk(&lin_phi(&s1), &compute_d(&s1.u), j).unwrap();
            if l0 == 0.0 {
                continue;
            }
            let c = -(l1.sqrt() / l0.sqrt()).ln() / ((2.0 * j as f64).exp2() * t);
            assert!(c > 0.05, "block {j}: c = {c}");
        }
    }

    #[test]
    fn tracker_examples() {
        assert_eq!(solution_norm_x(&[]), 0.0);
        let d = diag(32, 2.0 * PI * 4.0);
        let g = d.lp().grid().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut f = || random_spectrum(&g, &mut rng, 10).to_field().scaled(1e-3);
        let s = PerturbationState::new(f(), VectorField::new(f(), f()).unwrap(), f(), 0.0).unwrap();
        let r = d.record(&s).unwrap();
        let x = solution_norm_x(std::slice::from_ref(&r));
        assert!((x - r.x_parts.sup_part()).abs() < 1e-15 * x);

        let mut tracker = SolutionNormTracker::new();
        let mut prev = [0.0; 3];
        for (i, t) in [0.0, 0.5, 1.0, 2.0].iter().enumerate() {
            let mut parts = r.x_parts;
            parts.low_a_qu_b_b0 *= 1.0 + 0.3 * ((i as f64) * 2.0).sin();
            tracker.push(*t, &parts);
            let sups = tracker.sup_components();
            assert!(sups.iter().zip(prev).all(|(s, p)| *s >= p));
            prev = sups;
        }
        // constant integrands: integral = value · duration
        let ints = tracker.integral_components();
        assert!((ints[1] - 2.0 * r.x_parts.high_phi_b1).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_low_frequency_only() {
        let d = diag(64, 2.0 * PI * 16.0);
        let g = d.lp().grid().clone();
        // |ξ| = 2/16 sits in blocks <= -2, away from the high part
        let a = ScalarField::from_fn(&g, |x, y| 1e-3 * (2.0 * x / 16.0 + y / 16.0).cos());
        let s = PerturbationState::new(a.clone(), VectorField::new(a.scaled(0.5), a.clone()).unwrap(), a, 0.0).unwrap();
        let r = d.record(&s).unwrap();
        let low = r.besov.low_phi_u_b0;
        assert!(r.besov.high_phi_b1 < 1e-12 * low);
        assert!(r.besov.high_u_b0 < 1e-12 * low);
        assert!((r.lyapunov - low).abs() < 1e-12 * low);
    }

    #[test]
    fn fit_examples() {
        let ts: Vec<f64> = (0..50).map(|i| 10.0 + 4.0 * i as f64).collect();
        let s: Vec<(f64, f64)> = ts.iter().map(|&t| (t, (1.0 + t).powf(-0.5))).collect();
        let f = fit_decay_exponent("x", &s, (10.0, 200.0), Some(-0.5)).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.within(1e-9, 0.99));

        let c: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 3.0)).collect();
        let f = fit_decay_exponent("c", &c, (10.0, 200.0), None).unwrap();
        assert!(f.exponent.abs() < 1e-10);

        assert!(fit_decay_exponent("x", &s[..10], (10.0, 200.0), None).is_err());
        let mut bad = s.clone();
        bad[5].1 = 0.0;
        assert!(fit_decay_exponent("x", &bad, (10.0, 200.0), None).is_err());
        assert!(fit_decay_exponent("x", &s, (5.0, 5.0), None).is_err());
    }

    #[test]
    fn heat_reference_fit() {
        // exact heat flow from a flat low-frequency spectrum (σ = 1) on L = 256
        let g = SpectralGrid::new(256, 256.0).unwrap();
        let mut amp2 = Vec::new();
        for idx in 0..g.len() {
            let k = g.kmag()[idx];
            if k > 0.0 {
                amp2.push((k, (-(k / 1.0).powi(2) * 2.0).exp()));
            }
        }
        let series: Vec<(f64, f64)> = (0..=95)
            .map(|i| {
                let t = 10.0 + 2.0 * i as f64;
                let e: f64 = amp2.iter().map(|(k, a)| a * (-2.0 * k * k * t).exp()).sum();
                (t, e.sqrt())
            })
            .collect();
        let f = fit_decay_exponent("heat", &series, (10.0, 200.0), Some(-0.5)).unwrap();
        assert!(f.within(0.1, 0.95), "{f:?}");
    }

    #[test]
    fn conservation_examples() {
        let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
        let mut s = PerturbationState::equilibrium(&g);
        assert_eq!(conservation_report(&s), Totals { total_a: 0.0, total_b: 0.0, min_rho: 1.0 });
        s.a = ScalarField::constant(&g, 0.01);
        let tot = conservation_report(&s);
        assert!((tot.total_a - 0.01 * g.area()).abs() < 1e-14);
        assert!((tot.min_rho - 1.01).abs() < 1e-15);
    }

    #[test]
    fn panel_translation_invariant() {
        let d = diag(32, 2.0 * PI * 8.0);
        let g = d.lp().grid().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut f = || random_spectrum(&g, &mut rng, 10).to_field().scaled(1e-2);
        let s = PerturbationState::new(f(), VectorField::new(f(), f()).unwrap(), f(), 0.0).unwrap();
        let phi = compute_phi(&s, &PhysicalParams::default());
        let p0 = d.negative_index_panel(&s, &phi).unwrap();
        let sh = s.shifted(5, 11);
        let p1 = d.negative_index_panel(&sh, &phi.shifted(5, 11)).unwrap();
        for ((_, x), (_, y)) in p0.values().iter().zip(p1.values()) {
            assert!((x - y).abs() <= 1e-10 * x);
        }
        assert!(p0.values().iter().all(|(_, v)| *v > 0.0));
    }

    #[test]
    fn homogeneous_l2_matches_parseval() {
        let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_spectrum(&g, &mut rng, 6);
        assert!((homogeneous_l2(&[&f], 0.0) - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
        let single = ScalarField::from_fn(&g, |x, _| (4.0 * x).sin()).spectrum();
        let expected = single.l2_norm() * 4f64.powf(-0.5);
        assert!((homogeneous_l2(&[&single], -0.5) - expected).abs() < 1e-12);
    }

    #[test]
    fn record_matches_direct_norms() {
        let cfg = DiagnosticsConfig { j0: 1, ..DiagnosticsConfig::default() };
        let g = SpectralGrid::new(32, 16.0 * PI).unwrap();
        let d = Diagnostics::new(g.clone(), PhysicalParams::default(), cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut f = || random_spectrum(&g, &mut rng, 12).to_field().scaled(1e-2);
        let s = PerturbationState::new(f(), VectorField::new(f(), f()).unwrap(), f(), 0.0).unwrap();
        let r = d.record(&s).unwrap();
        let phi = compute_phi(&s, &PhysicalParams::default());
        let (ps, us) = (phi.spectrum(), s.u.spectrum());
        let u = [&us.x, &us.y];
        let lp = d.lp();
        let close = |x: f64, y: f64| assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{x} vs {y}");
        close(
            r.besov.low_phi_u_b0,
            lp.besov_norm_l2(&[&ps], 0.0, 1.0, Part::Low(1)) + lp.besov_norm_l2(&u, 0.0, 1.0, Part::Low(1)),
        );
        close(r.besov.high_phi_b1, lp.besov_norm_l2(&[&ps], 1.0, 1.0, Part::High(1)));
        close(r.besov.high_u_b2, lp.besov_norm_l2(&u, 2.0, 1.0, Part::High(1)));
        let neg = d.negative_index_panel(&s, &phi).unwrap();
        for ((_, x), (_, y)) in r.neg_index.values().iter().zip(neg.values()) {
            close(*x, y);
        }
        let dd = compute_d(&s.u);
        assert!(r.lk_table.len() > 2);
        for (j, v) in &r.lk_table {
            close(*v, d.energy_functional_lk(&phi, &dd, *j).unwrap());
        }
    }
}
