//! Homogeneous Littlewood-Paley decomposition on the periodic lattice.
//!
//! `Δ̇ⱼ` multiplies the coefficient at `ξ` by `φ(2^{-j}|ξ|)` where
//! `φ(r) = χ(r/2) - χ(r)` and `χ` is a smooth radial cutoff equal to one on
//! `r <= 3/4` and zero on `r >= 4/3`. The lattice truncates `j ∈ ℤ` to the
//! finite range of blocks that see at least one resolved mode, so every
//! norm below is a truncated (semi-)norm.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{ScalarField, SpectralGrid, Spectrum};

const CHI_ONE: f64 = 0.75;
const CHI_ZERO: f64 = 4.0 / 3.0;
/// Support of `φ`: `(3/4, 8/3)`.
pub const PHI_SUPPORT: (f64, f64) = (0.75, 8.0 / 3.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionProfile {
    /// `exp(-1/x)` glue across `[3/4, 4/3]`.
    SmoothExponential,
}

/// The radial pair `(χ, φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffPair {
    profile: TransitionProfile,
    fault: Option<f64>,
}

/// `g(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})`, a smooth monotone step
/// from 0 at `x = 0` to 1 at `x = 1`.
fn glue(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

impl CutoffPair {
    pub fn build(profile: TransitionProfile) -> Self {
        CutoffPair {
            profile,
            fault: None,
        }
    }

    /// Fault-injection hook: scales `φ` by `1 + magnitude` on `[1, 2)`,
    /// which breaks the partition of unity. Used to check that the
    /// verification suite catches a corrupted profile.
    pub fn with_injected_fault(mut self, magnitude: f64) -> Self {
        self.fault = Some(magnitude);
        self
    }

    pub fn profile(&self) -> TransitionProfile {
        self.profile
    }

    pub fn chi(&self, r: f64) -> f64 {
        match self.profile {
            TransitionProfile::SmoothExponential => {
                if r <= CHI_ONE {
                    1.0
                } else if r >= CHI_ZERO {
                    0.0
                } else {
                    glue((CHI_ZERO - r) / (CHI_ZERO - CHI_ONE))
                }
            }
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        let v = self.chi(0.5 * r) - self.chi(r);
        match self.fault {
            Some(m) if (1.0..2.0).contains(&r) => v * (1.0 + m),
            _ => v,
        }
    }

    /// Largest `|Σ_{|j|<=40} φ(2^{-j}r) - 1|` over the probe radii, with the
    /// radius where it occurs.
    pub fn partition_defect(&self, radii: impl IntoIterator<Item = f64>) -> (f64, f64) {
        radii
            .into_iter()
            .map(|r| {
                let s: f64 = (-40..=40).map(|j| self.phi(r * (-j as f64).exp2())).sum();
                ((s - 1.0).abs(), r)
            })
            .fold((0.0, f64::NAN), |acc, x| if x.0 > acc.0 { x } else { acc })
    }
}

/// Which part of a field a block norm is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    All,
    /// `z^ℓ = Σ_{j<=j0} Δ̇ⱼz`.
    Low(i32),
    /// `z^h = Σ_{j>=j0-1} Δ̇ⱼz`.
    High(i32),
}

/// Indices of a homogeneous Besov (semi-)norm `Ḃ^s_{p,r}` over a block range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    pub r: f64,
    pub j_min: i32,
    pub j_max: i32,
}

impl BesovSpec {
    pub fn new(lp: &LittlewoodPaley, s: f64, p: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0) || !(r >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Besov indices need p, r >= 1 (got p = {p}, r = {r})"
            )));
        }
        let (j_min, j_max) = lp.j_range();
        Ok(BesovSpec {
            s,
            p,
            r,
            j_min,
            j_max,
        })
    }
}

/// `ℓ^r` aggregation of non-negative terms.
pub fn lr_sum(terms: impl IntoIterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        terms.into_iter().fold(0.0, f64::max)
    } else if r == 1.0 {
        terms.into_iter().sum()
    } else {
        terms.into_iter().map(|t| t.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// Block table for one grid: each resolved mode meets at most two blocks.
#[derive(Debug, Clone)]
pub struct LittlewoodPaley {
    grid: Arc<SpectralGrid>,
    cutoffs: CutoffPair,
    j_min: i32,
    j_max: i32,
    first_block: Vec<i32>,
    weight_first: Vec<f64>,
    weight_second: Vec<f64>,
}

/// Smallest integer `j` with `2^j > x` (`x > 0`).
fn first_block_above(x: f64) -> i32 {
    let mut j = x.log2().floor() as i32;
    while j as f64 > x.log2() {
        j -= 1;
    }
    while (j as f64).exp2() <= x {
        j += 1;
    }
    j
}

impl LittlewoodPaley {
    pub fn new(grid: Arc<SpectralGrid>, cutoffs: CutoffPair) -> Self {
        let (lo, hi) = PHI_SUPPORT;
        let j_min = first_block_above(grid.min_wavenumber() / hi);
        // largest j with lo·2^j < ξ_top
        let j_max = first_block_above(grid.max_wavenumber() / lo) - 1;
        let len = grid.len();
        let mut first_block = vec![i32::MIN; len];
        let mut weight_first = vec![0.0; len];
        let mut weight_second = vec![0.0; len];
        for idx in 0..len {
            let r = grid.kmag()[idx];
            if r == 0.0 {
                continue;
            }
            let j = first_block_above(r / hi);
            first_block[idx] = j;
            weight_first[idx] = cutoffs.phi(r * (-j as f64).exp2());
            weight_second[idx] = cutoffs.phi(r * (-(j + 1) as f64).exp2());
        }
        LittlewoodPaley {
            grid,
            cutoffs,
            j_min,
            j_max,
            first_block,
            weight_first,
            weight_second,
        }
    }

    pub fn with_default_cutoffs(grid: Arc<SpectralGrid>) -> Self {
        Self::new(grid, CutoffPair::build(TransitionProfile::SmoothExponential))
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn cutoffs(&self) -> &CutoffPair {
        &self.cutoffs
    }

    /// Inclusive range of blocks the lattice can populate.
    pub fn j_range(&self) -> (i32, i32) {
        (self.j_min, self.j_max)
    }

    /// `φ(2^{-j}|ξ|)` at a mode.
    pub fn block_weight(&self, idx: usize, j: i32) -> f64 {
        let first = self.first_block[idx];
        if first == i32::MIN || j < self.j_min || j > self.j_max {
            0.0
        } else if j == first {
            self.weight_first[idx]
        } else if j == first + 1 {
            self.weight_second[idx]
        } else {
            0.0
        }
    }

    /// Multiplier of a low/high/all selection at a mode.
    pub fn part_weight(&self, idx: usize, part: Part) -> f64 {
        let first = self.first_block[idx];
        if first == i32::MIN {
            return 0.0;
        }
        let pick = |j: i32| match part {
            Part::All => true,
            Part::Low(j0) => j <= j0,
            Part::High(j0) => j >= j0 - 1,
        };
        let mut w = 0.0;
        for (j, wj) in [(first, self.weight_first[idx]), (first + 1, self.weight_second[idx])] {
            if j >= self.j_min && j <= self.j_max && pick(j) {
                w += wj;
            }
        }
        w
    }

    pub fn dyadic_block_spectrum(&self, f: &Spectrum, j: i32) -> Spectrum {
        f.map_modes(|idx, c| c * self.block_weight(idx, j))
    }

    /// `Δ̇ⱼf`; out-of-range `j` gives the zero field.
    pub fn dyadic_block(&self, f: &ScalarField, j: i32) -> ScalarField {
        self.dyadic_block_spectrum(&f.spectrum(), j).to_field()
    }

    pub fn part_spectrum(&self, f: &Spectrum, part: Part) -> Spectrum {
        f.map_modes(|idx, c| c * self.part_weight(idx, part))
    }

    /// `(f^ℓ, f^h)` with the two-block overlap at `j0 - 1, j0`.
    pub fn low_high_split(&self, f: &ScalarField, j0: i32) -> (ScalarField, ScalarField) {
        let s = f.spectrum();
        (
            self.part_spectrum(&s, Part::Low(j0)).to_field(),
            self.part_spectrum(&s, Part::High(j0)).to_field(),
        )
    }

    /// `‖Δ̇ⱼ(part f)‖²_{L²}` for every block, summed over the given
    /// components (a vector field passes both).
    pub fn block_energies(&self, components: &[&Spectrum], part: Part) -> Vec<f64> {
        let nblocks = (self.j_max - self.j_min + 1) as usize;
        let mut out = vec![0.0; nblocks];
        let area = self.grid.area();
        for idx in 0..self.grid.len() {
            let first = self.first_block[idx];
            if first == i32::MIN {
                continue;
            }
            let amp: f64 = components.iter().map(|s| s.coeffs()[idx].norm_sqr()).sum();
            if amp == 0.0 {
                continue;
            }
            let pw = self.part_weight(idx, part);
            for (j, wj) in [(first, self.weight_first[idx]), (first + 1, self.weight_second[idx])] {
                if j >= self.j_min && j <= self.j_max && wj > 0.0 {
                    let w = wj * pw;
                    out[(j - self.j_min) as usize] += w * w * amp * area;
                }
            }
        }
        out
    }

    /// Block energies of the `Low(j0)`, `High(j0)` and `All` parts in one
    /// pass over the lattice.
    pub fn split_block_energies(&self, components: &[&Spectrum], j0: i32) -> SplitEnergies {
        let nblocks = (self.j_max - self.j_min + 1) as usize;
        let mut low = vec![0.0; nblocks];
        let mut high = vec![0.0; nblocks];
        let mut all = vec![0.0; nblocks];
        let area = self.grid.area();
        for idx in 0..self.grid.len() {
            let first = self.first_block[idx];
            if first == i32::MIN {
                continue;
            }
            let amp: f64 = components.iter().map(|s| s.coeffs()[idx].norm_sqr()).sum();
            if amp == 0.0 {
                continue;
            }
            let (pl, ph, pa) = (
                self.part_weight(idx, Part::Low(j0)),
                self.part_weight(idx, Part::High(j0)),
                self.part_weight(idx, Part::All),
            );
            for (j, wj) in [(first, self.weight_first[idx]), (first + 1, self.weight_second[idx])] {
                if j >= self.j_min && j <= self.j_max && wj > 0.0 {
                    let k = (j - self.j_min) as usize;
                    let e = wj * wj * amp * area;
                    low[k] += pl * pl * e;
                    high[k] += ph * ph * e;
                    all[k] += pa * pa * e;
                }
            }
        }
        SplitEnergies {
            j_min: self.j_min,
            low,
            high,
            all,
        }
    }

    /// The blocks meeting a mode with their weights `(j, φ(2^{-j}|ξ|))`.
    pub fn mode_blocks(&self, idx: usize) -> Option<[(i32, f64); 2]> {
        let first = self.first_block[idx];
        (first != i32::MIN).then(|| [(first, self.weight_first[idx]), (first + 1, self.weight_second[idx])])
    }

    /// `‖Δ̇ⱼ(part f)‖_{L²}` for every block.
    pub fn block_norms(&self, components: &[&Spectrum], part: Part) -> Vec<f64> {
        self.block_energies(components, part)
            .into_iter()
            .map(f64::sqrt)
            .collect()
    }

    /// `Ḃ^s_{2,r}` norm of a (possibly vector) field from its coefficients.
    pub fn besov_norm_l2(&self, components: &[&Spectrum], s: f64, r: f64, part: Part) -> f64 {
        let norms = self.block_norms(components, part);
        lr_sum(
            norms
                .iter()
                .enumerate()
                .map(|(k, n)| ((self.j_min + k as i32) as f64 * s).exp2() * n),
            r,
        )
    }

    /// `‖f‖_{Ḃ^s_{p,r}}`. `p = 2` goes through Parseval; other `p` use the
    /// lattice quadrature of each block in sample space.
    pub fn besov_norm(&self, f: &ScalarField, spec: &BesovSpec) -> f64 {
        self.besov_norm_part(f, spec, Part::All)
    }

    pub fn besov_norm_part(&self, f: &ScalarField, spec: &BesovSpec, part: Part) -> f64 {
        let s = f.spectrum();
        let j_lo = spec.j_min.max(self.j_min);
        let j_hi = spec.j_max.min(self.j_max);
        if spec.p == 2.0 {
            let norms = self.block_norms(&[&s], part);
            return lr_sum(
                (j_lo..=j_hi).map(|j| (j as f64 * spec.s).exp2() * norms[(j - self.j_min) as usize]),
                spec.r,
            );
        }
        let ps = self.part_spectrum(&s, part);
        lr_sum(
            (j_lo..=j_hi).map(|j| {
                let block = self.dyadic_block_spectrum(&ps, j).to_field();
                (j as f64 * spec.s).exp2() * block.lp_norm(spec.p)
            }),
            spec.r,
        )
    }

    /// `sup_{j<=j0} 2^{-jσ}‖Δ̇ⱼf‖_{L²}` over the components.
    pub fn negative_index_seminorm_spectrum(
        &self,
        components: &[&Spectrum],
        sigma: f64,
        j0: i32,
    ) -> Result<f64> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must lie in (0, 1], got {sigma}"
            )));
        }
        let norms = self.block_norms(components, Part::All);
        Ok(norms
            .iter()
            .enumerate()
            .map(|(k, n)| (self.j_min + k as i32, n))
            .filter(|(j, _)| *j <= j0)
            .map(|(j, n)| (-(j as f64) * sigma).exp2() * n)
            .fold(0.0, f64::max))
    }

    pub fn negative_index_seminorm(&self, f: &ScalarField, sigma: f64, j0: i32) -> Result<f64> {
        self.negative_index_seminorm_spectrum(&[&f.spectrum()], sigma, j0)
    }

    /// Per-mode multiplier `Σ_{j0-1<=j<=j0} φ_j`, the doubly-counted overlap.
    pub fn overlap_weight(&self, idx: usize, j0: i32) -> f64 {
        self.block_weight(idx, j0 - 1) + self.block_weight(idx, j0)
    }
}

/// Per-block energies of the three parts of a field at one split index.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEnergies {
    j_min: i32,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub all: Vec<f64>,
}

impl SplitEnergies {
    fn energies(&self, part: Part) -> &[f64] {
        match part {
            Part::Low(_) => &self.low,
            Part::High(_) => &self.high,
            Part::All => &self.all,
        }
    }

    /// `Ḃ^s_{2,r}` norm of the part (the split index is the one the table
    /// was built with).
    pub fn besov(&self, s: f64, r: f64, part: Part) -> f64 {
        lr_sum(
            self.energies(part)
                .iter()
                .enumerate()
                .map(|(k, e)| ((self.j_min + k as i32) as f64 * s).exp2() * e.sqrt()),
            r,
        )
    }

    /// `sup_{j<=j0} 2^{-jσ}‖Δ̇ⱼf‖` of the whole field.
    pub fn negative_index(&self, sigma: f64, j0: i32) -> f64 {
        self.all
            .iter()
            .enumerate()
            .map(|(k, e)| (self.j_min + k as i32, e.sqrt()))
            .filter(|(j, _)| *j <= j0)
            .map(|(j, n)| (-(j as f64) * sigma).exp2() * n)
            .fold(0.0, f64::max)
    }
}

/// Sum of the blocks `Δ̇ⱼf` over the whole lattice range (identity on
/// mean-free band-limited fields).
pub fn block_sum(lp: &LittlewoodPaley, f: &Spectrum) -> Spectrum {
    let (j_min, j_max) = lp.j_range();
    let mut acc = vec![Complex64::new(0.0, 0.0); f.coeffs().len()];
    for j in j_min..=j_max {
        let b = lp.dyadic_block_spectrum(f, j);
        for (a, c) in acc.iter_mut().zip(b.coeffs()) {
            *a += c;
        }
    }
    Spectrum::new(f.grid().clone(), acc).expect("length matches grid")
}
