//! Fourier-multiplier operators on the periodic box.
//!
//! Each operator has a coefficient-space form (`*_spectrum`) used by the
//! solver and a sample-space convenience wrapper. Homogeneous multipliers
//! (`Λ^s` with `s < 0`, `Δ⁻¹`) annihilate the zero mode.

use num_complex::Complex64;

use super::field::{ScalarField, Spectrum, VectorField, VectorSpectrum};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative tolerance for the mean-free precondition.
pub const MEAN_FREE_TOL: f64 = 1e-10;

pub fn gradient_spectrum(f: &Spectrum) -> VectorSpectrum {
    let g = f.grid().clone();
    let x = f.map_modes(|idx, c| I * g.kx()[idx] * c);
    let y = f.map_modes(|idx, c| I * g.ky()[idx] * c);
    VectorSpectrum { x, y }
}

pub fn divergence_spectrum(v: &VectorSpectrum) -> Spectrum {
    let g = v.grid().clone();
    let vy = v.y.coeffs();
    v.x.map_modes(|idx, c| I * (g.kx()[idx] * c + g.ky()[idx] * vy[idx]))
}

/// Spectral Laplacian, coefficients times `-|ξ|²`.
pub fn laplacian_spectrum(f: &Spectrum) -> Spectrum {
    let g = f.grid().clone();
    f.map_modes(|idx, c| c * -(g.kmag()[idx] * g.kmag()[idx]))
}

/// `Λ^s`: coefficients times `|ξ|^s`, zero mode sent to zero for every `s`.
pub fn fractional_laplacian_spectrum(f: &Spectrum, s: f64) -> Spectrum {
    let g = f.grid().clone();
    f.map_modes(|idx, c| {
        let k = g.kmag()[idx];
        if k == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            c * k.powf(s)
        }
    })
}

/// `Δ⁻¹`: coefficients divided by `-|ξ|²`, zero mode sent to zero.
pub fn inverse_laplacian_spectrum(f: &Spectrum) -> Spectrum {
    let g = f.grid().clone();
    f.map_modes(|idx, c| {
        let k = g.kmag()[idx];
        if k == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            -c / (k * k)
        }
    })
}

/// Helmholtz split `v = Pv + Qv` with `Q = ∇Δ⁻¹div`.
///
/// Modes with vanishing resolved wavevector (including the zero mode) go
/// wholly to the solenoidal part.
pub fn helmholtz_spectrum(v: &VectorSpectrum) -> (VectorSpectrum, VectorSpectrum) {
    let g = v.grid().clone();
    let len = g.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut px = Vec::with_capacity(len);
    let mut py = Vec::with_capacity(len);
    let mut qx = Vec::with_capacity(len);
    let mut qy = Vec::with_capacity(len);
    for idx in 0..len {
        let (kx, ky) = (g.kx()[idx], g.ky()[idx]);
        let k2 = kx * kx + ky * ky;
        let (ux, uy) = (v.x.coeffs()[idx], v.y.coeffs()[idx]);
        if k2 == 0.0 {
            px.push(ux);
            py.push(uy);
            qx.push(zero);
            qy.push(zero);
        } else {
            let proj = (ux * kx + uy * ky) / k2;
            let (cx, cy) = (proj * kx, proj * ky);
            qx.push(cx);
            qy.push(cy);
            px.push(ux - cx);
            py.push(uy - cy);
        }
    }
    let mk = |c| Spectrum::new(g.clone(), c).expect("length matches grid");
    (
        VectorSpectrum {
            x: mk(px),
            y: mk(py),
        },
        VectorSpectrum {
            x: mk(qx),
            y: mk(qy),
        },
    )
}

/// Zero every coefficient outside the 2/3-rule mask.
pub fn dealias_in_place(f: &mut Spectrum) {
    let g = f.grid().clone();
    for (c, &keep) in f.coeffs_mut().iter_mut().zip(g.dealias_mask()) {
        if !keep {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

pub fn dealias_spectrum(f: &Spectrum) -> Spectrum {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

/// Checks the mean-free precondition: `|f̂(0)|·L <= tol·‖f‖_{L²}`.
pub fn check_mean_free(f: &Spectrum) -> Result<()> {
    let zero_mode = f.zero_mode().norm() * f.grid().box_length();
    let tolerance = MEAN_FREE_TOL * f.l2_norm();
    if zero_mode > tolerance {
        Err(Error::NotMeanFree {
            zero_mode,
            tolerance,
        })
    } else {
        Ok(())
    }
}

/// Spectral gradient `∇f`.
pub fn gradient(f: &ScalarField) -> VectorField {
    gradient_spectrum(&f.spectrum()).to_field()
}

/// Spectral divergence `div v`.
pub fn divergence(v: &VectorField) -> ScalarField {
    divergence_spectrum(&v.spectrum()).to_field()
}

/// Spectral Laplacian `Δf`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    laplacian_spectrum(&f.spectrum()).to_field()
}

/// Scalar curl `∂₁v₂ - ∂₂v₁`.
pub fn curl(v: &VectorField) -> ScalarField {
    let s = v.spectrum();
    let g = v.grid().clone();
    let sy = s.y.coeffs().to_vec();
    s.x
        .map_modes(|idx, c| I * (g.kx()[idx] * sy[idx] - g.ky()[idx] * c))
        .to_field()
}

/// `Λ^s f = F⁻¹(|ξ|^s F f)`; negative `s` requires a mean-free input.
pub fn fractional_laplacian(f: &ScalarField, s: f64) -> Result<ScalarField> {
    let spec = f.spectrum();
    if s < 0.0 {
        check_mean_free(&spec)?;
    }
    Ok(fractional_laplacian_spectrum(&spec, s).to_field())
}

/// `Δ⁻¹f` for mean-free `f`.
pub fn inverse_laplacian(f: &ScalarField) -> Result<ScalarField> {
    let spec = f.spectrum();
    check_mean_free(&spec)?;
    Ok(inverse_laplacian_spectrum(&spec).to_field())
}

/// Returns `(Pv, Qv)`: the divergence-free and potential parts of `v`.
pub fn helmholtz_project(v: &VectorField) -> (VectorField, VectorField) {
    let (p, q) = helmholtz_spectrum(&v.spectrum());
    (p.to_field(), q.to_field())
}

pub fn dealias(f: &ScalarField) -> ScalarField {
    dealias_spectrum(&f.spectrum()).to_field()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spectral::{random_spectrum, SpectralGrid};

    fn grid() -> Arc<SpectralGrid> {
        SpectralGrid::new(32, 2.0 * PI).unwrap()
    }

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn gradient_examples() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        let grad = gradient(&f);
        assert!(max_diff(grad.x(), &ScalarField::from_fn(&g, |x, _| x.cos())) < 1e-12);
        assert!(grad.y().max_abs() < 1e-12);

        let c = ScalarField::constant(&g, 3.5);
        let grad = gradient(&c);
        assert!(grad.x().max_abs() < 1e-12 && grad.y().max_abs() < 1e-12);

        let f = ScalarField::from_fn(&g, |x, y| (2.0 * x + 3.0 * y).sin());
        let grad = gradient(&f);
        let ex = ScalarField::from_fn(&g, |x, y| 2.0 * (2.0 * x + 3.0 * y).cos());
        let ey = ScalarField::from_fn(&g, |x, y| 3.0 * (2.0 * x + 3.0 * y).cos());
        assert!(max_diff(grad.x(), &ex) < 1e-11);
        assert!(max_diff(grad.y(), &ey) < 1e-11);
    }

    #[test]
    fn divergence_examples() {
        let g = grid();
        let v = VectorField::new(
            ScalarField::from_fn(&g, |x, _| x.cos()),
            ScalarField::zeros(&g),
        )
        .unwrap();
        let d = divergence(&v);
        assert!(max_diff(&d, &ScalarField::from_fn(&g, |x, _| -x.sin())) < 1e-12);

        let f = ScalarField::from_fn(&g, |x, y| (x + 2.0 * y).cos() * (3.0 * y).sin());
        let lap = laplacian(&f);
        let dg = divergence(&gradient(&f));
        assert!(max_diff(&lap, &dg) < 1e-11);

        // stream-function form is divergence free
        let psi = ScalarField::from_fn(&g, |x, y| (x - y).sin() + (2.0 * y).cos());
        let gp = gradient(&psi);
        let v = VectorField::new(gp.y().scaled(-1.0), gp.x().clone()).unwrap();
        assert!(divergence(&v).max_abs() < 1e-12);
    }

    #[test]
    fn fractional_laplacian_examples() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        assert!(max_diff(&fractional_laplacian(&f, 2.0).unwrap(), &f) < 1e-12);
        assert!(max_diff(&fractional_laplacian(&f, 0.0).unwrap(), &f) < 1e-12);
        let f2 = ScalarField::from_fn(&g, |x, _| (2.0 * x).sin());
        let half = ScalarField::from_fn(&g, |x, _| 0.5 * (2.0 * x).sin());
        assert!(max_diff(&fractional_laplacian(&f2, -1.0).unwrap(), &half) < 1e-12);

        let shifted = f.map(|v| v + 1.0);
        assert!(matches!(
            fractional_laplacian(&shifted, -0.5),
            Err(Error::NotMeanFree { .. })
        ));
        // non-negative powers kill the mean silently
        let out = fractional_laplacian(&shifted, 1.0).unwrap();
        assert!(out.mean().abs() < 1e-14);
    }

    #[test]
    fn inverse_laplacian_examples() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        assert!(max_diff(&inverse_laplacian(&f).unwrap(), &f.scaled(-1.0)) < 1e-12);

        let f = ScalarField::from_fn(&g, |x, y| (2.0 * x + 2.0 * y).sin());
        let expected = f.scaled(-1.0 / 8.0);
        assert!(max_diff(&inverse_laplacian(&f).unwrap(), &expected) < 1e-12);

        let gfun = ScalarField::from_fn(&g, |x, y| (x - 3.0 * y).cos() + (4.0 * x).sin());
        let back = inverse_laplacian(&laplacian(&gfun)).unwrap();
        assert!(max_diff(&back, &gfun) < 1e-11);

        assert!(inverse_laplacian(&ScalarField::constant(&g, 1.0)).is_err());
    }

    #[test]
    fn helmholtz_examples() {
        let g = grid();
        let psi = ScalarField::from_fn(&g, |x, y| (x + y).sin() * (2.0 * y).cos());
        let grad = gradient(&psi);
        let (p, q) = helmholtz_project(&grad);
        assert!(p.l2_norm() < 1e-12 * grad.l2_norm());
        assert!(q.sub(&grad).unwrap().l2_norm() < 1e-12 * grad.l2_norm());

        let rot = VectorField::new(grad.y().scaled(-1.0), grad.x().clone()).unwrap();
        let (p, q) = helmholtz_project(&rot);
        assert!(q.l2_norm() < 1e-12 * rot.l2_norm());
        assert!(p.sub(&rot).unwrap().l2_norm() < 1e-12 * rot.l2_norm());
    }

    #[test]
    fn helmholtz_random_orthogonal_split() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v = VectorSpectrum::new(
                random_spectrum(&g, &mut rng, 12),
                random_spectrum(&g, &mut rng, 12),
            )
            .unwrap()
            .to_field();
            let (p, q) = helmholtz_project(&v);
            let norm = v.l2_norm();
            assert!(p.add(&q).unwrap().sub(&v).unwrap().l2_norm() < 1e-12 * norm);
            assert!(p.inner(&q).unwrap().abs() < 1e-10 * norm * norm);
            assert!(divergence(&p).l2_norm() < 1e-10 * norm);
            assert!(curl(&q).l2_norm() < 1e-10 * norm);
        }
    }

    #[test]
    fn dealias_examples() {
        let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (3.0 * x).cos() + (2.0 * y - x).sin());
        assert!(max_diff(&dealias(&f), &f) < 1e-13);
        let nyq = ScalarField::from_fn(&g, |x, _| (8.0 * x).cos());
        assert!(dealias(&nyq).max_abs() < 1e-13);
        let rough = ScalarField::from_fn(&g, |x, y| (7.0 * x).cos() * (y * 6.0).sin() + x);
        let once = dealias(&rough);
        assert!(max_diff(&dealias(&once), &once) < 1e-13);
    }

    #[test]
    fn fractional_laplacian_inverts() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in [-1.5, -0.5, 0.7, 2.0] {
            let f = random_spectrum(&g, &mut rng, 10).to_field();
            let there = fractional_laplacian(&f, s).unwrap();
            let back = fractional_laplacian(&there, -s).unwrap();
            assert!(back.sub(&f).unwrap().l2_norm() < 1e-10 * f.l2_norm());
        }
    }

    #[test]
    fn gradient_divergence_adjoint() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let f = random_spectrum(&g, &mut rng, 15).to_field();
            let v = VectorSpectrum::new(
                random_spectrum(&g, &mut rng, 15),
                random_spectrum(&g, &mut rng, 15),
            )
            .unwrap()
            .to_field();
            let lhs = gradient(&f).inner(&v).unwrap();
            let rhs = -f.inner(&divergence(&v)).unwrap();
            let scale = f.l2_norm() * v.l2_norm();
            assert!((lhs - rhs).abs() < 1e-10 * scale);
        }
    }
}
