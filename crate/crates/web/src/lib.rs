//! Browser demo: Hankel spectra on the disc and a boundary lens, the
//! truncated Bergman kernel on the diagonal, and the shell weight profile.
//!
//! The exported functions are thin wrappers over [`demo`], which is plain
//! Rust and tested natively.

use wasm_bindgen::prelude::*;

pub mod demo {
    use bergman_core::bergman::{DegreeCap, DEFAULT_THRESHOLD};
    use bergman_core::dbar::shell::shell_weight;
    use bergman_core::hankel::HankelAssembler;
    use bergman_core::symbol::restrict_symbol;
    use bergman_core::{
        bergman_kernel, build_quadrature, gram, orthonormalize, Complex64, Domain, Error, MonomialBasis, Point,
        Result, Symbol,
    };

    pub const MAX_CAP: u32 = 24;
    pub const MAX_RESOLUTION: usize = 256;

    fn check(cap: u32, resolution: usize) -> Result<()> {
        if cap > MAX_CAP || !(16..=MAX_RESOLUTION).contains(&resolution) {
            return Err(Error::InvalidInput(format!(
                "cap must be <= {MAX_CAP} and resolution in 16..={MAX_RESOLUTION}"
            )));
        }
        Ok(())
    }

    /// Singular values of the Hankel operator with symbol `symbol` on the
    /// unit disc, or on its lens `B(1, lens_radius)` when `lens_radius > 0`.
    pub fn hankel_spectrum(symbol: &str, cap: u32, resolution: usize, lens_radius: f64) -> Result<Vec<f64>> {
        check(cap, resolution)?;
        if lens_radius.is_nan() || lens_radius >= 2.0 {
            return Err(Error::InvalidInput(format!("lens radius must be below 2, got {lens_radius}")));
        }
        let symbol = Symbol::parse(symbol)?;
        let disc = Domain::unit_disc();
        let (domain, symbol) = if lens_radius > 0.0 {
            let lens = Domain::lens(disc, Complex64::new(1.0, 0.0), lens_radius)?;
            let restricted = restrict_symbol(&symbol, &lens)?;
            (lens, restricted)
        } else {
            (disc, symbol)
        };
        let rule = build_quadrature(&domain, resolution)?;
        let cap = DegreeCap::Single(cap);
        let assembler = HankelAssembler::new(rule, cap, 2, DEFAULT_THRESHOLD)?;
        Ok(assembler.spectrum(&symbol, cap)?.singular_values)
    }

    /// `K_N(z, z)` on a `grid x grid` raster of `[-1, 1]^2`, row-major from
    /// the top-left; NaN outside the unit disc.
    pub fn kernel_diagonal(cap: u32, grid: usize) -> Result<Vec<f64>> {
        check(cap, 64)?;
        if !(2..=512).contains(&grid) {
            return Err(Error::InvalidInput(format!("grid must be in 2..=512, got {grid}")));
        }
        let disc = Domain::unit_disc();
        let rule = build_quadrature(&disc, 64)?;
        let basis = orthonormalize(&gram(&MonomialBasis::for_domain(&disc, DegreeCap::Single(cap))?, &rule)?, DEFAULT_THRESHOLD)?;
        let step = 2.0 / (grid - 1) as f64;
        let mut out = Vec::with_capacity(grid * grid);
        for row in 0..grid {
            for col in 0..grid {
                let z = Complex64::new(-1.0 + col as f64 * step, 1.0 - row as f64 * step);
                out.push(if z.norm() < 1.0 {
                    let p = Point::C1(z);
                    bergman_kernel(&basis, &p, &p).re
                } else {
                    f64::NAN
                });
            }
        }
        Ok(out)
    }

    /// Triples `(d, psi, eps * hessian)` along a ray from the shell center,
    /// for `d` from 0 to `1.25 r`, followed by the shell thickness `delta`.
    pub fn shell_profile(epsilon: f64, radius: f64, samples: usize) -> Result<Vec<f64>> {
        let w = shell_weight(epsilon, Complex64::new(0.0, 0.0), radius)?;
        let samples = samples.clamp(2, 4096);
        let mut out = Vec::with_capacity(3 * samples + 1);
        for i in 0..samples {
            let d = 1.25 * radius * i as f64 / (samples - 1) as f64;
            let z = Complex64::new(d, 0.0);
            out.extend([d, w.psi(z), epsilon * w.hessian(z)]);
        }
        out.push(w.delta);
        Ok(out)
    }
}

fn js(e: bergman_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = hankelSpectrum)]
pub fn hankel_spectrum(symbol: &str, cap: u32, resolution: u32, lens_radius: f64) -> Result<Vec<f64>, JsError> {
    demo::hankel_spectrum(symbol, cap, resolution as usize, lens_radius).map_err(js)
}

#[wasm_bindgen(js_name = kernelDiagonal)]
pub fn kernel_diagonal(cap: u32, grid: u32) -> Result<Vec<f64>, JsError> {
    demo::kernel_diagonal(cap, grid as usize).map_err(js)
}

#[wasm_bindgen(js_name = shellProfile)]
pub fn shell_profile(epsilon: f64, radius: f64, samples: u32) -> Result<Vec<f64>, JsError> {
    demo::shell_profile(epsilon, radius, samples as usize).map_err(js)
}
