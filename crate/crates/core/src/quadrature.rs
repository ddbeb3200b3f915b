//! Adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 200_000;

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * wk;
        if i % 2 == 1 {
            gauss += pair * WG[i / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<Complex64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(
            "integration bounds must be finite".into(),
        ));
    }
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let width = hi - lo;
    let mut stack = vec![(lo, hi)];
    let mut sum = Complex64::new(0.0, 0.0);
    let mut processed = 0usize;
    while let Some((x0, x1)) = stack.pop() {
        processed += 1;
        if processed > MAX_INTERVALS {
            return Err(Error::Numeric(format!(
                "quadrature on [{lo}, {hi}] did not reach tolerance {abs_tol}"
            )));
        }
        let (est, err) = gk15(f, x0, x1);
        let budget = abs_tol * (x1 - x0) / width;
        let mid = 0.5 * (x0 + x1);
        if err <= budget || mid <= x0 || mid >= x1 {
            sum += est;
        } else {
            stack.push((mid, x1));
            stack.push((x0, mid));
        }
    }
    Ok(sum * sign)
}

/// Like [`integrate`], but first splits `[a, b]` at multiples of `period` so
/// each panel sees at most one oscillation of the integrand.
pub fn integrate_by_periods<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    period: f64,
    abs_tol: f64,
) -> Result<Complex64> {
    if !(period.is_finite() && period > 0.0) || b <= a {
        return integrate(f, a, b, abs_tol);
    }
    let panels = ((b - a) / period).ceil().max(1.0);
    if panels > MAX_INTERVALS as f64 {
        return Err(Error::Numeric(format!(
            "too many oscillation periods ({panels})"
        )));
    }
    let panels = panels as usize;
    let width = b - a;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..panels {
        let x0 = a + k as f64 * period;
        let x1 = if k + 1 == panels {
            b
        } else {
            (a + (k + 1) as f64 * period).min(b)
        };
        if x1 > x0 {
            sum += integrate(f, x0, x1, abs_tol * (x1 - x0) / width)?;
        }
    }
    Ok(sum)
}
