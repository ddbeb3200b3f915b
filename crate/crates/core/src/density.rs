//! Densities for cut proportions on `(0, 1)`.

use std::f64::consts::{LN_10, LN_2};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mellin::counterexample_schedule;

/// A probability density for the cut proportion `p`.
#[derive(Debug, Clone, PartialEq)]
pub enum CutDensity {
    /// Uniform on `(0, 1)`.
    Uniform,
    /// Constant `heights[k]` on `[breakpoints[k], breakpoints[k + 1])`.
    Piecewise {
        breakpoints: Vec<f64>,
        heights: Vec<f64>,
    },
    /// `ln p` uniform on `[center_log - epsilon, center_log + epsilon]`.
    LogBox { center_log: f64, epsilon: f64 },
}

/// One sampled cut: base-10 logs of the proportion and of its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutDraw {
    pub log10_p: f64,
    pub log10_q: f64,
}

impl CutDensity {
    pub fn piecewise(breakpoints: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != heights.len() + 1 || heights.is_empty() {
            return invalid("piecewise density needs one more breakpoint than heights");
        }
        if breakpoints[0] < 0.0 || *breakpoints.last().unwrap() > 1.0 {
            return invalid("piecewise breakpoints must lie in [0, 1]");
        }
        if breakpoints
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return invalid("piecewise breakpoints must be strictly increasing");
        }
        if heights.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return invalid("piecewise heights must be nonnegative");
        }
        let mass: f64 = breakpoints
            .windows(2)
            .zip(&heights)
            .map(|(w, h)| h * (w[1] - w[0]))
            .sum();
        if (mass - 1.0).abs() > 1e-9 {
            return invalid(format!("piecewise density integrates to {mass}, not 1"));
        }
        Ok(Self::Piecewise {
            breakpoints,
            heights,
        })
    }

    pub fn log_box(center_log: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite() && center_log.is_finite()) {
            return invalid(format!("log-box needs a positive epsilon, got {epsilon}"));
        }
        if center_log + epsilon >= 0.0 {
            return invalid("log-box interval must stay inside (-inf, 0)");
        }
        Ok(Self::LogBox {
            center_log,
            epsilon,
        })
    }

    /// Log-box centred at `ln(1/2)`.
    pub fn log_box_half(epsilon: f64) -> Result<Self> {
        Self::log_box(-LN_2, epsilon)
    }

    /// Density value at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return 0.0;
        }
        match self {
            Self::Uniform => 1.0,
            Self::Piecewise {
                breakpoints,
                heights,
            } => {
                let k = breakpoints.partition_point(|&b| b <= x);
                if k == 0 || k > heights.len() {
                    0.0
                } else {
                    heights[k - 1]
                }
            }
            Self::LogBox {
                center_log,
                epsilon,
            } => {
                let t = x.ln();
                if (t - center_log).abs() <= *epsilon {
                    1.0 / (2.0 * epsilon * x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Draws a cut proportion `p` and returns `log10 p` and `log10 (1 - p)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CutDraw {
        match self {
            Self::Uniform => loop {
                let p: f64 = rng.random();
                if p > 0.0 {
                    return from_linear(p);
                }
            },
            Self::Piecewise {
                breakpoints,
                heights,
            } => loop {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = heights.len() - 1;
                for (i, (w, h)) in breakpoints.windows(2).zip(heights).enumerate() {
                    acc += h * (w[1] - w[0]);
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                let v: f64 = rng.random();
                let p = breakpoints[k] + v * (breakpoints[k + 1] - breakpoints[k]);
                if p > 0.0 && p < 1.0 && heights[k] > 0.0 {
                    return from_linear(p);
                }
            },
            Self::LogBox {
                center_log,
                epsilon,
            } => {
                let u: f64 = rng.random();
                let t = center_log + epsilon * (2.0 * u - 1.0);
                CutDraw {
                    log10_p: t / LN_10,
                    log10_q: (-t.exp_m1()).ln() / LN_10,
                }
            }
        }
    }
}

fn from_linear(p: f64) -> CutDraw {
    CutDraw {
        log10_p: p.log10(),
        log10_q: (-p).ln_1p() / LN_10,
    }
}

/// Density configuration as written in run manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    #[default]
    Uniform,
    Piecewise {
        breakpoints: Vec<f64>,
        heights: Vec<f64>,
    },
    Logbox {
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_log: Option<f64>,
    },
    /// Per-level log-boxes following the counterexample epsilon schedule.
    Counterexample { delta: f64 },
}

impl DensitySpec {
    /// Resolves into the per-level densities for a run with `levels` levels.
    pub fn resolve(&self, levels: usize) -> Result<LevelDensities> {
        let list = match self {
            Self::Uniform => vec![CutDensity::Uniform],
            Self::Piecewise {
                breakpoints,
                heights,
            } => {
                vec![CutDensity::piecewise(breakpoints.clone(), heights.clone())?]
            }
            Self::Logbox {
                epsilon,
                center_log,
            } => {
                vec![CutDensity::log_box(center_log.unwrap_or(-LN_2), *epsilon)?]
            }
            Self::Counterexample { delta } => {
                counterexample_schedule(*delta, levels.max(1))?.densities()?
            }
        };
        LevelDensities::new(list)
    }
}

/// Densities indexed by level (1-based); the last one is reused past the end.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDensities {
    densities: Vec<CutDensity>,
}

impl LevelDensities {
    pub fn new(densities: Vec<CutDensity>) -> Result<Self> {
        if densities.is_empty() {
            return invalid("at least one density is required");
        }
        Ok(Self { densities })
    }

    pub fn single(density: CutDensity) -> Self {
        Self {
            densities: vec![density],
        }
    }

    /// Density for `level` (1-based).
    pub fn at(&self, level: usize) -> &CutDensity {
        let i = level.saturating_sub(1).min(self.densities.len() - 1);
        &self.densities[i]
    }

    pub fn as_slice(&self) -> &[CutDensity] {
        &self.densities
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::rng::unit_rng;
    use num_complex::Complex64;

    fn mass(f: &CutDensity, a: f64, b: f64) -> f64 {
        integrate(&|x| Complex64::new(f.pdf(x), 0.0), a, b, 1e-12)
            .unwrap()
            .re
    }

    #[test]
    fn densities_integrate_to_one() {
        let pw = CutDensity::piecewise(vec![0.0, 0.25, 1.0], vec![2.0, 2.0 / 3.0]).unwrap();
        assert!((mass(&pw, 0.0, 0.25) + mass(&pw, 0.25, 1.0) - 1.0).abs() < 1e-9);
        let lb = CutDensity::log_box_half(0.05).unwrap();
        let (a, b) = ((-LN_2 - 0.05).exp(), (-LN_2 + 0.05).exp());
        assert!((mass(&lb, a, b) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_densities_rejected() {
        assert!(CutDensity::piecewise(vec![0.0, 1.0], vec![0.5]).is_err());
        assert!(CutDensity::piecewise(vec![0.0, 0.5, 0.4], vec![1.0, 1.0]).is_err());
        assert!(CutDensity::piecewise(vec![0.0, 1.0], vec![-1.0]).is_err());
        assert!(CutDensity::log_box(-0.1, 0.2).is_err());
        assert!(CutDensity::log_box_half(0.0).is_err());
    }

    #[test]
    fn samples_stay_in_support() {
        let mut rng = unit_rng(3, 0);
        let lb = CutDensity::log_box_half(0.01).unwrap();
        let pw = CutDensity::piecewise(vec![0.2, 0.4, 0.9], vec![2.5, 1.0]).unwrap();
        for _ in 0..10_000 {
            let d = lb.sample(&mut rng);
            let t = d.log10_p * LN_10;
            assert!((t + LN_2).abs() <= 0.01 + 1e-15);
            let p = 10f64.powf(d.log10_p);
            assert!((p + 10f64.powf(d.log10_q) - 1.0).abs() < 1e-12);
            let d = pw.sample(&mut rng);
            let p = 10f64.powf(d.log10_p);
            assert!((0.2..0.9).contains(&p));
        }
    }

    #[test]
    fn piecewise_sampling_follows_masses() {
        let pw = CutDensity::piecewise(vec![0.0, 0.5, 1.0], vec![1.6, 0.4]).unwrap();
        let mut rng = unit_rng(9, 2);
        let n = 200_000;
        let low = (0..n)
            .filter(|_| pw.sample(&mut rng).log10_p < 0.5f64.log10())
            .count() as f64
            / n as f64;
        assert!((low - 0.8).abs() < 0.005, "{low}");
    }

    #[test]
    fn spec_json_forms() {
        let u: DensitySpec = serde_json::from_str(r#"{"kind":"uniform"}"#).unwrap();
        assert_eq!(u, DensitySpec::Uniform);
        let p: DensitySpec =
            serde_json::from_str(r#"{"kind":"piecewise","breakpoints":[0,0.5,1],"heights":[1,1]}"#)
                .unwrap();
        assert_eq!(p.resolve(3).unwrap().as_slice().len(), 1);
        let l: DensitySpec = serde_json::from_str(r#"{"kind":"logbox","epsilon":0.01}"#).unwrap();
        assert_eq!(
            l.resolve(1).unwrap().at(1),
            &CutDensity::LogBox {
                center_log: -LN_2,
                epsilon: 0.01
            }
        );
        let c: DensitySpec =
            serde_json::from_str(r#"{"kind":"counterexample","delta":0.001}"#).unwrap();
        let levels = c.resolve(20).unwrap();
        assert_eq!(levels.as_slice().len(), 20);
        assert!(serde_json::from_str::<DensitySpec>(r#"{"kind":"gamma"}"#).is_err());
    }

    #[test]
    fn level_lookup_recycles_last() {
        let l = LevelDensities::new(vec![
            CutDensity::Uniform,
            CutDensity::log_box_half(0.1).unwrap(),
        ])
        .unwrap();
        assert_eq!(l.at(1), &CutDensity::Uniform);
        assert_eq!(l.at(2), l.at(7));
        assert!(LevelDensities::new(vec![]).is_err());
    }
}
