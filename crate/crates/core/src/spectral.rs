//! Exact outcome spectra via a radix-2 transform, the Laue function, and
//! analytic peak predictions for line gratings.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellGrid, Dims};
use crate::qsim::{sample_from, Encoding, MeasurementSample};

/// In-place `X_k = sum_z x_z e^{+2 pi i z k / S}` for power-of-two lengths.
/// Returns the number of butterflies, `(S/2) log2 S`.
pub fn fft_positive(data: &mut [Complex64]) -> u64 {
    let n = data.len();
    assert!(
        n.is_power_of_two(),
        "transform length must be a power of two"
    );
    if n < 2 {
        return 0;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
        .collect();
    let mut ops = 0u64;
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for block in data.chunks_exact_mut(len) {
            let (lo, hi) = block.split_at_mut(half);
            for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                let t = *b * twiddles[j * stride];
                *b = *a - t;
                *a += t;
            }
        }
        ops += (n / 2) as u64;
        len <<= 1;
    }
    ops
}

/// Butterfly count of [`fft_positive`] for `S = 2^s`.
pub fn fft_op_count(s: u32) -> u64 {
    (1u64 << s) / 2 * s as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub probs: Vec<f64>,
    pub encoding: Encoding,
    /// Butterflies spent by the classical transform.
    pub transform_ops: u64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Independent draws `k ~ P(k)`.
    pub fn sample(&self, shots: usize, rng: &mut impl Rng) -> Vec<MeasurementSample> {
        sample_from(&self.probs, shots, 0, rng)
    }
}

/// Measurement distribution of the pipeline computed classically.
///
/// Amplitude encoding: `P(k) = |sum_l e^{2 pi i z_l k/S}|^2 / (rho S^2)`.
/// Phase encoding: `P(k) = |sum_z (-1)^f(z) e^{2 pi i z k/S}|^2 / S^2`.
pub fn exact_distribution(grid: &CellGrid, encoding: Encoding) -> Result<Spectrum> {
    let s_len = grid.len();
    let mut data: Vec<Complex64> = match encoding {
        Encoding::Amplitude => {
            if grid.point_count() == 0 {
                return Err(Error::EmptyGrid);
            }
            grid.cells()
                .iter()
                .map(|&c| Complex64::new(c as u8 as f64, 0.0))
                .collect()
        }
        Encoding::Phase => grid
            .cells()
            .iter()
            .map(|&c| Complex64::new(if c { -1.0 } else { 1.0 }, 0.0))
            .collect(),
    };
    let ops = fft_positive(&mut data);
    let norm = match encoding {
        Encoding::Amplitude => grid.point_count() as f64 * s_len as f64,
        Encoding::Phase => (s_len as f64).powi(2),
    };
    Ok(Spectrum {
        probs: data.iter().map(|a| a.norm_sqr() / norm).collect(),
        encoding,
        transform_ops: ops,
    })
}

/// `sin^2(pi xi kappa) / sin^2(pi kappa)`, evaluated on `kappa` reduced to
/// `(-1/2, 1/2]` and equal to `xi^2` at integer `kappa`.
pub fn laue(xi: f64, kappa: f64) -> f64 {
    let k = kappa - kappa.round();
    if k == 0.0 {
        return xi * xi;
    }
    let den = (PI * k).sin();
    ((PI * xi * k).sin() / den).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakSource {
    Row,
    Column,
    Resonance,
    Transposed,
}

/// Laue variables of a prediction: `kappa = k * kappa_per_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaueMapping {
    pub xi: f64,
    pub kappa_per_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakPrediction {
    pub k_center: f64,
    pub width: f64,
    pub source: PeakSource,
    pub multiplier: i64,
    pub laue: Option<LaueMapping>,
    /// Whether a resonance candidate also meets the column condition.
    pub unsuppressed: Option<bool>,
}

impl PeakPrediction {
    /// Nearest integer wave-number.
    pub fn k_rounded(&self, s_len: usize) -> usize {
        (self.k_center.round() as i64).rem_euclid(s_len as i64) as usize
    }

    /// Circular distance from `k` to the centre.
    pub fn distance(&self, k: f64, s_len: usize) -> f64 {
        let d = (k - self.k_center).rem_euclid(s_len as f64);
        d.min(s_len as f64 - d)
    }

    pub fn covers(&self, k: f64, s_len: usize) -> bool {
        self.distance(k, s_len) <= self.width
    }
}

const AXIS_EPS: f64 = 1e-9;

/// Row condition: `k = l cos(theta) S / D` for `l = 1 .. floor(D/cos) - 1`,
/// width `M / (D sqrt chi)`.
pub fn predict_row_peaks(spacing: f64, theta: f64, dims: Dims, chi: f64) -> Vec<PeakPrediction> {
    let cos = theta.cos();
    if cos.abs() < AXIS_EPS {
        return Vec::new();
    }
    let s_len = dims.len() as f64;
    let step = cos * s_len / spacing;
    let last = (spacing / cos).floor() as i64 - 1;
    let width = dims.height() as f64 / (spacing * chi.sqrt());
    (1..=last)
        .map(|l| l as f64 * step)
        .take_while(|&k| k < s_len)
        .enumerate()
        .map(|(i, k)| PeakPrediction {
            k_center: k,
            width,
            source: PeakSource::Row,
            multiplier: i as i64 + 1,
            laue: Some(LaueMapping {
                xi: dims.width() as f64 * chi.sqrt(),
                kappa_per_k: spacing / (cos * s_len),
            }),
            unsuppressed: None,
        })
        .collect()
}

/// Column condition: `k = l (N - tan theta) M / N`, width `1/sqrt chi`.
pub fn predict_column_condition(theta: f64, dims: Dims, chi: f64) -> Vec<PeakPrediction> {
    if theta.cos().abs() < AXIS_EPS {
        return Vec::new();
    }
    let (n, m) = (dims.width() as f64, dims.height() as f64);
    let tan = theta.tan();
    let step = (n - tan) * m / n;
    let s_len = dims.len() as f64;
    (0i64..)
        .map(|l| (l, l as f64 * step))
        .take_while(|&(_, k)| k < s_len)
        .map(|(l, k)| PeakPrediction {
            k_center: k,
            width: 1.0 / chi.sqrt(),
            source: PeakSource::Column,
            multiplier: l,
            laue: Some(LaueMapping {
                xi: m * chi.sqrt(),
                kappa_per_k: (n + tan) / s_len,
            }),
            unsuppressed: None,
        })
        .collect()
}

/// Number of potential resonances, one less than the line period measured
/// along the transform axis (`D/cos` or `D/sin` when transposed).
pub fn potential_peak_count(spacing: f64, theta: f64, transposed: bool) -> i64 {
    let t = if transposed { theta.sin() } else { theta.cos() }.abs();
    let period = if t < AXIS_EPS { spacing } else { spacing / t };
    ((period - 1e-9).ceil() as i64 - 1).max(0)
}

/// Combined resonance `k = l (cos S/D - sin M/D)`, or for the transposed run
/// `k = l (sin S/D - cos N/D)`, reduced mod S, for `l = 1 .. potential count`
/// (at most S of them).
///
/// The width adds the row-lobe scale `S/(N sqrt chi)` to half the column comb
/// spacing (`N` and `M` swap roles for the transposed run). Each candidate is
/// flagged unsuppressed when `l cos N / D` (transposed: `l sin M / D`) lies
/// within `1/(D sqrt chi)` of an integer.
pub fn predict_resonances(
    spacing: f64,
    theta: f64,
    dims: Dims,
    chi: f64,
    transposed: bool,
) -> Vec<PeakPrediction> {
    let (n, m) = (dims.width() as f64, dims.height() as f64);
    let s_len = dims.len() as f64;
    let (cos, sin) = (theta.cos(), theta.sin());
    let sq = chi.sqrt();
    let (step, along, run_rows, width) = if transposed {
        (
            sin * s_len / spacing - cos * n / spacing,
            sin * m / spacing,
            m,
            s_len / (m * sq) + n / 2.0,
        )
    } else {
        (
            cos * s_len / spacing - sin * m / spacing,
            cos * n / spacing,
            n,
            s_len / (n * sq) + m / 2.0,
        )
    };
    let tol = 1.0 / (spacing * sq);
    let axis = if transposed { sin } else { cos };
    let count = potential_peak_count(spacing, theta, transposed).min(dims.len() as i64);
    (1..=count)
        .map(|l| {
            let lf = l as f64;
            let frac = lf * along - (lf * along).round();
            PeakPrediction {
                k_center: (lf * step).rem_euclid(s_len),
                width,
                source: if transposed {
                    PeakSource::Transposed
                } else {
                    PeakSource::Resonance
                },
                multiplier: l,
                laue: (axis.abs() >= AXIS_EPS).then(|| LaueMapping {
                    xi: run_rows * sq,
                    kappa_per_k: spacing / (axis.abs() * s_len),
                }),
                unsuppressed: Some(frac.abs() <= tol),
            }
        })
        .collect()
}

/// Predicted windows including the mirror images `S - k` that every real
/// pattern produces.
pub fn resonance_windows(
    spacing: f64,
    theta: f64,
    dims: Dims,
    chi: f64,
    transposed: bool,
) -> Vec<PeakPrediction> {
    let s_len = dims.len() as f64;
    predict_resonances(spacing, theta, dims, chi, transposed)
        .into_iter()
        .flat_map(|p| {
            let mut mirror = p;
            mirror.k_center = (s_len - p.k_center).rem_euclid(s_len);
            mirror.multiplier = -p.multiplier;
            [p, mirror]
        })
        .collect()
}

/// Order-of-magnitude peak probability `(chi delta_rho)^2 / rho`.
pub fn peak_probability_estimate(rho: f64, delta_rho: f64, chi: f64) -> f64 {
    (chi * delta_rho).powi(2) / rho
}

/// Mean `P(k)` off `k = 0` for a patternless array, `1/S`.
pub fn noise_floor(s_len: usize) -> f64 {
    1.0 / s_len as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn laue_examples() {
        assert_eq!(laue(3.0, 0.0), 9.0);
        assert!(laue(2.0, 0.5).abs() < 1e-15);
        assert!((laue(2.0, 0.25) - 2.0).abs() < 1e-12);
        assert!((laue(3.0, 2.0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn row_peaks_reduce_at_zero_angle() {
        let d = Dims::new(3, 2);
        let p = predict_row_peaks(4.0, 0.0, d, 1.0);
        let ks: Vec<f64> = p.iter().map(|p| p.k_center).collect();
        assert_eq!(ks, vec![8.0, 16.0, 24.0]);
        let d = Dims::new(2, 2);
        assert_eq!(predict_row_peaks(4.0, 0.0, d, 1.0)[0].width, 1.0);
    }

    #[test]
    fn diagonal_row_peaks() {
        let d = Dims::new(5, 5);
        let p = predict_row_peaks(4.0 * 2f64.sqrt(), FRAC_PI_4, d, 1.0);
        for (i, p) in p.iter().enumerate() {
            assert!((p.k_center - 128.0 * (i + 1) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn column_condition_examples() {
        let p = predict_column_condition(0.0, Dims::new(3, 2), 0.1);
        assert!(p.iter().all(|p| p.k_center == 4.0 * p.multiplier as f64));
        assert!((p[0].width - 10f64.sqrt()).abs() < 1e-12);
        let p = predict_column_condition(FRAC_PI_4, Dims::new(5, 5), 1.0);
        assert!((p[2].k_center - 62.0).abs() < 1e-9);
    }

    #[test]
    fn resonances_match_rows_on_axis() {
        let d = Dims::new(4, 4);
        let r = predict_resonances(4.0, 0.0, d, 1.0, false);
        let rows = predict_row_peaks(4.0, 0.0, d, 1.0);
        assert_eq!(r.len(), rows.len());
        for (a, b) in r.iter().zip(&rows) {
            assert!((a.k_center - b.k_center).abs() < 1e-9);
        }
        let t = predict_resonances(4.0, 0.0, d, 1.0, true);
        assert_eq!(t[0].k_center, 256.0 - 4.0);
    }

    #[test]
    fn peak_scale() {
        assert!((peak_probability_estimate(0.5, 0.25, 0.1) - 1.0 / 800.0).abs() < 1e-15);
        assert_eq!(peak_probability_estimate(0.5, 0.25, 0.0), 0.0);
        assert_eq!(noise_floor(1024), 1.0 / 1024.0);
    }

    #[test]
    fn fft_counts_butterflies() {
        let mut x = vec![Complex64::new(1.0, 0.0); 16];
        assert_eq!(fft_positive(&mut x), fft_op_count(4));
        assert!((x[0].re - 16.0).abs() < 1e-12);
        assert!(x[1..].iter().all(|v| v.norm() < 1e-12));
    }
}
