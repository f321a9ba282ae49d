#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use qpattern::{BackgroundSpec, CellGrid, Dims, LinePatternSpec, Region};

/// `X_k = sum_z x_z e^{+2 pi i z k / S}` by the O(S^2) definition.
pub fn dense_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let table: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
        .collect();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(z, v)| v * table[(z * k) % n])
                .sum()
        })
        .collect()
}

/// Outcome distribution straight from the point sum, without any fast transform.
pub fn direct_amplitude_spectrum(grid: &CellGrid) -> Vec<f64> {
    let s = grid.len();
    let pts = grid.point_list();
    let x: Vec<Complex64> = (0..s)
        .map(|z| Complex64::new(if grid.at(z) { 1.0 } else { 0.0 }, 0.0))
        .collect();
    dense_dft(&x)
        .iter()
        .map(|a| a.norm_sqr() / (pts.len() as f64 * s as f64))
        .collect()
}

pub fn direct_phase_spectrum(grid: &CellGrid) -> Vec<f64> {
    let s = grid.len();
    let x: Vec<Complex64> = (0..s)
        .map(|z| Complex64::new(if grid.at(z) { -1.0 } else { 1.0 }, 0.0))
        .collect();
    dense_dft(&x)
        .iter()
        .map(|a| a.norm_sqr() / (s as f64 * s as f64))
        .collect()
}

/// Upper-tail chi-square probability via the Wilson-Hilferty cube-root
/// normal approximation, adequate for the p > 0.001 checks used here.
pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    let h = 2.0 / (9.0 * dof);
    let z = ((stat / dof).cbrt() - (1.0 - h)) / h.sqrt();
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Complementary error function, Numerical Recipes `erfcc` (|error| < 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98
                                    + t * (1.488_515_87
                                        + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

pub fn pearson(counts: &[u64], probs: &[f64], shots: u64) -> (f64, f64) {
    let mut stat = 0.0;
    let mut bins = 0.0;
    for (c, p) in counts.iter().zip(probs) {
        let e = p * shots as f64;
        if e > 1e-12 {
            stat += (*c as f64 - e).powi(2) / e;
            bins += 1.0;
        }
    }
    (stat, bins - 1.0)
}

pub fn histogram(ks: impl Iterator<Item = usize>, s: usize) -> Vec<u64> {
    let mut h = vec![0u64; s];
    for k in ks {
        h[k] += 1;
    }
    h
}

#[allow(clippy::too_many_arguments)]
pub fn grating(
    dims: Dims,
    spacing: f64,
    theta: f64,
    region: Region,
    rho: f64,
    delta_rho: f64,
    z0: usize,
    seed: u64,
) -> CellGrid {
    let spec = LinePatternSpec {
        spacing,
        theta,
        region,
        delta_rho,
        z0,
        line_width: None,
    };
    qpattern::generate_grid(dims, Some(&spec), &BackgroundSpec::new(rho, seed)).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
