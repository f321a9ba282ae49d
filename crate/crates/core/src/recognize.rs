//! From outcomes to decisions: peak clusters, the fundamental spacing,
//! (D, theta, chi) estimates from an original and a transposed run, the
//! presence test and localisation by subdivision.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellGrid, Dims, Region};
use crate::qsim::{run_pipeline, Encoding, MeasurementSample};
use crate::spectral::{exact_distribution, noise_floor, resonance_windows, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisMode {
    #[default]
    Oracle,
    Sample,
}

/// Thresholds for peak detection. Every `O(.)` scale uses a unit constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionPolicy {
    /// Oracle mode: a bin is a peak when `P(k) > tau / S`.
    pub tau: f64,
    /// Smallest pattern fraction the analysis is tuned for.
    pub chi_target: f64,
    /// Sample-mode merge gap; `None` means `ceil(M / (2 sqrt chi_target))`.
    pub gap: Option<usize>,
    /// Sample-mode seed count; `None` derives it from `false_alarm`.
    pub c_min: Option<u64>,
    /// Expected number of noise bins reaching `c_min` across the spectrum.
    pub false_alarm: f64,
    /// Half-width of the bin window used for the comb phase; `None` means
    /// `ceil(1 / sqrt chi_target)`.
    pub fine_window: Option<usize>,
}

impl Default for DetectionPolicy {
    fn default() -> Self {
        Self {
            tau: 16.0,
            chi_target: 1.0 / 16.0,
            gap: None,
            c_min: None,
            false_alarm: 0.01,
            fine_window: None,
        }
    }
}

impl DetectionPolicy {
    pub fn sample_gap(&self, dims: Dims) -> usize {
        self.gap.unwrap_or_else(|| {
            (dims.height() as f64 / (2.0 * self.chi_target.sqrt())).ceil() as usize
        })
    }

    pub fn window(&self) -> usize {
        self.fine_window
            .unwrap_or_else(|| (1.0 / self.chi_target.sqrt()).ceil() as usize)
    }

    /// Smallest count `c >= 2` with `S * noise_tail(shots/S, c) <= false_alarm`.
    pub fn sample_threshold(&self, shots: u64, s_len: usize) -> u64 {
        if let Some(c) = self.c_min {
            return c;
        }
        let lambda = shots as f64 * noise_floor(s_len);
        let mut c = 2;
        while s_len as f64 * noise_tail(lambda, c) > self.false_alarm {
            c += 1;
        }
        c
    }
}

/// `P(X >= c)` for the count in one noise bin. A patternless spectrum has
/// exponentially distributed `P(k)` (speckle), so a Poisson count with that
/// random mean `lambda` is geometric: `(lambda / (1 + lambda))^c`.
pub fn noise_tail(lambda: f64, c: u64) -> f64 {
    if lambda <= 0.0 {
        return if c == 0 { 1.0 } else { 0.0 };
    }
    (lambda / (1.0 + lambda)).powf(c as f64)
}

/// Measured outcomes or an exact spectrum.
#[derive(Debug, Clone, Copy)]
pub enum Evidence<'a> {
    Spectrum(&'a Spectrum),
    Samples {
        samples: &'a [MeasurementSample],
        s_len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakCluster {
    pub k_low: usize,
    pub k_high: usize,
    /// Samples in `[k_low, k_high]`; zero in oracle mode.
    pub sample_count: u64,
    /// Probability (oracle) or sample fraction in the span.
    pub mass: f64,
    pub weighted_center: f64,
    /// Strongest bin, lowest `k` on ties.
    pub peak_k: usize,
    pub peak_mass: f64,
    /// Weighted circular mean of `2 pi (k mod M) / M` around `peak_k`.
    pub comb_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub mode: AnalysisMode,
    pub dims: Dims,
    pub clusters: Vec<PeakCluster>,
    /// Shots analysed; zero in oracle mode.
    pub total_shots: u64,
    pub excluded_k0: bool,
    pub k0_mass: f64,
    /// Oracle: probability threshold. Sample: seed count `c_min`.
    pub threshold: f64,
}

impl PeakReport {
    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Cluster with the highest peak bin, lowest `k` on ties.
    pub fn strongest(&self) -> Option<&PeakCluster> {
        self.clusters.iter().fold(None, |best, c| match best {
            Some(b) if b.peak_mass >= c.peak_mass => Some(b),
            _ => Some(c),
        })
    }

    pub fn peak_mass_total(&self) -> f64 {
        self.clusters.iter().map(|c| c.mass).sum()
    }

    /// Shot count equivalent to the detection limit: `Omega` in sample mode,
    /// `S / tau` in oracle mode.
    pub fn effective_shots(&self) -> f64 {
        match self.mode {
            AnalysisMode::Sample => self.total_shots as f64,
            AnalysisMode::Oracle => 1.0 / self.threshold,
        }
    }
}

/// Histogram of outcomes over `0..s_len`.
pub fn histogram(samples: &[MeasurementSample], s_len: usize) -> Result<Vec<u64>> {
    let mut h = vec![0u64; s_len];
    for smp in samples {
        if smp.k >= s_len {
            return Err(Error::SampleOutOfRange {
                k: smp.k,
                len: s_len,
            });
        }
        h[smp.k] += 1;
    }
    Ok(h)
}

/// Groups strong bins into clusters, always excluding `k = 0`.
///
/// Oracle mode keeps bins above `tau / S` and merges adjacent ones. Sample
/// mode seeds clusters at bins holding at least `c_min` samples, merges seeds
/// closer than the gap and counts every sample inside each span.
pub fn detect_peaks(
    evidence: Evidence,
    dims: Dims,
    policy: &DetectionPolicy,
) -> Result<PeakReport> {
    let s_len = dims.len();
    let m = dims.height();
    let r = policy.window() as i64;
    match evidence {
        Evidence::Spectrum(spec) => {
            if spec.len() != s_len {
                return Err(Error::InvalidState(format!(
                    "spectrum has {} bins, grid has {s_len} cells",
                    spec.len()
                )));
            }
            let threshold = policy.tau * noise_floor(s_len);
            let p = &spec.probs;
            let strong: Vec<bool> = (0..s_len).map(|k| k != 0 && p[k] > threshold).collect();
            let seeds: Vec<usize> = (1..s_len).filter(|&k| strong[k]).collect();
            let clusters = merge(&seeds, 1)
                .into_iter()
                .map(|(lo, hi)| {
                    let w = |k: usize| p[k];
                    let mut c = summarize(lo, hi, &w);
                    c.comb_phase =
                        comb_phase(
                            c.peak_k,
                            r,
                            s_len,
                            m,
                            |k| {
                                if strong[k] {
                                    p[k]
                                } else {
                                    0.0
                                }
                            },
                        );
                    c
                })
                .collect();
            Ok(PeakReport {
                mode: AnalysisMode::Oracle,
                dims,
                clusters,
                total_shots: 0,
                excluded_k0: true,
                k0_mass: p[0],
                threshold,
            })
        }
        Evidence::Samples {
            samples,
            s_len: len,
        } => {
            if samples.is_empty() {
                return Err(Error::EmptySamples);
            }
            if len != s_len {
                return Err(Error::InvalidState(format!(
                    "samples span {len} outcomes, grid has {s_len} cells"
                )));
            }
            let hist = histogram(samples, s_len)?;
            let shots = samples.len() as u64;
            let c_min = policy.sample_threshold(shots, s_len);
            let seeds: Vec<usize> = (1..s_len).filter(|&k| hist[k] >= c_min).collect();
            let omega = shots as f64;
            let clusters = merge(&seeds, policy.sample_gap(dims))
                .into_iter()
                .map(|(lo, hi)| {
                    let w = |k: usize| hist[k] as f64 / omega;
                    let mut c = summarize(lo, hi, &w);
                    c.sample_count = hist[lo..=hi].iter().sum();
                    c.comb_phase = comb_phase(c.peak_k, r, s_len, m, |k| {
                        if k == 0 {
                            0.0
                        } else {
                            hist[k] as f64
                        }
                    });
                    c
                })
                .collect();
            Ok(PeakReport {
                mode: AnalysisMode::Sample,
                dims,
                clusters,
                total_shots: shots,
                excluded_k0: true,
                k0_mass: hist[0] as f64 / omega,
                threshold: c_min as f64,
            })
        }
    }
}

fn merge(seeds: &[usize], gap: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &k in seeds {
        match out.last_mut() {
            Some((_, hi)) if k - *hi <= gap.max(1) => *hi = k,
            _ => out.push((k, k)),
        }
    }
    out
}

fn summarize(lo: usize, hi: usize, w: &dyn Fn(usize) -> f64) -> PeakCluster {
    let mut mass = 0.0;
    let mut moment = 0.0;
    let (mut peak_k, mut peak_mass) = (lo, f64::NEG_INFINITY);
    for k in lo..=hi {
        let v = w(k);
        mass += v;
        moment += v * k as f64;
        if v > peak_mass {
            peak_mass = v;
            peak_k = k;
        }
    }
    PeakCluster {
        k_low: lo,
        k_high: hi,
        sample_count: 0,
        mass,
        weighted_center: if mass > 0.0 {
            moment / mass
        } else {
            peak_k as f64
        },
        peak_k,
        peak_mass,
        comb_phase: 0.0,
    }
}

fn comb_phase(peak: usize, r: i64, s_len: usize, m: usize, w: impl Fn(usize) -> f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for d in -r..=r {
        let k = (peak as i64 + d).rem_euclid(s_len as i64) as usize;
        let v = w(k);
        let phi = 2.0 * PI * (k % m) as f64 / m as f64;
        re += v * phi.cos();
        im += v * phi.sin();
    }
    im.atan2(re)
}

/// Highest harmonic order [`common_spacing_of`] will assign to a peak.
pub const DEFAULT_MAX_MULTIPLIER: usize = 16;

/// Largest spacing `dk` such that every centre lies within `tolerance` of a
/// positive integer multiple of it, with multiples of at most
/// [`DEFAULT_MAX_MULTIPLIER`].
pub fn common_spacing_of(centers: &[f64], tolerance: f64) -> Result<f64> {
    common_spacing_bounded(centers, tolerance, DEFAULT_MAX_MULTIPLIER)
}

/// Candidates are divisors of the smallest centre and of pairwise gaps, tried
/// largest first and refined by least squares.
pub fn common_spacing_bounded(
    centers: &[f64],
    tolerance: f64,
    max_multiplier: usize,
) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::NoPeaks);
    }
    let tol = tolerance.max(0.0);
    let inconsistent = Error::InconsistentPeaks { tolerance: tol };
    let smallest = centers.iter().cloned().fold(f64::INFINITY, f64::min);
    if smallest <= tol {
        return Err(inconsistent);
    }
    let floor = (2.0 * tol).max(f64::EPSILON);
    let max_mult = max_multiplier.max(1) as f64;
    let largest = centers.iter().cloned().fold(0.0, f64::max);
    let max_div = ((smallest / floor).floor() as usize).clamp(1, max_multiplier.max(1));
    let mut bases = vec![smallest];
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[i + 1..] {
            let g = (a - b).abs();
            if g > floor {
                bases.push(g);
            }
        }
    }
    let mut candidates: Vec<f64> = bases
        .iter()
        .flat_map(|&b| (1..=max_div).map(move |d| b / d as f64))
        .filter(|&c| c > floor)
        .collect();
    candidates.sort_by(|a, b| b.partial_cmp(a).unwrap());
    candidates.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    for cand in candidates {
        let mults: Vec<f64> = centers.iter().map(|c| (c / cand).round()).collect();
        if mults.iter().any(|&m| m < 1.0) || largest / cand > max_mult + 0.5 {
            continue;
        }
        let num: f64 = centers.iter().zip(&mults).map(|(c, m)| c * m).sum();
        let den: f64 = mults.iter().map(|m| m * m).sum();
        let refined = num / den;
        let fits = centers
            .iter()
            .zip(&mults)
            .all(|(c, m)| (c - m * refined).abs() <= tol + 1e-9 * c.abs());
        if fits && refined > floor {
            return Ok(refined);
        }
    }
    Err(inconsistent)
}

/// [`common_spacing_of`] applied to the weighted cluster centres below `S/2`
/// (the upper half mirrors them).
pub fn common_spacing(report: &PeakReport, tolerance: f64) -> Result<f64> {
    let half = report.dims.len() as f64 / 2.0;
    let centers: Vec<f64> = report
        .clusters
        .iter()
        .map(|c| c.weighted_center)
        .filter(|&c| c <= half)
        .collect();
    if centers.is_empty() && !report.clusters.is_empty() {
        let all: Vec<f64> = report.clusters.iter().map(|c| c.weighted_center).collect();
        return common_spacing_of(&all, tolerance);
    }
    common_spacing_of(&centers, tolerance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterCandidate {
    pub d: f64,
    pub theta: f64,
    /// Mismatch between coarse and comb coordinates across the two runs.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateFlag {
    /// Both mirror candidates fit equally well.
    Ambiguous,
    /// No candidate reconciles the two runs.
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    /// `S / |k|` of the strongest peak, the `D / cos(theta)` reading.
    pub period_hint: f64,
    /// Same for the transposed run, the `D / |sin(theta)|` reading.
    pub period_hint_transposed: f64,
    pub matched_original: usize,
    pub clusters_original: usize,
    pub matched_transposed: usize,
    pub clusters_transposed: usize,
    /// Resonance multipliers with an observed cluster in their window.
    pub observed_multipliers: Vec<i64>,
    /// Multipliers the estimate predicts to meet both peak conditions.
    pub unsuppressed_predicted: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    pub d: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEstimate {
    pub d_hat: f64,
    pub theta_hat: f64,
    pub chi_hat: Option<ChiEstimate>,
    pub confidence: Confidence,
    pub uncertainty: Uncertainty,
    /// Ranked best first.
    pub candidates: Vec<ParameterCandidate>,
    pub flag: Option<EstimateFlag>,
}

/// Coarse and comb coordinates of the strongest peak of a run.
fn features(report: &PeakReport) -> Result<(f64, f64, usize)> {
    let c = report.strongest().ok_or(Error::NoPeaks)?;
    let s_len = report.dims.len() as i64;
    let k = c.peak_k as i64;
    let signed = if k <= s_len / 2 { k } else { k - s_len };
    Ok((
        signed as f64 / s_len as f64,
        c.comb_phase / (2.0 * PI),
        c.peak_k,
    ))
}

/// Recovers `(D, theta)` from an original and a transposed run.
///
/// The strongest peak of a run gives two coordinates of the grating's
/// reciprocal vector `(cos, -sin) / D`: a coarse one, `k/S`, and a fine one,
/// the position of `k` on the column comb, `(k mod M)/M`. In the transposed
/// run the roles swap. The fine readings fix `|cos|/D` and `|sin|/D`; the
/// coarse readings pick the sign combination (and so the mirror angle) that
/// makes both runs agree.
pub fn estimate_parameters(
    report: &PeakReport,
    report_transposed: &PeakReport,
    dims: Dims,
    policy: &DetectionPolicy,
) -> Result<PatternEstimate> {
    if report.dims != dims || report_transposed.dims != dims.transposed() {
        return Err(Error::InvalidState(
            "report shapes do not match the original and transposed array".into(),
        ));
    }
    let (kx_a, ky_a, k_a) = features(report)?;
    let (kx_b, ky_b, k_b) = features(report_transposed)?;
    let (n, m) = (dims.width() as f64, dims.height() as f64);
    let sq = policy.chi_target.sqrt();

    let mut candidates: Vec<ParameterCandidate> = [1.0f64, -1.0]
        .iter()
        .map(|&sigma| {
            let score = (sigma * kx_a - ky_b).abs() + (sigma * ky_a - kx_b).abs();
            let (mut c, mut s) = (ky_b, -sigma * ky_a);
            if c < 0.0 {
                c = -c;
                s = -s;
            }
            ParameterCandidate {
                d: 1.0 / c.hypot(s),
                theta: s.atan2(c),
                score,
            }
        })
        .collect();
    candidates.sort_by(|a, b| a.score.partial_cmp(&b.score).unwrap());

    let tol = 2.0 / (n * sq) + 2.0 / (m * sq);
    let best = candidates[0];
    let flag = if best.score > tol {
        Some(EstimateFlag::Inconsistent)
    } else if candidates[1].score <= tol
        && (candidates[1].theta - best.theta).abs() > 1.0 / (n.min(m) * sq)
    {
        Some(EstimateFlag::Ambiguous)
    } else {
        None
    };

    let (c, s) = (best.theta.cos() / best.d, best.theta.sin() / best.d);
    let (dc, ds) = (1.0 / (n * sq), 1.0 / (m * sq));
    let d3 = best.d.powi(3);
    let uncertainty = Uncertainty {
        d: d3 * (c * dc).hypot(s * ds),
        theta: best.d.powi(2) * (s * dc).hypot(c * ds),
    };

    let s_len = dims.len();
    let tally = |rep: &PeakReport, transposed: bool, seen: &mut Vec<i64>| {
        let windows = resonance_windows(best.d, best.theta, dims, policy.chi_target, transposed);
        rep.clusters
            .iter()
            .filter(|cl| {
                let hit = windows.iter().find(|w| w.covers(cl.peak_k as f64, s_len));
                if let (Some(w), false) = (hit, transposed) {
                    seen.push(w.multiplier.abs());
                }
                hit.is_some()
            })
            .count()
    };
    let mut observed = Vec::new();
    let matched_original = tally(report, false, &mut observed);
    let matched_transposed = tally(report_transposed, true, &mut observed);
    observed.sort_unstable();
    observed.dedup();
    let unsuppressed_predicted =
        crate::spectral::predict_resonances(best.d, best.theta, dims, policy.chi_target, false)
            .iter()
            .filter(|p| p.unsuppressed == Some(true))
            .map(|p| p.multiplier)
            .collect();
    let hint = |k: usize| {
        let k = k.min(s_len - k) as f64;
        if k > 0.0 {
            s_len as f64 / k
        } else {
            f64::INFINITY
        }
    };

    Ok(PatternEstimate {
        d_hat: best.d,
        theta_hat: best.theta,
        chi_hat: None,
        confidence: Confidence {
            period_hint: hint(k_a),
            period_hint_transposed: hint(k_b),
            matched_original,
            clusters_original: report.clusters.len(),
            matched_transposed,
            clusters_transposed: report_transposed.clusters.len(),
            observed_multipliers: observed,
            unsuppressed_predicted,
        },
        uncertainty,
        candidates,
        flag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChiEstimate {
    /// Pattern fraction for an assumed density excess.
    Chi {
        chi: f64,
        p_hat: f64,
        calibration: f64,
    },
    /// The identifiable product `chi * delta_rho` when the excess is unknown.
    ChiDeltaRho {
        product: f64,
        p_hat: f64,
        calibration: f64,
    },
    /// No peak observed: any pattern is smaller than `chi_min`.
    UpperBound { chi_min: f64 },
}

/// Inverts `p = C (chi delta_rho)^2 / rho` for `chi`, clamped to `[0, 1]`.
pub fn chi_from_peak_probability(p_hat: f64, rho: f64, delta_rho: f64, calibration: f64) -> f64 {
    ((p_hat * rho / calibration).sqrt() / delta_rho).clamp(0.0, 1.0)
}

/// Pattern fraction from the strongest peak's probability (oracle) or sample
/// fraction. `calibration` is the constant `C` above; 1 is the bare scale.
pub fn estimate_chi(
    report: &PeakReport,
    rho: f64,
    delta_rho: Option<f64>,
    calibration: f64,
) -> ChiEstimate {
    match report.strongest() {
        None => ChiEstimate::UpperBound {
            chi_min: (1.0 / report.effective_shots()).sqrt().min(1.0),
        },
        Some(c) => {
            let p_hat = c.peak_mass;
            match delta_rho {
                Some(dr) if dr > 0.0 => ChiEstimate::Chi {
                    chi: chi_from_peak_probability(p_hat, rho, dr, calibration),
                    p_hat,
                    calibration,
                },
                _ => ChiEstimate::ChiDeltaRho {
                    product: (p_hat * rho / calibration).sqrt(),
                    p_hat,
                    calibration,
                },
            }
        }
    }
}

/// Least-squares constant `C` in `p = C (chi delta_rho)^2 / rho`, fitted in
/// log space over `(p_hat, rho, delta_rho, chi)` tuples.
pub fn calibrate_chi_constant(observations: &[(f64, f64, f64, f64)]) -> Option<f64> {
    let logs: Vec<f64> = observations
        .iter()
        .filter(|o| o.0 > 0.0)
        .map(|&(p, rho, dr, chi)| (p * rho / (chi * dr).powi(2)).ln())
        .collect();
    (!logs.is_empty()).then(|| (logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Presence {
    pub present: bool,
    pub chi_min: f64,
    pub clusters: usize,
}

pub fn presence(report: &PeakReport) -> Presence {
    Presence {
        present: !report.is_empty(),
        chi_min: (1.0 / report.effective_shots()).sqrt().min(1.0),
        clusters: report.clusters.len(),
    }
}

/// Stopping rule: a pattern is declared present iff a peak besides `k = 0`
/// is found; otherwise any pattern is smaller than `1/sqrt(Omega)`.
pub fn decide_pattern_present(
    samples: &[MeasurementSample],
    dims: Dims,
    policy: &DetectionPolicy,
) -> Result<Presence> {
    let report = detect_peaks(
        Evidence::Samples {
            samples,
            s_len: dims.len(),
        },
        dims,
        policy,
    )?;
    Ok(presence(&report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocaliseConfig {
    pub mode: AnalysisMode,
    pub encoding: Encoding,
    /// Shots per region evaluation; in oracle mode only used to charge queries.
    pub shots: usize,
    pub policy: DetectionPolicy,
    /// Oracle-query budget across all evaluations.
    pub budget: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocaliseOutcome {
    pub regions: Vec<Region>,
    pub queries_used: u64,
    pub evaluations: usize,
    pub complete: bool,
}

struct Localiser<'a> {
    grid: &'a CellGrid,
    cfg: &'a LocaliseConfig,
    min_area: f64,
    queries: u64,
    evaluations: usize,
    exhausted: bool,
}

impl Localiser<'_> {
    fn detect(&mut self, region: &Region) -> Result<Option<bool>> {
        if self.queries >= self.cfg.budget {
            self.exhausted = true;
            return Ok(None);
        }
        let sub = self.grid.subgrid(region)?;
        self.evaluations += 1;
        if sub.point_count() == 0 && self.cfg.encoding == Encoding::Amplitude {
            return Ok(Some(false));
        }
        let dims = sub.dims();
        let report = match self.cfg.mode {
            AnalysisMode::Oracle => {
                let spec = exact_distribution(&sub, self.cfg.encoding)?;
                self.queries += match self.cfg.encoding {
                    Encoding::Amplitude => (self.cfg.shots as f64 / sub.rho()).ceil() as u64,
                    Encoding::Phase => self.cfg.shots as u64,
                };
                detect_peaks(Evidence::Spectrum(&spec), dims, &self.cfg.policy)?
            }
            AnalysisMode::Sample => {
                let tag = (region.x0 as u64) << 40 | (region.y0 as u64) << 20 | region.width as u64;
                let seed = crate::experiment::derive_seed(self.cfg.seed, tag);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let run = run_pipeline(&sub, self.cfg.shots, &mut rng, self.cfg.encoding)?;
                self.queries += run.counters.queries;
                detect_peaks(
                    Evidence::Samples {
                        samples: &run.samples,
                        s_len: dims.len(),
                    },
                    dims,
                    &self.cfg.policy,
                )?
            }
        };
        Ok(Some(!report.is_empty()))
    }

    /// Regions under `region` carrying evidence, given that `region` itself
    /// has already tested positive.
    fn refine(&mut self, region: Region) -> Result<Vec<Region>> {
        let children = region.quadrants();
        if children.len() < 2 || (children[0].area() as f64) < self.min_area {
            return Ok(vec![region]);
        }
        let mut found: Vec<Vec<Region>> = Vec::new();
        for child in children.iter() {
            match self.detect(child)? {
                None => return Ok(vec![region]),
                Some(true) => found.push(self.refine(*child)?),
                Some(false) => {}
            }
            if self.exhausted {
                return Ok(vec![region]);
            }
        }
        if found.is_empty() || found.len() == children.len() {
            return Ok(vec![region]);
        }
        Ok(found.into_iter().flatten().collect())
    }
}

/// Recursive subdivision: a region that shows peaks is split into quadrants
/// (never below `chi_hint * S` cells) and only the positive quadrants are
/// kept. If every quadrant is positive, or none is, the parent is returned.
pub fn localise(grid: &CellGrid, chi_hint: f64, cfg: &LocaliseConfig) -> Result<LocaliseOutcome> {
    let mut loc = Localiser {
        grid,
        cfg,
        min_area: chi_hint.clamp(0.0, 1.0) * grid.len() as f64 * (1.0 - 1e-9),
        queries: 0,
        evaluations: 0,
        exhausted: false,
    };
    let whole = Region::whole(grid.dims());
    let regions = match loc.detect(&whole)? {
        Some(true) => loc.refine(whole)?,
        _ => Vec::new(),
    };
    Ok(LocaliseOutcome {
        regions,
        queries_used: loc.queries,
        evaluations: loc.evaluations,
        complete: !loc.exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(ks: &[usize]) -> Vec<MeasurementSample> {
        ks.iter()
            .enumerate()
            .map(|(i, &k)| MeasurementSample {
                k,
                shot_id: i as u64,
            })
            .collect()
    }

    #[test]
    fn identical_samples_form_one_cluster() {
        let dims = Dims::new(3, 3);
        let s = samples(&[7; 20]);
        let r = detect_peaks(
            Evidence::Samples {
                samples: &s,
                s_len: 64,
            },
            dims,
            &DetectionPolicy::default(),
        )
        .unwrap();
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].weighted_center, 7.0);
        assert_eq!(r.clusters[0].sample_count, 20);
    }

    #[test]
    fn k_zero_is_excluded() {
        let dims = Dims::new(2, 2);
        let s = samples(&[0; 10]);
        let r = detect_peaks(
            Evidence::Samples {
                samples: &s,
                s_len: 16,
            },
            dims,
            &DetectionPolicy::default(),
        )
        .unwrap();
        assert!(r.is_empty());
        assert!(r.excluded_k0);
        assert_eq!(r.k0_mass, 1.0);
        assert!(matches!(
            detect_peaks(
                Evidence::Samples {
                    samples: &[],
                    s_len: 16
                },
                dims,
                &DetectionPolicy::default()
            ),
            Err(Error::EmptySamples)
        ));
    }

    #[test]
    fn spacing_examples() {
        assert!((common_spacing_of(&[8.0, 16.0, 24.0], 0.5).unwrap() - 8.0).abs() < 1e-12);
        let d = common_spacing_of(&[127.6, 256.3, 383.9], 1.0).unwrap();
        assert!((d - 128.0).abs() < 0.5, "{d}");
        assert_eq!(common_spacing_of(&[97.0], 0.5).unwrap(), 97.0);
        assert!(common_spacing_of(&[10.0, 10.45], 0.05).is_err());
    }

    #[test]
    fn chi_inversion() {
        let chi = chi_from_peak_probability(1.0 / 800.0, 0.5, 0.25, 1.0);
        assert!((chi - 0.1).abs() < 1e-12);
        let a = chi_from_peak_probability(1e-4, 0.5, 0.25, 1.0);
        let b = chi_from_peak_probability(4e-4, 0.5, 0.25, 1.0);
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn noise_tail_values() {
        assert!((noise_tail(1.0, 3) - 0.125).abs() < 1e-15);
        assert_eq!(noise_tail(0.0, 2), 0.0);
        let p = DetectionPolicy::default();
        assert_eq!(p.sample_threshold(4096, 4096), 19);
    }

    #[test]
    fn presence_bound_follows_shots() {
        let dims = Dims::new(3, 3);
        let s = samples(&[0]);
        let p = decide_pattern_present(&s, dims, &DetectionPolicy::default()).unwrap();
        assert!(!p.present);
        assert_eq!(p.chi_min, 1.0);
    }
}
