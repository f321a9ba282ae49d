//! Dense state-vector simulation of the recognition circuit.
//!
//! Basis index is `(z << 1) | ancilla`; coordinate qubit `j` is bit `j + 1`
//! and carries weight `2^j` in `z`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CellGrid;

pub const DEFAULT_MAX_QUBITS: u32 = 22;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    s: u32,
    amps: Vec<Complex64>,
    gate_count: u64,
    query_count: u64,
}

impl PureState {
    /// `|0...0>|0>` without any gates applied.
    pub fn zero(s: u32, limit: u32) -> Result<Self> {
        if s == 0 || s > limit {
            return Err(Error::TooManyQubits {
                requested: s,
                limit,
            });
        }
        let mut amps = vec![ZERO; 1 << (s + 1)];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            s,
            amps,
            gate_count: 0,
            query_count: 0,
        })
    }

    /// Wraps a full `2^(s+1)` amplitude vector, normalising it.
    pub fn from_amplitudes(s: u32, mut amps: Vec<Complex64>) -> Result<Self> {
        if s == 0 || amps.len() != 1 << (s + 1) {
            return Err(Error::InvalidState(format!(
                "expected {} amplitudes for s={s}, got {}",
                1usize << (s + 1),
                amps.len()
            )));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("zero or non-finite norm".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self {
            s,
            amps,
            gate_count: 0,
            query_count: 0,
        })
    }

    /// Places a coordinate-register vector on one ancilla branch.
    pub fn from_coordinates(s: u32, coords: &[Complex64], ancilla: bool) -> Result<Self> {
        if coords.len() != 1 << s {
            return Err(Error::InvalidState(format!(
                "expected {} coordinate amplitudes, got {}",
                1usize << s,
                coords.len()
            )));
        }
        let mut amps = vec![ZERO; 1 << (s + 1)];
        for (z, &c) in coords.iter().enumerate() {
            amps[(z << 1) | ancilla as usize] = c;
        }
        Self::from_amplitudes(s, amps)
    }

    pub fn basis(s: u32, z: usize, ancilla: bool) -> Result<Self> {
        let mut st = Self::zero(s, s.max(DEFAULT_MAX_QUBITS))?;
        if z >= 1 << s {
            return Err(Error::IndexOutOfRange { z, len: 1 << s });
        }
        st.amps[0] = ZERO;
        st.amps[(z << 1) | ancilla as usize] = Complex64::new(1.0, 0.0);
        Ok(st)
    }

    pub fn qubits(&self) -> u32 {
        self.s
    }

    pub fn size(&self) -> usize {
        1 << self.s
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, z: usize, ancilla: bool) -> Complex64 {
        self.amps[(z << 1) | ancilla as usize]
    }

    pub fn branch(&self, ancilla: bool) -> Vec<Complex64> {
        self.amps
            .iter()
            .skip(ancilla as usize)
            .step_by(2)
            .copied()
            .collect()
    }

    pub fn gate_count(&self) -> u64 {
        self.gate_count
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Outcome probabilities for the coordinate register, summed over the ancilla.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps
            .chunks_exact(2)
            .map(|p| p[0].norm_sqr() + p[1].norm_sqr())
            .collect()
    }

    fn check_coord(&self, j: u32) {
        assert!(
            j < self.s,
            "coordinate qubit {j} out of range for s={}",
            self.s
        );
    }

    fn h_bit(&mut self, bit: u32) {
        let step = 1usize << bit;
        for block in self.amps.chunks_exact_mut(step << 1) {
            let (lo, hi) = block.split_at_mut(step);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = (x + y) * FRAC_1_SQRT_2;
                *b = (x - y) * FRAC_1_SQRT_2;
            }
        }
        self.gate_count += 1;
    }

    fn phase_mask(&mut self, mask: usize, angle: f64) {
        let w = Complex64::from_polar(1.0, angle);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a *= w;
            }
        }
        self.gate_count += 1;
    }

    pub fn hadamard(&mut self, j: u32) {
        self.check_coord(j);
        self.h_bit(j + 1);
    }

    pub fn hadamard_ancilla(&mut self) {
        self.h_bit(0);
    }

    pub fn x_ancilla(&mut self) {
        for p in self.amps.chunks_exact_mut(2) {
            p.swap(0, 1);
        }
        self.gate_count += 1;
    }

    /// Single-qubit phase `diag(1, e^{i angle})` on coordinate qubit `j`.
    pub fn phase(&mut self, j: u32, angle: f64) {
        self.check_coord(j);
        self.phase_mask(1 << (j + 1), angle);
    }

    pub fn controlled_phase(&mut self, control: u32, target: u32, angle: f64) {
        self.check_coord(control);
        self.check_coord(target);
        assert_ne!(control, target);
        self.phase_mask((1 << (control + 1)) | (1 << (target + 1)), angle);
    }

    pub fn swap(&mut self, a: u32, b: u32) {
        self.check_coord(a);
        self.check_coord(b);
        if a != b {
            let (ma, mb) = (1usize << (a + 1), 1usize << (b + 1));
            for i in 0..self.amps.len() {
                if i & ma != 0 && i & mb == 0 {
                    self.amps.swap(i, i ^ ma ^ mb);
                }
            }
        }
        self.gate_count += 1;
    }
}

/// Uniform superposition `S^{-1/2} sum_z |z>|0>` from `s` Hadamards.
pub fn prepare_superposition(s: u32) -> Result<PureState> {
    prepare_superposition_with_limit(s, DEFAULT_MAX_QUBITS)
}

pub fn prepare_superposition_with_limit(s: u32, limit: u32) -> Result<PureState> {
    let mut st = PureState::zero(s, limit)?;
    for j in 0..s {
        st.hadamard(j);
    }
    Ok(st)
}

fn check_dims(state: &PureState, grid: &CellGrid) -> Result<()> {
    if state.s != grid.qubits() {
        return Err(Error::DimensionMismatch {
            state: state.s,
            grid: grid.qubits(),
        });
    }
    Ok(())
}

/// `|z>|0> -> |z>|f(z)>`; defined only for states with an empty ancilla-1 branch.
pub fn oracle_amplitude(mut state: PureState, grid: &CellGrid) -> Result<PureState> {
    check_dims(&state, grid)?;
    if state.amps.iter().skip(1).step_by(2).any(|a| *a != ZERO) {
        return Err(Error::AncillaPopulated);
    }
    for (z, pair) in state.amps.chunks_exact_mut(2).enumerate() {
        if grid.at(z) {
            pair.swap(0, 1);
        }
    }
    state.query_count += 1;
    Ok(state)
}

/// `|z>|a> -> |z>|a xor f(z)>`, an involution on the whole space.
pub fn oracle_phase_xor(mut state: PureState, grid: &CellGrid) -> Result<PureState> {
    check_dims(&state, grid)?;
    for (z, pair) in state.amps.chunks_exact_mut(2).enumerate() {
        if grid.at(z) {
            pair.swap(0, 1);
        }
    }
    state.query_count += 1;
    Ok(state)
}

/// Classical truth table `(a, b, 0) -> (a, !a & b, a & b)`.
pub fn switch_gate(alpha: bool, beta: bool) -> (bool, bool, bool) {
    (alpha, !alpha && beta, alpha && beta)
}

/// Three-qubit switch acting on amplitudes indexed `a<<2 | b<<1 | c`; the
/// third input must be `|0>`.
pub fn switch_gate_unitary(amps: &[Complex64; 8]) -> Result<[Complex64; 8]> {
    if (0..8).any(|i| i & 1 == 1 && amps[i] != ZERO) {
        return Err(Error::SwitchInput);
    }
    let mut out = [ZERO; 8];
    for a in 0..2usize {
        for b in 0..2usize {
            let (oa, ob, oc) = switch_gate(a == 1, b == 1);
            out[(oa as usize) << 2 | (ob as usize) << 1 | oc as usize] += amps[a << 2 | b << 1];
        }
    }
    Ok(out)
}

/// Projects onto the ancilla-1 branch and renormalises.
pub fn postselect_f1(state: PureState) -> Result<(PureState, f64)> {
    let p: f64 = state
        .amps
        .iter()
        .skip(1)
        .step_by(2)
        .map(|a| a.norm_sqr())
        .sum();
    if p <= 0.0 {
        return Err(Error::PostselectionImpossible);
    }
    let scale = 1.0 / p.sqrt();
    let mut out = state;
    for pair in out.amps.chunks_exact_mut(2) {
        pair[0] = ZERO;
        pair[1] *= scale;
    }
    Ok((out, p))
}

/// Exact gate count of [`qft_circuit`] on `s` qubits.
pub fn qft_gate_count(s: u32) -> u64 {
    let s = s as u64;
    s * (s + 1) / 2 + s / 2
}

/// Gates charged per sample by [`semiclassical_qft_sample`].
pub fn semiclassical_gate_count(s: u32) -> u64 {
    2 * s as u64 - 1
}

/// `|z> -> S^{-1/2} sum_k e^{+2 pi i z k / S} |k>` on the coordinate register,
/// built from Hadamards, controlled phases and a final bit reversal.
pub fn qft_circuit(mut state: PureState) -> PureState {
    let s = state.s;
    for j in (0..s).rev() {
        state.hadamard(j);
        for l in (0..j).rev() {
            state.controlled_phase(l, j, 2.0 * PI / (1u64 << (j - l + 1)) as f64);
        }
    }
    for j in 0..s / 2 {
        state.swap(j, s - 1 - j);
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub k: usize,
    pub shot_id: u64,
}

/// Independent draws of the coordinate register from `|amplitude|^2`.
pub fn sample_k(state: &PureState, shots: usize, rng: &mut impl Rng) -> Vec<MeasurementSample> {
    sample_from(&state.probabilities(), shots, 0, rng)
}

pub(crate) fn sample_from(
    probs: &[f64],
    shots: usize,
    first_id: u64,
    rng: &mut impl Rng,
) -> Vec<MeasurementSample> {
    if shots == 0 {
        return Vec::new();
    }
    let dist = WeightedIndex::new(probs).expect("probabilities must have positive mass");
    (0..shots)
        .map(|i| MeasurementSample {
            k: dist.sample(rng),
            shot_id: first_id + i as u64,
        })
        .collect()
}

/// One outcome of the measurement-based QFT: each qubit is measured right
/// after its Hadamard and earlier outcomes drive classical phase rotations.
/// The caller's state is left unchanged apart from its gate counter.
pub fn semiclassical_qft_sample(
    state: &mut PureState,
    shot_id: u64,
    rng: &mut impl Rng,
) -> MeasurementSample {
    let mut work = state.clone();
    let s = state.s;
    let mut bits = vec![false; s as usize];
    for j in (0..s).rev() {
        if j + 1 < s {
            work.phase(j, feedback_angle(&bits, j));
        }
        work.hadamard(j);
        let mask = 1usize << (j + 1);
        let p1: f64 = work
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let total = work.norm().powi(2);
        let one = rng.gen::<f64>() * total < p1;
        collapse(&mut work.amps, mask, one);
        bits[j as usize] = one;
    }
    state.gate_count = work.gate_count;
    MeasurementSample {
        k: outcome_from_bits(&bits),
        shot_id,
    }
}

fn feedback_angle(bits: &[bool], j: u32) -> f64 {
    (j as usize + 1..bits.len())
        .filter(|&m| bits[m])
        .map(|m| 2.0 * PI / (1u64 << (m - j as usize + 1)) as f64)
        .sum()
}

fn collapse(amps: &mut [Complex64], mask: usize, one: bool) {
    let mut kept = 0.0;
    for (i, a) in amps.iter_mut().enumerate() {
        if (i & mask != 0) != one {
            *a = ZERO;
        } else {
            kept += a.norm_sqr();
        }
    }
    let scale = 1.0 / kept.sqrt();
    amps.iter_mut().for_each(|a| *a *= scale);
}

fn outcome_from_bits(bits: &[bool]) -> usize {
    let s = bits.len();
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(j, _)| 1usize << (s - 1 - j))
        .sum()
}

/// Exact outcome distribution of the measurement-based QFT, found by
/// enumerating every measurement branch. Limited to `s <= 12`.
pub fn semiclassical_distribution(state: &PureState) -> Result<Vec<f64>> {
    if state.s > 12 {
        return Err(Error::TooManyQubits {
            requested: state.s,
            limit: 12,
        });
    }
    let mut out = vec![0.0; state.size()];
    let mut bits = vec![false; state.s as usize];
    branch(state.clone(), state.s, &mut bits, 1.0, &mut out);
    Ok(out)
}

fn branch(mut work: PureState, j_plus: u32, bits: &mut [bool], prob: f64, out: &mut [f64]) {
    if j_plus == 0 {
        out[outcome_from_bits(bits)] += prob;
        return;
    }
    let j = j_plus - 1;
    if j + 1 < work.s {
        work.phase(j, feedback_angle(bits, j));
    }
    work.hadamard(j);
    let mask = 1usize << (j + 1);
    let total = work.norm().powi(2);
    let p1: f64 = work
        .amps
        .iter()
        .enumerate()
        .filter(|(i, _)| i & mask != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        / total;
    for (one, p) in [(false, 1.0 - p1), (true, p1)] {
        if p <= 0.0 {
            continue;
        }
        let mut next = work.clone();
        collapse(&mut next.amps, mask, one);
        bits[j as usize] = one;
        branch(next, j, bits, prob * p, out);
    }
    bits[j as usize] = false;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Amplitude,
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub gates: u64,
    pub queries: u64,
    pub trials: u64,
    pub shots: u64,
}

impl Counters {
    pub fn merge(&mut self, other: &Counters) {
        self.gates += other.gates;
        self.queries += other.queries;
        self.trials += other.trials;
        self.shots += other.shots;
    }
}

/// State right before measurement: amplitude encoding is post-selected on
/// `f = 1`, phase encoding starts the ancilla in `(|0> - |1>)/sqrt 2`.
pub fn post_qft_state(grid: &CellGrid, encoding: Encoding) -> Result<(PureState, f64)> {
    let (prepared, p) = pre_qft_state(grid, encoding)?;
    Ok((qft_circuit(prepared), p))
}

/// The encoded state before the transform, with the post-selection
/// probability (1 for phase encoding).
pub fn pre_qft_state(grid: &CellGrid, encoding: Encoding) -> Result<(PureState, f64)> {
    let s = grid.qubits();
    let limit = DEFAULT_MAX_QUBITS.max(s);
    let st = prepare_superposition_with_limit(s, limit)?;
    match encoding {
        Encoding::Amplitude => postselect_f1(oracle_amplitude(st, grid)?),
        Encoding::Phase => {
            let mut st = st;
            st.x_ancilla();
            st.hadamard_ancilla();
            Ok((oracle_phase_xor(st, grid)?, 1.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub samples: Vec<MeasurementSample>,
    pub counters: Counters,
    pub success_probability: f64,
}

/// End-to-end shots. Amplitude encoding repeats prepare, query and
/// post-selection until the ancilla reads 1 (geometric trials, each charged
/// one query); phase encoding spends exactly one query per shot. The exact
/// post-measurement distribution is computed once and reused for every shot.
pub fn run_pipeline(
    grid: &CellGrid,
    shots: usize,
    rng: &mut impl Rng,
    encoding: Encoding,
) -> Result<PipelineRun> {
    let (state, p) = post_qft_state(grid, encoding)?;
    let probs = state.probabilities();
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidState(e.to_string()))?;
    let s = grid.qubits();
    let prep_gates = match encoding {
        Encoding::Amplitude => s as u64,
        Encoding::Phase => s as u64 + 2,
    };
    let mut counters = Counters::default();
    let mut samples = Vec::with_capacity(shots);
    for shot in 0..shots {
        let trials = match encoding {
            Encoding::Amplitude => {
                let mut t = 1u64;
                while rng.gen::<f64>() >= p {
                    t += 1;
                }
                t
            }
            Encoding::Phase => 1,
        };
        counters.trials += trials;
        counters.queries += trials;
        counters.gates += trials * prep_gates + qft_gate_count(s);
        counters.shots += 1;
        samples.push(MeasurementSample {
            k: dist.sample(rng),
            shot_id: shot as u64,
        });
    }
    Ok(PipelineRun {
        samples,
        counters,
        success_probability: p,
    })
}
