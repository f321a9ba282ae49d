//! Config-driven experiments: generation, original and transposed runs,
//! analysis, artifact files and the gate/query/operation sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, Error, Result};
use crate::grid::{generate_grid, BackgroundSpec, CellGrid, Dims, LinePatternSpec, Region};
use crate::qsim::{
    pre_qft_state, qft_circuit, qft_gate_count, run_pipeline, semiclassical_qft_sample, Counters,
    Encoding, MeasurementSample,
};
use crate::recognize::{
    detect_peaks, estimate_chi, estimate_parameters, localise, presence, AnalysisMode, ChiEstimate,
    DetectionPolicy, Evidence, LocaliseConfig, LocaliseOutcome, PatternEstimate, PeakReport,
    Presence,
};
use crate::spectral::{exact_distribution, Spectrum};

/// Stream-separated seed: SplitMix64 finaliser over `seed` and `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const STREAM_ORIGINAL: u64 = 1;
pub const STREAM_TRANSPOSED: u64 = 2;
pub const STREAM_LOCALISE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Used columns; the array is padded with black cells to a power of two.
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default = "default_side")]
    pub height: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
    /// Read the array from a grid text file instead of generating it.
    #[serde(default)]
    pub input: Option<PathBuf>,
}

fn default_side() -> usize {
    64
}

fn default_rho() -> f64 {
    0.5
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            width: default_side(),
            height: default_side(),
            rho: default_rho(),
            seed: 0,
            input: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSection {
    pub spacing: f64,
    #[serde(default)]
    pub theta: f64,
    /// `[x0, y0, width, height]`; the whole used area when omitted.
    #[serde(default)]
    pub region: Option<[usize; 4]>,
    pub delta_rho: f64,
    #[serde(default)]
    pub z0: usize,
    #[serde(default)]
    pub line_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub mode: AnalysisMode,
    #[serde(default)]
    pub encoding: Encoding,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "yes")]
    pub transposed: bool,
    #[serde(default)]
    pub localise: bool,
    /// Subdivision granularity for localisation; defaults to `chi_target`.
    #[serde(default)]
    pub chi_hint: Option<f64>,
    /// Oracle-query budget for localisation; unlimited when absent.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default = "default_max_qubits")]
    pub max_qubits: u32,
    /// Constant `C` in `p = C (chi delta_rho)^2 / rho`.
    #[serde(default = "one")]
    pub chi_calibration: f64,
    /// Density excess assumed when converting peak probability to `chi`.
    #[serde(default)]
    pub delta_rho_assumed: Option<f64>,
}

fn default_shots() -> usize {
    10_000
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_max_qubits() -> u32 {
    crate::qsim::DEFAULT_MAX_QUBITS
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: AnalysisMode::Oracle,
            encoding: Encoding::Amplitude,
            shots: default_shots(),
            transposed: true,
            localise: false,
            chi_hint: None,
            budget: None,
            max_qubits: default_max_qubits(),
            chi_calibration: 1.0,
            delta_rho_assumed: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for artifacts; nothing is written when absent.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub pattern: Option<PatternSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub thresholds: DetectionPolicy,
    #[serde(default)]
    pub output: OutputSection,
}

fn cfg_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "config".into());
            cfg_err(&field, e.message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// First 16 hex digits of SHA-256 over the canonical TOML form, leaving
    /// out the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = None;
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    /// Applies a `section.key=value` override, parsing `value` as TOML.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        self.apply(&[assignment])
    }

    /// Applies several overrides at once and validates only the result, so
    /// e.g. a pattern can be introduced key by key.
    pub fn apply<S: AsRef<str>>(&mut self, assignments: &[S]) -> Result<()> {
        let mut doc =
            toml::Table::try_from(&*self).map_err(|e| cfg_err("config", e.to_string()))?;
        let mut last_key = String::from("config");
        for assignment in assignments {
            let assignment = assignment.as_ref();
            let (key, raw) = assignment
                .split_once('=')
                .ok_or_else(|| cfg_err(assignment, "expected key=value"))?;
            let key = key.trim();
            let raw = raw.trim();
            let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .map(|mut t| t.remove("v").expect("parsed key"))
                .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
            let mut parts: Vec<&str> = key.split('.').collect();
            let last = parts
                .pop()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| cfg_err(key, "empty key"))?;
            let mut table = &mut doc;
            for p in parts {
                table = table
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| cfg_err(key, format!("`{p}` is not a section")))?;
            }
            table.insert(last.to_string(), value);
            last_key = key.to_string();
        }
        let text = toml::to_string(&doc).map_err(|e| cfg_err(&last_key, e.to_string()))?;
        let updated: Self = toml::from_str(&text).map_err(|e| cfg_err(&last_key, e.message()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.input.is_none() {
            if g.width == 0 || g.height == 0 {
                return Err(cfg_err("grid.width", "array sides must be positive"));
            }
            if !(0.0..=1.0).contains(&g.rho) {
                return Err(cfg_err("grid.rho", format!("{} outside [0, 1]", g.rho)));
            }
        } else if self.pattern.is_some() {
            return Err(cfg_err(
                "pattern",
                "a pattern cannot be combined with grid.input",
            ));
        }
        let dims = self.dims()?;
        if dims.qubits() > self.run.max_qubits {
            return Err(cfg_err(
                "grid.width",
                format!(
                    "{} qubits exceed run.max_qubits = {}",
                    dims.qubits(),
                    self.run.max_qubits
                ),
            ));
        }
        if let Some(p) = &self.pattern {
            let spec = self.pattern_spec()?.expect("pattern present");
            let region = spec.region;
            if region.x0 + region.width > g.width || region.y0 + region.height > g.height {
                return Err(cfg_err(
                    "pattern.region",
                    "region lies outside the used array",
                ));
            }
            spec.validate(dims, g.rho)
                .map_err(|e| cfg_err("pattern", e.to_string()))?;
            if p.delta_rho < 0.0 {
                return Err(cfg_err("pattern.delta_rho", "must be non-negative"));
            }
        }
        let r = &self.run;
        if r.mode == AnalysisMode::Sample && r.shots == 0 {
            return Err(cfg_err("run.shots", "sample mode needs at least one shot"));
        }
        if r.chi_calibration.is_nan() || r.chi_calibration <= 0.0 {
            return Err(cfg_err("run.chi_calibration", "must be positive"));
        }
        if let Some(c) = r.chi_hint {
            if !(c > 0.0 && c <= 1.0) {
                return Err(cfg_err("run.chi_hint", "must lie in (0, 1]"));
            }
        }
        let t = &self.thresholds;
        if t.tau.is_nan() || t.tau <= 0.0 {
            return Err(cfg_err("thresholds.tau", "must be positive"));
        }
        if !(t.chi_target > 0.0 && t.chi_target <= 1.0) {
            return Err(cfg_err("thresholds.chi_target", "must lie in (0, 1]"));
        }
        if t.false_alarm.is_nan() || t.false_alarm <= 0.0 {
            return Err(cfg_err("thresholds.false_alarm", "must be positive"));
        }
        Ok(())
    }

    pub fn dims(&self) -> Result<Dims> {
        match &self.grid.input {
            Some(path) => Ok(read_grid(path)?.dims()),
            None => Dims::covering(self.grid.width, self.grid.height),
        }
    }

    pub fn pattern_spec(&self) -> Result<Option<LinePatternSpec>> {
        Ok(self.pattern.as_ref().map(|p| {
            let region = p
                .region
                .map(|[x0, y0, w, h]| Region::new(x0, y0, w, h))
                .unwrap_or_else(|| Region::new(0, 0, self.grid.width, self.grid.height));
            LinePatternSpec {
                spacing: p.spacing,
                theta: p.theta,
                region,
                delta_rho: p.delta_rho,
                z0: p.z0,
                line_width: p.line_width,
            }
        }))
    }

    /// Generated (or loaded) array, padded outside the used area.
    pub fn build_grid(&self) -> Result<CellGrid> {
        if let Some(path) = &self.grid.input {
            return read_grid(path);
        }
        let dims = self.dims()?;
        let spec = self.pattern_spec()?;
        let raw = generate_grid(
            dims,
            spec.as_ref(),
            &BackgroundSpec::new(self.grid.rho, self.grid.seed),
        )?;
        let (w, h) = (self.grid.width, self.grid.height);
        if w == dims.width() && h == dims.height() {
            return Ok(raw);
        }
        Ok(CellGrid::from_fn(dims, |x, y| {
            x < w && y < h && raw.cells()[x + dims.width() * y]
        }))
    }
}

pub fn read_grid(path: &Path) -> Result<CellGrid> {
    let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    CellGrid::from_text(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub grid: u64,
    pub original: u64,
    pub transposed: u64,
}

impl Seeds {
    pub fn from_base(seed: u64) -> Self {
        Self {
            grid: seed,
            original: derive_seed(seed, STREAM_ORIGINAL),
            transposed: derive_seed(seed, STREAM_TRANSPOSED),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunCounters {
    /// Oracle queries spent by sampled shots (both runs).
    pub oracle_queries: u64,
    pub trials: u64,
    pub shots: u64,
    /// Gates spent by sampled shots (both runs).
    pub quantum_gates: u64,
    pub qft_gates_per_shot: u64,
    pub semiclassical_gates_per_shot: u64,
    /// Butterflies of the classical transforms computed for the analysis.
    pub classical_transform_ops: u64,
    pub localise_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seeds: Seeds,
    pub dims: Dims,
    pub points: usize,
    pub rho_measured: f64,
    pub mode: AnalysisMode,
    pub encoding: Encoding,
    pub presence: Presence,
    pub peaks: PeakReport,
    pub peaks_transposed: Option<PeakReport>,
    pub estimate: Option<PatternEstimate>,
    /// Why no estimate was produced, when none was.
    pub estimate_note: Option<String>,
    pub chi: ChiEstimate,
    pub localisation: Option<LocaliseOutcome>,
    pub counters: RunCounters,
    pub artifacts: Vec<String>,
    /// Kept out of `report.json` so reports are byte-identical across runs.
    #[serde(skip)]
    pub wall_time_s: f64,
}

struct Side {
    report: PeakReport,
    spectrum: Option<Spectrum>,
    samples: Option<Vec<MeasurementSample>>,
    counters: Counters,
    transform_ops: u64,
}

fn analyse(grid: &CellGrid, cfg: &ExperimentConfig, seed: u64) -> Result<Side> {
    let dims = grid.dims();
    let policy = &cfg.thresholds;
    match cfg.run.mode {
        AnalysisMode::Oracle => {
            let spec = exact_distribution(grid, cfg.run.encoding)?;
            let report = detect_peaks(Evidence::Spectrum(&spec), dims, policy)?;
            let ops = spec.transform_ops;
            Ok(Side {
                report,
                spectrum: Some(spec),
                samples: None,
                counters: Counters::default(),
                transform_ops: ops,
            })
        }
        AnalysisMode::Sample => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let run = run_pipeline(grid, cfg.run.shots, &mut rng, cfg.run.encoding)?;
            let report = detect_peaks(
                Evidence::Samples {
                    samples: &run.samples,
                    s_len: dims.len(),
                },
                dims,
                policy,
            )?;
            Ok(Side {
                report,
                spectrum: None,
                samples: Some(run.samples),
                counters: run.counters,
                transform_ops: 0,
            })
        }
    }
}

/// Generate, run the pipeline on the array and its transpose, detect peaks,
/// estimate the parameters and optionally localise. Deterministic in the
/// config; artifacts go to `output.dir` when set.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    cfg.validate()?;
    let hash = cfg.hash();
    let seeds = Seeds::from_base(cfg.grid.seed);
    let grid = cfg.build_grid()?;
    let dims = grid.dims();
    let original = analyse(&grid, cfg, seeds.original)?;
    let transposed_grid = cfg.run.transposed.then(|| grid.transpose());
    let transposed = match &transposed_grid {
        Some(t) => Some(analyse(t, cfg, seeds.transposed)?),
        None => None,
    };

    let (estimate, estimate_note) = match &transposed {
        Some(t) if !original.report.is_empty() && !t.report.is_empty() => {
            match estimate_parameters(&original.report, &t.report, dims, &cfg.thresholds) {
                Ok(mut e) => {
                    e.chi_hat = Some(chi_of(&original.report, &grid, cfg));
                    (Some(e), None)
                }
                Err(e) => (None, Some(e.to_string())),
            }
        }
        Some(_) => (
            None,
            Some("a run found no peaks; only a presence statement is possible".into()),
        ),
        None => (None, Some("transposed run disabled".into())),
    };

    let localisation = if cfg.run.localise {
        let lc = LocaliseConfig {
            mode: cfg.run.mode,
            encoding: cfg.run.encoding,
            shots: cfg.run.shots,
            policy: cfg.thresholds,
            budget: cfg.run.budget.unwrap_or(u64::MAX),
            seed: derive_seed(cfg.grid.seed, STREAM_LOCALISE),
        };
        Some(localise(
            &grid,
            cfg.run.chi_hint.unwrap_or(cfg.thresholds.chi_target),
            &lc,
        )?)
    } else {
        None
    };

    let s = dims.qubits();
    let mut counters = RunCounters {
        qft_gates_per_shot: qft_gate_count(s),
        semiclassical_gates_per_shot: crate::qsim::semiclassical_gate_count(s),
        localise_queries: localisation.as_ref().map_or(0, |l| l.queries_used),
        ..Default::default()
    };
    for side in std::iter::once(&original).chain(transposed.iter()) {
        counters.oracle_queries += side.counters.queries;
        counters.trials += side.counters.trials;
        counters.shots += side.counters.shots;
        counters.quantum_gates += side.counters.gates;
        counters.classical_transform_ops += side.transform_ops;
    }

    let mut report = RunReport {
        config_hash: hash,
        seeds,
        dims,
        points: grid.point_count(),
        rho_measured: grid.rho(),
        mode: cfg.run.mode,
        encoding: cfg.run.encoding,
        presence: presence(&original.report),
        chi: chi_of(&original.report, &grid, cfg),
        peaks: original.report.clone(),
        peaks_transposed: transposed.as_ref().map(|t| t.report.clone()),
        estimate,
        estimate_note,
        localisation,
        counters,
        artifacts: Vec::new(),
        wall_time_s: 0.0,
    };
    if let Some(dir) = &cfg.output.dir {
        report.artifacts =
            write_artifacts(dir, cfg, &grid, &original, transposed.as_ref(), &report)?;
    }
    report.wall_time_s = started.elapsed().as_secs_f64();
    if let Some(dir) = &cfg.output.dir {
        let timing = serde_json::json!({ "config_hash": report.config_hash, "wall_time_s": report.wall_time_s });
        write_file(&dir.join("timing.json"), &format!("{timing:#}\n"))?;
    }
    Ok(report)
}

fn chi_of(report: &PeakReport, grid: &CellGrid, cfg: &ExperimentConfig) -> ChiEstimate {
    estimate_chi(
        report,
        grid.rho(),
        cfg.run.delta_rho_assumed,
        cfg.run.chi_calibration,
    )
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(format!("writing {}", path.display())))
}

/// `# config_hash=... seed=...` header shared by every CSV artifact.
pub fn csv_header(hash: &str, seeds: &Seeds) -> String {
    format!(
        "# config_hash={hash} seed={} original_seed={} transposed_seed={}\n",
        seeds.grid, seeds.original, seeds.transposed
    )
}

pub fn samples_csv(samples: &[MeasurementSample], header: &str) -> String {
    let mut out = String::with_capacity(samples.len() * 12 + header.len() + 16);
    out.push_str(header);
    out.push_str("shot_id,k\n");
    for s in samples {
        let _ = writeln!(out, "{},{}", s.shot_id, s.k);
    }
    out
}

pub fn spectrum_csv(spectrum: &Spectrum, header: &str) -> String {
    let mut out = String::with_capacity(spectrum.len() * 28 + header.len() + 8);
    out.push_str(header);
    out.push_str("k,p\n");
    for (k, p) in spectrum.probs.iter().enumerate() {
        let _ = writeln!(out, "{k},{p:e}");
    }
    out
}

fn write_artifacts(
    dir: &Path,
    cfg: &ExperimentConfig,
    grid: &CellGrid,
    original: &Side,
    transposed: Option<&Side>,
    report: &RunReport,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    let header = csv_header(&report.config_hash, &report.seeds);
    let mut files: Vec<(String, String)> = vec![(
        "grid.txt".into(),
        grid.to_text(&[format!(
            "config_hash={} seed={}",
            report.config_hash, report.seeds.grid
        )]),
    )];
    for (suffix, side) in
        std::iter::once(("", original)).chain(transposed.map(|t| ("_transposed", t)))
    {
        if let Some(samples) = &side.samples {
            files.push((
                format!("samples{suffix}.csv"),
                samples_csv(samples, &header),
            ));
        }
        if let Some(spec) = &side.spectrum {
            files.push((format!("spectrum{suffix}.csv"), spectrum_csv(spec, &header)));
        }
    }
    let counters = serde_json::json!({
        "config_hash": report.config_hash,
        "seeds": report.seeds,
        "gates": report.counters.quantum_gates,
        "queries": report.counters.oracle_queries,
        "trials": report.counters.trials,
    });
    files.push(("counters.json".into(), format!("{counters:#}\n")));
    files.push((
        "config.toml".into(),
        format!("# config_hash={}\n{}", report.config_hash, cfg.to_toml()),
    ));
    let mut names: Vec<String> = files.iter().map(|(n, _)| n.clone()).collect();
    names.push("report.json".into());
    for (name, text) in &files {
        write_file(&dir.join(name), text)?;
    }
    let mut final_report = report.clone();
    final_report.artifacts = names.clone();
    write_file(&dir.join("report.json"), &report_json(&final_report))?;
    Ok(names)
}

pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialises");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: u32,
    pub size: usize,
    /// Gate counter after running the full QFT circuit.
    pub qft_gates: u64,
    pub qft_closed_form: u64,
    /// Mean gate-counter increase per measurement-based sample.
    pub semiclassical_gates: f64,
    pub queries_per_shot_amplitude: f64,
    pub queries_per_shot_phase: f64,
    /// Butterflies of the classical transform.
    pub classical_ops: u64,
}

/// Counter readouts per size `s` on a background-only array of density
/// `template.grid.rho`, with `template.run.shots` shots per encoding.
pub fn complexity_sweep(sizes: &[u32], template: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    sizes
        .iter()
        .map(|&s| {
            if s == 0 || s > template.run.max_qubits {
                return Err(cfg_err(
                    "sweep.sizes",
                    format!("size {s} outside 1..={}", template.run.max_qubits),
                ));
            }
            let dims = Dims::new(s.div_ceil(2), s / 2);
            let seed = derive_seed(template.grid.seed, s as u64);
            let mut grid =
                generate_grid(dims, None, &BackgroundSpec::new(template.grid.rho, seed))?;
            if grid.point_count() == 0 {
                grid = CellGrid::from_points(dims, &[0])?;
            }
            let (pre, _) = pre_qft_state(&grid, Encoding::Amplitude)?;
            let before = pre.gate_count();
            let qft_gates = qft_circuit(pre.clone()).gate_count() - before;

            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_ORIGINAL));
            let mut st = pre;
            let reps = 4u64;
            for shot in 0..reps {
                semiclassical_qft_sample(&mut st, shot, &mut rng);
            }
            let semiclassical_gates = (st.gate_count() - before) as f64 / reps as f64;

            let shots = template.run.shots.max(1);
            let amp = run_pipeline(&grid, shots, &mut rng, Encoding::Amplitude)?;
            let phase = run_pipeline(&grid, shots, &mut rng, Encoding::Phase)?;
            let classical_ops = exact_distribution(&grid, Encoding::Amplitude)?.transform_ops;
            Ok(SweepRow {
                s,
                size: dims.len(),
                qft_gates,
                qft_closed_form: qft_gate_count(s),
                semiclassical_gates,
                queries_per_shot_amplitude: amp.counters.queries as f64 / shots as f64,
                queries_per_shot_phase: phase.counters.queries as f64 / shots as f64,
                classical_ops,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow], header: &str) -> String {
    let mut out = String::from(header);
    out.push_str(
        "s,size,qft_gates,qft_closed_form,semiclassical_gates,queries_per_shot_amplitude,queries_per_shot_phase,classical_ops\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.s,
            r.size,
            r.qft_gates,
            r.qft_closed_form,
            r.semiclassical_gates,
            r.queries_per_shot_amplitude,
            r.queries_per_shot_phase,
            r.classical_ops
        );
    }
    out
}
