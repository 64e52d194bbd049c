//! Time-dependent multilevel Hamiltonians (Duffing ladders + exchange
//! couplings + flux trajectories + parametric modulation) and
//! Schrödinger/Lindblad integration on top of [`engine`].
//!
//! Units: ordinary frequencies in GHz everywhere at the API surface; time
//! in ns. Angular conversion happens only inside the engine. Numerically,
//! each evolution runs in a diagonal rotating frame (one reference
//! frequency per mode, default the trajectory time-average); populations
//! are frame-invariant, and chained stage evolutions stay consistent by
//! passing explicit `frame_refs` and absolute time spans.

pub mod engine;

use ndarray::Array1;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceGraph, DeviceError};
use crate::scalar::{two_pi, Cplx, Real};
use crate::special::bessel_j;
use crate::tensorspace::{
    self, basis_state, embed, lowering_matrix, DensityMatrix, Operator, SpaceError, StateVector,
    TensorSpace,
};
use engine::{CollapseKind, CompiledSystem, DetuningFn, EngineError, StepperOptions, StepperStats};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("unknown mode {0:?} in subsystem")]
    UnknownMode(String),
    #[error("trajectory channel {0:?} is not a subsystem mode")]
    UnknownChannel(String),
    #[error("invalid trajectory on {channel:?}: {message}")]
    BadTrajectory { channel: String, message: String },
    #[error("modulation frequency must be positive")]
    ZeroModulationFrequency,
    #[error("harmonic order and excitation number must be >= 1")]
    BadDriveOrder,
    #[error("{0} frequencies supplied for {1} modes")]
    FreqCountMismatch(usize, usize),
    #[error("initial state invalid: {0}")]
    InvalidInitialState(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

// ---------------------------------------------------------------------------
// Flux trajectories
// ---------------------------------------------------------------------------

/// One piece of a coupler frequency trajectory. Durations in ns,
/// frequencies in GHz, phases in rad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SegmentKind<T> {
    Flat { omega: T },
    /// Raised-cosine ramp between two frequencies.
    AdiabaticEdge { from: T, to: T },
    /// Instantaneous jump to a frequency held for the segment.
    Square { omega: T },
    ParametricSinusoid {
        omega_bar: T,
        amplitude: T,
        freq: T,
        phase: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub kind: SegmentKind<T>,
    pub duration_ns: T,
}

impl<T: Real> Segment<T> {
    pub fn start_freq(&self) -> T {
        match &self.kind {
            SegmentKind::Flat { omega } | SegmentKind::Square { omega } => *omega,
            SegmentKind::AdiabaticEdge { from, .. } => *from,
            SegmentKind::ParametricSinusoid {
                omega_bar,
                amplitude,
                phase,
                ..
            } => *omega_bar + *amplitude * phase.sin(),
        }
    }

    pub fn end_freq(&self) -> T {
        match &self.kind {
            SegmentKind::Flat { omega } | SegmentKind::Square { omega } => *omega,
            SegmentKind::AdiabaticEdge { to, .. } => *to,
            SegmentKind::ParametricSinusoid {
                omega_bar,
                amplitude,
                freq,
                phase,
            } => {
                let arg = two_pi::<T>() * *freq * self.duration_ns + *phase;
                *omega_bar + *amplitude * arg.sin()
            }
        }
    }

    /// Frequency at local time t ∈ [0, duration].
    pub fn eval(&self, t_local: T) -> T {
        match &self.kind {
            SegmentKind::Flat { omega } | SegmentKind::Square { omega } => *omega,
            SegmentKind::AdiabaticEdge { from, to } => {
                let x = (t_local / self.duration_ns).max(T::zero()).min(T::one());
                let ramp = (T::one() - (T::PI() * x).cos()) / T::of(2.0);
                *from + (*to - *from) * ramp
            }
            SegmentKind::ParametricSinusoid {
                omega_bar,
                amplitude,
                freq,
                phase,
            } => {
                let arg = two_pi::<T>() * *freq * t_local + *phase;
                *omega_bar + *amplitude * arg.sin()
            }
        }
    }

    /// Time integral of the frequency over the full segment (GHz·ns).
    fn freq_integral(&self) -> T {
        match &self.kind {
            SegmentKind::Flat { omega } | SegmentKind::Square { omega } => {
                *omega * self.duration_ns
            }
            SegmentKind::AdiabaticEdge { from, to } => {
                (*from + *to) / T::of(2.0) * self.duration_ns
            }
            SegmentKind::ParametricSinusoid {
                omega_bar,
                amplitude,
                freq,
                phase,
            } => {
                let tp = two_pi::<T>();
                let w = tp * *freq;
                let end = w * self.duration_ns + *phase;
                *omega_bar * self.duration_ns + *amplitude * (phase.cos() - end.cos()) / w
            }
        }
    }
}

/// Per-channel frequency trajectory: contiguous segments starting at the
/// evolution's start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxTrajectory<T> {
    pub channel: String,
    pub segments: Vec<Segment<T>>,
}

impl<T: Real> FluxTrajectory<T> {
    pub fn flat(channel: impl Into<String>, omega: T, duration_ns: T) -> Self {
        Self {
            channel: channel.into(),
            segments: vec![Segment {
                kind: SegmentKind::Flat { omega },
                duration_ns,
            }],
        }
    }

    pub fn total_duration(&self) -> T {
        self.segments
            .iter()
            .fold(T::zero(), |acc, s| acc + s.duration_ns)
    }

    /// Pad with a flat hold of the final frequency up to `duration_ns`.
    pub fn pad_to(&mut self, duration_ns: T) {
        let total = self.total_duration();
        if duration_ns > total {
            let omega = self
                .segments
                .last()
                .map(|s| s.end_freq())
                .unwrap_or(T::zero());
            self.segments.push(Segment {
                kind: SegmentKind::Flat { omega },
                duration_ns: duration_ns - total,
            });
        }
    }

    /// Durations positive; adjacent segments continuous within 1 MHz unless
    /// a square edge declares the jump.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |message: String| DynamicsError::BadTrajectory {
            channel: self.channel.clone(),
            message,
        };
        if self.segments.is_empty() {
            return Err(bad("no segments".into()));
        }
        for s in &self.segments {
            if s.duration_ns <= T::zero() {
                return Err(bad("segment duration must be positive".into()));
            }
        }
        let tol = T::of(1e-3); // 1 MHz
        for pair in self.segments.windows(2) {
            let jump_declared = matches!(pair[0].kind, SegmentKind::Square { .. })
                || matches!(pair[1].kind, SegmentKind::Square { .. });
            if jump_declared {
                continue;
            }
            let gap = (pair[0].end_freq() - pair[1].start_freq()).abs();
            if gap > tol {
                return Err(bad(format!(
                    "frequency discontinuity of {} GHz between segments",
                    gap.to_f64().unwrap_or(f64::NAN)
                )));
            }
        }
        Ok(())
    }

    fn mean_freq(&self) -> T {
        let total = self.total_duration();
        if total <= T::zero() {
            return T::zero();
        }
        self.segments
            .iter()
            .fold(T::zero(), |acc, s| acc + s.freq_integral())
            / total
    }
}

/// Compiled channel: absolute-time segment table with flat extension past
/// the end.
struct CompiledChannel<T> {
    t_start: T,
    boundaries: Vec<T>,
    segments: Vec<Segment<T>>,
    tail_freq: T,
}

impl<T: Real> CompiledChannel<T> {
    fn new(traj: &FluxTrajectory<T>, t_start: T) -> Self {
        let mut boundaries = Vec::with_capacity(traj.segments.len() + 1);
        let mut t = t_start;
        boundaries.push(t);
        for s in &traj.segments {
            t = t + s.duration_ns;
            boundaries.push(t);
        }
        let tail_freq = traj
            .segments
            .last()
            .map(|s| s.end_freq())
            .unwrap_or(T::zero());
        Self {
            t_start,
            boundaries,
            segments: traj.segments.clone(),
            tail_freq,
        }
    }

    fn eval(&self, t: T) -> T {
        if t <= self.t_start {
            return self.segments[0].start_freq();
        }
        let last = *self.boundaries.last().unwrap();
        if t >= last {
            return self.tail_freq;
        }
        // Few segments; linear scan is fine.
        for (i, s) in self.segments.iter().enumerate() {
            if t < self.boundaries[i + 1] {
                return s.eval(t - self.boundaries[i]);
            }
        }
        self.tail_freq
    }
}

enum ModeDrive<T> {
    Constant(T),
    Channel(CompiledChannel<T>),
}

impl<T: Real> ModeDrive<T> {
    fn eval(&self, t: T) -> T {
        match self {
            ModeDrive::Constant(w) => *w,
            ModeDrive::Channel(ch) => ch.eval(t),
        }
    }
}

struct ModeDetuning<T> {
    drive: ModeDrive<T>,
    ref_ghz: T,
}

impl<T: Real> DetuningFn<T> for ModeDetuning<T> {
    fn detuning_ang(&self, t: T) -> T {
        two_pi::<T>() * (self.drive.eval(t) - self.ref_ghz)
    }
}

// ---------------------------------------------------------------------------
// Parametric drives and collapse models
// ---------------------------------------------------------------------------

/// Parametric modulation descriptor. `a_p` is the drive amplitude
/// parameter: the realized frequency excursion of the m-th harmonic
/// segment is `a_p / m`, so the effective coupling carries
/// `J_m(a_p / (m ω_p))` for every harmonic order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricDrive<T> {
    pub m: u32,
    pub a_p: T,
    pub omega_p: T,
    pub n_ex: u32,
}

impl<T: Real> ParametricDrive<T> {
    pub fn excursion(&self) -> T {
        self.a_p / T::of(self.m as f64)
    }
}

/// Effective swap strength of a parametric drive:
/// `g = √n_ex · g_qc · J_m(a_p / (m ω_p))`.
pub fn effective_parametric_coupling<T: Real>(
    drive: &ParametricDrive<T>,
    g_qc: T,
) -> Result<T, DynamicsError> {
    if drive.omega_p <= T::zero() {
        return Err(DynamicsError::ZeroModulationFrequency);
    }
    if drive.m == 0 || drive.n_ex == 0 {
        return Err(DynamicsError::BadDriveOrder);
    }
    let arg = drive.a_p / (T::of(drive.m as f64) * drive.omega_p);
    Ok(T::of(drive.n_ex as f64).sqrt() * g_qc * bessel_j(drive.m, arg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollapseOp {
    /// √γ a — energy relaxation or photon loss.
    Relaxation,
    /// √γ a†a — pure dephasing.
    Dephasing,
}

/// Collapse channels of a subsystem; rates are Lindblad γ in 1/ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladModel<T> {
    pub terms: Vec<(String, CollapseOp, T)>,
}

impl<T: Real> LindbladModel<T> {
    pub fn none() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (label, _, rate) in &self.terms {
            if *rate < T::zero() {
                return Err(DynamicsError::InvalidInitialState(format!(
                    "negative collapse rate on {label}"
                )));
            }
        }
        Ok(())
    }

    /// Dense (Operator, rate) view for inspection and tests.
    pub fn operators(&self, sub: &Subsystem) -> Result<Vec<(Operator<T>, T)>, DynamicsError> {
        let mut out = Vec::new();
        for (label, op, rate) in &self.terms {
            let mode = sub.mode_index(label)?;
            let dim = sub.space.dim(mode);
            let local = match op {
                CollapseOp::Relaxation => lowering_matrix::<T>(dim)?,
                CollapseOp::Dephasing => tensorspace::number_matrix::<T>(dim),
            };
            out.push((embed(&sub.space, mode, &local)?, *rate));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Subsystems
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Qubit,
    Coupler,
    Resonator,
}

/// A selection of device elements promoted to tensor-product modes.
#[derive(Debug, Clone)]
pub struct Subsystem {
    pub space: TensorSpace,
    pub labels: Vec<String>,
    pub kinds: Vec<ElementKind>,
    /// Idle (qubit/coupler) or fixed (resonator) frequencies, GHz.
    pub base_freqs: Vec<f64>,
    pub alphas: Vec<f64>,
    /// (mode j, mode k, g GHz) exchange edges present in the device graph.
    pub edges: Vec<(usize, usize, f64)>,
}

/// Default truncations: qubits keep g,e,f,h; couplers and resonators keep
/// a guard level above the states the protocols populate.
pub const QUBIT_LEVELS: usize = 4;
pub const COUPLER_LEVELS: usize = 3;
pub const RESONATOR_LEVELS: usize = 3;

impl Subsystem {
    pub fn from_device(device: &DeviceGraph, labels: &[&str]) -> Result<Self, DynamicsError> {
        let dims: Vec<usize> = labels
            .iter()
            .map(|l| {
                if device.qubit(l).is_ok() {
                    QUBIT_LEVELS
                } else if device.coupler(l).is_ok() {
                    COUPLER_LEVELS
                } else {
                    RESONATOR_LEVELS
                }
            })
            .collect();
        Self::with_dims(device, labels, &dims)
    }

    pub fn with_dims(
        device: &DeviceGraph,
        labels: &[&str],
        dims: &[usize],
    ) -> Result<Self, DynamicsError> {
        let mut kinds = Vec::new();
        let mut base_freqs = Vec::new();
        let mut alphas = Vec::new();
        for label in labels {
            if let Ok(q) = device.qubit(label) {
                kinds.push(ElementKind::Qubit);
                base_freqs.push(q.omega_idle);
                alphas.push(q.alpha);
            } else if let Ok(c) = device.coupler(label) {
                kinds.push(ElementKind::Coupler);
                base_freqs.push(c.omega_idle);
                alphas.push(c.alpha);
            } else if let Ok(r) = device.resonator(label) {
                kinds.push(ElementKind::Resonator);
                base_freqs.push(r.omega_r);
                alphas.push(0.0);
            } else {
                return Err(DynamicsError::UnknownMode(label.to_string()));
            }
        }
        let space = TensorSpace::new(dims.to_vec(), labels.to_vec())?;
        let mut edges = Vec::new();
        for j in 0..labels.len() {
            for k in (j + 1)..labels.len() {
                if let Some(e) = device.coupling_between(labels[j], labels[k]) {
                    edges.push((j, k, e.g));
                }
            }
        }
        Ok(Self {
            space,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            kinds,
            base_freqs,
            alphas,
            edges,
        })
    }

    pub fn mode_index(&self, label: &str) -> Result<usize, DynamicsError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| DynamicsError::UnknownMode(label.to_string()))
    }

    /// Basis state from per-mode levels.
    pub fn basis<T: Real>(&self, levels: &[usize]) -> Result<StateVector<T>, DynamicsError> {
        Ok(basis_state(&self.space, levels)?)
    }
}

/// Dense Hamiltonian snapshot at given per-mode frequencies (GHz, ordinary
/// frequency units): Σ ω a†a + (α/2) a†a†aa + Σ g (a†b + ab†).
pub fn build_hamiltonian<T: Real>(
    sub: &Subsystem,
    freqs: &[T],
) -> Result<Operator<T>, DynamicsError> {
    if freqs.len() != sub.labels.len() {
        return Err(DynamicsError::FreqCountMismatch(
            freqs.len(),
            sub.labels.len(),
        ));
    }
    let mut h = Operator::zeros(sub.space.clone());
    for (m, &freq) in freqs.iter().enumerate() {
        let dim = sub.space.dim(m);
        let mut local = ndarray::Array2::<Complex<T>>::zeros((dim, dim));
        let alpha = T::of(sub.alphas[m]);
        let half = T::of(0.5);
        for n in 0..dim {
            let nn = T::of(n as f64);
            let e = freq * nn + half * alpha * nn * (nn - T::one());
            local[[n, n]] = Complex::new(e, T::zero());
        }
        h = h.add(&embed(&sub.space, m, &local)?)?;
    }
    for &(j, k, g) in &sub.edges {
        let aj = embed(&sub.space, j, &lowering_matrix::<T>(sub.space.dim(j))?)?;
        let ak = embed(&sub.space, k, &lowering_matrix::<T>(sub.space.dim(k))?)?;
        let term = aj.dagger().matmul(&ak)?;
        let sum = term.add(&term.dagger())?;
        h = h.add(&sum.scale(Complex::new(T::of(g), T::zero())))?;
    }
    Ok(h)
}

/// Collapse channels of a subsystem from the device coherence table:
/// relaxation √(1/T1)·a per transmon mode, pure dephasing √(2/T_φ)·a†a for
/// qubits, photon loss √κ_r·a for resonators (κ in angular units).
pub fn collapse_operators(
    device: &DeviceGraph,
    sub: &Subsystem,
) -> Result<LindbladModel<f64>, DynamicsError> {
    let mut terms = Vec::new();
    for (m, label) in sub.labels.iter().enumerate() {
        match sub.kinds[m] {
            ElementKind::Qubit => {
                let q = device.qubit(label)?;
                terms.push((label.clone(), CollapseOp::Relaxation, 1e-3 / q.t1));
                let gamma_phi = 2e-3 * q.pure_dephasing_rate();
                if gamma_phi > 0.0 {
                    terms.push((label.clone(), CollapseOp::Dephasing, gamma_phi));
                }
            }
            ElementKind::Coupler => {
                let c = device.coupler(label)?;
                terms.push((label.clone(), CollapseOp::Relaxation, 1e-3 / c.t1));
            }
            ElementKind::Resonator => {
                let r = device.resonator(label)?;
                // κ_r quoted in MHz: rate 2π · κ_r · 1e-3 per ns.
                terms.push((
                    label.clone(),
                    CollapseOp::Relaxation,
                    2.0 * std::f64::consts::PI * r.kappa_r * 1e-3,
                ));
            }
        }
    }
    Ok(LindbladModel { terms })
}

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EvolveOptions<T> {
    /// Local error tolerance per step.
    pub tol: T,
    /// Number of save points across the span (>= 2, endpoints included).
    pub save_points: usize,
    /// Per-mode numerical frame references (GHz). Default: trajectory means.
    pub frame_refs: Option<Vec<T>>,
    pub max_step: T,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-8),
            save_points: 101,
            frame_refs: None,
            max_step: T::of(5.0),
        }
    }
}

/// Time series of an evolution: per-mode per-level populations on the save
/// grid, plus the final state.
#[derive(Debug, Clone)]
pub struct EvolutionResult<T: Real> {
    pub times: Vec<T>,
    pub mode_labels: Vec<String>,
    pub mode_dims: Vec<usize>,
    /// populations[mode][level][time index].
    pub populations: Vec<Vec<Vec<T>>>,
    pub final_density: Option<DensityMatrix<T>>,
    pub final_state: Option<StateVector<T>>,
    /// Maximum |trace − 1| (density) or |norm − 1| (state) over saves.
    pub trace_drift: T,
    pub steps: usize,
    pub rhs_evals: usize,
}

impl<T: Real> EvolutionResult<T> {
    /// Population time series of `level` on `mode`.
    pub fn population(&self, mode: &str, level: usize) -> Result<&[T], DynamicsError> {
        let m = self
            .mode_labels
            .iter()
            .position(|l| l == mode)
            .ok_or_else(|| DynamicsError::UnknownMode(mode.to_string()))?;
        if level >= self.mode_dims[m] {
            return Err(DynamicsError::UnknownMode(format!("{mode}:{level}")));
        }
        Ok(&self.populations[m][level])
    }

    pub fn final_population(&self, mode: &str, level: usize) -> Result<T, DynamicsError> {
        let series = self.population(mode, level)?;
        Ok(*series.last().unwrap())
    }

    /// CSV export: `time_ns` then one `<mode>_<level>` column per level.
    pub fn to_csv(&self) -> String {
        let mut header = String::from("time_ns");
        for (m, label) in self.mode_labels.iter().enumerate() {
            for l in 0..self.mode_dims[m] {
                header.push_str(&format!(",{label}_{l}"));
            }
        }
        let mut out = header;
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t}"));
            for (m, _) in self.mode_labels.iter().enumerate() {
                for l in 0..self.mode_dims[m] {
                    out.push_str(&format!(",{}", self.populations[m][l][k]));
                }
            }
            out.push('\n');
        }
        out
    }
}

struct EvolvePlan<'a> {
    sub: &'a Subsystem,
    drives: Vec<ModeDetuning<f64>>,
    refs: Vec<f64>,
    knots: Vec<f64>,
}

fn plan_evolution<'a>(
    sub: &'a Subsystem,
    trajectories: &[FluxTrajectory<f64>],
    t_span: (f64, f64),
    opts: &EvolveOptions<f64>,
) -> Result<EvolvePlan<'a>, DynamicsError> {
    let n_modes = sub.labels.len();
    let mut drive_per_mode: Vec<Option<CompiledChannel<f64>>> = (0..n_modes).map(|_| None).collect();
    let mut boundary_times = Vec::new();
    for traj in trajectories {
        traj.validate()?;
        let m = sub
            .mode_index(&traj.channel)
            .map_err(|_| DynamicsError::UnknownChannel(traj.channel.clone()))?;
        let compiled = CompiledChannel::new(traj, t_span.0);
        boundary_times.extend(compiled.boundaries.iter().copied());
        drive_per_mode[m] = Some(compiled);
    }

    let refs: Vec<f64> = match &opts.frame_refs {
        Some(r) => {
            if r.len() != n_modes {
                return Err(DynamicsError::FreqCountMismatch(r.len(), n_modes));
            }
            r.clone()
        }
        None => (0..n_modes)
            .map(|m| {
                trajectories
                    .iter()
                    .find(|t| sub.mode_index(&t.channel).ok() == Some(m))
                    .map(|t| t.mean_freq())
                    .unwrap_or(sub.base_freqs[m])
            })
            .collect(),
    };

    let drives: Vec<ModeDetuning<f64>> = (0..n_modes)
        .map(|m| ModeDetuning {
            drive: match drive_per_mode[m].take() {
                Some(ch) => ModeDrive::Channel(ch),
                None => ModeDrive::Constant(sub.base_freqs[m]),
            },
            ref_ghz: refs[m],
        })
        .collect();

    let mut knots: Vec<f64> = boundary_times
        .into_iter()
        .filter(|&t| t > t_span.0 && t < t_span.1)
        .collect();
    knots.push(t_span.0);
    knots.push(t_span.1);
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    Ok(EvolvePlan {
        sub,
        drives,
        refs,
        knots,
    })
}

fn save_grid(t_span: (f64, f64), save_points: usize) -> Vec<f64> {
    let n = save_points.max(2);
    (0..n)
        .map(|k| t_span.0 + (t_span.1 - t_span.0) * k as f64 / (n - 1) as f64)
        .collect()
}

fn build_system<'a>(
    plan: &'a EvolvePlan<'a>,
    model: Option<&LindbladModel<f64>>,
) -> Result<CompiledSystem<'a, f64>, DynamicsError> {
    let sub = plan.sub;
    let mut builder = CompiledSystem::<f64>::from_space(&sub.space);
    for m in 0..sub.labels.len() {
        builder = builder.anharmonicity(m, sub.alphas[m]);
        builder = builder.detuning(&plan.drives[m]);
    }
    for &(j, k, g) in &sub.edges {
        builder = builder.exchange(j, k, g, plan.refs[j], plan.refs[k]);
    }
    if let Some(model) = model {
        model.validate()?;
        for (label, op, rate) in &model.terms {
            let m = sub.mode_index(label)?;
            let kind = match op {
                CollapseOp::Relaxation => CollapseKind::Lowering,
                CollapseOp::Dephasing => CollapseKind::NumberDephasing,
            };
            builder = builder.collapse(m, kind, *rate);
        }
    }
    Ok(builder.build())
}

fn record_populations<T: Real>(
    diag: impl Fn(usize) -> T,
    sub: &Subsystem,
    populations: &mut [Vec<Vec<T>>],
) {
    for m in 0..sub.labels.len() {
        let table = sub.space.level_table(m);
        let dim = sub.space.dim(m);
        let mut acc = vec![T::zero(); dim];
        for i in 0..sub.space.total_dim() {
            acc[table[i] as usize] += diag(i);
        }
        for (l, v) in acc.into_iter().enumerate() {
            populations[m][l].push(v);
        }
    }
}

/// Integrate the Lindblad master equation with time-dependent coupler
/// trajectories. Trace is monitored at every save point; a drift beyond
/// 1e-6 aborts with a diagnostic.
pub fn evolve_lindblad(
    sub: &Subsystem,
    trajectories: &[FluxTrajectory<f64>],
    model: &LindbladModel<f64>,
    rho0: &DensityMatrix<f64>,
    t_span: (f64, f64),
    opts: &EvolveOptions<f64>,
) -> Result<EvolutionResult<f64>, DynamicsError> {
    if rho0.space() != &sub.space {
        return Err(DynamicsError::InvalidInitialState(
            "density matrix lives on a different space".into(),
        ));
    }
    if rho0.hermiticity_defect() > 1e-9 {
        return Err(DynamicsError::InvalidInitialState(
            "initial density matrix is not Hermitian".into(),
        ));
    }
    if (rho0.trace().re - 1.0).abs() > 1e-8 {
        return Err(DynamicsError::InvalidInitialState(
            "initial density matrix trace differs from 1".into(),
        ));
    }

    let plan = plan_evolution(sub, trajectories, t_span, opts)?;
    let system = build_system(&plan, Some(model))?;
    let d = sub.space.total_dim();

    let mut rho: Vec<Cplx<f64>> = rho0.matrix().iter().copied().collect();
    let mut diag = vec![0.0_f64; d];
    let mut rho_t = vec![Complex::new(0.0, 0.0); d * d];
    let mut out_rt = vec![Complex::new(0.0, 0.0); d * d];

    let saves = save_grid(t_span, opts.save_points);
    let mut times = Vec::with_capacity(saves.len());
    let mut populations: Vec<Vec<Vec<f64>>> = (0..sub.labels.len())
        .map(|m| vec![Vec::with_capacity(saves.len()); sub.space.dim(m)])
        .collect();
    let mut trace_drift = 0.0_f64;
    let mut stats = StepperStats {
        steps: 0,
        rejected: 0,
        rhs_evals: 0,
    };
    let stepper = StepperOptions {
        tol: opts.tol,
        max_step: opts.max_step,
        min_step: 1e-9,
        renormalize: false,
    };

    // March through the union of save times and segment boundaries.
    let mut marks: Vec<f64> = saves.clone();
    marks.extend(plan.knots.iter().copied());
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut record = |t: f64, rho: &[Cplx<f64>], drift: &mut f64| {
        let trace: f64 = (0..d).map(|i| rho[i * d + i].re).sum();
        *drift = drift.max((trace - 1.0).abs());
        times.push(t);
        record_populations(|i| rho[i * d + i].re, sub, &mut populations);
    };
    let is_save = |t: f64| saves.iter().any(|&s| (s - t).abs() < 1e-12);

    if is_save(t_span.0) {
        record(t_span.0, &rho, &mut trace_drift);
    }
    let mut h = 0.01_f64;
    let mut rhs = |t: f64, y: &[Cplx<f64>], dy: &mut [Cplx<f64>]| {
        system.rhs_density(t, y, dy, &mut diag, &mut rho_t, &mut out_rt);
    };
    for w in marks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= t_span.0 || a >= t_span.1 {
            continue;
        }
        h = engine::rk45_span(&mut rhs, &mut rho, a, b, &stepper, h, &mut stats)?;
        if is_save(b) {
            record(b, &rho, &mut trace_drift);
            if trace_drift > 1e-6 {
                return Err(DynamicsError::Engine(EngineError::InvariantBreach {
                    t: b,
                    what: format!("trace drift {trace_drift:.3e}"),
                }));
            }
        }
    }

    let matrix = ndarray::Array2::from_shape_vec((d, d), rho).expect("shape");
    let final_density = DensityMatrix::new(sub.space.clone(), matrix)?;
    Ok(EvolutionResult {
        times,
        mode_labels: sub.labels.clone(),
        mode_dims: (0..sub.labels.len()).map(|m| sub.space.dim(m)).collect(),
        populations,
        final_density: Some(final_density),
        final_state: None,
        trace_drift,
        steps: stats.steps,
        rhs_evals: stats.rhs_evals,
    })
}

/// Unitary fast path (no dissipation): same model, Schrödinger equation,
/// with per-step renormalization onto the unit sphere.
pub fn evolve_unitary(
    sub: &Subsystem,
    trajectories: &[FluxTrajectory<f64>],
    psi0: &StateVector<f64>,
    t_span: (f64, f64),
    opts: &EvolveOptions<f64>,
) -> Result<EvolutionResult<f64>, DynamicsError> {
    if psi0.space() != &sub.space {
        return Err(DynamicsError::InvalidInitialState(
            "state lives on a different space".into(),
        ));
    }
    if (psi0.norm() - 1.0).abs() > 1e-9 {
        return Err(DynamicsError::InvalidInitialState(
            "initial state is not normalized".into(),
        ));
    }

    let plan = plan_evolution(sub, trajectories, t_span, opts)?;
    let system = build_system(&plan, None)?;
    let d = sub.space.total_dim();

    let mut psi: Vec<Cplx<f64>> = psi0.amplitudes().iter().copied().collect();
    let mut diag = vec![0.0_f64; d];

    let saves = save_grid(t_span, opts.save_points);
    let mut times = Vec::with_capacity(saves.len());
    let mut populations: Vec<Vec<Vec<f64>>> = (0..sub.labels.len())
        .map(|m| vec![Vec::with_capacity(saves.len()); sub.space.dim(m)])
        .collect();
    let mut norm_drift = 0.0_f64;
    let mut stats = StepperStats {
        steps: 0,
        rejected: 0,
        rhs_evals: 0,
    };
    let stepper = StepperOptions {
        tol: opts.tol,
        max_step: opts.max_step,
        min_step: 1e-9,
        renormalize: true,
    };

    let mut marks: Vec<f64> = saves.clone();
    marks.extend(plan.knots.iter().copied());
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut record = |t: f64, psi: &[Cplx<f64>], drift: &mut f64| {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        *drift = drift.max((norm - 1.0).abs());
        times.push(t);
        record_populations(|i| psi[i].norm_sqr(), sub, &mut populations);
    };
    let is_save = |t: f64| saves.iter().any(|&s| (s - t).abs() < 1e-12);

    if is_save(t_span.0) {
        record(t_span.0, &psi, &mut norm_drift);
    }
    let mut h = 0.01_f64;
    let mut rhs = |t: f64, y: &[Cplx<f64>], dy: &mut [Cplx<f64>]| {
        system.rhs_state(t, y, dy, &mut diag);
    };
    for w in marks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= t_span.0 || a >= t_span.1 {
            continue;
        }
        h = engine::rk45_span(&mut rhs, &mut psi, a, b, &stepper, h, &mut stats)?;
        if is_save(b) {
            record(b, &psi, &mut norm_drift);
        }
    }

    let final_state = StateVector::new(sub.space.clone(), Array1::from_vec(psi))?;
    Ok(EvolutionResult {
        times,
        mode_labels: sub.labels.clone(),
        mode_dims: (0..sub.labels.len()).map(|m| sub.space.dim(m)).collect(),
        populations,
        final_density: None,
        final_state: Some(final_state),
        trace_drift: norm_drift,
        steps: stats.steps,
        rhs_evals: stats.rhs_evals,
    })
}
