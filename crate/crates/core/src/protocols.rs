//! Pulse-level reset and leakage-reduction protocols: coupler reset via the
//! readout resonator (c-LRU), state-selective parametric qubit-coupler
//! swaps (e-Reset, f-LRU, h-LRU), chevron calibration scans, and the
//! efficiency metric.

use ndarray::Array2;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{CalibrationEntry, DeviceError, DeviceGraph, LruTransition};
use crate::dynamics::{
    collapse_operators, evolve_lindblad, evolve_unitary, DynamicsError, EvolutionResult,
    EvolveOptions, FluxTrajectory, LindbladModel, Segment, SegmentKind, Subsystem,
};
use crate::scalar::Cplx;
use crate::tensorspace::{embed, DensityMatrix, SpaceError, StateVector};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("coupler {0:?} has no resonator edge")]
    NoResonatorEdge(String),
    #[error("calibration grid is empty")]
    EmptyGrid,
    #[error("no interior optimum: minimum sits on the grid boundary")]
    BoundaryOptimum,
    #[error("gate {gate:?} targets mode {mode:?} outside the subsystem")]
    GateOutsideSubsystem { gate: String, mode: String },
    #[error("target preparation probability is zero; efficiency undefined")]
    ZeroPreparation,
    #[error("schedule exceeds the configured maximum duration ({0} ns)")]
    ScheduleTooLong(f64),
}

/// Hard cap on generated schedule durations; generous for every shipped
/// protocol, catches runaway construction.
pub const MAX_SCHEDULE_NS: f64 = 5_000.0;

/// Idle window for resonator ring-down appended after a c-LRU swap.
pub const C_LRU_RING_DOWN_NS: f64 = 50.0;

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    /// X on the g-e transition.
    X,
    /// X on the e-f transition (leakage injection).
    Xef,
    /// Y/2 on the g-e transition.
    YHalf,
    /// Virtual Z: phase e^{i n θ} per excitation.
    VirtualZ { angle_rad: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateEvent {
    pub t_ns: f64,
    pub mode: String,
    pub kind: GateKind,
}

/// A multi-channel pulse schedule. All channels are padded to the common
/// duration with flat idle holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub duration_ns: f64,
    pub channels: Vec<FluxTrajectory<f64>>,
    pub gates: Vec<GateEvent>,
    /// Recorded single-qubit virtual-Z corrections (qubit label, rad).
    pub virtual_z: Vec<(String, f64)>,
    /// Order-of-magnitude conditional-phase accumulated during adiabatic
    /// coupler excursions (rad); recorded, not compensated.
    pub conditional_phase_rad: f64,
}

impl PulseSchedule {
    pub fn empty() -> Self {
        Self {
            duration_ns: 0.0,
            channels: Vec::new(),
            gates: Vec::new(),
            virtual_z: Vec::new(),
            conditional_phase_rad: 0.0,
        }
    }

    fn channel_mut(&mut self, name: &str, idle: f64) -> &mut FluxTrajectory<f64> {
        if let Some(pos) = self.channels.iter().position(|c| c.channel == name) {
            return &mut self.channels[pos];
        }
        let mut traj = FluxTrajectory {
            channel: name.to_string(),
            segments: Vec::new(),
        };
        if self.duration_ns > 0.0 {
            traj.segments.push(Segment {
                kind: SegmentKind::Flat { omega: idle },
                duration_ns: self.duration_ns,
            });
        }
        self.channels.push(traj);
        self.channels.last_mut().unwrap()
    }

    /// Pad every channel with a flat hold to the common duration.
    pub fn pad_channels(&mut self) {
        for ch in &mut self.channels {
            ch.pad_to(self.duration_ns);
        }
    }

    /// Concatenate another schedule after this one. Channels are matched by
    /// name; gates shift by the current duration.
    pub fn append(&mut self, other: &PulseSchedule, idles: &dyn Fn(&str) -> f64) {
        let offset = self.duration_ns;
        self.duration_ns += other.duration_ns;
        for ch in &other.channels {
            let own = self.channel_mut(&ch.channel, idles(&ch.channel));
            own.pad_to(offset);
            own.segments.extend(ch.segments.iter().cloned());
        }
        for g in &other.gates {
            self.gates.push(GateEvent {
                t_ns: g.t_ns + offset,
                ..g.clone()
            });
        }
        for (q, z) in &other.virtual_z {
            match self.virtual_z.iter_mut().find(|(l, _)| l == q) {
                Some((_, acc)) => *acc += z,
                None => self.virtual_z.push((q.clone(), *z)),
            }
        }
        self.conditional_phase_rad += other.conditional_phase_rad;
        self.pad_channels();
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.duration_ns > MAX_SCHEDULE_NS {
            return Err(ProtocolError::ScheduleTooLong(MAX_SCHEDULE_NS));
        }
        for ch in &self.channels {
            ch.validate()?;
            let total = ch.total_duration();
            if (total - self.duration_ns).abs() > 1e-9 {
                return Err(ProtocolError::Dynamics(DynamicsError::BadTrajectory {
                    channel: ch.channel.clone(),
                    message: format!(
                        "channel spans {total} ns, schedule spans {} ns",
                        self.duration_ns
                    ),
                }));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CLruMode {
    /// Fast swap into the resonator, then ring-down idle.
    Iswap,
    /// Hold on resonance and dissipate at the joint rate κ/2.
    Hold,
}

/// Coupler reset: tune each listed coupler onto its readout resonator,
/// either for a half-exchange swap followed by ring-down, or for a hold of
/// `hold_duration_ns`. All couplers are scheduled simultaneously.
pub fn schedule_c_lru(
    device: &DeviceGraph,
    couplers: &[&str],
    mode: CLruMode,
    hold_duration_ns: f64,
) -> Result<PulseSchedule, ProtocolError> {
    let mut schedule = PulseSchedule::empty();
    let mut max_dur = 0.0_f64;
    for name in couplers {
        let coupler = device.coupler(name)?;
        let resonator = device
            .resonator_of_coupler(name)
            .map_err(|_| ProtocolError::NoResonatorEdge(name.to_string()))?;
        let edge = device
            .edge(
                crate::device::EdgeKind::CouplerResonator,
                name,
                &resonator.label,
            )
            .ok_or_else(|| ProtocolError::NoResonatorEdge(name.to_string()))?;
        let plateau = match mode {
            CLruMode::Iswap => 1.0 / (4.0 * edge.g),
            CLruMode::Hold => hold_duration_ns,
        };
        let mut segments = Vec::new();
        if plateau > 0.0 {
            segments.push(Segment {
                kind: SegmentKind::Square {
                    omega: resonator.omega_r,
                },
                duration_ns: plateau,
            });
            let ring = match mode {
                CLruMode::Iswap => C_LRU_RING_DOWN_NS,
                CLruMode::Hold => 1e-3,
            };
            segments.push(Segment {
                kind: SegmentKind::Square {
                    omega: coupler.omega_idle,
                },
                duration_ns: ring,
            });
        }
        let dur: f64 = segments.iter().map(|s| s.duration_ns).sum();
        max_dur = max_dur.max(dur);
        if !segments.is_empty() {
            schedule.channels.push(FluxTrajectory {
                channel: name.to_string(),
                segments,
            });
        }
    }
    schedule.duration_ns = max_dur;
    // Pad with the coupler's own idle frequency.
    for ch in &mut schedule.channels {
        ch.pad_to(max_dur);
    }
    schedule.validate()?;
    Ok(schedule)
}

/// Parametric qubit-coupler swap stage for one transition, built from a
/// calibration entry: adiabatic ramp to ω̄_c, sinusoidal modulation at the
/// calibrated point, ramp back to idle.
fn swap_stage(
    device: &DeviceGraph,
    cal: &CalibrationEntry,
) -> Result<PulseSchedule, ProtocolError> {
    let coupler = device.coupler(&cal.coupler)?;
    let qubit = device.qubit(&cal.qubit)?;
    let edge_ns = ((cal.total_ns - cal.plateau_ns) / 2.0).max(1.0);
    let excursion = cal.a_p / cal.m as f64;
    let plateau = Segment {
        kind: SegmentKind::ParametricSinusoid {
            omega_bar: cal.omega_bar_c,
            amplitude: excursion,
            freq: cal.omega_p,
            phase: 0.0,
        },
        duration_ns: cal.plateau_ns,
    };
    let end_freq = plateau.end_freq();
    let segments = vec![
        Segment {
            kind: SegmentKind::AdiabaticEdge {
                from: coupler.omega_idle,
                to: cal.omega_bar_c,
            },
            duration_ns: edge_ns,
        },
        plateau,
        Segment {
            kind: SegmentKind::AdiabaticEdge {
                from: end_freq,
                to: coupler.omega_idle,
            },
            duration_ns: edge_ns,
        },
    ];
    let traj = FluxTrajectory {
        channel: cal.coupler.clone(),
        segments,
    };
    let duration = traj.total_duration();

    // Single-qubit phase from the dispersive pull of the excursion,
    // recorded for virtual-Z correction: φ = 2π ∫ g²/(ω_c(t) − ω_q) dt.
    let g = device
        .edge(
            crate::device::EdgeKind::QubitCoupler,
            &cal.qubit,
            &cal.coupler,
        )
        .map(|e| e.g)
        .unwrap_or(0.0);
    let mut phase = 0.0;
    let steps = 400;
    let dt = duration / steps as f64;
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        let mut remaining = t_mid;
        let mut omega_c = coupler.omega_idle;
        for s in &traj.segments {
            if remaining <= s.duration_ns {
                omega_c = s.eval(remaining);
                break;
            }
            remaining -= s.duration_ns;
        }
        let detuning = omega_c - qubit.omega_idle;
        if detuning.abs() > 1e-6 {
            phase += 2.0 * std::f64::consts::PI * g * g / detuning * dt;
        }
    }

    // Conditional (ZZ) phase from the excursion toward the active regime:
    // order-of-magnitude record at the reported sub-MHz interaction scale.
    let zz_ghz = 0.75e-3;
    let conditional = 2.0 * std::f64::consts::PI * zz_ghz * duration;

    Ok(PulseSchedule {
        duration_ns: duration,
        channels: vec![traj],
        gates: Vec::new(),
        virtual_z: vec![(cal.qubit.clone(), phase)],
        conditional_phase_rad: conditional,
    })
}

fn idle_lookup<'a>(device: &'a DeviceGraph) -> impl Fn(&str) -> f64 + 'a {
    move |label: &str| {
        if let Ok(c) = device.coupler(label) {
            c.omega_idle
        } else if let Ok(q) = device.qubit(label) {
            q.omega_idle
        } else if let Ok(r) = device.resonator(label) {
            r.omega_r
        } else {
            0.0
        }
    }
}

/// e-Reset: parametric |eg⟩→|ge⟩ swap, then c-LRU on the coupler.
pub fn schedule_e_reset(
    device: &DeviceGraph,
    qubit: &str,
) -> Result<PulseSchedule, ProtocolError> {
    schedule_lru(device, qubit, LruTransition::EReset)
}

/// f-LRU: parametric |fg⟩→|ee⟩ swap, then c-LRU on the coupler.
pub fn schedule_f_lru(device: &DeviceGraph, qubit: &str) -> Result<PulseSchedule, ProtocolError> {
    schedule_lru(device, qubit, LruTransition::FLru)
}

/// h-LRU: parametric |hg⟩→|fe⟩ swap, coupler reset, then the full f-LRU
/// chain to drain the remaining |f⟩ population.
pub fn schedule_h_lru(device: &DeviceGraph, qubit: &str) -> Result<PulseSchedule, ProtocolError> {
    schedule_lru(device, qubit, LruTransition::HLru)
}

/// Generic LRU schedule builder from the device calibration table.
pub fn schedule_lru(
    device: &DeviceGraph,
    qubit: &str,
    transition: LruTransition,
) -> Result<PulseSchedule, ProtocolError> {
    let cal = device.calibration(qubit, transition)?;
    let idles = idle_lookup(device);
    let mut schedule = swap_stage(device, cal)?;
    let c_lru = schedule_c_lru(device, &[cal.coupler.as_str()], CLruMode::Iswap, 0.0)?;
    schedule.append(&c_lru, &idles);
    if transition == LruTransition::HLru {
        let f_chain = schedule_lru(device, qubit, LruTransition::FLru)?;
        schedule.append(&f_chain, &idles);
    }
    schedule.validate()?;
    Ok(schedule)
}

// ---------------------------------------------------------------------------
// Schedule execution
// ---------------------------------------------------------------------------

fn local_gate(kind: GateKind, dim: usize) -> Array2<Cplx<f64>> {
    let mut u = Array2::<Complex<f64>>::eye(dim);
    match kind {
        GateKind::X => {
            u[[0, 0]] = Complex::new(0.0, 0.0);
            u[[1, 1]] = Complex::new(0.0, 0.0);
            u[[0, 1]] = Complex::new(1.0, 0.0);
            u[[1, 0]] = Complex::new(1.0, 0.0);
        }
        GateKind::Xef => {
            u[[1, 1]] = Complex::new(0.0, 0.0);
            u[[2, 2]] = Complex::new(0.0, 0.0);
            u[[1, 2]] = Complex::new(1.0, 0.0);
            u[[2, 1]] = Complex::new(1.0, 0.0);
        }
        GateKind::YHalf => {
            let c = std::f64::consts::FRAC_1_SQRT_2;
            u[[0, 0]] = Complex::new(c, 0.0);
            u[[0, 1]] = Complex::new(-c, 0.0);
            u[[1, 0]] = Complex::new(c, 0.0);
            u[[1, 1]] = Complex::new(c, 0.0);
        }
        GateKind::VirtualZ { angle_rad } => {
            for n in 0..dim {
                u[[n, n]] = Complex::from_polar(1.0, angle_rad * n as f64);
            }
        }
    }
    u
}

fn framed_gate(
    sub: &Subsystem,
    refs: &[f64],
    gate: &GateEvent,
) -> Result<crate::tensorspace::Operator<f64>, ProtocolError> {
    let mode = sub
        .mode_index(&gate.mode)
        .map_err(|_| ProtocolError::GateOutsideSubsystem {
            gate: format!("{:?}", gate.kind),
            mode: gate.mode.clone(),
        })?;
    let dim = sub.space.dim(mode);
    let mut local = local_gate(gate.kind, dim);
    // Rotate the lab-frame gate into the numerical frame at time t.
    let theta = 2.0 * std::f64::consts::PI * refs[mode] * gate.t_ns;
    for r in 0..dim {
        for c in 0..dim {
            let frame = Complex::from_polar(1.0, theta * (r as f64 - c as f64));
            local[[r, c]] *= frame;
        }
    }
    Ok(embed(&sub.space, mode, &local)?)
}

/// Execute a schedule on the dynamics engine. Gate events are applied as
/// instantaneous unitaries between integration spans; `noise` selects the
/// Lindblad path with device collapse channels.
pub fn run_schedule(
    device: &DeviceGraph,
    sub: &Subsystem,
    schedule: &PulseSchedule,
    initial: &StateVector<f64>,
    noise: bool,
    opts: &EvolveOptions<f64>,
) -> Result<EvolutionResult<f64>, ProtocolError> {
    schedule.validate()?;
    for ch in &schedule.channels {
        sub.mode_index(&ch.channel)
            .map_err(|_| DynamicsError::UnknownChannel(ch.channel.clone()))?;
    }
    if schedule.duration_ns == 0.0 {
        // Empty schedule: the initial state is returned unchanged.
        let mut populations: Vec<Vec<Vec<f64>>> = Vec::new();
        for (m, _) in sub.labels.iter().enumerate() {
            let dim = sub.space.dim(m);
            let mut per_level = vec![Vec::new(); dim];
            for (l, series) in per_level.iter_mut().enumerate() {
                series.push(initial.population(m, l)?);
            }
            populations.push(per_level);
        }
        return Ok(EvolutionResult {
            times: vec![0.0],
            mode_labels: sub.labels.clone(),
            mode_dims: (0..sub.labels.len()).map(|m| sub.space.dim(m)).collect(),
            populations,
            final_density: Some(initial.to_density()),
            final_state: Some(initial.clone()),
            trace_drift: 0.0,
            steps: 0,
            rhs_evals: 0,
        });
    }

    // Frame references shared across the gate-split stages: channel means,
    // idle frequencies elsewhere.
    let refs: Vec<f64> = match &opts.frame_refs {
        Some(r) => r.clone(),
        None => (0..sub.labels.len())
            .map(|m| {
                schedule
                    .channels
                    .iter()
                    .find(|c| sub.mode_index(&c.channel).ok() == Some(m))
                    .map(|c| {
                        let total = c.total_duration();
                        let n = 200;
                        let mut acc = 0.0;
                        for k in 0..n {
                            let tk = total * (k as f64 + 0.5) / n as f64;
                            let mut rem = tk;
                            for s in &c.segments {
                                if rem <= s.duration_ns {
                                    acc += s.eval(rem);
                                    break;
                                }
                                rem -= s.duration_ns;
                            }
                        }
                        acc / n as f64
                    })
                    .unwrap_or(sub.base_freqs[m])
            })
            .collect(),
    };
    let stage_opts = EvolveOptions {
        frame_refs: Some(refs.clone()),
        ..opts.clone()
    };

    // Split at gate times.
    let mut cuts: Vec<f64> = schedule.gates.iter().map(|g| g.t_ns).collect();
    cuts.push(0.0);
    cuts.push(schedule.duration_ns);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let model = if noise {
        collapse_operators(device, sub)?
    } else {
        LindbladModel::none()
    };

    let mut psi = initial.clone();
    let mut rho = initial.to_density();
    let mut merged: Option<EvolutionResult<f64>> = None;

    let apply_gates_at = |t: f64,
                          psi: &mut StateVector<f64>,
                          rho: &mut DensityMatrix<f64>|
     -> Result<(), ProtocolError> {
        for g in &schedule.gates {
            if (g.t_ns - t).abs() < 1e-12 {
                let op = framed_gate(sub, &refs, g)?;
                if noise {
                    let m = op.matrix().dot(rho.matrix());
                    let od = op.dagger();
                    let m = m.dot(od.matrix());
                    *rho = DensityMatrix::new(sub.space.clone(), m)?;
                } else {
                    *psi = op.apply(psi)?;
                }
            }
        }
        Ok(())
    };

    apply_gates_at(0.0, &mut psi, &mut rho)?;
    for w in cuts.windows(2) {
        let span = (w[0], w[1]);
        let res = if noise {
            evolve_lindblad(sub, &schedule.channels, &model, &rho, span, &stage_opts)?
        } else {
            evolve_unitary(sub, &schedule.channels, &psi, span, &stage_opts)?
        };
        if noise {
            rho = res.final_density.clone().expect("density path");
        } else {
            psi = res.final_state.clone().expect("state path");
        }
        merged = Some(match merged.take() {
            None => res,
            Some(mut acc) => {
                let skip = 1; // the stage's t0 duplicates the previous t1
                acc.times.extend(res.times.iter().skip(skip));
                for m in 0..acc.populations.len() {
                    for l in 0..acc.populations[m].len() {
                        acc.populations[m][l].extend(res.populations[m][l].iter().skip(skip));
                    }
                }
                acc.trace_drift = acc.trace_drift.max(res.trace_drift);
                acc.steps += res.steps;
                acc.rhs_evals += res.rhs_evals;
                acc.final_density = res.final_density.clone();
                acc.final_state = res.final_state.clone();
                acc
            }
        });
        apply_gates_at(w[1], &mut psi, &mut rho)?;
    }
    let mut out = merged.expect("non-empty schedule");
    // Final gates (at t = duration) act after the last span; refresh the
    // stored final state.
    if schedule
        .gates
        .iter()
        .any(|g| (g.t_ns - schedule.duration_ns).abs() < 1e-12)
    {
        if noise {
            out.final_density = Some(rho);
        } else {
            out.final_state = Some(psi);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// Result of a chevron calibration scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub qubit: String,
    pub coupler: String,
    pub transition: Option<LruTransition>,
    /// GHz: optimal modulation frequency (QC scan) or square-pulse target
    /// frequency (CR scan).
    pub omega_p_opt: f64,
    /// GHz drive amplitude used for the scan.
    pub a_p_opt: f64,
    /// ns plateau at the optimum.
    pub duration_opt: f64,
    pub residual_population: f64,
    /// Rows: frequency grid; columns: duration grid.
    pub scan_surface: Vec<Vec<f64>>,
    pub freq_grid: Vec<f64>,
    pub dur_grid: Vec<f64>,
    /// False when the optimum sits on the scanned boundary.
    pub optimum_interior: bool,
}

fn run_grid<F>(workers: usize, n: usize, eval: F) -> Vec<Vec<f64>>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    if workers <= 1 {
        (0..n).map(eval).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| (0..n).into_par_iter().map(eval).collect())
    }
}

/// Chevron scan of the parametric qubit-coupler swap: initialize the
/// drained level, play the modulated pulse for each (frequency, plateau)
/// point, measure the residual population of that level.
pub fn calibrate_qc_swap(
    device: &DeviceGraph,
    qubit: &str,
    coupler: &str,
    transition: LruTransition,
    freq_grid: &[f64],
    dur_grid: &[f64],
    workers: usize,
) -> Result<CalibrationResult, ProtocolError> {
    if freq_grid.is_empty() || dur_grid.is_empty() {
        return Err(ProtocolError::EmptyGrid);
    }
    let cal = device.calibration(qubit, transition)?;
    let coupler_params = device.coupler(coupler)?;
    let sub = Subsystem::from_device(device, &[qubit, coupler])?;
    let level = transition.source_level();
    let psi0 = sub.basis::<f64>(&[level, 0])?;
    let edge_ns = ((cal.total_ns - cal.plateau_ns) / 2.0).max(1.0);
    let excursion = cal.a_p / cal.m as f64;
    let idle = coupler_params.omega_idle;
    let omega_bar = cal.omega_bar_c;
    let qubit_base = sub.base_freqs[0];

    let eval_row = |fi: usize| -> Vec<f64> {
        let freq = freq_grid[fi];
        dur_grid
            .iter()
            .map(|&dur| {
                let plateau = Segment {
                    kind: SegmentKind::ParametricSinusoid {
                        omega_bar,
                        amplitude: excursion,
                        freq,
                        phase: 0.0,
                    },
                    duration_ns: dur,
                };
                let end_freq = plateau.end_freq();
                let traj = FluxTrajectory {
                    channel: coupler.to_string(),
                    segments: vec![
                        Segment {
                            kind: SegmentKind::AdiabaticEdge {
                                from: idle,
                                to: omega_bar,
                            },
                            duration_ns: edge_ns,
                        },
                        plateau,
                        Segment {
                            kind: SegmentKind::AdiabaticEdge {
                                from: end_freq,
                                to: idle,
                            },
                            duration_ns: edge_ns,
                        },
                    ],
                };
                let total = 2.0 * edge_ns + dur;
                let res = evolve_unitary(
                    &sub,
                    &[traj],
                    &psi0,
                    (0.0, total),
                    &EvolveOptions {
                        save_points: 2,
                        tol: 1e-8,
                        frame_refs: Some(vec![qubit_base, omega_bar]),
                        ..Default::default()
                    },
                )
                .expect("chevron evolution");
                res.final_population(qubit, level).expect("population")
            })
            .collect()
    };
    let surface = run_grid(workers, freq_grid.len(), eval_row);

    let mut best = (0usize, 0usize, f64::INFINITY);
    for (i, row) in surface.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v < best.2 {
                best = (i, j, v);
            }
        }
    }
    let interior = (freq_grid.len() < 3 || (best.0 > 0 && best.0 + 1 < freq_grid.len()))
        && (dur_grid.len() < 3 || best.1 + 1 < dur_grid.len() || dur_grid.len() == 1);
    let result = CalibrationResult {
        qubit: qubit.to_string(),
        coupler: coupler.to_string(),
        transition: Some(transition),
        omega_p_opt: freq_grid[best.0],
        a_p_opt: cal.a_p,
        duration_opt: dur_grid[best.1],
        residual_population: best.2,
        scan_surface: surface,
        freq_grid: freq_grid.to_vec(),
        dur_grid: dur_grid.to_vec(),
        optimum_interior: interior,
    };
    if !interior {
        return Err(ProtocolError::BoundaryOptimum);
    }
    Ok(result)
}

/// Chevron scan of the coupler-resonator swap: the coupler is prepared
/// excited, square-pulsed to each target frequency for each duration, and
/// its residual population measured (with resonator decay active).
pub fn calibrate_cr_swap(
    device: &DeviceGraph,
    coupler: &str,
    amp_grid: &[f64],
    dur_grid: &[f64],
    workers: usize,
) -> Result<CalibrationResult, ProtocolError> {
    if amp_grid.is_empty() || dur_grid.is_empty() {
        return Err(ProtocolError::EmptyGrid);
    }
    let coupler_params = device.coupler(coupler)?;
    let resonator = device
        .resonator_of_coupler(coupler)
        .map_err(|_| ProtocolError::NoResonatorEdge(coupler.to_string()))?;
    let res_label = resonator.label.clone();
    let sub = Subsystem::from_device(device, &[coupler, &res_label])?;
    let model = collapse_operators(device, &sub)?;
    let rho0 = sub.basis::<f64>(&[1, 0])?.to_density();
    let idle = coupler_params.omega_idle;
    let res_base = sub.base_freqs[1];

    let eval_row = |ai: usize| -> Vec<f64> {
        let target = amp_grid[ai];
        dur_grid
            .iter()
            .map(|&dur| {
                let traj = FluxTrajectory {
                    channel: coupler.to_string(),
                    segments: vec![
                        Segment {
                            kind: SegmentKind::Square { omega: target },
                            duration_ns: dur,
                        },
                        Segment {
                            kind: SegmentKind::Square { omega: idle },
                            duration_ns: 1.0,
                        },
                    ],
                };
                let total = dur + 1.0;
                let res = evolve_lindblad(
                    &sub,
                    &[traj],
                    &model,
                    &rho0,
                    (0.0, total),
                    &EvolveOptions {
                        save_points: 2,
                        tol: 1e-8,
                        frame_refs: Some(vec![target, res_base]),
                        ..Default::default()
                    },
                )
                .expect("cr chevron evolution");
                res.final_population(coupler, 1).expect("population")
            })
            .collect()
    };
    let surface = run_grid(workers, amp_grid.len(), eval_row);

    let mut best = (0usize, 0usize, f64::INFINITY);
    for (i, row) in surface.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v < best.2 {
                best = (i, j, v);
            }
        }
    }
    // Half-exchange time: first local minimum along the resonant row.
    let row = &surface[best.0];
    let mut t_half = dur_grid[best.1];
    for j in 1..row.len().saturating_sub(1) {
        if row[j] <= row[j - 1] && row[j] <= row[j + 1] {
            t_half = dur_grid[j];
            break;
        }
    }
    if amp_grid.len() > 2 && (best.0 == 0 || best.0 + 1 == amp_grid.len()) {
        return Err(ProtocolError::BoundaryOptimum);
    }
    Ok(CalibrationResult {
        qubit: String::new(),
        coupler: coupler.to_string(),
        transition: None,
        omega_p_opt: amp_grid[best.0],
        a_p_opt: amp_grid[best.0],
        duration_opt: t_half,
        residual_population: best.2,
        scan_surface: surface,
        freq_grid: amp_grid.to_vec(),
        dur_grid: dur_grid.to_vec(),
        optimum_interior: true,
    })
}

// ---------------------------------------------------------------------------
// Efficiency
// ---------------------------------------------------------------------------

/// Efficiency of a leakage-reduction operation:
/// `η = 1 − (P_after − P_lower) / P_prepared`, unclamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub eta: f64,
    /// Measured target-level population with the target prepared, no LRU.
    pub p_target_prepared: f64,
    /// Measured target-level population with the next-lower state prepared.
    pub p_lower_prepared: f64,
    /// Measured target-level population with the target prepared and the
    /// LRU applied.
    pub p_target_after_lru: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn lru_efficiency(
    p_target_prepared: f64,
    p_lower_prepared: f64,
    p_target_after_lru: f64,
) -> Result<EfficiencyReport, ProtocolError> {
    if !(p_target_prepared > 0.0) {
        return Err(ProtocolError::ZeroPreparation);
    }
    let eta = 1.0 - (p_target_after_lru - p_lower_prepared) / p_target_prepared;
    let warning = if !(0.0..=1.0).contains(&eta) {
        Some(format!("efficiency {eta:.4} outside [0, 1]; reported as-is"))
    } else {
        None
    };
    Ok(EfficiencyReport {
        eta,
        p_target_prepared,
        p_lower_prepared,
        p_target_after_lru,
        warning,
    })
}

/// The qubit-coupler-resonator triplet used by the LRU protocols of one
/// qubit, resolved through its f-LRU (or e-Reset) calibration.
pub fn qcr_subsystem(
    device: &DeviceGraph,
    qubit: &str,
) -> Result<(Subsystem, String, String), ProtocolError> {
    let cal = device
        .calibration(qubit, LruTransition::FLru)
        .or_else(|_| device.calibration(qubit, LruTransition::EReset))?;
    let resonator = device.resonator_of_coupler(&cal.coupler)?;
    let coupler = cal.coupler.clone();
    let res_label = resonator.label.clone();
    let sub = Subsystem::from_device(device, &[qubit, &coupler, &res_label])?;
    Ok((sub, coupler, res_label))
}

/// Full prepare → LRU → measure simulation of one leakage-reduction
/// operation, returning the populations needed for the efficiency metric.
pub fn lru_efficiency_experiment(
    device: &DeviceGraph,
    qubit: &str,
    transition: LruTransition,
    noise: bool,
) -> Result<EfficiencyReport, ProtocolError> {
    let (sub, _, _) = qcr_subsystem(device, qubit)?;
    let level = transition.source_level();
    let schedule = schedule_lru(device, qubit, transition)?;
    let opts = EvolveOptions {
        save_points: 2,
        ..Default::default()
    };

    let mut prep = vec![0usize; 3];
    prep[0] = level;
    let psi_target = sub.basis::<f64>(&prep)?;
    prep[0] = level - 1;
    let psi_lower = sub.basis::<f64>(&prep)?;

    // Preparation is instantaneous in this model; the prepared-state
    // baseline is ideal.
    let p_target_prepared = 1.0;
    // Lower-state preparation run through the same schedule measures the
    // operation's back-action on the state below the drained level.
    let after_lower = run_schedule(device, &sub, &schedule, &psi_lower, noise, &opts)?;
    let p_lower = after_lower.final_population(qubit, level)?;

    let after = run_schedule(device, &sub, &schedule, &psi_target, noise, &opts)?;
    let p_after = after.final_population(qubit, level)?;

    lru_efficiency(p_target_prepared, p_lower.max(0.0), p_after.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::load_device;
    use approx::assert_abs_diff_eq;

    fn device() -> DeviceGraph {
        load_device("paper_device").unwrap()
    }

    #[test]
    fn c_lru_iswap_plateau_matches_half_exchange() {
        let dev = device();
        let schedule = schedule_c_lru(&dev, &["C2"], CLruMode::Iswap, 0.0).unwrap();
        let ch = &schedule.channels[0];
        // First segment: square at the resonator frequency for 1/(4·0.030).
        assert_abs_diff_eq!(ch.segments[0].duration_ns, 1.0 / 0.12, epsilon = 1e-12);
        match ch.segments[0].kind {
            SegmentKind::Square { omega } => assert_abs_diff_eq!(omega, 6.039, epsilon = 1e-12),
            _ => panic!("expected square segment"),
        }
        assert!(schedule.duration_ns > C_LRU_RING_DOWN_NS);
    }

    #[test]
    fn c_lru_hold_zero_duration_is_identity() {
        let dev = device();
        let schedule = schedule_c_lru(&dev, &["C2"], CLruMode::Hold, 0.0).unwrap();
        assert_eq!(schedule.duration_ns, 0.0);
        // Coupler without a resonator edge errors.
        let mut stripped = dev.clone();
        stripped
            .edges
            .retain(|e| e.kind != crate::device::EdgeKind::CouplerResonator);
        assert!(matches!(
            schedule_c_lru(&stripped, &["C2"], CLruMode::Iswap, 0.0),
            Err(ProtocolError::NoResonatorEdge(_))
        ));
    }

    #[test]
    fn lru_schedule_durations_track_calibration_totals() {
        let dev = device();
        let f = schedule_f_lru(&dev, "A").unwrap();
        // swap stage (98 ns) + c-LRU (8.33 + 50 ns).
        let expected = 98.0 + 1.0 / 0.12 + C_LRU_RING_DOWN_NS;
        assert_abs_diff_eq!(f.duration_ns, expected, epsilon = 1e-9);
        let e = schedule_e_reset(&dev, "D1").unwrap();
        let expected = 76.0 + 1.0 / 0.12 + C_LRU_RING_DOWN_NS;
        assert_abs_diff_eq!(e.duration_ns, expected, epsilon = 1e-9);
        // h-LRU chains the f-LRU after its own swap + c-LRU.
        let h = schedule_h_lru(&dev, "A").unwrap();
        let h_total = dev
            .calibration("A", LruTransition::HLru)
            .unwrap()
            .total_ns;
        let f_dur = f.duration_ns;
        assert_abs_diff_eq!(
            h.duration_ns,
            h_total + 1.0 / 0.12 + C_LRU_RING_DOWN_NS + f_dur,
            epsilon = 1e-9
        );
        h.validate().unwrap();
        // Virtual-Z corrections recorded for the driven qubit.
        assert!(h.virtual_z.iter().any(|(q, z)| q == "A" && z.abs() > 0.0));
    }

    #[test]
    fn efficiency_formula() {
        let rep = lru_efficiency(0.95, 0.01, 0.028).unwrap();
        assert_abs_diff_eq!(rep.eta, 1.0 - 0.018 / 0.95, epsilon = 1e-15);
        assert!(rep.warning.is_none());
        // Perfect removal: residual equals the lower-state baseline.
        let rep = lru_efficiency(0.9, 0.02, 0.02).unwrap();
        assert_eq!(rep.eta, 1.0);
        assert!(lru_efficiency(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn efficiency_invariant_under_common_offset() {
        // Adding the same readout offset to both P_after and P_lower leaves
        // η unchanged, exactly.
        let base = lru_efficiency(0.9, 0.010, 0.030).unwrap();
        let shifted = lru_efficiency(0.9, 0.010 + 0.25, 0.030 + 0.25).unwrap();
        assert_eq!(base.eta, shifted.eta);
    }

    #[test]
    fn empty_schedule_returns_initial_state() {
        let dev = device();
        let (sub, _, _) = qcr_subsystem(&dev, "A").unwrap();
        let psi0 = sub.basis::<f64>(&[2, 0, 0]).unwrap();
        let res = run_schedule(
            &dev,
            &sub,
            &PulseSchedule::empty(),
            &psi0,
            false,
            &EvolveOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(
            res.final_state.unwrap().inner(&psi0).unwrap().norm(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gates_act_as_expected() {
        let dev = device();
        let sub = Subsystem::from_device(&dev, &["A"]).unwrap();
        let mut schedule = PulseSchedule::empty();
        schedule.duration_ns = 1.0;
        schedule.gates = vec![GateEvent {
            t_ns: 0.0,
            mode: "A".into(),
            kind: GateKind::X,
        }];
        let psi0 = sub.basis::<f64>(&[0]).unwrap();
        let res = run_schedule(
            &dev,
            &sub,
            &schedule,
            &psi0,
            false,
            &EvolveOptions {
                save_points: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert_abs_diff_eq!(res.final_population("A", 1).unwrap(), 1.0, epsilon = 1e-9);
    }
}
