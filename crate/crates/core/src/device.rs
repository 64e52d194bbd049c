//! Static device model: transmon/coupler/resonator parameter tables, the
//! coupling graph, frequency regimes and parametric operating points,
//! loaded from a TOML config. A `paper_device` profile ships with the
//! crate and is also embedded in the binary.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capnet::{CapacitanceNetwork, CouplingTopology};

/// Embedded copy of the shipped device profile.
pub const PAPER_DEVICE_TOML: &str = include_str!("../../../configs/paper_device.toml");

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invariant violation on {element}: {message}")]
    Invariant { element: String, message: String },
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("no {kind} edge between {a:?} and {b:?}")]
    MissingEdge {
        kind: &'static str,
        a: String,
        b: String,
    },
    #[error("no calibration for qubit {qubit:?} transition {transition}")]
    MissingCalibration {
        qubit: String,
        transition: LruTransition,
    },
    #[error("levels {i} -> {j} are not an adjacent upward pair")]
    NonAdjacentLevels { i: usize, j: usize },
    #[error("harmonic order m must be >= 1")]
    ZeroHarmonic,
}

fn invariant(element: impl Into<String>, message: impl Into<String>) -> DeviceError {
    DeviceError::Invariant {
        element: element.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    pub label: String,
    /// GHz, sweet-spot maximum.
    pub omega_max: f64,
    /// GHz, idle ω_ge.
    pub omega_idle: f64,
    /// GHz, anharmonicity (negative).
    pub alpha: f64,
    /// µs.
    pub t1: f64,
    /// µs, Ramsey.
    pub t2_star: f64,
    /// µs, echo.
    pub t2_echo: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_error_1q: Option<f64>,
}

impl TransmonParams {
    /// Pure-dephasing rate 1/T_φ = 1/T2* − 1/(2 T1), floored at zero (1/µs).
    pub fn pure_dephasing_rate(&self) -> f64 {
        (1.0 / self.t2_star - 0.5 / self.t1).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplerParams {
    pub label: String,
    pub omega_max: f64,
    pub omega_idle: f64,
    pub alpha: f64,
    pub t1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_error_2q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    pub label: String,
    /// GHz.
    pub omega_r: f64,
    /// MHz linewidth.
    pub kappa_r: f64,
    /// MHz, full dispersive shift 2χ/2π.
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    QubitCoupler,
    CouplerCoupler,
    CouplerResonator,
    QubitResonator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub kind: EdgeKind,
    pub a: String,
    pub b: String,
    /// GHz exchange coupling (ordinary frequency).
    pub g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<CouplingTopology>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRegimes {
    pub qubit_band: (f64, f64),
    pub coupler_active_band: (f64, f64),
    pub coupler_idle_band: (f64, f64),
    pub dissipative_band: (f64, f64),
}

impl FrequencyRegimes {
    fn bands(&self) -> [(&'static str, (f64, f64)); 4] {
        [
            ("qubit", self.qubit_band),
            ("coupler_active", self.coupler_active_band),
            ("coupler_idle", self.coupler_idle_band),
            ("dissipative", self.dissipative_band),
        ]
    }

    pub fn band_of(&self, freq: f64) -> Option<&'static str> {
        self.bands()
            .into_iter()
            .find(|(_, (lo, hi))| freq >= *lo && freq <= *hi)
            .map(|(name, _)| name)
    }
}

/// Reset / leakage-reduction transition selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LruTransition {
    EReset,
    FLru,
    HLru,
}

impl LruTransition {
    /// Qubit level drained by this operation (1 = e, 2 = f, 3 = h).
    pub fn source_level(self) -> usize {
        match self {
            LruTransition::EReset => 1,
            LruTransition::FLru => 2,
            LruTransition::HLru => 3,
        }
    }

    /// Total excitations of the driven transition (sets the √n enhancement).
    pub fn n_ex(self) -> u32 {
        self.source_level() as u32
    }
}

impl fmt::Display for LruTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LruTransition::EReset => "e_reset",
            LruTransition::FLru => "f_lru",
            LruTransition::HLru => "h_lru",
        };
        f.write_str(s)
    }
}

/// Calibrated parametric operating point for one (qubit, coupler,
/// transition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub qubit: String,
    pub coupler: String,
    pub transition: LruTransition,
    /// Harmonic order of the parametric interaction.
    pub m: u32,
    /// GHz, time-averaged coupler frequency during modulation.
    pub omega_bar_c: f64,
    /// GHz, modulation frequency.
    pub omega_p: f64,
    /// GHz, drive amplitude parameter (the realized frequency excursion is
    /// a_p / m; see `dynamics::effective_parametric_coupling`).
    pub a_p: f64,
    /// ns, modulation plateau.
    pub plateau_ns: f64,
    /// ns, total operation duration including adiabatic edges.
    pub total_ns: f64,
}

/// Per-qubit phenomenological channel parameters for the circuit-level
/// Monte Carlo experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitChannel {
    pub clifford_error: f64,
    pub lru_op_error: f64,
    pub ancilla_lru_op_error: f64,
    pub idle_op_error: f64,
    pub echo_op_error: f64,
    pub leak_per_clifford: f64,
    pub leak_per_cnot: f64,
    pub leak_per_measurement: f64,
    pub lru_efficiency: f64,
    pub thermal_excitation_per_cycle: f64,
    pub cnot_bitflip_error: f64,
    /// Rows: true state g/e/f; columns: measured label probabilities.
    pub readout_confusion: [[f64; 3]; 3],
    /// Per-cycle |f⟩ → |e⟩ seepage; derived from T1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seepage_per_cycle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTiming {
    pub cycle_ns: f64,
    pub readout_ns: f64,
    pub cnot_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitanceSection {
    #[serde(flatten)]
    pub network: CapacitanceNetwork<f64>,
    pub eval_omega_q: f64,
    pub eval_omega_c: f64,
}

/// The full validated device model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceGraph {
    pub schema_version: u32,
    pub qubits: Vec<TransmonParams>,
    pub couplers: Vec<CouplerParams>,
    pub resonators: Vec<ResonatorParams>,
    pub edges: Vec<Edge>,
    pub regimes: FrequencyRegimes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacitance: Option<CapacitanceSection>,
    #[serde(default)]
    pub calibrations: Vec<CalibrationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_timing: Option<ChannelTiming>,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub channel: std::collections::BTreeMap<String, QubitChannel>,
}

impl DeviceGraph {
    pub fn from_toml_str(text: &str) -> Result<Self, DeviceError> {
        let device: DeviceGraph = toml::from_str(text)?;
        device.validate()?;
        Ok(device)
    }

    pub fn to_toml_string(&self) -> Result<String, DeviceError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn qubit(&self, label: &str) -> Result<&TransmonParams, DeviceError> {
        self.qubits
            .iter()
            .find(|q| q.label == label)
            .ok_or_else(|| DeviceError::UnknownElement(label.to_string()))
    }

    pub fn coupler(&self, label: &str) -> Result<&CouplerParams, DeviceError> {
        self.couplers
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| DeviceError::UnknownElement(label.to_string()))
    }

    pub fn resonator(&self, label: &str) -> Result<&ResonatorParams, DeviceError> {
        self.resonators
            .iter()
            .find(|r| r.label == label)
            .ok_or_else(|| DeviceError::UnknownElement(label.to_string()))
    }

    /// Undirected edge lookup of a given kind.
    pub fn edge(&self, kind: EdgeKind, a: &str, b: &str) -> Option<&Edge> {
        self.edges
            .iter()
            .find(|e| e.kind == kind && ((e.a == a && e.b == b) || (e.a == b && e.b == a)))
    }

    /// Any edge between two labels, regardless of kind.
    pub fn coupling_between(&self, a: &str, b: &str) -> Option<&Edge> {
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    /// The resonator a coupler dumps into, via its coupler-resonator edge.
    pub fn resonator_of_coupler(&self, coupler: &str) -> Result<&ResonatorParams, DeviceError> {
        let edge = self
            .edges
            .iter()
            .find(|e| e.kind == EdgeKind::CouplerResonator && (e.a == coupler || e.b == coupler))
            .ok_or_else(|| DeviceError::MissingEdge {
                kind: "coupler_resonator",
                a: coupler.to_string(),
                b: "*".to_string(),
            })?;
        let label = if edge.a == coupler { &edge.b } else { &edge.a };
        self.resonator(label)
    }

    pub fn calibration(
        &self,
        qubit: &str,
        transition: LruTransition,
    ) -> Result<&CalibrationEntry, DeviceError> {
        self.calibrations
            .iter()
            .find(|c| c.qubit == qubit && c.transition == transition)
            .ok_or_else(|| DeviceError::MissingCalibration {
                qubit: qubit.to_string(),
                transition,
            })
    }

    pub fn channel(&self, qubit: &str) -> Result<&QubitChannel, DeviceError> {
        self.channel
            .get(qubit)
            .ok_or_else(|| DeviceError::UnknownElement(format!("channel.{qubit}")))
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let mut labels = BTreeSet::new();
        for q in &self.qubits {
            if !labels.insert(q.label.clone()) {
                return Err(invariant(&q.label, "duplicate label"));
            }
            if q.alpha >= 0.0 {
                return Err(invariant(
                    &q.label,
                    format!("alpha must be negative, got {}", q.alpha),
                ));
            }
            if q.omega_idle > q.omega_max {
                return Err(invariant(&q.label, "omega_idle exceeds omega_max"));
            }
            if q.t1 <= 0.0 || q.t2_star <= 0.0 || q.t2_echo <= 0.0 {
                return Err(invariant(&q.label, "coherence times must be positive"));
            }
            // 10% measurement slack on the T2 <= 2 T1 bound.
            if q.t2_star > 2.2 * q.t1 || q.t2_echo > 2.2 * q.t1 {
                return Err(invariant(
                    &q.label,
                    "T2 exceeds 2*T1 beyond measurement slack",
                ));
            }
        }
        for c in &self.couplers {
            if !labels.insert(c.label.clone()) {
                return Err(invariant(&c.label, "duplicate label"));
            }
            if c.alpha >= 0.0 {
                return Err(invariant(&c.label, "alpha must be negative"));
            }
            if c.omega_idle > c.omega_max {
                return Err(invariant(&c.label, "omega_idle exceeds omega_max"));
            }
            if c.t1 <= 0.0 {
                return Err(invariant(&c.label, "T1 must be positive"));
            }
        }
        for r in &self.resonators {
            if !labels.insert(r.label.clone()) {
                return Err(invariant(&r.label, "duplicate label"));
            }
            if r.kappa_r <= 0.0 {
                return Err(invariant(&r.label, "kappa_r must be positive"));
            }
        }

        let mut seen_pairs = BTreeSet::new();
        for e in &self.edges {
            for end in [&e.a, &e.b] {
                if !labels.contains(end) {
                    return Err(invariant(
                        format!("edge {}-{}", e.a, e.b),
                        format!("references unknown element {end:?}"),
                    ));
                }
            }
            let key = if e.a <= e.b {
                (e.a.clone(), e.b.clone())
            } else {
                (e.b.clone(), e.a.clone())
            };
            if !seen_pairs.insert(key) {
                return Err(invariant(format!("edge {}-{}", e.a, e.b), "duplicate edge"));
            }
            if !e.g.is_finite() {
                return Err(invariant(
                    format!("edge {}-{}", e.a, e.b),
                    "non-finite coupling",
                ));
            }
            let ok = match e.kind {
                EdgeKind::QubitCoupler => {
                    self.qubit(&e.a).is_ok() && self.coupler(&e.b).is_ok()
                        || self.qubit(&e.b).is_ok() && self.coupler(&e.a).is_ok()
                }
                EdgeKind::CouplerCoupler => {
                    self.coupler(&e.a).is_ok() && self.coupler(&e.b).is_ok()
                }
                EdgeKind::CouplerResonator => {
                    self.coupler(&e.a).is_ok() && self.resonator(&e.b).is_ok()
                        || self.coupler(&e.b).is_ok() && self.resonator(&e.a).is_ok()
                }
                EdgeKind::QubitResonator => {
                    self.qubit(&e.a).is_ok() && self.resonator(&e.b).is_ok()
                        || self.qubit(&e.b).is_ok() && self.resonator(&e.a).is_ok()
                }
            };
            if !ok {
                return Err(invariant(
                    format!("edge {}-{}", e.a, e.b),
                    "element kinds do not match edge kind",
                ));
            }
        }

        // Connectivity over the qubit/coupler experiment subsystem.
        if !self.qubits.is_empty() {
            let mut nodes: Vec<&str> = self.qubits.iter().map(|q| q.label.as_str()).collect();
            nodes.extend(self.couplers.iter().map(|c| c.label.as_str()));
            let mut reached = BTreeSet::new();
            let mut stack = vec![nodes[0]];
            while let Some(n) = stack.pop() {
                if !reached.insert(n) {
                    continue;
                }
                for e in &self.edges {
                    if matches!(e.kind, EdgeKind::QubitCoupler | EdgeKind::CouplerCoupler) {
                        if e.a == n && !reached.contains(e.b.as_str()) {
                            stack.push(&e.b);
                        }
                        if e.b == n && !reached.contains(e.a.as_str()) {
                            stack.push(&e.a);
                        }
                    }
                }
            }
            if reached.len() != nodes.len() {
                return Err(invariant("graph", "qubit/coupler subsystem is not connected"));
            }
        }

        // Regime bands: pairwise disjoint and ordered by center.
        let bands = self.regimes.bands();
        for (name, (lo, hi)) in bands {
            if lo >= hi {
                return Err(invariant(format!("regimes.{name}"), "empty band"));
            }
        }
        let centers = [
            self.regimes.qubit_band,
            self.regimes.coupler_active_band,
            self.regimes.coupler_idle_band,
            self.regimes.dissipative_band,
        ]
        .map(|(lo, hi)| (lo + hi) / 2.0);
        if !(centers[0] < centers[1] && centers[1] < centers[2] && centers[2] < centers[3]) {
            return Err(invariant("regimes", "bands out of order"));
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let (a, b) = (bands[i].1, bands[j].1);
                if a.0.max(b.0) <= a.1.min(b.1) {
                    return Err(invariant(
                        "regimes",
                        format!("bands {} and {} overlap", bands[i].0, bands[j].0),
                    ));
                }
            }
        }

        for cal in &self.calibrations {
            self.qubit(&cal.qubit)?;
            self.coupler(&cal.coupler)?;
            if self
                .edge(EdgeKind::QubitCoupler, &cal.qubit, &cal.coupler)
                .is_none()
            {
                return Err(invariant(
                    format!("calibration {}/{}", cal.qubit, cal.transition),
                    "no qubit_coupler edge between the pair",
                ));
            }
            if cal.m == 0 {
                return Err(invariant(
                    format!("calibration {}/{}", cal.qubit, cal.transition),
                    "harmonic order must be >= 1",
                ));
            }
            if cal.total_ns < cal.plateau_ns {
                return Err(invariant(
                    format!("calibration {}/{}", cal.qubit, cal.transition),
                    "total duration shorter than plateau",
                ));
            }
        }

        if let Some(cap) = &self.capacitance {
            cap.network
                .validate()
                .map_err(|e| invariant("capacitance", e.to_string()))?;
        }
        for (label, ch) in &self.channel {
            if self.qubit(label).is_err() {
                return Err(invariant(format!("channel.{label}"), "unknown qubit"));
            }
            for row in &ch.readout_confusion {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(invariant(
                        format!("channel.{label}"),
                        "readout confusion rows must be probabilities summing to 1",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Load a device config from a filesystem path, or by shipped profile name
/// (currently `paper_device`).
pub fn load_device(spec: &str) -> Result<DeviceGraph, DeviceError> {
    let path = Path::new(spec);
    let text = if path.exists() {
        std::fs::read_to_string(path).map_err(|source| DeviceError::Io {
            path: spec.to_string(),
            source,
        })?
    } else if spec == "paper_device" {
        PAPER_DEVICE_TOML.to_string()
    } else {
        return Err(DeviceError::Io {
            path: spec.to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or profile"),
        });
    };
    DeviceGraph::from_toml_str(&text)
}

/// Ladder transition frequency ω_{i → i+1} = ω_ge + i·α.
pub fn transition_frequency(q: &TransmonParams, i: usize, j: usize) -> Result<f64, DeviceError> {
    if j != i + 1 {
        return Err(DeviceError::NonAdjacentLevels { i, j });
    }
    Ok(q.omega_idle + i as f64 * q.alpha)
}

/// Modulation frequency for the parametric swap:
/// `ω_p = |ω_target − ω̄_c| / m` with ω_target the drained transition.
pub fn parametric_resonance_frequency(
    target: LruTransition,
    m: u32,
    q: &TransmonParams,
    omega_bar_c: f64,
) -> Result<f64, DeviceError> {
    if m == 0 {
        return Err(DeviceError::ZeroHarmonic);
    }
    let level = target.source_level() - 1;
    let omega_target = transition_frequency(q, level, level + 1)?;
    Ok((omega_target - omega_bar_c).abs() / m as f64)
}

/// One line of the regime-placement report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeEntry {
    pub label: String,
    pub freq: f64,
    pub band: Option<&'static str>,
    pub expected: &'static str,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RegimeReport {
    pub entries: Vec<RegimeEntry>,
    pub violations: usize,
}

/// Report-only check that idle frequencies sit in their intended bands.
pub fn validate_regimes(device: &DeviceGraph, regimes: &FrequencyRegimes) -> RegimeReport {
    let mut report = RegimeReport::default();
    let push = |report: &mut RegimeReport, label: &str, freq: f64, expected: &'static str| {
        let band = regimes.band_of(freq);
        let ok = band == Some(expected);
        report.entries.push(RegimeEntry {
            label: label.to_string(),
            freq,
            band,
            expected,
            ok,
        });
        if !ok {
            report.violations += 1;
        }
    };
    for q in &device.qubits {
        push(&mut report, &q.label, q.omega_idle, "qubit");
    }
    for c in &device.couplers {
        push(&mut report, &c.label, c.omega_idle, "coupler_idle");
    }
    for r in &device.resonators {
        push(&mut report, &r.label, r.omega_r, "dissipative");
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shipped_profile_loads_and_matches_reported_values() {
        let dev = load_device("paper_device").unwrap();
        let a = dev.qubit("A").unwrap();
        assert_abs_diff_eq!(a.omega_idle, 4.086, epsilon = 1e-12);
        assert_abs_diff_eq!(a.alpha, -0.208, epsilon = 1e-12);
        let ra = dev.resonator("RA").unwrap();
        assert_abs_diff_eq!(ra.kappa_r, 3.0, epsilon = 1e-12);
        assert_eq!(dev.qubits.len(), 3);
        assert_eq!(dev.couplers.len(), 3);
        assert_eq!(dev.resonators.len(), 3);
    }

    #[test]
    fn empty_config_is_a_parse_error() {
        let err = DeviceGraph::from_toml_str("").unwrap_err();
        assert!(matches!(err, DeviceError::Parse(_)));
    }

    #[test]
    fn positive_alpha_is_an_invariant_violation_naming_the_qubit() {
        let text = PAPER_DEVICE_TOML.replace("alpha = -0.208", "alpha = 0.208");
        let err = DeviceGraph::from_toml_str(&text).unwrap_err();
        match err {
            DeviceError::Invariant { element, .. } => assert_eq!(element, "A"),
            other => panic!("expected invariant violation, got {other}"),
        }
    }

    #[test]
    fn round_trip_identity() {
        let dev = load_device("paper_device").unwrap();
        let text = dev.to_toml_string().unwrap();
        let again = DeviceGraph::from_toml_str(&text).unwrap();
        assert_eq!(dev, again);
    }

    #[test]
    fn transition_frequencies_follow_the_ladder() {
        let dev = load_device("paper_device").unwrap();
        let a = dev.qubit("A").unwrap();
        assert_abs_diff_eq!(transition_frequency(a, 0, 1).unwrap(), 4.086, epsilon = 1e-12);
        assert_abs_diff_eq!(transition_frequency(a, 1, 2).unwrap(), 3.878, epsilon = 1e-12);
        assert_abs_diff_eq!(transition_frequency(a, 2, 3).unwrap(), 3.670, epsilon = 1e-12);
        assert!(transition_frequency(a, 0, 2).is_err());
        // Harmonic limit: alpha = 0 makes all transitions equal.
        let mut flat = a.clone();
        flat.alpha = -0.0;
        let f01 = transition_frequency(&flat, 0, 1).unwrap();
        let f12 = transition_frequency(&flat, 1, 2).unwrap();
        assert_eq!(f01, f12);
    }

    #[test]
    fn transition_frequency_decreases_with_level_for_negative_alpha() {
        let dev = load_device("paper_device").unwrap();
        for q in &dev.qubits {
            let mut last = f64::INFINITY;
            for i in 0..3 {
                let f = transition_frequency(q, i, i + 1).unwrap();
                assert!(f < last);
                last = f;
            }
        }
    }

    #[test]
    fn parametric_frequency_back_solves_reported_modulation() {
        let dev = load_device("paper_device").unwrap();
        let a = dev.qubit("A").unwrap();
        let f = parametric_resonance_frequency(LruTransition::FLru, 1, a, 4.584).unwrap();
        assert_abs_diff_eq!(f, 0.706, epsilon = 1e-12);
        // Second harmonic halves the frequency exactly.
        let f2 = parametric_resonance_frequency(LruTransition::FLru, 2, a, 4.584).unwrap();
        assert_abs_diff_eq!(f2, f / 2.0, epsilon = 1e-15);
        // Degenerate operating point maps to zero.
        let z = parametric_resonance_frequency(LruTransition::FLru, 1, a, 3.878).unwrap();
        assert_eq!(z, 0.0);
        assert!(parametric_resonance_frequency(LruTransition::FLru, 0, a, 4.5).is_err());
    }

    #[test]
    fn regime_report_places_shipped_device() {
        let dev = load_device("paper_device").unwrap();
        let report = validate_regimes(&dev, &dev.regimes.clone());
        assert_eq!(report.violations, 0, "{:#?}", report.entries);
        // A coupler idled in the qubit band is flagged.
        let mut bad = dev.clone();
        bad.couplers[0].omega_idle = 4.2;
        let report = validate_regimes(&bad, &bad.regimes.clone());
        assert_eq!(report.violations, 1);
    }

    #[test]
    fn lookups_and_calibrations() {
        let dev = load_device("paper_device").unwrap();
        assert!(dev.edge(EdgeKind::CouplerCoupler, "C2", "C1").is_some());
        assert!(dev.edge(EdgeKind::CouplerCoupler, "C1", "C3").is_none());
        let r = dev.resonator_of_coupler("C2").unwrap();
        assert_eq!(r.label, "RA");
        let cal = dev.calibration("A", LruTransition::HLru).unwrap();
        assert_eq!(cal.m, 2);
        assert!(dev.calibration("D1", LruTransition::HLru).is_err());
        let ch = dev.channel("D2").unwrap();
        assert!(ch.lru_efficiency > 0.9);
    }

    #[test]
    fn dephasing_rate_floors_at_zero() {
        let dev = load_device("paper_device").unwrap();
        let a = dev.qubit("A").unwrap();
        let rate = a.pure_dephasing_rate();
        assert_abs_diff_eq!(rate, 1.0 / 4.40 - 0.5 / 71.0, epsilon = 1e-12);
        let mut ideal = a.clone();
        ideal.t2_star = 2.0 * ideal.t1;
        assert_eq!(ideal.pure_dephasing_rate(), 0.0);
    }
}
