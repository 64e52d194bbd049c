//! Re-derive the parametric operating points of the shipped device profile.
//!
//! The reported modulation frequencies are calibrated values, i.e. they
//! locate the dressed chevron minimum, not the bare resonance. This tool
//! closes the loop: it scans each (qubit, transition) chevron, shifts
//! omega_bar_c until the simulated minimum lands on the reported omega_p,
//! sizes a_p for a ~60 ns plateau, and prints config-ready numbers.

use leakstack_core::device::{load_device, DeviceGraph, LruTransition};
use leakstack_core::protocols::calibrate_qc_swap;

fn scan(
    device: &DeviceGraph,
    qubit: &str,
    coupler: &str,
    transition: LruTransition,
    center: f64,
    span: f64,
    points: usize,
) -> (f64, f64, f64) {
    let freqs: Vec<f64> = (0..points)
        .map(|k| center - span / 2.0 + span * k as f64 / (points - 1) as f64)
        .collect();
    let durs: Vec<f64> = (1..=58).map(|k| k as f64 * 2.5).collect();
    let result =
        calibrate_qc_swap(device, qubit, coupler, transition, &freqs, &durs, 4).unwrap();
    (
        result.omega_p_opt,
        result.duration_opt,
        result.residual_population,
    )
}

fn main() {
    let mut device = load_device("paper_device").unwrap();
    let ops = [
        ("D1", "C1", LruTransition::EReset),
        ("D1", "C1", LruTransition::FLru),
        ("A", "C2", LruTransition::EReset),
        ("A", "C2", LruTransition::FLru),
        ("A", "C2", LruTransition::HLru),
        ("D2", "C3", LruTransition::EReset),
        ("D2", "C3", LruTransition::FLru),
    ];
    for (qubit, coupler, transition) in ops {
        let (target_omega_p, mut omega_bar, mut a_p, m) = {
            let cal = device.calibration(qubit, transition).unwrap();
            (cal.omega_p, cal.omega_bar_c, cal.a_p, cal.m)
        };
        // Two correction rounds: wide locate, shift, then refine.
        for round in 0..3 {
            let span = if round == 0 { 0.12 } else { 0.03 };
            let points = if round == 0 { 49 } else { 31 };
            let (f_min, plateau, residual) =
                scan(&device, qubit, coupler, transition, target_omega_p, span, points);
            let shift = f_min - target_omega_p;
            omega_bar -= shift;
            // Size a_p for a 60 ns plateau: J_m scales ~ z^m at small z.
            let scale = (plateau / 60.0).powf(1.0 / m as f64);
            a_p *= scale;
            {
                let cal = device
                    .calibrations
                    .iter_mut()
                    .find(|c| c.qubit == qubit && c.transition == transition)
                    .unwrap();
                cal.omega_bar_c = omega_bar;
                cal.a_p = a_p;
            }
            if round == 2 {
                println!(
                    "{qubit} {transition}: omega_bar_c = {omega_bar:.4}, omega_p = {target_omega_p:.4}, a_p = {a_p:.4} (last scan: min at {f_min:.4}, plateau {plateau:.1} ns, residual {residual:.4})"
                );
            }
        }
        // Confirmation scan at the final parameters.
        let (f_min, plateau, residual) = scan(
            &device,
            qubit,
            coupler,
            transition,
            target_omega_p,
            0.03,
            31,
        );
        println!(
            "  -> confirm: min {f_min:.4} GHz (target {target_omega_p:.4}), plateau {plateau:.1} ns, residual {residual:.4}"
        );
    }
}
