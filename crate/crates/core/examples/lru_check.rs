//! Quick check of the calibrated LRU schedules: target-state removal and
//! computational-subspace back-action, noise off, plus the noisy
//! efficiency figures.

use leakstack_core::device::{load_device, LruTransition};
use leakstack_core::dynamics::EvolveOptions;
use leakstack_core::protocols::{
    lru_efficiency_experiment, qcr_subsystem, run_schedule, schedule_lru,
};

fn main() {
    let device = load_device("paper_device").unwrap();
    let opts = EvolveOptions {
        save_points: 2,
        ..Default::default()
    };
    for (qubit, transition) in [
        ("A", LruTransition::EReset),
        ("A", LruTransition::FLru),
        ("A", LruTransition::HLru),
        ("D1", LruTransition::FLru),
        ("D2", LruTransition::FLru),
    ] {
        let (sub, _, _) = qcr_subsystem(&device, qubit).unwrap();
        let schedule = schedule_lru(&device, qubit, transition).unwrap();
        let level = transition.source_level();

        let psi_t = sub.basis::<f64>(&[level, 0, 0]).unwrap();
        let res = run_schedule(&device, &sub, &schedule, &psi_t, false, &opts).unwrap();
        let residual = res.final_population(qubit, level).unwrap();

        // Computational-subspace back-action: max population change over
        // |g⟩ and |e⟩ preparations.
        let mut max_change = 0.0_f64;
        for prep in 0..2 {
            let psi = sub.basis::<f64>(&[prep, 0, 0]).unwrap();
            let res = run_schedule(&device, &sub, &schedule, &psi, false, &opts).unwrap();
            for l in 0..2 {
                let expect = if l == prep { 1.0 } else { 0.0 };
                let got = res.final_population(qubit, l).unwrap();
                max_change = max_change.max((got - expect).abs());
            }
        }

        let eff = lru_efficiency_experiment(&device, qubit, transition, true).unwrap();
        println!(
            "{qubit} {transition}: residual {residual:.4}, comp-subspace change {max_change:.5}, eta(noise) {:.4}",
            eff.eta
        );
    }
}
