use eitsim::config::Config;
use eitsim::consts::TWO_PI;
use eitsim::C64;
use eitsim::sweep::{run_sweep, ControlMode, SweepAxis, SweepSpec, Variant};
use proptest::prelude::*;

/// Coarse in time, but resolving the absorption length up to OD 35.
fn small() -> Config {
    let mut c = Config::default();
    c.grid.nz = 40;
    c.grid.nt = 1500;
    c.grid.n_velocity = 8;
    c.grid.t_end = 65e-9;
    c.signal.flat_top = Some(1.37e-9);
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn efficiencies_are_physical(
        delta_ghz in -2.0f64..0.5,
        peak_mhz in 0.0f64..2400.0,
        od in 1.0f64..20.0,
        amp in 0.1f64..10.0,
    ) {
        let mut c = small();
        c.signal.detuning = TWO_PI * delta_ghz * 1e9;
        c.control.peak_rabi = TWO_PI * peak_mhz * 1e6;
        c.medium.od = od;
        let s = c.scenario().unwrap();
        let r = s.run().unwrap();
        prop_assert!(r.eta_total >= 0.0 && r.eta_storage >= 0.0 && r.leakage >= 0.0);
        prop_assert!(r.eta_storage + r.leakage <= 1.0 + 1e-3, "{} + {}", r.eta_storage, r.leakage);
        prop_assert!(r.eta_total <= r.eta_storage + 1e-3, "{} > {}", r.eta_total, r.eta_storage);

        // efficiencies are per input photon: independent of the input amplitude
        let mut scaled = s.clone();
        scaled.signal = s.signal.scaled(C64::new(amp, 0.0));
        let r2 = scaled.run().unwrap();
        prop_assert!((r2.eta_total - r.eta_total).abs() <= 1e-9 * r.eta_total.max(1e-12) + 1e-15);
    }
}

#[test]
fn optimized_efficiency_grows_with_optical_depth() {
    let mut base = small();
    base.signal.detuning = TWO_PI * -0.6e9;
    base.optimizer.max_iters = 40;
    let mut spec = SweepSpec::new(SweepAxis::Od, vec![5.0, 10.0, 20.0, 35.0], base);
    spec.variant = Variant::NoParasitic;
    spec.control = ControlMode::Optimal;
    let table = run_sweep(&spec, 1).unwrap();
    let eta: Vec<f64> = table.rows.iter().map(|r| r.eta_total).collect();
    assert!(eta.windows(2).all(|w| w[1] >= w[0] - 0.005), "{eta:?}");
    assert!(eta[3] > eta[0] + 0.05, "{eta:?}");
}
