use proptest::prelude::*;

use coil_link::link_model::{
    pte, resonant_frequency_exact, zeq_rational, zeq_simplified, zpri, primary_current,
    AlphaCapacitance, CoilParams, LinkScenario, PrimaryTank, SecondaryTank, REAL_TOLERANCE,
};
use coil_link::lsk::{delta_i1, delta_zpri, flip_threshold, sweep_coupling, KRange, MismatchSpec, SweepSpec, FLIP_TOLERANCE};
use coil_link::scenario_file::{parse_scenario, ScenarioConfig};
use coil_link::transient::TransientConfig;
use coil_link::{LoadState, Preset};

prop_compose! {
    /// Links in the 10-100 MHz band with the secondary tank within a factor
    /// of two of resonance.
    fn scenario()(
        l1 in 200e-9..5e-6f64,
        l2 in 200e-9..5e-6f64,
        r1 in 0.1..10.0f64,
        r2 in 0.1..10.0f64,
        f in 10e6..100e6f64,
        c1_scale in 0.5..2.0f64,
        c2_scale in 0.5..2.0f64,
        c_p in 0.0..20e-12f64,
        r_load in 100.0..20e3f64,
        r_sw in 50.0..5e3f64,
        k in 0.0..0.9f64,
    ) -> LinkScenario {
        let w = 2.0 * std::f64::consts::PI * f;
        LinkScenario {
            primary_coil: CoilParams { inductance: l1, series_resistance: r1, label: "p".into() },
            secondary_coil: CoilParams { inductance: l2, series_resistance: r2, label: "s".into() },
            primary_tank: PrimaryTank { c_s1: c1_scale / (w * w * l1), source_amplitude: 1.0, drive_frequency: f },
            secondary_tank: SecondaryTank { c_s2: c2_scale / (w * w * l2), c_p, r_load, r_sw },
            coupling: k,
        }
    }
}

fn load() -> impl Strategy<Value = LoadState> {
    prop_oneof![Just(LoadState::Light), Just(LoadState::Heavy)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rational_and_direct_forms_agree(mut s in scenario(), load in load(), freqs in prop::collection::vec(0.5..2.0f64, 10)) {
        s.secondary_tank.c_p = 0.0;
        for scale in freqs {
            let w = s.omega() * scale;
            let a = zeq_rational(w, &s, load);
            let b = zeq_simplified(w, &s, load);
            if a.norm() == 0.0 {
                prop_assert_eq!(b.norm(), 0.0);
            } else {
                prop_assert!((a - b).norm() / a.norm() < 1e-9, "rel err {}", (a - b).norm() / a.norm());
            }
        }
    }

    #[test]
    fn doubling_k_quadruples_zeq(s in scenario(), load in load(), scale in 0.5..2.0f64) {
        let k = s.coupling * 0.5;
        let w = s.omega() * scale;
        let one = zeq_rational(w, &s.with_coupling(k), load);
        let two = zeq_rational(w, &s.with_coupling(2.0 * k), load);
        prop_assert_eq!(two, one * 4.0);
    }

    #[test]
    fn zeq_real_at_exact_resonance(s in scenario(), load in load()) {
        let r = s.secondary_tank.effective_load(load);
        let c2 = s.secondary_tank.c2();
        prop_assume!(c2 * r * r > 1.01 * s.secondary_coil.inductance);
        prop_assume!(s.coupling > 0.0);
        let w = resonant_frequency_exact(s.secondary_coil.inductance, c2, r).unwrap();
        let z = zeq_rational(w, &s, load);
        prop_assert!(z.im.abs() / z.norm() < REAL_TOLERANCE, "Zeq = {}", z);
    }

    #[test]
    fn pte_bounded_and_increasing(q1 in 1.0..1000.0f64, q2 in 1.0..500.0f64, alpha in 1.0..1000.0f64, a in 0.001..0.99f64, b in 0.001..0.99f64) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let e_lo = pte(lo, q1, q2, alpha).unwrap();
        let e_hi = pte(hi, q1, q2, alpha).unwrap();
        prop_assert!((0.0..1.0).contains(&e_lo) && (0.0..1.0).contains(&e_hi));
        prop_assert!(e_hi > e_lo);
    }

    #[test]
    fn outputs_are_finite(s in scenario(), load in load()) {
        let w = s.omega();
        for z in [zeq_rational(w, &s, load), zeq_simplified(w, &s, load), zpri(w, &s, load)] {
            prop_assert!(z.re.is_finite() && z.im.is_finite());
        }
        let i = primary_current(&s, load).unwrap();
        prop_assert!(i.re.is_finite() && i.im.is_finite());
        prop_assert!(delta_i1(&s).is_finite());
        let eta = coil_link::link_model::pte_of_scenario(&s, load, AlphaCapacitance::Effective).unwrap();
        prop_assert!((0.0..1.0).contains(&eta));
    }

    #[test]
    fn current_and_impedance_contrast_have_opposite_signs(s in scenario()) {
        let dz = delta_zpri(&s).magnitude_difference;
        let di = delta_i1(&s);
        if dz != 0.0 && di != 0.0 {
            prop_assert_eq!(dz > 0.0, di < 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flip_threshold_brackets_a_sign_change(c_p in 4e-12..20e-12f64, err in -0.003..0.015f64) {
        let template = Preset::Flat.scenario();
        let mismatch = MismatchSpec { c_p_override: c_p, c_s1_relative_error: err };
        let range = KRange::new(0.01, 0.2).unwrap();
        if let Some(ft) = flip_threshold(&template, &mismatch, range).unwrap() {
            let s = mismatch.apply(&template);
            let below = delta_i1(&s.with_coupling(ft.k - FLIP_TOLERANCE));
            let above = delta_i1(&s.with_coupling(ft.k + FLIP_TOLERANCE));
            prop_assert!(below * above < 0.0, "k*={} f-={} f+={}", ft.k, below, above);
        }
    }

    #[test]
    fn matched_baseline_never_flips(k in 0.001..0.3f64, preset in prop_oneof![Just(Preset::Flat), Just(Preset::Bended)]) {
        prop_assert!(delta_i1(&preset.scenario().with_coupling(k)) < 0.0);
    }

    #[test]
    fn scenario_text_round_trips(
        s in scenario(),
        c_p_override in 0.0..30e-12f64,
        err in -0.4..0.4f64,
        k_lo in 0.0..0.4f64,
        width in 0.01..0.5f64,
        points in 2usize..500,
        log in any::<bool>(),
        pattern in prop::collection::vec(any::<bool>(), 1..12),
        label in "[a-z][a-z0-9_-]{0,10}",
    ) {
        let mut scenario = s;
        scenario.primary_coil.label = label;
        let f = scenario.primary_tank.drive_frequency;
        let mut transient = TransientConfig::for_carrier(f);
        transient.sw_pattern = pattern;
        transient.duration = transient.decode_end() * 1.1;
        let sweep = SweepSpec {
            k_min: if log { k_lo.max(1e-3) } else { k_lo },
            k_max: k_lo + width,
            points,
            scale: if log { coil_link::lsk::SweepScale::Log } else { coil_link::lsk::SweepScale::Linear },
        };
        let cfg = ScenarioConfig {
            scenario,
            mismatch: MismatchSpec { c_p_override, c_s1_relative_error: err },
            sweep,
            transient,
        };
        prop_assert_eq!(parse_scenario(&cfg.to_text()).unwrap(), cfg);
    }
}

#[test]
fn sweeps_are_deterministic() {
    let t = Preset::Flat.scenario();
    let m = MismatchSpec::with_parasitic(12e-12);
    let spec = SweepSpec::default();
    let a = sweep_coupling(&t, &m, &spec).unwrap();
    let b = sweep_coupling(&t, &m, &spec).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.delta_i1.to_bits(), y.delta_i1.to_bits());
    }
}
