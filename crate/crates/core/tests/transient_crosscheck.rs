use coil_link::lsk::{delta_i1, MismatchSpec};
use coil_link::transient::{decode_lsk, envelope, mean_amplitude, simulate, TransientConfig};
use coil_link::{LinkError, LinkScenario, Preset};

const F0: f64 = 40.68e6;

fn decode(s: &LinkScenario) -> Result<bool, LinkError> {
    let cfg = TransientConfig::for_carrier(F0);
    let trace = simulate(s, &cfg)?;
    let env = envelope(&trace, F0)?;
    decode_lsk(&env, &cfg).map(|r| r.polarity_flipped)
}

fn relative_contrast(s: &LinkScenario) -> f64 {
    delta_i1(s).abs() / coil_link::link_model::primary_current(s, coil_link::LoadState::Light).unwrap().norm()
}

#[test]
fn primary_mismatch_flips_at_moderate_coupling() {
    let mismatch = MismatchSpec {
        c_p_override: 12e-12,
        c_s1_relative_error: 0.01,
    };
    let s = mismatch.apply(&Preset::Flat.scenario()).with_coupling(0.06);
    assert!(delta_i1(&s) > 0.0);
    assert!(decode(&s).unwrap());
}

#[test]
fn decoder_agrees_with_phasor_sign() {
    let base = Preset::Flat.scenario();
    let mut checked = 0;
    for c_p in [0.0, 12e-12] {
        for err in [-0.01, 0.0, 0.01] {
            for k in [0.03, 0.06, 0.12] {
                let s = MismatchSpec {
                    c_p_override: c_p,
                    c_s1_relative_error: err,
                }
                .apply(&base)
                .with_coupling(k);
                let contrast = relative_contrast(&s);
                match decode(&s) {
                    Ok(flipped) => {
                        assert_eq!(flipped, delta_i1(&s) > 0.0, "c_p {c_p:e} err {err} k {k}");
                        checked += 1;
                    }
                    Err(e) => assert!(contrast < 0.03, "c_p {c_p:e} err {err} k {k}: {e}"),
                }
            }
        }
    }
    assert!(checked >= 12, "only {checked} scenarios decoded");
}

#[test]
fn envelope_step_follows_current_difference() {
    let mut s = Preset::Flat.scenario().with_coupling(0.1);
    s.secondary_tank.c_p = 12e-12;
    let mut cfg = TransientConfig::for_carrier(F0);
    cfg.sw_pattern = vec![true];
    cfg.duration = cfg.decode_end() + 10e-6;
    let trace = simulate(&s, &cfg).unwrap();
    let env = envelope(&trace, F0).unwrap();
    let before = mean_amplitude(&env, cfg.settle_time - 2e-6, cfg.settle_time).unwrap();
    let during = mean_amplitude(&env, cfg.decode_end() - 2e-6, cfg.decode_end()).unwrap();
    assert_eq!((during - before).signum(), (-delta_i1(&s)).signum());
}
