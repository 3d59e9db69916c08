//! Full protocol runs at sizes large enough for their check statistics to
//! be tested against the per-check closed forms.

use qsdc_core::exec::stream;
use qsdc_core::protocol::{random_message, run_dpp, run_dpp_with, run_fpp, Eavesdropper, Wire};
use qsdc_core::{channel::AttackError, AttackParams, ProtocolConfig};

fn within(rate: f64, p: f64, n: u64) -> bool {
    (rate - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn fpp_first_transmission_many_decoys() {
    // c = 0.5 gives one decoy group per pair
    let cfg = ProtocolConfig::new(20_000, 0.5, 12)
        .with_attack(AttackParams::from_moduli(0.5, 0.5).unwrap(), true, false);
    let r = run_fpp(&cfg).unwrap();
    assert_eq!(r.decoys_checked, 20_000);
    assert!(r.aborted);
    assert!(within(r.empirical_detection_rate, 0.875, r.decoys_checked));
}

#[test]
fn dpp_check_photons_match_beta_squared() {
    let cfg = ProtocolConfig::new(100_000, 0.5, 13)
        .with_attack(AttackParams::symmetric(0.5).unwrap(), true, false);
    let r = run_dpp(&cfg).unwrap();
    assert_eq!(r.decoys_checked, 50_000);
    assert!(within(r.empirical_detection_rate, 0.5, r.decoys_checked));
    let bases = r.first_check_bases.unwrap();
    assert!(within(bases.z.rate(), 0.5, bases.z.checked));
    assert!(within(bases.x.rate(), 0.5, bases.x.checked));
}

#[test]
fn dpp_sampling_pairs_detect_second_transmission_attack() {
    let b = 0.25;
    let n = 40_000;
    let cfg = ProtocolConfig::new(n, 0.5, 14)
        .with_message(random_message(2, &mut stream(14, 7)))
        .with_attack(AttackParams::symmetric(b).unwrap(), false, true)
        .with_abort_threshold(1.0);
    let r = run_dpp(&cfg).unwrap();
    assert_eq!(r.first_check.detected, 0);
    let second = r.second_check.unwrap();
    // the probe applies −iσy with probability b, which always changes the
    // Bell state of the returning pair
    assert!(second.checked > 9000);
    assert!(within(second.rate(), b, second.checked), "rate {}", second.rate());
}

/// Measures every intercepted particle in Z, a naive intercept-resend.
struct MeasureAll {
    calls: usize,
}

impl Eavesdropper for MeasureAll {
    fn intercept(&mut self, wire: &mut Wire<'_>) -> Result<(), AttackError> {
        self.calls += 1;
        let mut rng = stream(99, self.calls as u64);
        for pos in 0..wire.len() {
            wire.measure_z(pos, &mut rng)?;
        }
        Ok(())
    }
}

#[test]
fn intercept_resend_is_caught_in_the_x_basis() {
    let mut cfg = ProtocolConfig::new(4000, 0.5, 15);
    cfg.eve_on_first_transmission = true;
    let mut eve = MeasureAll { calls: 0 };
    let r = run_dpp_with(&cfg, &mut eve).unwrap();
    let bases = r.first_check_bases.unwrap();
    assert_eq!(bases.z.detected, 0);
    assert!(within(bases.x.rate(), 0.5, bases.x.checked));
    assert!(r.aborted);
    assert_eq!(eve.calls, 1);
}
