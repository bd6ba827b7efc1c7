use precode_core::precoders::PrecoderKind;
use precode_core::simulate::{run_ber_sweep, BerPoint, SweepConfig};

fn point(points: &[BerPoint], kind: PrecoderKind, snr: f64) -> &BerPoint {
    points
        .iter()
        .find(|p| p.precoder == kind && p.snr_db == snr)
        .expect("point present")
}

#[test]
fn optimal_precoding_is_never_significantly_worse() {
    let mut cfg = SweepConfig::new(2, vec![5], 4, 3);
    cfg.snr_grid_db = vec![0.0, 5.0, 10.0, 15.0];
    cfg.n_channels = 60;
    cfg.symbols_per_channel = 40;
    cfg.precoders = vec![
        PrecoderKind::Bnb,
        PrecoderKind::MddtMapped,
        PrecoderKind::ZfQuantized,
    ];
    cfg.master_seed = 5;
    let points = run_ber_sweep(&cfg).unwrap();
    for &snr in &cfg.snr_grid_db {
        let bnb = point(&points, PrecoderKind::Bnb, snr);
        for other in [PrecoderKind::MddtMapped, PrecoderKind::ZfQuantized] {
            let o = point(&points, other, snr);
            let se = bnb.ber_std_error().unwrap().max(o.ber_std_error().unwrap());
            assert!(
                bnb.ber.unwrap() <= o.ber.unwrap() + 3.0 * se,
                "{other} at {snr} dB"
            );
        }
    }
}

#[test]
fn optimal_precoding_has_no_error_floor() {
    let mut cfg = SweepConfig::new(2, vec![6], 8, 8);
    cfg.snr_grid_db = vec![10.0, 25.0];
    cfg.n_channels = 40;
    cfg.symbols_per_channel = 50;
    cfg.precoders = vec![PrecoderKind::Bnb, PrecoderKind::ZfQuantized];
    cfg.master_seed = 6;
    let points = run_ber_sweep(&cfg).unwrap();
    let ber = |k, snr| point(&points, k, snr).ber.unwrap();
    assert!(ber(PrecoderKind::Bnb, 10.0) > 0.0);
    assert!(ber(PrecoderKind::Bnb, 25.0) < ber(PrecoderKind::Bnb, 10.0) / 10.0);
    // The quantized linear precoder levels off instead.
    assert!(ber(PrecoderKind::ZfQuantized, 25.0) > ber(PrecoderKind::ZfQuantized, 10.0) / 3.0);
}

#[test]
fn symbol_and_bit_error_rates_are_consistent() {
    let mut cfg = SweepConfig::new(3, vec![4, 6], 8, 4);
    cfg.snr_grid_db = vec![-5.0, 5.0, 15.0];
    cfg.n_channels = 30;
    cfg.symbols_per_channel = 30;
    cfg.master_seed = 7;
    let points = run_ber_sweep(&cfg).unwrap();
    let bits = 3.0;
    for p in &points {
        let ber = p.ber.unwrap();
        assert!(p.ser >= ber / bits - 1e-12, "{p:?}");
        assert!(p.ser <= ber * bits + 1e-12, "{p:?}");
        assert_eq!(p.bits_total, p.symbols_total * 3 * 3);
    }
}
