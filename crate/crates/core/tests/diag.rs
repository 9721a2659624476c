use fanolab::bloch::{self, DriveParams, EmitterParams};
use fanolab::fit::models::{fit_g2, G2Dataset, G2Guess};
use fanolab::rng::stream_rng;
use fanolab::spectrum::linspace;
use fanolab::units::TAU;
use rand::Rng;
use rand_distr::Normal;

fn datasets(emitter: &EmitterParams, rabi_mhz: &[f64], sf: f64, sigma: f64, seed: u64) -> Vec<G2Dataset> {
    let tau = linspace(0.0, 30.0e-9, 241).unwrap();
    rabi_mhz.iter().enumerate().map(|(k, &mhz)| {
        let rabi = TAU * mhz * 1e6;
        let drive = DriveParams::resonant(rabi).unwrap();
        let clean = bloch::g2(&tau, &drive, emitter).unwrap();
        let mixed = bloch::g2_with_background(&clean, sf).unwrap();
        let mut rng = stream_rng(seed, k as u64);
        let noise = Normal::new(0.0, sigma).unwrap();
        let g2 = mixed.iter().map(|&v| v + rng.sample(noise)).collect();
        G2Dataset { tau_s: tau.clone(), g2, rabi_frequency: rabi }
    }).collect()
}

#[test]
fn g2_diag() {
    let coupled = EmitterParams::from_lifetime(3.8e14, 1.4e-9, TAU * 87.0e6, 0.44).unwrap();
    for (sigma, seed) in [(0.02, 2024u64), (0.01, 2024), (0.02, 555), (0.0, 2024)] {
        let ds = datasets(&coupled, &[40.0, 75.0, 150.0], 0.8, sigma, seed);
        let guess = G2Guess { gamma1: 1.0 / 1.0e-9, pure_dephasing: TAU * 50.0e6, signal_fraction: 0.9 };
        match fit_g2(&ds, &guess) {
            Ok(f) => println!("sigma={sigma} seed={seed}: T1={:.4} ns (err {:+.2}%), G*={:.2} MHz, rho={:.4}, iters={}, conv={}, term={:?}, rss={:.3e}",
                f.t1_seconds()*1e9, 100.0*(f.t1_seconds()-1.4e-9)/1.4e-9,
                f.pure_dephasing/(TAU*1e6), f.signal_fraction, f.result.iterations, f.result.converged, f.result.termination, f.result.rss),
            Err(e) => println!("sigma={sigma} seed={seed}: ERROR {e}"),
        }
    }
}
