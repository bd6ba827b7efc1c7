//! Precodes one random instance with every method and prints the margins.

use num_complex::Complex64;
use precode_core::model::{draw_channel, stream_rng, SystemConfig};
use precode_core::precoders::{bnb_optimal, mddt_mapped, zf_phase_quantized, BnbOptions};
use rand::Rng;

fn main() -> precode_core::Result<()> {
    let sys = SystemConfig::new(2, 6, 8, 8)?;
    let mut rng = stream_rng(2024, 0);
    let h = draw_channel(sys.users, sys.antennas, &mut rng);
    let s: Vec<Complex64> = (0..sys.users)
        .map(|_| sys.data_alphabet().point(rng.random_range(0..sys.alpha_s)))
        .collect();

    let opts = BnbOptions::default();
    let opt = bnb_optimal(&h, &s, &sys, &opts)?;
    let relax = mddt_mapped(&h, &s, &sys, &opts.lp)?;
    let zf = zf_phase_quantized(&h, &s, &sys)?;

    println!("continuous relaxation  {:+.5}", relax.continuous.epsilon);
    println!("branch and bound       {:+.5}", opt.epsilon);
    println!("relax and map          {:+.5}", relax.mapped.epsilon);
    println!("quantized ZF           {:+.5}", zf.epsilon);
    println!("indices {:?}", opt.indices.unwrap_or_default());
    println!(
        "branches {} of {}",
        opt.stats.branches_visited,
        sys.alpha_x.pow(sys.antennas as u32)
    );
    Ok(())
}
