//! Synthesizes the reference scenario at 10 dB, writes it in the binary
//! observation format and reads it back.
//!
//! `cargo run --example synthesize_observation`

use blindpath::antenna::ArrayModel;
use blindpath::channel_model::{make_signal, noiseless_data, synthesize, FrequencyGrid, SignalKind};
use blindpath::montecarlo::default_truth;
use blindpath::obsfile;

fn main() -> blindpath::Result<()> {
    let truth = default_truth();
    let array = ArrayModel::dipole_triad();
    let grid = FrequencyGrid::new(128)?;
    let signal = make_signal(SignalKind::RectPulse { duty: 0.25 }, grid)?;

    let clean = noiseless_data(&truth, &array, grid, &signal)?;
    let noisy = synthesize(&truth, &array, grid, &signal, 10.0, 7)?;
    let noise = (noisy.data() - &clean).norm_squared();
    println!(
        "Y is {} x {}, noise variance {:.4e}, measured SNR {:.2} dB",
        noisy.ports(),
        noisy.bins(),
        noisy.noise_variance(),
        10.0 * (clean.norm_squared() / noise).log10()
    );

    let dir = std::env::temp_dir().join("blindpath-example");
    std::fs::create_dir_all(&dir).map_err(|e| blindpath::Error::Io { path: dir.clone(), source: e })?;
    let path = dir.join("observation.bpob");
    obsfile::write(&path, &noisy)?;
    let back = obsfile::read(&path)?;
    println!(
        "wrote {} ({} bytes), round trip exact: {}",
        path.display(),
        obsfile::encoded_len(back.ports(), back.bins()),
        back.data() == noisy.data()
    );
    Ok(())
}
