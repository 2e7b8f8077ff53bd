//! Small SNR sweep of the reference scenario, printing path-averaged RMSEs.
//!
//! `cargo run --release --example snr_sweep -- [trials] [seed]`

use blindpath::estimator::EstimatorKind;
use blindpath::montecarlo::{run_sweep, ScenarioConfig};

fn main() -> blindpath::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = ScenarioConfig::default_scenario(trials, seed);
    cfg.snr_db = vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0];
    let start = std::time::Instant::now();
    let sweep = run_sweep(&cfg, None)?;
    println!("{trials} trials per point, {:.1} s", start.elapsed().as_secs_f64());
    println!("{:>4} {:>6} {:>10} {:>10} {:>10} {:>10} {:>5}", "est", "snr", "aoa_deg", "eoa_deg", "delay", "power_db", "fail");
    for kind in [EstimatorKind::Ccr, EstimatorKind::Cml] {
        for &snr in &cfg.snr_db {
            let recs: Vec<_> = (1..=cfg.truth.len()).filter_map(|p| sweep.record(kind, snr, p)).collect();
            let mean = |f: &dyn Fn(&blindpath::montecarlo::RmseRecord) -> Option<f64>| {
                let v: Vec<f64> = recs.iter().filter_map(|r| f(r)).collect();
                v.iter().sum::<f64>() / v.len().max(1) as f64
            };
            println!(
                "{:>4} {:>6.1} {:>10.4} {:>10.4} {:>10.6} {:>10.4} {:>5}",
                kind.as_str(),
                snr,
                mean(&|r| r.aoa_deg.rmse()),
                mean(&|r| r.eoa_deg.rmse()),
                mean(&|r| r.delay.rmse()),
                mean(&|r| r.power_db.rmse()),
                recs[0].n_fail
            );
        }
    }
    Ok(())
}
