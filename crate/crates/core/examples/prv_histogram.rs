//! Pulse rate variability over a 20 minute resting recording.

use fibervitals::signal::Site;
use fibervitals::synth::{simulate_scenario, ScenarioConfig, SensorTransfer, SiteTemplates};
use fibervitals::vitals::{annotate_channel, heart_rate, interbeat_intervals, prv_stats, AnalysisConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig {
        duration: 1200.0,
        heart_rate_mean: 60.0 / 1.05,
        ibi_sd: 0.0568,
        noise_sd: 0.003,
        ..ScenarioConfig::resting(3)
    };
    let (recording, _) = simulate_scenario(&config, &SiteTemplates::default(), &SensorTransfer::default())?;
    let analysis = AnalysisConfig::default();
    let (beats, _) = annotate_channel(recording.channel(Site::Wrist).expect("wrist"), &analysis)?;
    let intervals = interbeat_intervals(&beats)?;
    if let Some(w) = intervals.warning() {
        eprintln!("warning: {w}");
    }
    let prv = prv_stats(&intervals.values, analysis.histogram_bin_width)?;

    println!("beats {}  HR {:.1} bpm", prv.n_beats, heart_rate(&intervals.values)?);
    println!("mean IBI {:.1} ms  SDNN {:.1} ms", prv.mean_ibi * 1e3, prv.sdnn * 1e3);
    let peak = prv.histogram.iter().map(|b| b.count).max().unwrap_or(1).max(1);
    for bin in &prv.histogram {
        let bar = "#".repeat(bin.count * 50 / peak);
        println!("{:>7.0} ms {:>4} {bar}", bin.bin_center * 1e3, bin.count);
    }
    Ok(())
}
