//! Welch spectrum of the chest trace with its strongest peaks.

use fibervitals::dsp::{spectral_peaks, welch, Window, WelchConfig};
use fibervitals::signal::Site;
use fibervitals::synth::{simulate_scenario, ScenarioConfig, SensorTransfer, SiteTemplates};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig {
        duration: 120.0,
        cadence: 2.43,
        respiration_rate: 0.3,
        noise_sd: 0.001,
        ..ScenarioConfig::resting(6)
    };
    let (recording, _) = simulate_scenario(&config, &SiteTemplates::default(), &SensorTransfer::default())?;
    let chest = recording.channel(Site::Chest).expect("chest");
    let welch_cfg = WelchConfig {
        segment_seconds: 30.0,
        overlap_frac: 0.5,
        window: Window::Hann,
    };
    let spectrum = welch(chest, &welch_cfg)?;
    let peaks = spectral_peaks(&spectrum, 4, 0.1, 1e-3);
    println!("resolution {:.4} Hz, total power {:.3e}", spectrum.df, spectrum.total_power());
    for p in &peaks {
        println!("{:>7.3} Hz  {:.3e}", p.frequency, p.power);
    }
    Ok(())
}
