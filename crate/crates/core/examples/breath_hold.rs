//! Respiration rate in sliding windows across a 20 s breath hold.

use fibervitals::signal::Site;
use fibervitals::synth::{simulate_scenario, ScenarioConfig, SensorTransfer, SiteTemplates};
use fibervitals::vitals::{respiration_rate, SpectralConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig {
        duration: 120.0,
        respiration_rate: 0.25,
        breath_hold_windows: vec![[30.0, 50.0]],
        noise_sd: 0.001,
        ..ScenarioConfig::resting(4)
    };
    let (recording, _) = simulate_scenario(&config, &SiteTemplates::default(), &SensorTransfer::default())?;
    let chest = recording.channel(Site::Chest).expect("chest channel");
    let spectral = SpectralConfig::default();

    for (t0, t1) in [(0.0, 30.0), (30.0, 50.0), (50.0, 80.0), (80.0, 120.0)] {
        let window = chest.segment(t0, t1)?;
        match respiration_rate(&window, &spectral)? {
            Some(r) => println!("[{t0:>5.1}, {t1:>5.1}) s  {:.1} breaths/min", r.rate),
            None => println!("[{t0:>5.1}, {t1:>5.1}) s  no breathing detected"),
        }
    }
    Ok(())
}
