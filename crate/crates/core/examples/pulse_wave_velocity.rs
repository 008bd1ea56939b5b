//! Pulse wave velocity from the wrist-to-ankle foot delay.

use fibervitals::signal::Site;
use fibervitals::synth::{simulate_scenario, ScenarioConfig, SensorTransfer, SiteTemplates};
use fibervitals::pulse::pulse_time_difference;
use fibervitals::vitals::{annotate_channel, pwv, AnalysisConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig {
        duration: 120.0,
        inter_site_delay: 0.092,
        noise_sd: 0.002,
        ..ScenarioConfig::resting(2)
    };
    let (recording, _) = simulate_scenario(&config, &SiteTemplates::default(), &SensorTransfer::default())?;
    let analysis = AnalysisConfig::default();
    let (wrist, _) = annotate_channel(recording.channel(Site::Wrist).expect("wrist"), &analysis)?;
    let (ankle, _) = annotate_channel(recording.channel(Site::Ankle).expect("ankle"), &analysis)?;

    let ptd = pulse_time_difference(&wrist, &ankle)?;
    let distance = 0.77;
    println!(
        "delay {:.1} ms (dispersion {:.1} ms, {} pairs)",
        ptd.delta_t * 1e3,
        ptd.dispersion * 1e3,
        ptd.n_pairs
    );
    println!("PWV   {:.2} m/s over {distance} m", pwv(ptd.delta_t, distance)?);
    Ok(())
}
