//! Step length from the chest trace of a simulated treadmill run.

use fibervitals::signal::Site;
use fibervitals::synth::{simulate_scenario, ScenarioConfig, SensorTransfer, SiteTemplates};
use fibervitals::vitals::{cadence_step_length, respiration_rate, SpectralConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig {
        duration: 120.0,
        cadence: 2.43,
        respiration_rate: 0.3,
        noise_sd: 0.001,
        ..ScenarioConfig::resting(1)
    };
    let (recording, _) = simulate_scenario(&config, &SiteTemplates::default(), &SensorTransfer::default())?;
    let chest = recording.channel(Site::Chest).expect("chest channel");
    let spectral = SpectralConfig::default();

    let speed_kmh = 7.0;
    let gait = cadence_step_length(chest, speed_kmh / 3.6, &spectral)?;
    println!("cadence      {:.3} Hz (+/- {:.3})", gait.cadence, gait.df);
    println!("step length  {:.3} m at {speed_kmh} km/h", gait.step_length);
    if let Some(r) = respiration_rate(chest, &spectral)? {
        println!("respiration  {:.1} /min (confidence {:.2})", r.rate, r.confidence);
    }
    Ok(())
}
