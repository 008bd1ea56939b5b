//! Beat morphology through a cuff inflate/deflate cycle on the wrist.

use fibervitals::signal::Site;
use fibervitals::synth::{simulate_scenario, OcclusionConfig, ScenarioConfig, SensorTransfer, SiteTemplates};
use fibervitals::vitals::{annotate_channel, AnalysisConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig {
        duration: 90.0,
        occlusion: Some(OcclusionConfig::new(30.0, 50.0, 62.0)),
        noise_sd: 0.0005,
        ..ScenarioConfig::resting(5)
    };
    let (recording, _) = simulate_scenario(&config, &SiteTemplates::default(), &SensorTransfer::default())?;
    let (beats, _) = annotate_channel(recording.channel(Site::Wrist).expect("wrist"), &AnalysisConfig::default())?;

    println!("{:>8} {:>9} {:>9} {:>9}", "foot s", "systolic", "notch s", "diastolic");
    for b in beats.beats() {
        let notch = b.notch_time().map_or("-".into(), |t| format!("{t:.3}"));
        let dia = b.diastolic_amp().map_or("-".into(), |a| format!("{a:.4}"));
        println!("{:>8.3} {:>9.4} {notch:>9} {dia:>9}", b.foot_time(), b.systolic_amp());
    }
    Ok(())
}
