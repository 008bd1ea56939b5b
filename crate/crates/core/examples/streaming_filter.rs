//! Chunked causal filtering matches one-shot filtering sample for sample.

use fibervitals::dsp::{Bandpass, FilterSpec};
use fibervitals::signal::Site;
use fibervitals::synth::{simulate_scenario, ScenarioConfig, SensorTransfer, SiteTemplates};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig {
        duration: 30.0,
        noise_sd: 0.002,
        ..ScenarioConfig::resting(7)
    };
    let (recording, _) = simulate_scenario(&config, &SiteTemplates::default(), &SensorTransfer::default())?;
    let wrist = recording.channel(Site::Wrist).expect("wrist");
    let filter = Bandpass::design(FilterSpec::default(), wrist.sample_rate())?;

    let whole = filter.filter_causal(wrist.samples());
    let mut state = filter.steady_state(wrist.samples()[0]);
    let mut streamed = Vec::with_capacity(whole.len());
    for chunk in wrist.samples().chunks(64) {
        let (out, next) = filter.process_chunk(state, chunk);
        streamed.extend(out);
        state = next;
    }
    let max_diff = whole.iter().zip(&streamed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{} samples in 64-sample chunks, max difference {max_diff:e}", streamed.len());

    let zero_phase = filter.filter_zero_phase(wrist.samples());
    let edge = (FilterSpec::default().edge_transient_seconds() * wrist.sample_rate()) as usize;
    println!("offline zero-phase output valid from sample {edge} of {}", zero_phase.len());
    Ok(())
}
