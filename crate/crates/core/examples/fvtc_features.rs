//! Segment one synthetic session and compute its correlation structures.

use mgmu::features::{compute_fvtc, segment_series, ChannelSeries, CorrelationEstimator, Modality};
use mgmu::synth::{generate_cohort, generate_session, CohortSpec};

fn main() -> mgmu::Result<()> {
    let spec = CohortSpec { duration_min: [2.0, 2.0], ..CohortSpec::tiny() };
    let cohort = generate_cohort(&spec)?;
    let meta = &cohort.sessions[0];
    let data = generate_session(&spec, meta)?;

    for (modality, values, window, overlap, delay) in
        [(Modality::Audio, data.audio, 40.0, 5.0, 50), (Modality::Video, data.video, 20.0, 5.0, 45)]
    {
        let series = ChannelSeries::with_defaults(modality, modality.default_frame_rate(), values)?;
        let segments = segment_series(&series, window, overlap)?;
        let first = compute_fvtc(&segments[0], delay, CorrelationEstimator::FullSegment)?;
        println!(
            "{}: {} channels, {:.0} s -> {} segments of {window} s, FVTC {:?}",
            modality.as_str(),
            series.channels(),
            series.duration_s(),
            segments.len(),
            first.values.shape()
        );
        println!("  r_01(d) for d = 0..5: {:?}", (0..5).map(|d| (first.get(0, 1, d) * 1e3).round() / 1e3).collect::<Vec<_>>());
    }
    println!("text: {}…", &data.text[..data.text.len().min(80)]);
    Ok(())
}
