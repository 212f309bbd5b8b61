//! Runs the default pipeline on the default phantom, clean and noisy, and
//! prints overlap with the ground truth. The clean IoU printed here is the
//! floor recorded in `tests/data/calibration.txt`.

use std::time::Instant;

use chestseg::phantom::{generate_phantom, PhantomSpec};
use chestseg::signal::analyze_roi;
use chestseg::{segment_sequence, Overlap, PipelineConfig};

fn main() -> chestseg::Result<()> {
    let cfg = PipelineConfig::default();
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let runs = [
        ("clean", PhantomSpec::default().clean()),
        ("noisy", PhantomSpec::default()),
        ("static-clean", PhantomSpec { breathing_amplitude_mm: 0.0, ..PhantomSpec::default() }.clean()),
        ("static-noisy", PhantomSpec { breathing_amplitude_mm: 0.0, ..PhantomSpec::default() }),
    ];
    for (name, spec) in runs {
        let (seq, truth) = generate_phantom(&spec, seed)?;
        let t0 = Instant::now();
        let res = segment_sequence(&seq, &cfg)?;
        let o = Overlap::of(&res.mask, &truth.chest_mask);
        let freq = if res.mask.is_empty() {
            f64::NAN
        } else {
            analyze_roi(&seq, &res.mask, &cfg.signal_params())?.2.dominant_freq_hz
        };
        println!(
            "{name:>13}: iou {:.4} precision {:.4} recall {:.4} mask {} truth {} freq {freq:.4} ({:.1?})",
            o.iou,
            o.precision,
            o.recall,
            res.mask.count(),
            truth.chest_mask.count(),
            t0.elapsed()
        );
    }
    Ok(())
}
