//! The synthetic moving-bar event dataset: class templates as frames and a
//! noisy sample written to and read back from disk.

use eslsnn::datasets::{class_template, synthetic_events, EventDataset, SyntheticConfig};

fn frames(events: &[u8], cfg: &SyntheticConfig) -> Vec<String> {
    let (h, w) = (cfg.height, cfg.width);
    (0..h)
        .map(|y| {
            (0..cfg.steps)
                .map(|t| {
                    (0..w)
                        .map(|x| {
                            if events[(t * h + y) * w + x] > 0 {
                                '#'
                            } else {
                                '.'
                            }
                        })
                        .collect::<String>()
                })
                .collect::<Vec<_>>()
                .join("  ")
        })
        .collect()
}

fn main() -> eslsnn::Result<()> {
    let cfg = SyntheticConfig {
        n_classes: 4,
        n_per_class: 5,
        noise: 0.05,
        ..SyntheticConfig::default()
    };
    for c in 0..cfg.n_classes {
        println!("class {c}, one frame per step:");
        for line in frames(&class_template(c, &cfg), &cfg) {
            println!("  {line}");
        }
    }

    let data = synthetic_events(&cfg)?;
    println!("noisy sample of class {}:", data.label(0));
    for line in frames(data.raw_sample(0), &cfg) {
        println!("  {line}");
    }
    let path = std::env::temp_dir().join("eslsnn_synthetic_example.events");
    data.save(&path)?;
    let back = EventDataset::load(&path)?;
    println!(
        "{} samples of {} values survive a round trip: {}",
        back.len(),
        back.sample_len(),
        back == data
    );
    std::fs::remove_file(path).ok();
    Ok(())
}
