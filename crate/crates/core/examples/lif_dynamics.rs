//! Leaky integrate-and-fire dynamics under a constant drive, and the
//! rectangular surrogate used in place of the threshold's derivative.

use eslsnn::lif::{surrogate_grad, LifConfig, LifLayerState};

fn main() -> eslsnn::Result<()> {
    let cfg = LifConfig::new(0.5, 1.0, 1.0)?;
    let drives = [0.3, 0.45, 0.6, 1.2];
    let currents: Vec<Vec<f64>> = (0..8).map(|_| drives.to_vec()).collect();
    let state = LifLayerState::run(&currents, &cfg);
    println!("tau {} threshold {}", cfg.tau, cfg.v_th);
    for (k, drive) in drives.iter().enumerate() {
        let spikes: String = state
            .a
            .iter()
            .map(|a| if a[k] > 0.0 { '|' } else { '.' })
            .collect();
        let v: Vec<String> = state.v.iter().map(|v| format!("{:.3}", v[k])).collect();
        println!("drive {drive:<4} spikes {spikes}  v {}", v.join(" "));
    }

    println!("surrogate window of width {}:", cfg.surrogate_width);
    for x in [-0.75, -0.5, -0.25, 0.0, 0.25, 0.49, 0.5, 0.75] {
        println!("  v - v_th = {x:>5}: {:.2}", surrogate_grad(x, &cfg));
    }
    Ok(())
}
