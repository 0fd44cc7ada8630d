use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::temporal::ZSpikeVector;

/// Binarizing time-to-first-spike encoder for the single-spike network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalEncoding {
    pub threshold: f64,
    /// Spike time given to pixels at or below threshold; `None` keeps them silent.
    pub late_time: Option<f64>,
}

impl Default for TemporalEncoding {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            late_time: None,
        }
    }
}

impl TemporalEncoding {
    pub fn encode(&self, image: &[f64]) -> ZSpikeVector {
        let late = self.late_time.map_or(f64::INFINITY, f64::exp);
        let z = image
            .iter()
            .map(|&p| if p > self.threshold { 1.0 } else { late })
            .collect();
        ZSpikeVector::new(z).expect("encoded spike times are valid")
    }
}

/// Pixels above `threshold` spike at `t = 0`; the rest stay silent.
pub fn encode_temporal(image: &[f64], threshold: f64) -> ZSpikeVector {
    TemporalEncoding {
        threshold,
        late_time: None,
    }
    .encode(image)
}

/// Dense `steps x channels x height x width` input to the LIF network.
#[derive(Clone, Debug, PartialEq)]
pub struct EventTensor {
    pub steps: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl EventTensor {
    pub fn zeros(steps: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            steps,
            channels,
            height,
            width,
            data: vec![0.0; steps * channels * height * width],
        }
    }

    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    /// Sum over the time axis, shape `channels x height x width`.
    pub fn collapse_time(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.frame_len()];
        for t in 0..self.steps {
            out.iter_mut().zip(self.frame(t)).for_each(|(o, v)| *o += v);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateMode {
    /// The analog image repeated at every step (direct coding).
    Analog,
    /// An independent Bernoulli(pixel) spike per step.
    Bernoulli { seed: u64 },
}

/// Encodes an image as a `steps x 1 x height x width` tensor.
pub fn encode_rate(
    image: &[f64],
    height: usize,
    width: usize,
    steps: usize,
    mode: RateMode,
) -> Result<EventTensor> {
    if image.len() != height * width {
        return Err(Error::ShapeMismatch {
            expected: format!("{height}x{width} image"),
            actual: format!("{} pixels", image.len()),
        });
    }
    if steps == 0 {
        return Err(Error::invalid("at least one time step is required"));
    }
    let mut out = EventTensor::zeros(steps, 1, height, width);
    match mode {
        RateMode::Analog => {
            for t in 0..steps {
                out.frame_mut(t).copy_from_slice(image);
            }
        }
        RateMode::Bernoulli { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (k, v) in out.data.iter_mut().enumerate() {
                let p = image[k % image.len()];
                *v = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temporal_extremes() {
        assert!(encode_temporal(&[1.0; 9], 0.5)
            .as_slice()
            .iter()
            .all(|&z| z == 1.0));
        assert!(encode_temporal(&[0.0; 9], 0.5)
            .as_slice()
            .iter()
            .all(|z| z.is_infinite()));
    }

    #[test]
    fn checkerboard_is_half_finite() {
        let img: Vec<f64> = (0..64).map(|k| ((k / 8 + k % 8) % 2) as f64).collect();
        assert_eq!(encode_temporal(&img, 0.5).firing_count(), 32);
    }

    #[test]
    fn late_spike_variant() {
        let enc = TemporalEncoding {
            threshold: 0.5,
            late_time: Some(1.0),
        };
        let z = enc.encode(&[0.9, 0.1]);
        assert_eq!(z.as_slice(), &[1.0, 1f64.exp()]);
    }

    #[test]
    fn rate_modes() {
        let img = [0.0, 0.25, 1.0, 0.5];
        let analog = encode_rate(&img, 2, 2, 3, RateMode::Analog).unwrap();
        for t in 0..3 {
            assert_eq!(analog.frame(t), &img);
        }
        let zeros = encode_rate(&[0.0; 4], 2, 2, 5, RateMode::Bernoulli { seed: 1 }).unwrap();
        assert!(zeros.data.iter().all(|&v| v == 0.0));
        let ones = encode_rate(&[1.0; 4], 2, 2, 5, RateMode::Bernoulli { seed: 1 }).unwrap();
        assert!(ones.data.iter().all(|&v| v == 1.0));
        assert_eq!(
            encode_rate(&img, 2, 2, 4, RateMode::Bernoulli { seed: 3 }).unwrap(),
            encode_rate(&img, 2, 2, 4, RateMode::Bernoulli { seed: 3 }).unwrap()
        );
        assert!(encode_rate(&img, 3, 2, 4, RateMode::Analog).is_err());
    }
}
