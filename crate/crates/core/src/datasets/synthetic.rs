use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EventTensor;
use crate::container::{put_u64, Container, Reader};
use crate::error::{Error, Result};

/// Binary event streams with labels, all sharing one `T x C x H x W` shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventDataset {
    pub steps: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub n_classes: usize,
    events: Vec<u8>,
    labels: Vec<u8>,
}

impl EventDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.steps * self.channels * self.height * self.width
    }

    pub fn label(&self, k: usize) -> usize {
        self.labels[k] as usize
    }

    pub fn raw_sample(&self, k: usize) -> &[u8] {
        let n = self.sample_len();
        &self.events[k * n..(k + 1) * n]
    }

    pub fn sample(&self, k: usize) -> EventTensor {
        EventTensor {
            steps: self.steps,
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.raw_sample(k).iter().map(|&b| b as f64).collect(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut events = Vec::with_capacity(indices.len() * self.sample_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &k in indices {
            events.extend_from_slice(self.raw_sample(k));
            labels.push(self.labels[k]);
        }
        Self {
            events,
            labels,
            ..*self
        }
    }

    /// Container sections: `shape` (n, T, C, H, W, classes as `u64`),
    /// `labels` (one byte each) and `events` (one byte per entry).
    pub fn to_container(&self) -> Container {
        let mut shape = Vec::new();
        for v in [
            self.len(),
            self.steps,
            self.channels,
            self.height,
            self.width,
            self.n_classes,
        ] {
            put_u64(&mut shape, v as u64);
        }
        let mut c = Container::new();
        c.insert("shape", shape);
        c.insert("labels", self.labels.clone());
        c.insert("events", self.events.clone());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let mut r = Reader::new(c.require("shape")?);
        let mut dims = [0usize; 6];
        for d in dims.iter_mut() {
            *d = r.u64()? as usize;
        }
        let [n, steps, channels, height, width, n_classes] = dims;
        let labels = c.require("labels")?.to_vec();
        let events = c.require("events")?.to_vec();
        if labels.len() != n || events.len() != n * steps * channels * height * width {
            return Err(Error::Corrupt(
                "event dataset sections disagree with shape".into(),
            ));
        }
        if events.iter().any(|&b| b > 1) || labels.iter().any(|&l| l as usize >= n_classes) {
            return Err(Error::Corrupt(
                "event dataset holds non-binary events or bad labels".into(),
            ));
        }
        Ok(Self {
            steps,
            channels,
            height,
            width,
            n_classes,
            events,
            labels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

/// Parameters of the moving-bar event generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_per_class: usize,
    pub n_classes: usize,
    pub steps: usize,
    pub height: usize,
    pub width: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_per_class: 100,
            n_classes: 2,
            steps: 4,
            height: 8,
            width: 8,
            noise: 0.02,
            seed: 0,
        }
    }
}

/// Noise-free event pattern of class `c`: a full-length bar sweeping across
/// the frame. Bit 1 of `c/2` picks the sweep axis, the parity of `c` the
/// direction, and `c/4` widens the bar. Opposite directions visit the same
/// positions, so the time-collapsed images of a class pair coincide.
pub fn class_template(c: usize, cfg: &SyntheticConfig) -> Vec<u8> {
    let (h, w, steps) = (cfg.height, cfg.width, cfg.steps);
    let vertical_bar = (c / 2) % 2 == 0;
    let reverse = c % 2 == 1;
    let extent = if vertical_bar { w } else { h };
    let thickness = (1 + c / 4).min(extent);
    let travel = extent - thickness;
    let mut out = vec![0u8; steps * h * w];
    for t in 0..steps {
        let pos = if steps > 1 {
            (t * travel + (steps - 1) / 2) / (steps - 1)
        } else {
            0
        };
        let start = if reverse { travel - pos } else { pos };
        for y in 0..h {
            for x in 0..w {
                let along = if vertical_bar { x } else { y };
                if (start..start + thickness).contains(&along) {
                    out[(t * h + y) * w + x] = 1;
                }
            }
        }
    }
    out
}

/// Deterministic synthetic event dataset; samples are interleaved by class.
pub fn synthetic_events(cfg: &SyntheticConfig) -> Result<EventDataset> {
    if cfg.n_per_class == 0
        || cfg.n_classes == 0
        || cfg.steps == 0
        || cfg.height == 0
        || cfg.width == 0
    {
        return Err(Error::invalid(
            "synthetic dataset parameters must be positive",
        ));
    }
    if cfg.n_classes > 255 || !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::invalid(
            "synthetic dataset: at most 255 classes, noise in [0, 1]",
        ));
    }
    let templates: Vec<Vec<u8>> = (0..cfg.n_classes).map(|c| class_template(c, cfg)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut events = Vec::with_capacity(cfg.n_per_class * cfg.n_classes * templates[0].len());
    let mut labels = Vec::with_capacity(cfg.n_per_class * cfg.n_classes);
    for _ in 0..cfg.n_per_class {
        for (c, template) in templates.iter().enumerate() {
            events.extend(template.iter().map(|&b| {
                if rng.gen::<f64>() < cfg.noise {
                    1 - b
                } else {
                    b
                }
            }));
            labels.push(c as u8);
        }
    }
    Ok(EventDataset {
        steps: cfg.steps,
        channels: 1,
        height: cfg.height,
        width: cfg.width,
        n_classes: cfg.n_classes,
        events,
        labels,
    })
}
