//! MNIST ingestion, spike encoders and the synthetic event-stream dataset.

mod encode;
mod idx;
mod synthetic;

pub use encode::{encode_rate, encode_temporal, EventTensor, RateMode, TemporalEncoding};
pub use idx::{
    load_mnist_dir, load_mnist_idx, parse_idx_images, parse_idx_labels, ImageDataset, MnistSplit,
    IMAGES_MAGIC, LABELS_MAGIC,
};
pub use synthetic::{class_template, synthetic_events, EventDataset, SyntheticConfig};

/// Either kind of labelled dataset the trainer consumes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dataset {
    Images(ImageDataset),
    Events(EventDataset),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Images(d) => d.len(),
            Dataset::Events(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, k: usize) -> usize {
        match self {
            Dataset::Images(d) => d.label(k),
            Dataset::Events(d) => d.label(k),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Dataset::Images(_) => 10,
            Dataset::Events(d) => d.n_classes,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        match self {
            Dataset::Images(d) => Dataset::Images(d.subset(indices)),
            Dataset::Events(d) => Dataset::Events(d.subset(indices)),
        }
    }
}
