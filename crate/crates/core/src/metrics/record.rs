use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "iteration,epoch,train_loss,val_accuracy,layer_densities,rewires_cum,seconds";

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub iteration: u64,
    /// Zero-based epoch the iteration belongs to.
    pub epoch: usize,
    /// Mean training loss since the previous record.
    pub train_loss: f64,
    /// Present on epoch-end rows only.
    pub val_accuracy: Option<f64>,
    pub layer_densities: Vec<f64>,
    /// Synapses regrown so far, summed over layers.
    pub rewires_cum: u64,
    pub seconds: f64,
}

impl MetricsRecord {
    pub fn to_csv_row(&self) -> String {
        let densities: Vec<String> = self.layer_densities.iter().map(f64::to_string).collect();
        format!(
            "{},{},{},{},{},{},{}",
            self.iteration,
            self.epoch,
            self.train_loss,
            self.val_accuracy.map_or(String::new(), |v| v.to_string()),
            densities.join(";"),
            self.rewires_cum,
            self.seconds
        )
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let fields: Vec<&str> = row.trim_end().split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Corrupt(format!(
                "metrics row has {} fields: `{row}`",
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Corrupt(format!("bad {what} in metrics row `{row}`"));
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        Ok(Self {
            iteration: fields[0].parse().map_err(|_| bad("iteration"))?,
            epoch: fields[1].parse().map_err(|_| bad("epoch"))?,
            train_loss: num(fields[2], "train_loss")?,
            val_accuracy: if fields[3].is_empty() {
                None
            } else {
                Some(num(fields[3], "val_accuracy")?)
            },
            layer_densities: if fields[4].is_empty() {
                Vec::new()
            } else {
                fields[4]
                    .split(';')
                    .map(|d| num(d, "density"))
                    .collect::<Result<_>>()?
            },
            rewires_cum: fields[5].parse().map_err(|_| bad("rewires_cum"))?,
            seconds: num(fields[6], "seconds")?,
        })
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[MetricsRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.to_csv_row())?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::Corrupt(e.to_string()))?
        .unwrap_or_default();
    if header != CSV_HEADER {
        return Err(Error::Corrupt(format!(
            "unexpected metrics header `{header}`"
        )));
    }
    lines
        .map(|l| MetricsRecord::from_csv_row(&l.map_err(|e| Error::Corrupt(e.to_string()))?))
        .collect()
}
