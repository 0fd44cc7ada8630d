use crate::error::{Error, Result};

/// Parameters shared by every leaky integrate-and-fire neuron of a network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifConfig {
    /// Leak factor applied to the membrane each step, in `(0, 1]`.
    pub tau: f64,
    pub v_th: f64,
    /// Width of the rectangular surrogate window centred on the threshold.
    pub surrogate_width: f64,
}

impl Default for LifConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            v_th: 1.0,
            surrogate_width: 1.0,
        }
    }
}

impl LifConfig {
    pub fn new(tau: f64, v_th: f64, surrogate_width: f64) -> Result<Self> {
        let cfg = Self {
            tau,
            v_th,
            surrogate_width,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            return Err(Error::invalid(format!(
                "v_th must be positive, got {}",
                self.v_th
            )));
        }
        if !(self.surrogate_width > 0.0 && self.surrogate_width.is_finite()) {
            return Err(Error::invalid(format!(
                "surrogate width must be positive, got {}",
                self.surrogate_width
            )));
        }
        Ok(())
    }
}

/// One membrane update: `v = τ·u + I`, `a = [v >= V_th]`, `u' = v·(1 - a)`.
///
/// Returns `(a, u')`; spikes are exactly `0.0` or `1.0`.
pub fn lif_step(u_prev: &[f64], current: &[f64], cfg: &LifConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    if u_prev.len() != current.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} currents", u_prev.len()),
            actual: current.len().to_string(),
        });
    }
    let mut spikes = vec![0.0; u_prev.len()];
    let mut u_next = vec![0.0; u_prev.len()];
    for k in 0..u_prev.len() {
        let v = cfg.tau * u_prev[k] + current[k];
        let (a, u) = fire(v, cfg.v_th);
        spikes[k] = a;
        u_next[k] = u;
    }
    Ok((spikes, u_next))
}

#[inline]
pub(crate) fn fire(v: f64, v_th: f64) -> (f64, f64) {
    if v >= v_th {
        (1.0, 0.0)
    } else {
        (0.0, v)
    }
}

/// Rectangular stand-in for the derivative of the spike step:
/// `1/γ` inside `|v - V_th| < γ/2`, zero elsewhere.
pub fn surrogate_grad(v_minus_vth: f64, cfg: &LifConfig) -> f64 {
    if v_minus_vth.abs() < cfg.surrogate_width / 2.0 {
        1.0 / cfg.surrogate_width
    } else {
        0.0
    }
}

/// Recorded trajectory of one spiking layer for a single sample, indexed
/// `[t][neuron]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LifLayerState {
    /// Membrane after reset; zero wherever a spike was emitted.
    pub u: Vec<Vec<f64>>,
    /// Spikes, each `0.0` or `1.0`.
    pub a: Vec<Vec<f64>>,
    /// Membrane before the threshold test.
    pub v: Vec<Vec<f64>>,
}

impl LifLayerState {
    /// Runs `currents[t]` through the neurons from a resting membrane.
    pub fn run(currents: &[Vec<f64>], cfg: &LifConfig) -> Self {
        let mut state = Self::default();
        let n = currents.first().map_or(0, Vec::len);
        let mut u = vec![0.0; n];
        for current in currents {
            let mut v = vec![0.0; n];
            let mut a = vec![0.0; n];
            for k in 0..n {
                v[k] = cfg.tau * u[k] + current[k];
                (a[k], u[k]) = fire(v[k], cfg.v_th);
            }
            state.v.push(v);
            state.a.push(a);
            state.u.push(u.clone());
        }
        state
    }

    pub fn steps(&self) -> usize {
        self.a.len()
    }
}
