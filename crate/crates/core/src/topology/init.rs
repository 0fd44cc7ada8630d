use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SparseMask;
use crate::error::{Error, Result};

/// Sparsity control for Erdős–Rényi initialization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErdosRenyiConfig {
    epsilon: f64,
}

impl ErdosRenyiConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!(
                "epsilon must be a positive finite number, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Connection probability `ε (n_pre + n_post) / (n_pre n_post)`, clamped to 1.
    pub fn probability(&self, n_pre: usize, n_post: usize) -> f64 {
        let p = self.epsilon * (n_pre + n_post) as f64 / (n_pre as f64 * n_post as f64);
        p.min(1.0)
    }

    /// The factor whose unclamped probability equals `density` for the shape.
    pub fn for_density(density: f64, n_pre: usize, n_post: usize) -> Result<Self> {
        if !(density > 0.0 && density <= 1.0) {
            return Err(Error::invalid(format!(
                "density must lie in (0, 1], got {density}"
            )));
        }
        Self::new(density * (n_pre as f64 * n_post as f64) / (n_pre + n_post) as f64)
    }

    /// Expected number of active synapses for the given shape.
    pub fn expected_cardinality(&self, n_pre: usize, n_post: usize) -> f64 {
        self.probability(n_pre, n_post) * (n_pre * n_post) as f64
    }
}

/// Draws an Erdős–Rényi mask: every synapse is independently active with
/// probability [`ErdosRenyiConfig::probability`].
pub fn er_init(
    n_pre: usize,
    n_post: usize,
    cfg: &ErdosRenyiConfig,
    seed: u64,
) -> Result<SparseMask> {
    if n_pre == 0 || n_post == 0 {
        return Err(Error::invalid(format!(
            "mask dimensions must be positive, got {n_pre}x{n_post}"
        )));
    }
    let p = cfg.probability(n_pre, n_post);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = (0..n_pre * n_post).map(|_| rng.gen::<f64>() < p).collect();
    Ok(SparseMask::from_bits(n_pre, n_post, bits))
}

/// Fraction of connections rewired at iteration `t`:
/// `(α/2) (1 + cos(tπ / t_end))`.
pub fn cosine_decay(t: u64, alpha: f64, t_end: u64) -> Result<f64> {
    if t_end == 0 {
        return Err(Error::invalid("t_end must be positive"));
    }
    if t > t_end {
        return Err(Error::invalid(format!("iteration {t} past t_end {t_end}")));
    }
    let phase = t as f64 * std::f64::consts::PI / t_end as f64;
    Ok((alpha / 2.0 * (1.0 + phase.cos())).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PruneRule {
    /// Remove the active synapses with the smallest `|w|`.
    Magnitude,
    /// Remove the negative weights closest to zero and the smallest positive
    /// weights in equal shares.
    SetSigned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GrowthRule {
    /// Uniform sampling, never-active synapses first.
    RandomUnfired,
    /// Largest dense-gradient magnitude among inactive synapses.
    Gradient,
    /// Largest optimizer-momentum magnitude among inactive synapses.
    Momentum,
}

impl PruneRule {
    pub fn name(&self) -> &'static str {
        match self {
            PruneRule::Magnitude => "magnitude",
            PruneRule::SetSigned => "set",
        }
    }
}

impl std::str::FromStr for PruneRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnitude" => Ok(PruneRule::Magnitude),
            "set" => Ok(PruneRule::SetSigned),
            other => Err(Error::invalid(format!("unknown prune rule `{other}`"))),
        }
    }
}

impl GrowthRule {
    pub fn name(&self) -> &'static str {
        match self {
            GrowthRule::RandomUnfired => "random-unfired",
            GrowthRule::Gradient => "gradient",
            GrowthRule::Momentum => "momentum",
        }
    }
}

impl std::str::FromStr for GrowthRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-unfired" => Ok(GrowthRule::RandomUnfired),
            "gradient" => Ok(GrowthRule::Gradient),
            "momentum" => Ok(GrowthRule::Momentum),
            other => Err(Error::invalid(format!("unknown growth rule `{other}`"))),
        }
    }
}

/// When and how masks are rewired during training.
///
/// `alpha = 0` disables rewiring (static sparse training).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionSchedule {
    pub alpha: f64,
    pub t_iter: u64,
    pub t_end: u64,
    pub prune_rule: PruneRule,
    pub growth_rule: GrowthRule,
}

impl EvolutionSchedule {
    pub fn new(
        alpha: f64,
        t_iter: u64,
        t_end: u64,
        prune_rule: PruneRule,
        growth_rule: GrowthRule,
    ) -> Result<Self> {
        let s = Self {
            alpha,
            t_iter,
            t_end,
            prune_rule,
            growth_rule,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if self.t_iter == 0 {
            return Err(Error::invalid("t_iter must be at least 1"));
        }
        if self.t_end < self.t_iter {
            return Err(Error::invalid(format!(
                "t_end ({}) must be >= t_iter ({})",
                self.t_end, self.t_iter
            )));
        }
        Ok(())
    }

    /// Whether a rewire is due after `iteration` completed steps.
    pub fn is_rewire_iteration(&self, iteration: u64) -> bool {
        self.alpha > 0.0 && iteration % self.t_iter == 0 && iteration <= self.t_end
    }
}
