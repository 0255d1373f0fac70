//! Candid covariance-free incremental lobe component analysis (CCI LCA).
//!
//! A neuron keeps a weight vector and a firing age `a`. Each time it wins
//! and fires with response `r`, the weight moves by
//!
//! ```text
//! v <- (1 - 1/a) v + (1/a) r x        (a already incremented)
//! ```
//!
//! Retention `1 - 1/a` and learning rate `1/a` always sum to one, so the
//! first firing discards the random initial weight entirely and later
//! firings keep a running (response-weighted) mean of the inputs.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A hidden or motor neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub weight: Vec<f64>,
    /// Number of times the neuron has won and fired.
    pub firing_age: u64,
    /// Whether the neuron has been spawned into the active set.
    pub active: bool,
}

impl NeuronState {
    /// A free (not yet spawned) neuron with the given initial weight.
    pub fn virgin(weight: Vec<f64>) -> Self {
        Self {
            weight,
            firing_age: 0,
            active: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    /// Cosine between weight and input. Zero when the weight is zero.
    pub fn pre_response(&self, input: &[f64]) -> Result<f64> {
        if !self.active {
            return Err(Error::InvalidArgument(
                "pre-response of an inactive neuron".into(),
            ));
        }
        check_dim("pre_response", self.dim(), input.len())?;
        cosine(&self.weight, input)
    }

    /// Value-semantics form of [`NeuronState::learn`].
    pub fn lca_update(&self, input: &[f64], response: f64) -> Result<NeuronState> {
        let mut next = self.clone();
        next.learn(input, response)?;
        Ok(next)
    }

    /// Fire once with response `response` on `input` and apply the
    /// age-dependent Hebbian update in place.
    pub fn learn(&mut self, input: &[f64], response: f64) -> Result<()> {
        if !self.active {
            return Err(Error::InvalidArgument("update of an inactive neuron".into()));
        }
        check_dim("lca_update", self.dim(), input.len())?;
        if !(0.0..=1.0).contains(&response) {
            return Err(Error::InvalidArgument(format!(
                "response {response} outside [0, 1]"
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lca_update input"));
        }
        self.firing_age += 1;
        let (retain, learn) = rates(self.firing_age);
        for (w, &x) in self.weight.iter_mut().zip(input) {
            *w = retain * *w + learn * response * x;
        }
        Ok(())
    }
}

impl NeuronState {
    /// Covariance-free principal-component form of the update: the
    /// response is the projection `x . v / |v|`, so
    /// `v <- (1 - 1/a) v + (1/a) (x . v / |v|) x`. On zero-mean data the
    /// weight direction tracks the first principal axis.
    pub fn learn_principal(&mut self, input: &[f64]) -> Result<()> {
        if !self.active {
            return Err(Error::InvalidArgument("update of an inactive neuron".into()));
        }
        check_dim("learn_principal", self.dim(), input.len())?;
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("learn_principal input"));
        }
        let wn = norm(&self.weight);
        let response = if wn > 0.0 { dot(input, &self.weight) / wn } else { norm(input) };
        self.firing_age += 1;
        let (retain, learn) = rates(self.firing_age);
        for (w, &x) in self.weight.iter_mut().zip(input) {
            *w = retain * *w + learn * response * x;
        }
        Ok(())
    }
}

/// Retention and learning rates `(1 - 1/a, 1/a)` for firing age `a >= 1`.
pub fn rates(firing_age: u64) -> (f64, f64) {
    debug_assert!(firing_age >= 1);
    let learn = 1.0 / firing_age as f64;
    (1.0 - learn, learn)
}

/// Cosine similarity; 0 when `weight` is the zero vector, error when
/// `input` is.
pub fn cosine(weight: &[f64], input: &[f64]) -> Result<f64> {
    let input_norm = norm(input);
    if input_norm == 0.0 {
        return Err(Error::ZeroInput);
    }
    let weight_norm = norm(weight);
    if weight_norm == 0.0 {
        return Ok(0.0);
    }
    let c = dot(weight, input) / (weight_norm * input_norm);
    Ok(c.clamp(-1.0, 1.0))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Parameters of the almost-perfect-match schedule
/// `m(t) = (1 - delta)(1 - exp(-t / childhood_length))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchSchedule {
    /// Round-off bound, in (0, 1).
    pub delta: f64,
    /// Childhood length in steps.
    pub childhood_length: f64,
}

impl Default for MatchSchedule {
    fn default() -> Self {
        Self {
            delta: 1e-6,
            childhood_length: 1000.0,
        }
    }
}

impl MatchSchedule {
    pub fn new(delta: f64, childhood_length: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta {delta} outside (0, 1)"
            )));
        }
        if !(childhood_length > 0.0 && childhood_length.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "childhood length {childhood_length} must be positive"
            )));
        }
        Ok(Self {
            delta,
            childhood_length,
        })
    }

    pub fn threshold(&self, t: u64) -> f64 {
        match_threshold(t, self)
    }
}

pub fn match_threshold(t: u64, schedule: &MatchSchedule) -> f64 {
    (1.0 - schedule.delta) * (1.0 - (-(t as f64) / schedule.childhood_length).exp())
}

/// One firing winner of a top-k competition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winner {
    pub index: usize,
    /// 1-based rank.
    pub rank: usize,
    pub response: f64,
}

/// Indices of the `k` largest pre-responses, ties to the lowest index.
///
/// Rank `r` fires with response `(k - r + 1) / k`, so the top-1 winner
/// always fires at 1. `k` is clamped to the number of candidates.
pub fn top_k_compete(pre_responses: &[f64], k: usize) -> Result<Vec<Winner>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if pre_responses.is_empty() {
        return Err(Error::InvalidArgument("no candidates to compete".into()));
    }
    let k = k.min(pre_responses.len());
    let mut order: Vec<usize> = (0..pre_responses.len()).collect();
    // stable sort keeps lower indices first among equal values
    order.sort_by(|&a, &b| {
        pre_responses[b]
            .partial_cmp(&pre_responses[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, index)| {
            let rank = i + 1;
            Winner {
                index,
                rank,
                response: (k - rank + 1) as f64 / k as f64,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn active(weight: Vec<f64>) -> NeuronState {
        NeuronState {
            weight,
            firing_age: 0,
            active: true,
        }
    }

    #[test]
    fn pre_response_examples() {
        let n = active(vec![0.3, -0.4]);
        assert!((n.pre_response(&[0.3, -0.4]).unwrap() - 1.0).abs() < 1e-15);
        let n = active(vec![1.0, 0.0]);
        assert_eq!(n.pre_response(&[0.0, 5.0]).unwrap(), 0.0);
        let s = 1.0 / 2f64.sqrt();
        let c = n.pre_response(&[s, s]).unwrap();
        assert!((c - 0.707_106_781_186_547_5).abs() < 1e-12);
    }

    #[test]
    fn pre_response_errors() {
        let n = active(vec![1.0, 0.0]);
        assert!(matches!(
            n.pre_response(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(n.pre_response(&[0.0, 0.0]), Err(Error::ZeroInput));
        assert_eq!(active(vec![0.0, 0.0]).pre_response(&[1.0, 2.0]), Ok(0.0));
        assert!(NeuronState::virgin(vec![1.0]).pre_response(&[1.0]).is_err());
    }

    #[test]
    fn first_firing_memorizes_input() {
        let n = active(vec![123.0, -9.5, 0.25]);
        let x = [0.1, 0.2, -0.3];
        let n = n.lca_update(&x, 1.0).unwrap();
        assert_eq!(n.weight, x.to_vec());
        assert_eq!(n.firing_age, 1);
        assert!(n.active);
    }

    #[test]
    fn second_firing_averages() {
        let n = NeuronState {
            weight: vec![2.0, 0.0],
            firing_age: 1,
            active: true,
        };
        let n = n.lca_update(&[0.0, 2.0], 1.0).unwrap();
        assert_eq!(n.weight, vec![1.0, 1.0]);
        assert_eq!(n.firing_age, 2);
    }

    #[test]
    fn update_rejects_bad_input() {
        let n = active(vec![0.0, 0.0]);
        assert_eq!(
            n.lca_update(&[f64::NAN, 1.0], 1.0),
            Err(Error::NonFinite("lca_update input"))
        );
        assert!(n.lca_update(&[1.0, 1.0], 1.5).is_err());
        assert!(n.lca_update(&[1.0], 1.0).is_err());
    }

    #[test]
    fn match_threshold_examples() {
        let s = MatchSchedule::new(0.01, 100.0).unwrap();
        assert_eq!(s.threshold(0), 0.0);
        let expected = 0.99 * (1.0 - (-1.0f64).exp());
        assert!((s.threshold(100) - expected).abs() < 1e-15);
        assert!((s.threshold(100) - 0.62579).abs() < 1e-5);
        let d = MatchSchedule::default();
        let far = d.threshold(100_000);
        assert!(((1.0 - d.delta) - far).abs() <= 1e-43);
        assert!(MatchSchedule::new(0.0, 1.0).is_err());
        assert!(MatchSchedule::new(0.5, 0.0).is_err());
    }

    #[test]
    fn top_k_examples() {
        let w = top_k_compete(&[0.2, 0.9, 0.5], 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].index, w[0].rank, w[0].response), (1, 1, 1.0));

        let w = top_k_compete(&[0.7, 0.7], 1).unwrap();
        assert_eq!(w[0].index, 0);

        let w = top_k_compete(&[0.1, 0.8, 0.6, 0.3], 2).unwrap();
        assert_eq!((w[0].index, w[0].rank), (1, 1));
        assert_eq!((w[1].index, w[1].rank), (2, 2));
        assert_eq!(w[0].response, 1.0);
        assert_eq!(w[1].response, 0.5);

        assert_eq!(top_k_compete(&[0.1, 0.2], 5).unwrap().len(), 2);
        assert!(top_k_compete(&[0.1], 0).is_err());
        assert!(top_k_compete(&[], 1).is_err());
    }
}
