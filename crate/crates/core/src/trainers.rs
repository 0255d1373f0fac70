//! [`Trainer`] adapters that let the audit grid drive each learning system.
//!
//! Hyper-parameters are read from [`ArchParams`] by name; a missing key
//! falls back to the adapter's default.

use crate::backprop::{layer_sizes, train, Mlp, TrainConfig};
use crate::data::Dataset;
use crate::dn::{DevNetwork, DnConfig, Motor};
use crate::error::{Error, Result};
use crate::nn_threshold::NnClassifier;
use crate::postselect::{ArchParams, Trainer};

fn usize_param(arch: &ArchParams, key: &str, default: usize) -> Result<usize> {
    match arch.get(key) {
        None => Ok(default),
        Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
        Some(v) => Err(Error::InvalidArgument(format!(
            "{key} = {v} must be a non-negative integer"
        ))),
    }
}

/// Logistic MLP trained by full-batch backprop.
///
/// Keys: `hidden` (units in one hidden layer), `learning_rate`,
/// `momentum`, `epochs`.
#[derive(Debug, Clone, Default)]
pub struct BackpropTrainer {
    pub defaults: TrainConfig,
}

impl BackpropTrainer {
    pub fn config(&self, arch: &ArchParams, seed: u64) -> Result<TrainConfig> {
        let d = &self.defaults;
        let hidden = match arch.get("hidden") {
            Some(_) => vec![usize_param(arch, "hidden", 0)?],
            None => d.hidden.clone(),
        };
        let cfg = TrainConfig {
            learning_rate: arch.get("learning_rate").unwrap_or(d.learning_rate),
            momentum: arch.get("momentum").unwrap_or(d.momentum),
            epochs: usize_param(arch, "epochs", d.epochs)?,
            seed,
            hidden: hidden.into_iter().filter(|&h| h > 0).collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Trainer for BackpropTrainer {
    type Model = Mlp;

    fn name(&self) -> String {
        "backprop".into()
    }

    fn train(&self, arch: &ArchParams, seed: u64, data: &Dataset) -> Result<Mlp> {
        let cfg = self.config(arch, seed)?;
        let mlp = Mlp::new(&layer_sizes(data, &cfg.hidden), true, seed)?;
        let report = train(mlp, data, &cfg)?;
        match report.failure {
            Some(msg) => Err(Error::Diverged(msg)),
            None => Ok(report.mlp),
        }
    }

    fn error(&self, model: &Mlp, data: &Dataset) -> Result<f64> {
        model.error_rate(data)
    }
}

/// Nearest neighbor with confidence threshold. Key: `threshold`.
/// The seed is ignored: the classifier has no random initialization.
#[derive(Debug, Clone, Default)]
pub struct NnThresholdTrainer;

impl Trainer for NnThresholdTrainer {
    type Model = NnClassifier;

    fn name(&self) -> String {
        "nn-threshold".into()
    }

    fn train(&self, arch: &ArchParams, _seed: u64, data: &Dataset) -> Result<NnClassifier> {
        NnClassifier::new(data.clone(), arch.get("threshold").unwrap_or(0.0))
    }

    fn error(&self, model: &NnClassifier, data: &Dataset) -> Result<f64> {
        model.error_rate(data)
    }
}

/// A DN used as a classifier: one motor zone with one neuron per class.
/// Each sample is a supervised step from a silent motor context.
///
/// Keys: `capacity` (hidden neurons, default = training-set size),
/// `spawn_floor`, `epochs` (default 1), `top_k` (default 1).
#[derive(Debug, Clone, Default)]
pub struct DnTrainer;

/// A trained DN together with the silent motor context it is read from.
#[derive(Debug, Clone)]
pub struct DnClassifier {
    pub network: DevNetwork,
}

impl DnClassifier {
    pub fn classify(&self, x: &[f64]) -> Result<Option<usize>> {
        let z_dim = self.network.config().z_dim();
        let z = self.network.predict(x, &vec![0.0; z_dim])?;
        Ok(z.iter().position(|&v| v > 0.0))
    }

    pub fn error_rate(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut wrong = 0usize;
        for (x, &l) in data.features.iter().zip(&data.labels) {
            if self.classify(x)? != Some(l) {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / data.len() as f64)
    }
}

impl DnTrainer {
    pub fn config(&self, arch: &ArchParams, seed: u64, data: &Dataset) -> Result<DnConfig> {
        let mut cfg = DnConfig::new(
            data.dim(),
            vec![data.n_classes],
            usize_param(arch, "capacity", data.len().max(1))?,
        )
        .with_seed(seed)
        .with_top_k(usize_param(arch, "top_k", 1)?);
        if let Some(f) = arch.get("spawn_floor") {
            cfg.spawn_floor = f;
        }
        Ok(cfg)
    }

    /// Present `data` once, in order, each sample supervised with its label.
    pub fn teach_epoch(net: &mut DevNetwork, data: &Dataset) -> Result<()> {
        let z_dim = net.config().z_dim();
        let silent = vec![0.0; z_dim];
        for (x, &l) in data.features.iter().zip(&data.labels) {
            let mut z = vec![0.0; z_dim];
            z[l] = 1.0;
            net.clamp_motor(&silent)?;
            net.step(x, Motor::Supervised(&z))?;
        }
        Ok(())
    }
}

impl Trainer for DnTrainer {
    type Model = DnClassifier;

    fn name(&self) -> String {
        "dn".into()
    }

    fn train(&self, arch: &ArchParams, seed: u64, data: &Dataset) -> Result<DnClassifier> {
        let mut network = DevNetwork::new(self.config(arch, seed, data)?)?;
        for _ in 0..usize_param(arch, "epochs", 1)? {
            Self::teach_epoch(&mut network, data)?;
        }
        Ok(DnClassifier { network })
    }

    fn error(&self, model: &DnClassifier, data: &Dataset) -> Result<f64> {
        model.error_rate(data)
    }
}

/// Scores every model at a fixed error; for checking the statistics.
#[derive(Debug, Clone, Copy)]
pub struct ConstantTrainer {
    pub error: f64,
}

impl Trainer for ConstantTrainer {
    type Model = ();

    fn name(&self) -> String {
        format!("constant({})", self.error)
    }

    fn train(&self, _arch: &ArchParams, _seed: u64, _data: &Dataset) -> Result<()> {
        Ok(())
    }

    fn error(&self, _model: &(), _data: &Dataset) -> Result<f64> {
        Ok(self.error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian_clusters;

    #[test]
    fn dn_classifier_resubstitution_is_exact() {
        let d = gaussian_clusters(3, 2, 30, 0.3, 3.0, 0.0, 5).unwrap();
        let arch = ArchParams::default().with("spawn_floor", 0.999999);
        let m = DnTrainer.train(&arch, 1, &d).unwrap();
        assert_eq!(m.error_rate(&d).unwrap(), 0.0);
    }

    #[test]
    fn dn_classifier_is_seed_invariant() {
        let d = gaussian_clusters(2, 3, 40, 1.0, 2.0, 0.1, 8).unwrap();
        let arch = ArchParams::default().with("capacity", 10.0);
        let a = DnTrainer.train(&arch, 1, &d).unwrap();
        let b = DnTrainer.train(&arch, 999, &d).unwrap();
        assert_eq!(a.error_rate(&d).unwrap(), b.error_rate(&d).unwrap());
        assert_eq!(
            a.network.life().iter().map(|r| r.prediction_error).collect::<Vec<_>>(),
            b.network.life().iter().map(|r| r.prediction_error).collect::<Vec<_>>()
        );
    }

    #[test]
    fn backprop_params_are_read() {
        let arch = ArchParams::default()
            .with("hidden", 3.0)
            .with("learning_rate", 0.1)
            .with("epochs", 7.0);
        let cfg = BackpropTrainer::default().config(&arch, 4).unwrap();
        assert_eq!(cfg.hidden, vec![3]);
        assert_eq!(cfg.epochs, 7);
        assert_eq!(cfg.seed, 4);
        assert!(BackpropTrainer::default()
            .config(&ArchParams::default().with("hidden", 1.5), 0)
            .is_err());
    }
}
