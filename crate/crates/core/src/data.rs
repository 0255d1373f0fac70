//! Labeled datasets and the built-in synthetic generators.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::automata::FiniteAgentAutomaton;
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(first) = features.first() {
            if features.iter().any(|f| f.len() != first.len()) {
                return Err(Error::InvalidArgument("ragged feature rows".into()));
            }
        }
        if labels.iter().any(|&l| l >= n_classes) {
            return Err(Error::InvalidArgument("label out of range".into()));
        }
        Ok(Self {
            features,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// `x0,...,x{p-1},label` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.dim()).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        if !header.is_empty() {
            out.push(',');
        }
        out.push_str("label\n");
        for (f, l) in self.features.iter().zip(&self.labels) {
            for v in f {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{l}\n"));
        }
        out
    }
}

/// Built-in generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// `classes` isotropic Gaussian blobs in `dim` dimensions with
    /// balanced labels; each label is replaced by a uniformly random one
    /// with probability `label_noise`.
    GaussianClusters {
        classes: usize,
        dim: usize,
        size: usize,
        spread: f64,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default)]
        label_noise: f64,
    },
    /// Parity of `bits` random bits (features in {-1, 1}); the label is
    /// flipped with probability `noise`.
    NoisyParity { bits: usize, size: usize, noise: f64 },
    /// Transitions observed while running an automaton on random inputs.
    /// Features are `(one-hot state, one-hot symbol)`, label = next state.
    FaCorpus {
        machine: String,
        sequences: usize,
        length: usize,
    },
}

fn default_separation() -> f64 {
    3.0
}

pub const GENERATORS: &[&str] = &["gaussian-clusters", "noisy-parity", "fa-corpus"];

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::GaussianClusters { .. } => "gaussian-clusters",
            GeneratorSpec::NoisyParity { .. } => "noisy-parity",
            GeneratorSpec::FaCorpus { .. } => "fa-corpus",
        }
    }
}

/// Per-class sample counts for a balanced split of `size` over `classes`.
fn balanced_counts(size: usize, classes: usize) -> Vec<usize> {
    (0..classes)
        .map(|c| size / classes + usize::from(c < size % classes))
        .collect()
}

pub fn gaussian_clusters(
    classes: usize,
    dim: usize,
    size: usize,
    spread: f64,
    separation: f64,
    label_noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "gaussian-clusters needs classes >= 1 and dim >= 1".into(),
        ));
    }
    if spread.is_nan() || spread < 0.0 || !(0.0..=1.0).contains(&label_noise) {
        return Err(Error::InvalidArgument(
            "spread must be >= 0 and label_noise in [0, 1]".into(),
        ));
    }
    let mut rng = rng_for(seed, Stream::Generator, 0);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| separation * unit.sample(&mut rng)).collect())
        .collect();
    let mut features = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    for (c, count) in balanced_counts(size, classes).into_iter().enumerate() {
        for _ in 0..count {
            features.push(
                centers[c]
                    .iter()
                    .map(|m| m + spread * unit.sample(&mut rng))
                    .collect(),
            );
            let noisy = label_noise > 0.0 && rng.gen::<f64>() < label_noise;
            labels.push(if noisy { rng.gen_range(0..classes) } else { c });
        }
    }
    Dataset::new(features, labels, classes)
}

pub fn noisy_parity(bits: usize, size: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if bits == 0 || !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidArgument(
            "noisy-parity needs bits >= 1 and noise in [0, 1]".into(),
        ));
    }
    let mut rng = rng_for(seed, Stream::Generator, 0);
    let mut features = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    for _ in 0..size {
        let b: Vec<bool> = (0..bits).map(|_| rng.gen()).collect();
        let parity = b.iter().filter(|&&x| x).count() % 2;
        let flip = rng.gen::<f64>() < noise;
        features.push(b.iter().map(|&x| if x { 1.0 } else { -1.0 }).collect());
        labels.push(if flip { 1 - parity } else { parity });
    }
    Dataset::new(features, labels, 2)
}

/// One observed transition of an automaton run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observed {
    pub state: usize,
    pub symbol: usize,
    pub next: usize,
}

pub fn fa_corpus(
    fa: &FiniteAgentAutomaton,
    sequences: usize,
    length: usize,
    seed: u64,
) -> Result<(Dataset, Vec<Observed>)> {
    let n_q = fa.states().len();
    let n_s = fa.alphabet().len();
    let mut rng = rng_for(seed, Stream::Generator, 0);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut observed = Vec::new();
    for _ in 0..sequences {
        let input: Vec<usize> = (0..length).map(|_| rng.gen_range(0..n_s)).collect();
        let states = fa.run(&input)?;
        let mut q = fa.initial();
        for (&s, &next) in input.iter().zip(&states) {
            let mut f = vec![0.0; n_q + n_s];
            f[q] = 1.0;
            f[n_q + s] = 1.0;
            features.push(f);
            labels.push(next);
            observed.push(Observed {
                state: q,
                symbol: s,
                next,
            });
            q = next;
        }
    }
    Ok((Dataset::new(features, labels, n_q)?, observed))
}

/// Run a generator. `fa-corpus` needs the machine already parsed.
pub fn generate_dataset(
    spec: &GeneratorSpec,
    seed: u64,
    machine: Option<&FiniteAgentAutomaton>,
) -> Result<Dataset> {
    match spec {
        GeneratorSpec::GaussianClusters {
            classes,
            dim,
            size,
            spread,
            separation,
            label_noise,
        } => gaussian_clusters(*classes, *dim, *size, *spread, *separation, *label_noise, seed),
        GeneratorSpec::NoisyParity { bits, size, noise } => noisy_parity(*bits, *size, *noise, seed),
        GeneratorSpec::FaCorpus {
            sequences, length, ..
        } => {
            let fa = machine.ok_or_else(|| {
                Error::InvalidArgument("fa-corpus needs a finite automaton".into())
            })?;
            Ok(fa_corpus(fa, *sequences, *length, seed)?.0)
        }
    }
}

/// Look up a generator by name; unknown names list the known ones.
pub fn check_generator_name(name: &str) -> Result<()> {
    if GENERATORS.contains(&name) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "unknown generator `{name}`; known generators: {}",
            GENERATORS.join(", ")
        )))
    }
}
