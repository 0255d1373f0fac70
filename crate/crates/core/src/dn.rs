//! Developmental network (DN-2 style) lifetime loop.
//!
//! Three areas: sensory `X`, skull-closed hidden `Y`, and motor `Z`. Each
//! call to [`DevNetwork::step`] is one time instant, computed in a single
//! pass with no iteration:
//!
//! 1. `Y` receives the context `(x_t, z_{t-1})` (plus `y_{t-1}` when lateral
//!    input is enabled). Each part is unit-normalized and the parts are
//!    concatenated with equal weight. Active neurons compute cosine
//!    pre-responses. If the best one falls below
//!    `max(m(t), spawn_floor)` and a free neuron exists, the free neuron is
//!    spawned and memorizes the context; otherwise the top-k winners fire
//!    and learn by LCA.
//! 2. `Z` reads the fresh sparse `y'`. Each motor neuron's pre-response is
//!    the inner product of its weight with `y'`; each concept zone emits a
//!    one-hot vector at its argmax. A teacher may override `z'`. Firing
//!    motor neurons learn `y'` by LCA, so a motor weight is the firing
//!    frequency of each hidden neuron conditioned on that motor neuron.
//! 3. The context is replaced by `(x_t, y', z')` and time advances by one.
//!
//! The parameter vector of the incremental maximum-likelihood estimator is
//! `theta = (Y weights, Z weights, firing ages)`; the closed-form LCA update
//! is its implementation and no density is evaluated explicitly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lca::{cosine, dot, norm, top_k_compete, MatchSchedule, NeuronState, Winner};
use crate::rng::{rng_for, Stream};

pub const SNAPSHOT_FORMAT: &str = "devlab-dn-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnConfig {
    pub x_dim: usize,
    /// Sizes of the motor concept zones; the motor dimension is their sum.
    pub zones: Vec<usize>,
    /// Number of hidden neurons `n_Y`.
    pub y_capacity: usize,
    pub top_k: usize,
    pub schedule: MatchSchedule,
    /// Lower bound on the spawn threshold while `m(t)` is still small.
    pub spawn_floor: f64,
    /// Feed the previous hidden response back into `Y`.
    pub lateral: bool,
    /// Seed for the random initial weights of free hidden neurons.
    pub seed: u64,
}

impl DnConfig {
    pub fn new(x_dim: usize, zones: Vec<usize>, y_capacity: usize) -> Self {
        Self {
            x_dim,
            zones,
            y_capacity,
            top_k: 1,
            schedule: MatchSchedule::default(),
            spawn_floor: 0.95,
            lateral: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_top_k(mut self, k: usize) -> Self {
        self.top_k = k;
        self
    }

    pub fn z_dim(&self) -> usize {
        self.zones.iter().sum()
    }

    pub fn y_input_dim(&self) -> usize {
        self.x_dim + self.z_dim() + if self.lateral { self.y_capacity } else { 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.x_dim == 0 {
            return Err(Error::InvalidArgument("x_dim must be positive".into()));
        }
        if self.zones.is_empty() || self.zones.contains(&0) {
            return Err(Error::InvalidArgument(
                "motor zones must be non-empty and positive".into(),
            ));
        }
        if self.y_capacity == 0 {
            return Err(Error::InvalidArgument("y_capacity must be positive".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidArgument("top_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.spawn_floor) {
            return Err(Error::InvalidArgument(format!(
                "spawn_floor {} outside [0, 1]",
                self.spawn_floor
            )));
        }
        MatchSchedule::new(self.schedule.delta, self.schedule.childhood_length)?;
        Ok(())
    }
}

/// An ordered pool of neurons of which the first `spawn_boundary` are active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    neurons: Vec<NeuronState>,
    spawn_boundary: usize,
}

impl Area {
    /// `capacity` free neurons with the given initial weights.
    pub fn new(initial_weights: Vec<Vec<f64>>) -> Self {
        Self {
            neurons: initial_weights.into_iter().map(NeuronState::virgin).collect(),
            spawn_boundary: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.neurons.len()
    }

    pub fn spawn_boundary(&self) -> usize {
        self.spawn_boundary
    }

    pub fn neurons(&self) -> &[NeuronState] {
        &self.neurons
    }

    pub fn active(&self) -> &[NeuronState] {
        &self.neurons[..self.spawn_boundary]
    }

    pub fn has_free(&self) -> bool {
        self.spawn_boundary < self.neurons.len()
    }

    /// Activate the next free neuron and fire it once on `context_input`,
    /// which it memorizes exactly. Returns the new neuron's index.
    pub fn spawn_neuron(&mut self, context_input: &[f64]) -> Result<usize> {
        if !self.has_free() {
            return Err(Error::CapacityExhausted {
                capacity: self.capacity(),
            });
        }
        let idx = self.spawn_boundary;
        let neuron = &mut self.neurons[idx];
        check_dim("spawn_neuron", neuron.dim(), context_input.len())?;
        neuron.active = true;
        neuron.firing_age = 0;
        neuron.learn(context_input, 1.0)?;
        self.spawn_boundary += 1;
        Ok(idx)
    }

    fn pre_responses(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.active().iter().map(|n| n.pre_response(input)).collect()
    }
}

/// The context `(x, y, z)` of one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Incremental lifetime error statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevErrorTracker {
    count: u64,
    running_mean: f64,
    log: Option<Vec<f64>>,
}

impl Default for DevErrorTracker {
    fn default() -> Self {
        Self::with_log()
    }
}

impl DevErrorTracker {
    /// Tracker that retains every error for windowed queries.
    pub fn with_log() -> Self {
        Self {
            count: 0,
            running_mean: 0.0,
            log: Some(Vec::new()),
        }
    }

    /// Tracker that keeps only the running mean.
    pub fn without_log() -> Self {
        Self {
            count: 0,
            running_mean: 0.0,
            log: None,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Lifetime average error so far (0 before any record).
    pub fn mean(&self) -> f64 {
        self.running_mean
    }

    pub fn log(&self) -> Option<&[f64]> {
        self.log.as_deref()
    }

    pub fn record(&mut self, error: f64) -> Result<()> {
        if !error.is_finite() || error < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "developmental error must be finite and non-negative, got {error}"
            )));
        }
        self.count += 1;
        let t = self.count as f64;
        self.running_mean = ((t - 1.0) / t) * self.running_mean + error / t;
        if let Some(log) = &mut self.log {
            log.push(error);
        }
        Ok(())
    }

    /// Mean error over record indices `t1..=t2`.
    pub fn window(&self, t1: usize, t2: usize) -> Result<f64> {
        let log = self
            .log
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("tracker keeps no error log".into()))?;
        if t1 > t2 || t2 >= log.len() {
            return Err(Error::InvalidArgument(format!(
                "window [{t1}, {t2}] outside 0..{}",
                log.len()
            )));
        }
        let slice = &log[t1..=t2];
        Ok(slice.iter().sum::<f64>() / slice.len() as f64)
    }
}

/// Per-zone classification error between two motor vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorError {
    /// 1 if any zone's argmax disagrees, else 0.
    pub error: f64,
    pub per_zone: Vec<f64>,
    /// Euclidean norm of the raw difference.
    pub diff_norm: f64,
}

/// Index of the largest strictly positive component, ties to the lowest
/// index. `None` when no component is positive.
pub fn argmax_positive(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        if x > 0.0 && best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

/// Split a motor vector into its concept zones.
pub fn zone_slices<'a>(z: &'a [f64], zones: &[usize]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(zones.len());
    let mut start = 0;
    for &len in zones {
        out.push(&z[start..start + len]);
        start += len;
    }
    out
}

pub fn motor_error(z_out: &[f64], z_desired: &[f64], zones: &[usize]) -> Result<MotorError> {
    check_dim("motor_error", z_desired.len(), z_out.len())?;
    check_dim("motor_error zones", zones.iter().sum(), z_out.len())?;
    let per_zone: Vec<f64> = zone_slices(z_out, zones)
        .into_iter()
        .zip(zone_slices(z_desired, zones))
        .map(|(o, d)| {
            if argmax_positive(o) == argmax_positive(d) {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    let error = if per_zone.iter().any(|&e| e > 0.0) {
        1.0
    } else {
        0.0
    };
    let diff_norm = z_out
        .iter()
        .zip(z_desired)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(MotorError {
        error,
        per_zone,
        diff_norm,
    })
}

/// What the teacher does with the motor area at one step.
#[derive(Debug, Clone, Copy)]
pub enum Motor<'a> {
    /// The network acts on its own; no error is recorded.
    Free,
    /// The teacher imposes `z'`. The learner's error is 0; the network's
    /// own would-be output is scored separately as the prediction error.
    Supervised(&'a [f64]),
    /// The network acts on its own and the teacher scores it against the
    /// desired vector.
    Observed(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// The motor vector the network generated before any supervision.
    pub predicted_z: Vec<f64>,
    pub spawned: Option<usize>,
    pub capacity_event: bool,
    pub learner_error: Option<f64>,
    pub prediction_error: Option<f64>,
}

/// One row of the lifetime log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeRecord {
    pub t: u64,
    pub error: Option<f64>,
    pub mean_error: f64,
    pub spawned_count: usize,
    pub capacity_event: bool,
    pub prediction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevNetwork {
    config: DnConfig,
    y_area: Area,
    z_area: Area,
    time: u64,
    context: Context,
    tracker: DevErrorTracker,
    zone_trackers: Vec<DevErrorTracker>,
    capacity_events: u64,
    life: Vec<LifeRecord>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    network: DevNetwork,
}

impl DevNetwork {
    /// Inception: free hidden neurons get random weights from `config.seed`;
    /// motor neurons start with zero weights and no firings.
    pub fn new(config: DnConfig) -> Result<Self> {
        config.validate()?;
        let y_dim = config.y_input_dim();
        let mut rng = rng_for(config.seed, Stream::Init, 0);
        let y_weights = (0..config.y_capacity)
            .map(|_| (0..y_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let z_dim = config.z_dim();
        let mut z_area = Area::new(vec![vec![0.0; config.y_capacity]; z_dim]);
        for n in &mut z_area.neurons {
            n.active = true;
        }
        z_area.spawn_boundary = z_dim;
        let zone_trackers = config
            .zones
            .iter()
            .map(|_| DevErrorTracker::without_log())
            .collect();
        Ok(Self {
            context: Context {
                x: vec![0.0; config.x_dim],
                y: vec![0.0; config.y_capacity],
                z: vec![0.0; z_dim],
            },
            y_area: Area::new(y_weights),
            z_area,
            time: 0,
            tracker: DevErrorTracker::with_log(),
            zone_trackers,
            capacity_events: 0,
            life: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &DnConfig {
        &self.config
    }

    pub fn y_area(&self) -> &Area {
        &self.y_area
    }

    pub fn z_area(&self) -> &Area {
        &self.z_area
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    pub fn tracker(&self) -> &DevErrorTracker {
        &self.tracker
    }

    pub fn zone_trackers(&self) -> &[DevErrorTracker] {
        &self.zone_trackers
    }

    pub fn capacity_events(&self) -> u64 {
        self.capacity_events
    }

    pub fn life(&self) -> &[LifeRecord] {
        &self.life
    }

    /// Set the motor part of the context, e.g. to place the network in a
    /// given state before the next step. Motor is an input area, so this
    /// leaves `Y` memory untouched.
    pub fn clamp_motor(&mut self, z: &[f64]) -> Result<()> {
        check_dim("clamp_motor", self.config.z_dim(), z.len())?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("clamp_motor"));
        }
        self.context.z.copy_from_slice(z);
        Ok(())
    }

    /// Assemble the hidden-area input from the sensory vector and the
    /// stored context.
    pub fn y_input(&self, x: &[f64], z_prev: &[f64]) -> Vec<f64> {
        let mut parts: Vec<&[f64]> = vec![x, z_prev];
        if self.config.lateral {
            parts.push(&self.context.y);
        }
        let scale = 1.0 / (parts.len() as f64).sqrt();
        let mut out = Vec::with_capacity(self.config.y_input_dim());
        for part in parts {
            let n = norm(part);
            if n > 0.0 {
                out.extend(part.iter().map(|v| v / n * scale));
            } else {
                out.extend(std::iter::repeat_n(0.0, part.len()));
            }
        }
        out
    }

    fn motor_pre_responses(&self, y: &[f64]) -> Vec<f64> {
        self.z_area.neurons.iter().map(|n| dot(&n.weight, y)).collect()
    }

    fn motor_output(&self, pre: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; pre.len()];
        let mut start = 0;
        for &len in &self.config.zones {
            if let Some(i) = argmax_positive(&pre[start..start + len]) {
                z[start + i] = 1.0;
            }
            start += len;
        }
        z
    }

    /// Read-only response to `x` in motor state `z_prev`: the best active
    /// hidden neurons fire (no spawning, no learning) and the motor output
    /// is decoded from them.
    pub fn predict(&self, x: &[f64], z_prev: &[f64]) -> Result<Vec<f64>> {
        check_dim("predict x", self.config.x_dim, x.len())?;
        check_dim("predict z", self.config.z_dim(), z_prev.len())?;
        let input = self.y_input(x, z_prev);
        let mut y = vec![0.0; self.config.y_capacity];
        if self.y_area.spawn_boundary > 0 {
            let pre = self.y_area.pre_responses(&input)?;
            for w in top_k_compete(&pre, self.config.top_k)? {
                y[w.index] = w.response;
            }
        }
        Ok(self.motor_output(&self.motor_pre_responses(&y)))
    }

    /// One time instant of the lifetime loop.
    pub fn step(&mut self, x: &[f64], motor: Motor<'_>) -> Result<StepOutcome> {
        let z_dim = self.config.z_dim();
        check_dim("dn_step x", self.config.x_dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dn_step x"));
        }
        let target = match motor {
            Motor::Free => None,
            Motor::Supervised(z) | Motor::Observed(z) => {
                check_dim("dn_step motor", z_dim, z.len())?;
                Some(z)
            }
        };
        if let Motor::Supervised(z) = motor {
            if z.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(
                    "supervised motor components must lie in [0, 1]".into(),
                ));
            }
        }

        // Y area
        let input = self.y_input(x, &self.context.z);
        if norm(&input) == 0.0 {
            return Err(Error::ZeroInput);
        }
        let pre = self.y_area.pre_responses(&input)?;
        let best = pre.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let threshold = self
            .config
            .schedule
            .threshold(self.time)
            .max(self.config.spawn_floor);
        let mut spawned = None;
        let mut capacity_event = false;
        let winners: Vec<Winner> = if pre.is_empty() || best < threshold {
            if self.y_area.has_free() {
                let idx = self.y_area.spawn_neuron(&input)?;
                spawned = Some(idx);
                vec![Winner {
                    index: idx,
                    rank: 1,
                    response: 1.0,
                }]
            } else {
                capacity_event = true;
                top_k_compete(&pre, self.config.top_k)?
            }
        } else {
            top_k_compete(&pre, self.config.top_k)?
        };
        if spawned.is_none() {
            for w in &winners {
                self.y_area.neurons[w.index].learn(&input, w.response)?;
            }
        }
        let mut y = vec![0.0; self.config.y_capacity];
        for w in &winners {
            y[w.index] = w.response;
        }

        // Z area
        let predicted_z = self.motor_output(&self.motor_pre_responses(&y));
        let z = match motor {
            Motor::Supervised(s) => s.to_vec(),
            _ => predicted_z.clone(),
        };
        for (neuron, &r) in self.z_area.neurons.iter_mut().zip(&z) {
            if r > 0.0 {
                neuron.learn(&y, r)?;
            }
        }

        let zones = self.config.zones.clone();
        let (learner_error, prediction_error) = match (motor, target) {
            (Motor::Supervised(_), Some(t)) => {
                (Some(0.0), Some(motor_error(&predicted_z, t, &zones)?.error))
            }
            (Motor::Observed(_), Some(t)) => {
                let e = motor_error(&z, t, &zones)?;
                for (tracker, &ze) in self.zone_trackers.iter_mut().zip(&e.per_zone) {
                    tracker.record(ze)?;
                }
                (Some(e.error), Some(e.error))
            }
            _ => (None, None),
        };
        if let (Motor::Supervised(_), Some(_)) = (motor, target) {
            for tracker in &mut self.zone_trackers {
                tracker.record(0.0)?;
            }
        }
        if let Some(e) = learner_error {
            self.tracker.record(e)?;
        }
        if capacity_event {
            self.capacity_events += 1;
        }

        self.context = Context {
            x: x.to_vec(),
            y: y.clone(),
            z: z.clone(),
        };
        self.time += 1;
        self.life.push(LifeRecord {
            t: self.time,
            error: learner_error,
            mean_error: self.tracker.mean(),
            spawned_count: self.y_area.spawn_boundary,
            capacity_event,
            prediction_error,
        });

        Ok(StepOutcome {
            y,
            z,
            predicted_z,
            spawned,
            capacity_event,
            learner_error,
            prediction_error,
        })
    }

    /// Lifetime log as CSV:
    /// `t,e_t,ebar_t,spawned_count,capacity_event,prediction_err`.
    pub fn lifetime_csv(&self) -> String {
        let mut out = String::from("t,e_t,ebar_t,spawned_count,capacity_event,prediction_err\n");
        for r in &self.life {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.t,
                r.error.map(|e| e.to_string()).unwrap_or_default(),
                r.mean_error,
                r.spawned_count,
                u8::from(r.capacity_event),
                r.prediction_error.map(|e| e.to_string()).unwrap_or_default(),
            ));
        }
        out
    }

    /// Versioned JSON snapshot; floats round-trip exactly.
    pub fn to_snapshot(&self) -> String {
        serde_json::to_string(&Snapshot {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            network: self.clone(),
        })
        .expect("network serializes")
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let snap: Snapshot =
            serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))?;
        if snap.format != SNAPSHOT_FORMAT {
            return Err(Error::Snapshot(format!("unknown format `{}`", snap.format)));
        }
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported version {}",
                snap.version
            )));
        }
        snap.network.config.validate()?;
        Ok(snap.network)
    }
}

/// Cosine of a hidden neuron against an assembled context; exposed for
/// diagnostics.
pub fn context_match(neuron: &NeuronState, input: &[f64]) -> Result<f64> {
    cosine(&neuron.weight, input)
}
