//! The subcommands. Each writes its artifacts into an output directory and
//! returns the paths it wrote; nothing depends on wall-clock time unless
//! the config asks for it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use devlab::automata::{
    parse_machine, run_tm_via_dn, teach_fa, teach_tm, verify_fa_equivalence, MachineSpec,
    TeachOrder, TuringMachine,
};
use devlab::backprop::{layer_sizes, train, Mlp};
use devlab::data::{generate_dataset, Dataset, GeneratorSpec};
use devlab::dn::{DevNetwork, DnConfig};
use devlab::postselect::{
    derived_seeds, k_fold_cross_validate, luckiest_generalization_audit, run_grid,
    summarize_distribution, ArchParams, AuditSpec, Cell, CellStatus, ErrorTable, GridOptions,
    HyperGrid, Partition, Trainer,
};
use devlab::trainers::{BackpropTrainer, DnClassifier, DnTrainer, NnThresholdTrainer};
use devlab::FiniteAgentAutomaton;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, TrainerKind};
use crate::report;

/// Where a command writes, and the master seed it uses.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    /// Directory relative paths in the config are resolved against.
    pub base_dir: PathBuf,
    pub seed: u64,
}

impl RunContext {
    pub fn new(out: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            out: out.into(),
            base_dir: PathBuf::from("."),
            seed,
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn load_fa(path: &Path) -> Result<FiniteAgentAutomaton> {
    match load_machine(path)? {
        MachineSpec::Fa(fa) => Ok(fa),
        MachineSpec::Tm(_) => bail!("{} describes a Turing machine, not an FA", path.display()),
    }
}

fn load_tm(path: &Path) -> Result<TuringMachine> {
    match load_machine(path)? {
        MachineSpec::Tm(tm) => Ok(tm),
        MachineSpec::Fa(_) => bail!("{} describes an FA, not a Turing machine", path.display()),
    }
}

fn load_machine(path: &Path) -> Result<MachineSpec> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_machine(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

pub fn dataset(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Dataset> {
    let machine = match &cfg.dataset {
        GeneratorSpec::FaCorpus { machine, .. } => Some(load_fa(&ctx.resolve(machine))?),
        _ => None,
    };
    generate_dataset(&cfg.dataset, ctx.seed, machine.as_ref())
        .map_err(|e| anyhow!("config field `dataset`: {e}"))
}

fn header(title: &str, cfg: &ExperimentConfig, ctx: &RunContext) -> String {
    format!(
        "devlab {title}\ntask: {}\ntrainer: {}\nmaster seed: {}\n\n{}\n{}\n",
        cfg.task,
        cfg.trainer.kind.name(),
        ctx.seed,
        report::conditions_block(&cfg.conditions),
        report::methods_block(),
    )
}

/// `gen-data`: the dataset as CSV plus its generator metadata.
pub fn gen_data(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let d = dataset(cfg, ctx)?;
    let meta = format!(
        "generator = {:?}\nseed = {}\nsamples = {}\nclasses = {}\nlabel_counts = {:?}\n\n[spec]\n{}",
        cfg.dataset.name(),
        ctx.seed,
        d.len(),
        d.n_classes,
        d.label_counts(),
        toml::to_string(&cfg.dataset)?,
    );
    Ok(vec![
        ctx.write("dataset.csv", &d.to_csv())?,
        ctx.write("dataset.meta.toml", &meta)?,
    ])
}

/// Outcome of `audit`, for callers that want more than the files.
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub files: Vec<PathBuf>,
    pub report: String,
    pub table: ErrorTable,
    pub audit: Option<devlab::postselect::AuditReport>,
}

fn audit_with<T: Trainer>(
    trainer: &T,
    cfg: &ExperimentConfig,
    ctx: &RunContext,
) -> Result<AuditOutcome> {
    let data = dataset(cfg, ctx)?;
    let mut partition = Partition::split(data.len(), cfg.fractions(), ctx.seed)
        .map_err(|e| anyhow!("config field `partition.fractions`: {e}"))?;
    if cfg.partition.force_validation_overlap {
        partition.validation = partition.train.clone();
    } else {
        partition.check_sound()?;
    }
    let warnings = partition.overlap_warnings();
    let grid = HyperGrid::new(cfg.architectures(), derived_seeds(ctx.seed, cfg.grid.seeds))?;
    let options = GridOptions {
        record_wall_time: cfg.grid.record_wall_time,
    };
    let table = run_grid(trainer, &grid, &data, &partition, options)?;
    table.check_complete()?;

    let mut text = header("audit report", cfg, ctx);
    text.insert_str(0, &report::banner(&warnings));
    let _ = writeln!(
        text,
        "== Partition ==\n|D| = {}  |T| = {}  |V| = {}  |T'| = {}  |T''| = {}\n",
        data.len(),
        partition.train.len(),
        partition.validation.len(),
        partition.test.len(),
        partition.audit.len()
    );
    text.push_str(&report::table_section(&table));

    let mut files = vec![
        ctx.write("error_table.csv", &table.to_csv())?,
        ctx.write(
            "summary.csv",
            &report::summary_csv(&report::table_summaries(&table)),
        )?,
    ];

    let audit = if cfg.audit.repeats > 0 {
        let spec = AuditSpec {
            architectures: grid.architectures.clone(),
            n_seeds: cfg.grid.seeds,
            fractions: cfg.fractions(),
            repeats: cfg.audit.repeats,
            master_seed: ctx.seed,
        };
        let r = luckiest_generalization_audit(trainer, &data, &spec)
            .map_err(|e| anyhow!("audit: {e}"))?;
        text.push('\n');
        text.push_str(&report::audit_section(&r));
        files.push(ctx.write("audit_repeats.csv", &report::audit_csv(&r))?);
        Some(r)
    } else {
        None
    };
    files.push(ctx.write("config.toml", &cfg.canonical())?);
    files.push(ctx.write("report.txt", &text)?);
    Ok(AuditOutcome {
        files,
        report: text,
        table,
        audit,
    })
}

/// `audit`: partition, grid, every selector, summaries and the
/// luckiest-network audit.
pub fn audit(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<AuditOutcome> {
    match cfg.trainer.kind {
        TrainerKind::Backprop => audit_with(&BackpropTrainer::default(), cfg, ctx),
        TrainerKind::NnThreshold => audit_with(&NnThresholdTrainer, cfg, ctx),
        TrainerKind::Dn => audit_with(&DnTrainer, cfg, ctx),
    }
}

fn crossval_with<T: Trainer>(
    trainer: &T,
    cfg: &ExperimentConfig,
    ctx: &RunContext,
) -> Result<Vec<PathBuf>> {
    let data = dataset(cfg, ctx)?;
    let arch = cfg.architectures().into_iter().next().unwrap_or_default();
    let cv = k_fold_cross_validate(&data, cfg.crossval.folds, trainer, &arch, ctx.seed)
        .map_err(|e| anyhow!("config field `crossval.folds`: {e}"))?;
    let mut csv = String::from("fold,size,error\n");
    for (i, (f, e)) in cv.folds.iter().zip(&cv.fold_errors).enumerate() {
        let _ = writeln!(csv, "{i},{},{e}", f.len());
    }
    let mut text = header("cross-validation report", cfg, ctx);
    let _ = writeln!(
        text,
        "== {}-fold cross-validation ==\narchitecture: {}\nmean error: {:.6}\n{}",
        cfg.crossval.folds,
        arch.canonical(),
        cv.mean_error,
        cv.summary
    );
    Ok(vec![
        ctx.write("crossval.csv", &csv)?,
        ctx.write("report.txt", &text)?,
    ])
}

pub fn crossval(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<PathBuf>> {
    match cfg.trainer.kind {
        TrainerKind::Backprop => crossval_with(&BackpropTrainer::default(), cfg, ctx),
        TrainerKind::NnThreshold => crossval_with(&NnThresholdTrainer, cfg, ctx),
        TrainerKind::Dn => crossval_with(&DnTrainer, cfg, ctx),
    }
}

/// Options shared by `teach-fa` and `run-tm`.
#[derive(Debug, Clone)]
pub struct TeachOptions {
    /// Hidden neurons; defaults to the number of transitions.
    pub capacity: Option<usize>,
    pub epochs: usize,
    /// Shuffle the teaching order with this seed instead of lexicographic.
    pub shuffle: Option<u64>,
}

impl Default for TeachOptions {
    fn default() -> Self {
        Self {
            capacity: None,
            epochs: 2,
            shuffle: None,
        }
    }
}

impl TeachOptions {
    fn order(&self) -> TeachOrder {
        self.shuffle
            .map_or(TeachOrder::Lexicographic, TeachOrder::Shuffled)
    }
}

pub const GUARANTEE_VOID: &str = "GUARANTEE-VOID";

#[derive(Debug, Clone)]
pub struct TeachOutcome {
    pub files: Vec<PathBuf>,
    pub report: String,
    pub mismatches: usize,
}

/// `teach-fa`: teach, verify, and write the lifetime log and equivalence
/// report.
pub fn teach_fa_cmd(machine: &Path, opts: &TeachOptions, ctx: &RunContext) -> Result<TeachOutcome> {
    let fa = load_fa(machine)?;
    let codec = fa.codec();
    let capacity = opts.capacity.unwrap_or(fa.transition_count());
    let mut net = DevNetwork::new(
        DnConfig::new(codec.x_dim(), codec.zone_sizes(), capacity).with_seed(ctx.seed),
    )?;
    let log = teach_fa(&mut net, &fa, &codec, opts.epochs, opts.order())?;
    let eq = verify_fa_equivalence(&net, &fa, &codec)?;

    let mut text = String::new();
    if log.capacity_warning {
        let _ = writeln!(
            text,
            "!!! WARNING: {GUARANTEE_VOID}: capacity {capacity} is below the {} transitions; the error-free guarantee does not apply",
            fa.transition_count()
        );
    }
    let _ = writeln!(
        text,
        "devlab teach-fa report\nmachine: {}\nstates: {}  alphabet: {}  transitions: {}\ncapacity: {capacity}  epochs: {}  order: {:?}  seed: {}\nspawned neurons: {}  capacity events: {}",
        machine.display(),
        fa.states().len(),
        fa.alphabet().len(),
        fa.transition_count(),
        opts.epochs,
        opts.order(),
        ctx.seed,
        net.y_area().spawn_boundary(),
        log.capacity_events,
    );
    for (e, err) in log.epoch_errors.iter().enumerate() {
        let _ = writeln!(text, "epoch {} developmental error: {err}", e + 1);
    }
    let _ = write!(text, "\n== Equivalence ==\n{eq}");
    let files = vec![
        ctx.write("lifetime.csv", &net.lifetime_csv())?,
        ctx.write("equivalence.txt", &eq.to_string())?,
        ctx.write("snapshot.json", &net.to_snapshot())?,
        ctx.write("report.txt", &text)?,
    ];
    Ok(TeachOutcome {
        files,
        report: text,
        mismatches: eq.mismatches.len(),
    })
}

#[derive(Debug, Clone)]
pub struct TmOutcome {
    pub files: Vec<PathBuf>,
    pub symbolic_tape: String,
    pub dn_tape: String,
    pub halted: bool,
    pub mismatch: bool,
}

/// `run-tm`: teach the machine's control to a DN, then run the tape both
/// symbolically and with the DN as controller.
pub fn run_tm_cmd(
    machine: &Path,
    tape: &str,
    budget: u64,
    opts: &TeachOptions,
    ctx: &RunContext,
) -> Result<TmOutcome> {
    let tm = load_tm(machine)?;
    let codec = tm.codec();
    let control = tm.control();
    let capacity = opts.capacity.unwrap_or(control.len());
    let mut net = DevNetwork::new(
        DnConfig::new(codec.x_dim(), codec.zone_sizes(), capacity).with_seed(ctx.seed),
    )?;
    let log = teach_tm(&mut net, &tm, &codec, opts.epochs, opts.order())?;
    let input = tm.parse_tape(tape)?;
    let reference = tm.run(&input, budget)?;
    let driven = run_tm_via_dn(&mut net, &tm, &codec, &input, budget)?;

    let mut trace = String::from("step,state,read,next,write,move,mismatch\n");
    for r in &driven.log {
        let (n, w, m) = match r.action {
            Some(a) => (
                tm.states()[a.next].clone(),
                tm.symbols()[a.write].clone(),
                a.movement.symbol().to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            trace,
            "{},{},{},{n},{w},{m},{}",
            r.step,
            tm.states()[r.state],
            tm.symbols()[r.read],
            u8::from(r.mismatch)
        );
    }
    let symbolic_tape = tm.render_tape(&reference.tape);
    let dn_tape = tm.render_tape(&driven.tape);
    let mut text = String::new();
    if log.capacity_warning {
        let _ = writeln!(
            text,
            "!!! WARNING: {GUARANTEE_VOID}: capacity {capacity} is below the {} control transitions",
            control.len()
        );
    }
    let _ = writeln!(
        text,
        "devlab run-tm report\nmachine: {}\ninput tape: {tape:?}  budget: {budget}\n\nsymbolic: tape {symbolic_tape:?} halted {} steps {}\ndn:       tape {dn_tape:?} halted {} steps {}\ntapes identical: {}",
        machine.display(),
        reference.halted,
        reference.steps,
        driven.halted,
        driven.steps,
        reference.tape == driven.tape,
    );
    if let Some(m) = driven.first_mismatch() {
        let _ = writeln!(
            text,
            "first controller mismatch at step {}: state {} reading {}",
            m.step,
            tm.states()[m.state],
            tm.symbols()[m.read]
        );
    }
    let files = vec![
        ctx.write("tm_trace.csv", &trace)?,
        ctx.write("report.txt", &text)?,
    ];
    Ok(TmOutcome {
        files,
        symbolic_tape,
        dn_tape,
        halted: driven.halted,
        mismatch: driven.first_mismatch().is_some(),
    })
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub files: Vec<PathBuf>,
    pub dn_curve: Vec<f64>,
    pub backprop_curve: Vec<f64>,
    /// `(arch, seed)` of the PSUVS-luckiest backprop network.
    pub luckiest: (usize, usize),
}

/// `compare`: per-epoch fitting error of one DN and of the PSUVS-luckiest
/// network of a backprop grid, on the same training set.
pub fn compare(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<CompareOutcome> {
    let section = cfg
        .compare
        .as_ref()
        .ok_or_else(|| anyhow!("config field `compare`: section required for compare"))?;
    if cfg.trainer.kind != TrainerKind::Backprop {
        bail!("config field `trainer.kind`: compare needs the backprop grid");
    }
    if section.epochs == 0 {
        bail!("config field `compare.epochs`: must be positive");
    }
    let data = dataset(cfg, ctx)?;
    let partition = Partition::split(data.len(), cfg.fractions(), ctx.seed)
        .map_err(|e| anyhow!("config field `partition.fractions`: {e}"))?;
    let train_set = data.subset(&partition.train);
    let val_set = data.subset(&partition.validation);

    // one DN, no grid
    let dn_arch = ArchParams(section.dn.clone());
    let mut net = DevNetwork::new(DnTrainer.config(&dn_arch, ctx.seed, &train_set)?)?;
    let mut dn_curve = Vec::with_capacity(section.epochs);
    for _ in 0..section.epochs {
        DnTrainer::teach_epoch(&mut net, &train_set)?;
        let model = DnClassifier {
            network: net.clone(),
        };
        dn_curve.push(model.error_rate(&train_set)?);
    }

    // backprop grid, every network trained for the same number of epochs
    let archs = cfg.architectures();
    let seeds = derived_seeds(ctx.seed, cfg.grid.seeds);
    let trainer = BackpropTrainer::default();
    let cells: Vec<(usize, usize, Vec<f64>, f64)> = (0..archs.len() * seeds.len())
        .into_par_iter()
        .map(|idx| {
            let (a, s) = (idx / seeds.len(), idx % seeds.len());
            let arch = archs[a].clone().with("epochs", section.epochs as f64);
            let run = trainer.config(&arch, seeds[s]).and_then(|c| {
                let mlp = Mlp::new(&layer_sizes(&train_set, &c.hidden), true, seeds[s])?;
                let r = train(mlp, &train_set, &c)?;
                let val = match r.failure {
                    Some(_) => 1.0,
                    None => r.mlp.error_rate(&val_set)?,
                };
                Ok((r.curve, val))
            });
            match run {
                Ok((curve, val)) => (a, s, curve, val),
                Err(_) => (a, s, vec![1.0; section.epochs], 1.0),
            }
        })
        .collect();
    let table = ErrorTable {
        architectures: archs.clone(),
        seeds: seeds.clone(),
        cells: cells
            .iter()
            .map(|(a, s, curve, val)| Cell {
                arch: *a,
                seed: *s,
                fit: *curve.last().unwrap(),
                val: *val,
                test: 0.0,
                audit: None,
                wall_time_s: None,
                status: CellStatus::Ok,
            })
            .collect(),
    };
    let best = devlab::postselect::psuvs_select(&table);
    let backprop_curve = cells[best.arch * seeds.len() + best.seed].2.clone();

    let mut csv = String::from("system,epoch,fit_error\n");
    for (e, v) in dn_curve.iter().enumerate() {
        let _ = writeln!(csv, "dn,{},{v}", e + 1);
    }
    for (e, v) in backprop_curve.iter().enumerate() {
        let _ = writeln!(csv, "backprop-psuvs,{},{v}", e + 1);
    }
    let mut text = header("compare report", cfg, ctx);
    let _ = writeln!(
        text,
        "== DN vs PSUVS-luckiest backprop ==\nDN: one network, {} hidden neurons spawned of {}\nbackprop: luckiest of {} networks by validation error (arch {} seed {}, val {:.4})\n\nepoch  dn_fit  backprop_fit",
        net.y_area().spawn_boundary(),
        net.y_area().capacity(),
        archs.len() * seeds.len(),
        best.arch,
        best.seed,
        best.error
    );
    for e in 0..section.epochs {
        let _ = writeln!(
            text,
            "{:>5}  {:.4}  {:.4}",
            e + 1,
            dn_curve[e],
            backprop_curve[e]
        );
    }
    let files = vec![
        ctx.write("compare.csv", &csv)?,
        ctx.write("report.txt", &text)?,
    ];
    Ok(CompareOutcome {
        files,
        dn_curve,
        backprop_curve,
        luckiest: (best.arch, best.seed),
    })
}

/// Read an error table written by `audit`.
pub fn read_error_table(path: &Path) -> Result<ErrorTable> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut cells = Vec::new();
    let mut archs: Vec<ArchParams> = Vec::new();
    let mut n_seeds = 0;
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            Ok(Some(s.parse()?))
        }
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("row {}", row + 2))?;
        if rec.len() != 9 {
            bail!("row {}: expected 9 columns, found {}", row + 2, rec.len());
        }
        let arch: usize = rec[0].parse()?;
        let seed: usize = rec[1].parse()?;
        if arch == archs.len() {
            archs.push(ArchParams::parse_canonical(&rec[2])?);
        }
        n_seeds = n_seeds.max(seed + 1);
        let status = match &rec[8] {
            "ok" => CellStatus::Ok,
            s => CellStatus::Failed(s.trim_start_matches("failed: ").to_string()),
        };
        cells.push(Cell {
            arch,
            seed,
            fit: rec[3].parse()?,
            val: rec[4].parse()?,
            test: rec[5].parse()?,
            audit: opt(&rec[6])?,
            wall_time_s: opt(&rec[7])?,
            status,
        });
    }
    let table = ErrorTable {
        architectures: archs,
        seeds: (0..n_seeds as u64).collect(),
        cells,
    };
    table
        .check_complete()
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(table)
}

/// `report`: re-render summaries and selections from a saved error table.
pub fn report_cmd(table_path: &Path, ctx: &RunContext) -> Result<(Vec<PathBuf>, String)> {
    let table = read_error_table(table_path)?;
    let mut text = format!(
        "devlab report\nsource: {}\n\n{}\n",
        table_path.display(),
        report::methods_block()
    );
    text.push_str(&report::table_section(&table));
    if table.cells.iter().all(|c| c.audit.is_some()) {
        let audit: Vec<f64> = table.cells.iter().filter_map(|c| c.audit).collect();
        let _ = writeln!(
            text,
            "\naudit errors (all networks): {}",
            summarize_distribution(&audit)?
        );
    }
    let files = vec![
        ctx.write(
            "summary.csv",
            &report::summary_csv(&report::table_summaries(&table)),
        )?,
        ctx.write("report.txt", &text)?,
    ];
    Ok((files, text))
}
