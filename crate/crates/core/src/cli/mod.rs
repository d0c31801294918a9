//! The `pbcdiff` command line: data generation, training, sampling,
//! evaluation, RDF export and verification.

pub mod checks;
pub mod config;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conformation::{Condition, Conformation};
use crate::diffusion::{sample_with_trace, train, SampleRequest};
use crate::error::{Error, Result};
use crate::io::{
    augment, emit_lammps_script, load_conformation, load_dataset, loss_history_csv, parse_lammps_dump, rdf_csv,
    save_conformation, save_dataset, thermo_csv, write_atomic, write_table_file, Checkpoint, Split,
};
use crate::md::{run_anneal, OVERLAP_DISTANCE};
use crate::potential::{tabulate, OppParams};
use crate::rdf::{compute_rdf, rdf_mse, RdfVector};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Rough cost of one MD particle-step, for planning messages.
const SECONDS_PER_PARTICLE_STEP: f64 = 6e-6;

#[derive(Debug, Parser)]
#[command(name = "pbcdiff", version, about = "Periodic-boundary diffusion models for particle self-assembly")]
pub struct Cli {
    /// TOML configuration file layered over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration value, e.g. `--set training.epochs=50`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads for independent items (sweep points, samples).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Unconditional,
    Conditional,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the MD sweep and write a dataset with a train/test split.
    GenData {
        #[arg(long)]
        out: PathBuf,
        /// Write one LAMMPS script and pair table per grid point instead of simulating.
        #[arg(long)]
        emit_lammps: bool,
        /// Print the planned grid and estimated cost, then exit.
        #[arg(long)]
        plan: bool,
    },
    /// Train a denoiser on a dataset and write a checkpoint and loss CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Unconditional)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Record to train on in unconditional mode; drawn from the training seed otherwise.
        #[arg(long)]
        index: Option<usize>,
        /// Add the 48 cubic images of every record in conditional mode.
        #[arg(long)]
        augment: bool,
    },
    /// Draw conformations from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, requires_all = ["phi", "temperature"])]
        k: Option<f64>,
        #[arg(long, requires_all = ["k", "temperature"])]
        phi: Option<f64>,
        #[arg(long, requires_all = ["k", "phi"])]
        temperature: Option<f64>,
        /// Also write intermediate states at the configured trace steps.
        #[arg(long)]
        trace: bool,
    },
    /// RDF-MSE of generated sets against references, by condition and split.
    Eval {
        /// Reference dataset directory.
        #[arg(long)]
        reference: PathBuf,
        /// Conditionally generated dataset, matched to references by condition.
        #[arg(long)]
        generated: Option<PathBuf>,
        /// Unconditionally generated dataset, compared with one reference record.
        #[arg(long)]
        unconditional: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        reference_index: usize,
        /// Per-condition CSV report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the RDF of a conformation (native or LAMMPS dump) as CSV.
    Rdf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write an SVG line plot.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Frame of a multi-frame dump; defaults to the last.
        #[arg(long)]
        frame: Option<usize>,
    },
    /// Run fixed-seed verification suites; prints a JSON summary.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    PrintConfig,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => EXIT_USAGE,
        Error::Io(_) | Error::Parse { .. } | Error::Version { .. } | Error::Serialization(_) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    if cli.jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::GenData { out, emit_lammps, plan } => gen_data(&cfg, out, *emit_lammps, *plan, cli.jobs),
        Command::Train {
            data,
            mode,
            out,
            index,
            augment,
        } => {
            cfg.denoiser.conditional = *mode == Mode::Conditional;
            train_cmd(&cfg, data, out, *index, *augment)
        }
        Command::Sample {
            checkpoint,
            out,
            count,
            seed,
            k,
            phi,
            temperature,
            trace,
        } => {
            if let Some(c) = count {
                cfg.sampling.count = *c;
            }
            if let Some(s) = seed {
                cfg.sampling.seed = *s;
            }
            let condition = match (k, phi, temperature) {
                (Some(k), Some(phi), Some(t)) => Some(Condition::new(*k, *phi, *t)),
                _ => None,
            };
            sample_cmd(&cfg, checkpoint, out, condition, *trace, cli.jobs)
        }
        Command::Eval {
            reference,
            generated,
            unconditional,
            reference_index,
            out,
        } => eval_cmd(
            &cfg,
            reference,
            generated.as_deref(),
            unconditional.as_deref(),
            *reference_index,
            out.as_deref(),
        ),
        Command::Rdf {
            input,
            out,
            plot,
            frame,
        } => rdf_cmd(&cfg, input, out, plot.as_deref(), *frame),
        Command::Verify { suite, json } => verify_cmd(suite, json.as_deref()),
        Command::PrintConfig => {
            print!("{}", cfg.to_toml());
            Ok(EXIT_OK)
        }
    }
}

/// splitmix64 of `base` and `index`: independent per-item seeds that do not
/// depend on scheduling.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `f(0..n)` on up to `jobs` threads; results come back in index order.
pub fn par_map<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if jobs <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.min(n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                slots.lock().expect("worker panicked")[i] = Some(v);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|v| v.expect("every index visited"))
        .collect()
}

fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("config.toml"), cfg.to_toml().as_bytes())
}

fn config_beside(file: &Path, cfg: &RunConfig) -> Result<()> {
    let mut name = file.as_os_str().to_owned();
    name.push(".config.toml");
    write_atomic(Path::new(&name), cfg.to_toml().as_bytes())
}

/// Training grid followed by `n_test` random test conditions.
pub fn plan_conditions(cfg: &RunConfig) -> Vec<(Condition, Split)> {
    let s = &cfg.sweep;
    let mut out = Vec::new();
    for k in config::SweepConfig::axis(s.k, s.points[0]) {
        for phi in config::SweepConfig::axis(s.phi, s.points[1]) {
            for t in config::SweepConfig::axis(s.temperature, s.points[2]) {
                out.push((Condition::new(k, phi, t), Split::Train));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, u64::MAX));
    let mut draw = |r: [f64; 2]| r[0] + (r[1] - r[0]) * rng.gen::<f64>();
    for _ in 0..s.n_test {
        out.push((Condition::new(draw(s.k), draw(s.phi), draw(s.temperature)), Split::Test));
    }
    out
}

#[derive(Serialize)]
struct Skipped {
    index: usize,
    condition: Condition,
    reason: String,
}

fn gen_data(cfg: &RunConfig, out: &Path, emit_lammps: bool, plan: bool, jobs: usize) -> Result<i32> {
    let conditions = plan_conditions(cfg);
    let steps = (cfg.md.anneal_steps + cfg.md.equil_steps) as f64;
    let estimate = conditions.len() as f64 * steps * cfg.md.n_particles as f64 * SECONDS_PER_PARTICLE_STEP;
    eprintln!(
        "{} conditions ({} grid, {} test), N = {}, about {:.0} s of MD on one core",
        conditions.len(),
        cfg.sweep.grid_size(),
        cfg.sweep.n_test,
        cfg.md.n_particles,
        estimate
    );
    if estimate > 1800.0 && !emit_lammps {
        eprintln!(
            "warning: this sweep is far beyond desk scale; expect roughly {:.1} h with --jobs {jobs}",
            estimate / 3600.0 / jobs as f64
        );
    }
    if plan {
        for (i, (c, split)) in conditions.iter().enumerate() {
            println!("{i}\t{:?}\tk={}\tphi={}\tT={}", split, c.k, c.phi, c.temperature);
        }
        return Ok(EXIT_OK);
    }
    write_config(out, cfg)?;

    if emit_lammps {
        let dir = out.join("lammps");
        fs::create_dir_all(&dir)?;
        for (i, (c, _)) in conditions.iter().enumerate() {
            let params = OppParams::new(c.k, c.phi).map_err(|e| Error::Usage(e.to_string()))?;
            let table = tabulate(&params, OVERLAP_DISTANCE, cfg.md.cutoff, 1000)?;
            let table_name = format!("point_{i:05}.table");
            write_atomic(&dir.join(&table_name), write_table_file(&table, "CUSTOM")?.as_bytes())?;
            let script = emit_lammps_script(
                &params,
                c.temperature,
                cfg.md.anneal_steps,
                cfg.md.equil_steps.max(1),
                &format!("point_{i:05}.dump"),
                &table_name,
            );
            write_atomic(&dir.join(format!("point_{i:05}.in")), script.as_bytes())?;
        }
        eprintln!("wrote {} LAMMPS inputs to {}", conditions.len(), dir.display());
        return Ok(EXIT_OK);
    }

    let thermo_dir = out.join("thermo");
    fs::create_dir_all(&thermo_dir)?;
    let results = par_map(conditions.len(), jobs, |i| {
        let (c, split) = conditions[i];
        let mut md = cfg.md.clone();
        md.target_temperature = c.temperature;
        let seed = derive_seed(cfg.sweep.seed, i as u64);
        let run = OppParams::new(c.k, c.phi).and_then(|p| run_anneal(&md, &p, seed));
        match run {
            Ok(mut r) => {
                r.conformation.condition = Some(c);
                let _ = write_atomic(&thermo_dir.join(format!("point_{i:05}.csv")), thermo_csv(&r.log).as_bytes());
                eprintln!("point {i}: done (k={}, phi={}, T={})", c.k, c.phi, c.temperature);
                Ok((r.conformation, split, 0))
            }
            Err(e) => {
                eprintln!("point {i}: skipped: {e}");
                Err(Skipped {
                    index: i,
                    condition: c,
                    reason: e.to_string(),
                })
            }
        }
    });
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(item) => items.push(item),
            Err(s) => skipped.push(s),
        }
    }
    save_dataset(out, &items)?;
    write_atomic(&out.join("skipped.json"), serde_json::to_string_pretty(&skipped)?.as_bytes())?;
    eprintln!("wrote {} conformations, skipped {}", items.len(), skipped.len());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TrainingSet {
    data: PathBuf,
    records: Vec<PathBuf>,
    augmented: bool,
}

fn train_cmd(cfg: &RunConfig, data: &Path, out: &Path, index: Option<usize>, with_augment: bool) -> Result<i32> {
    let records = load_dataset(data, Some(Split::Train))?;
    if records.is_empty() {
        return Err(Error::Usage(format!("{} has no training records", data.display())));
    }
    let (chosen, dataset) = if cfg.denoiser.conditional {
        if let Some((r, _)) = records.iter().find(|(_, c)| c.condition.is_none()) {
            return Err(Error::Usage(format!(
                "conditional training needs conditions; {} has none",
                r.path.display()
            )));
        }
        let mut set = Vec::new();
        for (_, c) in &records {
            if with_augment {
                set.extend(augment(c)?);
            } else {
                set.push(c.clone());
            }
        }
        (records.iter().map(|(r, _)| r.path.clone()).collect(), set)
    } else {
        let i = match index {
            Some(i) if i < records.len() => i,
            Some(i) => {
                return Err(Error::Usage(format!(
                    "--index {i} out of range ({} training records)",
                    records.len()
                )))
            }
            None => ChaCha8Rng::seed_from_u64(cfg.training.seed).gen_range(0..records.len()),
        };
        eprintln!("training on {}", records[i].0.path.display());
        (vec![records[i].0.path.clone()], augment(&records[i].1)?)
    };
    let n = dataset[0].len();
    let bbox = *dataset[0].bbox();
    if dataset.iter().any(|c| c.len() != n || c.bbox() != &bbox) {
        return Err(Error::InvalidInput("training records differ in particle count or box".into()));
    }
    write_config(out, cfg)?;
    write_atomic(
        &out.join("training_set.json"),
        serde_json::to_string_pretty(&TrainingSet {
            data: data.to_path_buf(),
            records: chosen,
            augmented: with_augment || !cfg.denoiser.conditional,
        })?
        .as_bytes(),
    )?;
    let schedule = cfg.schedule()?;
    let epochs = cfg.training.epochs;
    let mut history = Vec::new();
    let result = train(&dataset, &cfg.training, &cfg.denoiser, &schedule, &cfg.ranges, |r| {
        history.push(r.mean_loss);
        if r.epoch % 10 == 0 || r.epoch + 1 == epochs {
            eprintln!("epoch {:>5}  loss {:.5}  lr {:.2e}", r.epoch, r.mean_loss, r.learning_rate);
        }
    });
    match result {
        Ok(trained) => {
            let ckpt = Checkpoint::new(
                &trained.params,
                &schedule,
                &cfg.ranges,
                &cfg.training,
                &trained.loss_history,
                n,
                &bbox,
            );
            ckpt.save(&out.join("checkpoint.json"))?;
            write_atomic(&out.join("loss.csv"), loss_history_csv(&trained.loss_history).as_bytes())?;
            Ok(EXIT_OK)
        }
        Err(Error::Divergence {
            epoch,
            detail,
            last_params,
        }) => {
            let params = crate::denoiser::DenoiserParams::from_values(cfg.denoiser.clone(), last_params)?;
            let mut ckpt = Checkpoint::new(&params, &schedule, &cfg.ranges, &cfg.training, &history, n, &bbox);
            ckpt.diverged = true;
            let path = out.join("diverged_checkpoint.json");
            ckpt.save(&path)?;
            write_atomic(&out.join("loss.csv"), loss_history_csv(&history).as_bytes())?;
            eprintln!("training diverged at epoch {epoch}: {detail}; wrote {}", path.display());
            Ok(EXIT_FAILURE)
        }
        Err(e) => Err(e),
    }
}

/// Trace steps for a `t_max`-step schedule from steps given for 500.
pub fn scaled_trace_steps(steps: &[usize], t_max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = steps
        .iter()
        .map(|&s| ((s as f64 * t_max as f64 / 500.0).round() as usize).min(t_max))
        .collect();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v.dedup();
    v
}

fn sample_cmd(
    cfg: &RunConfig,
    checkpoint: &Path,
    out: &Path,
    condition: Option<Condition>,
    trace: bool,
    jobs: usize,
) -> Result<i32> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let params = ckpt.params::<f32>()?;
    let schedule = ckpt.schedule()?;
    let bbox = ckpt.bbox()?;
    if params.config.conditional != condition.is_some() {
        return Err(Error::Usage(if condition.is_some() {
            "checkpoint is unconditional; drop --k/--phi/--temperature".into()
        } else {
            "checkpoint is conditional; pass --k, --phi and --temperature".into()
        }));
    }
    let count = cfg.sampling.count;
    let trace_steps = scaled_trace_steps(&cfg.sampling.trace_steps, schedule.t_max());
    let trace_dir = out.join("trace");
    if trace {
        fs::create_dir_all(&trace_dir)?;
    }
    write_config(out, cfg)?;
    let results = par_map(count, jobs, |i| -> Result<Conformation> {
        let request = SampleRequest {
            n_particles: ckpt.n_particles,
            bbox,
            condition,
            ranges: ckpt.ranges,
            seed: derive_seed(cfg.sampling.seed, i as u64),
        };
        let mut snapshots = Vec::new();
        let conf = sample_with_trace(&request, &params, &schedule, |t, x| {
            if trace && trace_steps.contains(&t) {
                snapshots.push((t, x.to_vec()));
            }
        })?;
        for (t, x) in snapshots {
            let snap = Conformation::new(x, bbox, condition, conf.provenance)?;
            save_conformation(&trace_dir.join(format!("sample_{i:05}_t{t:04}.pbcd")), &snap)?;
        }
        Ok(conf)
    });
    let items = results
        .into_iter()
        .map(|r| r.map(|c| (c, Split::Test, 0)))
        .collect::<Result<Vec<_>>>()?;
    save_dataset(out, &items)?;
    eprintln!("wrote {count} samples to {}", out.display());
    Ok(EXIT_OK)
}

/// Mean RDF-MSE of one group of samples against one reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub column: String,
    pub condition: Option<Condition>,
    pub n_samples: usize,
    pub rdf_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// Conditions present on one side only.
    pub missing: Vec<String>,
}

pub const EVAL_COLUMNS: [&str; 3] = ["Unconditional", "Conditional (Train)", "Conditional (Test)"];

impl EvalReport {
    /// Mean over rows of `column` and the number of rows behind it.
    pub fn column_mean(&self, column: &str) -> Option<(f64, usize)> {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.column == column).map(|r| r.rdf_mse).collect();
        (!v.is_empty()).then(|| (v.iter().sum::<f64>() / v.len() as f64, v.len()))
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<10}", "");
        for c in EVAL_COLUMNS {
            s += &format!("{c:>22}");
        }
        s += &format!("\n{:<10}", "RDF-MSE");
        for c in EVAL_COLUMNS {
            let cell = self.column_mean(c).map_or("-".to_string(), |(m, _)| format!("{m:.4}"));
            s += &format!("{cell:>22}");
        }
        s += &format!("\n{:<10}", "pairs");
        for c in EVAL_COLUMNS {
            s += &format!("{:>22}", self.column_mean(c).map_or(0, |(_, n)| n));
        }
        s.push('\n');
        for m in &self.missing {
            s += &format!("missing: {m}\n");
        }
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("column,k,phi,temperature,n_samples,rdf_mse\n");
        for r in &self.rows {
            let (k, phi, t) = r
                .condition
                .map_or((String::new(), String::new(), String::new()), |c| {
                    (c.k.to_string(), c.phi.to_string(), c.temperature.to_string())
                });
            s += &format!("{},{k},{phi},{t},{},{}\n", r.column, r.n_samples, r.rdf_mse);
        }
        s
    }
}

fn mean_mse(samples: &[&RdfVector], reference: &RdfVector) -> Result<f64> {
    let mut total = 0.0;
    for g in samples {
        total += rdf_mse(g, reference)?;
    }
    Ok(total / samples.len() as f64)
}

/// Builds the evaluation report. Conditional samples are matched to
/// reference records with the same condition; the reference's split picks
/// the column.
pub fn evaluate(
    reference: &[(Split, Conformation)],
    generated: &[Conformation],
    unconditional: &[Conformation],
    reference_index: usize,
    bins: usize,
) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    if !unconditional.is_empty() {
        let (_, target) = reference
            .get(reference_index)
            .ok_or_else(|| Error::Usage(format!("reference index {reference_index} out of range")))?;
        let g_ref = compute_rdf(target, bins)?;
        let gs = unconditional.iter().map(|c| compute_rdf(c, bins)).collect::<Result<Vec<_>>>()?;
        report.rows.push(EvalRow {
            column: EVAL_COLUMNS[0].into(),
            condition: target.condition,
            n_samples: gs.len(),
            rdf_mse: mean_mse(&gs.iter().collect::<Vec<_>>(), &g_ref)?,
        });
    }
    if generated.is_empty() {
        return Ok(report);
    }
    let gen_rdfs = generated.iter().map(|c| compute_rdf(c, bins)).collect::<Result<Vec<_>>>()?;
    let mut used = vec![false; generated.len()];
    for (split, r) in reference {
        let Some(cond) = r.condition else { continue };
        let matched: Vec<&RdfVector> = generated
            .iter()
            .zip(&gen_rdfs)
            .enumerate()
            .filter(|(_, (g, _))| g.condition.is_some_and(|c| c.approx_eq(&cond)))
            .map(|(i, (_, rdf))| {
                used[i] = true;
                rdf
            })
            .collect();
        if matched.is_empty() {
            report.missing.push(format!(
                "no samples for reference k={} phi={} T={}",
                cond.k, cond.phi, cond.temperature
            ));
            continue;
        }
        let column = match split {
            Split::Train => EVAL_COLUMNS[1],
            Split::Test => EVAL_COLUMNS[2],
        };
        report.rows.push(EvalRow {
            column: column.into(),
            condition: Some(cond),
            n_samples: matched.len(),
            rdf_mse: mean_mse(&matched, &compute_rdf(r, bins)?)?,
        });
    }
    for (g, _) in generated.iter().zip(&used).filter(|(_, u)| !**u) {
        report.missing.push(match g.condition {
            Some(c) => format!("no reference for sample k={} phi={} T={}", c.k, c.phi, c.temperature),
            None => "generated sample without a condition".into(),
        });
    }
    Ok(report)
}

fn eval_cmd(
    cfg: &RunConfig,
    reference: &Path,
    generated: Option<&Path>,
    unconditional: Option<&Path>,
    reference_index: usize,
    out: Option<&Path>,
) -> Result<i32> {
    if generated.is_none() && unconditional.is_none() {
        return Err(Error::Usage("pass --generated and/or --unconditional".into()));
    }
    let refs: Vec<(Split, Conformation)> = load_dataset(reference, None)?
        .into_iter()
        .map(|(r, c)| (r.split, c))
        .collect();
    let load = |p: Option<&Path>| -> Result<Vec<Conformation>> {
        match p {
            Some(p) => Ok(load_dataset(p, None)?.into_iter().map(|(_, c)| c).collect()),
            None => Ok(Vec::new()),
        }
    };
    let report = evaluate(&refs, &load(generated)?, &load(unconditional)?, reference_index, cfg.rdf.bins)?;
    print!("{}", report.table());
    if let Some(path) = out {
        write_atomic(path, report.csv().as_bytes())?;
        config_beside(path, cfg)?;
    }
    Ok(if report.rows.is_empty() { EXIT_FAILURE } else { EXIT_OK })
}

fn load_any(path: &Path, frame: Option<usize>) -> Result<Conformation> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(crate::io::NATIVE_MAGIC) {
        return load_conformation(path);
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::InvalidInput(format!("{} is not text", path.display())))?;
    let mut frames = parse_lammps_dump(&text)?;
    let i = frame.unwrap_or(frames.len().saturating_sub(1));
    if i >= frames.len() {
        return Err(Error::Usage(format!("frame {i} out of range ({} frames)", frames.len())));
    }
    Ok(frames.swap_remove(i))
}

fn rdf_cmd(cfg: &RunConfig, input: &Path, out: &Path, plot: Option<&Path>, frame: Option<usize>) -> Result<i32> {
    let conf = load_any(input, frame)?;
    let g = compute_rdf(&conf, cfg.rdf.bins)?;
    write_atomic(out, rdf_csv(&g).as_bytes())?;
    config_beside(out, cfg)?;
    if let Some(p) = plot {
        let label = input.file_name().map_or("g(r)".into(), |n| n.to_string_lossy().into_owned());
        write_atomic(p, plot::rdf_svg(&[(&label, &g)]).as_bytes())?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    suite: &'a str,
    passed: bool,
    n_checks: usize,
    n_failed: usize,
    checks: &'a [checks::CheckResult],
}

fn verify_cmd(suite: &str, json: Option<&Path>) -> Result<i32> {
    let results = checks::run_suite(suite)?;
    for r in &results {
        eprintln!(
            "[{}] {}/{}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite,
            r.name,
            r.detail
        );
    }
    let n_failed = results.iter().filter(|r| !r.passed).count();
    let summary = VerifySummary {
        suite,
        passed: n_failed == 0,
        n_checks: results.len(),
        n_failed,
        checks: &results,
    };
    let text = serde_json::to_string_pretty(&summary)?;
    println!("{text}");
    if let Some(p) = json {
        write_atomic(p, text.as_bytes())?;
    }
    Ok(if n_failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn par_map_keeps_order() {
        let v = par_map(50, 4, |i| i * i);
        assert_eq!(v, (0..50).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(par_map(3, 1, |i| i), vec![0, 1, 2]);
    }

    #[test]
    fn trace_steps_scale() {
        assert_eq!(scaled_trace_steps(&[500, 490, 100, 10, 0], 500), vec![500, 490, 100, 10, 0]);
        assert_eq!(scaled_trace_steps(&[500, 490, 100, 10, 0], 50), vec![50, 49, 10, 1, 0]);
        assert_eq!(scaled_trace_steps(&[500, 499], 10), vec![10]);
    }

    #[test]
    fn plan_has_grid_then_tests() {
        let mut cfg = RunConfig::default();
        cfg.sweep.n_test = 3;
        let plan = plan_conditions(&cfg);
        assert_eq!(plan.len(), 11);
        assert!(plan[..8].iter().all(|(_, s)| *s == Split::Train));
        for (c, s) in &plan[8..] {
            assert_eq!(*s, Split::Test);
            assert!((1.0..=15.0).contains(&c.k) && (0.0..=6.0).contains(&c.phi));
            assert!((0.01..=0.05).contains(&c.temperature));
        }
        assert_eq!(plan, plan_conditions(&cfg));
    }

    #[test]
    fn full_scale_sweep_is_planned() {
        let cfg = RunConfig::load(None, &["sweep.points=[10, 10, 10]".into()]).unwrap();
        assert_eq!(plan_conditions(&cfg).len(), 1000);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Usage("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), EXIT_FAILURE);
        assert_eq!(main_with_args(["pbcdiff", "no-such-command"]), EXIT_USAGE);
        assert_eq!(main_with_args(["pbcdiff", "--set", "bogus.key=1", "print-config"]), EXIT_USAGE);
        assert_eq!(main_with_args(["pbcdiff", "verify", "--suite", "nope"]), EXIT_USAGE);
    }
}
