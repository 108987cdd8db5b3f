// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! `hhqec`: command-line driver for the heavy-hex QEC workbench.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hhqec::ann::{self, DatasetGenerator, Mlp, TrainConfig};
use hhqec::bench::{self, DecoderSpec, SweepConfig, SweepRow, Timer};
use hhqec::circuit::MemoryBasis;
use hhqec::code::build_code;
use hhqec::device::{self, InfluenceWeights, SyntheticRates};
use hhqec::mwpm::{build_detector_graph, Weighting};
use hhqec::noise::uniform_model;

#[derive(Parser)]
#[command(name = "hhqec", version, about = "Heavy-hex subsystem code simulation, decoding and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Mwpm,
    Ann,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Logprob,
    Unit,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Logprob => Weighting::LogProb,
            WeightingArg::Unit => Weighting::Unit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    Best,
    Median,
    Worst,
}

#[derive(Args)]
struct DecoderOpts {
    #[arg(long, value_enum, default_value = "mwpm")]
    decoder: DecoderArg,
    /// Network file; repeat as `D=PATH` in sweeps.
    #[arg(long)]
    model: Vec<String>,
    #[arg(long, value_enum, default_value = "logprob")]
    weighting: WeightingArg,
    /// Bernoulli resamples before declaring a logical failure.
    #[arg(long, default_value_t = 100)]
    max_resamples: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate training examples as JSON lines.
    GenData {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1e-3)]
        p: f64,
        #[arg(long)]
        count: u64,
        #[arg(long, default_value = "memx")]
        basis: MemoryBasis,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a network from a JSONL file or freshly simulated data.
    Train {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        p: f64,
        #[arg(long, default_value_t = 1_000_000)]
        count: u64,
        #[arg(long, default_value = "memx")]
        basis: MemoryBasis,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 256)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Logical error rate of a single point, printed as JSON.
    Eval {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value = "memx")]
        basis: MemoryBasis,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        dec: DecoderOpts,
        /// Device calibration; replaces uniform noise.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "best")]
        placement: PlacementArg,
        #[arg(long, default_value_t = 0.975)]
        quantile: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Threshold sweep over distances and physical error rates.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "3,5")]
        distances: Vec<usize>,
        /// `a:b:n` log-spaced, or a single value.
        #[arg(long, default_value = "2e-4:2e-3:8")]
        p: String,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value = "memx")]
        basis: MemoryBasis,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        dec: DecoderOpts,
        #[arg(long, default_value_t = 0.975)]
        quantile: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Rank every placement of a code on a calibrated device.
    SubgraphRank {
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        d: usize,
        /// w_1q,w_init,w_idle,w_readout,w_2q
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Decoder-based logical error rates of the best, median and worst placements.
    DeviceEval {
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value = "memx")]
        basis: MemoryBasis,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        dec: DecoderOpts,
        #[arg(long, default_value_t = 0.95)]
        quantile: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-derive heuristic weights by single-source simulation.
    InfluenceWeights {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 2e-3)]
        base_p: f64,
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic heavy-hex calibration file.
    MakeSyntheticDevice {
        #[arg(long, default_value_t = 127)]
        qubits: usize,
        #[arg(long, default_value_t = 1e-3)]
        p: f64,
        /// Multiplicative spread of per-entry rates around `p`.
        #[arg(long, default_value_t = 3.0)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Code, generators and schedule as JSON.
    DumpCode {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Matching graph as JSON.
    DumpGraph {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1e-3)]
        p: f64,
        #[arg(long, default_value = "memx")]
        basis: MemoryBasis,
        #[command(flatten)]
        dec: DecoderOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(clap::error::ErrorKind::MissingRequiredArgument, msg).exit()
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn load_model(path: &str) -> Result<(Mlp, usize, Value)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {path}"))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing model {path}"))?;
    let (m, d) = Mlp::from_json(&v)?;
    Ok((m, d, v.get("config").cloned().unwrap_or(Value::Null)))
}

/// `PATH` or `D=PATH` entries keyed by the distance stored in each file.
fn load_models(specs: &[String], basis: MemoryBasis) -> Result<BTreeMap<usize, Mlp>> {
    let mut out = BTreeMap::new();
    for spec in specs {
        let (want, path) = match spec.split_once('=') {
            Some((d, p)) => (Some(d.parse::<usize>().with_context(|| format!("bad model spec '{spec}'"))?), p),
            None => (None, spec.as_str()),
        };
        let (m, d, config) = load_model(path)?;
        if want.is_some_and(|w| w != d) {
            bail!("model {path} is for d={d}, not d={}", want.unwrap());
        }
        if let Some(b) = config.get("basis").and_then(Value::as_str) {
            if b != basis.to_string() {
                bail!("model {path} was trained for {b}, evaluation basis is {basis}");
            }
        }
        out.insert(d, m);
    }
    Ok(out)
}

fn decoder_models(dec: &DecoderOpts, basis: MemoryBasis) -> Result<BTreeMap<usize, Mlp>> {
    match dec.decoder {
        DecoderArg::Mwpm => Ok(BTreeMap::new()),
        DecoderArg::Ann => {
            if dec.model.is_empty() {
                usage_error("the ann decoder requires --model");
            }
            load_models(&dec.model, basis)
        }
    }
}

fn spec<'a>(dec: &DecoderOpts, models: &'a BTreeMap<usize, Mlp>) -> DecoderSpec<'a> {
    match dec.decoder {
        DecoderArg::Mwpm => DecoderSpec::Mwpm(dec.weighting.into()),
        DecoderArg::Ann => DecoderSpec::Ann { models, max_resamples: dec.max_resamples },
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { d, p, count, basis, seed, out } => {
            let code = build_code(d)?;
            let gen = DatasetGenerator::new(&code, &uniform_model(p)?, d, basis, seed)?;
            let n = match &out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
                    let n = ann::write_jsonl(&mut w, gen.stream(count))?;
                    w.flush()?;
                    n
                }
                None => ann::write_jsonl(&mut BufWriter::new(std::io::stdout().lock()), gen.stream(count))?,
            };
            eprintln!("wrote {n} examples");
        }
        Command::Train { d, data, p, count, basis, epochs, batch, lr, seed, out } => {
            let code = build_code(d)?;
            let sizes = ann::layer_sizes(d)?;
            let timer = Timer::start();
            let (dataset, source) = match &data {
                Some(path) => {
                    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                    (ann::read_jsonl(BufReader::new(f), sizes[0], sizes[3])?, json!({"file": path}))
                }
                None => {
                    let gen = DatasetGenerator::new(&code, &uniform_model(p)?, d, basis, bench::mix_seed(seed, 1))?;
                    (gen.packed(count), json!({"p": p, "count": count, "seed": bench::mix_seed(seed, 1)}))
                }
            };
            let cfg = TrainConfig { batch, epochs, learning_rate: lr, seed, ..TrainConfig::default() };
            let mut mlp = ann::init_mlp(d, bench::mix_seed(seed, 2))?;
            let report = ann::train(&mut mlp, &dataset, &cfg)?;
            let config = json!({
                "basis": basis,
                "train": cfg,
                "data": source,
                "examples": dataset.len(),
                "loss_trace": report.loss_trace,
                "steps": report.steps,
            });
            std::fs::write(&out, pretty(&mlp.to_json(d, config)))?;
            eprintln!("trained on {} examples in {:.1}s, final loss {:.6}", dataset.len(), timer.seconds(), report.loss_trace.last().unwrap());
        }
        Command::Eval { d, p, shots, basis, seed, dec, calibration, placement, quantile, out } => {
            let models = decoder_models(&dec, basis)?;
            let code = build_code(d)?;
            let row = match calibration {
                None => {
                    let Some(p) = p else { usage_error("eval needs --p or --calibration") };
                    bench::logical_error_rate(&code, &uniform_model(p)?, "uniform", p, basis, shots, seed, &spec(&dec, &models), quantile)?
                }
                Some(path) => {
                    let cal = device::load_calibration(&path)?;
                    let ranked = device::rank_placements(&cal, &code, &InfluenceWeights::TABLE)?;
                    if ranked.is_empty() {
                        bail!("{} admits no d={d} placement", cal.device_name);
                    }
                    let pick = match placement {
                        PlacementArg::Best => 0,
                        PlacementArg::Median => ranked.len() / 2,
                        PlacementArg::Worst => ranked.len() - 1,
                    };
                    let r = &ranked[pick];
                    let model = device::device_model(&cal, &code, &r.placement)?;
                    let tag = format!("{}#{}", cal.device_name, r.placement_id);
                    bench::logical_error_rate(&code, &model, &tag, r.means.physical(), basis, shots, seed, &spec(&dec, &models), quantile)?
                }
            };
            let v = serde_json::to_value(&row)?;
            write_out(out.as_deref(), &format!("{}\n", serde_json::to_string(&v)?))?;
        }
        Command::Sweep { distances, p, shots, basis, seed, dec, quantile, out, summary } => {
            let models = decoder_models(&dec, basis)?;
            let cfg = SweepConfig { distances, p_values: bench::parse_log_range(&p)?, shots, basis, seed, quantile };
            let timer = Timer::start();
            let rows: Vec<SweepRow> = bench::threshold_sweep(&cfg, &spec(&dec, &models))?;
            write_out(out.as_deref(), &bench::to_csv(&rows))?;
            if let Some(path) = summary {
                let extra = json!({"sweep": cfg, "decoder": spec(&dec, &models).name()});
                std::fs::write(path, pretty(&bench::summary_json(&rows, timer.seconds(), extra)))?;
            }
        }
        Command::SubgraphRank { calibration, d, weights, seed: _, out, summary } => {
            let cal = device::load_calibration(&calibration)?;
            let code = build_code(d)?;
            let w = match weights {
                None => InfluenceWeights::TABLE,
                Some(v) if v.len() == 5 => InfluenceWeights { w_1q: v[0], w_init: v[1], w_idle: v[2], w_readout: v[3], w_2q: v[4] },
                Some(_) => usage_error("--weights takes five comma-separated values"),
            };
            let ranked = device::rank_placements(&cal, &code, &w)?;
            write_out(out.as_deref(), &device::rank_csv(&ranked))?;
            if let Some(path) = summary {
                let scores: Vec<f64> = ranked.iter().map(|r| r.score).collect();
                let v = json!({
                    "device_name": cal.device_name,
                    "d": d,
                    "weights": w,
                    "placements": ranked.len(),
                    "scores": device::summarize(&scores),
                });
                std::fs::write(path, pretty(&v))?;
            }
        }
        Command::DeviceEval { calibration, d, shots, basis, seed, dec, quantile, out } => {
            let models = decoder_models(&dec, basis)?;
            let cal = device::load_calibration(&calibration)?;
            let code = build_code(d)?;
            let ranked = device::rank_placements(&cal, &code, &InfluenceWeights::TABLE)?;
            if ranked.is_empty() {
                bail!("{} admits no d={d} placement", cal.device_name);
            }
            let scores: Vec<f64> = ranked.iter().map(|r| r.score).collect();
            let physical: Vec<f64> = {
                let mut v: Vec<f64> = ranked.iter().map(|r| r.means.physical()).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let mut points = Vec::new();
            for (label, i) in [("best", 0), ("median", ranked.len() / 2), ("worst", ranked.len() - 1)] {
                let r = &ranked[i];
                let model = device::device_model(&cal, &code, &r.placement)?;
                let tag = format!("{}#{}", cal.device_name, r.placement_id);
                let row = bench::logical_error_rate(&code, &model, &tag, r.means.physical(), basis, shots, seed, &spec(&dec, &models), quantile)?;
                points.push(json!({"rank": label, "placement_id": r.placement_id, "score": r.score, "mean_physical_error": r.means.physical(), "row": row}));
            }
            let v = json!({
                "device_name": cal.device_name,
                "d": d,
                "placements": ranked.len(),
                "scores": device::summarize(&scores),
                "mean_physical_error": device::summarize(&physical),
                "points": points,
            });
            write_out(out.as_deref(), &pretty(&v))?;
        }
        Command::InfluenceWeights { d, base_p, shots, seed, out } => {
            let code = build_code(d)?;
            let report = device::estimate_influence_weights(&code, base_p, shots, seed)?;
            let mut v = serde_json::to_value(&report)?;
            v["ordered"] = json!(report.weights.ordered());
            write_out(out.as_deref(), &pretty(&v))?;
        }
        Command::MakeSyntheticDevice { qubits, p, spread, seed, out } => {
            let cal = device::synthetic_device(qubits, SyntheticRates { base: p, spread }, seed)?;
            write_out(out.as_deref(), &pretty(&serde_json::to_value(&cal)?))?;
        }
        Command::DumpCode { d, out } => {
            write_out(out.as_deref(), &pretty(&build_code(d)?.to_json()))?;
        }
        Command::DumpGraph { d, p, basis, dec, out } => {
            let code = build_code(d)?;
            let g = build_detector_graph(&code, &uniform_model(p)?, d, basis, dec.weighting.into())?;
            write_out(out.as_deref(), &pretty(&g.to_json()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
