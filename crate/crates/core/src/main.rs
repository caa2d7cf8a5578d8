use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use pairpath::backcast::{
    run_backcast, write_daily_csv, write_decisions_csv, write_latency_csv, write_ledger_csv,
    write_summary_json,
};
use pairpath::config::AppConfig;
use pairpath::engine::{search_best_cycle, NS_PER_DAY};
use pairpath::feed::{parse_feed, EventKind, FeedEvent, Universe};
use pairpath::marketgraph::{build_similarity, MarketGraph, SimilarityMatrix};
use pairpath::oracle::enumerate_cycles;
use pairpath::qubo::{read_graph_dump, read_tabu_dump, QuboProblem, TabuList};
use pairpath::sbm::XorshiftRng;
use pairpath::synth::{gen_feed, SynthSpec};
use pairpath::Real;

#[derive(Parser)]
#[command(name = "pairpath", version, about = "Pairs-trading decision engine and backcast simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a feed file through the engine and write reports.
    Backcast {
        #[arg(long)]
        feed: PathBuf,
        #[arg(long)]
        universe: PathBuf,
        /// Similarity CSV (code_i,code_j,s).
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config-file seed.
        #[arg(long)]
        seed: Option<u32>,
    },
    /// Run the bifurcation solver on a graph dump and print the best cycle.
    Solve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        tabu: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        restarts: u32,
        #[arg(long)]
        seed: Option<u32>,
    },
    /// Exhaustively rank every cycle of a graph dump.
    Oracle {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        tabu: Option<PathBuf>,
        /// Only cycles with weight sum at or below this are marked tradable.
        #[arg(long, default_value_t = -0.002, allow_hyphen_values = true)]
        threshold: f64,
    },
    /// Generate a synthetic feed file from a TOML market spec.
    GenFeed {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the matching universe CSV here.
        #[arg(long)]
        universe_out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u32>,
    },
    /// Build the DTW similarity file from historical feed files.
    BuildSim {
        /// One or more feed files (may span multiple days).
        #[arg(long, required = true, num_args = 1..)]
        feed: Vec<PathBuf>,
        #[arg(long)]
        universe: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Mid-price sampling interval.
        #[arg(long, default_value_t = 60_000_000_000)]
        interval_ns: i64,
    },
    /// Solver-vs-oracle success-rate harness on random instances.
    Bench {
        #[arg(long, default_value_t = 5)]
        stocks: usize,
        #[arg(long, default_value_t = 100)]
        instances: u32,
        #[arg(long, default_value_t = 100)]
        restarts: u32,
        #[arg(long, default_value_t = 1)]
        seed: u32,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config_paths: Vec<String>,
    seed: Option<u32>,
    out: String,
    version: String,
}

impl RunManifest {
    fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {}", path.display()))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<AppConfig> {
    match path {
        None => Ok(AppConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("read {}", p.display()))?;
            Ok(AppConfig::from_toml(&text)?)
        }
    }
}

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("open {}", path.display()))?))
}

fn load_problem(
    graph: &Path,
    tabu: &Option<PathBuf>,
) -> Result<QuboProblem<Real>> {
    let (g, m_c, m_p) = read_graph_dump(open_reader(graph)?)?;
    let t = match tabu {
        Some(p) => read_tabu_dump(open_reader(p)?, g.n_nodes())?,
        None => TabuList::new(g.n_nodes()),
    };
    Ok(QuboProblem::new(g, t, m_c, m_p))
}

fn cmd_backcast(
    feed: &Path,
    universe: &Path,
    sim: &Path,
    config: &Option<PathBuf>,
    out: &Path,
    seed: Option<u32>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let uni = Universe::from_reader(open_reader(universe)?)?;
    let sim_m = SimilarityMatrix::from_reader(open_reader(sim)?, &uni)?;
    let mut sim_cfg = cfg.sim_config();
    if let Some(s) = seed {
        sim_cfg.seed = s;
    }
    std::fs::create_dir_all(out).with_context(|| format!("create {}", out.display()))?;
    let result = run_backcast(
        open_reader(feed)?,
        uni.clone(),
        sim_m,
        cfg.engine_config(),
        cfg.sb_params(),
        &sim_cfg,
    )?;
    RunManifest {
        command: "backcast".into(),
        config_paths: config.iter().map(|p| p.display().to_string()).collect(),
        seed: Some(sim_cfg.seed),
        out: out.display().to_string(),
        version: env!("CARGO_PKG_VERSION").into(),
    }
    .write(&out.join("manifest.json"))?;
    let mut w = BufWriter::new(File::create(out.join("daily.csv"))?);
    write_daily_csv(&mut w, &result.daily)?;
    let mut w = BufWriter::new(File::create(out.join("decisions.csv"))?);
    write_decisions_csv(&mut w, &result.decisions)?;
    let mut w = BufWriter::new(File::create(out.join("ledger.csv"))?);
    write_ledger_csv(&mut w, &result.ledger, |i| uni.code(i).to_string())?;
    let mut w = BufWriter::new(File::create(out.join("summary.json"))?);
    write_summary_json(&mut w, &result)?;
    if sim_cfg.measure_latency {
        let mut w = BufWriter::new(File::create(out.join("latency.csv"))?);
        write_latency_csv(&mut w, &result.latency_ns)?;
    }
    Ok(())
}

fn cmd_solve(
    graph: &Path,
    tabu: &Option<PathBuf>,
    config: &Option<PathBuf>,
    restarts: u32,
    seed: Option<u32>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let problem = load_problem(graph, tabu)?;
    let params = cfg.sb_params();
    let mut rng = XorshiftRng::from_seed_lossy(seed.unwrap_or(cfg.seed));
    let (best, best_energy) = search_best_cycle(&problem, &params, &mut rng, restarts.max(1))?;
    match best {
        Some((path, w)) => {
            println!("path,weight_sum,energy");
            println!("{},{:.9},{:.9}", path.notation(|v| v.to_string()), w, best_energy);
        }
        None => {
            println!("path,weight_sum,energy");
            println!(",,{best_energy:.9}");
            eprintln!("no restart produced a valid cycle");
        }
    }
    Ok(())
}

fn cmd_oracle(graph: &Path, tabu: &Option<PathBuf>, threshold: f64) -> Result<()> {
    let problem = load_problem(graph, tabu)?;
    let res = enumerate_cycles(&problem.graph, &problem.tabu, problem.graph.n_stocks())?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "rank,path,weight_sum,tradable")?;
    for (rank, (path, weight)) in res.ranked.iter().enumerate() {
        writeln!(
            w,
            "{},{},{:.9},{}",
            rank + 1,
            path.notation(|v| v.to_string()),
            weight,
            *weight <= threshold
        )?;
    }
    Ok(())
}

fn cmd_gen_feed(
    spec_path: &Path,
    out: &Path,
    universe_out: &Option<PathBuf>,
    seed: Option<u32>,
) -> Result<()> {
    let spec = SynthSpec::from_toml(&std::fs::read_to_string(spec_path)?)?;
    let seed = seed.unwrap_or(1);
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("create {}", out.display()))?);
    let n = gen_feed(&spec, seed, &mut w)?;
    w.flush()?;
    if let Some(up) = universe_out {
        let mut w = BufWriter::new(File::create(up)?);
        spec.write_universe(&mut w)?;
    }
    RunManifest {
        command: "gen-feed".into(),
        config_paths: vec![spec_path.display().to_string()],
        seed: Some(seed),
        out: out.display().to_string(),
        version: env!("CARGO_PKG_VERSION").into(),
    }
    .write(&out.with_extension("manifest.json"))?;
    eprintln!("{n} events written");
    Ok(())
}

/// Sample normalized mid prices on a fixed grid, one sequence per stock per day.
fn sample_histories(
    feeds: &[PathBuf],
    universe: &Universe,
    interval_ns: i64,
) -> Result<Vec<Vec<Vec<Real>>>> {
    let mut events: Vec<FeedEvent> = Vec::new();
    for path in feeds {
        for line in open_reader(path)?.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                events.push(parse_feed(&line)?);
            }
        }
    }
    events.sort_by_key(|e| e.timestamp_ns);
    if events.is_empty() {
        bail!("no events in the feed files");
    }
    let n = universe.n();
    let mut histories: Vec<Vec<Vec<Real>>> = vec![Vec::new(); n];
    let mut base: Vec<f64> = universe.iter().map(|s| s.base_price.to_f64()).collect();
    let mut i = 0usize;
    while i < events.len() {
        let day = events[i].timestamp_ns.div_euclid(NS_PER_DAY);
        let day_end = (day + 1) * NS_PER_DAY;
        let mut mids: Vec<Option<f64>> = vec![None; n];
        let mut series: Vec<Vec<Real>> = vec![Vec::new(); n];
        let mut next_sample = events[i].timestamp_ns;
        while i < events.len() && events[i].timestamp_ns < day_end {
            let ev = &events[i];
            while ev.timestamp_ns >= next_sample {
                for k in 0..n {
                    if let Some(m) = mids[k] {
                        series[k].push(m);
                    }
                }
                next_sample += interval_ns;
            }
            if let Some(idx) = universe.index_of(&ev.code) {
                match ev.kind {
                    EventKind::Quote => {
                        let mid = (ev.bid.to_f64() + ev.ask.to_f64()) / 2.0;
                        mids[idx - 1] = Some(mid / base[idx - 1]);
                    }
                    EventKind::SessionOpen => {
                        if ev.bid.raw() > 0 {
                            base[idx - 1] = ev.bid.to_f64();
                        }
                    }
                    EventKind::SessionClose => {}
                }
            }
            i += 1;
        }
        for k in 0..n {
            if let Some(m) = mids[k] {
                series[k].push(m); // closing sample
            }
            if series[k].is_empty() {
                bail!("stock {} has no quotes on day {day}", universe.code(k + 1));
            }
            histories[k].push(std::mem::take(&mut series[k]));
        }
    }
    Ok(histories)
}

fn cmd_build_sim(
    feeds: &[PathBuf],
    universe: &Path,
    out: &Option<PathBuf>,
    interval_ns: i64,
) -> Result<()> {
    if interval_ns <= 0 {
        bail!("interval_ns must be positive");
    }
    let uni = Universe::from_reader(open_reader(universe)?)?;
    let histories = sample_histories(feeds, &uni, interval_ns)?;
    let sim = build_similarity(&histories)?;
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            sim.write(&mut w, &uni)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            sim.write(&mut w, &uni)?;
        }
    }
    Ok(())
}

/// Random instance in the acceptance recipe: similarity uniform in [0,1],
/// weights s x d with d uniform in [-0.05, 0.05].
pub fn random_instance(n: usize, rng: &mut XorshiftRng) -> MarketGraph<Real> {
    let mut s = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 1..=n {
        for j in (i + 1)..=n {
            let v: f64 = rng.next_unit();
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    let mut g = MarketGraph::zeros(n + 1);
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                let d: f64 = rng.next_unit::<f64>() * 0.1 - 0.05;
                g.set(i, j, s[i][j] * d);
            }
        }
    }
    g
}

fn cmd_bench(
    stocks: usize,
    instances: u32,
    restarts: u32,
    seed: u32,
    config: &Option<PathBuf>,
    out: &Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let params = cfg.sb_params();
    let mut rng = XorshiftRng::from_seed_lossy(seed);
    let mut lines = vec!["instance_id,restarts,best_energy,oracle_energy,success".to_string()];
    let mut successes = 0u32;
    for id in 0..instances {
        let g = random_instance(stocks, &mut rng);
        let tabu = TabuList::new(stocks + 1);
        let problem = QuboProblem::with_default_weights(g, tabu);
        let mut solver_rng = rng.split();
        let (best, _) = search_best_cycle(&problem, &params, &mut solver_rng, restarts)?;
        let oracle = enumerate_cycles(&problem.graph, &problem.tabu, stocks)?;
        let oracle_best = oracle.best().map(|(_, w)| *w);
        let best_w = best.as_ref().map(|(_, w)| *w);
        let success = match (best_w, oracle_best) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-9,
            (None, None) => true,
            _ => false,
        };
        if success {
            successes += 1;
        }
        lines.push(format!(
            "{id},{restarts},{},{},{}",
            best_w.map(|w| format!("{w:.9}")).unwrap_or_default(),
            oracle_best.map(|w| format!("{w:.9}")).unwrap_or_default(),
            success
        ));
    }
    let body = lines.join("\n") + "\n";
    match out {
        Some(p) => std::fs::write(p, &body)?,
        None => print!("{body}"),
    }
    eprintln!(
        "success rate: {}/{} ({:.1}%)",
        successes,
        instances,
        100.0 * successes as f64 / instances.max(1) as f64
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Backcast { feed, universe, sim, config, out, seed } => {
            cmd_backcast(feed, universe, sim, config, out, *seed)
        }
        Cmd::Solve { graph, tabu, config, restarts, seed } => {
            cmd_solve(graph, tabu, config, *restarts, *seed)
        }
        Cmd::Oracle { graph, tabu, threshold } => cmd_oracle(graph, tabu, *threshold),
        Cmd::GenFeed { spec, out, universe_out, seed } => cmd_gen_feed(spec, out, universe_out, *seed),
        Cmd::BuildSim { feed, universe, out, interval_ns } => {
            cmd_build_sim(feed, universe, out, *interval_ns)
        }
        Cmd::Bench { stocks, instances, restarts, seed, config, out } => {
            cmd_bench(*stocks, *instances, *restarts, *seed, config, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
