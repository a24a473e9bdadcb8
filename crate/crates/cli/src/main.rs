use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roomtrace::analysis::{self, DistanceMode};
use roomtrace::experiment::{self, LabelSpan};
use roomtrace::ingest::{self, BeaconLabels, DEFAULT_DT_SECS, DEFAULT_FLOOR_DBM};
use roomtrace::museum::{build_weight_table, load_graph};
use roomtrace::nn::{FeatureSource, InputSpec, NnModel, TrainConfig};
use roomtrace::reconstruct::{self, Method, Prefilter, SmoothingWindow, Trajectory, DEFAULT_MIN_RUN, DEFAULT_THETA_DBM};
use roomtrace::sim::{self, GroupSpec, NoiseModel, SimConfig, WalkerPolicy};
use roomtrace::{Error, MuseumGraph, Result};

/// Room-level visitor trajectories from BLE RSSI sighting logs.
///
/// Diagnostics go to stderr; set ROOMTRACE_LOG_LEVEL (error, warn, info,
/// debug, trace) to change their verbosity.
#[derive(Parser)]
#[command(name = "roomtrace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sighting log and its ground-truth labels.
    Simulate(SimulateArgs),
    /// Turn a sighting log into one trajectory per beacon.
    Reconstruct(ReconstructArgs),
    /// Train the room classifier on a labelled sighting log.
    Train(TrainArgs),
    /// Compare trajectories with labels and print the accuracy.
    Eval(EvalArgs),
    /// Time-of-visit, permanence and clockwisety tables.
    Analyze(EnsembleArgs),
    /// All mutual trajectory distances and their histogram.
    Distmat(DistmatArgs),
    /// Most and least common trajectory by distance interval mode.
    Common(DistmatArgs),
    /// Single-linkage groups of visitors moving together.
    Groups(GroupsArgs),
    /// Room-to-room transition probabilities.
    Transition(EnsembleArgs),
}

#[derive(Args)]
struct GraphArg {
    /// Venue description (TOML). Defaults to the bundled venue.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct BinningArgs {
    /// Bin width in seconds.
    #[arg(long, default_value_t = DEFAULT_DT_SECS)]
    dt: f64,
    /// dBm value of bins without any sighting.
    #[arg(long, default_value_t = DEFAULT_FLOOR_DBM, allow_negative_numbers = true)]
    floor: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphArg,
    /// Output directory (sightings.jsonl, labels.jsonl, groups.tsv).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    visitors: usize,
    #[arg(long, default_value_t = DEFAULT_DT_SECS)]
    dt: f64,
    /// No jitter, dropout, gain spread or stray pickups.
    #[arg(long)]
    noiseless: bool,
    /// Override the Gaussian jitter (dBm).
    #[arg(long)]
    jitter: Option<f64>,
    /// Override the per-sample dropout probability.
    #[arg(long)]
    dropout: Option<f64>,
    /// Number of groups of visitors walking together.
    #[arg(long, default_value_t = 0)]
    groups: usize,
    #[arg(long, default_value_t = 2)]
    group_size: usize,
    /// Bins each group member trails the previous one.
    #[arg(long, default_value_t = 1)]
    group_lag: usize,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    graph: GraphArg,
    /// Sighting log (JSON lines).
    #[arg(long)]
    log: PathBuf,
    /// Label file; only used to attach visit types to the output.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "am")]
    method: Method,
    #[command(flatten)]
    binning: BinningArgs,
    /// Bins before and after the current one, as `minus,plus`.
    #[arg(long, default_value = "6,6", value_parser = parse_window)]
    window: SmoothingWindow,
    /// dBm a bin must reach to count towards the in-museum span (nn only).
    #[arg(long, default_value_t = DEFAULT_THETA_DBM, allow_negative_numbers = true)]
    theta: f64,
    /// Consecutive bins above `theta` needed to open the span (nn only).
    #[arg(long, default_value_t = DEFAULT_MIN_RUN)]
    min_run: usize,
    /// Trained model (required for nn).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory (trajectories.tsv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    binning: BinningArgs,
    /// Input window, as `minus,plus`.
    #[arg(long, default_value = "6,6", value_parser = parse_window)]
    window: SmoothingWindow,
    /// Matrix the input windows are cut from: raw, smoothed, normalized or
    /// smoothed-normalized.
    #[arg(long, default_value = "smoothed-normalized")]
    features: FeatureSource,
    /// Labelled bins to sample (all available bins if fewer).
    #[arg(long, default_value_t = 5500)]
    train_bins: usize,
    /// Sample bins within visits only (`visit`) or anywhere (`matrix`).
    #[arg(long, default_value = "visit")]
    span: LabelSpan,
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    /// Hidden layer width.
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (model.txt, loss.tsv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[arg(long)]
    labels: PathBuf,
    /// Trajectory file written by `reconstruct`.
    #[arg(long)]
    trajectories: PathBuf,
    /// Optional output directory for per-beacon accuracy (accuracy.tsv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Shortest visit kept, in minutes.
    #[arg(long, default_value_t = analysis::DEFAULT_MIN_VISIT_MIN)]
    min_visit: f64,
    /// Longest visit kept, in minutes.
    #[arg(long, default_value_t = analysis::DEFAULT_MAX_VISIT_MIN)]
    max_visit: f64,
}

#[derive(Args)]
struct EnsembleArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[arg(long)]
    trajectories: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
    /// Width of the time-of-visit histogram bins, in minutes (analyze only).
    #[arg(long, default_value_t = 5.0)]
    bin_width: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistmatArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[arg(long)]
    trajectories: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
    /// Histogram interval width; defaults to the largest distance over 50.
    #[arg(long)]
    bin_width: Option<f64>,
    /// norm-of-sum or sum-of-moduli.
    #[arg(long, default_value = "norm-of-sum")]
    mode: DistanceMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GroupsArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[arg(long)]
    trajectories: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
    /// Linkage cutoff; defaults to the widest gap in the low tail of the
    /// mutual distances, else min(5th percentile, median / 20).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "norm-of-sum")]
    mode: DistanceMode,
    #[arg(long)]
    out: PathBuf,
}

fn parse_window(s: &str) -> std::result::Result<SmoothingWindow, String> {
    let (a, b) = s.split_once(',').ok_or("expected minus,plus")?;
    let a = a.trim().parse().map_err(|_| format!("bad window start {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad window end {b:?}"))?;
    Ok(SmoothingWindow::new(a, b))
}

fn with_path(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| with_path(path, e))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| with_path(dir, e))?;
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| with_path(&path, e))
}

fn load_venue(arg: &GraphArg) -> Result<MuseumGraph> {
    match &arg.graph {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| with_path(path, e))?;
            load_graph(&text)
        }
        None => Ok(MuseumGraph::borghese()),
    }
}

fn read_labels(path: &Path, g: &MuseumGraph) -> Result<std::collections::BTreeMap<String, BeaconLabels>> {
    Ok(ingest::group_labels(&ingest::parse_labels(open(path)?, g)?))
}

fn read_trajectories(path: &Path, g: &MuseumGraph) -> Result<Vec<Trajectory>> {
    reconstruct::read_trajectories(open(path)?, g)
}

fn read_filtered(path: &Path, g: &MuseumGraph, f: &FilterArgs) -> Result<Vec<Trajectory>> {
    let all = read_trajectories(path, g)?;
    let kept = analysis::filter_visits(&all, g, f.min_visit, f.max_visit);
    log::info!("{} of {} trajectories within {}..{} min", kept.len(), all.len(), f.min_visit, f.max_visit);
    Ok(kept)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let g = load_venue(&a.graph)?;
    let mut noise = if a.noiseless { NoiseModel::noiseless() } else { NoiseModel::default() };
    if let Some(j) = a.jitter {
        noise.jitter_sd = j;
    }
    if let Some(d) = a.dropout {
        noise.dropout_p = d;
    }
    let mut policy = if g.room_by_name("Pinacoteca").is_some() && g.num_rooms() == 10 {
        WalkerPolicy::borghese(&g)
    } else {
        let mut p = WalkerPolicy::uniform(&g, sim::Dwell { median_secs: 240.0, sigma: 0.5 });
        p.slot_bins = Some(720);
        p.min_visit_bins = 150;
        p
    };
    if a.groups > 0 {
        policy.groups = Some(GroupSpec {
            count: a.groups,
            size: a.group_size,
            lag_bins: a.group_lag,
        });
    }
    let cfg = SimConfig {
        n_visitors: a.visitors,
        seed: a.seed,
        dt_secs: a.dt,
        noise,
        ..SimConfig::default()
    };
    let out = sim::simulate_visits(&g, &policy, &cfg)?;
    ingest::write_log(create(&a.out, "sightings.jsonl")?, &out.sightings)?;
    ingest::write_labels(create(&a.out, "labels.jsonl")?, &out.truths, &g)?;
    if !out.groups.is_empty() {
        let mut w = create(&a.out, "groups.tsv")?;
        writeln!(w, "group\tmembers")?;
        for (i, grp) in out.groups.iter().enumerate() {
            let names: Vec<String> = grp.iter().map(|&v| sim::beacon_name(v)).collect();
            writeln!(w, "{i}\t{}", names.join(","))?;
        }
        w.flush()?;
    }
    println!("simulated {} visitors, {} sightings", out.truths.len(), out.sightings.len());
    Ok(())
}

fn reconstruct_cmd(a: ReconstructArgs) -> Result<()> {
    let g = load_venue(&a.graph)?;
    let model = match (a.method, &a.model) {
        (Method::Nn, None) => return Err(Error::InvalidArgument("model required: method nn needs --model".into())),
        (Method::Nn, Some(path)) => Some(NnModel::load(open(path)?)?),
        _ => None,
    };
    let sightings = ingest::parse_log(open(&a.log)?, &g)?;
    let matrices = ingest::bin_sightings(&sightings, &g, a.binning.dt, a.binning.floor)?;
    let labels = a.labels.as_deref().map(|p| read_labels(p, &g)).transpose()?;
    let prefilter = Prefilter {
        theta: a.theta,
        min_run: a.min_run,
    };
    let mut trajs = Vec::with_capacity(matrices.len());
    for r in &matrices {
        let mut t = match (a.method, &model) {
            (Method::Am, _) => reconstruct::argmax_reconstruct(r, &g),
            (Method::Ma, _) => reconstruct::ma_reconstruct(r, a.window, &g),
            (Method::Nn, Some(m)) => {
                let win = m.input.map_or(a.window, |s| SmoothingWindow::new(s.delta_minus, s.delta_plus));
                reconstruct::nn_reconstruct(r, m, win, &g, prefilter)?
            }
            (Method::Nn, None) => unreachable!("checked above"),
        };
        t.visit_type = labels.as_ref().and_then(|l| l.get(&t.beacon)).map(|l| l.visit_type);
        trajs.push(t);
    }
    let mut w = create(&a.out, "trajectories.tsv")?;
    reconstruct::write_trajectories(&mut w, &trajs)?;
    w.flush()?;
    println!("reconstructed {} trajectories with {}", trajs.len(), a.method);
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let g = load_venue(&a.graph)?;
    let sightings = ingest::parse_log(open(&a.log)?, &g)?;
    let matrices = ingest::bin_sightings(&sightings, &g, a.binning.dt, a.binning.floor)?;
    let labels = read_labels(&a.labels, &g)?;
    let pairs = experiment::pair_with_labels(matrices, &labels)?;
    let available = experiment::available_bins(&pairs, a.span, &g);
    if available == 0 {
        return Err(Error::InvalidArgument("no labelled bins to train on".into()));
    }
    let bins = if a.train_bins > available {
        log::warn!("only {available} labelled bins available, {} requested", a.train_bins);
        available
    } else {
        a.train_bins
    };
    let input = InputSpec {
        delta_minus: a.window.delta_minus,
        delta_plus: a.window.delta_plus,
        features: a.features,
    };
    let cfg = TrainConfig {
        learning_rate: a.lr,
        iterations: a.iterations,
        seed: a.seed,
        hidden: vec![a.hidden],
        ..TrainConfig::default()
    };
    let mut rng = experiment::sampling_rng(a.seed);
    let (model, report) = experiment::train_on(&pairs, &g, a.span, bins, input, &cfg, &mut rng)?;
    let mut w = create(&a.out, "model.txt")?;
    model.save(&mut w)?;
    w.flush()?;
    let mut w = create(&a.out, "loss.tsv")?;
    writeln!(w, "iteration\tloss")?;
    for (it, loss) in &report.checkpoints {
        writeln!(w, "{it}\t{loss:.8}")?;
    }
    w.flush()?;
    println!(
        "trained on {bins} bins from {} beacons, final loss {:.6}",
        pairs.len(),
        report.final_loss().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let g = load_venue(&a.graph)?;
    let labels = read_labels(&a.labels, &g)?;
    let trajs = read_trajectories(&a.trajectories, &g)?;
    let mut rows = Vec::new();
    let (mut hits, mut total) = (0, 0);
    for t in &trajs {
        let Some(l) = labels.get(&t.beacon) else {
            log::warn!("no labels for beacon {}", t.beacon);
            continue;
        };
        let truth = ingest::align_to_grid(&l.events, t.t0, t.dt_ms, t.m())?;
        let h = t.rooms.iter().zip(&truth).filter(|(a, b)| a == b).count();
        rows.push((t.beacon.clone(), h, t.m()));
        hits += h;
        total += t.m();
    }
    if total == 0 {
        return Err(Error::InvalidArgument("no labelled bins to evaluate".into()));
    }
    if let Some(dir) = &a.out {
        let mut w = create(dir, "accuracy.tsv")?;
        writeln!(w, "beacon\tcorrect\tbins\taccuracy")?;
        for (b, h, m) in &rows {
            let acc = if *m == 0 { 0.0 } else { *h as f64 / *m as f64 };
            writeln!(w, "{b}\t{h}\t{m}\t{acc:.4}")?;
        }
        w.flush()?;
    }
    println!("accuracy {:.3} ({hits}/{total} bins)", hits as f64 / total as f64);
    Ok(())
}

fn write_hist(dir: &Path, stem: &str, h: &analysis::Histogram, origin: f64) -> Result<()> {
    let mut w = create(dir, &format!("{stem}.tsv"))?;
    analysis::write_histogram(&mut w, h, origin)?;
    w.flush()?;
    let mut w = create(dir, &format!("{stem}.xy"))?;
    analysis::write_series(&mut w, h, origin)?;
    w.flush()?;
    Ok(())
}

fn analyze(a: EnsembleArgs) -> Result<()> {
    let g = load_venue(&a.graph)?;
    let trajs = read_filtered(&a.trajectories, &g, &a.filter)?;

    let tov = analysis::time_of_visit_summary(&trajs, &g);
    let mut w = create(&a.out, "tov.tsv")?;
    analysis::write_tov_summary(&mut w, &tov)?;
    w.flush()?;
    analysis::write_tov_summary(io::stdout().lock(), &tov)?;

    let mut w = create(&a.out, "permanence.tsv")?;
    analysis::write_permanence_table(&mut w, &analysis::time_of_permanence(&trajs, &g), &g)?;
    w.flush()?;

    let minutes: Vec<f64> = trajs.iter().map(|t| analysis::time_of_visit(t, &g)).collect();
    write_hist(&a.out, "tov_hist", &analysis::histogram(&minutes, a.bin_width)?, 0.0)?;

    let scores: Vec<i64> = trajs.iter().map(|t| analysis::clockwisety(t, &g).score).collect();
    let skipped: usize = trajs.iter().map(|t| analysis::clockwisety(t, &g).non_adjacent).sum();
    if skipped > 0 {
        log::warn!("{skipped} room changes without a door scored 0");
    }
    let (h, lo) = analysis::clockwisety_histogram(&scores);
    write_hist(&a.out, "clockwisety", &h, lo as f64 - 0.5)?;
    Ok(())
}

fn distances(g: &MuseumGraph, trajs: &[Trajectory], mode: DistanceMode) -> Result<analysis::DistanceMatrix> {
    let w = build_weight_table(g)?;
    analysis::distance_matrix(trajs, &w, mode)
}

fn distmat(a: DistmatArgs) -> Result<()> {
    let g = load_venue(&a.graph)?;
    let trajs = read_filtered(&a.trajectories, &g, &a.filter)?;
    let dm = distances(&g, &trajs, a.mode)?;
    let mut w = create(&a.out, "distances.tsv")?;
    analysis::write_distance_matrix(&mut w, &dm)?;
    w.flush()?;
    let width = a.bin_width.unwrap_or_else(|| analysis::default_bin_width(&dm));
    write_hist(&a.out, "distance_hist", &analysis::histogram(&dm.off_diagonal(), width)?, 0.0)?;
    println!("{} trajectories, {} pairs", dm.len(), dm.len() * (dm.len() - 1) / 2);
    Ok(())
}

fn common(a: DistmatArgs) -> Result<()> {
    let g = load_venue(&a.graph)?;
    let trajs = read_filtered(&a.trajectories, &g, &a.filter)?;
    let dm = distances(&g, &trajs, a.mode)?;
    let width = a.bin_width.unwrap_or_else(|| analysis::default_bin_width(&dm));
    let cp = analysis::common_paths(&dm, width)?;
    let mut w = create(&a.out, "common.tsv")?;
    writeln!(w, "# bin_width {width}")?;
    writeln!(w, "beacon\tmodal_lower")?;
    for (b, lo) in dm.order.iter().zip(&cp.modal_lower) {
        writeln!(w, "{b}\t{lo}")?;
    }
    w.flush()?;
    println!("most_common\t{}", cp.most_common);
    println!("least_common\t{}", cp.least_common);
    Ok(())
}

fn groups(a: GroupsArgs) -> Result<()> {
    let g = load_venue(&a.graph)?;
    let trajs = read_filtered(&a.trajectories, &g, &a.filter)?;
    let dm = distances(&g, &trajs, a.mode)?;
    let threshold = a.threshold.unwrap_or_else(|| analysis::default_group_threshold(&dm));
    let clusters = analysis::detect_groups(&dm, threshold)?;
    let mut w = create(&a.out, "clusters.tsv")?;
    analysis::write_clusters(&mut w, &clusters, threshold)?;
    w.flush()?;
    println!("{} groups at threshold {threshold:.3}", clusters.len());
    Ok(())
}

fn transition(a: EnsembleArgs) -> Result<()> {
    let g = load_venue(&a.graph)?;
    let trajs = read_filtered(&a.trajectories, &g, &a.filter)?;
    let tm = analysis::transition_matrix(&trajs, &g)?;
    if tm.total() == 0 {
        log::warn!("no room changes in the ensemble");
    }
    let mut w = create(&a.out, "transition.tsv")?;
    analysis::write_transition_matrix(&mut w, &tm, &g)?;
    w.flush()?;
    println!("{} transitions, {} rooms without data", tm.total(), tm.zero_rows.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Distmat(a) => distmat(a),
        Command::Common(a) => common(a),
        Command::Groups(a) => groups(a),
        Command::Transition(a) => transition(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROOMTRACE_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.category());
            ExitCode::FAILURE
        }
    }
}
