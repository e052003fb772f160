use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use lpo::oracle::replay::{serve, ReplayTable};
use lpo::oracle::{OracleError, OracleHandle, OracleRole, OracleSpec};
use lpo::pipeline::{
    self, AdjustedSource, CampaignConfig, CampaignResult, PipelineError, SpotMode, SpotSummary, View, ViewSet,
};
use lpo::report::{self, diff_row, export_table, verify_tables, TableFormat, TablesFixture};
use lpo::search::{DeParams, SearchConfig, Strategy};
use lpo::spot::{self, SpotModel, SpotParams};

/// Light perturbation optimizer.
#[derive(Parser)]
#[command(name = "lpo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both phases of a campaign.
    Run(Box<RunArgs>),
    /// Run phase 2 only, against an existing phase 1 output directory.
    Score(ScoreArgs),
    /// Export a results table from campaign records.
    Report(ReportArgs),
    /// Recompute a printed results-table fixture.
    VerifyTables(VerifyArgs),
    /// Serve canned detections over stdio from a replay table.
    ReplayOracle(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Grid,
    De,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    front: PathBuf,
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long = "pix-incr", default_value_t = 20)]
    pix_incr: u32,
    #[arg(long = "fd-oracle")]
    fd_oracle: String,
    #[arg(long = "fr-oracle")]
    fr_oracle: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "grid")]
    strategy: StrategyArg,
    /// Spot image with an alpha channel.
    #[arg(long, conflicts_with_all = ["spot_color", "spot_opacity", "spot_size", "spot_falloff"])]
    spot: Option<PathBuf>,
    /// Face width the spot was sized for; read from the sidecar when omitted.
    #[arg(long = "spot-ref-width")]
    spot_ref_width: Option<u32>,
    #[arg(long = "spot-color", value_parser = parse_colour)]
    spot_color: Option<[u8; 3]>,
    #[arg(long = "spot-opacity")]
    spot_opacity: Option<f64>,
    #[arg(long = "spot-size", value_parser = parse_dims)]
    spot_size: Option<[u32; 2]>,
    #[arg(long = "spot-falloff")]
    spot_falloff: Option<f64>,
    #[arg(long = "exclude-eyes")]
    exclude_eyes: bool,
    /// Spots on the front view; left and right always take one.
    #[arg(long = "k-front", default_value_t = 1)]
    k_front: usize,
    /// Three lines naming the adjusted front, left and right photos.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_parser = parse_dims)]
    downscale: Option<[u32; 2]>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "de-population", default_value_t = 20)]
    de_population: usize,
    #[arg(long = "de-generations", default_value_t = 50)]
    de_generations: usize,
    #[arg(long)]
    trace: bool,
    /// Evaluation threads for parallel-safe oracles; 0 picks a default.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Environment tag for reports: D or N, optionally with H.
    #[arg(long)]
    env: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "fd-oracle")]
    fd_oracle: Option<String>,
    #[arg(long = "fr-oracle")]
    fr_oracle: Option<String>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    table: PathBuf,
}

fn parse_dims(s: &str) -> Result<[u32; 2], String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<u32>().map_err(|_| format!("bad dimension in {s:?}"));
    Ok([p(w)?, p(h)?])
}

fn parse_colour(s: &str) -> Result<[u8; 3], String> {
    let hex = s.trim_start_matches('#');
    if hex.len() != 6 {
        return Err(format!("expected RRGGBB, got {s:?}"));
    }
    let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| format!("bad colour {s:?}"));
    Ok([byte(0)?, byte(2)?, byte(4)?])
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl std::fmt::Display) -> Self {
        Failure {
            code: 4,
            message: message.to_string(),
        }
    }

    fn other(message: impl std::fmt::Display) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let code = match e {
            OracleError::Config(_) => 4,
            OracleError::NoFace { .. } => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

const DEFAULT_SPOT_SIZE: [u32; 2] = [24, 24];
const DEFAULT_REFERENCE_WIDTH: u32 = 224;

fn build_spot(args: &RunArgs) -> Result<(SpotModel, String), Failure> {
    if let Some(path) = &args.spot {
        let reference = match args.spot_ref_width {
            Some(w) => w,
            None => spot::read_sidecar(path).map_err(Failure::config)?.ok_or_else(|| {
                Failure::config(format!(
                    "{} has no reference face width; pass --spot-ref-width or add {}",
                    path.display(),
                    spot::sidecar_path(path).display()
                ))
            })?,
        };
        let model = spot::load_spot(path, reference).map_err(Failure::config)?;
        return Ok((model, path.display().to_string()));
    }
    let mut params = SpotParams::green_laser(args.spot_size.unwrap_or(DEFAULT_SPOT_SIZE));
    if let Some(c) = args.spot_color {
        params.colour = c;
    }
    if let Some(a) = args.spot_opacity {
        params.opacity = a;
    }
    if let Some(f) = args.spot_falloff {
        params.falloff = f;
    }
    let reference = args.spot_ref_width.unwrap_or(DEFAULT_REFERENCE_WIDTH);
    let model = spot::render_spot(&params, reference).map_err(Failure::config)?;
    Ok((model, "rendered".to_string()))
}

fn connect(spec: &str, role: OracleRole) -> Result<OracleHandle, Failure> {
    let spec: OracleSpec = spec.parse()?;
    Ok(OracleHandle::connect(&spec, role)?)
}

fn adjusted_paths(manifest: Option<&Path>) -> Result<[PathBuf; 3], Failure> {
    Ok(match manifest {
        Some(m) => pipeline::await_adjusted_images(AdjustedSource::Manifest(m))?,
        None => {
            let stdin = io::stdin();
            let mut input = stdin.lock();
            let mut output = io::stdout();
            pipeline::await_adjusted_images(AdjustedSource::Interactive {
                input: &mut input as &mut dyn BufRead,
                output: &mut output as &mut dyn Write,
            })?
        }
    })
}

fn print_final(result: &CampaignResult) {
    for v in &result.views {
        let pct = |d: &Option<lpo::Detection>| d.as_ref().map_or("no face".to_string(), |d| format!("{:.2}%", d.confidence * 100.0));
        println!(
            "{}: FD {:.2}% -> {}, FR {} -> {}",
            v.view.title(),
            v.initial_fd.confidence * 100.0,
            pct(&v.final_fd),
            pct(&v.initial_fr),
            pct(&v.final_fr)
        );
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    if let Some(tag) = &args.env {
        tag.parse::<report::Environment>().map_err(Failure::config)?;
    }
    let strategy = match args.strategy {
        StrategyArg::Grid => Strategy::Grid,
        StrategyArg::De => Strategy::DifferentialEvolution,
    };
    let search = SearchConfig {
        pixel_increment: args.pix_incr,
        spot_count: 1,
        strategy,
        exclusions: Vec::new(),
        de: DeParams {
            population: args.de_population,
            generations: args.de_generations,
            seed: args.seed,
            ..DeParams::default()
        },
        workers: args.workers,
        keep_trace: args.trace,
    };
    search.validate().map_err(Failure::config)?;
    if args.k_front == 0 {
        return Err(Failure::config("--k-front must be at least 1"));
    }
    let (spot, source) = build_spot(&args)?;

    let mut views = ViewSet::load([&args.front, &args.left, &args.right], SpotMode::Laser)?;
    views.get_mut(View::Front).spot_count = args.k_front;

    let fd = connect(&args.fd_oracle, OracleRole::Fd)?;
    let fr = connect(&args.fr_oracle, OracleRole::Fr)?;
    let config = CampaignConfig {
        search,
        exclude_eyes: args.exclude_eyes,
        downscale: args.downscale,
        fd_oracle: args.fd_oracle.clone(),
        fr_oracle: args.fr_oracle.clone(),
        spot: SpotSummary::of(&spot, source),
        environment: args.env.clone(),
    };

    let partial = pipeline::phase1_recommend(&views, &fd, &fr, &spot, &config, &args.out)?;
    for v in &partial.views {
        for name in [&v.outputs.initial_fd, &v.outputs.initial_fr, &v.outputs.lpo] {
            println!("Saved: {}", args.out.join(name).display());
        }
        let centres: Vec<String> = v
            .recommendation
            .centers
            .iter()
            .map(|c| format!("[{}, {}]", c[0], c[1]))
            .collect();
        println!("{} recommendation: {}", v.view.title(), centres.join(" "));
    }
    print!("{}", report::campaign_statistics(&partial));

    let adjusted = adjusted_paths(args.manifest.as_deref())?;
    let done = pipeline::phase2_score(&partial, &adjusted, &fd, &fr, &args.out)?;
    print_final(&done);
    info!("record written to {}", args.out.join(pipeline::RECORD_FILE).display());
    Ok(())
}

fn score(args: ScoreArgs) -> Result<(), Failure> {
    let partial = CampaignResult::load(&args.out)?;
    let fd = connect(args.fd_oracle.as_deref().unwrap_or(&partial.config.fd_oracle), OracleRole::Fd)?;
    let fr = connect(args.fr_oracle.as_deref().unwrap_or(&partial.config.fr_oracle), OracleRole::Fr)?;
    let adjusted = adjusted_paths(args.manifest.as_deref())?;
    let done = pipeline::phase2_score(&partial, &adjusted, &fd, &fr, &args.out)?;
    print_final(&done);
    Ok(())
}

fn report_cmd(args: ReportArgs) -> Result<(), Failure> {
    let format: TableFormat = args.format.parse().map_err(Failure::config)?;
    let records = report::load_campaign_records(&args.records).map_err(Failure::other)?;
    let rows: Vec<_> = records
        .into_iter()
        .map(|r| {
            let d = diff_row(&r);
            (r, d)
        })
        .collect();
    export_table(&rows, format, &args.out).map_err(Failure::other)?;
    if !rows.is_empty() {
        print!("{}", report::aggregate(&rows));
    }
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let fixture = match &args.fixtures {
        Some(p) => TablesFixture::load(p).map_err(Failure::config)?,
        None => TablesFixture::bundled(),
    };
    let v = verify_tables(&fixture);
    print!("{}", v.render());
    if v.passed() {
        Ok(())
    } else {
        Err(Failure::other("table verification failed"))
    }
}

fn replay(args: ReplayArgs) -> Result<(), Failure> {
    let table = ReplayTable::load(&args.table).map_err(Failure::config)?;
    let stdin = io::stdin();
    serve(&table, stdin.lock(), io::stdout().lock()).map_err(Failure::other)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(*a),
        Command::Score(a) => score(a),
        Command::Report(a) => report_cmd(a),
        Command::VerifyTables(a) => verify(a),
        Command::ReplayOracle(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
