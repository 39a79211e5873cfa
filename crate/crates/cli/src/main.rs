use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use topomap::gdsc::read_descriptor_set;
use topomap::harness::{
    self, bench_csv, bench_descriptors, default_bench_image, export_distance_matrix, list_images,
    read_config_file, Extractor, RunConfig,
};
use topomap::image::read_pgm;
use topomap::io::write_atomic;
use topomap::synthetic::TourParams;
use topomap::Error;

#[derive(Parser)]
#[command(name = "topomap", version, about = "Topological mapping and loop-closure experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a map for one threshold and score it against ground truth.
    Run(RunArgs),
    /// Independent runs over several t_nn values.
    Sweep(RunArgs),
    /// Time descriptor extraction.
    Bench(BenchArgs),
    /// Export the pairwise descriptor distance matrix and a heatmap.
    Distmat(DistmatArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// key = value file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// GDSC global descriptor file.
    #[arg(long)]
    descriptors: Option<String>,
    /// Local feature file matching the descriptors.
    #[arg(long)]
    features: Option<String>,
    /// Directory of PGM images (instead of descriptor files).
    #[arg(long)]
    images: Option<String>,
    #[arg(long)]
    gt: Option<String>,
    /// Aggregation threshold; comma-separated list for sweep.
    #[arg(long, allow_hyphen_values = true)]
    tnn: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tllc: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tinliers: Option<String>,
    /// Ground-truth tolerance in frames.
    #[arg(long, allow_hyphen_values = true)]
    margin: Option<String>,
    /// Continuity threshold in images.
    #[arg(long, allow_hyphen_values = true)]
    tci: Option<String>,
    /// normal, oracle or flat.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Write the belief vector after every frame.
    #[arg(long)]
    dump_beliefs: bool,
    /// Use the older belief evolution model.
    #[arg(long)]
    legacy_evolution: bool,
}

impl RunArgs {
    fn config(&self) -> topomap::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            let pairs = read_config_file(p)?;
            cfg.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        }
        let flags = [
            ("descriptors", &self.descriptors),
            ("features", &self.features),
            ("images", &self.images),
            ("gt", &self.gt),
            ("tnn", &self.tnn),
            ("tllc", &self.tllc),
            ("tinliers", &self.tinliers),
            ("margin", &self.margin),
            ("tci", &self.tci),
            ("mode", &self.mode),
            ("seed", &self.seed),
            ("out", &self.out),
            ("threads", &self.threads),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if self.dump_beliefs {
            cfg.set("dump-beliefs", "true")?;
        }
        if self.legacy_evolution {
            cfg.set("legacy-evolution", "true")?;
        }
        cfg.validate_inputs()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BenchArgs {
    /// phog or file.
    #[arg(long, default_value = "phog")]
    extractor: String,
    /// GDSC file for the file extractor.
    #[arg(long)]
    descriptors: Option<PathBuf>,
    /// PGM images to benchmark; a generated 1280x480 image when absent.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,8,32")]
    batch: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistmatArgs {
    #[arg(long)]
    descriptors: PathBuf,
    /// Binary matrix path; the heatmap is written beside it as .svg.
    #[arg(long)]
    out: PathBuf,
    /// Allow matrices above the size limit.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    frames: usize,
    #[arg(long, default_value_t = 20)]
    regions: usize,
    /// Frames per region visit.
    #[arg(long, default_value_t = 10)]
    visit: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Closest distance between region centers.
    #[arg(long, default_value_t = 5.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.5)]
    spread: f64,
    /// Probability of a jump to a random region per frame.
    #[arg(long, default_value_t = 0.0)]
    jump: f64,
    #[arg(long, default_value_t = 16)]
    features: usize,
    #[arg(long, default_value_t = 10)]
    margin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: RunArgs) -> topomap::Result<()> {
    let cfg = args.config()?;
    let out = harness::run(&cfg)?;
    print!("{}", harness::report_csv(&[&out.report]));
    Ok(())
}

fn sweep(args: RunArgs) -> topomap::Result<()> {
    let cfg = args.config()?;
    let points = harness::sweep(&cfg)?;
    print!("{}", harness::sweep_csv(&points));
    Ok(())
}

fn bench(args: BenchArgs) -> topomap::Result<()> {
    let extractor = Extractor::from_name(&args.extractor, args.descriptors.as_deref())?;
    let images = match &args.images {
        Some(dir) => list_images(dir)?.iter().map(|p| read_pgm(p)).collect::<topomap::Result<Vec<_>>>()?,
        None => vec![default_bench_image(args.seed)],
    };
    let csv = bench_csv(&bench_descriptors(&extractor, &images, &args.batch)?);
    match &args.out {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn distmat(args: DistmatArgs) -> topomap::Result<()> {
    if !args.descriptors.exists() {
        return Err(Error::Config(format!("{} does not exist", args.descriptors.display())));
    }
    let set = read_descriptor_set(&args.descriptors)?;
    let svg = export_distance_matrix(&set, &args.out, args.force)?;
    println!("{}", args.out.display());
    println!("{}", svg.display());
    Ok(())
}

fn synth(args: SynthArgs) -> topomap::Result<()> {
    let params = TourParams {
        n_frames: args.frames,
        dim: args.dim,
        n_regions: args.regions,
        visit_len: args.visit,
        separation: args.separation,
        spread: args.spread,
        jump_prob: args.jump,
        features_per_frame: args.features,
        margin_m: args.margin,
        seed: args.seed,
        ..TourParams::default()
    };
    let world = params.generate()?;
    world.write(&args.out)?;
    println!("{} frames written to {}", world.len(), args.out.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_data_format() || matches!(e, Error::Dimension { .. } | Error::Metric { .. } | Error::Size { .. } | Error::Io { .. }) {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Bench(a) => bench(a),
        Command::Distmat(a) => distmat(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
