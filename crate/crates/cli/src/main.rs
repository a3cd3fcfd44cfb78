//! Command-line front end: `run` a registry of page images through the
//! pipeline, `report` an accuracy table across finished runs, and `synth`
//! a ground-truthed test corpus.

use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use regmine_core::geocode::{filter_confident, GeoBounds};
use regmine_core::pipeline::{
    accuracy_report, counts_csv, density_csv, density_grid, estimate_csv, estimate_records,
    parse_estimate_csv, process_registry_dir, records_csv, records_geojson, Estimate,
    PipelineContext, RegistryResult,
};
use regmine_core::profile::{Profile, GAZETTEER_ENV, PROFILE_ENV};
use regmine_core::synth::{load_truth_csv, write_corpus, RecordSeparator, SynthSpec};

#[derive(Parser)]
#[command(
    name = "regmine",
    version,
    about = "Mine structured, geocoded records from scanned registry pages"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process a directory of page images into tabular and geographic outputs
    Run(RunArgs),
    /// Print an accuracy table across one or more finished run directories
    Report(ReportArgs),
    /// Generate a synthetic registry corpus with a ground-truth sidecar
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Geojson,
    Both,
}

#[derive(Args)]
struct RunArgs {
    /// Directory of page images (.pgm/.png), processed in filename order
    #[arg(long)]
    input: PathBuf,

    /// Processing profile (falls back to $REGMINE_PROFILE)
    #[arg(long)]
    profile: Option<PathBuf>,

    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,

    /// Which record outputs to write
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,

    /// Geocode confidence cutoff; overrides the profile's value
    #[arg(long)]
    min_conf: Option<f64>,

    /// Also write density.csv binned at this cell size in degrees
    #[arg(long)]
    density_cell: Option<f64>,

    /// Restrict density.csv to records whose sector contains this text
    #[arg(long)]
    density_sector: Option<String>,

    /// Pages sampled (from the front) for the registry size estimate
    #[arg(long, default_value_t = 10)]
    estimate_samples: usize,

    /// Gazetteer override (falls back to $REGMINE_GAZETTEER, then the profile)
    #[arg(long)]
    gazetteer: Option<PathBuf>,

    /// Ground-truth sidecar; the size estimate then samples true per-page
    /// counts instead of pipeline counts
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Finished run directories (each holding counts.csv and estimate.csv)
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus directory to create
    #[arg(long)]
    out: PathBuf,

    #[arg(long, default_value_t = 7)]
    seed: u64,

    #[arg(long, default_value_t = 1950)]
    year: u16,

    #[arg(long, default_value_t = 3)]
    pages: usize,

    #[arg(long, default_value_t = 2)]
    columns: usize,

    #[arg(long, default_value_t = 1060)]
    page_width: u32,

    #[arg(long, default_value_t = 1400)]
    page_height: u32,

    /// Records per column as an inclusive range, e.g. 6-10
    #[arg(long, default_value = "6-10", value_parser = parse_count_range)]
    records_per_column: (usize, usize),

    /// Probability that a heading precedes a record slot (or starts a band)
    #[arg(long, default_value_t = 0.2)]
    heading_freq: f64,

    /// Page-wide centered headings instead of in-column banners
    #[arg(long)]
    centered_headings: bool,

    /// Separate records by an indented first line instead of a blank line
    #[arg(long)]
    indent: bool,

    /// Per-record placement jitter, uniform in ± this many pixels
    #[arg(long, default_value_t = 2)]
    jitter: u32,

    /// Fraction of pixels flipped; half go white, half black
    #[arg(long, default_value_t = 0.0)]
    salt_pepper: f64,

    /// Probability that a drawn glyph is replaced by unreadable damage
    #[arg(long, default_value_t = 0.0)]
    glyph_corrupt: f64,
}

fn parse_count_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once('-')
        .ok_or_else(|| format!("expected LO-HI, got {s:?}"))?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("bad low bound: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("bad high bound: {e}"))?;
    if lo == 0 || hi < lo {
        return Err(format!("range {lo}-{hi} is empty"));
    }
    Ok((lo, hi))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Report(args) => report(args),
        Command::Synth(args) => synth(args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let profile_path = args
        .profile
        .clone()
        .or_else(|| env::var_os(PROFILE_ENV).map(PathBuf::from))
        .with_context(|| format!("no profile: pass --profile or set ${PROFILE_ENV}"))?;
    let mut profile =
        Profile::load(&profile_path).with_context(|| profile_path.display().to_string())?;
    if let Some(v) = args.min_conf {
        profile.min_conf = v;
    }

    let gaz_env = env::var(GAZETTEER_ENV).ok();
    let gaz_path = profile
        .resolve_gazetteer(args.gazetteer.as_deref(), gaz_env.as_deref())
        .with_context(|| {
            format!("no gazetteer: pass --gazetteer, set ${GAZETTEER_ENV}, or name one in the profile")
        })?;

    let ctx = PipelineContext::new(profile, &gaz_path)?;
    let result = process_registry_dir(&ctx, &args.input)
        .with_context(|| format!("processing {}", args.input.display()))?;

    fs::create_dir_all(&args.out)?;
    let min_conf = ctx.profile.min_conf;

    if args.format != Format::Geojson {
        fs::write(args.out.join("records.csv"), records_csv(&result.records))?;
    }
    if args.format != Format::Csv {
        fs::write(
            args.out.join("records.geojson"),
            records_geojson(&result.records, min_conf),
        )?;
    }
    fs::write(args.out.join("counts.csv"), counts_csv(&result))?;

    let estimate = build_estimate(&args, &result)?;
    fs::write(
        args.out.join("estimate.csv"),
        estimate_csv(result.year, &estimate),
    )?;

    if let Some(cell) = args.density_cell {
        if !(cell > 0.0) {
            bail!("--density-cell must be positive, got {cell}");
        }
        let confident = filter_confident(&result.records, min_conf);
        match ctx.profile.geo_bounds().or_else(|| bounds_of(&confident)) {
            Some(bounds) => {
                let grid = density_grid(
                    &result.records,
                    cell,
                    &bounds,
                    args.density_sector.as_deref(),
                    min_conf,
                );
                fs::write(args.out.join("density.csv"), density_csv(&grid))?;
            }
            // No profile bounds and nothing confident to infer them from:
            // write the header so downstream tooling sees an empty grid.
            None => fs::write(args.out.join("density.csv"), density_csv(&[]))?,
        }
    }

    println!(
        "{}: {} pages, {} identified, {} geocoded at >= {min_conf}, ~{} records estimated -> {}",
        result.year,
        result.pages.len(),
        result.identified,
        result.geocoded_confident,
        estimate.estimated_records,
        args.out.display()
    );
    Ok(())
}

/// Sample per-page record counts for the size estimate: true counts when a
/// ground-truth sidecar is given, the pipeline's own counts otherwise.
fn build_estimate(args: &RunArgs, result: &RegistryResult) -> Result<Estimate> {
    let total_pages = result.pages.len();
    if total_pages == 0 {
        bail!("no page images under {}", args.input.display());
    }
    let wanted = args.estimate_samples.clamp(1, total_pages);
    let samples: Vec<usize> = match &args.truth {
        Some(path) => {
            let truth = load_truth_csv(path).with_context(|| path.display().to_string())?;
            let mut per_page = BTreeMap::new();
            for rec in &truth {
                *per_page.entry(rec.page).or_insert(0usize) += 1;
            }
            (1..=wanted as u32)
                .map(|p| per_page.get(&p).copied().unwrap_or(0))
                .collect()
        }
        None => result.pages[..wanted].iter().map(|c| c.identified).collect(),
    };
    Ok(estimate_records(&samples, total_pages))
}

/// Tightest box around the records that carry coordinates.
fn bounds_of(records: &[regmine_core::geocode::GeoRecord]) -> Option<GeoBounds> {
    let mut it = records.iter().filter_map(|r| r.geo);
    let first = it.next()?;
    let mut b = GeoBounds {
        min_lat: first.latitude,
        max_lat: first.latitude,
        min_lon: first.longitude,
        max_lon: first.longitude,
    };
    for g in it {
        b.min_lat = b.min_lat.min(g.latitude);
        b.max_lat = b.max_lat.max(g.latitude);
        b.min_lon = b.min_lon.min(g.longitude);
        b.max_lon = b.max_lon.max(g.longitude);
    }
    Some(b)
}

fn report(args: ReportArgs) -> Result<()> {
    let mut results = Vec::new();
    let mut estimates = Vec::new();
    for dir in &args.runs {
        let (result, estimate) =
            read_run(dir).with_context(|| format!("reading run {}", dir.display()))?;
        estimates.push((result.year, estimate));
        results.push(result);
    }
    print!("{}", accuracy_report(&results, &estimates)?);
    Ok(())
}

/// Rebuild the per-registry tallies of a finished `run` from its output
/// directory. Only the totals matter to the report, not the records.
fn read_run(dir: &Path) -> Result<(RegistryResult, Estimate)> {
    let est_text = fs::read_to_string(dir.join("estimate.csv"))?;
    let (year, estimate) = parse_estimate_csv(&est_text)?;

    let counts_text = fs::read_to_string(dir.join("counts.csv"))?;
    let total = counts_text
        .lines()
        .find(|l| l.starts_with("total,"))
        .with_context(|| format!("{}/counts.csv has no total row", dir.display()))?;
    let fields: Vec<&str> = total.split(',').collect();
    if fields.len() < 3 {
        bail!("malformed total row: {total:?}");
    }
    let result = RegistryResult {
        year,
        identified: fields[1].parse().context("total identified")?,
        geocoded_confident: fields[2].parse().context("total geocoded")?,
        ..RegistryResult::default()
    };
    Ok((result, estimate))
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        seed: args.seed,
        year: args.year,
        pages: args.pages,
        columns: args.columns,
        page_width: args.page_width,
        page_height: args.page_height,
        records_per_column: args.records_per_column,
        heading_frequency: args.heading_freq,
        centered_headings: args.centered_headings,
        separator: if args.indent {
            RecordSeparator::Indent
        } else {
            RecordSeparator::BlankLine
        },
        jitter_px: args.jitter,
        salt_pepper: args.salt_pepper,
        glyph_corruption: args.glyph_corrupt,
    };
    let corpus = write_corpus(&spec, &args.out)?;
    println!(
        "{} pages, {} ground-truth records -> {}",
        corpus.pages.len(),
        corpus.truth.len(),
        args.out.display()
    );
    Ok(())
}
