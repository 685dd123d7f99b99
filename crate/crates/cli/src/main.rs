//! `lulc`: land-cover classification and change analysis from the command line.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 file system failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lulc_core::chart::{emit_bar_chart, SortOrder};
use lulc_core::classify::{knn_predict_with, predict_with, ExtractOptions, FeatureOptions};
use lulc_core::io::{self, read_class_map, read_raster, read_samples, write_class_map, write_raster, write_samples};
use lulc_core::raster::BUILT_AREA;
use lulc_core::report;
use lulc_core::sampling::stratified_random_points_excluding;
use lulc_core::synth::{generate_growth_series, generate_scene, GrowthRule, SceneSpec};
use lulc_core::{
    change, confusion_matrix, extract_training, spectral, train_max_likelihood, ClassLegend, ClassMap, Error,
    GaussianClassModel, RegionPolygon, Ridge, SamplePlan, Workers,
};

#[derive(Parser, Debug)]
#[command(
    name = "lulc",
    version,
    about = "Land-use/land-cover classification, accuracy assessment and change analysis"
)]
struct Cli {
    /// Class legend JSON (`[{"id":1,"name":"Water"},...]`). Default: Water, Trees, Crops, Built Area, Bare Ground, Rangeland (ids 1-6).
    #[arg(long, global = true, value_name = "PATH")]
    legend: Option<PathBuf>,

    /// Worker threads for pixel-parallel steps; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw stratified random validation points from a class map.
    Sample(SampleArgs),
    /// Fit a Gaussian maximum-likelihood model from labeled points.
    Train(TrainArgs),
    /// Classify a multiband raster into a class map.
    Classify(ClassifyArgs),
    /// Compute a normalized-difference index raster.
    Index(IndexArgs),
    /// Build the confusion matrix and accuracy table for labeled points.
    Assess(AssessArgs),
    /// Per-region class-area change across yearly class maps.
    Change(ChangeArgs),
    /// Per-region class areas for one or more class maps.
    Zonal(ZonalArgs),
    /// Render SVG bar charts from a change report.
    Report(ReportArgs),
    /// Generate a synthetic scene (and optional growth series) from a JSON spec.
    #[command(hide = true)]
    Fixture(FixtureArgs),
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Class map (base path of the .lrh/.lrd pair).
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value_t = 100)]
    n_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict sampling to these classes (ids or names, comma separated). Default: every legend class.
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
    /// Never sample pixels holding one of these points (e.g. the training set).
    #[arg(long)]
    exclude: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    raster: PathBuf,
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Absolute covariance ridge. Default: 1e-6 times the mean pooled variance.
    #[arg(long)]
    ridge: Option<f64>,
    /// Fail when a sample lies outside the raster instead of skipping it.
    #[arg(long)]
    strict_samples: bool,
    /// Append an NDVI feature from these 1-based bands, given as NIR,RED.
    #[arg(long, value_name = "NIR,RED")]
    ndvi: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Ml,
    Knn,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// Trained model JSON (required for --method ml).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    raster: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Ml)]
    method: Method,
    /// Training points for --method knn.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Neighbours for --method knn (odd).
    #[arg(long, default_value_t = 3)]
    k: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Formula {
    Ndvi,
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[arg(long)]
    raster: PathBuf,
    #[arg(long, value_enum, default_value_t = Formula::Ndvi)]
    formula: Formula,
    /// 1-based NIR band number.
    #[arg(long)]
    nir: usize,
    /// 1-based red band number.
    #[arg(long)]
    red: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AssessArgs {
    /// Reference (ground-truth) points.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Predicted labels for the same points, row for row.
    #[arg(long, conflicts_with = "map", required_unless_present = "map")]
    pred: Option<PathBuf>,
    /// Read predictions from this class map at the reference points instead.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Output CSV. Default: standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ChangeArgs {
    /// Yearly class maps as YEAR=PATH, at least two.
    #[arg(long = "map", value_name = "YEAR=PATH", required = true)]
    maps: Vec<String>,
    /// Region polygons JSON. Default: the whole map as one region.
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Classes to report (ids or names, comma separated).
    #[arg(long, value_delimiter = ',', default_value = "Built Area,Crops")]
    focus: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the first-to-last-year transition matrix.
    #[arg(long)]
    transitions: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ZonalArgs {
    /// Class maps as YEAR=PATH.
    #[arg(long = "map", value_name = "YEAR=PATH", required = true)]
    maps: Vec<String>,
    #[arg(long)]
    regions: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Sort {
    Input,
    Asc,
    Desc,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Change report CSV written by `lulc change`.
    #[arg(long)]
    change: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Sort::Input)]
    sort: Sort,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    /// Scene spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Base path for the generated multiband scene.
    #[arg(long)]
    out: PathBuf,
    /// Base path for the ground-truth class map.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also write one ground-truth map per year into --series-dir.
    #[arg(long, value_delimiter = ',')]
    years: Vec<i32>,
    #[arg(long, default_value_t = BUILT_AREA)]
    grow_class: u8,
    #[arg(long, default_value_t = 1)]
    margin: usize,
    #[arg(long)]
    series_dir: Option<PathBuf>,
}

type CliResult<T = ()> = Result<T, Error>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let legend = match &cli.legend {
        Some(p) => io::read_legend(p)?,
        None => ClassLegend::canonical(),
    };
    let workers = Workers::from_count(cli.workers);
    match cli.command {
        Command::Sample(a) => sample(a, &legend),
        Command::Train(a) => train(a, &legend),
        Command::Classify(a) => classify(a, &legend, workers),
        Command::Index(a) => index(a, workers),
        Command::Assess(a) => assess(a, &legend),
        Command::Change(a) => change_cmd(a, &legend, workers),
        Command::Zonal(a) => zonal(a, &legend, workers),
        Command::Report(a) => report_cmd(a),
        Command::Fixture(a) => fixture(a),
    }
}

fn resolve_classes(legend: &ClassLegend, keys: &[String]) -> CliResult<Vec<u8>> {
    keys.iter()
        .map(|k| {
            legend
                .resolve(k)
                .ok_or_else(|| Error::Validation(format!("unknown class {k:?}")))
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sample(a: SampleArgs, legend: &ClassLegend) -> CliResult {
    let map = read_class_map(&a.map, legend)?;
    let plan_legend = if a.classes.is_empty() {
        legend.clone()
    } else {
        let ids = resolve_classes(legend, &a.classes)?;
        ClassLegend::new(
            ids.iter()
                .map(|&id| (id, legend.name_of(id).unwrap().to_string()))
                .collect(),
        )?
    };
    let exclude = match &a.exclude {
        Some(p) => read_samples(p, legend)?,
        None => Vec::new(),
    };
    let plan = SamplePlan::new(a.n_per_class, a.seed, plan_legend)?;
    let points = stratified_random_points_excluding(&map, &plan, &exclude)?;
    write_samples(&points, &a.out)
}

fn parse_ndvi_bands(s: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').collect();
    let band = |p: &str| -> CliResult<usize> {
        match p.trim().parse::<usize>() {
            Ok(b) if b >= 1 => Ok(b - 1),
            _ => Err(Error::Config(format!("bad band number {p:?} in --ndvi"))),
        }
    };
    match parts.as_slice() {
        [nir, red] => Ok((band(nir)?, band(red)?)),
        _ => Err(Error::Config("--ndvi expects NIR,RED".into())),
    }
}

fn train(a: TrainArgs, legend: &ClassLegend) -> CliResult {
    let samples = read_samples(&a.samples, legend)?;
    let raster = read_raster(&a.raster)?;
    let features = FeatureOptions {
        ndvi: a.ndvi.as_deref().map(parse_ndvi_bands).transpose()?,
    };
    let opts = ExtractOptions {
        strict: a.strict_samples,
        features,
    };
    let (fm, skipped) = extract_training(&raster, &samples, legend, opts)?;
    if !skipped.outside.is_empty() {
        eprintln!(
            "warning: {} sample(s) outside the raster were skipped",
            skipped.outside.len()
        );
    }
    if !skipped.nodata.is_empty() {
        eprintln!(
            "warning: {} sample(s) on nodata pixels were skipped",
            skipped.nodata.len()
        );
    }
    let ridge = a.ridge.map_or(Ridge::default(), Ridge::Absolute);
    let model = train_max_likelihood(&fm, ridge)?;
    for c in model.sparse_classes() {
        eprintln!("warning: class {c} has fewer samples than features + 1; its covariance is ridge-dominated");
    }
    model.save(&a.out)
}

fn classify(a: ClassifyArgs, legend: &ClassLegend, workers: Workers) -> CliResult {
    let raster = read_raster(&a.raster)?;
    let map = match a.method {
        Method::Ml => {
            let path = a
                .model
                .as_ref()
                .ok_or_else(|| Error::Config("--model is required for --method ml".into()))?;
            let model = GaussianClassModel::load(path)?;
            predict_with(&model, &raster, workers)?
        }
        Method::Knn => {
            let path = a
                .samples
                .as_ref()
                .ok_or_else(|| Error::Config("--samples is required for --method knn".into()))?;
            let samples = read_samples(path, legend)?;
            let (fm, _) = extract_training(&raster, &samples, legend, ExtractOptions::default())?;
            knn_predict_with(&fm, &raster, a.k, workers)?
        }
    };
    write_class_map(&map, &a.out)
}

fn index(a: IndexArgs, workers: Workers) -> CliResult {
    let raster = read_raster(&a.raster)?;
    let band = |b: usize, flag: &str| {
        if b == 0 {
            Err(Error::Config(format!("--{flag} band numbers start at 1")))
        } else {
            Ok(b - 1)
        }
    };
    let out = match a.formula {
        Formula::Ndvi => {
            spectral::normalized_difference_with(&raster, band(a.nir, "nir")?, &raster, band(a.red, "red")?, workers)?
        }
    };
    write_raster(out.grid(), &a.out)
}

fn assess(a: AssessArgs, legend: &ClassLegend) -> CliResult {
    let reference = read_samples(&a.reference, legend)?;
    let predicted: Vec<u8> = if let Some(p) = &a.pred {
        let pred = read_samples(p, legend)?;
        if pred.len() != reference.len() {
            return Err(Error::Validation(format!(
                "{} reference points but {} predictions",
                reference.len(),
                pred.len()
            )));
        }
        if let Some(i) = reference.iter().zip(&pred).position(|(r, p)| r.x != p.x || r.y != p.y) {
            return Err(Error::Validation(format!(
                "row {} of the two point files is at different coordinates",
                i + 1
            )));
        }
        pred.iter().map(|p| p.class_id).collect()
    } else {
        let map = read_class_map(a.map.as_ref().unwrap(), legend)?;
        let grid = map.grid();
        reference
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (col, row) = grid
                    .map_to_pixel(s.x, s.y)?
                    .ok_or_else(|| Error::Validation(format!("reference point {} lies outside the map", i + 1)))?;
                map.class_at(row * grid.width() + col)
                    .ok_or_else(|| Error::Validation(format!("reference point {} falls on a nodata pixel", i + 1)))
            })
            .collect::<CliResult<_>>()?
    };
    let labels: Vec<u8> = reference.iter().map(|s| s.class_id).collect();
    let cm = confusion_matrix(&labels, &predicted, legend)?;
    let table = report::accuracy_table_csv(&cm);
    match &a.out {
        Some(p) => write_text(p, &table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn parse_year_maps(specs: &[String], legend: &ClassLegend) -> CliResult<Vec<(i32, ClassMap)>> {
    specs
        .iter()
        .map(|s| {
            let (year, path) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--map expects YEAR=PATH, got {s:?}")))?;
            let year = year
                .trim()
                .parse::<i32>()
                .map_err(|_| Error::Config(format!("bad year in {s:?}")))?;
            Ok((year, read_class_map(Path::new(path), legend)?))
        })
        .collect()
}

fn whole_map_region(map: &ClassMap) -> CliResult<RegionPolygon> {
    let g = map.grid();
    let corners = [
        (0.0, 0.0),
        (g.width() as f64, 0.0),
        (g.width() as f64, g.height() as f64),
        (0.0, g.height() as f64),
        (0.0, 0.0),
    ];
    let ring = corners
        .iter()
        .map(|&(px, py)| {
            let (x, y) = g.geotransform().apply(px, py);
            [x, y]
        })
        .collect();
    RegionPolygon::new("all", "All", vec![ring])
}

fn change_cmd(a: ChangeArgs, legend: &ClassLegend, workers: Workers) -> CliResult {
    let maps = parse_year_maps(&a.maps, legend)?;
    if maps.len() < 2 {
        return Err(Error::Validation("change needs at least two --map YEAR=PATH".into()));
    }
    let regions = match &a.regions {
        Some(p) => io::read_regions(p)?,
        None => vec![whole_map_region(&maps[0].1)?],
    };
    let focus = resolve_classes(legend, &a.focus)?;
    let report = change::change_series_with(&maps, &regions, &focus, workers)?;
    write_text(&a.out, &report::change_report_csv(&report))?;
    if let Some(p) = &a.transitions {
        let tm = change::transition_matrix(&maps[0].1, &maps[maps.len() - 1].1)?;
        if tm.excluded > 0 {
            eprintln!("note: {} pixel(s) nodata in either map were excluded", tm.excluded);
        }
        write_text(p, &report::transition_csv(&tm))?;
    }
    Ok(())
}

fn zonal(a: ZonalArgs, legend: &ClassLegend, workers: Workers) -> CliResult {
    let maps = parse_year_maps(&a.maps, legend)?;
    let regions = io::read_regions(&a.regions)?;
    let mut all = change::ZonalAreaTable::default();
    for (year, map) in &maps {
        let t = change::zonal_class_area_with(map, &regions, *year, workers)?;
        for r in &t.empty_regions {
            eprintln!("warning: region {r} covers no pixel of the {year} map");
        }
        all.rows.extend(t.rows);
        all.empty_regions.extend(t.empty_regions);
    }
    write_text(&a.out, &report::zonal_csv(&all, legend))
}

fn report_cmd(a: ReportArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.change).map_err(|source| Error::Io {
        path: a.change.clone(),
        source,
    })?;
    let parsed = report::parse_change_report_csv(&text)?;
    let sort = match a.sort {
        Sort::Input => SortOrder::Input,
        Sort::Asc => SortOrder::Ascending,
        Sort::Desc => SortOrder::Descending,
    };
    std::fs::create_dir_all(&a.out_dir).map_err(|source| Error::Io {
        path: a.out_dir.clone(),
        source,
    })?;
    for (name, spec) in report::change_charts(&parsed, sort)? {
        emit_bar_chart(&spec, &a.out_dir.join(name))?;
    }
    Ok(())
}

fn fixture(a: FixtureArgs) -> CliResult {
    let spec: SceneSpec = io::read_json(&a.spec)?;
    let (scene, truth) = generate_scene(&spec)?;
    write_raster(&scene, &a.out)?;
    if let Some(t) = &a.truth {
        write_class_map(&truth, t)?;
    }
    if !a.years.is_empty() {
        let dir = a
            .series_dir
            .as_ref()
            .ok_or_else(|| Error::Config("--years requires --series-dir".into()))?;
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        let rule = GrowthRule {
            class_id: a.grow_class,
            margin_per_year: a.margin,
        };
        let series = generate_growth_series(&spec, &a.years, rule)?;
        for (year, i) in &series.clipped {
            eprintln!("note: rectangle {i} clipped at the raster edge in {year}");
        }
        for (year, map) in &series.maps {
            write_class_map(map, &dir.join(format!("truth_{year}")))?;
        }
    }
    Ok(())
}
