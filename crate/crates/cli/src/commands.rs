use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use reifen::beta::{beta, jones, BetaRecord, JonesRecord, Objective};
use reifen::ccbp::{check_one_sided_flat_capped, Ccbp, CoherenceReport, OneSidedReport};
use reifen::diagnostics::{predict_and_verify, PipelineReport};
use reifen::generators::{
    cantor_c1s, flat_sample, graph_fixture, haar_graph, punch_holes, snowflake, AngleSequence, CantorSpec, CoefficientLaw,
    GapSequence, Generated, GraphKind, HaarGraphSpec, Metadata, Signs, SnowflakeSpec,
};
use reifen::geometry::Ball;
use reifen::io::{read_binary, read_csv, write_cloud, Format};
use reifen::net::NetRecord;
use reifen::param::{distortion_report, sigma0_point, surface_mesh, DistortionReport, GridSpec};
use reifen::{build_net, Normalization, PointCloud, RunConfig};
use serde::Serialize;

use crate::args::{BetaArgs, Cli, Command, Common, Fixture, FormatArg, GenArgs, LawArg, ObjectiveArg, ParamArgs, RegularityArgs};
use crate::artifact::{sha256_hex, sibling, write_json, Artifact, SCHEMA_VERSION};
use crate::failure::Failure;

pub fn run(cli: Cli) -> Result<(), Failure> {
    let config = resolve_config(&cli.common)?;
    if config.threads > 0 {
        // Only fails when a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global();
    }
    let format = cli.common.format;
    match cli.command {
        Command::Gen(args) => gen(&args, &config),
        Command::Net => net(&config, format),
        Command::Beta(args) => beta_tables(&args, &config, format),
        Command::CcbpCheck => ccbp_check(&config, format),
        Command::Param(args) => param(&args, &config, format),
        Command::Regularity(args) => regularity(&args, &config, format),
    }
}

/// `--config` file, then flag overrides, then validation.
pub fn resolve_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text).map_err(|e| Failure::config(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    if common.input.is_some() {
        config.input = common.input.clone();
    }
    if common.output.is_some() {
        config.output = common.output.clone();
    }
    if let Some(v) = common.eps {
        config.eps = v;
    }
    if let Some(v) = common.alpha {
        config.alpha = v;
    }
    if common.gamma.is_some() {
        config.gamma = common.gamma;
    }
    if let Some(v) = common.k {
        config.k = v;
    }
    if let Some(v) = common.fit_radius {
        config.fit_radius = v;
    }
    if let Some(v) = common.tolerance {
        config.tolerance = v;
    }
    if common.min_distance.is_some() {
        config.min_distance = common.min_distance;
    }
    if let Some(v) = common.seed {
        config.seed = v;
    }
    if let Some(v) = common.threads {
        config.threads = v;
    }
    if common.n.is_some() {
        config.n = common.n;
    }
    if common.d.is_some() {
        config.d = common.d;
    }
    config.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(config)
}

struct Loaded {
    cloud: PointCloud,
    hash: String,
}

fn load(config: &RunConfig, format: Option<FormatArg>) -> Result<Loaded, Failure> {
    let path = config
        .input
        .as_ref()
        .ok_or_else(|| Failure::config("no input: pass --input or set `input` in the config"))?;
    let bytes = fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let format = match format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Binary) => Format::Binary,
        None => Format::from_path(path),
    };
    let cloud = match format {
        Format::Csv => read_csv(&bytes[..]),
        Format::Binary => read_binary(&bytes[..]),
    }?;
    config.check_dimensions(cloud.n(), cloud.d())?;
    Ok(Loaded {
        cloud,
        hash: sha256_hex(&bytes),
    })
}

fn output_path(config: &RunConfig, default: &str) -> PathBuf {
    config.output.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn emit<T: Serialize>(path: &Path, command: &str, config: &RunConfig, hash: &str, result: T) -> Result<(), Failure> {
    write_json(
        path,
        &Artifact {
            schema_version: SCHEMA_VERSION,
            command,
            config,
            input_sha256: hash,
            result,
        },
    )
}

fn parse_hole(text: &str) -> Result<Ball, Failure> {
    let bad = || Failure::config(format!("hole must be `x1,...,xn:r`, got {text:?}"));
    let (center, radius) = text.split_once(':').ok_or_else(bad)?;
    let center: Vec<f64> = center
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let radius: f64 = radius.trim().parse().map_err(|_| bad())?;
    Ok(Ball::new(DVector::from_vec(center), radius)?)
}

fn generate(fixture: &Fixture, config: &RunConfig) -> Result<Generated, Failure> {
    Ok(match fixture {
        Fixture::Snowflake {
            alpha_seq,
            depth,
            samples,
            smoothing,
        } => {
            let angles: AngleSequence = alpha_seq.parse()?;
            let mut spec = SnowflakeSpec::new(angles, *depth, *samples);
            if let Some(s) = smoothing {
                spec.smoothing = *s;
            }
            snowflake(&spec)?.generated
        }
        Fixture::Haar {
            law,
            depth,
            grid,
            amplitude,
            random_signs,
        } => {
            let law = match law {
                LawArg::Holder => CoefficientLaw::Holder { alpha: config.alpha },
                LawArg::LogLipschitz => CoefficientLaw::LogLipschitz,
            };
            let signs = if *random_signs { Signs::Seeded { seed: config.seed } } else { Signs::Positive };
            let spec = HaarGraphSpec {
                law,
                depth: *depth,
                grid: *grid,
                amplitude: *amplitude,
                signs,
            };
            haar_graph(&spec)?.generated
        }
        Fixture::Cantor {
            s,
            q,
            depth,
            grid,
            amplitude,
        } => {
            let spec = CantorSpec {
                s: *s,
                gaps: GapSequence::Power { q: *q },
                depth: *depth,
                grid: *grid,
                amplitude: *amplitude,
            };
            cantor_c1s(&spec)?.generated
        }
        Fixture::Sawtooth { slope, teeth, count } => graph_fixture(&GraphKind::Sawtooth { slope: *slope, teeth: *teeth }, *count)?,
        Fixture::Bump { height, width, count } => graph_fixture(&GraphKind::SmoothBump { height: *height, width: *width }, *count)?,
        Fixture::Flat { side, offset, jitter } => {
            let (n, d) = (config.n.unwrap_or(2), config.d.unwrap_or(1));
            let cloud = flat_sample(n, d, *side, *offset, jitter.then_some(config.seed))?;
            let spec = serde_json::json!({ "n": n, "d": d, "side": side, "offset": offset, "jitter": jitter.then_some(config.seed) });
            Generated {
                cloud,
                meta: Metadata {
                    generator: "flat_sample".into(),
                    spec,
                    diagnostics: Default::default(),
                    regularity: Some("affine".into()),
                    holes: Vec::new(),
                },
            }
        }
    })
}

fn fixture_name(fixture: &Fixture) -> &'static str {
    match fixture {
        Fixture::Snowflake { .. } => "snowflake",
        Fixture::Haar { .. } => "haar",
        Fixture::Cantor { .. } => "cantor",
        Fixture::Sawtooth { .. } => "sawtooth",
        Fixture::Bump { .. } => "bump",
        Fixture::Flat { .. } => "flat",
    }
}

fn gen(args: &GenArgs, config: &RunConfig) -> Result<(), Failure> {
    let mut generated = generate(&args.fixture, config)?;
    if !args.holes.is_empty() {
        let balls = args.holes.iter().map(|h| parse_hole(h)).collect::<Result<Vec<_>, _>>()?;
        let holed = punch_holes(&generated.cloud, &balls)?;
        generated.cloud = holed.cloud;
        generated.meta.holes = holed.meta.holes;
    }
    let name = fixture_name(&args.fixture);
    let default = if args.binary { format!("{name}.bin") } else { format!("{name}.csv") };
    let path = output_path(config, &default);
    let format = if args.binary { Format::Binary } else { Format::from_path(&path) };
    write_cloud(&generated.cloud, &path, format).map_err(|e| Failure::output(&path, e))?;
    let meta_path = sibling(&path, "json");
    let recipe = serde_json::to_vec(&(&generated.meta.generator, &generated.meta.spec, &generated.meta.holes))
        .map_err(|e| Failure::output(&meta_path, e))?;
    emit(&meta_path, "gen", config, &sha256_hex(&recipe), &generated.meta)?;
    println!("wrote {} ({} points) and {}", path.display(), generated.cloud.len(), meta_path.display());
    Ok(())
}

#[derive(Serialize)]
struct NetOutput {
    normalization: Normalization,
    points: usize,
    sizes: Vec<usize>,
    net: NetRecord,
}

fn net(config: &RunConfig, format: Option<FormatArg>) -> Result<(), Failure> {
    let loaded = load(config, format)?;
    let (cloud, normalization) = loaded.cloud.normalized();
    let net = build_net(&cloud, config.k);
    let path = output_path(config, "net.json");
    let result = NetOutput {
        normalization,
        points: cloud.len(),
        sizes: (0..=net.max_scale()).map(|k| net.len(k)).collect(),
        net: net.to_record(),
    };
    emit(&path, "net", config, &loaded.hash, &result)?;
    println!("net sizes {:?} -> {}", result.sizes, path.display());
    Ok(())
}

#[derive(Serialize)]
struct BetaOutput {
    normalization: Normalization,
    objective: Objective,
    betas: Vec<BetaRecord>,
    jones: Vec<JonesRecord>,
}

fn beta_tables(args: &BetaArgs, config: &RunConfig, format: Option<FormatArg>) -> Result<(), Failure> {
    let loaded = load(config, format)?;
    let (cloud, normalization) = loaded.cloud.normalized();
    let objective = match args.objective {
        ObjectiveArg::Sup => Objective::Sup,
        ObjectiveArg::L1 => Objective::L1,
        ObjectiveArg::L2 => Objective::L2,
    };
    let finest = config.k.min(cloud.finest_resolved_scale());
    let stride = cloud.len().div_ceil(config.samples.beta).max(1);
    let indices: Vec<usize> = (0..cloud.len()).step_by(stride).collect();
    let rows = indices
        .par_iter()
        .map(|&i| {
            let x = cloud.point(i);
            let betas = (0..=finest)
                .map(|k| beta(&cloud, x, k, objective))
                .collect::<reifen::Result<Vec<_>>>()?;
            let jones = jones(&cloud, x, config.alpha, objective, config.k, config.gamma)?;
            Ok((betas, jones))
        })
        .collect::<reifen::Result<Vec<_>>>()?;
    let (betas, jones): (Vec<Vec<BetaRecord>>, Vec<JonesRecord>) = rows.into_iter().unzip();
    let betas: Vec<BetaRecord> = betas.into_iter().flatten().collect();

    let path = output_path(config, "beta.json");
    let header: String = (0..cloud.n()).map(|a| format!("x{a},")).collect::<String>() + "k,p,value";
    let mut table = header.clone() + "\n";
    for b in &betas {
        row(&mut table, &b.x, b.k, objective, b.value);
    }
    let beta_csv = sibling(&path, "beta.csv");
    fs::write(&beta_csv, table).map_err(|e| Failure::output(&beta_csv, e))?;
    let mut table = header + "\n";
    for j in &jones {
        row(&mut table, &j.x, j.finest_k, objective, j.value);
    }
    let jones_csv = sibling(&path, "jones.csv");
    fs::write(&jones_csv, table).map_err(|e| Failure::output(&jones_csv, e))?;
    let result = BetaOutput {
        normalization,
        objective,
        betas,
        jones,
    };
    emit(&path, "beta", config, &loaded.hash, &result)?;
    println!(
        "{} β values at {} points -> {}, {}, {}",
        result.betas.len(),
        result.jones.len(),
        path.display(),
        beta_csv.display(),
        jones_csv.display()
    );
    Ok(())
}

fn row(table: &mut String, x: &[f64], k: usize, objective: Objective, value: f64) {
    for v in x {
        write!(table, "{v},").expect("writing to a String");
    }
    writeln!(table, "{k},{objective},{value}").expect("writing to a String");
}

#[derive(Serialize)]
struct CcbpOutput {
    normalization: Normalization,
    flatness: OneSidedReport,
    coherence: CoherenceReport,
    net_sizes: Vec<usize>,
    inherited_planes: usize,
    passes: bool,
}

fn ccbp_check(config: &RunConfig, format: Option<FormatArg>) -> Result<(), Failure> {
    let loaded = load(config, format)?;
    let (cloud, normalization) = loaded.cloud.normalized();
    let flatness = check_one_sided_flat_capped(&cloud, config.eps, config.k, config.samples.flatness_cap)?;
    let net = build_net(&cloud, config.k);
    let net_sizes = (0..=net.max_scale()).map(|k| net.len(k)).collect::<Vec<_>>();
    let ccbp = Ccbp::assemble(&cloud, net, config.ccbp())?;
    let coherence = ccbp.validate();
    let inherited_planes = net_sizes
        .iter()
        .enumerate()
        .map(|(k, &m)| (0..m).filter(|&j| ccbp.is_inherited(k, j)).count())
        .sum();
    let passes = flatness.passes && coherence.passes();
    let path = output_path(config, "ccbp.json");
    let (flat_defect, coherence_defect) = (flatness.max_defect, coherence.max_defect);
    let abort = (!flatness.passes).then(|| Box::new(flatness.clone()));
    emit(
        &path,
        "ccbp-check",
        config,
        &loaded.hash,
        &CcbpOutput {
            normalization,
            flatness,
            coherence,
            net_sizes,
            inherited_planes,
            passes,
        },
    )?;
    println!("one-sided defect {flat_defect:.3e}, coherence defect {coherence_defect:.3e} -> {}", path.display());
    if let Some(report) = abort {
        return Err(reifen::Error::FlatnessAbort {
            max_defect: flat_defect,
            eps: config.eps,
            report,
        }
        .into());
    }
    if !passes {
        return Err(Failure::flatness(format!(
            "CCBP coherence defect {coherence_defect:.3e} exceeds the budget; see {}",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ParamOutput {
    normalization: Normalization,
    grid: GridSpec,
    mesh_file: PathBuf,
    vertices: usize,
    /// Min and max of `|f_K(a) - f_K(b)| / |a - b|` over grid edges.
    edge_ratio_range: (f64, f64),
    distortion: DistortionReport,
}

fn parse_grid(text: &str) -> Result<GridSpec, Failure> {
    let bad = || Failure::config(format!("grid must be `lo:hi:count`, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].trim().parse().map_err(|_| bad())?;
    let hi = parts[1].trim().parse().map_err(|_| bad())?;
    let count = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(GridSpec::new(lo, hi, count)?)
}

fn param(args: &ParamArgs, config: &RunConfig, format: Option<FormatArg>) -> Result<(), Failure> {
    let grid = parse_grid(&args.grid)?;
    let loaded = load(config, format)?;
    let (cloud, normalization) = loaded.cloud.normalized();
    if cloud.d() > 2 {
        return Err(Failure::config(format!("meshes support d <= 2, input has d = {}", cloud.d())));
    }
    let cloud = Arc::new(cloud);
    let net = build_net(&cloud, config.k);
    let ccbp = Ccbp::assemble_lazy(Arc::clone(&cloud), net, config.ccbp())?;
    let mesh = surface_mesh(&ccbp, grid, config.k)?;
    let path = output_path(config, "param.json");
    let mesh_file = sibling(&path, if mesh.d == 1 { "csv" } else { "obj" });
    let mut buf = Vec::new();
    if mesh.d == 1 {
        mesh.write_polyline_csv(&mut buf)?;
    } else {
        mesh.write_obj(&mut buf)?;
    }
    fs::write(&mesh_file, buf).map_err(|e| Failure::output(&mesh_file, e))?;
    let stride = mesh.params.len().div_ceil(config.samples.base_points).max(1);
    let samples = mesh
        .params
        .iter()
        .step_by(stride)
        .map(|p| sigma0_point(&ccbp, p))
        .collect::<reifen::Result<Vec<_>>>()?;
    let distortion = distortion_report(&ccbp, &samples, config.k)?;
    let ratios = mesh.edge_ratios();
    let edge_ratio_range = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let vertices = mesh.vertices.len();
    emit(
        &path,
        "param",
        config,
        &loaded.hash,
        &ParamOutput {
            normalization,
            grid,
            mesh_file: mesh_file.clone(),
            vertices,
            edge_ratio_range,
            distortion,
        },
    )?;
    println!("{vertices} vertices -> {}, {}", mesh_file.display(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct Exponents {
    forward: Option<f64>,
    inverse: Option<f64>,
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum RegularityOutput {
    Ok {
        /// Measured Hölder exponents `η̂` of `Df_K` and of the inverse derivative.
        eta_hat: Exponents,
        pass: bool,
        report: Box<PipelineReport>,
    },
    FlatnessAbort {
        max_defect: f64,
        flatness: Box<OneSidedReport>,
    },
}

fn regularity(args: &RegularityArgs, config: &RunConfig, format: Option<FormatArg>) -> Result<(), Failure> {
    let loaded = load(config, format)?;
    let path = output_path(config, "regularity.json");
    match predict_and_verify(&loaded.cloud, &config.pipeline()) {
        Ok(report) => {
            if let Some(bins) = &args.bins_csv {
                let mut table = String::from("target,distance,max_increment,pairs\n");
                for (target, fit) in [("forward", &report.forward.fit), ("inverse", &report.inverse.fit)] {
                    for b in &fit.bins {
                        writeln!(table, "{target},{},{},{}", b.distance, b.max_increment, b.pairs).expect("writing to a String");
                    }
                }
                fs::write(bins, table).map_err(|e| Failure::output(bins, e))?;
            }
            let eta_hat = Exponents {
                forward: report.forward.fit.exponent,
                inverse: report.inverse.fit.exponent,
            };
            let pass = report.passes();
            let show = |e: Option<f64>| e.map_or("constant".to_string(), |v| format!("{v:.3}"));
            println!(
                "η̂ forward {} inverse {} (α = {}): {} -> {}",
                show(eta_hat.forward),
                show(eta_hat.inverse),
                config.alpha,
                if pass { "pass" } else { "fail" },
                path.display()
            );
            emit(
                &path,
                "regularity",
                config,
                &loaded.hash,
                RegularityOutput::Ok {
                    eta_hat,
                    pass,
                    report: Box::new(report),
                },
            )
        }
        Err(reifen::Error::FlatnessAbort { max_defect, eps, report }) => {
            emit(
                &path,
                "regularity",
                config,
                &loaded.hash,
                RegularityOutput::FlatnessAbort {
                    max_defect,
                    flatness: report.clone(),
                },
            )?;
            Err(reifen::Error::FlatnessAbort { max_defect, eps, report }.into())
        }
        Err(e) => Err(e.into()),
    }
}
