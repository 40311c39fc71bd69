use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lumisphere::crop::crop_resize;
use lumisphere::fixture::{make_fixture, write_fixture, FixtureRequest, LightingPlan};
use lumisphere::io::{load_rgb, save_gray_png};
use lumisphere::pipeline::{analysis_frame, run_batch, PipelineOptions};
use lumisphere::report::{build_report, emit_report, within_from_records};
use lumisphere::schema::{read_json, to_json_string, AnnotationDoc, CropBox, RecordsDoc, Report};
use lumisphere::workspace::Workspace;
use lumisphere::{server, Error};
use lumisphere_core::analysis::{cross_set_report_with, CrossSetPairing, PairOrientation};
use lumisphere_core::circle::{fit_circle_em, EmParams};
use lumisphere_core::estimate::{estimate_all_channels, normalize_env, EstimateOptions};
use lumisphere_core::render::{render_sphere, shared_scale, RenderSpec};
use lumisphere_core::sh::LABELS;
use lumisphere_core::{Circle, LightingEnv};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "lumisphere",
    version,
    about = "Lighting consistency from imaged matte spheres"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct FitFlags {
    /// EM parameters as JSON.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Edge threshold as a fraction of the maximum gradient.
    #[arg(long)]
    tau: Option<f64>,
    /// Uniform outlier likelihood.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl FitFlags {
    fn params(&self, default: EmParams) -> anyhow::Result<EmParams> {
        let mut p = match &self.params {
            Some(path) => read_json(path)?,
            None => default,
        };
        if let Some(t) = self.tau {
            p.edge_threshold = t;
        }
        if let Some(e) = self.epsilon {
            p.epsilon = e;
        }
        p.validate().map_err(Error::from)?;
        Ok(p)
    }
}

#[derive(Args)]
struct Output {
    /// Write to this directory instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

impl Output {
    fn emit(&self, name: &str, json: String, csv: impl FnOnce() -> anyhow::Result<String>) -> anyhow::Result<()> {
        let (text, ext) = match self.format {
            Format::Json => (json, "json"),
            Format::Csv => (csv()?, "csv"),
        };
        match &self.out {
            None => print!("{text}"),
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("{name}.{ext}"));
                std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit circles to the annotated spheres of an image.
    Fit {
        image: PathBuf,
        #[arg(long)]
        annotation: PathBuf,
        #[command(flatten)]
        fit: FitFlags,
        #[command(flatten)]
        output: Output,
    },
    /// Estimate lighting environments inside a known circle.
    Estimate {
        image: PathBuf,
        /// Circle as `cx,cy,r` in the (cropped) analysis frame.
        #[arg(long)]
        circle: String,
        /// Crop box as `x,y,w,h`; the crop is resized to 600x600 first.
        #[arg(long)]
        crop: Option<String>,
        #[arg(long, default_value_t = 2)]
        stride: usize,
        /// Undo a 2.2 display gamma before sampling.
        #[arg(long)]
        linearize: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Render a sphere lit by an environment.
    Render {
        /// Nine coefficients, as a JSON array file or a comma-separated list.
        env: String,
        #[arg(long, default_value_t = 512)]
        size: usize,
        /// Second environment sharing the display scale.
        #[arg(long)]
        shared: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        background: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write seeded synthetic scenes into a workspace.
    Fixture {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of scenes, seeds `seed..seed+count`.
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 5)]
        spheres: usize,
        #[arg(long, value_enum, default_value = "shared")]
        lighting: Lighting,
        /// Distinct environments for `--lighting mixed`.
        #[arg(long, default_value_t = 2)]
        environments: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Workspace directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Consistency statistics over stored records.
    Analyze {
        #[command(subcommand)]
        which: Analyze,
    },
    /// Run every annotated image of a workspace and write the report.
    Report {
        workspace: PathBuf,
        #[command(flatten)]
        fit: FitFlags,
        #[arg(long, default_value_t = 2)]
        stride: usize,
        /// Report directory; defaults to `<workspace>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a workspace to the review UI.
    Serve {
        workspace: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Lighting {
    Shared,
    Mixed,
    PerSphere,
}

#[derive(Subcommand)]
enum Analyze {
    /// Compare the normalized environments of two record sets.
    Cross {
        set_a: PathBuf,
        set_b: PathBuf,
        #[arg(long, value_enum, default_value = "medians")]
        pairing: Pairing,
        #[command(flatten)]
        output: Output,
    },
    /// Pairwise comparison of spheres sharing an image.
    Within {
        records: PathBuf,
        /// Keep only one orientation of each pair.
        #[arg(long)]
        single: bool,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Pairing {
    Medians,
    IndexPaired,
}

fn parse_floats<const N: usize>(text: &str, what: &str) -> anyhow::Result<[f64; N]> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("{what} must be {N} comma-separated numbers"))?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| anyhow::anyhow!("{what} needs {N} numbers, got {}", v.len()))
}

fn parse_env(text: &str) -> anyhow::Result<LightingEnv> {
    let path = Path::new(text);
    if path.exists() {
        return Ok(read_json(path)?);
    }
    Ok(LightingEnv(parse_floats::<9>(text, "environment")?))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FitLine {
    image_id: String,
    sphere: usize,
    #[serde(flatten)]
    fit: lumisphere_core::circle::FitResult,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Estimate {
    channels: lumisphere_core::estimate::ChannelLighting,
    normalized: lumisphere_core::NormalizedLighting,
}

fn fit(image: &Path, annotation: &Path, flags: &FitFlags, output: &Output) -> anyhow::Result<()> {
    let params = flags.params(EmParams::default())?;
    let img = load_rgb(image)?;
    let annotations = read_json::<AnnotationDoc>(annotation)?.into_vec();
    let mut lines = Vec::new();
    for (sphere, a) in annotations.iter().enumerate() {
        let frame = analysis_frame(&img, a)?;
        let fit = fit_circle_em(&frame, &a.approx, &params)
            .map_err(Error::from)
            .with_context(|| format!("sphere {sphere} of {}", a.image_id))?;
        lines.push(FitLine {
            image_id: a.image_id.clone(),
            sphere,
            fit,
        });
    }
    output.emit("fit", to_json_string(&lines), || {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "imageId",
            "sphere",
            "cx",
            "cy",
            "r",
            "iterations",
            "finalSigma",
            "converged",
            "inlierMass",
        ])?;
        for l in &lines {
            let c = l.fit.circle;
            w.write_record([
                l.image_id.clone(),
                l.sphere.to_string(),
                c.cx.to_string(),
                c.cy.to_string(),
                c.r.to_string(),
                l.fit.iterations.to_string(),
                l.fit.final_sigma.to_string(),
                l.fit.converged.to_string(),
                l.fit.inlier_mass.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    })
}

fn estimate(
    image: &Path,
    circle: &str,
    crop: Option<&str>,
    opts: EstimateOptions,
    output: &Output,
) -> anyhow::Result<()> {
    let [cx, cy, r] = parse_floats::<3>(circle, "circle")?;
    let circle = Circle::new(cx, cy, r).map_err(Error::from)?;
    let mut img = load_rgb(image)?;
    if let Some(text) = crop {
        let [x, y, w, h] = parse_floats::<4>(text, "crop")?.map(|v| v as u32);
        img = crop_resize(&img, &CropBox { x, y, w, h })?;
    }
    let channels = estimate_all_channels(&img, &circle, &opts).map_err(Error::from)?;
    let normalized = normalize_env(&channels.gray).map_err(Error::from)?;
    let result = Estimate { channels, normalized };
    output.emit("estimate", to_json_string(&result), || {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["channel".to_string()];
        header.extend(LABELS.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for (name, env) in lumisphere_core::estimate::ChannelLighting::NAMES
            .iter()
            .zip(channels.as_array())
        {
            let mut row = vec![name.to_string()];
            row.extend(env.coeffs().iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    })
}

fn render(env: &str, size: usize, shared: Option<&str>, background: f64, out: &Path) -> anyhow::Result<()> {
    let env = parse_env(env)?;
    let base = RenderSpec {
        background,
        ..RenderSpec::centered(size)
    };
    let own = render_sphere(&env, &base).map_err(Error::from)?;
    let spec = match shared {
        None => base,
        Some(other) => {
            let other = render_sphere(&parse_env(other)?, &base).map_err(Error::from)?;
            RenderSpec {
                shared_scale: shared_scale(&[own.clone(), other]),
                ..base
            }
        }
    };
    let rendering = render_sphere(&env, &spec).map_err(Error::from)?;
    if rendering.clamped_pixels > 0 {
        eprintln!(
            "{} pixels had negative radiance and were clamped",
            rendering.clamped_pixels
        );
    }
    save_gray_png(out, &rendering.display())?;
    Ok(())
}

fn fixture(
    seed: u64,
    count: u64,
    spheres: usize,
    lighting: Lighting,
    environments: usize,
    noise: f64,
    out: &Path,
) -> anyhow::Result<()> {
    let ws = Workspace::create(out)?;
    let plan = match lighting {
        Lighting::Shared => LightingPlan::Shared,
        Lighting::Mixed => LightingPlan::Mixed { count: environments },
        Lighting::PerSphere => LightingPlan::PerSphere,
    };
    for s in seed..seed + count {
        let scene = make_fixture(&FixtureRequest {
            seed: s,
            spheres,
            lighting: plan.clone(),
            noise_std: noise,
            ..FixtureRequest::default()
        })?;
        write_fixture(&ws, &scene)?;
        eprintln!("wrote {}", scene.image_id());
    }
    Ok(())
}

fn records(path: &Path) -> anyhow::Result<Vec<lumisphere::schema::ImageRecord>> {
    Ok(read_json::<RecordsDoc>(path)?.into_records())
}

fn analyze(which: &Analyze) -> anyhow::Result<()> {
    match which {
        Analyze::Cross {
            set_a,
            set_b,
            pairing,
            output,
        } => {
            let norm = |p: &Path| -> anyhow::Result<Vec<_>> { Ok(records(p)?.iter().map(|r| r.normalized).collect()) };
            let pairing = match pairing {
                Pairing::Medians => CrossSetPairing::Medians,
                Pairing::IndexPaired => CrossSetPairing::IndexPaired,
            };
            let report = cross_set_report_with(&norm(set_a)?, &norm(set_b)?, pairing).map_err(Error::from)?;
            output.emit("cross", to_json_string(&report), || {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["coefficient", "aQ35", "aQ50", "aQ65", "bQ35", "bQ50", "bQ65"])?;
                for (k, (a, b)) in report.set_a.iter().zip(&report.set_b).enumerate() {
                    w.write_record([
                        LABELS[k + 1].to_string(),
                        a.q35.to_string(),
                        a.q50.to_string(),
                        a.q65.to_string(),
                        b.q35.to_string(),
                        b.q50.to_string(),
                        b.q65.to_string(),
                    ])?;
                }
                Ok(String::from_utf8(w.into_inner()?)?)
            })
        }
        Analyze::Within {
            records: path,
            single,
            output,
        } => {
            let orientation = if *single {
                PairOrientation::Single
            } else {
                PairOrientation::Mirrored
            };
            let Some(report) = within_from_records(&records(path)?, orientation)? else {
                bail!("no image in {} has two spheres", path.display());
            };
            output.emit("within", to_json_string(&report), || {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["order", "first", "second"])?;
                for (order, points) in report.points_by_order.iter().enumerate() {
                    for (a, b) in points {
                        w.write_record([order.to_string(), a.to_string(), b.to_string()])?;
                    }
                }
                Ok(String::from_utf8(w.into_inner()?)?)
            })
        }
    }
}

fn report(workspace: &Path, flags: &FitFlags, stride: usize, out: Option<&Path>) -> anyhow::Result<()> {
    let ws = Workspace::open(workspace)?;
    let opts = PipelineOptions {
        em: flags.params(ws.params()?)?,
        estimate: EstimateOptions {
            stride,
            ..EstimateOptions::default()
        },
    };
    let outcome = run_batch(&ws, &opts)?;
    let sets = ws.sets()?;
    let report: Report = build_report(outcome.records(), outcome.failures(), sets.as_ref())?;
    let dir = out.map_or_else(|| ws.root().join("report"), Path::to_path_buf);
    if report.records.is_empty() {
        eprintln!("no sphere could be processed; see failures below");
        eprint!("{}", to_json_string(&report.failures));
        return Err(Error::EmptyInput.into());
    }
    let paths = emit_report(&report, &dir)?;
    eprintln!(
        "{} spheres, {} failures; wrote {} and {}",
        report.records.len(),
        report.failures.len(),
        paths[0].display(),
        paths[1].display()
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Fit {
            image,
            annotation,
            fit: flags,
            output,
        } => fit(&image, &annotation, &flags, &output),
        Command::Estimate {
            image,
            circle,
            crop,
            stride,
            linearize,
            output,
        } => estimate(
            &image,
            &circle,
            crop.as_deref(),
            EstimateOptions {
                stride,
                linearize_gamma: linearize,
            },
            &output,
        ),
        Command::Render {
            env,
            size,
            shared,
            background,
            out,
        } => render(&env, size, shared.as_deref(), background, &out),
        Command::Fixture {
            seed,
            count,
            spheres,
            lighting,
            environments,
            noise,
            out,
        } => fixture(seed, count, spheres, lighting, environments, noise, &out),
        Command::Analyze { which } => analyze(&which),
        Command::Report {
            workspace,
            fit: flags,
            stride,
            out,
        } => report(&workspace, &flags, stride, out.as_deref()),
        Command::Serve { workspace, addr } => {
            let ws = Workspace::open(workspace)?;
            let rt = tokio::runtime::Runtime::new().context("starting the async runtime")?;
            rt.block_on(server::serve(ws, addr))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
