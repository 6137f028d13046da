//! `afis`: extract, match, enroll, verify, evaluate, benchmark and generate
//! synthetic fingerprints from the command line.
//!
//! Exit status: 0 success or accept, 1 reject, 2 usage or domain error,
//! 3 I/O failure. CSV goes to stdout, everything else to stderr.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afis::enrollstore::{self, StoreError, SubjectId};
use afis::evalkit::{
    ascii_chart, benchmark, emit_report, percentages, poor_vs_improved, score_detection,
    synth_fingerprint, GroundTruth, Report, SynthParams,
};
use afis::matcher::MatchResult;
use afis::preprocess::intensity_profile;
use afis::raster::{binary_to_raster, load_image, save_image, RasterImage, SaveFormat};
use afis::template::{parse, serialize};
use afis::{image_to_template, match_templates, Decision};
use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use config::{Settings, Tuning};

#[derive(Parser)]
#[command(
    name = "afis",
    version,
    about = "Fingerprint minutiae templates and matching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Subcommand)]
enum Command {
    /// Build a template file from an image.
    Extract {
        input: PathBuf,
        output: PathBuf,
        /// Also write the four preprocessing stages as PGM files here.
        #[arg(long)]
        dump_stages: Option<PathBuf>,
    },
    /// Compare two template files.
    Match { a: PathBuf, b: PathBuf },
    /// Enroll a subject's image into a template store.
    Enroll {
        store: PathBuf,
        id: String,
        image: PathBuf,
        /// Replace an existing enrollment.
        #[arg(long)]
        overwrite: bool,
    },
    /// Check an image against a subject's stored template.
    Verify {
        store: PathBuf,
        id: String,
        image: PathBuf,
    },
    /// Score detection on a corpus against `.gt` ground-truth files.
    Evaluate {
        corpus: PathBuf,
        truth: PathBuf,
        /// Directory receiving table1, table2, fig2 and fig3 CSVs.
        report: PathBuf,
    },
    /// Measure file sizes and timings of the image and template paths.
    Bench {
        corpus: PathBuf,
        /// Directory receiving fig4 and fig5 CSVs.
        report: PathBuf,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        /// Exit 1 if any image/template size ratio falls below this.
        #[arg(long)]
        min_ratio: Option<f64>,
    },
    /// Write synthetic fingerprints (P3) with matching `.gt` files.
    Synth {
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        count: u64,
        #[arg(long, default_value_t = 300)]
        width: u32,
        #[arg(long, default_value_t = 300)]
        height: u32,
        #[arg(long, default_value_t = 9)]
        ridge_period: u32,
        #[arg(long, default_value_t = 4)]
        endings: usize,
        #[arg(long, default_value_t = 3)]
        bifurcations: usize,
        #[arg(long, default_value_t = 0.0)]
        noise_rate: f64,
    },
}

enum Failure {
    Domain(anyhow::Error),
    Io(anyhow::Error),
}

type Outcome = Result<ExitCode, Failure>;

fn domain<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Domain(e.into())
}

fn io_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Io(e.into())
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(_) => Failure::Io(e.into()),
            _ => Failure::Domain(e.into()),
        }
    }
}

/// Input files that cannot be read count as bad input.
fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(domain)
}

fn load(path: &Path) -> Result<RasterImage, Failure> {
    load_image(&read_input(path)?)
        .with_context(|| format!("{} is not a usable image", path.display()))
        .map_err(domain)
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(io_err)
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(io_err)
}

fn print_stdout(bytes: &[u8]) -> Result<(), Failure> {
    std::io::stdout().write_all(bytes).map_err(io_err)
}

fn report_match(r: &MatchResult) -> Outcome {
    print_stdout(format!("{}\n{}\n", MatchResult::CSV_HEADER, r.csv_row()).as_bytes())?;
    eprintln!(
        "{} of {}/{} minutiae matched, eq {:.4}: {}",
        r.matched, r.n_a, r.n_b, r.eq, r.decision
    );
    Ok(match r.decision {
        Decision::Accept => ExitCode::SUCCESS,
        Decision::Reject => ExitCode::from(1),
    })
}

fn cmd_extract(s: &Settings, input: &Path, output: &Path, dump: Option<&Path>) -> Outcome {
    let img = load(input)?;
    let ex = image_to_template(&img, &s.pipeline).map_err(domain)?;
    write_output(output, &serialize(&ex.template))?;
    if let Some(dir) = dump {
        create_dir(dir)?;
        let stages = ex.stages.as_array();
        for (k, (name, stage)) in afis::preprocess::Stages::NAMES
            .iter()
            .zip(stages)
            .enumerate()
        {
            let path = dir.join(format!("{}_{name}.pgm", k + 1));
            write_output(
                &path,
                &save_image(&binary_to_raster(stage), SaveFormat::P2FromLuma),
            )?;
        }
    }
    eprintln!(
        "{} minutiae ({} in region) -> {}",
        ex.all.len(),
        ex.selected.len(),
        output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_match(s: &Settings, a: &Path, b: &Path) -> Outcome {
    let ta = parse(&read_input(a)?)
        .with_context(|| a.display().to_string())
        .map_err(domain)?;
    let tb = parse(&read_input(b)?)
        .with_context(|| b.display().to_string())
        .map_err(domain)?;
    report_match(&match_templates(&ta, &tb, &s.matching).map_err(domain)?)
}

fn subject(id: &str) -> Result<SubjectId, Failure> {
    Ok(SubjectId::new(id)?)
}

fn cmd_enroll(s: &Settings, store: &Path, id: &str, image: &Path, overwrite: bool) -> Outcome {
    let id = subject(id)?;
    let bytes = read_input(image)?;
    let img = load_image(&bytes)
        .with_context(|| format!("{} is not a usable image", image.display()))
        .map_err(domain)?;
    let rec =
        enrollstore::register_sized(store, &id, &img, bytes.len() as u64, &s.pipeline, overwrite)?;
    eprintln!(
        "enrolled {} ({} image bytes -> {} template bytes)",
        rec.subject, rec.source_image_bytes, rec.template_bytes
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(s: &Settings, store: &Path, id: &str, image: &Path) -> Outcome {
    let id = subject(id)?;
    let img = load(image)?;
    report_match(&enrollstore::verify(store, &id, &img, &s.matching)?)
}

/// Image files directly inside `dir`, sorted by name.
fn corpus_images(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir)
        .with_context(|| format!("cannot read corpus {}", dir.display()))
        .map_err(domain)?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(io_err)?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if ["ppm", "pgm", "pnm"].contains(&ext.to_ascii_lowercase().as_str()) {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(domain(anyhow!(
            "no .ppm/.pgm/.pnm images in {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn emit_to(report: &Report, path: &Path) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    emit_report(report, &mut buf).map_err(io_err)?;
    write_output(path, &buf)?;
    Ok(buf)
}

fn cmd_evaluate(s: &Settings, corpus: &Path, truth_dir: &Path, report: &Path) -> Outcome {
    let images = corpus_images(corpus)?;
    let (mut t1, mut t2, mut f2, mut f3) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut skipped = Vec::new();
    for path in &images {
        let id = stem(path);
        let gt_path = truth_dir.join(format!("{id}.gt"));
        let Ok(text) = fs::read_to_string(&gt_path) else {
            log::warn!(
                "no ground truth {} for {}; skipped",
                gt_path.display(),
                path.display()
            );
            skipped.push(id);
            continue;
        };
        let truth = GroundTruth::parse(&text)
            .with_context(|| gt_path.display().to_string())
            .map_err(domain)?;
        let img = load(path)?;
        let ex = image_to_template(&img, &s.pipeline).map_err(domain)?;
        let row = score_detection(&ex.selected, &truth, s.match_radius);
        match percentages(&row) {
            Ok(p) => t2.push((id.clone(), p)),
            Err(e) => log::warn!("{id}: {e}; left out of table2"),
        }
        t1.push((id.clone(), row));
        let (poor, improved) = poor_vs_improved(&img, &s.pipeline.preprocess).map_err(domain)?;
        f2.push((id.clone(), poor, improved));
        f3.push((
            id,
            intensity_profile(&ex.stages.as_array(), &img).map_err(domain)?,
        ));
    }
    if t1.is_empty() {
        return Err(domain(anyhow!(
            "every image lacked ground truth: {}",
            skipped.join(", ")
        )));
    }
    if !skipped.is_empty() {
        eprintln!("skipped without ground truth: {}", skipped.join(", "));
    }
    create_dir(report)?;
    let table1 = emit_to(
        &Report::Table1 {
            match_radius: s.match_radius,
            rows: t1,
        },
        &report.join("table1.csv"),
    )?;
    emit_to(&Report::Table2(t2), &report.join("table2.csv"))?;
    let fig2 = Report::Fig2(f2);
    emit_to(&fig2, &report.join("fig2.csv"))?;
    emit_to(&Report::Fig3(f3), &report.join("fig3.csv"))?;
    eprint!("{}", ascii_chart(&fig2, 40));
    print_stdout(&table1)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(
    s: &Settings,
    corpus: &Path,
    report: &Path,
    reps: usize,
    min_ratio: Option<f64>,
) -> Outcome {
    let images = corpus_images(corpus)?;
    let mut rows = Vec::new();
    for path in &images {
        let row = benchmark(path, &s.pipeline, &s.matching, reps).map_err(|e| match e {
            afis::evalkit::EvalError::Io(_) => io_err(e),
            _ => domain(e),
        })?;
        rows.push((stem(path), row));
    }
    create_dir(report)?;
    let low: Vec<String> = rows
        .iter()
        .filter(|(_, r)| {
            min_ratio.is_some_and(|m| (r.image_bytes as f64) < m * r.template_bytes as f64)
        })
        .map(|(id, _)| id.clone())
        .collect();
    let fig4 = Report::Fig4(rows.clone());
    let fig5 = Report::Fig5(rows);
    let sizes = emit_to(&fig4, &report.join("fig4.csv"))?;
    emit_to(&fig5, &report.join("fig5.csv"))?;
    eprint!("{}{}", ascii_chart(&fig4, 40), ascii_chart(&fig5, 40));
    print_stdout(&sizes)?;
    if !low.is_empty() {
        eprintln!(
            "size ratio below {} for: {}",
            min_ratio.unwrap_or_default(),
            low.join(", ")
        );
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    s: &Settings,
    out: &Path,
    count: u64,
    width: u32,
    height: u32,
    ridge_period: u32,
    endings: usize,
    bifurcations: usize,
    noise_rate: f64,
) -> Outcome {
    create_dir(out)?;
    for k in 0..count {
        let params = SynthParams {
            seed: s.seed + k,
            width,
            height,
            ridge_period,
            n_endings: endings,
            n_bifurcations: bifurcations,
            noise_rate,
        };
        let (img, mut truth) = synth_fingerprint(&params).map_err(domain)?;
        let id = format!("synth_{:03}", k);
        truth.image_id = id.clone();
        write_output(
            &out.join(format!("{id}.ppm")),
            &save_image(&img, SaveFormat::P3),
        )?;
        write_output(&out.join(format!("{id}.gt")), truth.to_text().as_bytes())?;
    }
    eprintln!("wrote {count} images to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Outcome {
    let s = cli.tuning.resolve().map_err(domain)?;
    match cli.command {
        Command::Extract {
            input,
            output,
            dump_stages,
        } => cmd_extract(&s, &input, &output, dump_stages.as_deref()),
        Command::Match { a, b } => cmd_match(&s, &a, &b),
        Command::Enroll {
            store,
            id,
            image,
            overwrite,
        } => cmd_enroll(&s, &store, &id, &image, overwrite),
        Command::Verify { store, id, image } => cmd_verify(&s, &store, &id, &image),
        Command::Evaluate {
            corpus,
            truth,
            report,
        } => cmd_evaluate(&s, &corpus, &truth, &report),
        Command::Bench {
            corpus,
            report,
            repetitions,
            min_ratio,
        } => cmd_bench(&s, &corpus, &report, repetitions, min_ratio),
        Command::Synth {
            out,
            count,
            width,
            height,
            ridge_period,
            endings,
            bifurcations,
            noise_rate,
        } => cmd_synth(
            &s,
            &out,
            count,
            width,
            height,
            ridge_period,
            endings,
            bifurcations,
            noise_rate,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
