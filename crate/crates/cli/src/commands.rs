use std::fmt::Write as _;
use std::io;
use std::path::Path;

use modix_core::json::{self, format_f64, Fixed};
use modix_core::stride::{clamp_stride, compute_stride};
use modix_core::{
    analyze, generate_synthetic, load_sequence, plan, reconstruct_indices, run_seeds, save_sequence,
    seqio::encode_sequence, AnalysisConfig, ContributionReport, Error, HarnessSpec, Modality, MultimodalSequence,
    PositionPlan, RotaryConfig,
};
use serde::Serialize;

use crate::args::{AnalyzeArgs, GenArgs, OutputFormat, RescaleArgs, SimulateArgs, SourceArgs, StrideChoice, SweepArgs};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn load_source(source: &SourceArgs) -> Result<MultimodalSequence> {
    match (&source.input, &source.synthetic) {
        (Some(path), _) => load_sequence(path).map_err(|e| with_path(e, path)),
        (None, Some(spec)) => Ok(generate_synthetic(spec)?),
        (None, None) => Err(CliError::Usage("one of --input or --synthetic is required".into())),
    }
}

fn with_path(e: Error, path: &Path) -> CliError {
    match e {
        Error::Io(io) => CliError::Io(io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other.into(),
    }
}

fn reject_format(format: OutputFormat, command: &str) -> CliError {
    let name = match format {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
        OutputFormat::BinaryIndices => "binary-indices",
    };
    CliError::Usage(format!("{command} cannot write --format {name}"))
}

pub fn analyze_cmd(args: &AnalyzeArgs) -> Result<Vec<u8>> {
    let seq = load_source(&args.source)?;
    let report = analyze(&seq, &args.analysis.config())?;
    match args.output.format {
        OutputFormat::Json => Ok(report.to_json().into_bytes()),
        OutputFormat::Csv => {
            let mut out = String::from("field,value\n");
            for (name, value) in report.fields() {
                writeln!(out, "{name},{}", format_f64(value)).unwrap();
            }
            Ok(out.into_bytes())
        }
        f => Err(reject_format(f, "analyze")),
    }
}

pub fn rescale_cmd(args: &RescaleArgs) -> Result<Vec<u8>> {
    let seq = load_source(&args.source)?;
    let config = args.analysis.config();
    let positions = match args.delta_override {
        Some(delta) => reconstruct_indices(&seq.layout(), delta)?,
        None => plan(&seq, &config)?.1,
    };
    Ok(match args.output.format {
        OutputFormat::Json => positions.to_json().into_bytes(),
        OutputFormat::Csv => plan_csv(&positions).into_bytes(),
        OutputFormat::BinaryIndices => positions.to_le_bytes(),
    })
}

fn plan_csv(p: &PositionPlan) -> String {
    let mut out = String::from("token,modality,position\n");
    for (i, (m, x)) in p.token_modalities().into_iter().zip(&p.indices).enumerate() {
        writeln!(out, "{i},{m},{}", format_f64(*x)).unwrap();
    }
    out
}

#[derive(Serialize)]
struct RotaryDoc {
    head_dim: usize,
    #[serde(serialize_with = "json::serialize_f64")]
    base: f64,
    frozen: bool,
}

#[derive(Serialize)]
struct SimulateDoc {
    rotary: RotaryDoc,
    runs: Vec<modix_core::harness::HarnessReport>,
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<Vec<u8>> {
    let seq = load_source(&args.source)?;
    let spec = HarnessSpec {
        n_t: seq.token_count(Modality::Text),
        n_v: seq.token_count(Modality::Vision),
        head_dim: args.head_dim,
        content_mode: args.content.into(),
        causal: args.causal,
        seeds: args.seeds.0.clone(),
    };
    spec.validate()?;
    let rotary = if args.no_rotation {
        RotaryConfig::frozen(args.head_dim)?
    } else {
        RotaryConfig::new(args.head_dim, args.rope_base)?
    };

    let needs_auto = args.strides.0.contains(&StrideChoice::Auto);
    let auto = if needs_auto { Some(plan(&seq, &args.analysis.config())?.1.delta_vision) } else { None };

    let mut runs = Vec::with_capacity(args.strides.0.len());
    for choice in &args.strides.0 {
        let delta = match choice {
            StrideChoice::Auto => auto.expect("computed above"),
            StrideChoice::Fixed(d) => *d,
        };
        let positions = reconstruct_indices(&spec.layout(), delta)?;
        runs.push(run_seeds(&spec, &positions, &rotary)?);
    }

    match args.output.format {
        OutputFormat::Json => {
            let doc = SimulateDoc {
                rotary: RotaryDoc { head_dim: args.head_dim, base: args.rope_base, frozen: args.no_rotation },
                runs,
            };
            Ok(json::to_string(&doc).expect("diagnostics serialize").into_bytes())
        }
        OutputFormat::Csv => {
            let mut out = String::from("stride,mean_vision_mass\n");
            for r in &runs {
                writeln!(out, "{},{}", format_f64(r.delta_vision), format_f64(r.mean_last_text_mass().vision)).unwrap();
            }
            Ok(out.into_bytes())
        }
        f => Err(reject_format(f, "simulate")),
    }
}

#[derive(Serialize)]
struct SweepRow {
    alpha: Fixed,
    delta_vision: Fixed,
    report: ContributionReport,
}

#[derive(Serialize)]
struct SweepDoc {
    rows: Vec<SweepRow>,
}

/// One report per alpha; the pathway scores are computed once and only re-fused.
pub fn sweep_rows(
    seq: &MultimodalSequence,
    base: &AnalysisConfig,
    alphas: &[f64],
) -> Result<Vec<(f64, ContributionReport, f64)>> {
    if let Some(&bad) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::AlphaOutOfRange(bad).into());
    }
    let first = analyze(seq, base)?;
    alphas
        .iter()
        .map(|&alpha| {
            let report = ContributionReport::from_parts(first.intra, first.inter, alpha, base.epsilon)?;
            let delta = clamp_stride(compute_stride(&report)?, base.stride_bounds);
            Ok((alpha, report, delta))
        })
        .collect()
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<Vec<u8>> {
    let seq = load_source(&args.source)?;
    let rows = sweep_rows(&seq, &args.analysis.config(), &args.alphas.0)?;
    match args.output.format {
        OutputFormat::Json => {
            let doc = SweepDoc {
                rows: rows
                    .into_iter()
                    .map(|(alpha, report, delta)| SweepRow { alpha: Fixed(alpha), delta_vision: Fixed(delta), report })
                    .collect(),
            };
            Ok(json::to_string(&doc).expect("sweep serializes").into_bytes())
        }
        OutputFormat::Csv => {
            let mut out = String::from("alpha,c_tilde_text,c_tilde_vision,delta_vision\n");
            for (alpha, r, delta) in &rows {
                let cells = [*alpha, r.c_tilde.text, r.c_tilde.vision, *delta].map(format_f64);
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
            Ok(out.into_bytes())
        }
        f => Err(reject_format(f, "sweep")),
    }
}

pub fn gen_cmd(args: &GenArgs) -> Result<Vec<u8>> {
    let seq = generate_synthetic(&args.spec())?;
    match &args.output {
        Some(path) => {
            save_sequence(&seq, path).map_err(|e| with_path(e, path))?;
            Ok(Vec::new())
        }
        None => Ok(encode_sequence(&seq)?),
    }
}
