use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modix_core::{AnalysisConfig, ContentMode, GeneratorSpec, NormalizationMode, StrideBounds};

#[derive(Debug, Parser)]
#[command(name = "modix", version, about = "Information-driven positional index rescaling for multimodal sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate per-modality contributions and print the report.
    Analyze(AnalyzeArgs),
    /// Derive the vision stride and emit rescaled position indices.
    Rescale(RescaleArgs),
    /// Run the rotary attention harness over a grid of vision strides.
    Simulate(SimulateArgs),
    /// Re-fuse the contributions at several alpha values.
    #[command(alias = "sweep-alpha")]
    Sweep(SweepArgs),
    /// Write a synthetic MEMB sequence.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// MEMB file to read.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Generate the sequence instead, e.g. "n_t=8,n_v=32,d=16,vision_rank=2,seed=1".
    #[arg(long, value_name = "SPEC")]
    pub synthetic: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    /// Fusion weight on the intra-modal pathway.
    #[arg(long, env = "MODIX_ALPHA", default_value_t = 0.5)]
    pub alpha: f64,
    /// Ridge added to each covariance before the log-determinant.
    #[arg(long, env = "MODIX_EPSILON", default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Entropy normalization: `shift` (min-max with floor) or `raw` (plain ratio).
    #[arg(long, default_value = "shift")]
    pub normalization: NormalizationMode,
    #[arg(long, default_value_t = 1e-6)]
    pub clamp_floor: f64,
    /// Above this dimension, modalities with fewer tokens than d use the Gram path.
    #[arg(long, default_value_t = 512)]
    pub gram_threshold: usize,
    /// Clamp the derived vision stride to "MIN,MAX".
    #[arg(long, value_name = "MIN,MAX", value_parser = parse_bounds)]
    pub stride_bounds: Option<StrideBounds>,
}

impl AnalysisArgs {
    pub fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            alpha: self.alpha,
            epsilon: self.epsilon,
            normalization_mode: self.normalization,
            clamp_floor: self.clamp_floor,
            gram_threshold: self.gram_threshold,
            stride_bounds: self.stride_bounds,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    BinaryIndices,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RescaleArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Skip analysis and use this vision stride directly.
    #[arg(long, value_name = "DELTA")]
    pub delta_override: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Comma-separated vision strides; `auto` uses the stride derived from the input.
    #[arg(long, required = true, value_name = "LIST", value_parser = parse_strides)]
    pub strides: StrideList,
    /// Seeds as "a..b" (half-open), "a..=b", or a comma list.
    #[arg(long, default_value = "0..50", value_parser = parse_seeds)]
    pub seeds: SeedList,
    #[arg(long, default_value_t = 64)]
    pub head_dim: usize,
    #[arg(long, default_value_t = 10_000.0)]
    pub rope_base: f64,
    /// Set every rotary frequency to zero.
    #[arg(long)]
    pub no_rotation: bool,
    #[arg(long, value_enum, default_value_t = ContentArg::Tied)]
    pub content: ContentArg,
    /// Causal mask; vision tokens are placed before text.
    #[arg(long)]
    pub causal: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Comma-separated alpha values, each in [0, 1].
    #[arg(long, value_name = "LIST", default_value = "0,0.25,0.5,0.75,1", value_parser = parse_reals)]
    pub alphas: RealList,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n_t: usize,
    #[arg(long)]
    pub n_v: usize,
    #[arg(long)]
    pub d: usize,
    /// Rank of the vision subspace; defaults to d.
    #[arg(long)]
    pub vision_rank: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub text_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

impl GenArgs {
    pub fn spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            n_t: self.n_t,
            n_v: self.n_v,
            d: self.d,
            text_scale: self.text_scale,
            vision_rank: self.vision_rank.unwrap_or(self.d),
            noise: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContentArg {
    Tied,
    Random,
}

impl From<ContentArg> for ContentMode {
    fn from(c: ContentArg) -> Self {
        match c {
            ContentArg::Tied => ContentMode::Tied,
            ContentArg::Random => ContentMode::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrideChoice {
    Auto,
    Fixed(f64),
}

// Newtypes so clap treats each list as one value instead of a repeated flag.
#[derive(Debug, Clone, PartialEq)]
pub struct StrideList(pub Vec<StrideChoice>);

#[derive(Debug, Clone, PartialEq)]
pub struct SeedList(pub Vec<u64>);

#[derive(Debug, Clone, PartialEq)]
pub struct RealList(pub Vec<f64>);

fn split_list(s: &str) -> Result<Vec<&str>, String> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        return Err("list must not be empty".into());
    }
    Ok(items)
}

fn parse_real(s: &str) -> Result<f64, String> {
    let x = f64::from_str(s).map_err(|_| format!("`{s}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

pub fn parse_reals(s: &str) -> Result<RealList, String> {
    split_list(s)?.into_iter().map(parse_real).collect::<Result<_, _>>().map(RealList)
}

pub fn parse_strides(s: &str) -> Result<StrideList, String> {
    split_list(s)?
        .into_iter()
        .map(|t| {
            if t.eq_ignore_ascii_case("auto") {
                Ok(StrideChoice::Auto)
            } else {
                parse_real(t).map(StrideChoice::Fixed)
            }
        })
        .collect::<Result<_, _>>()
        .map(StrideList)
}

pub fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let seed = |t: &str| u64::from_str(t.trim()).map_err(|_| format!("`{t}` is not a seed"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (seed(a)?..=seed(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (seed(a)?..seed(b)?).collect()
    } else {
        split_list(s)?.into_iter().map(seed).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("`{s}` selects no seeds"));
    }
    Ok(SeedList(seeds))
}

pub fn parse_bounds(s: &str) -> Result<StrideBounds, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected MIN,MAX, got `{s}`"))?;
    let (min, max) = (parse_real(a.trim())?, parse_real(b.trim())?);
    if !(min > 0.0 && min <= max) {
        return Err(format!("bounds need 0 < MIN <= MAX, got {min},{max}"));
    }
    Ok(StrideBounds { min, max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_forms() {
        assert_eq!(parse_seeds("0..3").unwrap().0, vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=4").unwrap().0, vec![2, 3, 4]);
        assert_eq!(parse_seeds("7, 1,9").unwrap().0, vec![7, 1, 9]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn stride_lists() {
        assert_eq!(
            parse_strides("0.5,auto,2").unwrap().0,
            vec![StrideChoice::Fixed(0.5), StrideChoice::Auto, StrideChoice::Fixed(2.0)]
        );
        assert!(parse_strides("").is_err());
        assert!(parse_strides(" , ").is_err());
        assert!(parse_strides("inf").is_err());
    }

    #[test]
    fn bounds() {
        assert_eq!(parse_bounds("0.1,10").unwrap(), StrideBounds { min: 0.1, max: 10.0 });
        assert!(parse_bounds("2,1").is_err());
        assert!(parse_bounds("0,1").is_err());
        assert!(parse_bounds("1").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
