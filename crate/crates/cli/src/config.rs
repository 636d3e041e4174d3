//! Job configuration files.
//!
//! A job is a TOML document with the sections `[program]`, `[target]`,
//! `[synth]`, `[coefficients]` and `[output]`. Every binary32 quantity is
//! written as a hexadecimal floating-point string so that it is read back
//! bit-exactly; the ulp tolerance is an exact decimal or fraction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hornfit::funcspec::{AcceptanceOracle, JuffaOracle, RefFn, UlpOracle};
use hornfit::program::{Form, HornerSkeleton};
use hornfit::rational::{self, BigRational};
use hornfit::softfp::{F32Interval, F32};
use hornfit::synth::{SampleRule, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub program: ProgramSection,
    pub target: TargetSection,
    #[serde(default)]
    pub synth: SynthSection,
    /// Known coefficient values by label.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub coefficients: BTreeMap<String, String>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramSection {
    /// `odd`, `even_plus_one` or `plain`.
    pub form: String,
    /// Coefficient labels, highest degree first (the Horner order).
    pub labels: Vec<String>,
    /// Labels in the order the heuristic fixes them; defaults to lowest
    /// degree first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixing_order: Option<Vec<String>>,
    /// Per-coefficient `[lo, hi]` overriding the default `[-1, 1]`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub boxes: BTreeMap<String, [String; 2]>,
    /// Name of the emitted C function.
    #[serde(default = "default_function_name")]
    pub function_name: String,
}

fn default_function_name() -> String {
    "poly".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    /// `sin`, `atan` or `identity`.
    pub function: String,
    /// Ulp tolerance, e.g. `"0.65"` or `"13/20"`.
    pub k: String,
    pub domain: [String; 2],
    /// `none` or `juffa`.
    #[serde(default = "default_reconstruction")]
    pub reconstruction: String,
}

fn default_reconstruction() -> String {
    "none".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub seed: u64,
    pub branching: usize,
    pub sample_rule: String,
    pub outer_iteration_limit: usize,
    pub inner_restart_limit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_test_points: Option<Vec<String>>,
}

impl Default for SynthSection {
    fn default() -> SynthSection {
        SynthSection {
            seed: 1,
            branching: 4,
            sample_rule: SampleRule::TwoUniformAverage.name().to_string(),
            outer_iteration_limit: 1000,
            inner_restart_limit: 64,
            initial_test_points: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
}

/// Parses a binary32 hexadecimal literal, rejecting decimal notation.
pub fn parse_hex(s: &str) -> Result<F32, CliError> {
    let t = s.trim();
    let body = t.strip_prefix(['-', '+']).unwrap_or(t);
    if !(body.starts_with("0x") || body.starts_with("0X")) {
        return Err(CliError::Config(format!(
            "`{s}` is not a hexadecimal floating-point literal"
        )));
    }
    let v: F32 = t
        .parse()
        .map_err(|e: hornfit::Error| CliError::Config(e.to_string()))?;
    if !v.is_finite() {
        return Err(CliError::Config(format!("`{s}` is not finite")));
    }
    Ok(v)
}

/// Everything a command needs, checked and converted.
pub struct Job {
    pub config: JobConfig,
    pub skeleton: HornerSkeleton,
    pub function: RefFn,
    pub k: BigRational,
    pub domain: F32Interval,
    pub juffa: bool,
    pub known: BTreeMap<usize, F32>,
}

impl JobConfig {
    pub fn from_toml(text: &str) -> Result<JobConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Reads a job file. Relative `[output]` paths are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<JobConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = JobConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let out = &mut cfg.output;
        for p in [&mut out.coefficients, &mut out.report, &mut out.source]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn resolve(self) -> Result<Job, CliError> {
        let cfg = |e: hornfit::Error| CliError::Config(e.to_string());
        let form: Form = self.program.form.parse().map_err(cfg)?;
        let skeleton = HornerSkeleton::new(form, self.program.labels.clone()).map_err(cfg)?;
        let function = RefFn::from_name(&self.target.function).map_err(cfg)?;
        let k = rational::parse_rational(&self.target.k).map_err(cfg)?;
        if k <= BigRational::from_integer(0.into()) {
            return Err(CliError::Config("k must be positive".into()));
        }
        let domain = F32Interval::new(
            parse_hex(&self.target.domain[0])?,
            parse_hex(&self.target.domain[1])?,
        )
        .map_err(|_| CliError::Config("domain endpoints are out of order".into()))?;
        let juffa = match self.target.reconstruction.as_str() {
            "none" => false,
            "juffa" => true,
            other => {
                return Err(CliError::Config(format!(
                    "unknown reconstruction `{other}`"
                )))
            }
        };
        if juffa && function != RefFn::Atan {
            return Err(CliError::Config(
                "the juffa reconstruction needs function = \"atan\"".into(),
            ));
        }
        let mut known = BTreeMap::new();
        for (label, value) in &self.coefficients {
            known.insert(skeleton.index_of(label).map_err(cfg)?, parse_hex(value)?);
        }
        let job = Job {
            config: self,
            skeleton,
            function,
            k,
            domain,
            juffa,
            known,
        };
        job.synth_config()?;
        Ok(job)
    }
}

impl Job {
    pub fn oracle(&self) -> Box<dyn AcceptanceOracle> {
        if self.juffa {
            Box::new(JuffaOracle::new(self.k.clone(), self.domain))
        } else {
            Box::new(UlpOracle::new(self.function, self.k.clone(), self.domain))
        }
    }

    pub fn synth_config(&self) -> Result<SynthConfig, CliError> {
        let cfg = |e: hornfit::Error| CliError::Config(e.to_string());
        let skel = &self.skeleton;
        let s = &self.config.synth;
        let mut out = SynthConfig::new(skel);
        if let Some(order) = &self.config.program.fixing_order {
            out.fixing_order = order
                .iter()
                .map(|l| skel.index_of(l))
                .collect::<Result<_, _>>()
                .map_err(cfg)?;
        }
        for (label, [lo, hi]) in &self.config.program.boxes {
            let k = skel.index_of(label).map_err(cfg)?;
            out.boxes[k] = (parse_hex(lo)?.to_rational(), parse_hex(hi)?.to_rational());
        }
        out.rng_seed = s.seed;
        out.branching = s.branching;
        out.sample_rule = SampleRule::from_name(&s.sample_rule).map_err(cfg)?;
        out.outer_iteration_limit = s.outer_iteration_limit;
        out.inner_restart_limit = s.inner_restart_limit;
        if let Some(pts) = &s.initial_test_points {
            let pts = pts
                .iter()
                .map(|p| parse_hex(p))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(p) = pts.iter().find(|p| !self.domain.contains(**p)) {
                return Err(CliError::Config(format!(
                    "test point {p} lies outside the domain"
                )));
            }
            out.initial_test_points = Some(pts);
        }
        out.validate(skel).map_err(cfg)?;
        Ok(out)
    }

    /// All coefficient values, from `extra` first and then the config.
    pub fn full_coefficients(&self, extra: &BTreeMap<usize, F32>) -> Result<Vec<F32>, CliError> {
        (0..self.skeleton.num_coeffs())
            .map(|k| {
                extra
                    .get(&k)
                    .or_else(|| self.known.get(&k))
                    .copied()
                    .ok_or_else(|| {
                        CliError::Config(format!(
                            "no value for coefficient `{}`",
                            self.skeleton.labels()[k]
                        ))
                    })
            })
            .collect()
    }
}
