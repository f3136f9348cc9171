//! Plain-text run configuration.
//!
//! One `section.key = value` per line, `#` starts a comment. Losses are in dB
//! (keys ending in `_db`), extinction lists are comma separated and accept
//! `-inf`. Every key is optional except `link.scheme`, `link.dimension` and
//! `source.mean_photon_number`; unknown or repeated keys are errors.
//!
//! ```text
//! link.scheme = fmf_lantern
//! link.dimension = 2
//! link.target_diagonal = 0.951
//! source.mean_photon_number = 0.4
//! lanterns.insertion_loss_db = 6.5
//! lanterns.loss_reading = per_pair
//! lantern_demux.extinction_db = -14.6, -16.2
//! lantern_demux.crosstalk_phase = random
//! fiber.length_km = 0.5
//! fiber.excess_loss_db = 1.09
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::components::{CrosstalkPhase, DetectorModel, FiberSpan, LanternModel, SourceModel};
use crate::experiments::fits::{with_target_diagonal, NamedFit, FMF_LOSS_DB_PER_KM};
use crate::protocol::{ArchitectureConfig, LanternPair, Scheme};
use crate::{Error, Result};

const KEYS: &[&str] = &[
    "run.fit",
    "run.seed",
    "run.output_dir",
    "link.scheme",
    "link.dimension",
    "link.visibility",
    "link.target_diagonal",
    "source.mean_photon_number",
    "lanterns.insertion_loss_db",
    "lanterns.loss_reading",
    "lantern_mux.insertion_loss_db",
    "lantern_mux.extinction_db",
    "lantern_mux.crosstalk_phase",
    "lantern_demux.insertion_loss_db",
    "lantern_demux.extinction_db",
    "lantern_demux.crosstalk_phase",
    "fiber.length_km",
    "fiber.loss_coeff_db_per_km",
    "fiber.excess_loss_db",
    "detector.efficiency",
    "detector.dark_count_prob",
    "detector.gate_width_ns",
    "detector.trigger_rate_hz",
];

/// How `lanterns.insertion_loss_db` is split over the two lanterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossReading {
    /// The figure applies to each lantern.
    PerLantern,
    /// The figure is the total for the mux/demux pair.
    PerPair,
}

impl FromStr for LossReading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_lantern" => Ok(LossReading::PerLantern),
            "per_pair" => Ok(LossReading::PerPair),
            _ => Err(Error::invalid(format!(
                "unknown loss reading `{s}` (expected per_lantern or per_pair)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Devices as written; visibility is 1 when a target diagonal is given.
    pub architecture: ArchitectureConfig,
    pub target_diagonal: Option<f64>,
    pub fit: NamedFit,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

struct Entries {
    values: BTreeMap<String, (usize, String)>,
    last_line: usize,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("`{key}` has no value"),
                });
            }
            if let Some((first, _)) = values.insert(key.to_string(), (line, value.to_string())) {
                return Err(Error::Parse {
                    line,
                    message: format!("`{key}` already set on line {first}"),
                });
            }
        }
        Ok(Self { values, last_line })
    }

    fn line_of(&self, key: &str) -> usize {
        self.values.get(key).map_or(self.last_line.max(1), |(l, _)| *l)
    }

    /// First line among `keys` that is present, for errors raised by a group of keys.
    fn line_of_any(&self, keys: &[&str]) -> usize {
        keys.iter()
            .filter_map(|k| self.values.get(*k).map(|(l, _)| *l))
            .min()
            .unwrap_or(self.last_line.max(1))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| Error::Parse {
                line: *line,
                message: format!("`{key}`: cannot parse `{v}`: {e}"),
            }),
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::Parse {
            line: self.last_line.max(1),
            message: format!("missing required key `{key}`"),
        })
    }

    fn at(&self, keys: &[&str], err: Error) -> Error {
        match err {
            Error::Parse { .. } => err,
            other => Error::Parse {
                line: self.line_of_any(keys),
                message: other.to_string(),
            },
        }
    }
}

fn parse_db_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t {
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => t.parse::<f64>().map_err(|e| format!("`{t}`: {e}")),
            }
        })
        .collect()
}

fn parse_phase(s: &str) -> std::result::Result<CrosstalkPhase, String> {
    if s == "random" {
        Ok(CrosstalkPhase::RandomPerTrial)
    } else {
        s.parse::<f64>()
            .map(CrosstalkPhase::Fixed)
            .map_err(|_| format!("expected `random` or a phase in radians, found `{s}`"))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let e = Entries::parse(text)?;
        let scheme: Scheme = e.require("link.scheme")?;
        let dim: usize = e.require("link.dimension")?;
        if dim < 2 {
            return Err(Error::Parse {
                line: e.line_of("link.dimension"),
                message: format!("dimension {dim} < 2"),
            });
        }
        let mu: f64 = e.require("source.mean_photon_number")?;
        let source = SourceModel::new(mu).map_err(|err| e.at(&["source.mean_photon_number"], err))?;

        let visibility: Option<f64> = e.get("link.visibility")?;
        let target_diagonal: Option<f64> = e.get("link.target_diagonal")?;
        if visibility.is_some() && target_diagonal.is_some() {
            return Err(Error::Parse {
                line: e.line_of("link.target_diagonal"),
                message: "set either `link.visibility` or `link.target_diagonal`, not both".into(),
            });
        }
        if let Some(t) = target_diagonal {
            if !(0.5..=1.0).contains(&t) {
                return Err(Error::Parse {
                    line: e.line_of("link.target_diagonal"),
                    message: format!("target diagonal {t} outside [0.5, 1]"),
                });
            }
        }

        let shared_loss: Option<f64> = e.get("lanterns.insertion_loss_db")?;
        let reading: LossReading = e.get("lanterns.loss_reading")?.unwrap_or(LossReading::PerLantern);
        if e.values.contains_key("lanterns.loss_reading") && shared_loss.is_none() {
            return Err(Error::Parse {
                line: e.line_of("lanterns.loss_reading"),
                message: "`lanterns.loss_reading` needs `lanterns.insertion_loss_db`".into(),
            });
        }
        let shared_loss = shared_loss.map(|l| match reading {
            LossReading::PerLantern => l,
            LossReading::PerPair => l / 2.0,
        });
        let lantern = |name: &str| -> Result<LanternModel> {
            let key = |k: &str| format!("{name}.{k}");
            let own_loss: Option<f64> = e.get(&key("insertion_loss_db"))?;
            if own_loss.is_some() && shared_loss.is_some() {
                return Err(Error::Parse {
                    line: e.line_of(&key("insertion_loss_db")),
                    message: format!("`{}` conflicts with `lanterns.insertion_loss_db`", key("insertion_loss_db")),
                });
            }
            let loss = own_loss.or(shared_loss).unwrap_or(0.0);
            let extinction = match e.values.get(&key("extinction_db")) {
                None => vec![f64::NEG_INFINITY; dim],
                Some((line, v)) => {
                    let list = parse_db_list(v).map_err(|m| Error::Parse {
                        line: *line,
                        message: format!("`{}`: {m}", key("extinction_db")),
                    })?;
                    if list.len() != dim {
                        return Err(Error::Parse {
                            line: *line,
                            message: format!("{} extinction values for dimension {dim}", list.len()),
                        });
                    }
                    list
                }
            };
            let phase = match e.values.get(&key("crosstalk_phase")) {
                None => CrosstalkPhase::RandomPerTrial,
                Some((line, v)) => parse_phase(v).map_err(|m| Error::Parse { line: *line, message: m })?,
            };
            let keys = [key("insertion_loss_db"), key("extinction_db"), key("crosstalk_phase")];
            let mut group: Vec<&str> = keys.iter().map(String::as_str).collect();
            group.push("lanterns.insertion_loss_db");
            LanternModel::new(loss, extinction, phase).map_err(|err| e.at(&group, err))
        };
        let lanterns = LanternPair {
            mux: lantern("lantern_mux")?,
            demux: lantern("lantern_demux")?,
        };

        let fiber_keys = ["fiber.length_km", "fiber.loss_coeff_db_per_km", "fiber.excess_loss_db"];
        let fiber = FiberSpan::new(
            e.get("fiber.length_km")?.unwrap_or(0.0),
            e.get("fiber.loss_coeff_db_per_km")?.unwrap_or(FMF_LOSS_DB_PER_KM),
            e.get("fiber.excess_loss_db")?.unwrap_or(0.0),
        )
        .map_err(|err| e.at(&fiber_keys, err))?;

        let det_keys = [
            "detector.efficiency",
            "detector.dark_count_prob",
            "detector.gate_width_ns",
            "detector.trigger_rate_hz",
        ];
        let base = DetectorModel::ingaas_gated();
        let detector = DetectorModel::new(
            e.get("detector.efficiency")?.unwrap_or(base.efficiency()),
            e.get("detector.dark_count_prob")?.unwrap_or(base.dark_count_prob()),
            e.get("detector.gate_width_ns")?.unwrap_or(base.gate_width_ns()),
            e.get("detector.trigger_rate_hz")?.unwrap_or(base.trigger_rate_hz()),
        )
        .map_err(|err| e.at(&det_keys, err))?;

        let architecture = ArchitectureConfig {
            scheme,
            dim,
            source,
            lanterns,
            fiber,
            detectors: vec![detector; dim],
            visibility: visibility.unwrap_or(1.0),
        };
        architecture
            .validate()
            .map_err(|err| e.at(&["link.visibility", "link.scheme"], err))?;

        let output_dir = e.values.get("run.output_dir").map(|(_, v)| PathBuf::from(v));
        Ok(Self {
            architecture,
            target_diagonal,
            fit: e.get("run.fit")?.unwrap_or(NamedFit::Custom),
            seed: e.get("run.seed")?,
            output_dir,
        })
    }

    /// Reads and parses `path`.
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Solves for the target diagonal if one is set, then applies the named fit.
    pub fn resolve(&self) -> Result<ArchitectureConfig> {
        self.resolve_with(self.fit)
    }

    pub fn resolve_with(&self, fit: NamedFit) -> Result<ArchitectureConfig> {
        let base = match self.target_diagonal {
            Some(t) => with_target_diagonal(self.architecture.clone(), t)?,
            None => self.architecture.clone(),
        };
        fit.apply(&base)
    }
}

fn fmt_db(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        x.to_string()
    }
}

/// Canonical text for a resolved configuration; parses back to the same link.
pub fn echo_architecture(cfg: &ArchitectureConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("link.scheme", cfg.scheme.name().into());
    put("link.dimension", cfg.dim.to_string());
    put("link.visibility", cfg.visibility.to_string());
    put("source.mean_photon_number", cfg.mean_photon_number().to_string());
    for (name, l) in [("lantern_mux", &cfg.lanterns.mux), ("lantern_demux", &cfg.lanterns.demux)] {
        put(&format!("{name}.insertion_loss_db"), l.insertion_loss_db().to_string());
        let ext: Vec<String> = l.extinction_db().iter().map(|&x| fmt_db(x)).collect();
        put(&format!("{name}.extinction_db"), ext.join(", "));
        let phase = match l.crosstalk_phase() {
            CrosstalkPhase::RandomPerTrial => "random".into(),
            CrosstalkPhase::Fixed(t) => t.to_string(),
        };
        put(&format!("{name}.crosstalk_phase"), phase);
    }
    put("fiber.length_km", cfg.fiber.length_km().to_string());
    put("fiber.loss_coeff_db_per_km", cfg.fiber.loss_coeff_db_per_km().to_string());
    put("fiber.excess_loss_db", cfg.fiber.excess_loss_db().to_string());
    if let Some(d) = cfg.detectors.first() {
        put("detector.efficiency", d.efficiency().to_string());
        put("detector.dark_count_prob", d.dark_count_prob().to_string());
        put("detector.gate_width_ns", d.gate_width_ns().to_string());
        put("detector.trigger_rate_hz", d.trigger_rate_hz().to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::fits::{paper_500m, paper_b2b};

    const PAPER_500M: &str = "\
# 500 m link
link.scheme = fmf_lantern
link.dimension = 2
link.target_diagonal = 0.951
source.mean_photon_number = 0.4
lanterns.insertion_loss_db = 6.5
lanterns.loss_reading = per_pair
lantern_mux.extinction_db = -inf, -inf
lantern_demux.extinction_db = -14.6, -16.2   # measured
lantern_demux.crosstalk_phase = random
fiber.length_km = 0.5
fiber.loss_coeff_db_per_km = 0.22
fiber.excess_loss_db = 1.09
";

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn text_preset_matches_programmatic_preset() {
        let rc = RunConfig::parse(PAPER_500M).unwrap();
        assert_eq!(rc.fit, NamedFit::Custom);
        let cfg = rc.resolve().unwrap();
        let reference = paper_500m();
        assert!((cfg.visibility - reference.visibility).abs() < 1e-12);
        assert_eq!(cfg.lanterns.demux.insertion_loss_db(), 3.25);
        assert_eq!(cfg.detectors, reference.detectors);
        assert_eq!(cfg.fiber, reference.fiber);
        assert!(cfg.lanterns.mux.has_crosstalk() == reference.lanterns.mux.has_crosstalk());
    }

    #[test]
    fn echo_round_trips() {
        for cfg in [paper_b2b(), paper_500m(), ArchitectureConfig::ideal(Scheme::TimeBin, 4)] {
            let back = RunConfig::parse(&echo_architecture(&cfg)).unwrap();
            assert_eq!(back.architecture, cfg);
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_value = PAPER_500M.replace("fiber.length_km = 0.5", "fiber.length_km = half");
        assert_eq!(line_of(RunConfig::parse(&bad_value).unwrap_err()), 11);
        let negative = PAPER_500M.replace("fiber.length_km = 0.5", "fiber.length_km = -1");
        assert_eq!(line_of(RunConfig::parse(&negative).unwrap_err()), 11);
        let unknown = format!("{PAPER_500M}fiber.colour = blue\n");
        assert_eq!(line_of(RunConfig::parse(&unknown).unwrap_err()), 14);
        let repeated = format!("{PAPER_500M}link.dimension = 3\n");
        assert_eq!(line_of(RunConfig::parse(&repeated).unwrap_err()), 14);
        let short_list = PAPER_500M.replace("-14.6, -16.2", "-14.6");
        assert_eq!(line_of(RunConfig::parse(&short_list).unwrap_err()), 9);
        let no_equals = PAPER_500M.replace("link.dimension = 2", "link.dimension 2");
        assert_eq!(line_of(RunConfig::parse(&no_equals).unwrap_err()), 3);
        let both = format!("{PAPER_500M}link.visibility = 0.9\n");
        assert!(RunConfig::parse(&both).is_err());
        let missing = PAPER_500M.replace("link.scheme = fmf_lantern\n", "");
        assert!(RunConfig::parse(&missing).unwrap_err().to_string().contains("link.scheme"));
    }

    #[test]
    fn run_section() {
        let text = format!("{PAPER_500M}run.fit = fit_qber11\nrun.seed = 12\nrun.output_dir = out\n");
        let rc = RunConfig::parse(&text).unwrap();
        assert_eq!(rc.fit, NamedFit::FitQber11);
        assert_eq!(rc.seed, Some(12));
        assert_eq!(rc.output_dir, Some(PathBuf::from("out")));
    }
}
