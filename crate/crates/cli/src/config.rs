//! Flat `key = value` pipeline configuration, overridable from the command
//! line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nelex::clcb::ClcbConfig;
use nelex::miner::MiningMode;
use nelex::translit::{Optimizer, TranslitConfig};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub english: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub ne_list: Option<PathBuf>,
    pub aug_list: Option<PathBuf>,
    pub mode: MiningMode,
    pub out: PathBuf,
    pub seed: u64,
    pub clcb: ClcbConfig,
    pub translit: TranslitConfig,
    pub min_score: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            english: None,
            target: None,
            ne_list: None,
            aug_list: None,
            mode: MiningMode::Tokenized,
            out: PathBuf::from("."),
            seed: 0,
            clcb: ClcbConfig::default(),
            translit: TranslitConfig::default(),
            min_score: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "english",
    "target",
    "ne_list",
    "aug_list",
    "mode",
    "out",
    "seed",
    "max_fa",
    "n_min",
    "n_max",
    "epochs",
    "batch_size",
    "learning_rate",
    "dropout",
    "embedding_dim",
    "encoder_hidden",
    "decoder_hidden",
    "grad_clip",
    "optimizer",
    "init_scale",
    "min_score",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

impl PipelineConfig {
    /// Apply one setting. Relative paths are resolved against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), CliError> {
        let path = || base.join(value);
        match key {
            "english" => self.english = Some(path()),
            "target" => self.target = Some(path()),
            "ne_list" => self.ne_list = Some(path()),
            "aug_list" => self.aug_list = Some(path()),
            "out" => self.out = path(),
            "mode" => {
                self.mode = MiningMode::parse(value).ok_or_else(|| {
                    CliError::Config(format!("mode: expected tokenized or untokenized, got {value:?}"))
                })?
            }
            "seed" => {
                self.seed = parse_num(key, value)?;
                self.translit.seed = self.seed;
            }
            "max_fa" => self.clcb.max_fa = parse_num(key, value)?,
            "n_min" => self.clcb.n_min = parse_num(key, value)?,
            "n_max" => self.clcb.n_max = parse_num(key, value)?,
            "epochs" => self.translit.epochs = parse_num(key, value)?,
            "batch_size" => self.translit.batch_size = parse_num(key, value)?,
            "learning_rate" => self.translit.learning_rate = parse_num(key, value)?,
            "dropout" => self.translit.dropout = parse_num(key, value)?,
            "embedding_dim" => self.translit.embedding_dim = parse_num(key, value)?,
            "encoder_hidden" => self.translit.encoder_hidden_per_direction = parse_num(key, value)?,
            "decoder_hidden" => self.translit.decoder_hidden = parse_num(key, value)?,
            "grad_clip" => self.translit.grad_clip_norm = parse_num(key, value)?,
            "init_scale" => self.translit.init_scale = parse_num(key, value)?,
            "optimizer" => {
                self.translit.optimizer = Optimizer::parse(value).ok_or_else(|| {
                    CliError::Config(format!("optimizer: expected sgd or adam, got {value:?}"))
                })?
            }
            "min_score" => self.min_score = Some(parse_num(key, value)?),
            _ => {
                return Err(CliError::Config(format!(
                    "unknown configuration key {key:?} (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Read a config file. Blank lines and `#` comments are ignored.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config: cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut config = PipelineConfig::default();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    i + 1
                )));
            };
            config.set(key.trim(), value.trim(), base)?;
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.clcb.n_min == 0 || self.clcb.n_min > self.clcb.n_max {
            return Err(CliError::Config(format!(
                "n_min/n_max: need 1 <= n_min <= n_max, got {} and {}",
                self.clcb.n_min, self.clcb.n_max
            )));
        }
        self.translit
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for (name, path) in [
            ("english", &self.english),
            ("target", &self.target),
            ("ne_list", &self.ne_list),
            ("aug_list", &self.aug_list),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(CliError::Config(format!(
                        "{name}: file not found: {}",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// A required input path, or a config error naming the field.
    pub fn require<'a>(&self, name: &str, path: &'a Option<PathBuf>) -> Result<&'a Path, CliError> {
        path.as_deref()
            .ok_or_else(|| CliError::Config(format!("{name}: not set (use --{} or the config file)", name.replace('_', "-"))))
    }

    /// Settings that determine the outputs, one `key=value` per line. Input
    /// files are represented by their content hash, so the output directory
    /// and file locations do not matter.
    pub fn canonical(&self) -> Result<String, CliError> {
        let mut fields: BTreeMap<&str, String> = BTreeMap::new();
        for (name, path) in [
            ("english", &self.english),
            ("target", &self.target),
            ("ne_list", &self.ne_list),
            ("aug_list", &self.aug_list),
        ] {
            if let Some(p) = path {
                let bytes = std::fs::read(p)
                    .map_err(|e| CliError::Config(format!("{name}: cannot read {}: {e}", p.display())))?;
                fields.insert(name, hex::encode(Sha256::digest(&bytes)));
            }
        }
        let t = &self.translit;
        fields.insert("mode", self.mode.to_string());
        fields.insert("seed", self.seed.to_string());
        fields.insert("max_fa", self.clcb.max_fa.to_string());
        fields.insert("n_min", self.clcb.n_min.to_string());
        fields.insert("n_max", self.clcb.n_max.to_string());
        fields.insert("epochs", t.epochs.to_string());
        fields.insert("batch_size", t.batch_size.to_string());
        fields.insert("learning_rate", t.learning_rate.to_string());
        fields.insert("dropout", t.dropout.to_string());
        fields.insert("embedding_dim", t.embedding_dim.to_string());
        fields.insert("encoder_hidden", t.encoder_hidden_per_direction.to_string());
        fields.insert("decoder_hidden", t.decoder_hidden.to_string());
        fields.insert("grad_clip", t.grad_clip_norm.to_string());
        fields.insert("optimizer", t.optimizer.as_str().to_string());
        fields.insert("init_scale", t.init_scale.to_string());
        if let Some(m) = self.min_score {
            fields.insert("min_score", m.to_string());
        }
        let mut out = String::new();
        for (k, v) in fields {
            writeln!(out, "{k}={v}").unwrap();
        }
        Ok(out)
    }

    /// First 16 hex digits of the SHA-256 of [`PipelineConfig::canonical`].
    pub fn hash(&self) -> Result<String, CliError> {
        let digest = Sha256::digest(self.canonical()?.as_bytes());
        Ok(hex::encode(digest)[..16].to_string())
    }
}
