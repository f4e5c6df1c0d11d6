use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use nelex::clcb::{bootstrap, parse_pairs_tsv, SkipReason};
use nelex::corpus::{align, load_edition, load_ne_list, read_name_list, ParallelCorpus};
use nelex::eval::{
    majority_vote, pairwise_kappa, gold_eval, silver_eval, synth_corpus, AnnotationSet,
    EvalReport, Normalization, SilverLexicon, SynthSpec,
};
use nelex::miner::{mine, parse_resource, resource_tsv, MineOptions, MiningMode, RESOURCE_COLUMNS};
use nelex::translit::{load_model, train, write_model};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::CliError;

pub const PAIRS_FILE: &str = "bootstrap_pairs.tsv";
pub const BOOTSTRAP_SKIPS_FILE: &str = "bootstrap_skipped.tsv";
pub const MODEL_FILE: &str = "model.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const RESOURCE_FILE: &str = "resource.tsv";
pub const MINE_SKIPS_FILE: &str = "mine_skipped.tsv";
pub const MANIFEST_FILE: &str = "manifest.tsv";

/// The single `#` line that starts every text artifact.
struct Header {
    seed: u64,
    config_hash: String,
}

impl Header {
    fn new(config: &PipelineConfig) -> Result<Self, CliError> {
        Ok(Header {
            seed: config.seed,
            config_hash: config.hash()?,
        })
    }

    fn text(&self, columns: &str) -> String {
        format!(
            "nelex {} seed={} config={} columns={}",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.config_hash,
            columns.replace('\t', ",")
        )
    }

    fn line(&self, columns: &str) -> String {
        format!("# {}\n", self.text(columns))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(CliError::Runtime)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(CliError::Runtime)
}

fn load_corpus(config: &PipelineConfig) -> Result<ParallelCorpus, CliError> {
    let english = load_edition(config.require("english", &config.english)?, "eng")?;
    let target = load_edition(config.require("target", &config.target)?, "tgt")?;
    Ok(align(english, target))
}

pub fn cmd_bootstrap(config: &PipelineConfig) -> Result<(), CliError> {
    config.validate()?;
    config.require("english", &config.english)?;
    config.require("target", &config.target)?;
    let ne_path = config.require("ne_list", &config.ne_list)?;
    let header = Header::new(config)?;
    let corpus = load_corpus(config)?;
    let nes = load_ne_list(ne_path, &corpus.english)?;
    let result = bootstrap(&corpus, &nes, &config.clcb);

    ensure_dir(&config.out)?;
    let pairs = header.line("english\ttarget\tf_s\tf_a") + &result.pairs_tsv();
    write_file(&config.out.join(PAIRS_FILE), pairs.as_bytes())?;
    let skipped = header.line("english\treason") + &result.skipped_tsv();
    write_file(&config.out.join(BOOTSTRAP_SKIPS_FILE), skipped.as_bytes())?;

    let count = |r: SkipReason| result.skipped.iter().filter(|(_, s)| *s == r).count();
    println!(
        "bootstrap: {} named entities, {} pairs, skipped {} absent, {} frequency-1, {} without candidates",
        nes.len(),
        result.pairs.len(),
        count(SkipReason::Absent),
        count(SkipReason::FrequencyOne),
        count(SkipReason::NoCandidates)
    );
    Ok(())
}

pub fn cmd_train(config: &PipelineConfig, pairs: Option<&Path>) -> Result<(), CliError> {
    config.validate()?;
    let default_pairs = config.out.join(PAIRS_FILE);
    let pairs_path = pairs.unwrap_or(&default_pairs);
    if !pairs_path.is_file() {
        return Err(CliError::Config(format!(
            "pairs: file not found: {}",
            pairs_path.display()
        )));
    }
    let header = Header::new(config)?;
    let content = fs::read_to_string(pairs_path)
        .with_context(|| format!("cannot read {}", pairs_path.display()))?;
    let parsed = parse_pairs_tsv(&content)
        .map_err(|e| anyhow::anyhow!("{}: {e}", pairs_path.display()))?;
    let training: Vec<_> = parsed.iter().map(|p| p.training_pair()).collect();
    let augmentation = match &config.aug_list {
        Some(p) => read_name_list(p)?,
        None => Vec::new(),
    };

    let model = train(&training, &augmentation, &config.translit)?;

    ensure_dir(&config.out)?;
    write_file(&config.out.join(MODEL_FILE), &write_model(&model))?;
    let mut csv = header.line("epoch,mean_loss");
    csv.push_str("epoch,mean_loss\n");
    for (i, loss) in model.loss_curve.iter().enumerate() {
        writeln!(csv, "{},{loss:.6}", i + 1).unwrap();
    }
    write_file(&config.out.join(LOSS_FILE), csv.as_bytes())?;

    println!(
        "train: {} pairs, {} augmentation names, {} parameters, mean loss {:.4} -> {:.4}",
        training.len(),
        augmentation.len(),
        model.parameter_count(),
        model.loss_curve.first().copied().unwrap_or(f64::NAN),
        model.loss_curve.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn cmd_mine(config: &PipelineConfig, model: Option<&Path>) -> Result<(), CliError> {
    config.validate()?;
    config.require("english", &config.english)?;
    config.require("target", &config.target)?;
    let ne_path = config.require("ne_list", &config.ne_list)?;
    let default_model = config.out.join(MODEL_FILE);
    let model_path = model.unwrap_or(&default_model);
    if !model_path.is_file() {
        return Err(CliError::Config(format!(
            "model: file not found: {}",
            model_path.display()
        )));
    }
    let header = Header::new(config)?;
    let model = load_model(model_path)
        .with_context(|| format!("cannot load model {}", model_path.display()))?;
    let corpus = load_corpus(config)?;
    let nes = load_ne_list(ne_path, &corpus.english)?;
    let options = MineOptions {
        mode: config.mode,
        clcb: config.clcb,
        min_score: config.min_score,
    };
    let result = mine(&model, &corpus, &nes, &options)?;
    if result.pairs.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!("no named entity produced a pair")));
    }

    ensure_dir(&config.out)?;
    let resource = resource_tsv(&result.pairs, Some(&header.text(RESOURCE_COLUMNS)));
    write_file(&config.out.join(RESOURCE_FILE), resource.as_bytes())?;
    let skipped = header.line("english\treason") + &result.skipped_tsv();
    write_file(&config.out.join(MINE_SKIPS_FILE), skipped.as_bytes())?;
    println!(
        "mine ({}): {} pairs, {} skipped",
        options.mode,
        result.pairs.len(),
        result.skipped.len()
    );
    Ok(())
}

pub struct EvalArgs {
    pub resource: PathBuf,
    pub silver: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub threshold: f64,
    pub strip_marks: bool,
    pub report: Option<PathBuf>,
}

fn read_input(name: &str, path: &Path) -> Result<String, CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!("{name}: file not found: {}", path.display())));
    }
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(CliError::Runtime)
}

pub fn cmd_eval(config: &PipelineConfig, args: &EvalArgs) -> Result<(), CliError> {
    let header = Header::new(config)?;
    let entries = parse_resource(&read_input("resource", &args.resource)?)?;
    let norm = Normalization {
        strip_marks: args.strip_marks,
    };
    let mut summary = String::new();
    let report: EvalReport = match (&args.silver, &args.annotations) {
        (Some(silver), None) => {
            let lexicon = SilverLexicon::parse_tsv(&read_input("silver", silver)?)?;
            silver_eval(&entries, &lexicon, args.threshold, norm)?
        }
        (None, Some(annotations)) => {
            let set = AnnotationSet::parse_tsv(&read_input("annotations", annotations)?)?;
            let gold = majority_vote(&set)?;
            writeln!(summary, "kappa: {:.4}", pairwise_kappa(&set)?).unwrap();
            writeln!(summary, "gold questions: {}", gold.len()).unwrap();
            gold_eval(&entries, &gold, norm)?
        }
        _ => {
            return Err(CliError::Config(
                "eval needs exactly one of --silver or --annotations".into(),
            ))
        }
    };
    summary.push_str(&report.summary());
    let tsv = header.line("english\tpredicted\treference\tdistance\tverdict") + &report.to_tsv();
    match &args.report {
        Some(path) => write_file(path, tsv.as_bytes())?,
        None => print!("{tsv}"),
    }
    print!("{summary}");
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Bootstrap, train and mine into `config.out`, then write the manifest.
pub fn cmd_run(config: &PipelineConfig) -> Result<(), CliError> {
    config.validate()?;
    cmd_bootstrap(config)?;
    cmd_train(config, None)?;
    cmd_mine(config, None)?;

    let header = Header::new(config)?;
    let mut manifest = header.line("artifact\tsha256\tbytes");
    let mut artifacts = [
        PAIRS_FILE,
        BOOTSTRAP_SKIPS_FILE,
        MODEL_FILE,
        LOSS_FILE,
        RESOURCE_FILE,
        MINE_SKIPS_FILE,
    ];
    artifacts.sort_unstable();
    for name in artifacts {
        let path = config.out.join(name);
        let bytes = fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
        writeln!(manifest, "{name}\t{}\t{}", sha256_hex(&bytes), bytes.len()).unwrap();
    }
    write_file(&config.out.join(MANIFEST_FILE), manifest.as_bytes())?;
    println!("run: manifest written to {}", config.out.join(MANIFEST_FILE).display());
    Ok(())
}

/// Settings for a synthetic corpus, read from a `key = value` file.
fn synth_spec(path: Option<&Path>, seed: Option<u64>, unsegmented: bool) -> Result<SynthSpec, CliError> {
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = path {
        let content = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("spec: cannot read {}: {e}", path.display())))?;
        for (i, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{}:{}: expected key = value", path.display(), i + 1))
            })?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let mut take = |key: &str, default: &str| -> String {
        fields.remove(key).unwrap_or_else(|| default.to_string())
    };
    let num = |key: &str, v: String| -> Result<usize, CliError> {
        v.parse()
            .map_err(|_| CliError::Config(format!("spec {key}: cannot parse {v:?}")))
    };
    let spec_seed: u64 = take("seed", "0")
        .parse()
        .map_err(|_| CliError::Config("spec seed: not an integer".into()))?;
    let seed = seed.unwrap_or(spec_seed);
    let ne_count = num("ne_count", take("ne_count", "20"))?;
    let freq_min = num("freq_min", take("freq_min", "2"))?;
    let freq_max = num("freq_max", take("freq_max", "10"))?;
    let singletons = num("singletons", take("singletons", "0"))?;
    if freq_min == 0 || freq_min > freq_max {
        return Err(CliError::Config(format!(
            "spec freq_min/freq_max: need 1 <= freq_min <= freq_max, got {freq_min} and {freq_max}"
        )));
    }
    let mut spec = SynthSpec::generated(seed, ne_count, freq_min, freq_max, singletons);
    spec.verses = num("verses", take("verses", "500"))?;
    spec.filler_vocab = num("filler_vocab", take("filler_vocab", "300"))?;
    spec.words_per_verse = num("words_per_verse", take("words_per_verse", "8"))?;
    spec.augmentation_names = num("augmentation_names", take("augmentation_names", "100"))?;
    spec.unsegmented = unsegmented
        || match take("unsegmented", "false").as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(CliError::Config(format!(
                    "spec unsegmented: expected true or false, got {other:?}"
                )))
            }
        };
    // `substitution = a:x b:y ...` replaces individual entries
    for item in take("substitution", "").split_whitespace() {
        let (src, image) = item.split_once(':').ok_or_else(|| {
            CliError::Config(format!("spec substitution: expected char:image, got {item:?}"))
        })?;
        let mut chars = src.chars();
        let (Some(c), None) = (chars.next(), chars.next()) else {
            return Err(CliError::Config(format!(
                "spec substitution: {src:?} is not a single character"
            )));
        };
        spec.substitution.insert(c, image.to_string());
    }
    if let Some(key) = fields.keys().next() {
        return Err(CliError::Config(format!("spec: unknown key {key:?}")));
    }
    Ok(spec)
}

pub fn cmd_synth(spec_path: Option<&Path>, seed: Option<u64>, unsegmented: bool, out: &Path) -> Result<(), CliError> {
    let spec = synth_spec(spec_path, seed, unsegmented)?;
    let synth = synth_corpus(&spec).map_err(|e| CliError::Config(format!("spec: {e}")))?;

    let spec_hash = sha256_hex(format!("{spec:?}").as_bytes());
    let header = format!(
        "# nelex {} seed={} config={}\n",
        env!("CARGO_PKG_VERSION"),
        spec.seed,
        &spec_hash[..16]
    );
    ensure_dir(out)?;
    let (english, target) = synth.edition_files();
    write_file(&out.join("english.txt"), (header.clone() + &english).as_bytes())?;
    write_file(&out.join("target.txt"), (header.clone() + &target).as_bytes())?;
    let list = |names: &[String]| header.clone() + &names.iter().map(|n| format!("{n}\n")).collect::<String>();
    write_file(&out.join("ne_list.txt"), list(&synth.ne_list).as_bytes())?;
    write_file(&out.join("aug_list.txt"), list(&synth.augmentation).as_bytes())?;
    let mut gold = header.clone();
    for (en, tg) in &synth.gold {
        writeln!(gold, "{en}\t{tg}").unwrap();
    }
    write_file(&out.join("gold.tsv"), gold.as_bytes())?;
    let mode = if spec.unsegmented {
        MiningMode::Untokenized
    } else {
        MiningMode::Tokenized
    };
    let conf = format!(
        "{header}english = english.txt\ntarget = target.txt\nne_list = ne_list.txt\naug_list = aug_list.txt\nmode = {mode}\nseed = {}\nout = run\n",
        spec.seed
    );
    write_file(&out.join("pipeline.conf"), conf.as_bytes())?;
    println!(
        "synth: {} verses, {} named entities written to {}",
        spec.verses,
        synth.ne_list.len(),
        out.display()
    );
    Ok(())
}
