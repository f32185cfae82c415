use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use durpipe::adapters::{
    group_questions, mctaco_to_input, mctaco_training_label, read_mctaco_jsonl, read_timebank_tsv, timebank_to_input,
    write_timebank_tsv, McTacoRow, ModelInput, TimeBankRow,
};
use durpipe::duration::closest_unit;
use durpipe::eval::{
    eval_coarse, eval_fine, eval_mctaco, majority_baseline, EvalReport, Golds, McTacoAnswer, Prediction, Protocol,
    RangeRule,
};
use durpipe::extract::{ExtractionOutput, Extractor, LabeledInstance};
use durpipe::model::{self, train, DualHeadModel, Target};
use durpipe::{LogSeconds, TemporalUnit, UnitInventory};
use log::{info, warn};
use serde::Deserialize;

use crate::config::{DataFormat, Head, Init, RunConfig, CONFIG_FILE};
use crate::error::{CliError, Result};

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Read { path: path.into(), source })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Read { path: path.into(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::Write { path: path.into(), source })
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::result::Result<(), durpipe::Error>,
{
    let file = File::create(path).map_err(|source| CliError::Write { path: path.into(), source })?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| match e {
        durpipe::Error::Io(source) => CliError::Write { path: path.into(), source },
        other => other.into(),
    })?;
    w.flush().map_err(|source| CliError::Write { path: path.into(), source })
}

/// Creates `out` and writes the effective config into it.
pub fn prepare_out(out: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(out).map_err(|source| CliError::Write { path: out.into(), source })?;
    write_file(&out.join(CONFIG_FILE), cfg.to_toml()?.as_bytes())
}

fn json_pretty<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(durpipe::Error::from)?;
    bytes.push(b'\n');
    Ok(bytes)
}

// ---- extract ----

/// Files under `path` in sorted order, each with a display name relative to
/// the input argument (its file name when `path` is a file).
fn collect_files(root: &Path, path: &Path, out: &mut Vec<(PathBuf, String)>) -> Result<()> {
    let meta = fs::metadata(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    if meta.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|source| CliError::Read { path: path.into(), source })?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::result::Result<_, _>>()
            .map_err(|source| CliError::Read { path: path.into(), source })?;
        entries.sort();
        for e in entries {
            collect_files(root, &e, out)?;
        }
    } else {
        let name = match path.strip_prefix(root) {
            Ok(rel) if !rel.as_os_str().is_empty() => rel.to_path_buf(),
            _ => path.file_name().map(PathBuf::from).unwrap_or_else(|| path.to_path_buf()),
        };
        out.push((path.to_path_buf(), name.to_string_lossy().replace('\\', "/")));
    }
    Ok(())
}

#[derive(Deserialize)]
struct JsonDocument {
    id: String,
    text: String,
}

/// Documents of one input file. `.jsonl` files hold `{"id", "text"}`
/// objects; anything else is plain text with one document per line, named
/// `<file>:<line>`.
fn documents_of(path: &Path, name: &str) -> Result<Vec<(String, Vec<u8>)>> {
    let bytes = read_bytes(path)?;
    let mut docs = Vec::new();
    let is_jsonl = path.extension().is_some_and(|e| e == "jsonl");
    for (i, line) in bytes.split(|b| *b == b'\n').enumerate() {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        if is_jsonl {
            let doc: JsonDocument = serde_json::from_slice(line)
                .map_err(|e| CliError::Data(format!("{name}:{}: not a document object: {e}", i + 1)))?;
            docs.push((doc.id, doc.text.into_bytes()));
        } else {
            docs.push((format!("{name}:{}", i + 1), line.to_vec()));
        }
    }
    Ok(docs)
}

pub fn extract(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<ExtractionOutput> {
    let extractor = Extractor::new(cfg.extract.clone())?;
    let mut files = Vec::new();
    for p in inputs {
        collect_files(p, p, &mut files)?;
    }
    if files.is_empty() {
        warn!("no input files found; writing empty outputs");
    }
    prepare_out(out, cfg)?;

    let mut total = ExtractionOutput::default();
    for (path, name) in &files {
        let part = extractor.extract_corpus(documents_of(path, name)?);
        info!("{name}: {} instances", part.instances.len());
        total.stats.merge(&part.stats);
        total.instances.extend(part.instances);
    }
    write_with(&out.join("instances.jsonl"), |w| {
        for inst in &total.instances {
            serde_json::to_writer(&mut *w, inst)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    write_file(&out.join("stats.json"), &json_pretty(&total.stats)?)?;
    Ok(total)
}

// ---- loading datasets ----

pub fn read_instances(path: &Path) -> Result<Vec<LabeledInstance>> {
    let text = String::from_utf8(read_bytes(path)?)
        .map_err(|_| CliError::Data(format!("{} is not valid UTF-8", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                durpipe::Error::MalformedRow { line: i + 1, reason: format!("{}: {e}", path.display()) }.into()
            })
        })
        .collect()
}

pub fn read_timebank(path: &Path) -> Result<Vec<TimeBankRow>> {
    Ok(read_timebank_tsv(open(path)?)?)
}

pub fn read_mctaco(path: &Path) -> Result<Vec<McTacoRow>> {
    Ok(read_mctaco_jsonl(open(path)?)?)
}

fn target(head: Head, exact: LogSeconds, inventory: UnitInventory) -> Target {
    match head {
        Head::Exact => Target::Exact(exact),
        Head::Range => Target::Range(closest_unit(exact, inventory)),
    }
}

fn training_examples(
    format: DataFormat,
    path: &Path,
    head: Head,
    inventory: UnitInventory,
) -> Result<Vec<(ModelInput, Target)>> {
    match format {
        DataFormat::Instances => Ok(read_instances(path)?
            .iter()
            .map(|inst| (ModelInput::from(inst), target(head, inst.exact_label, inventory)))
            .collect()),
        DataFormat::Timebank => read_timebank(path)?
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let input = timebank_to_input(row, inventory)?;
                let exact = input
                    .exact_label
                    .ok_or_else(|| CliError::Data(format!("row {} has no duration bounds to train on", i + 2)))?;
                Ok((input, target(head, exact, inventory)))
            })
            .collect(),
        DataFormat::Mctaco => {
            let mut out = Vec::new();
            for q in group_questions(read_mctaco(path)?) {
                let Some(label) = mctaco_training_label(&q.rows) else {
                    warn!("question {} has no parseable correct answer; skipped", q.id);
                    continue;
                };
                out.push((mctaco_to_input(&q.rows[0]).0, target(head, label, inventory)));
            }
            Ok(out)
        }
    }
}

// ---- train ----

pub fn train_cmd(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let mut model = match &cfg.train.init {
        Init::Fresh => DualHeadModel::from_config(&cfg.model_config())?,
        Init::Checkpoint(p) => {
            let (m, _) = model::load(&read_bytes(p)?)?;
            if m.inventory != cfg.inventory {
                return Err(CliError::Config(format!(
                    "checkpoint {} has a {}-unit inventory but the run uses {}",
                    p.display(),
                    m.inventory.len(),
                    cfg.inventory.len()
                )));
            }
            m
        }
    };
    let examples = training_examples(cfg.train.data_format, data, cfg.train.head, cfg.inventory)?;
    if examples.is_empty() {
        return Err(CliError::Data(format!("{} holds no training examples", data.display())));
    }
    prepare_out(out, cfg)?;
    info!("training the {:?} head on {} examples", cfg.train.head, examples.len());
    let report = train(&mut model, &examples, &cfg.train_config())?;
    write_file(&out.join("checkpoint.bin"), &model::save(&model, cfg.seed)?)?;
    write_with(&out.join("loss.tsv"), |w| {
        writeln!(w, "step\tloss")?;
        for (i, l) in report.losses.iter().enumerate() {
            writeln!(w, "{i}\t{l}")?;
        }
        Ok(())
    })
}

// ---- eval and baseline ----

fn predict(model: &DualHeadModel, head: Head, input: &ModelInput) -> Result<Prediction> {
    Ok(match head {
        Head::Exact => Prediction::Exact(model.predict_exact(input)?),
        Head::Range => Prediction::Range(model.predict_range(input)?.0),
    })
}

fn as_unit(pred: Prediction, inventory: UnitInventory) -> TemporalUnit {
    match pred {
        Prediction::Exact(v) => closest_unit(v, inventory),
        Prediction::Range(u) => closest_unit(u.log_seconds(), inventory),
        Prediction::Coarse(_) => unreachable!("models never emit coarse predictions"),
    }
}

/// Gold side of an evaluation, loaded according to the protocol.
enum Dataset {
    Events { rows: Vec<TimeBankRow>, inputs: Vec<ModelInput> },
    Questions { inputs: BTreeMap<String, ModelInput>, answers: Vec<McTacoAnswer> },
}

fn load_dataset(protocol: Protocol, path: &Path, inventory: UnitInventory) -> Result<Dataset> {
    match protocol {
        Protocol::Coarse | Protocol::Fine => {
            let rows = read_timebank(path)?;
            let inputs = rows.iter().map(|r| timebank_to_input(r, inventory)).collect::<Result<Vec<_>, _>>()?;
            Ok(Dataset::Events { rows, inputs })
        }
        Protocol::Mctaco => {
            let mut inputs = BTreeMap::new();
            let mut answers = Vec::new();
            let mut unparsed = 0;
            for q in group_questions(read_mctaco(path)?) {
                for row in &q.rows {
                    match mctaco_to_input(row).1 {
                        Some(value) => answers.push(McTacoAnswer { question_id: q.id.clone(), value, gold: row.gold }),
                        None => unparsed += 1,
                    }
                }
                inputs.insert(q.id.clone(), mctaco_to_input(&q.rows[0]).0);
            }
            if unparsed > 0 {
                warn!("{unparsed} answers could not be read as durations and were left out");
            }
            Ok(Dataset::Questions { inputs, answers })
        }
    }
}

fn coarse_golds(rows: &[TimeBankRow]) -> Result<Vec<durpipe::CoarseLabel>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| r.coarse_label().ok_or_else(|| CliError::Data(format!("row {} has no coarse label", i + 2))))
        .collect()
}

fn fine_golds(inputs: &[ModelInput]) -> Result<Vec<TemporalUnit>> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            x.range_label.ok_or_else(|| {
                CliError::Data(format!(
                    "the fine protocol needs duration bounds but row {} only has a coarse label",
                    i + 2
                ))
            })
        })
        .collect()
}

fn event_keys(rows: &[TimeBankRow]) -> Vec<String> {
    rows.iter().map(|r| r.event_word().unwrap_or("").to_lowercase()).collect()
}

fn write_report(out: &Path, report: &EvalReport) -> Result<()> {
    write_file(&out.join("report.json"), &json_pretty(report)?)?;
    write_with(&out.join("items.tsv"), |w| report.write_items_tsv(w))
}

pub fn eval_cmd(cfg: &RunConfig, checkpoint: &Path, data: &Path, out: &Path) -> Result<EvalReport> {
    let rule = RangeRule::new(cfg.eval.range)?;
    let (model, _) = model::load(&read_bytes(checkpoint)?)?;
    let head = cfg.eval.head;
    let inv = cfg.inventory;
    let report = match load_dataset(cfg.eval.protocol, data, inv)? {
        Dataset::Events { rows, inputs } => {
            let preds = inputs.iter().map(|x| predict(&model, head, x)).collect::<Result<Vec<_>>>()?;
            let mut report = if cfg.eval.protocol == Protocol::Coarse {
                eval_coarse(&preds, &coarse_golds(&rows)?)?
            } else {
                let golds = fine_golds(&inputs)?;
                let units: Vec<TemporalUnit> = preds.iter().map(|p| as_unit(*p, inv)).collect();
                eval_fine(&units, &golds, inv)?
            };
            report.attach_keys(event_keys(&rows));
            report
        }
        Dataset::Questions { inputs, answers } => {
            let preds = inputs
                .iter()
                .map(|(q, x)| Ok((q.clone(), predict(&model, head, x)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            eval_mctaco(&preds, &answers, rule, inv)?
        }
    };
    prepare_out(out, cfg)?;
    write_report(out, &report)?;
    Ok(report)
}

pub fn baseline_cmd(cfg: &RunConfig, data: &Path, out: &Path) -> Result<EvalReport> {
    let rule = RangeRule::new(cfg.eval.range)?;
    let inv = cfg.inventory;
    let report = match load_dataset(cfg.eval.protocol, data, inv)? {
        Dataset::Events { rows, inputs } => {
            let mut report = if cfg.eval.protocol == Protocol::Coarse {
                majority_baseline(Golds::Coarse(&coarse_golds(&rows)?))?
            } else {
                majority_baseline(Golds::Fine(&fine_golds(&inputs)?, inv))?
            };
            report.attach_keys(event_keys(&rows));
            report
        }
        Dataset::Questions { answers, .. } => majority_baseline(Golds::Mctaco(&answers, rule, inv))?,
    };
    prepare_out(out, cfg)?;
    write_report(out, &report)?;
    Ok(report)
}

// ---- synth ----

pub fn synth_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let corpus = cfg.synth_spec().generate()?;
    prepare_out(out, cfg)?;
    write_file(&out.join("corpus.txt"), corpus.corpus_text().as_bytes())?;
    write_with(&out.join("heldout.tsv"), |w| write_timebank_tsv(w, &corpus.heldout))?;
    write_with(&out.join("finetune.tsv"), |w| write_timebank_tsv(w, &corpus.finetune))?;
    write_with(&out.join("mctaco.jsonl"), |w| {
        for row in &corpus.mctaco {
            serde_json::to_writer(&mut *w, row)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    info!(
        "{} corpus sentences, {} held-out rows, {} fine-tuning rows, {} QA rows",
        corpus.corpus.len(),
        corpus.heldout.len(),
        corpus.finetune.len(),
        corpus.mctaco.len()
    );
    Ok(())
}
