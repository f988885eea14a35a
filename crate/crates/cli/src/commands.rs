use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array2;
use rayon::prelude::*;
use serde_json::json;

use speechdep::formats::{
    lstm_from_tensors, parse_frames_file, parse_label_file, parse_posterior_file, parse_score_file,
    parse_tensor_file, parse_token_file, parse_vocab_file, write_label_file, write_matrix_block,
    write_span_block, MatrixBlock,
};
use speechdep::relpos::decode_heads;
use speechdep::stats::corpus_stats;
use speechdep::*;

use crate::{EvalArgs, ParseArgs, PerturbArgs, PoolArg, SegmentArgs, SegmentMode};

/// A file could not be read or written.
#[derive(Debug)]
pub struct IoFailure {
    path: PathBuf,
    source: std::io::Error,
}

impl fmt::Display for IoFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for IoFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| {
        IoFailure {
            path: path.to_owned(),
            source,
        }
        .into()
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| {
            IoFailure {
                path: p.to_owned(),
                source,
            }
            .into()
        }),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| {
                IoFailure {
                    path: PathBuf::from("<stdout>"),
                    source,
                }
                .into()
            })
        }
    }
}

fn read_conllu(path: &Path) -> Result<Corpus> {
    parse_conllu(&read(path)?).with_context(|| path.display().to_string())
}

pub fn encode(input: &Path, output: Option<&Path>) -> Result<()> {
    let corpus = read_conllu(input)?;
    emit(output, &write_label_file(&corpus))
}

pub fn decode(input: &Path, output: Option<&Path>, policy: RootPolicy) -> Result<()> {
    let text = read(input)?;
    let sentences = parse_label_file(&text).with_context(|| input.display().to_string())?;

    let decoded = sentences
        .par_iter()
        .map(|s| {
            let labels: Vec<RelPosLabel> = s.rows.iter().map(|r| r.label.clone()).collect();
            let pos: Vec<&str> = s.rows.iter().map(|r| r.pos.as_str()).collect();
            let heads = decode_heads(&labels, &pos, policy)
                .with_context(|| format!("{}: sentence `{}`", input.display(), s.sent_id))?;
            let tokens = s
                .rows
                .iter()
                .zip(heads)
                .enumerate()
                .map(|(i, (r, head))| {
                    Token::new(
                        i + 1,
                        r.form.as_str(),
                        r.pos.as_str(),
                        head,
                        r.deprel.as_str(),
                    )
                })
                .collect();
            Ok(Sentence::new(s.sent_id.as_str(), tokens))
        })
        .collect::<Result<Vec<_>>>()?;

    emit(output, &write_conllu(&Corpus::new(decoded)))
}

pub fn parse(args: &ParseArgs, policy: RootPolicy) -> Result<()> {
    let blocks = parse_score_file(&read(&args.scores)?)
        .with_context(|| args.scores.display().to_string())?;
    let token_sentences = parse_token_file(&read(&args.tokens)?)
        .with_context(|| args.tokens.display().to_string())?;
    let relations: Vec<String> = match &args.relations {
        Some(p) => read(p)?
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect(),
        None => Vec::new(),
    };

    if blocks.len() != token_sentences.len() {
        bail!(
            "{} score blocks but {} token sentences",
            blocks.len(),
            token_sentences.len()
        );
    }

    let parsed = blocks
        .par_iter()
        .zip(&token_sentences)
        .map(|(block, tokens)| {
            let id = &block.sent_id;
            if *id != tokens.sent_id {
                bail!(
                    "score block `{}` is paired with token sentence `{}`",
                    id,
                    tokens.sent_id
                );
            }
            if block.arcs.len() != tokens.forms.len() {
                bail!(
                    "sentence `{}`: scores for {} tokens, token file has {}",
                    id,
                    block.arcs.len(),
                    tokens.forms.len()
                );
            }
            let heads =
                decode_mst(&block.arcs, policy).with_context(|| format!("sentence `{}`", id))?;
            let deprels = match &block.labels {
                Some(labels) => assign_labels(&heads, labels, &relations)
                    .with_context(|| format!("sentence `{}`", id))?,
                None => vec!["_".to_owned(); heads.len()],
            };
            let out = heads
                .iter()
                .zip(&deprels)
                .zip(tokens.forms.iter().zip(&tokens.pos))
                .enumerate()
                .map(|(i, ((&head, rel), (form, pos)))| {
                    Token::new(i + 1, form.as_str(), pos.as_str(), head, rel.as_str())
                })
                .collect();
            Ok(Sentence::new(id.as_str(), out))
        })
        .collect::<Result<Vec<_>>>()?;

    emit(args.output.as_deref(), &write_conllu(&Corpus::new(parsed)))
}

struct Segmented {
    spans: String,
    transcript: String,
    vectors: Option<String>,
}

pub fn segment(args: &SegmentArgs) -> Result<()> {
    let vocab =
        parse_vocab_file(&read(&args.vocab)?).with_context(|| args.vocab.display().to_string())?;
    let posteriors = parse_posterior_file(&read(&args.posteriors)?)
        .with_context(|| args.posteriors.display().to_string())?;

    let timestamps = match (args.mode, &args.timestamps) {
        (SegmentMode::Oracle, Some(p)) => Some(by_id(read_conllu(p)?.sentences, |s| &s.sent_id)?),
        (SegmentMode::Oracle, None) => bail!("oracle mode needs --timestamps"),
        (SegmentMode::Audio, Some(_)) => bail!("--timestamps is only used in oracle mode"),
        (SegmentMode::Audio, None) => None,
    };

    let features = match &args.features {
        Some(p) => {
            if args.vectors.is_none() {
                bail!("--features needs --vectors to write the pooled vectors to");
            }
            let blocks = parse_frames_file(&read(p)?).with_context(|| p.display().to_string())?;
            Some(by_id(blocks, |b| &b.sent_id)?)
        }
        None => None,
    };
    let pooling = match args.pool {
        PoolArg::Mean => Pooling::Mean,
        PoolArg::Last => Pooling::Last,
        PoolArg::Lstm => {
            let path = args
                .weights
                .as_ref()
                .ok_or_else(|| anyhow!("--pool lstm needs --weights"))?;
            let tensors =
                parse_tensor_file(&read(path)?).with_context(|| path.display().to_string())?;
            Pooling::Recurrent(
                lstm_from_tensors(&tensors).with_context(|| path.display().to_string())?,
            )
        }
    };

    let results = posteriors
        .par_iter()
        .map(|block| {
            let id = &block.sent_id;
            let context = || format!("sentence `{}`", id);
            let posterior =
                FramePosterior::new(block.values.clone(), &vocab).with_context(context)?;

            let (spans, transcript) = match &timestamps {
                None => {
                    let path = ctc_greedy_path(&posterior);
                    (
                        extract_word_spans(&path, &vocab),
                        ctc_collapse(&path, &vocab),
                    )
                }
                Some(sentences) => {
                    let sentence = sentences
                        .get(id.as_str())
                        .ok_or_else(|| anyhow!("sentence `{}` has no time stamps", id))?;
                    let spans = spans_from_timestamps(
                        &sentence.tokens,
                        args.frame_rate,
                        posterior.num_frames(),
                    )
                    .with_context(context)?;
                    (spans, sentence.text())
                }
            };

            let vectors = match &features {
                None => None,
                Some(frames) => {
                    let frames = frames
                        .get(id.as_str())
                        .ok_or_else(|| anyhow!("sentence `{}` has no frame features", id))?;
                    let pooled = pool_word_vectors(frames.values.view(), &spans, &pooling)
                        .with_context(context)?;
                    let dim = match &pooling {
                        Pooling::Recurrent(cell) => cell.hidden_dim(),
                        _ => frames.values.ncols(),
                    };
                    let flat: Vec<f64> = pooled.iter().flat_map(|v| v.iter().copied()).collect();
                    let values = Array2::from_shape_vec((pooled.len(), dim), flat)?;
                    Some(write_matrix_block(
                        "vectors",
                        &MatrixBlock {
                            sent_id: id.clone(),
                            values,
                        },
                    ))
                }
            };

            Ok(Segmented {
                spans: write_span_block(id, &spans),
                transcript: format!("{}\t{}\n", id, transcript),
                vectors,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(p) = &args.transcript {
        emit(
            Some(p),
            &results
                .iter()
                .map(|r| r.transcript.as_str())
                .collect::<String>(),
        )?;
    }
    if let Some(p) = &args.vectors {
        let text: String = results
            .iter()
            .filter_map(|r| r.vectors.as_deref())
            .collect();
        emit(Some(p), &text)?;
    }
    emit(
        args.output.as_deref(),
        &results.iter().map(|r| r.spans.as_str()).collect::<String>(),
    )
}

fn by_id<T>(items: Vec<T>, id: impl Fn(&T) -> &String) -> Result<HashMap<String, T>> {
    let mut map = HashMap::with_capacity(items.len());
    for item in items {
        let key = id(&item).clone();
        if map.insert(key.clone(), item).is_some() {
            bail!("sentence id `{}` occurs more than once", key);
        }
    }
    Ok(map)
}

fn rates_json(r: &EvalReport) -> serde_json::Value {
    json!({
        "wer": r.wer,
        "cer": r.cer,
        "pos": r.pos_acc,
        "uas": r.uas,
        "las": r.las,
    })
}

fn rates_row(r: &EvalReport) -> String {
    [r.wer, r.cer, r.pos_acc, r.uas, r.las]
        .iter()
        .map(|v| format!("{:.2}", v * 100.0))
        .collect::<Vec<_>>()
        .join("\t")
}

pub fn eval(args: &EvalArgs, as_json: bool) -> Result<()> {
    let hyp = read_conllu(&args.hyp)?;
    let reference = read_conllu(&args.reference)?;
    let options = EvalOptions {
        case_fold: args.case_fold,
    };
    let report = if args.standard {
        evaluate_standard(&hyp, &reference, options)?
    } else {
        evaluate_corpus(&hyp, &reference, options)?
    };

    // Per-sentence rates; sentences with an empty reference have none.
    let per_sentence: Vec<(String, Option<EvalReport>)> = if args.verbose {
        report
            .sentences
            .iter()
            .map(|s| {
                (
                    s.sent_id.clone(),
                    EvalReport::from_sentences(vec![s.clone()]).ok(),
                )
            })
            .collect()
    } else {
        Vec::new()
    };

    let text = if as_json {
        let mut value = rates_json(&report);
        value["counts"] = serde_json::to_value(report.counts)?;
        if args.verbose {
            value["sentences"] = per_sentence
                .iter()
                .map(|(id, r)| {
                    let mut v = r.as_ref().map(rates_json).unwrap_or_else(|| json!({}));
                    v["sent_id"] = json!(id);
                    v
                })
                .collect();
        }
        format!("{}\n", serde_json::to_string_pretty(&value)?)
    } else {
        let mut out = String::new();
        if args.verbose {
            out.push_str("sent_id\tWER\tCER\tPOS\tUAS\tLAS\n");
            for (id, r) in &per_sentence {
                match r {
                    Some(r) => out.push_str(&format!("{}\t{}\n", id, rates_row(r))),
                    None => out.push_str(&format!("{}\t-\t-\t-\t-\t-\n", id)),
                }
            }
            out.push_str(&format!("{}\t{}\n", "all", rates_row(&report)));
        } else {
            out.push_str("WER\tCER\tPOS\tUAS\tLAS\n");
            out.push_str(&rates_row(&report));
            out.push('\n');
        }
        out
    };
    emit(args.output.as_deref(), &text)
}

pub fn perturb(args: &PerturbArgs, seed: u64) -> Result<()> {
    let corpus = read_conllu(&args.io.input)?;
    let spec = PerturbSpec {
        sub_rate: args.sub_rate,
        ins_rate: args.ins_rate,
        del_rate: args.del_rate,
        char_noise_rate: args.char_noise_rate,
        seed,
    };
    let hyp = perturb_corpus(&corpus, &spec)?;
    emit(args.io.output.as_deref(), &write_conllu(&hyp))
}

pub fn stats(input: &Path, output: Option<&Path>, as_json: bool) -> Result<()> {
    let stats = corpus_stats(&read_conllu(input)?);
    let text = if as_json {
        format!("{}\n", serde_json::to_string_pretty(&stats)?)
    } else {
        let mut out = format!(
            "sentences\t{}\ntokens\t{}\nprojective\t{} ({:.2}%)\n",
            stats.sentences,
            stats.tokens,
            stats.projective_sentences,
            stats.projectivity_rate * 100.0
        );
        out.push_str(&format!("\nupos\t{}\n", stats.upos.len()));
        for (tag, count) in &stats.upos {
            out.push_str(&format!("{}\t{}\n", tag, count));
        }
        out.push_str(&format!("\ndeprel\t{}\n", stats.deprels.len()));
        for (rel, count) in &stats.deprels {
            out.push_str(&format!("{}\t{}\n", rel, count));
        }
        out.push_str("\nroots\tsentences\n");
        for (roots, count) in &stats.root_arity {
            out.push_str(&format!("{}\t{}\n", roots, count));
        }
        out
    };
    emit(output, &text)
}
