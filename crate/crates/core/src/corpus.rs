//! Sentence import, corpus export and reference-file loading.
//!
//! All files are UTF-8. Imports take one sentence per line (an optional
//! leading `id<TAB>` column is accepted and ignored — task ids are always
//! engine-assigned). Reference files are two-column TSV: task id or task
//! text, then one reference rendering; tasks may repeat across rows.
//! Exports are TSV rows of informal text, nth-best formal text, point and
//! EM belief.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::engine::Project;
use crate::eval::{extract_nth_corpus, ReferenceSet};
use crate::model::CandidateId;
use crate::text::normalize;
use crate::time::Timestamp;

#[derive(Debug, Error)]
pub enum CorpusIoError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8")]
    NotUtf8 { path: String },
    #[error("cannot write {path}: {source}")]
    WriteFailure {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: no task matches '{text}'")]
    UnknownTask { line: usize, text: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn read_utf8(path: &Path) -> Result<String, CorpusIoError> {
    let bytes = fs::read(path).map_err(|source| CorpusIoError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|_| CorpusIoError::NotUtf8 {
        path: path.display().to_string(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ImportSummary {
    pub created: u64,
    pub skipped_duplicates: u64,
    pub skipped_blank: u64,
}

/// Strip an optional leading `id<TAB>` column.
fn sentence_of(line: &str) -> &str {
    if let Some((first, rest)) = line.split_once('\t') {
        if !first.is_empty() && first.chars().all(|c| c.is_ascii_digit()) {
            return rest;
        }
    }
    line
}

/// Import sentences from pre-split lines (the testable core of
/// [`import_sentences`]).
pub fn import_lines<'a>(
    project: &mut Project,
    lines: impl Iterator<Item = &'a str>,
    at: Timestamp,
) -> ImportSummary {
    let mut summary = ImportSummary::default();
    for line in lines {
        let sentence = sentence_of(line);
        if normalize(sentence).is_empty() {
            summary.skipped_blank += 1;
            continue;
        }
        match project.import_task(sentence, at) {
            Some(_) => summary.created += 1,
            None => summary.skipped_duplicates += 1,
        }
    }
    summary
}

/// Import a sentence file, one task per surviving line.
pub fn import_sentences(
    project: &mut Project,
    path: &Path,
    at: Timestamp,
) -> Result<ImportSummary, CorpusIoError> {
    let content = read_utf8(path)?;
    Ok(import_lines(project, content.lines(), at))
}

/// Render the rank-n export as TSV, rows ordered by task id.
pub fn render_export(
    project: &Project,
    beliefs: &BTreeMap<CandidateId, f64>,
    rank: usize,
) -> String {
    let extract = extract_nth_corpus(project, beliefs, rank);
    let mut out = String::new();
    for pair in &extract.pairs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.4}\n",
            pair.informal, pair.text, pair.point, pair.belief
        ));
    }
    out
}

/// Write the rank-n export file; returns the written row count.
pub fn export_corpus(
    project: &Project,
    beliefs: &BTreeMap<CandidateId, f64>,
    rank: usize,
    path: &Path,
) -> Result<u64, CorpusIoError> {
    let content = render_export(project, beliefs, rank);
    let rows = content.lines().count() as u64;
    fs::write(path, content).map_err(|source| CorpusIoError::WriteFailure {
        path: path.display().to_string(),
        source,
    })?;
    Ok(rows)
}

/// Parse a two-column reference file against the project's tasks.
pub fn parse_references(project: &Project, content: &str) -> Result<ReferenceSet, CorpusIoError> {
    let mut set = ReferenceSet::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (key, reference) = line.split_once('\t').ok_or(CorpusIoError::Malformed {
            line: line_no,
            reason: "expected two tab-separated columns".to_owned(),
        })?;
        if normalize(reference).is_empty() {
            return Err(CorpusIoError::Malformed {
                line: line_no,
                reason: "empty reference text".to_owned(),
            });
        }
        let task_id = if !key.is_empty() && key.chars().all(|c| c.is_ascii_digit()) {
            let id = crate::model::TaskId(key.parse().expect("digits parse"));
            project.task(id).map(|t| t.id)
        } else {
            project.task_for_text(&normalize(key))
        };
        let task_id = task_id.ok_or_else(|| CorpusIoError::UnknownTask {
            line: line_no,
            text: key.to_owned(),
        })?;
        set.insert(task_id, normalize(reference));
    }
    Ok(set)
}

/// Load a reference file.
pub fn load_references(project: &Project, path: &Path) -> Result<ReferenceSet, CorpusIoError> {
    let content = read_utf8(path)?;
    parse_references(project, &content)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProjectConfig;

    fn project() -> Project {
        Project::new(ProjectConfig::default(), Timestamp::from_millis(0)).unwrap()
    }

    #[test]
    fn import_counts_duplicates_and_blanks() {
        let mut p = project();
        let summary = import_lines(
            &mut p,
            ["hello there", "", "hello  there", "bye"].into_iter(),
            Timestamp::from_millis(1),
        );
        assert_eq!(
            summary,
            ImportSummary {
                created: 2,
                skipped_duplicates: 1,
                skipped_blank: 1
            }
        );
        assert_eq!(p.tasks().len(), 2);
    }

    #[test]
    fn import_accepts_id_column() {
        let mut p = project();
        let summary = import_lines(
            &mut p,
            ["17\tfirst sentence", "23\tsecond sentence"].into_iter(),
            Timestamp::from_millis(1),
        );
        assert_eq!(summary.created, 2);
        // engine assigns its own ids
        assert!(p.task(crate::model::TaskId(1)).is_some());
        assert_eq!(
            p.task(crate::model::TaskId(1)).unwrap().informal_text,
            "first sentence"
        );
    }

    #[test]
    fn five_hundred_unique_lines_become_five_hundred_tasks() {
        let mut p = project();
        let lines: Vec<String> = (0..500).map(|i| format!("informal sentence {i}")).collect();
        let summary = import_lines(
            &mut p,
            lines.iter().map(String::as_str),
            Timestamp::from_millis(1),
        );
        assert_eq!(summary.created, 500);
        assert_eq!(p.tasks().len(), 500);
    }

    #[test]
    fn empty_file_imports_nothing() {
        let mut p = project();
        let summary = import_lines(&mut p, std::iter::empty(), Timestamp::from_millis(1));
        assert_eq!(summary, ImportSummary::default());
    }

    #[test]
    fn references_resolve_by_id_and_text() {
        let mut p = project();
        let t1 = p.import_task("informal one", Timestamp::from_millis(1)).unwrap();
        let t2 = p.import_task("informal two", Timestamp::from_millis(2)).unwrap();
        let refs =
            parse_references(&p, "1\tformal one\ninformal two\tformal two\n1\tformal one b\n")
                .unwrap();
        assert_eq!(refs.get(t1).unwrap().len(), 2);
        assert_eq!(refs.get(t2).unwrap(), ["formal two"]);
    }

    #[test]
    fn references_reject_unknown_tasks() {
        let p = project();
        let err = parse_references(&p, "no such task\tformal\n").unwrap_err();
        assert!(matches!(err, CorpusIoError::UnknownTask { line: 1, .. }));
    }

    #[test]
    fn export_renders_belief_to_four_decimals() {
        let mut p = project();
        let task = p.import_task("informal", Timestamp::from_millis(1)).unwrap();
        let author = p.register_participant("a", "chat:a", Timestamp::from_millis(2));
        let outcome = p
            .submit_candidate(author, task, "formal", Timestamp::from_millis(3))
            .unwrap();
        let mut beliefs = BTreeMap::new();
        beliefs.insert(outcome.candidate_id.unwrap(), 0.92702);
        let tsv = render_export(&p, &beliefs, 1);
        assert_eq!(tsv, "informal\tformal\t0\t0.9270\n");
    }

    #[test]
    fn export_skips_tasks_without_nth_candidate() {
        let mut p = project();
        let task = p.import_task("informal", Timestamp::from_millis(1)).unwrap();
        let author = p.register_participant("a", "chat:a", Timestamp::from_millis(2));
        p.submit_candidate(author, task, "formal", Timestamp::from_millis(3))
            .unwrap();
        let beliefs = BTreeMap::new();
        assert_eq!(render_export(&p, &beliefs, 3), "");
    }
}
