// SPDX-License-Identifier: Apache-2.0

//! Problem corpora and SFT datasets as line-delimited JSON.
//!
//! Each non-blank line of a corpus file is one JSON object. The fields
//! `id`, `source`, `spec` and `golden_code` are required strings,
//! `reference_tb` is an optional string, and every other field is kept in
//! [`ProblemRecord::meta`] so that upstream datasets with extra columns load
//! without loss.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::agents::extract_code_block;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: missing required field `{field}`")]
    MissingField {
        path: String,
        line: usize,
        field: &'static str,
    },
    #[error("{path}:{line}: invalid field `{field}`: {message}")]
    InvalidField {
        path: String,
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("{path}:{line}: duplicate id `{id}` (first seen on line {first_line})")]
    DuplicateId {
        path: String,
        line: usize,
        id: String,
        first_line: usize,
    },
    #[error("SFT record {index}: {message}")]
    InvalidSft { index: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One corpus item: a design specification with its golden module and, for
/// curated datasets, a reference testbench.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemRecord {
    pub id: String,
    pub source: String,
    pub spec: String,
    pub golden_code: String,
    pub reference_tb: Option<String>,
    pub meta: BTreeMap<String, String>,
}

impl ProblemRecord {
    pub fn new(id: &str, source: &str, spec: &str, golden_code: &str) -> Self {
        ProblemRecord {
            id: id.to_string(),
            source: source.to_string(),
            spec: spec.to_string(),
            golden_code: golden_code.to_string(),
            reference_tb: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_tb(mut self, tb: &str) -> Self {
        self.reference_tb = Some(tb.to_string());
        self
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("id".into(), Value::String(self.id.clone()));
        m.insert("source".into(), Value::String(self.source.clone()));
        m.insert("spec".into(), Value::String(self.spec.clone()));
        m.insert("golden_code".into(), Value::String(self.golden_code.clone()));
        if let Some(tb) = &self.reference_tb {
            m.insert("reference_tb".into(), Value::String(tb.clone()));
        }
        if !self.meta.is_empty() {
            let meta = self
                .meta
                .iter()
                .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                .collect();
            m.insert("meta".into(), Value::Object(meta));
        }
        Value::Object(m)
    }

    fn from_json(obj: Map<String, Value>, path: &str, line: usize) -> Result<Self, CorpusError> {
        let mut obj = obj;
        let mut take = |field: &'static str, required: bool| -> Result<Option<String>, CorpusError> {
            match obj.remove(field) {
                None | Some(Value::Null) if required => Err(CorpusError::MissingField {
                    path: path.to_string(),
                    line,
                    field,
                }),
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => {
                    if s.trim().is_empty() {
                        Err(CorpusError::InvalidField {
                            path: path.to_string(),
                            line,
                            field,
                            message: "must be non-empty".into(),
                        })
                    } else {
                        Ok(Some(s))
                    }
                }
                Some(_) => Err(CorpusError::InvalidField {
                    path: path.to_string(),
                    line,
                    field,
                    message: "must be a string".into(),
                }),
            }
        };
        let id = take("id", true)?.unwrap_or_default();
        let source = take("source", true)?.unwrap_or_default();
        let spec = take("spec", true)?.unwrap_or_default();
        let golden_code = take("golden_code", true)?.unwrap_or_default();
        let reference_tb = take("reference_tb", false)?;

        let mut meta = BTreeMap::new();
        if let Some(v) = obj.remove("meta") {
            match v {
                Value::Object(m) => {
                    for (k, v) in m {
                        meta.insert(k, json_to_text(v));
                    }
                }
                other => {
                    meta.insert("meta".to_string(), json_to_text(other));
                }
            }
        }
        for (k, v) in obj {
            meta.insert(k, json_to_text(v));
        }
        Ok(ProblemRecord {
            id,
            source,
            spec,
            golden_code,
            reference_tb,
            meta,
        })
    }
}

fn json_to_text(v: Value) -> String {
    match v {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

/// Summary written next to every dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub path: PathBuf,
    pub record_count: usize,
    pub with_tb_count: usize,
    pub source_tags: BTreeSet<String>,
}

impl DatasetManifest {
    pub fn for_records(path: &Path, records: &[ProblemRecord]) -> Self {
        DatasetManifest {
            path: path.to_path_buf(),
            record_count: records.len(),
            with_tb_count: records.iter().filter(|r| r.reference_tb.is_some()).count(),
            source_tags: records.iter().map(|r| r.source.clone()).collect(),
        }
    }
}

/// `data.jsonl` → `data.jsonl.manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn write_manifest(m: &DatasetManifest) -> Result<(), CorpusError> {
    let mp = manifest_path(&m.path);
    let text = serde_json::to_string_pretty(m).expect("manifest serializes") + "\n";
    std::fs::write(&mp, text).map_err(io_err(&mp))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, CorpusError> {
    let mp = manifest_path(path);
    let text = std::fs::read_to_string(&mp).map_err(io_err(&mp))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
        path: mp.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Parse corpus text. `origin` names the source in error messages.
pub fn parse_dataset(text: &str, origin: &str) -> Result<Vec<ProblemRecord>, CorpusError> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            path: origin.to_string(),
            line: lineno,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(CorpusError::Parse {
                path: origin.to_string(),
                line: lineno,
                message: "expected a JSON object".into(),
            });
        };
        let rec = ProblemRecord::from_json(obj, origin, lineno)?;
        if let Some(first) = seen.get(&rec.id) {
            return Err(CorpusError::DuplicateId {
                path: origin.to_string(),
                line: lineno,
                id: rec.id,
                first_line: *first,
            });
        }
        seen.insert(rec.id.clone(), lineno);
        out.push(rec);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<ProblemRecord>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_dataset(&text, &path.display().to_string())
}

/// Keep records that satisfy both predicates, in their original order.
pub fn filter_records(
    records: &[ProblemRecord],
    require_tb: bool,
    source_filter: Option<&BTreeSet<String>>,
) -> Vec<ProblemRecord> {
    records
        .iter()
        .filter(|r| !require_tb || r.reference_tb.is_some())
        .filter(|r| source_filter.is_none_or(|f| f.contains(&r.source)))
        .cloned()
        .collect()
}

/// Write a corpus file and its manifest.
pub fn write_dataset(records: &[ProblemRecord], path: &Path) -> Result<DatasetManifest, CorpusError> {
    write_lines(path, records.iter().map(|r| r.to_json()))?;
    let m = DatasetManifest::for_records(path, records);
    write_manifest(&m)?;
    Ok(m)
}

fn write_lines(path: &Path, rows: impl Iterator<Item = Value>) -> Result<(), CorpusError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftLabels {
    /// `functional`, `syntactic` or `compile_error`.
    pub classification: String,
    /// What produced the record, e.g. `distill` or `gen-tb:pregen`.
    pub provenance: String,
}

/// One instruction/response pair for supervised fine-tuning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub instruction: String,
    pub response: String,
    pub labels: SftLabels,
}

impl SftRecord {
    /// Response layout: optional `<think>` block followed by a fenced
    /// Verilog block.
    pub fn from_parts(instruction: &str, reasoning: Option<&str>, code: &str, labels: SftLabels) -> Self {
        let mut response = String::new();
        if let Some(r) = reasoning.filter(|r| !r.trim().is_empty()) {
            response.push_str("<think>\n");
            response.push_str(r.trim());
            response.push_str("\n</think>\n\n");
        }
        response.push_str("```verilog\n");
        response.push_str(code.trim_end());
        response.push_str("\n```\n");
        SftRecord {
            instruction: instruction.to_string(),
            response,
            labels,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.instruction.trim().is_empty() {
            return Err("instruction is empty".into());
        }
        match extract_code_block(&self.response) {
            Ok(code) if !code.trim().is_empty() => Ok(()),
            Ok(_) => Err("response code block is empty".into()),
            Err(e) => Err(format!("response has no code block: {e}")),
        }
    }
}

/// Validate every record, then write them one per line with a manifest.
/// Nothing is written if any record is invalid.
pub fn write_sft_dataset(records: &[SftRecord], path: &Path) -> Result<DatasetManifest, CorpusError> {
    for (index, r) in records.iter().enumerate() {
        r.validate()
            .map_err(|message| CorpusError::InvalidSft { index, message })?;
    }
    write_lines(
        path,
        records
            .iter()
            .map(|r| serde_json::to_value(r).expect("SFT record serializes")),
    )?;
    let m = DatasetManifest {
        path: path.to_path_buf(),
        record_count: records.len(),
        with_tb_count: 0,
        source_tags: records.iter().map(|r| r.labels.provenance.clone()).collect(),
    };
    write_manifest(&m)?;
    Ok(m)
}

pub fn load_sft_dataset(path: &Path) -> Result<Vec<SftRecord>, CorpusError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: SftRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, tb: bool) -> ProblemRecord {
        let r = ProblemRecord::new(id, "pyranet", "an inverter", "module inv(input a, output y); assign y = ~a; endmodule");
        if tb {
            r.with_tb("module tb; endmodule")
        } else {
            r
        }
    }

    #[test]
    fn empty_text_loads_empty() {
        assert!(parse_dataset("", "x").unwrap().is_empty());
        assert!(parse_dataset("\n  \n", "x").unwrap().is_empty());
    }

    #[test]
    fn two_records_in_order() {
        let text = r#"{"id":"b","source":"s","spec":"x","golden_code":"m"}
{"id":"a","source":"s","spec":"y","golden_code":"n","reference_tb":"t"}"#;
        let rs = parse_dataset(text, "f").unwrap();
        assert_eq!(rs.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["b", "a"]);
        assert_eq!(rs[1].reference_tb.as_deref(), Some("t"));
    }

    #[test]
    fn missing_field_names_line_and_field() {
        let text = r#"{"id":"a","source":"s","spec":"x","golden_code":"m"}
{"id":"b","source":"s","golden_code":"m"}"#;
        let err = parse_dataset(text, "f.jsonl").unwrap_err();
        assert!(matches!(err, CorpusError::MissingField { line: 2, field: "spec", .. }));
        assert_eq!(err.to_string(), "f.jsonl:2: missing required field `spec`");
    }

    #[test]
    fn malformed_line_names_line() {
        let err = parse_dataset("{\"id\":\"a\"\n", "f").unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 1, .. }));
        let err = parse_dataset("[1,2]", "f").unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = r#"{"id":"a","source":"s","spec":"x","golden_code":"m"}"#;
        let err = parse_dataset(&format!("{line}\n\n{line}"), "f").unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 3, first_line: 1, .. }));
    }

    #[test]
    fn empty_required_and_optional_strings_rejected() {
        let err = parse_dataset(r#"{"id":"","source":"s","spec":"x","golden_code":"m"}"#, "f").unwrap_err();
        assert!(matches!(err, CorpusError::InvalidField { field: "id", .. }));
        let err = parse_dataset(
            r#"{"id":"a","source":"s","spec":"x","golden_code":"m","reference_tb":" "}"#,
            "f",
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::InvalidField { field: "reference_tb", .. }));
        let err = parse_dataset(r#"{"id":"a","source":"s","spec":3,"golden_code":"m"}"#, "f").unwrap_err();
        assert!(matches!(err, CorpusError::InvalidField { field: "spec", .. }));
    }

    #[test]
    fn unknown_fields_go_to_meta() {
        let rs = parse_dataset(
            r#"{"id":"a","source":"s","spec":"x","golden_code":"m","difficulty":3,"lang":"v","meta":{"k":"v"}}"#,
            "f",
        )
        .unwrap();
        let meta = &rs[0].meta;
        assert_eq!(meta["difficulty"], "3");
        assert_eq!(meta["lang"], "v");
        assert_eq!(meta["k"], "v");
    }

    #[test]
    fn filter_by_tb_and_source() {
        let mut rs = vec![rec("a", false), rec("b", true), rec("c", false)];
        assert_eq!(filter_records(&rs, true, None), vec![rs[1].clone()]);
        assert_eq!(filter_records(&rs, false, None), rs);
        rs[2].source = "deepcircuitx".into();
        let only: BTreeSet<String> = ["deepcircuitx".to_string()].into();
        let out = filter_records(&rs, false, Some(&only));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "c");
    }

    #[test]
    fn full_scale_tb_filter_keeps_everything() {
        let rs: Vec<_> = (0..6704).map(|i| rec(&format!("p{i}"), true)).collect();
        let kept = filter_records(&rs, true, None);
        assert_eq!(kept.len(), rs.len());
        assert_eq!(DatasetManifest::for_records(Path::new("x"), &kept).with_tb_count, 6704);
    }

    #[test]
    fn dataset_round_trip_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let mut rs = vec![rec("a", true), rec("b", false)];
        rs[1].meta.insert("origin".into(), "x".into());
        let m = write_dataset(&rs, &p).unwrap();
        assert_eq!((m.record_count, m.with_tb_count), (2, 1));
        assert_eq!(load_dataset(&p).unwrap(), rs);
        assert_eq!(read_manifest(&p).unwrap(), m);
    }

    fn sft(i: usize) -> SftRecord {
        SftRecord::from_parts(
            &format!("spec {i}"),
            Some("think"),
            "module m; endmodule",
            SftLabels {
                classification: "functional".into(),
                provenance: "distill".into(),
            },
        )
    }

    #[test]
    fn sft_write_counts_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sft.jsonl");
        let m = write_sft_dataset(&[], &p).unwrap();
        assert_eq!(m.record_count, 0);
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "");
        let rs: Vec<_> = (0..5).map(sft).collect();
        let m = write_sft_dataset(&rs, &p).unwrap();
        assert_eq!(m.record_count, 5);
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 5);
        assert_eq!(load_sft_dataset(&p).unwrap(), rs);
    }

    #[test]
    fn sft_without_code_block_rejected_before_write() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sft.jsonl");
        let mut bad = sft(0);
        bad.response = "just words".into();
        let err = write_sft_dataset(&[sft(1), bad], &p).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidSft { index: 1, .. }));
        assert!(!p.exists());
    }

    #[test]
    fn io_error_carries_path() {
        let err = load_dataset(Path::new("/nonexistent/d.jsonl")).unwrap_err();
        assert!(err.to_string().starts_with("/nonexistent/d.jsonl"));
    }

    fn text() -> impl Strategy<Value = String> {
        "[ -~\\n\\t{}\"\\\\é]{1,40}".prop_filter("non-blank", |s| !s.trim().is_empty())
    }

    prop_compose! {
        fn arb_record()(
            id in "[a-z0-9_]{1,12}",
            source in text(),
            spec in text(),
            golden in text(),
            tb in proptest::option::of(text()),
            meta in proptest::collection::btree_map("[a-z]{1,6}", "[ -~]{0,10}", 0..3),
        ) -> ProblemRecord {
            let meta = meta
                .into_iter()
                .filter(|(k, _)| !["id", "source", "spec", "golden_code", "reference_tb", "meta"].contains(&k.as_str()))
                .collect();
            ProblemRecord { id, source, spec, golden_code: golden, reference_tb: tb, meta }
        }
    }

    fn dedup(mut rs: Vec<ProblemRecord>) -> Vec<ProblemRecord> {
        let mut seen = BTreeSet::new();
        rs.retain(|r| seen.insert(r.id.clone()));
        rs
    }

    proptest! {
        #[test]
        fn write_then_load_is_identity(rs in proptest::collection::vec(arb_record(), 0..20)) {
            let rs = dedup(rs);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("d.jsonl");
            let m = write_dataset(&rs, &p).unwrap();
            prop_assert_eq!(load_dataset(&p).unwrap(), rs.clone());
            prop_assert_eq!(m.with_tb_count, rs.iter().filter(|r| r.reference_tb.is_some()).count());
            prop_assert!(m.with_tb_count <= m.record_count);
        }

        #[test]
        fn filtering_is_idempotent(
            rs in proptest::collection::vec(arb_record(), 0..30),
            require_tb: bool,
            use_filter: bool,
        ) {
            let tags: BTreeSet<String> = rs.iter().take(2).map(|r| r.source.clone()).collect();
            let f = use_filter.then_some(&tags);
            let once = filter_records(&rs, require_tb, f);
            let twice = filter_records(&once, require_tb, f);
            prop_assert_eq!(&once, &twice);
            let m = DatasetManifest::for_records(Path::new("x"), &once);
            prop_assert_eq!(m.with_tb_count, once.iter().filter(|r| r.reference_tb.is_some()).count());
        }
    }
}
