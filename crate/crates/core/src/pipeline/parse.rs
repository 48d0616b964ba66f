//! Ingestion of annotation-tool exports (JSONL and CSV), one row per
//! (item, annotator).

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotation::{AnnotationRecord, ItemAnnotations};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Jsonl => "jsonl",
            Format::Csv => "csv",
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "jsonl" | "ndjson" | "json" => Some(Format::Jsonl),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!(
                "unknown format {other:?} (expected jsonl or csv)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub format: Format,
    /// Hex SHA-256 of the raw input bytes.
    pub content_hash: String,
    /// Seconds since the Unix epoch. Not written into artifacts, so
    /// reruns stay byte-identical.
    #[serde(skip)]
    pub ingested_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub items: Vec<ItemAnnotations>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&ItemAnnotations> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn index(&self) -> HashMap<&str, &ItemAnnotations> {
        self.items.iter().map(|i| (i.item_id.as_str(), i)).collect()
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Deserialize)]
struct JsonRow {
    item_id: String,
    annotator_id: String,
    labels: Vec<i64>,
    #[serde(default)]
    strength: Option<i64>,
    #[serde(default)]
    text: Option<String>,
}

struct RawRow {
    line: usize,
    item_id: String,
    annotator_id: String,
    labels: Vec<i64>,
    strength: Option<i64>,
    text: Option<String>,
}

fn at_line(err: Error, line: usize) -> Error {
    match err {
        Error::Contradiction {
            item_id,
            annotator_id,
            ..
        } => Error::Contradiction {
            line,
            item_id,
            annotator_id,
        },
        Error::DuplicateAnnotation {
            item_id,
            annotator_id,
            ..
        } => Error::DuplicateAnnotation {
            line,
            item_id,
            annotator_id,
        },
        Error::Parse { message, .. } => Error::Parse { line, message },
        other => Error::Parse {
            line,
            message: other.to_string(),
        },
    }
}

fn jsonl_rows(text: &str) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let r: JsonRow = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        rows.push(RawRow {
            line,
            item_id: r.item_id,
            annotator_id: r.annotator_id,
            labels: r.labels,
            strength: r.strength,
            text: r.text,
        });
    }
    Ok(rows)
}

fn parse_int(field: &str, what: &str, line: usize) -> Result<i64> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} {field:?} is not an integer"),
    })
}

fn csv_rows(bytes: &[u8]) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = ["item_id", "annotator_id", "labels", "strength"];
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_text = names.len() == 5 && names[4] == "text";
    if names.len() < 4 || names[..4] != expected || (names.len() > 4 && !has_text) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "unexpected CSV header {names:?}; expected item_id,annotator_id,labels,strength[,text]"
            ),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < 4 || rec.len() > names.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        let labels = rec[2]
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_int(s, "label", line))
            .collect::<Result<Vec<_>>>()?;
        let strength = match rec[3].trim() {
            "" | "null" => None,
            s => Some(parse_int(s, "strength", line)?),
        };
        let text = rec.get(4).filter(|t| !t.is_empty()).map(str::to_string);
        rows.push(RawRow {
            line,
            item_id: rec[0].to_string(),
            annotator_id: rec[1].to_string(),
            labels,
            strength,
            text,
        });
    }
    Ok(rows)
}

fn group(rows: Vec<RawRow>) -> Result<Vec<ItemAnnotations>> {
    struct Pending {
        item_id: String,
        text: Option<String>,
        records: Vec<AnnotationRecord>,
    }
    let mut order: Vec<Pending> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in rows {
        if row.item_id.is_empty() || row.annotator_id.is_empty() {
            return Err(Error::Parse {
                line: row.line,
                message: "item_id and annotator_id must be non-empty".into(),
            });
        }
        let record =
            AnnotationRecord::new(&row.item_id, &row.annotator_id, &row.labels, row.strength)
                .map_err(|e| at_line(e, row.line))?;
        let slot = *index.entry(row.item_id.clone()).or_insert_with(|| {
            order.push(Pending {
                item_id: row.item_id.clone(),
                text: None,
                records: Vec::new(),
            });
            order.len() - 1
        });
        let pending = &mut order[slot];
        if pending
            .records
            .iter()
            .any(|r| r.annotator_id == row.annotator_id)
        {
            return Err(Error::DuplicateAnnotation {
                line: row.line,
                item_id: row.item_id,
                annotator_id: row.annotator_id,
            });
        }
        if pending.text.is_none() {
            pending.text = row.text;
        }
        pending.records.push(record);
    }
    order
        .into_iter()
        .map(|p| ItemAnnotations::new(p.item_id, p.text, p.records))
        .collect()
}

/// Parses an export into one [`ItemAnnotations`] per distinct item id, in
/// order of first appearance.
pub fn parse_annotations(
    mut source: impl Read,
    format: Format,
    source_name: &str,
) -> Result<Dataset> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(source_name, e))?;
    parse_bytes(&bytes, format, source_name)
}

pub fn parse_bytes(bytes: &[u8], format: Format, source_name: &str) -> Result<Dataset> {
    let rows = match format {
        Format::Jsonl => {
            let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
                line: 0,
                message: format!("input is not UTF-8: {e}"),
            })?;
            jsonl_rows(text)?
        }
        Format::Csv => csv_rows(bytes)?,
    };
    let items = group(rows)?;
    Ok(Dataset {
        items,
        provenance: Provenance {
            source: source_name.to_string(),
            format,
            content_hash: content_hash(bytes),
            ingested_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        },
    })
}

#[derive(Serialize)]
struct OutRow<'a> {
    item_id: &'a str,
    annotator_id: &'a str,
    labels: Vec<u8>,
    strength: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
}

fn out_rows(items: &[ItemAnnotations]) -> impl Iterator<Item = OutRow<'_>> {
    items.iter().flat_map(|item| {
        item.records().iter().enumerate().map(move |(k, r)| OutRow {
            item_id: &item.item_id,
            annotator_id: &r.annotator_id,
            labels: r.labels().iter().map(|l| l.0).collect(),
            strength: r.strength,
            text: if k == 0 { item.text.as_deref() } else { None },
        })
    })
}

/// Writes items back out as JSONL; text rides on each item's first record.
pub fn to_jsonl(items: &[ItemAnnotations]) -> Vec<u8> {
    let mut out = Vec::new();
    for row in out_rows(items) {
        serde_json::to_writer(&mut out, &row).expect("in-memory JSON");
        out.push(b'\n');
    }
    out
}

pub fn to_csv(items: &[ItemAnnotations]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item_id", "annotator_id", "labels", "strength", "text"])
        .expect("in-memory CSV");
    for row in out_rows(items) {
        let labels: Vec<String> = row.labels.iter().map(u8::to_string).collect();
        w.write_record([
            row.item_id,
            row.annotator_id,
            &labels.join(";"),
            &row.strength.map(|s| s.to_string()).unwrap_or_default(),
            row.text.unwrap_or(""),
        ])
        .expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::ClassLabel;

    #[test]
    fn jsonl_row_maps_fields() {
        let src = br#"{"item_id":"t1","annotator_id":"a1","labels":[3,4],"strength":6}"#;
        let ds = parse_bytes(src, Format::Jsonl, "mem").unwrap();
        assert_eq!(ds.len(), 1);
        let r = &ds.items[0].records()[0];
        assert_eq!(r.labels(), &[ClassLabel(3), ClassLabel(4)]);
        assert_eq!(r.strength, Some(6));
        assert_eq!(ds.provenance.content_hash, content_hash(src));
    }

    #[test]
    fn csv_rows_parse() {
        let src = "item_id,annotator_id,labels,strength\nt1,a2,\"0\",0\nt1,a1,1;2,\n";
        let ds = parse_bytes(src.as_bytes(), Format::Csv, "mem").unwrap();
        let recs = ds.items[0].records();
        assert_eq!(recs[0].labels(), &[ClassLabel(0)]);
        assert_eq!(recs[0].strength, Some(0));
        assert_eq!(recs[1].labels(), &[ClassLabel(1), ClassLabel(2)]);
        assert_eq!(recs[1].strength, None);
    }

    #[test]
    fn csv_contradiction_reports_line() {
        let src = "item_id,annotator_id,labels,strength\nt1,a2,\"0\",0\nt1,a3,\"0;4\",2\n";
        match parse_bytes(src.as_bytes(), Format::Csv, "mem") {
            Err(Error::Contradiction { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_errors_carry_line_numbers() {
        let src = "{\"item_id\":\"t1\",\"annotator_id\":\"a1\",\"labels\":[1]}\n\n{\"item_id\":\"t1\",\"annotator_id\":\"a2\",\"labels\":[7]}\n";
        match parse_bytes(src.as_bytes(), Format::Jsonl, "mem") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains('7'));
            }
            other => panic!("{other:?}"),
        }
        let src = r#"{"item_id":"t1","annotator_id":"a1","labels":[1],"strength":11}"#;
        assert!(matches!(
            parse_bytes(src.as_bytes(), Format::Jsonl, "mem"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let src = "item_id,annotator_id,labels,strength\nt1,a1,1,\nt2,a1,1,\nt1,a1,2,\n";
        assert!(matches!(
            parse_bytes(src.as_bytes(), Format::Csv, "mem"),
            Err(Error::DuplicateAnnotation { line: 4, .. })
        ));
    }

    #[test]
    fn bad_csv_header_is_rejected() {
        let src = "id,annotator,labels\nt1,a1,1\n";
        assert!(parse_bytes(src.as_bytes(), Format::Csv, "mem").is_err());
    }

    #[test]
    fn text_column_round_trips() {
        let src =
            "item_id,annotator_id,labels,strength,text\nt1,a1,1,3,\"hello, world\"\nt1,a2,2,4,\n";
        let ds = parse_bytes(src.as_bytes(), Format::Csv, "mem").unwrap();
        assert_eq!(ds.items[0].text.as_deref(), Some("hello, world"));
        let back = parse_bytes(&to_jsonl(&ds.items), Format::Jsonl, "mem").unwrap();
        assert_eq!(back.items, ds.items);
        let back = parse_bytes(&to_csv(&ds.items), Format::Csv, "mem").unwrap();
        assert_eq!(back.items, ds.items);
    }
}
