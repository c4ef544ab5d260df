//! Review files: canonical JSON lines and raw Yelp / Amazon exports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use transnets_core::corpus::ReviewRecord;

use crate::error::{Error, ErrorCode, Result};

/// Layout of an input review file. All are one JSON object per line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `user_id`, `item_id`, `rating`, `text`
    Jsonl,
    /// `user_id`, `business_id`, `stars`, `text`
    Yelp,
    /// `reviewerID`, `asin`, `overall`, `reviewText`
    Amazon,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "yelp" => Ok(Format::Yelp),
            "amazon" => Ok(Format::Amazon),
            other => Err(Error::new(
                ErrorCode::UnknownFormat,
                format!("unknown format {other:?} (expected jsonl, yelp or amazon)"),
            )),
        }
    }
}

#[derive(Deserialize)]
struct YelpLine {
    user_id: String,
    business_id: String,
    stars: f64,
    #[serde(default)]
    text: String,
}

#[derive(Deserialize)]
struct AmazonLine {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    overall: f64,
    #[serde(default, rename = "reviewText")]
    review_text: String,
}

#[derive(Deserialize)]
struct CanonicalLine {
    user_id: String,
    item_id: String,
    rating: f64,
    #[serde(default)]
    text: String,
}

/// Records read from a file, and how many were dropped for empty text.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub records: Vec<ReviewRecord>,
    pub dropped_empty: usize,
}

fn parse_line(line: &str, format: Format) -> serde_json::Result<ReviewRecord> {
    Ok(match format {
        Format::Jsonl => {
            let l: CanonicalLine = serde_json::from_str(line)?;
            ReviewRecord::new(l.user_id, l.item_id, l.rating, l.text)
        }
        Format::Yelp => {
            let l: YelpLine = serde_json::from_str(line)?;
            ReviewRecord::new(l.user_id, l.business_id, l.stars, l.text)
        }
        Format::Amazon => {
            let l: AmazonLine = serde_json::from_str(line)?;
            ReviewRecord::new(l.reviewer_id, l.asin, l.overall, l.review_text)
        }
    })
}

/// Reads one record per non-blank line. Records whose text is empty or
/// whitespace are dropped and counted; duplicates are kept.
pub fn read_records<R: BufRead>(reader: R, format: Format, source: &str) -> Result<Loaded> {
    let mut records = Vec::new();
    let mut dropped_empty = 0;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::new(ErrorCode::Io, format!("{source}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_line(&line, format)
            .map_err(|e| Error::new(ErrorCode::Parse, format!("{source}: line {}: {e}", n + 1)))?;
        if !record.rating.is_finite() {
            return Err(Error::new(
                ErrorCode::Parse,
                format!("{source}: line {}: rating is not finite", n + 1),
            ));
        }
        if record.text.trim().is_empty() {
            dropped_empty += 1;
        } else {
            records.push(record);
        }
    }
    Ok(Loaded { records, dropped_empty })
}

pub fn load_reviews(path: &Path, format: Format) -> Result<Loaded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(BufReader::new(file), format, &path.display().to_string())
}

pub fn write_records<W: Write>(mut w: W, records: &[ReviewRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_records(path: &Path, records: &[ReviewRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(BufWriter::new(file), records).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, format: Format) -> Result<Loaded> {
        read_records(text.as_bytes(), format, "fixture")
    }

    #[test]
    fn drops_empty_text_and_counts_it() {
        let text = concat!(
            r#"{"user_id":"a","item_id":"x","rating":4,"text":"good"}"#,
            "\n",
            r#"{"user_id":"b","item_id":"x","rating":2,"text":"  "}"#,
            "\n",
            r#"{"user_id":"c","item_id":"y","rating":5,"text":"great"}"#,
            "\n"
        );
        let l = read(text, Format::Jsonl).unwrap();
        assert_eq!((l.records.len(), l.dropped_empty), (2, 1));
    }

    #[test]
    fn empty_file() {
        assert_eq!(
            read("", Format::Jsonl).unwrap(),
            Loaded {
                records: vec![],
                dropped_empty: 0
            }
        );
    }

    #[test]
    fn duplicates_are_kept() {
        let line = r#"{"user_id":"a","item_id":"x","rating":4,"text":"same"}"#;
        let text = format!("{line}\n{line}\n{line}\n");
        assert_eq!(read(&text, Format::Jsonl).unwrap().records.len(), 3);
    }

    #[test]
    fn malformed_line_names_its_number() {
        let text = concat!(
            r#"{"user_id":"a","item_id":"x","rating":4,"text":"ok"}"#,
            "\n",
            "{not json\n"
        );
        let e = read(text, Format::Jsonl).unwrap_err();
        assert_eq!(e.code, ErrorCode::Parse);
        assert!(e.message.contains("line 2"), "{}", e.message);
    }

    #[test]
    fn raw_exports_map_to_records() {
        let y = r#"{"user_id":"u","business_id":"b","stars":3.0,"text":"fine","useful":1}"#;
        let r = &read(y, Format::Yelp).unwrap().records[0];
        assert_eq!((r.user_id.as_str(), r.item_id.as_str(), r.rating), ("u", "b", 3.0));
        let a = r#"{"reviewerID":"R","asin":"A1","overall":5.0,"reviewText":"love it","summary":"x"}"#;
        let r = &read(a, Format::Amazon).unwrap().records[0];
        assert_eq!(
            (r.user_id.as_str(), r.item_id.as_str(), r.text.as_str()),
            ("R", "A1", "love it")
        );
    }

    #[test]
    fn unknown_format_is_an_error() {
        assert_eq!("csv".parse::<Format>().unwrap_err().code, ErrorCode::UnknownFormat);
    }

    #[test]
    fn canonical_round_trip() {
        let records = vec![ReviewRecord::new("a", "x", 4.5, "text with \"quotes\"\nand newline")];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        assert_eq!(
            read(std::str::from_utf8(&buf).unwrap(), Format::Jsonl).unwrap().records,
            records
        );
    }
}
