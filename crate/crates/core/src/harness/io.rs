//! Line-oriented file formats.
//!
//! Objects:     `oid<TAB>t_millis<TAB>x<TAB>y<TAB>term term term...`
//! Queries:     `t_millis<TAB>x<TAB>y<TAB>k<TAB>alpha<TAB>term term...`
//! Frequencies: `term<TAB>count`
//!
//! Blank lines and lines starting with `#` are ignored. Floats are written
//! in shortest round-trip form so a file reads back bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::text::{Tokenizer, Vocabulary};
use crate::model::{GeoTextualObject, Point, TermId, Timestamp, TskQuery};
use crate::signature::FrequencyTable;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRecord {
    pub oid: u64,
    pub t: Timestamp,
    pub x: f64,
    pub y: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub t: Timestamp,
    pub x: f64,
    pub y: f64,
    pub k: usize,
    pub alpha: f64,
    pub text: String,
}

fn parse_field<T: FromStr>(field: Option<&str>, name: &str, path: &str, line: usize) -> Result<T> {
    let raw = field.ok_or_else(|| Error::Parse { path: path.into(), line, msg: format!("missing {name}") })?;
    raw.trim().parse().map_err(|_| Error::Parse { path: path.into(), line, msg: format!("bad {name} {raw:?}") })
}

fn data_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let reader = BufReader::new(File::open(path)?);
    Ok(reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.starts_with('#'))))
}

pub fn parse_object_line(line: &str, path: &str, lineno: usize) -> Result<ObjectRecord> {
    let mut f = line.splitn(5, '\t');
    let oid = parse_field(f.next(), "oid", path, lineno)?;
    let t = parse_field(f.next(), "timestamp", path, lineno)?;
    let x: f64 = parse_field(f.next(), "x", path, lineno)?;
    let y: f64 = parse_field(f.next(), "y", path, lineno)?;
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::Parse { path: path.into(), line: lineno, msg: "non-finite coordinate".into() });
    }
    let text = f.next().unwrap_or("").to_owned();
    Ok(ObjectRecord { oid, t, x, y, text })
}

pub fn read_objects(path: &Path) -> Result<Vec<ObjectRecord>> {
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (lineno, line) in data_lines(path)? {
        out.push(parse_object_line(&line?, &name, lineno)?);
    }
    Ok(out)
}

pub fn write_object_line(w: &mut impl Write, r: &ObjectRecord) -> std::io::Result<()> {
    writeln!(w, "{}\t{}\t{:?}\t{:?}\t{}", r.oid, r.t, r.x, r.y, r.text)
}

pub fn write_objects(path: &Path, records: &[ObjectRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        write_object_line(&mut w, r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_queries(path: &Path) -> Result<Vec<QueryRecord>> {
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (lineno, line) in data_lines(path)? {
        let line = line?;
        let mut f = line.splitn(6, '\t');
        out.push(QueryRecord {
            t: parse_field(f.next(), "timestamp", &name, lineno)?,
            x: parse_field(f.next(), "x", &name, lineno)?,
            y: parse_field(f.next(), "y", &name, lineno)?,
            k: parse_field(f.next(), "k", &name, lineno)?,
            alpha: parse_field(f.next(), "alpha", &name, lineno)?,
            text: f.next().unwrap_or("").to_owned(),
        });
    }
    Ok(out)
}

pub fn write_queries(path: &Path, records: &[QueryRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(w, "{}\t{:?}\t{:?}\t{}\t{:?}\t{}", r.t, r.x, r.y, r.k, r.alpha, r.text)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frequencies(path: &Path, vocab: &mut Vocabulary) -> Result<FrequencyTable> {
    let name = path.display().to_string();
    let mut table = FrequencyTable::new();
    for (lineno, line) in data_lines(path)? {
        let line = line?;
        let (term, count) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: name.clone(),
            line: lineno,
            msg: "expected term<TAB>count".into(),
        })?;
        let count: u64 = parse_field(Some(count), "count", &name, lineno)?;
        table.add(vocab.intern(term.trim()), count);
    }
    Ok(table)
}

pub fn write_frequencies(path: &Path, table: &FrequencyTable, vocab: &Vocabulary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (term, count) in table.iter() {
        let word =
            vocab.word(term).ok_or_else(|| Error::Invariant(format!("term {term} missing from the vocabulary")))?;
        writeln!(w, "{word}\t{count}")?;
    }
    w.flush()?;
    Ok(())
}

/// Objects with their keywords resolved to ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub objects: Vec<GeoTextualObject>,
    /// Records dropped because no keyword survived tokenization.
    pub skipped: usize,
}

impl Corpus {
    pub fn from_records(records: &[ObjectRecord], tokenizer: &Tokenizer) -> Self {
        let mut corpus = Corpus::default();
        for r in records {
            let terms: Vec<TermId> = tokenizer.tokens(&r.text).map(|w| corpus.vocab.intern(&w)).collect();
            match GeoTextualObject::new(r.oid, terms, Point::new(r.x, r.y), r.t) {
                Ok(o) => corpus.objects.push(o),
                Err(_) => corpus.skipped += 1,
            }
        }
        corpus
    }

    pub fn load(path: &Path, tokenizer: &Tokenizer) -> Result<Self> {
        Ok(Self::from_records(&read_objects(path)?, tokenizer))
    }

    /// Keyword frequencies over the first `fraction` of the stream.
    pub fn prefix_frequencies(&self, fraction: f64) -> FrequencyTable {
        let n = ((self.objects.len() as f64 * fraction).ceil() as usize)
            .clamp(1.min(self.objects.len()), self.objects.len());
        let mut table = FrequencyTable::new();
        for o in &self.objects[..n] {
            table.observe(&o.terms);
        }
        table
    }

    pub fn max_timestamp(&self) -> Option<Timestamp> {
        self.objects.iter().map(|o| o.t).max()
    }

    pub fn to_records(&self) -> Vec<ObjectRecord> {
        self.objects
            .iter()
            .map(|o| ObjectRecord { oid: o.oid, t: o.t, x: o.loc.x, y: o.loc.y, text: self.words(&o.terms) })
            .collect()
    }

    pub fn words(&self, terms: &[TermId]) -> String {
        terms.iter().filter_map(|&t| self.vocab.word(t)).collect::<Vec<_>>().join(" ")
    }
}

/// Resolves a query record against `vocab`. Words never seen before get
/// fresh ids, which no stored object contains.
pub fn resolve_query(r: &QueryRecord, vocab: &mut Vocabulary, tokenizer: &Tokenizer) -> Result<TskQuery> {
    let terms = tokenizer.tokens(&r.text).map(|w| vocab.intern(&w)).collect();
    TskQuery::new(terms, Point::new(r.x, r.y), r.t, r.k, r.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("ssg-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn object_file_round_trip() {
        let recs = vec![
            ObjectRecord { oid: 1, t: 10, x: 0.1, y: 99.999_999_999_1, text: "w1 w2".into() },
            ObjectRecord { oid: 2, t: 5, x: 1e-300, y: 3.0, text: "w3".into() },
        ];
        let p = tmp("objects.tsv");
        write_objects(&p, &recs).unwrap();
        assert_eq!(read_objects(&p).unwrap(), recs);
    }

    #[test]
    fn bad_lines_report_position() {
        let p = tmp("bad.tsv");
        std::fs::write(&p, "# header\n1\t10\t1.0\t2.0\tfoo\n2\tten\t1\t2\tbar\n").unwrap();
        match read_objects(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frequency_file_round_trip() {
        let mut vocab = Vocabulary::new();
        let mut table = FrequencyTable::new();
        table.add(vocab.intern("coffee"), 12);
        table.add(vocab.intern("tea"), 3);
        let p = tmp("freq.tsv");
        write_frequencies(&p, &table, &vocab).unwrap();
        let mut v2 = Vocabulary::new();
        let back = read_frequencies(&p, &mut v2).unwrap();
        assert_eq!(back.total(), 15);
        assert_eq!(back.count(v2.get("tea").unwrap()), 3);
    }

    #[test]
    fn corpus_skips_records_without_keywords() {
        let recs = vec![
            ObjectRecord { oid: 1, t: 0, x: 1.0, y: 1.0, text: "Hello, World".into() },
            ObjectRecord { oid: 2, t: 1, x: 1.0, y: 1.0, text: "a !".into() },
        ];
        let c = Corpus::from_records(&recs, &Tokenizer::default());
        assert_eq!(c.objects.len(), 1);
        assert_eq!(c.skipped, 1);
        assert_eq!(c.words(&c.objects[0].terms), "hello world");
    }
}
