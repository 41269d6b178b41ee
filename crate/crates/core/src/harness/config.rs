//! `key=value` configuration files.
//!
//! Keys: `B`, `u`, `m`, `seed`, `n`, `c`, `maxDepth`, `P`, `W`, `bounds`
//! (`minX,minY,maxX,maxY`). `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::index::IndexConfig;
use crate::model::Rect;

pub const KEYS: [&str; 10] = ["B", "u", "m", "seed", "n", "c", "maxDepth", "P", "W", "bounds"];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Usage(format!("bad value {value:?} for {key}")))
}

pub fn parse_bounds(value: &str) -> Result<Rect> {
    let parts: Vec<f64> = value.split(',').map(|v| num("bounds", v)).collect::<Result<_>>()?;
    let [min_x, min_y, max_x, max_y] = parts[..] else {
        return Err(Error::Usage(format!("bounds {value:?} must be minX,minY,maxX,maxY")));
    };
    Rect::new(min_x, min_y, max_x, max_y).map_err(|e| Error::Usage(e.to_string()))
}

/// Sets one configuration key.
pub fn apply(cfg: &mut IndexConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "B" => cfg.signature.bits = num(key, value)?,
        "u" => cfg.signature.blocks = num(key, value)?,
        "m" => cfg.signature.hashes = num(key, value)?,
        "seed" => cfg.signature.seed = num(key, value)?,
        "n" => cfg.grid.fanout = num(key, value)?,
        "c" => cfg.grid.leaf_capacity = num(key, value)?,
        "maxDepth" => cfg.grid.max_depth = num(key, value)?,
        "P" => cfg.segment_capacity = num(key, value)?,
        "W" => cfg.retention = num(key, value)?,
        "bounds" => cfg.bounds = parse_bounds(value)?,
        other => return Err(Error::Usage(format!("unknown configuration key {other:?}"))),
    }
    Ok(())
}

pub fn parse_config(text: &str, base: IndexConfig) -> Result<IndexConfig> {
    let mut cfg = base;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("line {}: expected key=value, got {raw:?}", i + 1)))?;
        apply(&mut cfg, key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, base: IndexConfig) -> Result<IndexConfig> {
    parse_config(&std::fs::read_to_string(path)?, base)
}

pub fn render_config(cfg: &IndexConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "B={}", cfg.signature.bits);
    let _ = writeln!(s, "u={}", cfg.signature.blocks);
    let _ = writeln!(s, "m={}", cfg.signature.hashes);
    let _ = writeln!(s, "seed={}", cfg.signature.seed);
    let _ = writeln!(s, "n={}", cfg.grid.fanout);
    let _ = writeln!(s, "c={}", cfg.grid.leaf_capacity);
    let _ = writeln!(s, "maxDepth={}", cfg.grid.max_depth);
    let _ = writeln!(s, "P={}", cfg.segment_capacity);
    let _ = writeln!(s, "W={}", cfg.retention);
    let _ = writeln!(s, "bounds={}", cfg.bounds);
    s
}
