//! Plain-text instance files.
//!
//! ```text
//! latalloc 1              # magic and version
//! <group_count> <p>       # shared latency exponent
//! <c> <b> <multiplicity>  # one line per group
//! ```
//!
//! `#` starts a comment that runs to the end of the line; blank lines are
//! ignored. Reading merges duplicate `(c, b)` rows.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Instance, LatencyFamily, ResourceGroup};

const MAGIC: &str = "latalloc";
const VERSION: &str = "1";

/// Renders an instance, with `comments` as leading `#` lines.
pub fn format_instance(instance: &Instance, comments: &[String]) -> Result<String> {
    let p = instance
        .shared_exponent()
        .ok_or_else(|| Error::Domain("only power latencies with one shared exponent can be written".into()))?;
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}").unwrap();
        }
    }
    writeln!(out, "{MAGIC} {VERSION}").unwrap();
    writeln!(out, "{} {}", instance.num_groups(), p).unwrap();
    for g in instance.groups() {
        writeln!(out, "{} {} {}", g.fixed_cost, g.latency.coefficient(), g.multiplicity).unwrap();
    }
    Ok(out)
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write_instance_with_comments(instance, path, &[])
}

pub fn write_instance_with_comments(instance: &Instance, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    std::fs::write(path, format_instance(instance, comments)?)?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn invalid(line: usize, message: impl Into<String>) -> Error {
    Error::Validation { line, message: message.into() }
}

fn number(line: usize, what: &str, token: &str) -> Result<f64> {
    token.parse::<f64>().map_err(|_| parse_err(line, format!("{what}: `{token}` is not a number")))
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
        .map(|(n, l)| (n, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, fields)| !fields.is_empty());
    let last_line = text.lines().count().max(1);

    let (n, header) = lines.next().ok_or_else(|| parse_err(last_line, "empty file"))?;
    match header.as_slice() {
        [MAGIC, VERSION] => {}
        [MAGIC, v] => return Err(parse_err(n, format!("unsupported version `{v}`"))),
        _ => return Err(parse_err(n, format!("expected `{MAGIC} {VERSION}`"))),
    }

    let (n, sizes) = lines.next().ok_or_else(|| parse_err(last_line, "missing `<group_count> <p>` line"))?;
    let [count, p] = sizes.as_slice() else {
        return Err(parse_err(n, "expected `<group_count> <p>`"));
    };
    let count: usize = count.parse().map_err(|_| parse_err(n, format!("group count `{count}` is not an integer")))?;
    let p = number(n, "exponent", p)?;
    if count == 0 {
        return Err(invalid(n, "group count must be at least 1"));
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(invalid(n, format!("exponent must be >= 1, got {p}")));
    }

    let mut groups = Vec::with_capacity(count);
    for (n, fields) in lines.by_ref() {
        if groups.len() == count {
            return Err(parse_err(n, format!("more than the declared {count} group lines")));
        }
        let [c, b, m] = fields.as_slice() else {
            return Err(parse_err(n, "expected `<c> <b> <multiplicity>`"));
        };
        let c = number(n, "fixed cost", c)?;
        let b = number(n, "coefficient", b)?;
        let m: i64 = m.parse().map_err(|_| parse_err(n, format!("multiplicity `{m}` is not an integer")))?;
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid(n, format!("fixed cost must be nonnegative, got {c}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(invalid(n, format!("coefficient must be positive, got {b}")));
        }
        if m < 1 {
            return Err(invalid(n, format!("multiplicity must be at least 1, got {m}")));
        }
        let family = LatencyFamily::power(b, p).map_err(|e| invalid(n, e.to_string()))?;
        groups.push(ResourceGroup::new(c, family, m as usize).map_err(|e| invalid(n, e.to_string()))?);
    }
    if groups.len() < count {
        return Err(parse_err(last_line, format!("expected {count} group lines, found {}", groups.len())));
    }
    Instance::new(groups)
}
