//! Relative comparisons and the plain-text comparisons file format.
//!
//! A comparison `(i, j, k, l)` states that items `i` and `j` are closer to
//! each other than items `k` and `l`. Files hold one comparison per line as
//! four whitespace-separated indices; lines starting with `#` are ignored.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Unordered item pair, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
}

impl Pair {
    /// Canonical pair for two distinct items. Returns `None` when `i == j`.
    pub fn new(i: usize, j: usize) -> Option<Self> {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => Some(Pair { a: i, b: j }),
            std::cmp::Ordering::Greater => Some(Pair { a: j, b: i }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn contains(&self, item: usize) -> bool {
        self.a == item || self.b == item
    }

    /// The item shared with `other`, if exactly one is shared.
    pub fn shared_item(&self, other: &Pair) -> Option<usize> {
        if self == other {
            return None;
        }
        [self.a, self.b].into_iter().find(|&x| other.contains(x))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// One relative similarity measurement: `d(i, j) < d(k, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Comparison {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
}

impl Comparison {
    pub const fn new(i: usize, j: usize, k: usize, l: usize) -> Self {
        Comparison { i, j, k, l }
    }

    /// The closer pair.
    pub fn near(&self) -> Option<Pair> {
        Pair::new(self.i, self.j)
    }

    /// The farther pair.
    pub fn far(&self) -> Option<Pair> {
        Pair::new(self.k, self.l)
    }

    /// Canonical `(near, far)` pairs, or the reason the comparison is invalid.
    pub fn pairs(&self) -> std::result::Result<(Pair, Pair), &'static str> {
        let near = self.near().ok_or("first pair repeats an item (i = j)")?;
        let far = self.far().ok_or("second pair repeats an item (k = l)")?;
        if near == far {
            return Err("both sides name the same pair");
        }
        Ok((near, far))
    }

    pub fn is_valid(&self) -> bool {
        self.pairs().is_ok()
    }

    /// Same measurement with each pair written as `a < b`.
    pub fn canonical(&self) -> Self {
        let (ni, nj) = order(self.i, self.j);
        let (fk, fl) = order(self.k, self.l);
        Comparison::new(ni, nj, fk, fl)
    }

    /// The opposite claim, `d(k, l) < d(i, j)`.
    pub fn reversed(&self) -> Self {
        Comparison::new(self.k, self.l, self.i, self.j)
    }

    pub fn indices(&self) -> [usize; 4] {
        [self.i, self.j, self.k, self.l]
    }

    pub fn max_index(&self) -> usize {
        self.indices().into_iter().max().unwrap_or(0)
    }

    /// Rewrite every index through `map`.
    pub fn map_indices(&self, mut map: impl FnMut(usize) -> usize) -> Self {
        Comparison::new(map(self.i), map(self.j), map(self.k), map(self.l))
    }
}

fn order(x: usize, y: usize) -> (usize, usize) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.i, self.j, self.k, self.l)
    }
}

/// Reject the first invalid comparison, naming its position.
pub fn validate_all(comparisons: &[Comparison]) -> Result<()> {
    for (index, c) in comparisons.iter().enumerate() {
        if let Err(reason) = c.pairs() {
            return Err(Error::InvalidComparison {
                index,
                reason: reason.to_string(),
            });
        }
    }
    Ok(())
}

/// Reject comparisons that mention an item `>= n`.
pub fn check_range(comparisons: &[Comparison], n: usize) -> Result<()> {
    for c in comparisons {
        let idx = c.max_index();
        if idx >= n {
            return Err(Error::OutOfRange { index: idx, len: n });
        }
    }
    Ok(())
}

pub fn parse_comparisons(text: &str, path: &Path) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 4 indices, found {}", fields.len()),
            ));
        }
        let mut idx = [0usize; 4];
        for (slot, field) in idx.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| {
                Error::parse(path, lineno + 1, format!("not a non-negative integer: {field:?}"))
            })?;
        }
        let c = Comparison::new(idx[0], idx[1], idx[2], idx[3]);
        if let Err(reason) = c.pairs() {
            return Err(Error::parse(path, lineno + 1, reason));
        }
        out.push(c);
    }
    Ok(out)
}

pub fn read_comparisons(path: impl AsRef<Path>) -> Result<Vec<Comparison>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_comparisons(&text, path)
}

pub fn format_comparisons(comparisons: &[Comparison]) -> String {
    let mut s = String::with_capacity(comparisons.len() * 16);
    for c in comparisons {
        s.push_str(&c.to_string());
        s.push('\n');
    }
    s
}

pub fn write_comparisons(path: impl AsRef<Path>, comparisons: &[Comparison]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_comparisons(comparisons)).map_err(|e| Error::io(path, e))
}
