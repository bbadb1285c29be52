//! Token-set fuzzy matching.
//!
//! `simple_ratio` is an indel-distance similarity (insertions and deletions
//! only, equivalently longest-common-subsequence based) scaled to 0..=100.
//! `token_set_ratio` normalizes both strings to sorted deduplicated token
//! sets and compares the intersection against each side's full set, which
//! makes it order-invariant and generous to subset matches: a keyword whose
//! tokens all appear in the query scores 100.

/// Indel distance: minimum insertions plus deletions turning `a` into `b`.
/// Computed over Unicode scalar values via the LCS identity
/// `indel = |a| + |b| - 2 * lcs`.
pub fn indel_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    a.len() + b.len() - 2 * lcs_len(&a, &b)
}

fn lcs_len(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // Two-row DP; keep the shorter string as the row for less memory.
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut row = vec![0usize; short.len() + 1];
    for lc in long {
        for (j, sc) in short.iter().enumerate() {
            row[j + 1] = if lc == sc {
                prev[j] + 1
            } else {
                prev[j + 1].max(row[j])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[short.len()]
}

/// `100 * (1 - indel / (|a| + |b|))`, rounded to the nearest integer.
/// Two empty strings score 100.
pub fn simple_ratio(a: &str, b: &str) -> u8 {
    let total = a.chars().count() + b.chars().count();
    if total == 0 {
        return 100;
    }
    let indel = indel_distance(a, b);
    (100.0 * (1.0 - indel as f64 / total as f64)).round() as u8
}

/// A normalized token set: lowercased alphanumeric runs, sorted, deduped.
/// Precompute one per query when matching against many keywords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSet {
    tokens: Vec<String>,
}

impl TokenSet {
    pub fn new(text: &str) -> Self {
        let mut tokens: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect();
        tokens.sort_unstable();
        tokens.dedup();
        Self { tokens }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// The token-set ratio against another set. One empty side scores 0;
    /// two empty sides score 100.
    pub fn ratio(&self, other: &TokenSet) -> u8 {
        if self.is_empty() && other.is_empty() {
            return 100;
        }
        if self.is_empty() || other.is_empty() {
            return 0;
        }
        let mut shared = Vec::new();
        let mut a_only = Vec::new();
        let mut b_only = Vec::new();
        let (mut i, mut j) = (0usize, 0usize);
        while i < self.tokens.len() && j < other.tokens.len() {
            match self.tokens[i].cmp(&other.tokens[j]) {
                std::cmp::Ordering::Equal => {
                    shared.push(self.tokens[i].as_str());
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => {
                    a_only.push(self.tokens[i].as_str());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    b_only.push(other.tokens[j].as_str());
                    j += 1;
                }
            }
        }
        a_only.extend(self.tokens[i..].iter().map(String::as_str));
        b_only.extend(other.tokens[j..].iter().map(String::as_str));

        let t0 = shared.join(" ");
        let t1 = join_with_base(&t0, &a_only);
        let t2 = join_with_base(&t0, &b_only);
        simple_ratio(&t0, &t1)
            .max(simple_ratio(&t0, &t2))
            .max(simple_ratio(&t1, &t2))
    }
}

fn join_with_base(base: &str, extra: &[&str]) -> String {
    if extra.is_empty() {
        return base.to_string();
    }
    if base.is_empty() {
        return extra.join(" ");
    }
    format!("{base} {}", extra.join(" "))
}

/// Convenience wrapper normalizing both inputs each call; hot paths should
/// hold a [`TokenSet`] for the repeated side instead.
pub fn token_set_ratio(a: &str, b: &str) -> u8 {
    TokenSet::new(a).ratio(&TokenSet::new(b))
}
