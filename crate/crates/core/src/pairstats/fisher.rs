use crate::error::{Error, Result};

/// 2×2 table of patient counts: both conditions, first only, second only, neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ContingencyTable {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl ContingencyTable {
    pub fn new(n11: u64, n10: u64, n01: u64, n00: u64) -> Self {
        ContingencyTable { n11, n10, n01, n00 }
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    pub fn transpose(&self) -> Self {
        ContingencyTable::new(self.n11, self.n01, self.n10, self.n00)
    }

    pub fn swap_rows(&self) -> Self {
        ContingencyTable::new(self.n01, self.n00, self.n11, self.n10)
    }

    pub fn swap_columns(&self) -> Self {
        ContingencyTable::new(self.n10, self.n11, self.n00, self.n01)
    }
}

/// Relative tolerance when deciding whether a table is at most as likely as the observed one.
const TIE_TOLERANCE: f64 = 1e-12;

/// `ln(k!)` for `k` in `0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    table.push(0.0);
    let mut acc = 0.0f64;
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Exact two-sided Fisher test: the total hypergeometric probability of every
/// table with the observed margins that is no more likely than the observed table.
pub fn fisher_exact_two_sided(table: &ContingencyTable) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(Error::invalid("Fisher test on an all-zero contingency table"));
    }
    let row1 = table.n11 + table.n10;
    let row2 = table.n01 + table.n00;
    let col1 = table.n11 + table.n01;
    let col2 = table.n10 + table.n00;
    let lnf = ln_factorials(n as usize);
    let f = |k: u64| lnf[k as usize];

    // Terms that vary with the top-left cell x. Summed in sorted order so that
    // tables with the same multiset of cells (mirror images) compare bit-equal.
    let varying = |x: u64| -> f64 {
        let mut terms = [f(x), f(row1 - x), f(col1 - x), f(row2 + x - col1)];
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    };
    let fixed = f(row1) + f(row2) + f(col1) + f(col2) - f(n);

    let lo = col1.saturating_sub(row2);
    let hi = row1.min(col1);
    let observed = varying(table.n11);
    let threshold = observed - TIE_TOLERANCE.ln_1p();

    let mut p = 0.0;
    for x in lo..=hi {
        let v = varying(x);
        if v >= threshold {
            p += (fixed - v).exp();
        }
    }
    Ok(p.min(1.0))
}
