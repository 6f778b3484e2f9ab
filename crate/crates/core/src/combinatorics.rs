//! Index sets of the coverage and asymptotic sums: weak compositions of `n`
//! into three parts, and the multiplicity vectors `(m_1..m_n)` with
//! `Σ a·m_a = n` (integer partitions of `n`, as used by Faà di Bruno's formula).

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition3 {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Composition3 {
    pub fn total(&self) -> usize {
        self.n1 + self.n2 + self.n3
    }
}

/// Multiplicities `m[a-1]` of part size `a`, for a = 1..=n.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightedPartition {
    pub m: Vec<usize>,
}

impl WeightedPartition {
    /// Σ a·m_a.
    pub fn weight(&self) -> usize {
        self.m.iter().enumerate().map(|(i, &c)| (i + 1) * c).sum()
    }

    /// Σ m_a, the number of parts.
    pub fn parts(&self) -> usize {
        self.m.iter().sum()
    }

    /// `(a, m_a)` pairs with nonzero multiplicity.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.m
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i + 1, c))
    }
}

type Cache<T> = OnceLock<RwLock<HashMap<usize, Arc<Vec<T>>>>>;

fn memoized<T>(cache: &'static Cache<T>, n: usize, build: impl FnOnce() -> Vec<T>) -> Arc<Vec<T>> {
    let lock = cache.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(v) = lock.read().expect("cache poisoned").get(&n) {
        return Arc::clone(v);
    }
    let built = Arc::new(build());
    let mut w = lock.write().expect("cache poisoned");
    Arc::clone(w.entry(n).or_insert(built))
}

/// All `(n1, n2, n3)` with n1+n2+n3 = n, in lexicographic order.
pub fn compositions3(n: usize) -> Arc<Vec<Composition3>> {
    static CACHE: Cache<Composition3> = OnceLock::new();
    memoized(&CACHE, n, || {
        let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
        for n1 in 0..=n {
            for n2 in 0..=(n - n1) {
                out.push(Composition3 {
                    n1,
                    n2,
                    n3: n - n1 - n2,
                });
            }
        }
        out
    })
}

/// All `(m_1..m_n)` with Σ a·m_a = n. `n = 0` yields the single empty vector.
pub fn weighted_partitions(n: usize) -> Arc<Vec<WeightedPartition>> {
    static CACHE: Cache<WeightedPartition> = OnceLock::new();
    memoized(&CACHE, n, || {
        let mut out = Vec::new();
        let mut m = vec![0; n];
        fill_partitions(n, 1, &mut m, &mut out);
        out
    })
}

// Assigns multiplicities for part sizes a..=n given `rest` still to cover.
fn fill_partitions(rest: usize, a: usize, m: &mut Vec<usize>, out: &mut Vec<WeightedPartition>) {
    if rest == 0 {
        out.push(WeightedPartition { m: m.clone() });
        return;
    }
    if a > m.len() {
        return;
    }
    for count in (0..=rest / a).rev() {
        m[a - 1] = count;
        fill_partitions(rest - count * a, a + 1, m, out);
    }
    m[a - 1] = 0;
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c * (n - k + i) as u128 / i as u128;
    }
    c
}

/// `n! / (n1! n2! n3!)`, exact for n ≤ 64.
pub fn multinomial(n: usize, n1: usize, n2: usize, n3: usize) -> Result<u128> {
    if n1 + n2 + n3 != n {
        return Err(Error::Invariant(format!(
            "composition ({n1},{n2},{n3}) does not sum to {n}"
        )));
    }
    if n > 64 {
        return Err(Error::Invariant(format!(
            "multinomial order {n} exceeds the exact range"
        )));
    }
    Ok(binomial(n, n1) * binomial(n - n1, n2))
}

/// ln(n!) for small n, via a table built on first use.
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; 171];
        for i in 1..t.len() {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    table
        .get(n)
        .copied()
        .unwrap_or_else(|| statrs::function::gamma::ln_gamma(n as f64 + 1.0))
}
