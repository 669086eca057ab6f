//! Reference implementations used as test oracles. Deliberately naive and
//! written without reference to the library's algorithms.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// ROUGE-N by explicit multiset intersection: every candidate n-gram
/// consumes one equal n-gram from a working copy of the reference list.
pub fn rouge_n(candidate: &[String], reference: &[String], n: usize) -> (f64, f64, f64) {
    let grams = |t: &[String]| -> Vec<Vec<String>> {
        if t.len() < n {
            return Vec::new();
        }
        (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
    };
    let cand = grams(candidate);
    let mut pool = grams(reference);
    let ref_total = pool.len();
    let mut matches = 0usize;
    for g in &cand {
        if let Some(pos) = pool.iter().position(|r| r == g) {
            pool.remove(pos);
            matches += 1;
        }
    }
    prf(matches, cand.len(), ref_total)
}

/// LCS length by enumerating every subsequence of the shorter sequence.
pub fn lcs_exhaustive(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16, "exhaustive LCS only for short inputs");
    let mut best = 0;
    for mask in 0u32..(1u32 << short.len()) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let sub: Vec<&String> = (0..short.len()).filter(|i| mask >> i & 1 == 1).map(|i| &short[i]).collect();
        let mut it = long.iter();
        if sub.iter().all(|s| it.any(|x| x == *s)) {
            best = size;
        }
    }
    best
}

pub fn rouge_l(candidate: &[String], reference: &[String]) -> (f64, f64, f64) {
    prf(lcs_exhaustive(candidate, reference), candidate.len(), reference.len())
}

pub fn prf(matches: usize, cand_total: usize, ref_total: usize) -> (f64, f64, f64) {
    let p = if cand_total == 0 { 0.0 } else { matches as f64 / cand_total as f64 };
    let r = if ref_total == 0 { 0.0 } else { matches as f64 / ref_total as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Greedy matching from a fully enumerated similarity table.
pub fn greedy_match(cand: &[Vec<f64>], reference: &[Vec<f64>]) -> (f64, f64, f64) {
    let table: Vec<Vec<f64>> = cand
        .iter()
        .map(|c| reference.iter().map(|r| cosine(c, r)).collect())
        .collect();
    let p = table
        .iter()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / cand.len() as f64;
    let r = (0..reference.len())
        .map(|j| table.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    (p, r, 2.0 * p * r / (p + r))
}

/// `(W0 + s·B·A)·x` with nalgebra.
pub fn dense_forward(w0: &[f64], a: &[f64], b: &[f64], d: usize, r: usize, s: f64, x: &[f64]) -> Vec<f64> {
    let w0 = DMatrix::from_row_slice(d, d, w0);
    let a = DMatrix::from_row_slice(r, d, a);
    let b = DMatrix::from_row_slice(d, r, b);
    let x = DVector::from_column_slice(x);
    ((w0 + (b * a) * s) * x).iter().copied().collect()
}

/// Singular values, largest first.
pub fn singular_values(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut sv: Vec<f64> = DMatrix::from_row_slice(rows, cols, m)
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Small deterministic generator for test data (SplitMix64).
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.unit() - 1.0
    }
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
    pub fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.symmetric()).collect()
    }
}
