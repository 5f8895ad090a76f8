//! Random regular LDPC codes: construction without 4-cycles, systematic
//! GF(2) encoding and alist import/export.

use crate::rng::SimRng;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Column weight of constructed codes.
pub const COLUMN_WEIGHT: usize = 3;

const MAX_ATTEMPTS: usize = 20;
const MAX_REPAIR_PASSES: usize = 400;

/// Binary parity-check code with a precomputed encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    n: usize,
    /// Column indices of each check.
    rows: Vec<Vec<usize>>,
    /// Check indices of each variable.
    cols: Vec<Vec<usize>>,
    encoder: Encoder,
}

/// Reduced row echelon form of the parity-check matrix. Pivot columns carry
/// parity, the remaining columns carry the message in order.
#[derive(Debug, Clone, PartialEq)]
struct Encoder {
    pivots: Vec<usize>,
    free: Vec<usize>,
    /// For each pivot row, the free-column positions (indices into `free`)
    /// with a one.
    parity_taps: Vec<Vec<usize>>,
}

type BitRow = Vec<u64>;

fn get_bit(row: &BitRow, j: usize) -> bool {
    row[j / 64] >> (j % 64) & 1 == 1
}

fn xor_into(dst: &mut BitRow, src: &BitRow) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

impl Encoder {
    fn from_rows(n: usize, rows: &[Vec<usize>]) -> Encoder {
        let words = n.div_ceil(64);
        let mut mat: Vec<BitRow> = rows
            .iter()
            .map(|r| {
                let mut b = vec![0u64; words];
                for &j in r {
                    b[j / 64] ^= 1 << (j % 64);
                }
                b
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let Some(p) = (rank..mat.len()).find(|&r| get_bit(&mat[r], col)) else {
                continue;
            };
            mat.swap(rank, p);
            let pivot_row = mat[rank].clone();
            for (r, row) in mat.iter_mut().enumerate() {
                if r != rank && get_bit(row, col) {
                    xor_into(row, &pivot_row);
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == mat.len() {
                break;
            }
        }
        let is_pivot: Vec<bool> = {
            let mut v = vec![false; n];
            for &p in &pivots {
                v[p] = true;
            }
            v
        };
        let free: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
        let parity_taps = (0..rank)
            .map(|r| {
                free.iter()
                    .enumerate()
                    .filter(|(_, &j)| get_bit(&mat[r], j))
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Encoder {
            pivots,
            free,
            parity_taps,
        }
    }
}

impl LdpcCode {
    /// Builds a code from check-node adjacency lists.
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<LdpcCode> {
        let mut cols = vec![Vec::new(); n];
        for (i, r) in rows.iter().enumerate() {
            for &j in r {
                if j >= n {
                    return Err(Error::Construction(format!("column {j} out of range for n={n}")));
                }
                if cols[j].last() == Some(&i) {
                    return Err(Error::Construction(format!("duplicate edge ({i}, {j})")));
                }
                cols[j].push(i);
            }
        }
        let encoder = Encoder::from_rows(n, &rows);
        Ok(LdpcCode {
            n,
            rows,
            cols,
            encoder,
        })
    }

    /// Codeword length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Message length `n - rank(H)`.
    pub fn k(&self) -> usize {
        self.encoder.free.len()
    }

    /// Number of parity checks (rows of `H`, including dependent ones).
    pub fn num_checks(&self) -> usize {
        self.rows.len()
    }

    pub fn rank(&self) -> usize {
        self.encoder.pivots.len()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    pub fn check_rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn variable_cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    /// Encodes `k` message bits into an `n`-bit codeword.
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        Error::check_len(self.k(), message.len())?;
        let mut cw = vec![0u8; self.n];
        for (&j, &b) in self.encoder.free.iter().zip(message) {
            cw[j] = b & 1;
        }
        for (&p, taps) in self.encoder.pivots.iter().zip(&self.encoder.parity_taps) {
            cw[p] = taps.iter().fold(0, |acc, &i| acc ^ (message[i] & 1));
        }
        Ok(cw)
    }

    /// Message bits recovered from a codeword.
    pub fn extract_message(&self, codeword: &[u8]) -> Vec<u8> {
        self.encoder.free.iter().map(|&j| codeword[j]).collect()
    }

    /// Number of unsatisfied checks.
    pub fn unsatisfied(&self, bits: &[u8]) -> usize {
        self.rows
            .iter()
            .filter(|r| r.iter().fold(0u8, |acc, &j| acc ^ bits[j]) & 1 == 1)
            .count()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n && self.unsatisfied(bits) == 0
    }

    /// Number of 4-cycles in the Tanner graph.
    pub fn four_cycles(&self) -> usize {
        let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
        for c in &self.cols {
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    *pairs.entry((c[a].min(c[b]), c[a].max(c[b]))).or_default() += 1;
                }
            }
        }
        pairs.values().map(|&k| k * (k - 1) / 2).sum()
    }

    /// Parity-check matrix in alist text format.
    pub fn to_alist(&self) -> String {
        let mut s = String::new();
        let max_col = self.cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let join = |v: &mut dyn Iterator<Item = usize>| {
            v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(s, "{} {}", self.n, self.rows.len());
        let _ = writeln!(s, "{max_col} {max_row}");
        let _ = writeln!(s, "{}", join(&mut self.cols.iter().map(Vec::len)));
        let _ = writeln!(s, "{}", join(&mut self.rows.iter().map(Vec::len)));
        for c in &self.cols {
            let padded = c.iter().map(|&i| i + 1).chain(std::iter::repeat(0)).take(max_col);
            let _ = writeln!(s, "{}", join(&mut padded.into_iter()));
        }
        for r in &self.rows {
            let padded = r.iter().map(|&j| j + 1).chain(std::iter::repeat(0)).take(max_row);
            let _ = writeln!(s, "{}", join(&mut padded.into_iter()));
        }
        s
    }

    /// Parses an alist file. Only the row lists are used to build the code;
    /// the column lists are checked against them.
    pub fn from_alist(text: &str) -> Result<LdpcCode> {
        let mut nums = text.split_whitespace().map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("alist: bad integer '{t}'")))
        });
        let mut next = || nums.next().unwrap_or_else(|| Err(Error::Parse("alist: truncated".into())));
        let n = next()?;
        let m = next()?;
        let max_col = next()?;
        let max_row = next()?;
        let col_w: Vec<usize> = (0..n).map(|_| next()).collect::<Result<_>>()?;
        let row_w: Vec<usize> = (0..m).map(|_| next()).collect::<Result<_>>()?;
        let mut cols = Vec::with_capacity(n);
        for &w in &col_w {
            let entries: Vec<usize> = (0..max_col).map(|_| next()).collect::<Result<_>>()?;
            cols.push(entries.into_iter().filter(|&v| v != 0).take(w).collect::<Vec<_>>());
        }
        let mut rows = Vec::with_capacity(m);
        for &w in &row_w {
            let entries: Vec<usize> = (0..max_row).map(|_| next()).collect::<Result<_>>()?;
            let mut r: Vec<usize> = Vec::with_capacity(w);
            for v in entries.into_iter().filter(|&v| v != 0).take(w) {
                if v > n {
                    return Err(Error::Parse(format!("alist: column {v} exceeds n={n}")));
                }
                r.push(v - 1);
            }
            r.sort_unstable();
            rows.push(r);
        }
        let code = LdpcCode::from_rows(n, rows)?;
        for (j, c) in cols.iter().enumerate() {
            let mut listed: Vec<usize> = c.iter().map(|&i| i - 1).collect();
            listed.sort_unstable();
            if listed != code.cols[j] {
                return Err(Error::Parse(format!("alist: column {} disagrees with row lists", j + 1)));
            }
        }
        Ok(code)
    }
}

/// Random regular LDPC code of length `n` and design rate `rate`, column
/// weight 3, row weights as even as possible, free of duplicate edges and
/// 4-cycles. Deterministic per seed.
pub fn ldpc_construct(n: usize, rate: f64, seed: u64) -> Result<LdpcCode> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::invalid(format!("code rate {rate} outside (0, 1)")));
    }
    let m_real = n as f64 * (1.0 - rate);
    let m = m_real.round() as usize;
    if (m_real - m as f64).abs() > 1e-9 || m == 0 {
        return Err(Error::invalid(format!("n*(1-rate) = {m_real} is not a positive integer")));
    }
    if m < 2 * COLUMN_WEIGHT {
        return Err(Error::invalid("too few checks for a 4-cycle-free column weight 3 code"));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    for attempt in 0..MAX_ATTEMPTS {
        if let Some(rows) = try_construct(n, m, &mut rng) {
            log::debug!("LDPC({n}, {m}) built on attempt {}", attempt + 1);
            return LdpcCode::from_rows(n, rows);
        }
    }
    Err(Error::Construction(format!(
        "no 4-cycle-free ({n}, {m}) code after {MAX_ATTEMPTS} attempts"
    )))
}

/// Socket matching followed by edge swaps that remove duplicate edges and
/// 4-cycles while preserving every degree.
fn try_construct(n: usize, m: usize, rng: &mut SimRng) -> Option<Vec<Vec<usize>>> {
    let edges = n * COLUMN_WEIGHT;
    // check sockets: row i gets floor/ceil(edges/m) slots
    let mut check_of_socket: Vec<usize> = (0..edges).map(|e| e % m).collect();
    check_of_socket.shuffle(rng);
    // edge e joins variable e / COLUMN_WEIGHT to check check_of_socket[e]
    let var_of = |e: usize| e / COLUMN_WEIGHT;

    for _ in 0..MAX_REPAIR_PASSES {
        let bad = find_bad_edges(n, m, &check_of_socket);
        if bad.is_empty() {
            let mut rows = vec![Vec::new(); m];
            for (e, &c) in check_of_socket.iter().enumerate() {
                rows[c].push(var_of(e));
            }
            for r in &mut rows {
                r.sort_unstable();
            }
            return Some(rows);
        }
        for e in bad {
            let other = rng.random_range(0..edges);
            check_of_socket.swap(e, other);
        }
    }
    None
}

/// Edges involved in a duplicate or a 4-cycle (one edge per offending
/// structure).
fn find_bad_edges(n: usize, m: usize, check_of: &[usize]) -> Vec<usize> {
    let mut bad = Vec::new();
    let mut seen_pair: HashMap<(usize, usize), usize> = HashMap::new();
    let mut flagged = vec![false; check_of.len()];
    for v in 0..n {
        let base = v * COLUMN_WEIGHT;
        for a in 0..COLUMN_WEIGHT {
            for b in a + 1..COLUMN_WEIGHT {
                let (ca, cb) = (check_of[base + a], check_of[base + b]);
                if ca == cb {
                    if !flagged[base + b] {
                        flagged[base + b] = true;
                        bad.push(base + b);
                    }
                    continue;
                }
                let key = (ca.min(cb), ca.max(cb));
                if seen_pair.insert(key, v).is_some() && !flagged[base + b] {
                    flagged[base + b] = true;
                    bad.push(base + b);
                }
            }
        }
    }
    debug_assert!(check_of.iter().all(|&c| c < m));
    bad
}
