use std::fmt;

use super::grid::{CellGradient, OpDistributionGrid};
use super::table::{Orientation, ProbTable};
use super::{log_add, EditWeights};
use crate::error::{Error, Result};

fn check_dims<W: EditWeights + ?Sized>(w: &W, n: usize, m: usize) -> Result<()> {
    if w.source_len() != n || w.target_len() != m {
        return Err(Error::Dimension(format!(
            "weights cover {}x{} symbols but the strings have lengths {}x{}",
            w.source_len(),
            w.target_len(),
            n,
            m
        )));
    }
    Ok(())
}

fn check_table(table: &ProbTable, n: usize, m: usize) -> Result<()> {
    if table.rows() != n + 1 || table.cols() != m + 1 {
        return Err(Error::Dimension(format!(
            "table is {}x{}, expected {}x{}",
            table.rows(),
            table.cols(),
            n + 1,
            m + 1
        )));
    }
    Ok(())
}

/// Prefix probabilities `alpha[i, j]` of generating `s[..i]` and `t[..j]`.
pub fn forward<W: EditWeights + ?Sized>(w: &W, n: usize, m: usize) -> Result<ProbTable> {
    check_dims(w, n, m)?;
    let mut alpha = ProbTable::filled(n + 1, m + 1, Orientation::Forward);
    alpha.set(0, 0, 0.0);
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut acc = f64::NEG_INFINITY;
            if j > 0 {
                acc = log_add(acc, alpha.get(i, j - 1) + w.log_ins(i, j));
            }
            if i > 0 {
                acc = log_add(acc, alpha.get(i - 1, j) + w.log_del(i, j));
            }
            if i > 0 && j > 0 {
                acc = log_add(acc, alpha.get(i - 1, j - 1) + w.log_subs(i, j));
            }
            alpha.set(i, j, acc);
        }
    }
    Ok(alpha)
}

/// Suffix probabilities `beta[i, j]` of generating the rest of both strings from cell `(i, j)`.
pub fn backward<W: EditWeights + ?Sized>(w: &W, n: usize, m: usize) -> Result<ProbTable> {
    check_dims(w, n, m)?;
    let mut beta = ProbTable::filled(n + 1, m + 1, Orientation::Backward);
    beta.set(n, m, 0.0);
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            if i == n && j == m {
                continue;
            }
            let mut acc = f64::NEG_INFINITY;
            if j < m {
                acc = log_add(acc, w.log_ins(i, j + 1) + beta.get(i, j + 1));
            }
            if i < n {
                acc = log_add(acc, w.log_del(i + 1, j) + beta.get(i + 1, j));
            }
            if i < n && j < m {
                acc = log_add(acc, w.log_subs(i + 1, j + 1) + beta.get(i + 1, j + 1));
            }
            beta.set(i, j, acc);
        }
    }
    Ok(beta)
}

/// One edit operation with 1-based positions of the symbols it touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EditOp {
    Delete { source: usize },
    Insert { target: usize },
    Substitute { source: usize, target: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
    pub log_score: f64,
}

impl EditScript {
    /// `(source, target)` position pairs of all substitutions.
    pub fn substitution_links(&self) -> Vec<(usize, usize)> {
        self.ops
            .iter()
            .filter_map(|op| match *op {
                EditOp::Substitute { source, target } => Some((source, target)),
                _ => None,
            })
            .collect()
    }

    /// True when the script consumes exactly `n` source and `m` target symbols in order.
    pub fn is_valid(&self, n: usize, m: usize) -> bool {
        let (mut i, mut j) = (0, 0);
        for op in &self.ops {
            match *op {
                EditOp::Delete { source } => {
                    if source != i + 1 {
                        return false;
                    }
                    i += 1;
                }
                EditOp::Insert { target } => {
                    if target != j + 1 {
                        return false;
                    }
                    j += 1;
                }
                EditOp::Substitute { source, target } => {
                    if source != i + 1 || target != j + 1 {
                        return false;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        i == n && j == m
    }

    /// Sum of operation log-probabilities along the script.
    pub fn score_under<W: EditWeights + ?Sized>(&self, w: &W) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut total = 0.0;
        for op in &self.ops {
            match *op {
                EditOp::Delete { .. } => {
                    i += 1;
                    total += w.log_del(i, j);
                }
                EditOp::Insert { .. } => {
                    j += 1;
                    total += w.log_ins(i, j);
                }
                EditOp::Substitute { .. } => {
                    i += 1;
                    j += 1;
                    total += w.log_subs(i, j);
                }
            }
        }
        total
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditOp::Delete { source } => write!(f, "del({source})"),
            EditOp::Insert { target } => write!(f, "ins({target})"),
            EditOp::Substitute { source, target } => write!(f, "sub({source}\u{2192}{target})"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Back {
    None,
    Del,
    Ins,
    Subs,
}

/// Highest-probability operation sequence. Ties prefer substitution, then deletion,
/// then insertion.
pub fn viterbi<W: EditWeights + ?Sized>(w: &W, n: usize, m: usize) -> Result<EditScript> {
    check_dims(w, n, m)?;
    let cols = m + 1;
    let mut best = vec![f64::NEG_INFINITY; (n + 1) * cols];
    let mut back = vec![Back::None; (n + 1) * cols];
    best[0] = 0.0;
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut score = f64::NEG_INFINITY;
            let mut from = Back::None;
            if i > 0 && j > 0 {
                let s = best[(i - 1) * cols + j - 1] + w.log_subs(i, j);
                if s > score {
                    score = s;
                    from = Back::Subs;
                }
            }
            if i > 0 {
                let s = best[(i - 1) * cols + j] + w.log_del(i, j);
                if s > score {
                    score = s;
                    from = Back::Del;
                }
            }
            if j > 0 {
                let s = best[i * cols + j - 1] + w.log_ins(i, j);
                if s > score {
                    score = s;
                    from = Back::Ins;
                }
            }
            best[i * cols + j] = score;
            back[i * cols + j] = from;
        }
    }
    let log_score = best[n * cols + m];
    if log_score == f64::NEG_INFINITY && (n > 0 || m > 0) {
        return Err(Error::Numerical("no edit sequence has non-zero probability".into()));
    }
    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match back[i * cols + j] {
            Back::Subs => {
                ops.push(EditOp::Substitute { source: i, target: j });
                i -= 1;
                j -= 1;
            }
            Back::Del => {
                ops.push(EditOp::Delete { source: i });
                i -= 1;
            }
            Back::Ins => {
                ops.push(EditOp::Insert { target: j });
                j -= 1;
            }
            Back::None => unreachable!("reachable cell without back-pointer"),
        }
    }
    ops.reverse();
    Ok(EditScript { ops, log_score })
}

/// Per-cell values attached to the three operations leading into each cell.
#[derive(Clone, Debug, PartialEq)]
pub struct OpTriples {
    pub rows: usize,
    pub cols: usize,
    pub del: Vec<f64>,
    pub ins: Vec<f64>,
    pub subs: Vec<f64>,
}

impl OpTriples {
    fn zeros(rows: usize, cols: usize) -> Self {
        let len = rows * cols;
        Self { rows, cols, del: vec![0.0; len], ins: vec![0.0; len], subs: vec![0.0; len] }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    /// Adds `scale` times these values onto the selected classes of a grid gradient.
    pub fn scatter_into(&self, grid: &OpDistributionGrid, out: &mut CellGradient, scale: f64) {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let c = self.idx(i, j);
                if i > 0 && self.del[c] != 0.0 {
                    out.add(i, j, grid.del_class(i), scale * self.del[c]);
                }
                if j > 0 && self.ins[c] != 0.0 {
                    out.add(i, j, grid.ins_class(j), scale * self.ins[c]);
                }
                if i > 0 && j > 0 && self.subs[c] != 0.0 {
                    out.add(i, j, grid.subs_class(i, j), scale * self.subs[c]);
                }
            }
        }
    }

    pub fn to_cell_gradient(&self, grid: &OpDistributionGrid) -> CellGradient {
        let mut out = CellGradient::for_grid(grid);
        self.scatter_into(grid, &mut out, 1.0);
        out
    }
}

#[inline]
fn exp_or_zero(x: f64) -> f64 {
    if x == f64::NEG_INFINITY || x.is_nan() {
        0.0
    } else {
        x.exp()
    }
}

/// Posterior probability that each operation is used, given the whole pair.
///
/// This is also the gradient of `log alpha[n, m]` with respect to each operation
/// log-probability.
pub fn op_posteriors<W: EditWeights + ?Sized>(w: &W, alpha: &ProbTable, beta: &ProbTable) -> Result<OpTriples> {
    let (n, m) = (w.source_len(), w.target_len());
    check_table(alpha, n, m)?;
    check_table(beta, n, m)?;
    let mut out = OpTriples::zeros(n + 1, m + 1);
    let total = alpha.total();
    if total == f64::NEG_INFINITY {
        return Ok(out);
    }
    for i in 0..=n {
        for j in 0..=m {
            let b = beta.get(i, j);
            let c = out.idx(i, j);
            if i > 0 {
                out.del[c] = exp_or_zero(alpha.get(i - 1, j) + w.log_del(i, j) + b - total);
            }
            if j > 0 {
                out.ins[c] = exp_or_zero(alpha.get(i, j - 1) + w.log_ins(i, j) + b - total);
            }
            if i > 0 && j > 0 {
                out.subs[c] = exp_or_zero(alpha.get(i - 1, j - 1) + w.log_subs(i, j) + b - total);
            }
        }
    }
    Ok(out)
}

/// Derivative of `alpha[n, m]` (probability space) with respect to each operation
/// probability: the prefix probability before the operation times the suffix
/// probability after it.
pub fn grad_alpha_wrt_prob<W: EditWeights + ?Sized>(w: &W, alpha: &ProbTable, beta: &ProbTable) -> Result<OpTriples> {
    let (n, m) = (w.source_len(), w.target_len());
    check_table(alpha, n, m)?;
    check_table(beta, n, m)?;
    let mut out = OpTriples::zeros(n + 1, m + 1);
    for i in 0..=n {
        for j in 0..=m {
            let b = beta.get(i, j);
            let c = out.idx(i, j);
            if i > 0 {
                out.del[c] = exp_or_zero(alpha.get(i - 1, j) + b);
            }
            if j > 0 {
                out.ins[c] = exp_or_zero(alpha.get(i, j - 1) + b);
            }
            if i > 0 && j > 0 {
                out.subs[c] = exp_or_zero(alpha.get(i - 1, j - 1) + b);
            }
        }
    }
    Ok(out)
}

/// Reverse-mode pass through the forward recursion.
///
/// `direct[i * (m + 1) + j]` holds the partial derivative of a loss with respect to
/// `log alpha[i, j]` that does not flow through later cells. Returns the total
/// derivative with respect to every operation log-probability.
pub fn backprop_alpha<W: EditWeights + ?Sized>(w: &W, alpha: &ProbTable, direct: &[f64]) -> Result<OpTriples> {
    let (n, m) = (w.source_len(), w.target_len());
    check_table(alpha, n, m)?;
    if direct.len() != (n + 1) * (m + 1) {
        return Err(Error::Dimension("direct gradient does not match the table".into()));
    }
    let mut out = OpTriples::zeros(n + 1, m + 1);
    let cols = m + 1;
    // adjoint[c] = d loss / d log alpha at cell c, including paths through successors
    let mut adjoint = vec![0.0; (n + 1) * cols];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            let c = i * cols + j;
            let mut total = direct[c];
            if j < m {
                total += out.ins[c + 1];
            }
            if i < n {
                total += out.del[c + cols];
            }
            if i < n && j < m {
                total += out.subs[c + cols + 1];
            }
            adjoint[c] = total;
            if total == 0.0 {
                continue;
            }
            let here = alpha.get(i, j);
            if here == f64::NEG_INFINITY {
                continue;
            }
            if i > 0 {
                out.del[c] = total * exp_or_zero(alpha.get(i - 1, j) + w.log_del(i, j) - here);
            }
            if j > 0 {
                out.ins[c] = total * exp_or_zero(alpha.get(i, j - 1) + w.log_ins(i, j) - here);
            }
            if i > 0 && j > 0 {
                out.subs[c] = total * exp_or_zero(alpha.get(i - 1, j - 1) + w.log_subs(i, j) - here);
            }
        }
    }
    Ok(out)
}

/// Gradient of `log alpha[n, m]` with respect to every class log-probability of a grid.
pub fn grad_log_alpha(grid: &OpDistributionGrid, alpha: &ProbTable, beta: &ProbTable) -> Result<CellGradient> {
    Ok(op_posteriors(grid, alpha, beta)?.to_cell_gradient(grid))
}
