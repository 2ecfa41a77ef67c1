use std::ops::AddAssign;

use crate::dp::{CellGradient, OpDistributionGrid, ProbTable};

/// Relative weights of the loss components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub em: f64,
    pub nll: f64,
    pub bce: f64,
    pub nonmatch: f64,
    pub interp: f64,
    /// Scale the diagonal distance by the length ratio of the two strings.
    pub interp_length_norm: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { em: 1.0, nll: 1.0, bce: 1.0, nonmatch: 1.0, interp: 0.1, interp_length_norm: false }
    }
}

/// Unweighted loss components of one pair or an average over pairs, plus the
/// weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairLoss {
    pub em: f64,
    pub nll: f64,
    pub bce: f64,
    pub nonmatch: f64,
    pub interp: f64,
    pub total: f64,
    pub skipped_cells: usize,
}

impl AddAssign<&PairLoss> for PairLoss {
    fn add_assign(&mut self, o: &PairLoss) {
        self.em += o.em;
        self.nll += o.nll;
        self.bce += o.bce;
        self.nonmatch += o.nonmatch;
        self.interp += o.interp;
        self.total += o.total;
        self.skipped_cells += o.skipped_cells;
    }
}

impl PairLoss {
    pub fn scaled(&self, factor: f64) -> PairLoss {
        PairLoss {
            em: self.em * factor,
            nll: self.nll * factor,
            bce: self.bce * factor,
            nonmatch: self.nonmatch * factor,
            interp: self.interp * factor,
            total: self.total * factor,
            skipped_cells: self.skipped_cells,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.em, self.nll, self.bce, self.nonmatch, self.interp, self.total].iter().all(|v| v.is_finite())
    }
}

const MIN_COMPLEMENT: f64 = 1e-12;

/// Binary cross-entropy of the pair probability `exp(log_alpha)` against a label.
/// Returns the loss and its derivative with respect to `log_alpha`.
pub fn bce_from_log_alpha(log_alpha: f64, label: bool) -> (f64, f64) {
    if label {
        return (-log_alpha, -1.0);
    }
    let alpha = log_alpha.exp();
    let complement = (-log_alpha.exp_m1()).max(MIN_COMPLEMENT);
    (-complement.ln(), alpha / complement)
}

/// Mean negative log-probability of the extra (non-match) class over every cell
/// except `(0, 0)`, with its gradient.
pub fn nonmatch_nll(grid: &OpDistributionGrid) -> (f64, CellGradient) {
    let class = grid.layout().extra_offset();
    let cells = grid.rows() * grid.cols() - 1;
    let mut grad = CellGradient::for_grid(grid);
    if cells == 0 {
        return (0.0, grad);
    }
    let scale = 1.0 / cells as f64;
    let mut loss = 0.0;
    for i in 0..grid.rows() {
        for j in 0..grid.cols() {
            if i == 0 && j == 0 {
                continue;
            }
            loss -= grid.cell(i, j)[class];
            grad.add(i, j, class, -scale);
        }
    }
    (loss * scale, grad)
}

/// Penalty on prefix probability mass away from the diagonal, over cells
/// `1 <= i <= n`, `1 <= j <= m` of the table. Returns the loss and its derivative
/// with respect to every `log alpha` entry of the table.
pub fn interpretability_loss(alpha: &ProbTable, n: usize, m: usize, length_norm: bool) -> (f64, Vec<f64>) {
    let cols = alpha.cols();
    let mut grad = vec![0.0; alpha.rows() * cols];
    let mut loss = 0.0;
    let scale = n.max(m).max(1) as f64;
    for i in 1..=n {
        for j in 1..=m {
            let distance = if length_norm {
                ((i * m) as f64 - (j * n) as f64).abs() / scale
            } else {
                (i as f64 - j as f64).abs()
            };
            if distance == 0.0 {
                continue;
            }
            let mass = alpha.get(i, j).exp();
            loss += distance * mass;
            grad[i * cols + j] += distance * mass;
        }
    }
    (loss, grad)
}
