use super::grid::{CellGradient, OpDistributionGrid, PlausibilityMask};
use super::table::ProbTable;
use super::{log_sum_exp, EditWeights};
use crate::error::{Error, Result};

/// Result of the expectation-matching loss on one grid.
#[derive(Clone, Debug)]
pub struct EmLoss {
    /// Sum over cells of `KL(expected || predicted)`.
    pub loss: f64,
    /// Gradient of `loss` with respect to the grid log-probabilities, with the
    /// expected distributions held constant.
    pub grad: CellGradient,
    /// Expected distribution of each cell (all zeros for skipped cells).
    pub expected: CellGradient,
    /// Cells skipped because they are unreachable or have no plausible class.
    pub skipped_cells: usize,
}

/// Per-cell divergence between the predicted operation distribution and the
/// expected one derived from prefix and suffix probabilities.
///
/// For each cell the expected weight of an operation is the prefix probability of
/// its origin cell times the operation probability, restricted to plausible classes
/// and renormalised. The suffix probability of the cell is a common factor and
/// cancels. Cell `(0, 0)` is never scored.
pub fn em_loss(
    grid: &OpDistributionGrid,
    alpha: &ProbTable,
    beta: &ProbTable,
    mask: &PlausibilityMask,
) -> Result<EmLoss> {
    let (rows, cols) = (grid.rows(), grid.cols());
    if alpha.rows() != rows || alpha.cols() != cols || beta.rows() != rows || beta.cols() != cols {
        return Err(Error::Dimension("tables do not match the grid".into()));
    }
    let k = grid.num_classes();
    let mut grad = CellGradient::for_grid(grid);
    let mut expected = CellGradient::for_grid(grid);
    let mut loss = 0.0;
    let mut skipped = 0;
    let mut weights = vec![f64::NEG_INFINITY; k];
    for i in 0..rows {
        for j in 0..cols {
            if i == 0 && j == 0 {
                continue;
            }
            if alpha.get(i, j) == f64::NEG_INFINITY || beta.get(i, j) == f64::NEG_INFINITY {
                skipped += 1;
                continue;
            }
            weights.iter_mut().for_each(|w| *w = f64::NEG_INFINITY);
            if i > 0 {
                let c = grid.del_class(i);
                if mask.allows(grid, i, j, c) {
                    weights[c] = alpha.get(i - 1, j) + grid.log_del(i, j);
                }
            }
            if j > 0 {
                let c = grid.ins_class(j);
                if mask.allows(grid, i, j, c) {
                    weights[c] = alpha.get(i, j - 1) + grid.log_ins(i, j);
                }
            }
            if i > 0 && j > 0 {
                let c = grid.subs_class(i, j);
                if mask.allows(grid, i, j, c) {
                    weights[c] = alpha.get(i - 1, j - 1) + grid.log_subs(i, j);
                }
            }
            let norm = log_sum_exp(&weights);
            if norm == f64::NEG_INFINITY {
                skipped += 1;
                continue;
            }
            let predicted = grid.cell(i, j);
            let mut kl = 0.0;
            for c in 0..k {
                if weights[c] == f64::NEG_INFINITY {
                    continue;
                }
                let log_e = weights[c] - norm;
                let e = log_e.exp();
                kl += e * (log_e - predicted[c]);
                expected.add(i, j, c, e);
                grad.add(i, j, c, -e);
            }
            loss += kl;
        }
    }
    Ok(EmLoss { loss, grad, expected, skipped_cells: skipped })
}
