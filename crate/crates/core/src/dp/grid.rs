use super::EditWeights;
use crate::error::{Error, Result};

/// Sizes of the operation blocks inside one per-cell class vector, in the order
/// delete, insert, substitute, extra.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassLayout {
    pub del: usize,
    pub ins: usize,
    pub subs: usize,
    pub extra: usize,
}

impl ClassLayout {
    /// One class per operation type plus a non-match class.
    pub fn matching() -> Self {
        Self { del: 1, ins: 1, subs: 1, extra: 1 }
    }

    /// Insert and substitute classes typed by the target symbol.
    pub fn target_typed(target_classes: usize) -> Self {
        Self { del: 1, ins: target_classes, subs: target_classes, extra: 0 }
    }

    pub fn total(&self) -> usize {
        self.del + self.ins + self.subs + self.extra
    }

    pub fn ins_offset(&self) -> usize {
        self.del
    }

    pub fn subs_offset(&self) -> usize {
        self.del + self.ins
    }

    pub fn extra_offset(&self) -> usize {
        self.del + self.ins + self.subs
    }
}

/// How the class of an operation is chosen from the symbols it touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassSelector {
    /// A single class per operation type.
    Typeless,
    /// Insert/substitute classes are indexed by the target symbol.
    TargetTyped,
}

/// Per-cell normalised distributions over operation classes, in log space.
#[derive(Clone, Debug)]
pub struct OpDistributionGrid {
    rows: usize,
    cols: usize,
    layout: ClassLayout,
    selector: ClassSelector,
    target_classes: Vec<usize>,
    log_probs: Vec<f64>,
}

impl OpDistributionGrid {
    pub fn new(
        rows: usize,
        cols: usize,
        layout: ClassLayout,
        selector: ClassSelector,
        target_classes: Vec<usize>,
        log_probs: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("grid needs at least one row and column".into()));
        }
        let k = layout.total();
        if log_probs.len() != rows * cols * k {
            return Err(Error::Dimension(format!(
                "expected {} log-probabilities for a {}x{} grid with {} classes, got {}",
                rows * cols * k,
                rows,
                cols,
                k,
                log_probs.len()
            )));
        }
        if layout.del != 1 {
            return Err(Error::Dimension("exactly one delete class is supported".into()));
        }
        match selector {
            ClassSelector::Typeless => {
                if layout.ins != 1 || layout.subs != 1 {
                    return Err(Error::Dimension("typeless grids use one class per operation".into()));
                }
            }
            ClassSelector::TargetTyped => {
                if target_classes.len() != cols - 1 {
                    return Err(Error::Dimension(format!(
                        "grid has {} target positions but {} target classes were given",
                        cols - 1,
                        target_classes.len()
                    )));
                }
                if let Some(&bad) = target_classes.iter().find(|&&c| c >= layout.ins || c >= layout.subs) {
                    return Err(Error::Dimension(format!("target class {bad} outside the layout")));
                }
            }
        }
        Ok(Self { rows, cols, layout, selector, target_classes, log_probs })
    }

    /// Builds a grid cell by cell from the class log-probabilities returned by `f(i, j)`.
    pub fn from_cell_fn(
        rows: usize,
        cols: usize,
        layout: ClassLayout,
        selector: ClassSelector,
        target_classes: Vec<usize>,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let k = layout.total();
        let mut log_probs = Vec::with_capacity(rows * cols * k);
        for i in 0..rows {
            for j in 0..cols {
                let cell = f(i, j);
                if cell.len() != k {
                    return Err(Error::Dimension(format!("cell ({i},{j}) has {} classes, expected {k}", cell.len())));
                }
                log_probs.extend(cell);
            }
        }
        Self::new(rows, cols, layout, selector, target_classes, log_probs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn layout(&self) -> ClassLayout {
        self.layout
    }

    pub fn selector(&self) -> ClassSelector {
        self.selector
    }

    pub fn num_classes(&self) -> usize {
        self.layout.total()
    }

    pub fn target_classes(&self) -> &[usize] {
        &self.target_classes
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let k = self.layout.total();
        let start = (i * self.cols + j) * k;
        &self.log_probs[start..start + k]
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    #[inline]
    pub fn del_class(&self, _i: usize) -> usize {
        0
    }

    #[inline]
    pub fn ins_class(&self, j: usize) -> usize {
        match self.selector {
            ClassSelector::Typeless => self.layout.ins_offset(),
            ClassSelector::TargetTyped => self.layout.ins_offset() + self.target_classes[j - 1],
        }
    }

    #[inline]
    pub fn subs_class(&self, _i: usize, j: usize) -> usize {
        match self.selector {
            ClassSelector::Typeless => self.layout.subs_offset(),
            ClassSelector::TargetTyped => self.layout.subs_offset() + self.target_classes[j - 1],
        }
    }
}

impl EditWeights for OpDistributionGrid {
    fn source_len(&self) -> usize {
        self.rows - 1
    }

    fn target_len(&self) -> usize {
        self.cols - 1
    }

    #[inline]
    fn log_del(&self, i: usize, j: usize) -> f64 {
        self.cell(i, j)[self.del_class(i)]
    }

    #[inline]
    fn log_ins(&self, i: usize, j: usize) -> f64 {
        self.cell(i, j)[self.ins_class(j)]
    }

    #[inline]
    fn log_subs(&self, i: usize, j: usize) -> f64 {
        self.cell(i, j)[self.subs_class(i, j)]
    }
}

/// Which classes count as plausible operations into a cell.
#[derive(Clone, Debug)]
pub enum PlausibilityMask {
    /// The delete class for `i >= 1`, the insert class of `t_j` for `j >= 1`, and the
    /// substitute class of `(s_i, t_j)` for `i, j >= 1`. Extra classes never.
    Standard,
    /// Explicit `rows x cols x classes` flags.
    Explicit(Vec<bool>),
}

impl PlausibilityMask {
    pub fn allows(&self, grid: &OpDistributionGrid, i: usize, j: usize, class: usize) -> bool {
        match self {
            PlausibilityMask::Standard => {
                (i >= 1 && class == grid.del_class(i))
                    || (j >= 1 && class == grid.ins_class(j))
                    || (i >= 1 && j >= 1 && class == grid.subs_class(i, j))
            }
            PlausibilityMask::Explicit(flags) => flags[(i * grid.cols() + j) * grid.num_classes() + class],
        }
    }
}

/// Gradient of a scalar with respect to every per-cell class log-probability.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGradient {
    rows: usize,
    cols: usize,
    classes: usize,
    values: Vec<f64>,
}

impl CellGradient {
    pub fn zeros(rows: usize, cols: usize, classes: usize) -> Self {
        Self { rows, cols, classes, values: vec![0.0; rows * cols * classes] }
    }

    pub fn for_grid(grid: &OpDistributionGrid) -> Self {
        Self::zeros(grid.rows(), grid.cols(), grid.num_classes())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.cols + j) * self.classes;
        &self.values[start..start + self.classes]
    }

    #[inline]
    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = (i * self.cols + j) * self.classes;
        &mut self.values[start..start + self.classes]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, class: usize, v: f64) {
        self.values[(i * self.cols + j) * self.classes + class] += v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_scaled(&mut self, other: &CellGradient, factor: f64) {
        assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }
}
