use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Prefix probabilities: the total sits in the bottom-right cell.
    Forward,
    /// Suffix probabilities: the total sits in the top-left cell.
    Backward,
}

/// A log-space `(n + 1) x (m + 1)` table.
#[derive(Clone, PartialEq)]
pub struct ProbTable {
    rows: usize,
    cols: usize,
    orientation: Orientation,
    values: Vec<f64>,
}

impl ProbTable {
    pub(crate) fn filled(rows: usize, cols: usize, orientation: Orientation) -> Self {
        Self { rows, cols, orientation, values: vec![f64::NEG_INFINITY; rows * cols] }
    }

    pub fn from_values(rows: usize, cols: usize, orientation: Orientation, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self { rows, cols, orientation, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Log-probability of the complete pair.
    pub fn total(&self) -> f64 {
        match self.orientation {
            Orientation::Forward => self.get(self.rows - 1, self.cols - 1),
            Orientation::Backward => self.get(0, 0),
        }
    }

    pub fn to_probabilities(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.exp()).collect()
    }

    /// Comma-separated probabilities, one table row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{}", self.get(i, j).exp())).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

impl fmt::Debug for ProbTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ProbTable({:?}, {}x{})", self.orientation, self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{:9.4}", self.get(i, j))).collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        Ok(())
    }
}
