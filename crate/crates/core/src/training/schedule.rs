/// Learning-rate decay on validation plateaus.
///
/// After `patience` consecutive validations without a strict improvement over the
/// best value so far, the rate is multiplied by `decay` and the counter resets.
/// Training stops once `max_decays` decays have happened.
#[derive(Clone, Debug)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub decay: f64,
    pub patience: usize,
    pub max_decays: usize,
    pub higher_is_better: bool,
    best: Option<f64>,
    stale: usize,
    decays: usize,
    validations: usize,
    decay_points: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub decayed: bool,
    pub stop: bool,
}

impl PlateauSchedule {
    pub fn new(lr: f64, decay: f64, patience: usize, max_decays: usize, higher_is_better: bool) -> Self {
        Self {
            lr,
            decay,
            patience: patience.max(1),
            max_decays,
            higher_is_better,
            best: None,
            stale: 0,
            decays: 0,
            validations: 0,
            decay_points: Vec::new(),
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn decays(&self) -> usize {
        self.decays
    }

    /// 1-based validation indices at which the rate was decayed.
    pub fn decay_points(&self) -> &[usize] {
        &self.decay_points
    }

    pub fn observe(&mut self, metric: f64) -> Observation {
        self.validations += 1;
        let improved = match self.best {
            None => true,
            Some(b) => {
                if self.higher_is_better {
                    metric > b
                } else {
                    metric < b
                }
            }
        };
        let mut decayed = false;
        if improved {
            self.best = Some(metric);
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr *= self.decay;
                self.decays += 1;
                self.stale = 0;
                self.decay_points.push(self.validations);
                decayed = true;
            }
        }
        Observation { improved, decayed, stop: self.decays >= self.max_decays }
    }
}
