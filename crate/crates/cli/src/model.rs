use std::path::Path;

use nsed::checkpoint::{checkpoint_kind, Checkpoint, CheckpointKind, StatCheckpoint};
use nsed::data::{symbol_indices, tokenize, Tokenization, Vocabulary};
use nsed::dp::{forward, viterbi, EditOp, EditScript, ProbTable};
use nsed::model::Task;
use nsed::{matching, transduction, Error, Result};

/// A neural or statistical checkpoint behind one interface.
pub enum Loaded {
    Neural(Checkpoint),
    Stat(StatCheckpoint),
}

impl Loaded {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(match checkpoint_kind(path)? {
            CheckpointKind::Neural => Loaded::Neural(Checkpoint::load(path)?),
            CheckpointKind::Stat => Loaded::Stat(StatCheckpoint::load(path)?),
        })
    }

    pub fn task(&self) -> Task {
        match self {
            Loaded::Neural(c) => c.config.task,
            Loaded::Stat(_) => Task::Match,
        }
    }

    pub fn require(&self, task: Task, command: &str) -> Result<()> {
        if self.task() != task {
            return Err(Error::Config(format!("`{command}` needs a {task} model, this checkpoint is a {} model", self.task())));
        }
        Ok(())
    }

    pub fn source_vocab(&self) -> &Vocabulary {
        match self {
            Loaded::Neural(c) => &c.source_vocab,
            Loaded::Stat(c) => &c.vocab,
        }
    }

    pub fn target_vocab(&self) -> &Vocabulary {
        match self {
            Loaded::Neural(c) => &c.target_vocab,
            Loaded::Stat(c) => &c.vocab,
        }
    }

    pub fn source_tokenization(&self) -> Tokenization {
        match self {
            Loaded::Neural(c) => c.source_tokenization,
            Loaded::Stat(c) => c.tokenization,
        }
    }

    pub fn target_tokenization(&self) -> Tokenization {
        match self {
            Loaded::Neural(c) => c.target_tokenization,
            Loaded::Stat(c) => c.tokenization,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match self {
            Loaded::Neural(c) => c.threshold,
            Loaded::Stat(c) => c.threshold,
        }
    }

    pub fn encode_source(&self, text: &str) -> Result<Vec<u32>> {
        self.source_vocab().encode(&tokenize(text, self.source_tokenization()))
    }

    pub fn encode_target(&self, text: &str) -> Result<Vec<u32>> {
        self.target_vocab().encode(&tokenize(text, self.target_tokenization()))
    }

    /// `log alpha[n, m]`.
    pub fn score(&self, s: &[u32], t: &[u32]) -> Result<f64> {
        match self {
            Loaded::Neural(c) => match c.config.task {
                Task::Match => matching::score_pair(&c.model, s, t),
                Task::Transduce => Ok(transduction::alpha_table(&c.model, s, t)?.total()),
            },
            Loaded::Stat(c) => c.table.log_likelihood(&symbol_indices(s), &symbol_indices(t)),
        }
    }

    pub fn alpha(&self, s: &[u32], t: &[u32]) -> Result<ProbTable> {
        match self {
            Loaded::Neural(c) => match c.config.task {
                Task::Match => matching::alpha_table(&c.model, s, t),
                Task::Transduce => transduction::alpha_table(&c.model, s, t),
            },
            Loaded::Stat(c) => {
                let (si, ti) = (symbol_indices(s), symbol_indices(t));
                forward(&c.table.weights(&si, &ti)?, s.len(), t.len())
            }
        }
    }

    pub fn align(&self, s: &[u32], t: &[u32]) -> Result<EditScript> {
        match self {
            Loaded::Neural(c) => match c.config.task {
                Task::Match => matching::align(&c.model, s, t),
                Task::Transduce => transduction::align(&c.model, s, t),
            },
            Loaded::Stat(c) => {
                let (si, ti) = (symbol_indices(s), symbol_indices(t));
                viterbi(&c.table.weights(&si, &ti)?, s.len(), t.len())
            }
        }
    }

    /// Operation tokens such as `sub(a→b)`, `del(a)` and `ins(b)`.
    pub fn script_tokens(&self, script: &EditScript, s: &[u32], t: &[u32]) -> Vec<String> {
        let src = |k: usize| self.source_vocab().symbol(s[k - 1]);
        let tgt = |k: usize| self.target_vocab().symbol(t[k - 1]);
        script
            .ops
            .iter()
            .map(|op| match *op {
                EditOp::Delete { source } => format!("del({})", src(source)),
                EditOp::Insert { target } => format!("ins({})", tgt(target)),
                EditOp::Substitute { source, target } => format!("sub({}\u{2192}{})", src(source), tgt(target)),
            })
            .collect()
    }

    /// Target symbols joined the way the training data wrote them.
    pub fn render_target(&self, ids: &[u32]) -> String {
        let symbols = self.target_vocab().decode(ids);
        match self.target_tokenization() {
            Tokenization::Whitespace => symbols.join(" "),
            Tokenization::Chars => symbols.concat(),
        }
    }
}
