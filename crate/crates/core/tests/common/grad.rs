//! Finite-difference checks of model gradients.

use nsed::dp::{forward, EditWeights, PlausibilityMask};
use nsed::matching::{self, MatchExample};
use nsed::model::{ModelSpec, NeuralModel, Task, BOS, EOS};
use nsed::nn::{EncoderKind, Gradients, ParamStore};
use nsed::training::LossWeights;
use nsed::transduction::{self, TransductionPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::assert_rel_close;

pub const H: f64 = 1e-5;
pub const RTOL: f64 = 1e-3;
pub const ATOL: f64 = 1e-7;

/// Compares `analytic` with central differences of `f` over every scalar of `ps`.
pub fn check_all(ps: &mut ParamStore, analytic: &Gradients, what: &str, f: impl Fn(&ParamStore) -> f64) {
    check_with(ps, |p| p, analytic, what, f);
}

pub fn check_model(model: &mut NeuralModel, analytic: &Gradients, what: &str, f: impl Fn(&NeuralModel) -> f64) {
    check_with(model, |m| &mut m.params, analytic, what, f);
}

pub fn check_with<T>(
    holder: &mut T,
    params: impl Fn(&mut T) -> &mut ParamStore,
    analytic: &Gradients,
    what: &str,
    f: impl Fn(&T) -> f64,
) {
    let ids: Vec<_> = params(holder).ids().collect();
    let mut checked = 0;
    for id in ids {
        for k in 0..params(holder).get(id).len() {
            let x = params(holder).get(id)[k];
            params(holder).set_working_value(id, k, x + H);
            let up = f(holder);
            params(holder).set_working_value(id, k, x - H);
            let down = f(holder);
            params(holder).set_working_value(id, k, x);
            let fd = (up - down) / (2.0 * H);
            let name = format!("{what}: {}[{k}]", params(holder).name(id));
            assert_rel_close(analytic.get(id)[k], fd, RTOL, ATOL, &name);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

pub fn spec(task: Task, encoder: EncoderKind, d: usize, layers: usize) -> ModelSpec {
    ModelSpec {
        task,
        encoder,
        embed_dim: d,
        hidden_dim: d,
        layers,
        heads: 2,
        kernel_width: 3,
        max_positions: 16,
        source_vocab: 6,
        target_vocab: if task == Task::Match { 6 } else { 5 },
    }
}

pub fn random_ids<R: Rng>(rng: &mut R, len: usize, vocab: u32) -> Vec<u32> {
    (0..len).map(|_| rng.random_range(2..vocab)).collect()
}

pub fn only(component: &str, length_norm: bool) -> LossWeights {
    let mut w = LossWeights { em: 0.0, nll: 0.0, bce: 0.0, nonmatch: 0.0, interp: 0.0, interp_length_norm: length_norm };
    match component {
        "em" => w.em = 1.0,
        "nll" => w.nll = 1.0,
        "bce" => w.bce = 1.0,
        "nonmatch" => w.nonmatch = 1.0,
        "interp" => w.interp = 1.0,
        "all" => w = LossWeights { em: 0.0, interp: 0.3, interp_length_norm: length_norm, ..LossWeights::default() },
        other => panic!("unknown component {other}"),
    }
    w
}

/// The EM loss treats the expected distributions as constants, so its finite
/// differences are taken with the expected distributions frozen at the base point:
/// sum over cells of -expected . log predicted.
pub fn frozen_em(model: &NeuralModel, src: &[u32], tgt: &[u32]) -> impl Fn(&NeuralModel) -> f64 {
    let fwd = model.forward_pair(src, tgt).unwrap();
    let g = &fwd.grid;
    let (n, m) = (g.source_len(), g.target_len());
    let alpha = forward(g, n, m).unwrap();
    let beta = nsed::dp::backward(g, n, m).unwrap();
    let em = nsed::dp::em_loss(g, &alpha, &beta, &PlausibilityMask::Standard).unwrap();
    let expected = em.expected.values().to_vec();
    let (src, tgt) = (src.to_vec(), tgt.to_vec());
    move |m: &NeuralModel| {
        let fwd = m.forward_pair(&src, &tgt).unwrap();
        -fwd.grid.log_probs().iter().zip(&expected).map(|(l, e)| if *e > 0.0 { l * e } else { 0.0 }).sum::<f64>()
    }
}

pub fn with_bos(ids: &[u32]) -> Vec<u32> {
    std::iter::once(BOS).chain(ids.iter().copied()).collect()
}

pub fn matching_check(kind: EncoderKind, d: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut model = NeuralModel::new(spec(Task::Match, kind, d, 2), 3).unwrap();
    let source = random_ids(&mut rng, 3, 6);
    let target = random_ids(&mut rng, 2, 6);
    let cases = [
        ("em", true, false),
        ("bce", true, false),
        ("bce", false, false),
        ("nonmatch", false, false),
        ("interp", true, false),
        ("interp", true, true),
        ("all", false, false),
    ];
    for (component, label, norm) in cases {
        let ex = MatchExample { source: source.clone(), target: target.clone(), label };
        let w = only(component, norm);
        let mut grads = Gradients::zeros_like(&model.params);
        let loss = matching::pair_loss(&model, &ex, &w, Some(&mut grads)).unwrap();
        assert!(loss.total.is_finite() && loss.total > 0.0, "{component}: {loss:?}");
        let what = format!("match/{kind}/{component}/label={label}/norm={norm}");
        if component == "em" {
            let f = frozen_em(&model, &with_bos(&source), &with_bos(&target));
            check_model(&mut model, &grads, &what, f);
        } else {
            check_model(&mut model, &grads, &what, |m| matching::pair_loss(m, &ex, &w, None).unwrap().total);
        }
    }
}

pub fn transduction_check(kind: EncoderKind, d: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut model = NeuralModel::new(spec(Task::Transduce, kind, d, 2), 4).unwrap();
    let pair = TransductionPair { source: random_ids(&mut rng, 3, 6), target: random_ids(&mut rng, 3, 5) };
    for (component, norm) in [("em", false), ("nll", false), ("interp", false), ("interp", true)] {
        let w = only(component, norm);
        let mut grads = Gradients::zeros_like(&model.params);
        let loss = transduction::pair_loss(&model, &pair, &w, Some(&mut grads)).unwrap();
        assert!(loss.total.is_finite() && loss.total > 0.0, "{component}: {loss:?}");
        let what = format!("transduce/{kind}/{component}/norm={norm}");
        if component == "em" {
            let mut tgt = with_bos(&pair.target);
            tgt.push(EOS);
            let f = frozen_em(&model, &with_bos(&pair.source), &tgt);
            check_model(&mut model, &grads, &what, f);
        } else {
            check_model(&mut model, &grads, &what, |m| transduction::pair_loss(m, &pair, &w, None).unwrap().total);
        }
    }
}

