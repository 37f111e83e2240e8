//! Instance generators: random semi-online instances with several
//! adversaries, the agnostic hard instance, and the `(d, eps)` perturbation
//! model.
//!
//! The adversaries are stress heuristics, not worst cases.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{extend_to_maximum, matching_number, max_matching, BipartiteGraph, Matching};
use crate::integral::{check_identities, realized_graph, ArrivalEvent, StructuredSampler};

/// A predicted graph plus the realized arrival sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr")]
pub struct SemiOnlineInstance {
    pub predicted: BipartiteGraph,
    pub arrivals: Vec<ArrivalEvent>,
    /// Per arrival: whether the adversary controls it.
    pub adversarial: Vec<bool>,
    /// Optimal matching of the realized graph as `(offline, arrival)`.
    pub ground_truth: Option<Matching>,
    pub seed: u64,
}

#[derive(Deserialize)]
struct InstanceRepr {
    predicted: BipartiteGraph,
    arrivals: Vec<ArrivalEvent>,
    adversarial: Vec<bool>,
    ground_truth: Option<Matching>,
    seed: u64,
}

impl TryFrom<InstanceRepr> for SemiOnlineInstance {
    type Error = Error;

    fn try_from(r: InstanceRepr) -> Result<Self> {
        let inst = SemiOnlineInstance {
            predicted: r.predicted,
            arrivals: r.arrivals,
            adversarial: r.adversarial,
            ground_truth: r.ground_truth,
            seed: r.seed,
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl SemiOnlineInstance {
    pub fn validate(&self) -> Result<()> {
        if self.adversarial.len() != self.arrivals.len() {
            return Err(Error::InvalidInstance(format!(
                "{} adversarial flags for {} arrivals",
                self.adversarial.len(),
                self.arrivals.len()
            )));
        }
        check_identities(&self.predicted, &self.arrivals)?;
        if let Some(t) = (0..self.arrivals.len())
            .find(|&t| self.adversarial[t] && self.arrivals[t].identity.is_some())
        {
            return Err(Error::InvalidInstance(format!(
                "adversarial arrival {t} carries an identity"
            )));
        }
        let g = self.realized()?;
        if let Some(m) = &self.ground_truth {
            m.validate(&g)?;
            if m.size() != matching_number(&g) {
                return Err(Error::InvalidInstance(
                    "ground truth is not a maximum matching".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn offline_count(&self) -> usize {
        self.predicted.offline_count()
    }

    /// The realized graph, one online node per arrival.
    pub fn realized(&self) -> Result<BipartiteGraph> {
        realized_graph(self.offline_count(), &self.arrivals)
    }

    pub fn nu_g(&self) -> Result<usize> {
        Ok(match &self.ground_truth {
            Some(m) => m.size(),
            None => matching_number(&self.realized()?),
        })
    }

    pub fn nu_h(&self) -> usize {
        matching_number(&self.predicted)
    }

    /// `1 - nu(H) / nu(G)`, clamped at 0; 0 when `G` has no edges.
    pub fn delta(&self) -> Result<f64> {
        let nu_g = self.nu_g()?;
        if nu_g == 0 {
            return Ok(0.0);
        }
        Ok((1.0 - self.nu_h() as f64 / nu_g as f64).max(0.0))
    }

    /// Offline nodes the ground truth matches to adversarial arrivals.
    pub fn marked_offline(&self) -> Vec<usize> {
        let mut marked: Vec<usize> = self
            .ground_truth
            .iter()
            .flat_map(|m| m.pairs().iter())
            .filter(|&&(_, t)| self.adversarial[t])
            .map(|&(u, _)| u)
            .collect();
        marked.sort_unstable();
        marked
    }

    pub fn adversarial_count(&self) -> usize {
        self.adversarial.iter().filter(|&&a| a).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryMode {
    /// Independent random edges.
    Random,
    /// Adversarial node `k` sees the marked nodes of partners `k..d`.
    Targeted,
    /// Planted partner plus the offline nodes structured sampling matches
    /// most often.
    AntiReserve,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalMode {
    PredictedFirst,
    AdversarialFirst,
    Random,
    /// One adversarial arrival after every `(n - d) / d` predicted ones.
    Alternating,
}

pub const ADVERSARY_MODES: [AdversaryMode; 3] = [
    AdversaryMode::Random,
    AdversaryMode::Targeted,
    AdversaryMode::AntiReserve,
];
pub const ARRIVAL_MODES: [ArrivalMode; 4] = [
    ArrivalMode::PredictedFirst,
    ArrivalMode::AdversarialFirst,
    ArrivalMode::Random,
    ArrivalMode::Alternating,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceSpec {
    pub n: usize,
    pub d: usize,
    pub adversary: AdversaryMode,
    pub arrival: ArrivalMode,
    /// Probability of each extra random edge; defaults to `3 / n`.
    #[serde(default)]
    pub edge_probability: Option<f64>,
}

impl RandomInstanceSpec {
    pub fn new(n: usize, d: usize, adversary: AdversaryMode, arrival: ArrivalMode) -> Self {
        Self {
            n,
            d,
            adversary,
            arrival,
            edge_probability: None,
        }
    }

    fn edge_probability(&self) -> f64 {
        self.edge_probability
            .unwrap_or_else(|| (3.0 / self.n.max(1) as f64).min(1.0))
    }
}

const PILOT_SAMPLES: usize = 64;

/// Random instance on `n` offline nodes with `n - d` predicted and `d`
/// adversarial arrivals. A perfect matching is planted: online `j` to
/// offline `pi(j)`; the offline partners of the adversarial arrivals are
/// the marked nodes.
pub fn gen_random_instance<R: Rng + ?Sized>(
    spec: &RandomInstanceSpec,
    seed: u64,
    rng: &mut R,
) -> Result<SemiOnlineInstance> {
    let (n, d) = (spec.n, spec.d);
    let p = spec.edge_probability();
    if d > n {
        return Err(Error::InvalidParameter(format!("d = {d} exceeds n = {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    let mut pi: Vec<usize> = (0..n).collect();
    pi.shuffle(rng);
    let predicted_count = n - d;
    let predicted_lists: Vec<Vec<usize>> = (0..predicted_count)
        .map(|v| random_list(n, p, &[pi[v]], rng))
        .collect();
    let h = BipartiteGraph::from_lists(n, predicted_lists)?;
    let marked = &pi[predicted_count..];

    let adversarial_lists: Vec<Vec<usize>> = match spec.adversary {
        AdversaryMode::Random => (0..d).map(|_| random_list(n, p, &[], rng)).collect(),
        AdversaryMode::Targeted => (0..d).map(|k| sorted(marked[k..].to_vec())).collect(),
        AdversaryMode::AntiReserve => {
            let sampler = StructuredSampler::new(&h)?;
            let mut hits = vec![0usize; n];
            for _ in 0..PILOT_SAMPLES {
                for &(u, _) in sampler.sample(rng)?.matching.pairs() {
                    hits[u] += 1;
                }
            }
            let mut busy: Vec<usize> = (0..n).collect();
            busy.sort_by_key(|&u| (std::cmp::Reverse(hits[u]), u));
            let extra = ((p * n as f64).ceil() as usize).clamp(1, n);
            (0..d)
                .map(|k| {
                    let mut list: Vec<usize> = busy[..extra].to_vec();
                    list.push(marked[k]);
                    sorted(list)
                })
                .collect()
        }
    };

    let order = arrival_order(predicted_count, d, spec.arrival, rng);
    let mut arrivals = Vec::with_capacity(n);
    let mut adversarial = Vec::with_capacity(n);
    let mut planted = Vec::new();
    for (t, slot) in order.into_iter().enumerate() {
        match slot {
            Slot::Predicted(v) => {
                arrivals.push(ArrivalEvent::predicted(v, h.neighbors(v).to_vec()));
                adversarial.push(false);
                planted.push((pi[v], t));
            }
            Slot::Adversarial(k) => {
                arrivals.push(ArrivalEvent::anonymous(adversarial_lists[k].clone()));
                adversarial.push(true);
                if adversarial_lists[k].binary_search(&marked[k]).is_ok() {
                    planted.push((marked[k], t));
                }
            }
        }
    }
    let g = realized_graph(n, &arrivals)?;
    let mut ground_truth = extend_to_maximum(&g, &Matching::new(planted))?;
    ground_truth.normalize();
    Ok(SemiOnlineInstance {
        predicted: h,
        arrivals,
        adversarial,
        ground_truth: Some(ground_truth),
        seed,
    })
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Each offline node independently with probability `p`, plus `forced`.
fn random_list<R: Rng + ?Sized>(n: usize, p: f64, forced: &[usize], rng: &mut R) -> Vec<usize> {
    let mut list: Vec<usize> = (0..n).filter(|_| rng.gen_bool(p)).collect();
    list.extend_from_slice(forced);
    sorted(list)
}

enum Slot {
    Predicted(usize),
    Adversarial(usize),
}

fn arrival_order<R: Rng + ?Sized>(
    predicted: usize,
    d: usize,
    mode: ArrivalMode,
    rng: &mut R,
) -> Vec<Slot> {
    let ps = (0..predicted).map(Slot::Predicted);
    let adv = (0..d).map(Slot::Adversarial);
    match mode {
        ArrivalMode::PredictedFirst => ps.chain(adv).collect(),
        ArrivalMode::AdversarialFirst => adv.chain(ps).collect(),
        ArrivalMode::Random => {
            let mut all: Vec<Slot> = ps.chain(adv).collect();
            all.shuffle(rng);
            all
        }
        ArrivalMode::Alternating => {
            let block = predicted.checked_div(d).unwrap_or(predicted);
            let mut ps = ps.peekable();
            let mut out = Vec::with_capacity(predicted + d);
            for k in 0..d {
                out.extend(ps.by_ref().take(block));
                out.push(Slot::Adversarial(k));
            }
            out.extend(ps);
            out
        }
    }
}

/// Hard instance for agnostic algorithms on `n` offline and online nodes:
/// gadget `i` has `v_{2i} - {u_{2i}, u_{2i+1}}` and `v_{2i+1} - {u_{2i+1}}`.
/// In `d` uniformly chosen gadgets the adversary rewires `v_{2i+1}` to
/// `{u_{2i}}`. Arrivals come in id order without identities.
pub fn gen_hard_agnostic<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    seed: u64,
    rng: &mut R,
) -> Result<SemiOnlineInstance> {
    if n % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "hard instance needs even n, got {n}"
        )));
    }
    let gadgets = n / 2;
    if d > gadgets {
        return Err(Error::InvalidParameter(format!(
            "d = {d} exceeds {gadgets} gadgets"
        )));
    }
    if 4 * d >= n && d > 0 {
        log::warn!(
            "hard instance with d = {d} >= n/4 = {}: outside the regime of the lower bound",
            n as f64 / 4.0
        );
    }
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|v| if v % 2 == 0 { vec![v, v + 1] } else { vec![v] })
        .collect();
    let h = BipartiteGraph::new(n, adjacency)?;
    let mut flipped = vec![false; gadgets];
    for i in index::sample(rng, gadgets, d) {
        flipped[i] = true;
    }
    let mut arrivals = Vec::with_capacity(n);
    let mut adversarial = vec![false; n];
    let mut truth = Vec::with_capacity(n);
    for (i, &flip) in flipped.iter().enumerate() {
        let (a, b) = (2 * i, 2 * i + 1);
        arrivals.push(ArrivalEvent::anonymous(vec![a, b]));
        if flip {
            arrivals.push(ArrivalEvent::anonymous(vec![a]));
            adversarial[b] = true;
            truth.extend([(b, a), (a, b)]);
        } else {
            arrivals.push(ArrivalEvent::anonymous(vec![b]));
            truth.extend([(a, a), (b, b)]);
        }
    }
    let mut ground_truth = Matching::new(truth);
    ground_truth.normalize();
    Ok(SemiOnlineInstance {
        predicted: h,
        arrivals,
        adversarial,
        ground_truth: Some(ground_truth),
        seed,
    })
}

/// Gadget-local strategy on a (possibly perturbed) hard instance: `v_{2i}`
/// takes `u_{2i}` with probability `p` and `u_{2i+1}` otherwise, falling
/// back to the other one if its edge is missing; `v_{2i+1}` then takes any
/// free gadget neighbor. Edges leaving a gadget are ignored.
pub fn hard_agnostic_p_strategy<R: Rng + ?Sized>(
    inst: &SemiOnlineInstance,
    p: f64,
    rng: &mut R,
) -> Result<Matching> {
    let n = inst.offline_count();
    if n % 2 == 1 || inst.arrivals.len() != n {
        return Err(Error::InvalidInstance(
            "not a hard agnostic instance".into(),
        ));
    }
    let mut m = Matching::default();
    for i in 0..n / 2 {
        let (a, b) = (2 * i, 2 * i + 1);
        let has = |t: usize, u: usize| inst.arrivals[t].neighbors.binary_search(&u).is_ok();
        let first = if rng.gen_bool(p) { [a, b] } else { [b, a] };
        let taken = first.into_iter().find(|&u| has(a, u));
        if let Some(u) = taken {
            m.push(u, a);
        }
        if let Some(u) = [a, b].into_iter().find(|&u| Some(u) != taken && has(b, u)) {
            m.push(u, b);
        }
    }
    Ok(m)
}

/// Predicted graph on `n + n` nodes with a planted perfect matching plus
/// independent edges of probability `p`.
pub fn gen_perfect_predicted<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    rng: &mut R,
) -> Result<BipartiteGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    let mut pi: Vec<usize> = (0..n).collect();
    pi.shuffle(rng);
    BipartiteGraph::from_lists(
        n,
        (0..n).map(|v| random_list(n, p, &[pi[v]], rng)).collect(),
    )
}

/// A `(d, eps)` instance over a predicted graph whose online side all
/// arrives: `d` uniformly chosen nodes get a fresh random neighborhood of
/// their old size, the order is random, then [`perturb_d_eps`] applies.
pub fn gen_d_eps<R: Rng + ?Sized>(
    h: &BipartiteGraph,
    d: usize,
    eps: f64,
    seed: u64,
    rng: &mut R,
) -> Result<SemiOnlineInstance> {
    let (n, m) = (h.offline_count(), h.online_count());
    if d > m {
        return Err(Error::InvalidParameter(format!(
            "d = {d} exceeds {m} online nodes"
        )));
    }
    let mut rewired = vec![false; m];
    for v in index::sample(rng, m, d) {
        rewired[v] = true;
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut arrivals = Vec::with_capacity(m);
    let mut adversarial = Vec::with_capacity(m);
    for v in order {
        if rewired[v] {
            let size = h.neighbors(v).len().min(n);
            arrivals.push(ArrivalEvent::anonymous(sorted(
                index::sample(rng, n, size).into_vec(),
            )));
            adversarial.push(true);
        } else {
            arrivals.push(ArrivalEvent::predicted(v, h.neighbors(v).to_vec()));
            adversarial.push(false);
        }
    }
    let inst = SemiOnlineInstance {
        predicted: h.clone(),
        arrivals,
        adversarial,
        ground_truth: None,
        seed,
    };
    perturb_d_eps(&inst, eps, rng)
}

/// Deletes every edge of a non-adversarial arrival with probability `eps`
/// and adds every absent pair at such an arrival with probability
/// `eps |M| / n^2`, `M` a maximum matching of the predicted graph.
/// Adversarial arrivals are left alone.
pub fn perturb_d_eps<R: Rng + ?Sized>(
    inst: &SemiOnlineInstance,
    eps: f64,
    rng: &mut R,
) -> Result<SemiOnlineInstance> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} outside [0, 1]"
        )));
    }
    let n = inst.offline_count();
    let mut out = inst.clone();
    if eps > 0.0 && n > 0 {
        let add = eps * max_matching(&inst.predicted).size() as f64 / (n * n) as f64;
        for (a, &adv) in out.arrivals.iter_mut().zip(&inst.adversarial) {
            if adv {
                continue;
            }
            let old = std::mem::take(&mut a.neighbors);
            let mut present = vec![false; n];
            for &u in &old {
                present[u] = true;
            }
            a.neighbors = (0..n)
                .filter(|&u| {
                    if present[u] {
                        !rng.gen_bool(eps)
                    } else {
                        rng.gen_bool(add)
                    }
                })
                .collect();
        }
    }
    let mut truth = max_matching(&out.realized()?);
    truth.normalize();
    out.ground_truth = Some(truth);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn no_adversary_means_zero_delta() {
        for &adversary in &ADVERSARY_MODES {
            let spec = RandomInstanceSpec::new(12, 0, adversary, ArrivalMode::Random);
            let inst = gen_random_instance(&spec, 0, &mut seeded(1)).unwrap();
            assert_eq!(inst.adversarial_count(), 0);
            assert_eq!(inst.delta().unwrap(), 0.0);
        }
    }

    #[test]
    fn targeted_instances_have_planted_perfect_matching() {
        for &arrival in &ARRIVAL_MODES {
            let spec = RandomInstanceSpec::new(20, 5, AdversaryMode::Targeted, arrival);
            let inst = gen_random_instance(&spec, 3, &mut seeded(3)).unwrap();
            inst.validate().unwrap();
            assert_eq!(inst.nu_g().unwrap(), 20);
            assert!((inst.delta().unwrap() - 0.25).abs() < 1e-12);
            assert_eq!(inst.marked_offline().len(), 5);
        }
    }

    #[test]
    fn all_adversarial_has_unit_delta() {
        let spec =
            RandomInstanceSpec::new(10, 10, AdversaryMode::Targeted, ArrivalMode::PredictedFirst);
        let inst = gen_random_instance(&spec, 0, &mut seeded(2)).unwrap();
        assert_eq!(inst.nu_h(), 0);
        assert_eq!(inst.delta().unwrap(), 1.0);
    }

    #[test]
    fn alternating_interleaves() {
        let spec = RandomInstanceSpec::new(12, 3, AdversaryMode::Random, ArrivalMode::Alternating);
        let inst = gen_random_instance(&spec, 0, &mut seeded(4)).unwrap();
        let pattern: Vec<bool> = inst.adversarial.clone();
        let expect: Vec<bool> = (0..12).map(|t| t % 4 == 3).collect();
        assert_eq!(pattern, expect);
    }

    #[test]
    fn anti_reserve_keeps_the_planted_partner() {
        let spec = RandomInstanceSpec::new(16, 4, AdversaryMode::AntiReserve, ArrivalMode::Random);
        let inst = gen_random_instance(&spec, 0, &mut seeded(5)).unwrap();
        assert_eq!(inst.nu_g().unwrap(), 16);
    }

    #[test]
    fn rejects_bad_parameters() {
        let spec = RandomInstanceSpec::new(4, 5, AdversaryMode::Random, ArrivalMode::Random);
        assert!(gen_random_instance(&spec, 0, &mut seeded(0)).is_err());
        assert!(gen_hard_agnostic(7, 1, 0, &mut seeded(0)).is_err());
        let inst = gen_hard_agnostic(8, 1, 0, &mut seeded(0)).unwrap();
        assert!(perturb_d_eps(&inst, 1.5, &mut seeded(0)).is_err());
    }

    #[test]
    fn hard_instance_examples() {
        let inst = gen_hard_agnostic(8, 1, 7, &mut seeded(7)).unwrap();
        inst.validate().unwrap();
        assert_eq!(inst.adversarial_count(), 1);
        assert_eq!(inst.nu_g().unwrap(), 8);
        assert_eq!(inst.nu_h(), 8);

        let plain = gen_hard_agnostic(8, 0, 0, &mut seeded(0)).unwrap();
        for (v, a) in plain.arrivals.iter().enumerate() {
            assert_eq!(a.neighbors, plain.predicted.neighbors(v));
        }
    }

    #[test]
    fn flipped_gadgets_are_uniform() {
        // Chi-square over the 6 gadget pairs of n = 8, d = 2.
        let mut rng = seeded(8);
        let trials = 10_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..trials {
            let inst = gen_hard_agnostic(8, 2, 0, &mut rng).unwrap();
            let flipped: Vec<usize> = (0..4).filter(|i| inst.adversarial[2 * i + 1]).collect();
            assert_eq!(flipped.len(), 2);
            *counts.entry(flipped).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expect = trials as f64 / 6.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // 99.9% quantile of chi-square with 5 degrees of freedom.
        assert!(chi2 < 20.52, "chi2 = {chi2}");
    }

    #[test]
    fn p_strategy_without_noise() {
        let inst = gen_hard_agnostic(40, 5, 0, &mut seeded(9)).unwrap();
        let m = hard_agnostic_p_strategy(&inst, 1.0, &mut seeded(0)).unwrap();
        m.validate(&inst.realized().unwrap()).unwrap();
        assert_eq!(m.size(), 35);
        // p = 0 loses one edge per clean gadget instead.
        let m = hard_agnostic_p_strategy(&inst, 0.0, &mut seeded(0)).unwrap();
        assert_eq!(m.size(), 20 + 5);
    }

    #[test]
    fn perturbation_rates() {
        let inst = gen_hard_agnostic(40, 5, 0, &mut seeded(10)).unwrap();
        assert_eq!(
            perturb_d_eps(&inst, 0.0, &mut seeded(0)).unwrap().arrivals,
            inst.arrivals
        );

        let eps = 0.1;
        let clean_edges: usize = inst
            .arrivals
            .iter()
            .zip(&inst.adversarial)
            .filter(|x| !x.1)
            .map(|x| x.0.neighbors.len())
            .sum();
        let mut rng = seeded(11);
        let trials = 10_000;
        let (mut deleted, mut added) = (Vec::new(), Vec::new());
        for _ in 0..trials {
            let out = perturb_d_eps(&inst, eps, &mut rng).unwrap();
            let (mut del, mut add) = (0.0, 0.0);
            for (a, b) in inst.arrivals.iter().zip(&out.arrivals) {
                del += a
                    .neighbors
                    .iter()
                    .filter(|u| b.neighbors.binary_search(u).is_err())
                    .count() as f64;
                add += b
                    .neighbors
                    .iter()
                    .filter(|u| a.neighbors.binary_search(u).is_err())
                    .count() as f64;
            }
            for (a, b, adv) in zip3(&inst.arrivals, &out.arrivals, &inst.adversarial) {
                if adv {
                    assert_eq!(a, b);
                }
            }
            deleted.push(del);
            added.push(add);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let expect = eps * clean_edges as f64;
        let sigma = (clean_edges as f64 * eps * (1.0 - eps) / trials as f64).sqrt();
        assert!(
            (mean(&deleted) - expect).abs() <= 3.0 * sigma,
            "{} vs {expect}",
            mean(&deleted)
        );
        assert!(mean(&added) < eps * 40.0);
    }

    fn zip3<'a>(
        a: &'a [ArrivalEvent],
        b: &'a [ArrivalEvent],
        c: &'a [bool],
    ) -> impl Iterator<Item = (&'a ArrivalEvent, &'a ArrivalEvent, bool)> {
        a.iter().zip(b).zip(c).map(|((x, y), &z)| (x, y, z))
    }

    #[test]
    fn d_eps_instances_are_valid() {
        let mut rng = seeded(12);
        let h = gen_perfect_predicted(20, 0.1, &mut rng).unwrap();
        assert_eq!(matching_number(&h), 20);
        let inst = gen_d_eps(&h, 4, 0.05, 0, &mut rng).unwrap();
        inst.validate().unwrap();
        assert_eq!(inst.adversarial_count(), 4);
    }

    #[test]
    fn json_shape() {
        let inst = gen_hard_agnostic(4, 1, 5, &mut seeded(5)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&inst).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(
            keys,
            [
                "adversarial",
                "arrivals",
                "ground_truth",
                "predicted",
                "seed"
            ]
        );
        assert!(v["arrivals"][0]["identity"].is_null());
        assert!(v["ground_truth"][0].is_array());
        let bad = r#"{"predicted":{"offline_count":1,"online_count":1,"adjacency":[[0]]},
            "arrivals":[{"neighbors":[0],"identity":0}],"adversarial":[true],"ground_truth":null,"seed":0}"#;
        assert!(serde_json::from_str::<SemiOnlineInstance>(bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn instances_round_trip_and_are_seeded(
            n in 1usize..30,
            frac in 0.0f64..=1.0,
            a in 0usize..3,
            o in 0usize..4,
            seed in any::<u64>(),
        ) {
            let d = ((n as f64) * frac).round() as usize;
            let spec = RandomInstanceSpec::new(n, d, ADVERSARY_MODES[a], ARRIVAL_MODES[o]);
            let inst = gen_random_instance(&spec, seed, &mut seeded(seed)).unwrap();
            inst.validate().unwrap();
            let text = serde_json::to_string(&inst).unwrap();
            let back: SemiOnlineInstance = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &inst);
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
            let again = gen_random_instance(&spec, seed, &mut seeded(seed)).unwrap();
            prop_assert_eq!(again, inst.clone());
            let delta = inst.delta().unwrap();
            prop_assert!((0.0..=1.0).contains(&delta));
            if ADVERSARY_MODES[a] == AdversaryMode::Targeted {
                prop_assert_eq!(inst.nu_g().unwrap(), n);
            }
        }
    }
}
