use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{rng_for, GraphSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regime {
    /// Observed edges are held out as positives and paired with
    /// `negpos_ratio` sampled non-edges each.
    EdgeHoldout {
        negpos_ratio: f64,
        test_frac: f64,
        val_frac: f64,
    },
    /// A fraction of vertices is held out with all its incident edges; the
    /// test set consists of dyads touching a held-out vertex.
    NodeHoldout {
        frac: f64,
        negpos_ratio: f64,
        val_frac: f64,
    },
    /// Uniformly sampled vertex pairs, labelled by the observed graph.
    UniformDyads {
        train_frac: f64,
        val_frac: f64,
        test_frac: f64,
    },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::EdgeHoldout { .. } => "edge_holdout",
            Regime::NodeHoldout { .. } => "node_holdout",
            Regime::UniformDyads { .. } => "uniform_dyads",
        }
    }

    fn validate(&self) -> Result<()> {
        let frac = |x: f64| x > 0.0 && x < 1.0;
        let ok = match *self {
            Regime::EdgeHoldout {
                negpos_ratio,
                test_frac,
                val_frac,
            } => negpos_ratio >= 1.0 && frac(test_frac) && frac(val_frac) && test_frac + val_frac < 1.0,
            Regime::NodeHoldout {
                frac: f,
                negpos_ratio,
                val_frac,
            } => negpos_ratio >= 1.0 && frac(f) && frac(val_frac),
            Regime::UniformDyads {
                train_frac,
                val_frac,
                test_frac,
            } => frac(train_frac) && frac(val_frac) && frac(test_frac) && train_frac + val_frac + test_frac <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid split parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledDyad {
    pub i: usize,
    pub j: usize,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub regime: Regime,
    pub seed: u64,
    pub n: usize,
    pub train: Vec<LabeledDyad>,
    pub val: Vec<LabeledDyad>,
    pub test: Vec<LabeledDyad>,
    /// The graph agents may be fitted on.
    pub train_graph: GraphSample,
    pub held_out_nodes: Vec<usize>,
    /// Realized positive rates of (train, val, test).
    pub positive_rates: [f64; 3],
    /// Realized negatives per positive over all three sets.
    pub negpos_realized: f64,
}

fn rate(d: &[LabeledDyad]) -> f64 {
    if d.is_empty() {
        return f64::NAN;
    }
    d.iter().filter(|x| x.label).count() as f64 / d.len() as f64
}

fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Lexicographic pair index `k ↦ (i, j)`, `i < j`.
pub fn pair_from_index(n: usize, k: usize) -> (usize, usize) {
    let row_start = |i: usize| i * (2 * n - i - 1) / 2;
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * k as f64;
    let mut i = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor().max(0.0) as usize;
    i = i.min(n - 2);
    while i > 0 && row_start(i) > k {
        i -= 1;
    }
    while i + 1 < n - 1 && row_start(i + 1) <= k {
        i += 1;
    }
    (i, i + 1 + (k - row_start(i)))
}

/// `count` distinct non-edges satisfying `allowed`, uniformly without
/// replacement, avoiding `exclude`.
fn sample_non_edges(
    g: &GraphSample,
    count: usize,
    allowed_pairs: usize,
    allowed: &dyn Fn(usize, usize) -> bool,
    exclude: &HashSet<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    let total = num_pairs(g.n);
    let available = allowed_pairs.saturating_sub(
        g.edges.iter().filter(|&&(i, j)| allowed(i, j)).count()
            + exclude
                .iter()
                .filter(|&&(i, j)| allowed(i, j) && !g.has_edge(i, j))
                .count(),
    );
    if count > available {
        return Err(Error::invalid(format!(
            "requested {count} negative dyads but only {available} eligible non-edges exist"
        )));
    }
    let ok = |i: usize, j: usize| allowed(i, j) && !g.has_edge(i, j) && !exclude.contains(&(i, j));
    if count.saturating_mul(2) > available || total <= 1 << 16 {
        let mut pool: Vec<(usize, usize)> = (0..total)
            .map(|k| pair_from_index(g.n, k))
            .filter(|&(i, j)| ok(i, j))
            .collect();
        pool.shuffle(rng);
        pool.truncate(count);
        return Ok(pool);
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = pair_from_index(g.n, rng.random_range(0..total));
        if ok(p.0, p.1) && seen.insert(p) {
            out.push(p);
        }
    }
    Ok(out)
}

fn labeled(pairs: &[(usize, usize)], label: bool) -> Vec<LabeledDyad> {
    pairs.iter().map(|&(i, j)| LabeledDyad { i, j, label }).collect()
}

fn ratio_count(ratio: f64, pos: usize) -> usize {
    (ratio * pos as f64).round() as usize
}

fn frac_count(frac: f64, total: usize) -> usize {
    ((frac * total as f64).round() as usize).max(1)
}

/// Splits `g` under `regime`; deterministic given `seed`.
pub fn make_split(g: &GraphSample, regime: &Regime, seed: u64) -> Result<SplitSpec> {
    regime.validate()?;
    if g.n < 3 {
        return Err(Error::invalid("splitting needs at least three vertices"));
    }
    let mut rng = rng_for(seed, 0);
    let all = num_pairs(g.n);
    let (train, val, test, train_edges, held) = match *regime {
        Regime::EdgeHoldout {
            negpos_ratio,
            test_frac,
            val_frac,
        } => {
            let m = g.num_edges();
            let (nt, nv) = (frac_count(test_frac, m), frac_count(val_frac, m));
            if nt + nv >= m {
                return Err(Error::invalid(format!(
                    "{m} edges are too few to hold out {nt} test and {nv} validation positives"
                )));
            }
            let mut e = g.edges.clone();
            e.shuffle(&mut rng);
            let (tp, rest) = e.split_at(nt);
            let (vp, trp) = rest.split_at(nv);
            let counts = [
                ratio_count(negpos_ratio, nt),
                ratio_count(negpos_ratio, nv),
                ratio_count(negpos_ratio, trp.len()),
            ];
            let negs = sample_non_edges(g, counts.iter().sum(), all, &|_, _| true, &HashSet::new(), &mut rng)?;
            let (tn, rest) = negs.split_at(counts[0]);
            let (vn, trn) = rest.split_at(counts[1]);
            let mut train_edges = trp.to_vec();
            train_edges.sort_unstable();
            (
                [labeled(trp, true), labeled(trn, false)].concat(),
                [labeled(vp, true), labeled(vn, false)].concat(),
                [labeled(tp, true), labeled(tn, false)].concat(),
                train_edges,
                Vec::new(),
            )
        }
        Regime::NodeHoldout {
            frac,
            negpos_ratio,
            val_frac,
        } => {
            let h = frac_count(frac, g.n).min(g.n - 2);
            let mut held: Vec<usize> = index::sample(&mut rng, g.n, h).into_vec();
            held.sort_unstable();
            let mut is_held = vec![false; g.n];
            held.iter().for_each(|&v| is_held[v] = true);
            let (tp, kept): (Vec<_>, Vec<_>) = g.edges.iter().partition(|&&(i, j)| is_held[i] || is_held[j]);
            if tp.is_empty() {
                return Err(Error::invalid("held-out vertices carry no edges"));
            }
            let kept_n = g.n - h;
            let touching_pairs = all - num_pairs(kept_n);
            let touches = |i: usize, j: usize| is_held[i] || is_held[j];
            let tn = sample_non_edges(
                g,
                ratio_count(negpos_ratio, tp.len()),
                touching_pairs,
                &touches,
                &HashSet::new(),
                &mut rng,
            )?;
            let mut kept = kept;
            kept.shuffle(&mut rng);
            let nv = frac_count(val_frac, kept.len());
            if nv >= kept.len() {
                return Err(Error::invalid("too few retained edges for a validation split"));
            }
            let (vp, trp) = kept.split_at(nv);
            let inside = |i: usize, j: usize| !is_held[i] && !is_held[j];
            let nvn = ratio_count(negpos_ratio, vp.len());
            let ntn = ratio_count(negpos_ratio, trp.len());
            let negs = sample_non_edges(g, nvn + ntn, num_pairs(kept_n), &inside, &HashSet::new(), &mut rng)?;
            let (vn, trn) = negs.split_at(nvn);
            let mut train_edges = trp.to_vec();
            train_edges.sort_unstable();
            (
                [labeled(trp, true), labeled(trn, false)].concat(),
                [labeled(vp, true), labeled(vn, false)].concat(),
                [labeled(&tp, true), labeled(&tn, false)].concat(),
                train_edges,
                held,
            )
        }
        Regime::UniformDyads {
            train_frac,
            val_frac,
            test_frac,
        } => {
            let counts = [
                frac_count(train_frac, all),
                frac_count(val_frac, all),
                frac_count(test_frac, all),
            ];
            let total: usize = counts.iter().sum();
            if total > all {
                return Err(Error::invalid("requested more dyads than vertex pairs"));
            }
            let idx = index::sample(&mut rng, all, total).into_vec();
            let pairs: Vec<LabeledDyad> = idx
                .iter()
                .map(|&k| {
                    let (i, j) = pair_from_index(g.n, k);
                    LabeledDyad {
                        i,
                        j,
                        label: g.has_edge(i, j),
                    }
                })
                .collect();
            let (tr, rest) = pairs.split_at(counts[0]);
            let (va, te) = rest.split_at(counts[1]);
            let removed: HashSet<(usize, usize)> =
                va.iter().chain(te).filter(|d| d.label).map(|d| (d.i, d.j)).collect();
            let train_edges = g.edges.iter().copied().filter(|e| !removed.contains(e)).collect();
            (tr.to_vec(), va.to_vec(), te.to_vec(), train_edges, Vec::new())
        }
    };
    let pos = [&train, &val, &test]
        .iter()
        .map(|d| d.iter().filter(|x| x.label).count())
        .sum::<usize>();
    let neg = train.len() + val.len() + test.len() - pos;
    Ok(SplitSpec {
        regime: *regime,
        seed,
        n: g.n,
        positive_rates: [rate(&train), rate(&val), rate(&test)],
        negpos_realized: if pos > 0 {
            neg as f64 / pos as f64
        } else {
            f64::INFINITY
        },
        train,
        val,
        test,
        train_graph: GraphSample::from_edges(g.n, train_edges)?,
        held_out_nodes: held,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `Err(Leakage)` listing every failed check.
    pub fn ensure(&self) -> Result<()> {
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Leakage(failed.join("; ")))
        }
    }
}

/// Split-hygiene audit against the observed graph `g`.
pub fn audit(split: &SplitSpec, g: &GraphSample) -> AuditReport {
    let mut checks = Vec::new();
    let mut check = |name: &str, bad: usize, what: &str| {
        checks.push(AuditCheck {
            name: name.to_string(),
            passed: bad == 0,
            detail: format!("{bad} {what}"),
        });
    };
    let sets = [("train", &split.train), ("val", &split.val), ("test", &split.test)];
    let all = || sets.iter().flat_map(|(_, s)| s.iter());

    check(
        "ordered_pairs",
        all().filter(|d| !(d.i < d.j && d.j < split.n)).count(),
        "dyads violate i < j < n",
    );
    let mut dup = 0;
    let keysets: Vec<HashSet<(usize, usize)>> = sets
        .iter()
        .map(|(_, s)| {
            let mut h = HashSet::with_capacity(s.len());
            for d in s.iter() {
                if !h.insert((d.i, d.j)) {
                    dup += 1;
                }
            }
            h
        })
        .collect();
    check("no_duplicates", dup, "repeated dyads within a set");
    let overlap = keysets[0].intersection(&keysets[1]).count()
        + keysets[0].intersection(&keysets[2]).count()
        + keysets[1].intersection(&keysets[2]).count();
    check("disjoint_sets", overlap, "dyads shared between train/val/test");
    check(
        "labels_match_graph",
        all().filter(|d| d.j < g.n && d.label != g.has_edge(d.i, d.j)).count(),
        "labels disagree with the observed graph",
    );
    check(
        "heldout_edges_removed",
        split
            .val
            .iter()
            .chain(&split.test)
            .filter(|d| d.label && split.train_graph.has_edge(d.i, d.j))
            .count(),
        "validation/test positives present in the training graph",
    );
    check(
        "train_graph_subset",
        split
            .train_graph
            .edges
            .iter()
            .filter(|&&(i, j)| !g.has_edge(i, j))
            .count(),
        "training-graph edges absent from the observed graph",
    );
    check(
        "symmetric_simple_train_graph",
        split.train_graph.edges.windows(2).filter(|w| w[0] >= w[1]).count()
            + split.train_graph.edges.iter().filter(|e| e.0 >= e.1).count(),
        "training-graph edges not in strict i < j order",
    );
    if !split.held_out_nodes.is_empty() {
        let mut held = vec![false; split.n];
        split.held_out_nodes.iter().for_each(|&v| held[v] = true);
        let touches = |d: &LabeledDyad| held[d.i] || held[d.j];
        check(
            "heldout_nodes_isolated_in_train",
            split
                .train_graph
                .edges
                .iter()
                .filter(|&&(i, j)| held[i] || held[j])
                .count(),
            "training edges incident to held-out vertices",
        );
        check(
            "test_touches_heldout",
            split.test.iter().filter(|d| !touches(d)).count(),
            "test dyads avoid the held-out vertices",
        );
        check(
            "train_val_avoid_heldout",
            split.train.iter().chain(&split.val).filter(|d| touches(d)).count(),
            "train/validation dyads touch held-out vertices",
        );
    }
    AuditReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::Graphon;
    use crate::sampling::sample_graph;

    #[test]
    fn pair_index_round_trip() {
        for n in [3, 4, 7, 50] {
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    assert_eq!(pair_from_index(n, k), (i, j));
                    k += 1;
                }
            }
        }
    }

    fn graph() -> GraphSample {
        sample_graph(&Graphon::constant(0.1).unwrap(), 100, 3).unwrap()
    }

    #[test]
    fn edge_holdout_ratio_and_hygiene() {
        let g = graph();
        let r = Regime::EdgeHoldout {
            negpos_ratio: 3.0,
            test_frac: 0.2,
            val_frac: 0.1,
        };
        let s = make_split(&g, &r, 1).unwrap();
        let tp = s.test.iter().filter(|d| d.label).count();
        assert_eq!(s.test.len() - tp, 3 * tp);
        assert!(audit(&s, &g).passed());
        assert_eq!(s, make_split(&g, &r, 1).unwrap());
    }

    #[test]
    fn node_holdout_isolates() {
        let g = graph();
        let r = Regime::NodeHoldout {
            frac: 0.1,
            negpos_ratio: 1.0,
            val_frac: 0.1,
        };
        let s = make_split(&g, &r, 2).unwrap();
        assert_eq!(s.held_out_nodes.len(), 10);
        let a = audit(&s, &g);
        assert!(a.passed(), "{:?}", a);
    }

    #[test]
    fn uniform_dyads_remove_test_edges() {
        let g = graph();
        let r = Regime::UniformDyads {
            train_frac: 0.4,
            val_frac: 0.1,
            test_frac: 0.5,
        };
        let s = make_split(&g, &r, 3).unwrap();
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 4950);
        assert!(audit(&s, &g).ensure().is_ok());
    }

    #[test]
    fn audit_detects_leakage() {
        let g = graph();
        let r = Regime::EdgeHoldout {
            negpos_ratio: 1.0,
            test_frac: 0.2,
            val_frac: 0.1,
        };
        let mut s = make_split(&g, &r, 1).unwrap();
        s.train_graph = g.clone();
        s.train.push(s.test[0]);
        let a = audit(&s, &g);
        assert!(matches!(a.ensure(), Err(Error::Leakage(_))));
        let failed: Vec<_> = a.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["disjoint_sets", "heldout_edges_removed"]);
    }

    #[test]
    fn too_many_negatives_rejected() {
        let g = sample_graph(&Graphon::constant(0.9).unwrap(), 30, 1).unwrap();
        let r = Regime::EdgeHoldout {
            negpos_ratio: 3.0,
            test_frac: 0.2,
            val_frac: 0.1,
        };
        let e = make_split(&g, &r, 1).unwrap_err();
        assert!(e.to_string().contains("eligible non-edges"), "{e}");
    }
}
