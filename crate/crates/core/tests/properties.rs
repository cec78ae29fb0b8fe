//! Property tests over randomly generated inputs.

use std::collections::HashSet;

use ideal::annotation::diffusion_schedule;
use ideal::diffusion::{exact_influence, InfluenceTable};
use ideal::embedding::EmbeddingSet;
use ideal::graph::DiffusionGraph;
use ideal::selection::{
    brute_force_optimal, exact_greedy, fast_votek_select, kmeans_select, mfl_select, random_select,
};
use ideal::theory::{bound_value, random_graph, GraphSpec};
use proptest::prelude::*;

fn embeddings(max_n: usize) -> impl Strategy<Value = EmbeddingSet> {
    (2..=max_n, 2..=5usize).prop_flat_map(|(n, d)| {
        proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, d), n)
            .prop_filter("no zero rows", |rows| {
                rows.iter().all(|r| r.iter().any(|x| x.abs() > 1e-3))
            })
            .prop_map(|rows| EmbeddingSet::from_vectors(rows).unwrap())
    })
}

fn small_graph() -> impl Strategy<Value = DiffusionGraph> {
    (any::<u64>(), 2..=7usize).prop_map(|(seed, max_n)| {
        let spec = GraphSpec {
            min_n: 2,
            max_n,
            density: 0.5,
            max_uncertain: 12,
        };
        random_graph(&spec, seed).unwrap().0
    })
}

fn distinct(v: &[usize]) -> bool {
    v.iter().collect::<HashSet<_>>().len() == v.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn baselines_return_m_distinct_indices(e in embeddings(25), seed in any::<u64>(), frac in 0.0f64..1.0) {
        let n = e.len();
        let m = 1 + ((n - 1) as f64 * frac) as usize;
        let e = e.normalize().unwrap();
        let g = DiffusionGraph::build(&e, 3.min(n - 1)).unwrap();
        for result in [
            random_select(n, m, seed).unwrap(),
            kmeans_select(&e, m, seed).unwrap(),
            mfl_select(&e, m).unwrap(),
            fast_votek_select(&g.knn_lists(), m, 10.0).unwrap(),
        ] {
            prop_assert_eq!(result.selected.len(), m);
            prop_assert!(distinct(&result.selected));
            prop_assert!(result.selected.iter().all(|&v| v < n));
        }
        prop_assert_eq!(kmeans_select(&e, m, seed).unwrap().selected, kmeans_select(&e, m, seed).unwrap().selected);
    }

    #[test]
    fn knn_probabilities_form_distributions(e in embeddings(20), k in 1..6usize) {
        let g = DiffusionGraph::build(&e, k).unwrap();
        for v in 0..g.n() {
            let probs: Vec<f64> = g.successors(v).map(|(_, p)| p).collect();
            prop_assert_eq!(probs.len(), k.min(g.n() - 1));
            let total: f64 = probs.iter().sum();
            prop_assert!(total == 0.0 || (total - 1.0).abs() < 1e-9);
            prop_assert!(probs.windows(2).all(|w| w[0] >= w[1]));
        }
        prop_assert_eq!(DiffusionGraph::parse(&g.to_text()).unwrap().knn_lists(), g.knn_lists());
    }

    #[test]
    fn exact_greedy_is_within_the_bound(g in small_graph(), m in 1..4usize) {
        let m = m.min(g.n());
        let table = InfluenceTable::new(&g).unwrap();
        let greedy = exact_greedy(&table, m, false).unwrap();
        let lazy = exact_greedy(&table, m, true).unwrap();
        prop_assert_eq!(&greedy.selected, &lazy.selected);
        let best = brute_force_optimal(&g, m).unwrap();
        let optimum = best.marginal_gains[0];
        prop_assert!(greedy.values[m - 1] <= optimum + 1e-9);
        prop_assert!(greedy.values[m - 1] >= bound_value(m as u64).unwrap() * optimum - 1e-9);
        prop_assert_eq!(exact_influence(&g, &best.selected).unwrap(), optimum);
    }

    #[test]
    fn influence_lies_between_seed_count_and_reach(g in small_graph(), mask in 1u32..128) {
        let s: Vec<usize> = (0..g.n()).filter(|v| mask >> v & 1 == 1).collect();
        prop_assume!(!s.is_empty());
        let f = exact_influence(&g, &s).unwrap();
        prop_assert!(f >= s.len() as f64);
        prop_assert!(f <= g.n() as f64);
    }

    #[test]
    fn schedules_cover_the_pool(e in embeddings(30), seed in any::<u64>(), c in 1..5usize, pick in any::<u64>()) {
        let n = e.len();
        let g = DiffusionGraph::build(&e, 2.min(n - 1)).unwrap();
        let manual: Vec<usize> = (0..n).filter(|v| (pick >> (v % 64)) & 1 == 1).collect();
        let manual = if manual.is_empty() { vec![0] } else { manual };
        let s = diffusion_schedule(&g, &e, &manual, c, seed).unwrap();
        prop_assert_eq!(s.coverage(), n);
        let mut done: HashSet<String> = s.manual.iter().cloned().collect();
        for round in &s.rounds {
            for r in round {
                prop_assert!(!r.prompt_sources.is_empty());
                prop_assert!(r.prompt_sources.iter().all(|p| done.contains(p)));
            }
            for r in round {
                prop_assert!(done.insert(r.target.clone()));
            }
        }
        prop_assert_eq!(done.len(), n);
    }
}
