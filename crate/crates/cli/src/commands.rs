use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use ideal::annotation::diffusion_schedule;
use ideal::diffusion::{simulate_cascade, InfluenceEstimator};
use ideal::embedding::{cosine, EmbeddingSet, Format};
use ideal::graph::DiffusionGraph;
use ideal::retrieval::RetrievalIndex;
use ideal::selection::{
    brute_force_optimal, fast_votek_select, greedy_select_with, kmeans_select, mfl_select,
    random_select, GreedyConfig, Method, SelectionRecord,
};
use ideal::theory::{run_theory_checks, VerifyConfig};

use crate::output::{metadata, with_provenance, write_json, write_sidecar, write_text};
use crate::{
    AutoAnnotate, BuildGraph, CheckFailed, Global, Influence, Retrieve, Select, Trace, Verify,
};

/// Load and unit-normalize an embedding file.
fn load_embeddings(global: &Global, path: &Path) -> anyhow::Result<EmbeddingSet> {
    let format = global
        .format
        .or_else(|| Format::from_extension(path))
        .unwrap_or(Format::Jsonl);
    Ok(EmbeddingSet::load(path, format)?.normalize()?)
}

fn load_graph(path: &Path) -> anyhow::Result<DiffusionGraph> {
    Ok(DiffusionGraph::load(path)?)
}

/// Vertex ids: from the embeddings when given, else the vertex indices.
fn vertex_ids(n: usize, e: Option<&EmbeddingSet>) -> anyhow::Result<Vec<String>> {
    match e {
        Some(e) if e.len() != n => {
            bail!(
                "embeddings have {} rows but the graph has {n} vertices",
                e.len()
            )
        }
        Some(e) => Ok(e.ids().to_vec()),
        None => Ok((0..n).map(|i| i.to_string()).collect()),
    }
}

/// Read ids from a selection file (its `selected` list) or from a plain list
/// with one id per line, and map them to vertex indices.
fn read_subset(path: &Path, ids: &[String]) -> anyhow::Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| ideal::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let names: Vec<String> = if text.trim_start().starts_with('{') {
        let value: Value = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse {}", path.display()))?;
        let Some(list) = value.get("selected").and_then(Value::as_array) else {
            bail!("{} has no \"selected\" list", path.display());
        };
        list.iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                other => Ok(other.to_string()),
            })
            .collect::<anyhow::Result<_>>()?
    } else {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect()
    };
    if names.is_empty() {
        bail!("{} lists no ids", path.display());
    }
    let lookup: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    names
        .iter()
        .map(|id| {
            lookup
                .get(id.as_str())
                .copied()
                .ok_or_else(|| ideal::Error::UnknownId(id.clone()).into())
        })
        .collect()
}

pub fn build_graph(global: &Global, args: &BuildGraph) -> anyhow::Result<()> {
    let e = load_embeddings(global, &args.embeddings)?;
    let start = Instant::now();
    let g = DiffusionGraph::build(&e, args.k)?;
    let elapsed = start.elapsed();
    write_text(&args.out, &g.to_text())?;
    write_sidecar(
        &args.out,
        json!({
            "command": "build-graph",
            "k": args.k,
            "embeddings": e.content_hash(),
            "normalized": true,
        }),
    )?;
    println!(
        "built graph: n={} k={} edges={} in {:.1} ms",
        g.n(),
        g.k(),
        g.edge_count(),
        elapsed.as_secs_f64() * 1e3
    );
    Ok(())
}

pub fn select(global: &Global, args: &Select) -> anyhow::Result<()> {
    let needs_graph = args.method.uses_graph();
    let needs_embeddings = matches!(args.method, Method::Kmeans | Method::Mfl);
    if needs_graph && args.graph.is_none() {
        bail!("method {} needs --graph", args.method);
    }
    if needs_embeddings && args.embeddings.is_none() {
        bail!("method {} needs --embeddings", args.method);
    }
    if args.graph.is_none() && args.embeddings.is_none() {
        bail!("need --graph or --embeddings");
    }
    let g = args.graph.as_deref().map(load_graph).transpose()?;
    let e = args
        .embeddings
        .as_deref()
        .map(|p| load_embeddings(global, p))
        .transpose()?;
    let n = g.as_ref().map_or_else(
        || e.as_ref().map_or(0, EmbeddingSet::len),
        DiffusionGraph::n,
    );
    let ids = vertex_ids(n, e.as_ref())?;
    let lazy = args.lazy || args.method == Method::IdealLazy;

    let result = match args.method {
        Method::Ideal | Method::IdealLazy => {
            let config = GreedyConfig {
                reps: args.reps,
                seed: global.seed,
                lazy,
                randomness: args.randomness,
            };
            greedy_select_with(g.as_ref().expect("checked"), args.budget, &config)?
        }
        Method::BruteForce => brute_force_optimal(g.as_ref().expect("checked"), args.budget)?,
        Method::FastVotek => fast_votek_select(
            &g.as_ref().expect("checked").knn_lists(),
            args.budget,
            args.rho,
        )?,
        Method::Kmeans => kmeans_select(e.as_ref().expect("checked"), args.budget, global.seed)?,
        Method::Mfl => mfl_select(e.as_ref().expect("checked"), args.budget)?,
        Method::Random => random_select(n, args.budget, global.seed)?,
    };

    let mut record = result.to_record(&ids);
    record.config = Some(json!({
        "command": "select",
        "method": args.method,
        "budget": args.budget,
        "seed": global.seed,
        "reps": args.reps,
        "lazy": lazy,
        "randomness": args.randomness,
        "rho": args.rho,
        "graph": g.as_ref().map(|g| g.built_from().to_string()),
        "k": g.as_ref().map(DiffusionGraph::k),
        "embeddings": e.as_ref().map(EmbeddingSet::content_hash),
    }));
    record.metadata = Some(metadata());
    write_json(&args.out, &serde_json::to_value(&record)?)?;
    println!(
        "selected {} examples with {}; {} evaluations; {:.1} ms",
        record.selected.len(),
        result.method,
        record.evaluations,
        record.wall_time_ms
    );
    Ok(())
}

pub fn influence(global: &Global, args: &Influence) -> anyhow::Result<()> {
    let g = load_graph(&args.graph)?;
    let e = args
        .embeddings
        .as_deref()
        .map(|p| load_embeddings(global, p))
        .transpose()?;
    let ids = vertex_ids(g.n(), e.as_ref())?;
    let subset = read_subset(&args.subset, &ids)?;
    let estimator = InfluenceEstimator::new(&g, args.reps, global.seed, args.randomness)?;
    let estimate = estimator.estimate(&subset)?;
    println!(
        "f(S) = {:.6} ± {:.6} (|S| = {}, reps = {}, seed = {})",
        estimate.mean, estimate.std_error, estimate.subset_size, estimate.reps, estimate.seed
    );
    if let Some(out) = &args.out {
        let value = json!({
            "subset": subset.iter().map(|&v| ids[v].clone()).collect::<Vec<_>>(),
            "estimate": estimate,
        });
        let config = json!({
            "command": "influence",
            "seed": global.seed,
            "reps": args.reps,
            "randomness": args.randomness,
            "graph": g.built_from(),
        });
        write_json(out, &with_provenance(value, config))?;
    }
    Ok(())
}

pub fn trace(global: &Global, args: &Trace) -> anyhow::Result<()> {
    let g = load_graph(&args.graph)?;
    let e = args
        .embeddings
        .as_deref()
        .map(|p| load_embeddings(global, p))
        .transpose()?;
    let ids = vertex_ids(g.n(), e.as_ref())?;
    let subset = read_subset(&args.subset, &ids)?;
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed);
    let trace = simulate_cascade(&g, &subset, &mut rng)?;
    let config = json!({
        "command": "trace",
        "seed": global.seed,
        "graph": g.built_from(),
    });
    write_json(
        &args.out,
        &with_provenance(serde_json::to_value(&trace)?, config),
    )?;
    println!(
        "cascade activated {} vertices in {} rounds",
        trace.total_activated(),
        trace.rounds.len()
    );
    Ok(())
}

pub fn retrieve(global: &Global, args: &Retrieve) -> anyhow::Result<()> {
    let pool = load_embeddings(global, &args.embeddings)?;
    let selection = SelectionRecord::load(&args.selection)?;
    let index = RetrievalIndex::from_ids(&pool, &selection.selected)?;
    let queries = load_embeddings(global, &args.queries)?;
    let slots: HashMap<&str, usize> = index
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let lines = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let query = queries.row(q);
            let (prompts, similarities): (Vec<String>, Vec<f64>) = if args.random {
                let seed = global.seed.wrapping_add(q as u64);
                index
                    .random_retrieve(args.c, seed)?
                    .into_iter()
                    .map(|id| {
                        let s = cosine(query, index.vector(slots[id.as_str()]))?;
                        Ok((id, s))
                    })
                    .collect::<ideal::Result<Vec<_>>>()?
                    .into_iter()
                    .unzip()
            } else {
                index
                    .retrieve(query, args.c)?
                    .into_iter()
                    .map(|r| (r.id, r.similarity))
                    .unzip()
            };
            let line = json!({
                "query_id": queries.id(q),
                "prompts": prompts,
                "similarities": similarities,
            });
            Ok(serde_json::to_string(&line)?)
        })
        .collect::<anyhow::Result<Vec<String>>>()?;

    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    write_text(&args.out, &text)?;
    write_sidecar(
        &args.out,
        json!({
            "command": "retrieve",
            "c": args.c,
            "random": args.random,
            "seed": global.seed,
            "pool": index.len(),
            "embeddings": pool.content_hash(),
            "queries": queries.content_hash(),
        }),
    )?;
    println!(
        "retrieved prompts for {} queries from a pool of {}",
        queries.len(),
        index.len()
    );
    Ok(())
}

pub fn auto_annotate(global: &Global, args: &AutoAnnotate) -> anyhow::Result<()> {
    let g = load_graph(&args.graph)?;
    let e = load_embeddings(global, &args.embeddings)?;
    let ids = vertex_ids(g.n(), Some(&e))?;
    let manual = read_subset(&args.manual, &ids)?;
    let mut schedule = diffusion_schedule(&g, &e, &manual, args.c, global.seed)?;
    schedule.config = Some(json!({
        "command": "auto-annotate",
        "c": args.c,
        "seed": global.seed,
        "graph": g.built_from(),
        "embeddings": e.content_hash(),
    }));
    schedule.metadata = Some(metadata());
    write_json(&args.out, &serde_json::to_value(&schedule)?)?;
    println!(
        "scheduled {} of {} examples: {} manual, {} rounds, {} fallbacks",
        schedule.coverage(),
        g.n(),
        schedule.manual.len(),
        schedule.rounds.len(),
        schedule.fallback_count()
    );
    Ok(())
}

pub fn verify(global: &Global, args: &Verify) -> anyhow::Result<()> {
    let config = VerifyConfig {
        trials: args.trials,
        seed: global.seed,
        ..VerifyConfig::default()
    };
    let report = run_theory_checks(&config)?;
    print!("{}", report.table());
    if let Some(out) = &args.out {
        let mut value = serde_json::to_value(&report)?;
        if let Value::Object(map) = &mut value {
            map.insert("metadata".into(), metadata());
        }
        write_json(out, &value)?;
    }
    if !report.pass {
        return Err(CheckFailed.into());
    }
    Ok(())
}
