//! Text model format.
//!
//! ```text
//! task classification 3
//! n_trees 1
//! features thermal,ndvi
//! seed 42
//! hyperparams max_depth=none min_leaf=1 mtry=2 bootstrap=true
//! tree 0 3
//! 0 split 1 0.55 1 2 4.5
//! 1 leaf 3,0,0
//! 2 leaf 0,1,2
//! ```
//!
//! Split lines are `id split feature threshold left right gain`; leaves hold
//! a mean (regression) or class counts. Floats use Rust's shortest
//! round-trip formatting, so a save/load cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Forest, Hyperparams, Leaf, Node, Task, Tree};

pub fn encode_forest(forest: &Forest) -> String {
    let mut out = String::new();
    match forest.task {
        Task::Regression => out.push_str("task regression\n"),
        Task::Classification => {
            let _ = writeln!(out, "task classification {}", forest.n_classes);
        }
    }
    let hp = &forest.hyperparams;
    let _ = writeln!(out, "n_trees {}", forest.trees.len());
    let _ = writeln!(out, "features {}", forest.feature_names.join(","));
    let _ = writeln!(out, "seed {}", forest.seed);
    let _ = writeln!(
        out,
        "hyperparams max_depth={} min_leaf={} mtry={} bootstrap={}",
        hp.max_depth.map_or("none".to_string(), |d| d.to_string()),
        hp.min_leaf,
        hp.mtry.map_or("auto".to_string(), |m| m.to_string()),
        hp.bootstrap
    );
    for (i, tree) in forest.trees.iter().enumerate() {
        let _ = writeln!(out, "tree {i} {}", tree.nodes.len());
        for (id, node) in tree.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    gain,
                } => {
                    let _ = writeln!(out, "{id} split {feature} {threshold} {left} {right} {gain}");
                }
                Node::Leaf(Leaf::Value(v)) => {
                    let _ = writeln!(out, "{id} leaf {v}");
                }
                Node::Leaf(Leaf::Counts(c)) => {
                    let counts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(out, "{id} leaf {}", counts.join(","));
                }
            }
        }
    }
    out
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("model line {}: {msg}", line + 1))
}

fn parse<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| bad(line, format!("bad {what} {s:?}")))
}

pub fn decode_forest(text: &str) -> Result<Forest> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut header = |key: &str| -> Result<(usize, Vec<String>)> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::Format(format!("model truncated before {key}")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(n, format!("expected {key}")));
        }
        Ok((n, parts.map(str::to_string).collect()))
    };

    let (n, task_parts) = header("task")?;
    let (task, n_classes) = match task_parts.as_slice() {
        [t] if t == "regression" => (Task::Regression, 0),
        [t, k] if t == "classification" => (Task::Classification, parse::<usize>(k, n, "class count")?),
        _ => return Err(bad(n, "bad task line")),
    };
    let (n, v) = header("n_trees")?;
    let n_trees: usize = parse(v.first().map_or("", String::as_str), n, "tree count")?;
    let (_, v) = header("features")?;
    let feature_names: Vec<String> = v
        .first()
        .map(|s| s.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let (n, v) = header("seed")?;
    let seed: u64 = parse(v.first().map_or("", String::as_str), n, "seed")?;
    let (n, v) = header("hyperparams")?;
    let mut hp = Hyperparams::defaults(task);
    hp.n_trees = n_trees;
    for kv in &v {
        let (k, val) = kv.split_once('=').ok_or_else(|| bad(n, "bad hyperparam"))?;
        match k {
            "max_depth" => hp.max_depth = if val == "none" { None } else { Some(parse(val, n, k)?) },
            "min_leaf" => hp.min_leaf = parse(val, n, k)?,
            "mtry" => hp.mtry = if val == "auto" { None } else { Some(parse(val, n, k)?) },
            "bootstrap" => hp.bootstrap = parse(val, n, k)?,
            other => return Err(bad(n, format!("unknown hyperparam {other}"))),
        }
    }

    let p = feature_names.len();
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let (n, line) = lines.next().ok_or_else(|| Error::Format(format!("missing tree {t}")))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "tree" || parts[1] != t.to_string() {
            return Err(bad(n, format!("expected header of tree {t}")));
        }
        let count: usize = parse(parts[2], n, "node count")?;
        let mut nodes = Vec::with_capacity(count);
        for id in 0..count {
            let (n, line) = lines.next().ok_or_else(|| Error::Format(format!("tree {t} truncated")))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.first() != Some(&id.to_string().as_str()) {
                return Err(bad(n, format!("expected node {id}")));
            }
            let node = match parts.get(1).copied() {
                Some("split") if parts.len() == 7 => {
                    let feature: usize = parse(parts[2], n, "feature")?;
                    let left: usize = parse(parts[4], n, "left child")?;
                    let right: usize = parse(parts[5], n, "right child")?;
                    // preorder storage: children follow their parent
                    if feature >= p || left <= id || right <= id || left >= count || right >= count || left == right {
                        return Err(bad(n, "split references invalid feature or child"));
                    }
                    Node::Split {
                        feature,
                        threshold: parse(parts[3], n, "threshold")?,
                        left,
                        right,
                        gain: parse(parts[6], n, "gain")?,
                    }
                }
                Some("leaf") if parts.len() == 3 => match task {
                    Task::Regression => Node::Leaf(Leaf::Value(parse(parts[2], n, "leaf value")?)),
                    Task::Classification => {
                        let counts = parts[2]
                            .split(',')
                            .map(|c| parse::<u32>(c, n, "class count"))
                            .collect::<Result<Vec<_>>>()?;
                        if counts.len() != n_classes {
                            return Err(bad(n, "leaf class count mismatch"));
                        }
                        Node::Leaf(Leaf::Counts(counts))
                    }
                },
                _ => return Err(bad(n, "malformed node")),
            };
            nodes.push(node);
        }
        let tree = Tree { nodes };
        check_tree(&tree, t)?;
        trees.push(tree);
    }
    if let Some((n, _)) = lines.next() {
        return Err(bad(n, "trailing content after last tree"));
    }
    Ok(Forest {
        task,
        n_classes,
        feature_names,
        hyperparams: hp,
        seed,
        trees,
    })
}

/// Every node reachable from the root exactly once.
fn check_tree(tree: &Tree, t: usize) -> Result<()> {
    if tree.nodes.is_empty() {
        return Err(Error::Format(format!("tree {t} has no nodes")));
    }
    let mut seen = vec![false; tree.nodes.len()];
    let mut stack = vec![0];
    while let Some(id) = stack.pop() {
        if std::mem::replace(&mut seen[id], true) {
            return Err(Error::Format(format!("tree {t}: node {id} has two parents")));
        }
        if let Node::Split { left, right, .. } = tree.nodes[id] {
            stack.push(left);
            stack.push(right);
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Format(format!("tree {t} has unreachable nodes")));
    }
    Ok(())
}

pub fn save_forest(forest: &Forest, path: &Path) -> Result<()> {
    std::fs::write(path, encode_forest(forest)).map_err(|e| Error::io(path, e))
}

pub fn load_forest(path: &Path) -> Result<Forest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_forest(&text)
}
