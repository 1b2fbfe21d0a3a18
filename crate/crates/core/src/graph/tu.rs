//! Reader and writer for the TUDataset plain-text layout:
//! `NAME_A.txt`, `NAME_graph_indicator.txt`, `NAME_graph_labels.txt`,
//! and optionally `NAME_node_labels.txt` / `NAME_node_attributes.txt`.
//! Node ids in the files are 1-based and global across the dataset.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{build_features, Dataset, FeaturePolicy, Graph, GraphError};
use crate::Scalar;

struct Lines {
    file: String,
    lines: Vec<(usize, String)>,
}

fn read_lines(path: &Path) -> Result<Lines, GraphError> {
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io { path: path.to_path_buf(), source })?;
    let lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Lines { file, lines })
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse { file: file.to_string(), line, message: message.into() }
}

fn parse_ints(lines: &Lines) -> Result<Vec<i64>, GraphError> {
    lines
        .lines
        .iter()
        .map(|(no, l)| l.parse::<i64>().map_err(|e| parse_err(&lines.file, *no, format!("{l:?}: {e}"))))
        .collect()
}

fn optional(path: PathBuf) -> Option<PathBuf> {
    path.exists().then_some(path)
}

fn sorted_distinct(values: &[i64]) -> Vec<i64> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Loads `root/NAME_*.txt` into a dataset with features built by `policy`.
pub fn load_tu_dataset<T: Scalar>(root: &Path, name: &str, policy: FeaturePolicy) -> Result<Dataset<T>, GraphError> {
    let file = |suffix: &str| root.join(format!("{name}_{suffix}.txt"));
    let required = |suffix: &str| {
        let p = file(suffix);
        if p.exists() {
            Ok(p)
        } else {
            Err(GraphError::MissingFile(p))
        }
    };
    let needs_labels = matches!(policy, FeaturePolicy::OneHotLabel | FeaturePolicy::LabelPlusAttributes);
    let needs_attrs = policy == FeaturePolicy::LabelPlusAttributes;

    let a_path = required("A")?;
    let indicator = read_lines(&required("graph_indicator")?)?;
    let graph_labels = read_lines(&required("graph_labels")?)?;
    let node_labels_path = if needs_labels { Some(required("node_labels")?) } else { optional(file("node_labels")) };
    let attrs_path = if needs_attrs { Some(required("node_attributes")?) } else { optional(file("node_attributes")) };

    // node (0-based global) -> graph (0-based)
    let node_graph: Vec<usize> = parse_ints(&indicator)?
        .into_iter()
        .zip(&indicator.lines)
        .map(|(g, (no, _))| {
            if g < 1 {
                Err(parse_err(&indicator.file, *no, format!("graph id {g} < 1")))
            } else {
                Ok(g as usize - 1)
            }
        })
        .collect::<Result<_, _>>()?;
    let raw_graph_labels = parse_ints(&graph_labels)?;
    let num_graphs = raw_graph_labels.len();
    let declared = node_graph.iter().copied().max().map_or(0, |m| m + 1);
    if declared != num_graphs {
        return Err(GraphError::CountMismatch(format!(
            "{} declares {declared} graphs but {} has {num_graphs} labels",
            indicator.file, graph_labels.file
        )));
    }
    if num_graphs == 0 {
        return Err(GraphError::EmptyDataset);
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    let mut local = vec![0usize; node_graph.len()];
    for (node, &g) in node_graph.iter().enumerate() {
        local[node] = members[g].len();
        members[g].push(node);
    }
    if let Some(g) = members.iter().position(Vec::is_empty) {
        return Err(GraphError::CountMismatch(format!("graph {} has no nodes", g + 1)));
    }

    let raw_node_labels = match &node_labels_path {
        Some(p) => {
            let lines = read_lines(p)?;
            let v = parse_ints(&lines)?;
            if v.len() != node_graph.len() {
                return Err(GraphError::CountMismatch(format!("{} has {} lines for {} nodes", lines.file, v.len(), node_graph.len())));
            }
            Some(v)
        }
        None => None,
    };
    let raw_attrs: Option<Array2<T>> = match &attrs_path {
        Some(p) => {
            let lines = read_lines(p)?;
            let mut rows: Vec<Vec<T>> = Vec::with_capacity(lines.lines.len());
            for (no, l) in &lines.lines {
                let row = l
                    .split(',')
                    .map(|tok| {
                        tok.trim()
                            .parse::<f64>()
                            .map(T::lit)
                            .map_err(|e| parse_err(&lines.file, *no, format!("{tok:?}: {e}")))
                    })
                    .collect::<Result<Vec<T>, _>>()?;
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(parse_err(&lines.file, *no, "ragged attribute row"));
                    }
                }
                rows.push(row);
            }
            if rows.len() != node_graph.len() {
                return Err(GraphError::CountMismatch(format!("{} has {} rows for {} nodes", lines.file, rows.len(), node_graph.len())));
            }
            let width = rows.first().map_or(0, Vec::len);
            Some(Array2::from_shape_vec((rows.len(), width), rows.concat()).unwrap())
        }
        None => None,
    };

    // Directed pairs with the first line they appear on.
    let a_lines = read_lines(&a_path)?;
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for (no, l) in &a_lines.lines {
        let mut parts = l.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(&a_lines.file, *no, format!("expected \"u, v\", got {l:?}")));
        };
        let parse = |tok: &str| -> Result<usize, GraphError> {
            let id: usize = tok.parse().map_err(|e| parse_err(&a_lines.file, *no, format!("{tok:?}: {e}")))?;
            if id == 0 || id > node_graph.len() {
                return Err(GraphError::UnknownNode { file: a_lines.file.clone(), line: *no, node: id });
            }
            Ok(id - 1)
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u == v {
            return Err(GraphError::SelfLoop { file: a_lines.file.clone(), line: *no, node: u + 1 });
        }
        if node_graph[u] != node_graph[v] {
            return Err(GraphError::CrossGraphEdge { file: a_lines.file.clone(), line: *no, u: u + 1, v: v + 1 });
        }
        directed.entry((u, v)).or_insert(*no);
    }
    let mut by_line: Vec<(&(usize, usize), &usize)> = directed.iter().collect();
    by_line.sort_by_key(|(_, &no)| no);
    let mut graph_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (&(u, v), &no) in by_line {
        if !directed.contains_key(&(v, u)) {
            return Err(GraphError::AsymmetricEdge { file: a_lines.file.clone(), line: no, u: u + 1, v: v + 1 });
        }
        if u < v {
            graph_edges[node_graph[u]].push((local[u], local[v]));
        }
    }

    let graph_label_values = sorted_distinct(&raw_graph_labels);
    let class_of: BTreeMap<i64, usize> = graph_label_values.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let node_label_values = raw_node_labels.as_deref().map(sorted_distinct).unwrap_or_default();
    let node_label_index: BTreeMap<i64, usize> = node_label_values.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let mut graphs = Vec::with_capacity(num_graphs);
    for (g, nodes) in members.iter().enumerate() {
        let n = nodes.len();
        let labels: Option<Vec<usize>> =
            raw_node_labels.as_ref().map(|all| nodes.iter().map(|&i| node_label_index[&all[i]]).collect());
        let attrs: Option<Array2<T>> = raw_attrs.as_ref().map(|all| {
            Array2::from_shape_fn((n, all.ncols()), |(r, c)| all[[nodes[r], c]])
        });
        let placeholder = Array2::zeros((n, 0));
        let mut graph = Graph::new(g, n, graph_edges[g].iter().copied(), placeholder, class_of[&raw_graph_labels[g]])?;
        graph.features = build_features(labels.as_deref(), node_label_values.len(), attrs.as_ref(), graph.degrees(), policy)?;
        graph.node_labels = labels;
        graph.node_attributes = attrs;
        graphs.push(graph);
    }
    let feature_dim = graphs[0].feature_dim();
    Ok(Dataset {
        name: name.to_string(),
        graphs,
        num_classes: graph_label_values.len(),
        feature_dim,
        feature_policy: policy,
        graph_label_values,
        node_label_values,
    })
}

/// Writes a dataset back in TU layout using the raw label values it was
/// loaded with.
pub fn write_tu_dataset<T: Scalar>(dataset: &Dataset<T>, root: &Path, name: &str) -> Result<(), GraphError> {
    let write = |suffix: &str, body: String| -> Result<(), GraphError> {
        let path = root.join(format!("{name}_{suffix}.txt"));
        fs::write(&path, body).map_err(|source| GraphError::Io { path, source })
    };
    fs::create_dir_all(root).map_err(|source| GraphError::Io { path: root.to_path_buf(), source })?;
    let mut a = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut node_labels = String::new();
    let mut attrs = String::new();
    let mut offset = 0;
    for (gi, g) in dataset.graphs.iter().enumerate() {
        let mut directed: Vec<(usize, usize)> = g.edges().iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
        directed.sort_unstable();
        for (u, v) in directed {
            writeln!(a, "{}, {}", offset + u + 1, offset + v + 1).unwrap();
        }
        for i in 0..g.num_nodes() {
            writeln!(indicator, "{}", gi + 1).unwrap();
            if let Some(l) = &g.node_labels {
                writeln!(node_labels, "{}", dataset.node_label_values[l[i]]).unwrap();
            }
            if let Some(x) = &g.node_attributes {
                let row: Vec<String> = x.row(i).iter().map(|v| format!("{}", v.as_f64())).collect();
                writeln!(attrs, "{}", row.join(", ")).unwrap();
            }
        }
        writeln!(labels, "{}", dataset.graph_label_values[g.label]).unwrap();
        offset += g.num_nodes();
    }
    write("A", a)?;
    write("graph_indicator", indicator)?;
    write("graph_labels", labels)?;
    if !node_labels.is_empty() {
        write("node_labels", node_labels)?;
    }
    if !attrs.is_empty() {
        write("node_attributes", attrs)?;
    }
    Ok(())
}
