//! Tab-separated dataset files.
//!
//! `nodes.tsv`: header `id sensitive label f0 .. f{d-1}`; `label` may be `-`.
//! `edges.tsv`: header `src dst [weight]`; one undirected edge per line.
//! `split.tsv`: header `id part`, part in `train`, `val`, `test`.
//!
//! Readers accept any whitespace as separator and skip lines starting with
//! `#`; writers emit tabs and the shortest round-trip decimal form of every
//! real.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, Split};
use crate::numerics::DenseMatrix;

pub const NODES_FILE: &str = "nodes.tsv";
pub const EDGES_FILE: &str = "edges.tsv";
pub const SPLIT_FILE: &str = "split.tsv";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
}

/// Non-empty content lines split into fields, header excluded.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    content_lines(text)
        .skip(1)
        .map(|(i, l)| (i, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, f)| !f.is_empty())
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {name} from {s:?}")))
}

pub fn load_dataset(nodes_path: &Path, edges_path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(nodes_path)?;
    let header: Vec<&str> = content_lines(&text)
        .next()
        .map_or("", |(_, l)| l)
        .split_whitespace()
        .collect();
    if header.len() < 3 || header[..3] != ["id", "sensitive", "label"] {
        return Err(parse_err(
            nodes_path,
            1,
            "header must start with `id sensitive label`",
        ));
    }
    let d = header.len() - 3;

    let mut rows: Vec<(usize, u8, Option<u8>, Vec<f64>)> = Vec::new();
    for (line, f) in data_lines(&text) {
        if f.len() != d + 3 {
            return Err(parse_err(
                nodes_path,
                line,
                format!("expected {} fields, found {}", d + 3, f.len()),
            ));
        }
        let id: usize = parse_field(nodes_path, line, "id", f[0])?;
        let s: u8 = parse_field(nodes_path, line, "sensitive", f[1])?;
        if s > 1 {
            return Err(Error::Validation(format!(
                "{}:{line}: sensitive value {s} is not 0 or 1",
                nodes_path.display()
            )));
        }
        let label = match f[2] {
            "-" => None,
            other => {
                let y: u8 = parse_field(nodes_path, line, "label", other)?;
                if y > 1 {
                    return Err(Error::Validation(format!(
                        "{}:{line}: label {y} is not 0 or 1",
                        nodes_path.display()
                    )));
                }
                Some(y)
            }
        };
        let feats = f[3..]
            .iter()
            .map(|v| parse_field::<f64>(nodes_path, line, "feature", v))
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = feats.iter().find(|v| !v.is_finite()) {
            return Err(parse_err(
                nodes_path,
                line,
                format!("non-finite feature {bad}"),
            ));
        }
        rows.push((id, s, label, feats));
    }

    let n = rows.len();
    let mut features = DenseMatrix::zeros(n, d);
    let mut sensitive = vec![0u8; n];
    let mut labels = vec![None; n];
    let mut seen = vec![false; n];
    for (id, s, y, feats) in rows {
        if id >= n || std::mem::replace(&mut seen[id], true) {
            return Err(Error::Validation(format!(
                "{}: node ids must be a permutation of 0..{n} (offending id {id})",
                nodes_path.display()
            )));
        }
        features.row_mut(id).copy_from_slice(&feats);
        sensitive[id] = s;
        labels[id] = y;
    }

    let text = fs::read_to_string(edges_path)?;
    let mut edges: Vec<Edge> = Vec::new();
    for (line, f) in data_lines(&text) {
        if f.len() != 2 && f.len() != 3 {
            return Err(parse_err(
                edges_path,
                line,
                format!("expected 2 or 3 fields, found {}", f.len()),
            ));
        }
        let u: usize = parse_field(edges_path, line, "src", f[0])?;
        let v: usize = parse_field(edges_path, line, "dst", f[1])?;
        let w: f64 = match f.get(2) {
            Some(w) => parse_field(edges_path, line, "weight", w)?,
            None => 1.0,
        };
        edges.push((u, v, w));
    }
    Graph::new(features, sensitive, labels, &edges)
}

/// Loads `nodes.tsv` and `edges.tsv` from `dir`.
pub fn load_dir(dir: &Path) -> Result<Graph> {
    load_dataset(&dir.join(NODES_FILE), &dir.join(EDGES_FILE))
}

pub fn nodes_tsv(g: &Graph) -> String {
    let mut out = String::from("id\tsensitive\tlabel");
    for f in 0..g.n_features() {
        write!(out, "\tf{f}").unwrap();
    }
    out.push('\n');
    for i in 0..g.n_nodes() {
        write!(out, "{i}\t{}\t", g.sensitive()[i]).unwrap();
        match g.label(i) {
            Some(y) => write!(out, "{y}").unwrap(),
            None => out.push('-'),
        }
        for v in g.features().row(i) {
            write!(out, "\t{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn edges_tsv(g: &Graph) -> String {
    let mut out = String::from("src\tdst\tweight\n");
    for (u, v, w) in g.undirected_edges() {
        writeln!(out, "{u}\t{v}\t{w}").unwrap();
    }
    out
}

/// Writes `nodes.tsv` and `edges.tsv` into `dir` (created if missing).
pub fn write_dataset(g: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(NODES_FILE), nodes_tsv(g))?;
    fs::write(dir.join(EDGES_FILE), edges_tsv(g))?;
    Ok(())
}

pub fn write_split(split: &Split, path: &Path) -> Result<()> {
    let mut rows: Vec<(usize, &str)> = split
        .train
        .iter()
        .map(|&i| (i, "train"))
        .chain(split.val.iter().map(|&i| (i, "val")))
        .chain(split.test.iter().map(|&i| (i, "test")))
        .collect();
    rows.sort();
    let mut out = String::from("id\tpart\n");
    for (i, p) in rows {
        writeln!(out, "{i}\t{p}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a split file; the returned split's `seed` is 0.
pub fn load_split(path: &Path, g: &Graph) -> Result<Split> {
    let text = fs::read_to_string(path)?;
    let mut split = Split {
        train: vec![],
        val: vec![],
        test: vec![],
        seed: 0,
    };
    for (line, f) in data_lines(&text) {
        if f.len() != 2 {
            return Err(parse_err(path, line, "expected `id part`"));
        }
        let id: usize = parse_field(path, line, "id", f[0])?;
        let part = match f[1] {
            "train" => &mut split.train,
            "val" => &mut split.val,
            "test" => &mut split.test,
            other => return Err(parse_err(path, line, format!("unknown part {other:?}"))),
        };
        part.push(id);
    }
    split.validate(g)?;
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::stratified_split;

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("fairsin-io-{tag}-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn two_node_file() {
        let d = tmpdir("two");
        fs::write(
            d.join(NODES_FILE),
            "id\tsensitive\tlabel\tf0\n0\t0\t1\t0.5\n1\t1\t-\t-2\n",
        )
        .unwrap();
        fs::write(d.join(EDGES_FILE), "src\tdst\n0 1\n").unwrap();
        let g = load_dir(&d).unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.n_directed_edges(), 2);
        assert_eq!(g.weights(), &[1.0, 1.0]);
        assert_eq!(g.label(1), None);
        assert_eq!(g.features().get(1, 0), -2.0);
    }

    #[test]
    fn empty_edges_file() {
        let d = tmpdir("empty");
        fs::write(
            d.join(NODES_FILE),
            "id\tsensitive\tlabel\n0\t0\t1\n1\t1\t0\n",
        )
        .unwrap();
        fs::write(d.join(EDGES_FILE), "src\tdst\n").unwrap();
        let g = load_dir(&d).unwrap();
        assert_eq!(g.n_directed_edges(), 0);
        assert_eq!(g.n_features(), 0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let d = tmpdir("bad");
        fs::write(
            d.join(NODES_FILE),
            "id\tsensitive\tlabel\tf0\n0\t0\t1\t0.5\n1\t0\t1\tabc\n",
        )
        .unwrap();
        fs::write(d.join(EDGES_FILE), "src\tdst\n").unwrap();
        match load_dir(&d) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }

        fs::write(d.join(NODES_FILE), "id\tsensitive\tlabel\n0\t3\t1\n").unwrap();
        assert!(matches!(load_dir(&d), Err(Error::Validation(_))));

        fs::write(
            d.join(NODES_FILE),
            "id\tsensitive\tlabel\n0\t0\t1\n1\t1\t1\n",
        )
        .unwrap();
        fs::write(d.join(EDGES_FILE), "src\tdst\tweight\n0\t1\t1\n1\t0\t2\n").unwrap();
        assert!(matches!(load_dir(&d), Err(Error::Validation(_))));

        fs::write(d.join(EDGES_FILE), "src\tdst\n0\n").unwrap();
        match load_dir(&d) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn split_roundtrip() {
        let g = crate::synth::generate(&crate::synth::SynthConfig::small(60, 3)).unwrap();
        let s = stratified_split(&g, DEFAULT_RATIOS, 4).unwrap();
        let d = tmpdir("split");
        write_split(&s, &d.join(SPLIT_FILE)).unwrap();
        let back = load_split(&d.join(SPLIT_FILE), &g).unwrap();
        let sorted = |v: &[usize]| {
            let mut v = v.to_vec();
            v.sort();
            v
        };
        assert_eq!(sorted(&back.train), sorted(&s.train));
        assert_eq!(sorted(&back.val), sorted(&s.val));
        assert_eq!(sorted(&back.test), sorted(&s.test));
    }

    const DEFAULT_RATIOS: (f64, f64, f64) = crate::graph::DEFAULT_SPLIT_RATIOS;
}
