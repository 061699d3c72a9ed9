use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sampling::GraphSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Keep vertices that appear only in self-loops.
    pub retain_isolated: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { retain_isolated: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedGraph {
    pub graph: GraphSample,
    /// Original identifier of each compacted vertex; sorted ascending.
    pub ids: Vec<u64>,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Reads a whitespace-separated edge list (`#` starts a comment line) into a
/// simple undirected graph with vertices compacted to `0..n` in id order.
pub fn read_edge_list<R: BufRead>(reader: R, opts: LoadOptions) -> Result<LoadedGraph> {
    let mut raw = Vec::new();
    let mut isolated = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::Parse {
                line: ln + 1,
                message: format!("expected two vertex ids, found {} fields", toks.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<u64>().map_err(|_| Error::Parse {
                line: ln + 1,
                message: format!("'{s}' is not a nonnegative integer id"),
            })
        };
        let (a, b) = (parse(toks[0])?, parse(toks[1])?);
        if a == b {
            isolated.push(a);
        } else {
            raw.push((a, b));
        }
    }
    let mut idmap: BTreeMap<u64, usize> = BTreeMap::new();
    for &(a, b) in &raw {
        idmap.insert(a, 0);
        idmap.insert(b, 0);
    }
    if opts.retain_isolated {
        for &a in &isolated {
            idmap.insert(a, 0);
        }
    }
    for (k, v) in idmap.values_mut().enumerate() {
        *v = k;
    }
    let ids: Vec<u64> = idmap.keys().copied().collect();
    let graph = GraphSample::from_edges(ids.len(), raw.iter().map(|(a, b)| (idmap[a], idmap[b])))?;
    if graph.num_edges() == 0 {
        return Err(Error::invalid("edge list contains no edges"));
    }
    Ok(LoadedGraph {
        duplicates_dropped: raw.len() - graph.num_edges(),
        self_loops_dropped: isolated.len(),
        graph,
        ids,
    })
}

pub fn load_edge_list(path: impl AsRef<Path>, opts: LoadOptions) -> Result<LoadedGraph> {
    let f = std::fs::File::open(path.as_ref())?;
    read_edge_list(std::io::BufReader::new(f), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<LoadedGraph> {
        read_edge_list(s.as_bytes(), LoadOptions::default())
    }

    #[test]
    fn dedup_and_self_loops() {
        let g = read("0 1\n1 0\n2 2\n").unwrap();
        assert_eq!(g.graph.edges, vec![(0, 1)]);
        assert_eq!(g.graph.n, 3);
        assert_eq!((g.self_loops_dropped, g.duplicates_dropped), (1, 1));
        let g = read_edge_list("0 1\n1 0\n2 2\n".as_bytes(), LoadOptions { retain_isolated: false }).unwrap();
        assert_eq!(g.graph.n, 2);
    }

    #[test]
    fn triangle_with_comments_and_compaction() {
        let g = read("# header\n# more\n10 20\n20\t30\n\n30 10\n").unwrap();
        assert_eq!(g.graph.n, 3);
        assert_eq!(g.graph.num_edges(), 3);
        assert_eq!(g.graph.degrees, vec![2, 2, 2]);
        assert_eq!(g.ids, vec![10, 20, 30]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match read("0 1\n1 2 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match read("# c\nx 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(read("# nothing\n3 3\n").is_err());
    }
}
