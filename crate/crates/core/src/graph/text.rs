//! Plain-text graph format.
//!
//! ```text
//! n m Cn Ce
//! c_0 c_1 ... c_{n-1}
//! u v c        (m lines)
//! ```
//!
//! `Cn`/`Ce` are the sizes of the node/edge color alphabets. Every line ends
//! with `\n`; the color line is empty for the empty graph. Writing a parsed
//! file reproduces it byte for byte.

use super::{ColorSpace, ColoredGraph, GraphError};

pub fn write_graph(g: &ColoredGraph, colors: ColorSpace) -> String {
    let mut out = format!(
        "{} {} {} {}\n",
        g.node_count(),
        g.edge_count(),
        colors.node_colors,
        colors.edge_colors
    );
    let node_line: Vec<String> = g.node_colors().iter().map(|c| c.to_string()).collect();
    out.push_str(&node_line.join(" "));
    out.push('\n');
    for e in g.edges() {
        out.push_str(&format!("{} {} {}\n", e.u, e.v, e.color));
    }
    out
}

/// Single-line variant used inside TSV records: lines joined by `;`.
pub fn write_graph_inline(g: &ColoredGraph, colors: ColorSpace) -> String {
    write_graph(g, colors).trim_end_matches('\n').replace('\n', ";")
}

pub fn read_graph_inline(s: &str) -> Result<(ColoredGraph, ColorSpace), GraphError> {
    let mut text = s.replace(';', "\n");
    text.push('\n');
    read_graph(&text)
}

fn parse_err(line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse {
        line,
        msg: msg.into(),
    }
}

fn numbers(line: &str, lineno: usize) -> Result<Vec<usize>, GraphError> {
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split(' ')
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| parse_err(lineno, format!("bad integer {tok:?}")))
        })
        .collect()
}

/// Parses the strict format written by [`write_graph`]. Anything that would
/// not round-trip byte-exactly (extra whitespace, missing final newline,
/// trailing lines) is rejected.
pub fn read_graph(text: &str) -> Result<(ColoredGraph, ColorSpace), GraphError> {
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| parse_err(0, "missing final newline"))?;
    let lines: Vec<&str> = body.split('\n').collect();
    if lines.len() < 2 {
        return Err(parse_err(1, "expected header and node color lines"));
    }
    let header = numbers(lines[0], 1)?;
    let [n, m, cn, ce] = header[..] else {
        return Err(parse_err(1, "header must be `n m Cn Ce`"));
    };
    let colors = ColorSpace::new(cn, ce);
    if lines.len() != m + 2 {
        return Err(parse_err(lines.len(), format!("expected {m} edge lines")));
    }
    let node_colors = numbers(lines[1], 2)?;
    if node_colors.len() != n {
        return Err(parse_err(2, format!("expected {n} node colors")));
    }
    let mut g = ColoredGraph::empty();
    for c in node_colors {
        if c >= cn || c > 255 {
            return Err(GraphError::ColorOutOfRange {
                kind: "node",
                color: c,
                limit: cn,
            });
        }
        g.add_node(c as u8);
    }
    for (i, line) in lines[2..].iter().enumerate() {
        let lineno = i + 3;
        let [u, v, c] = numbers(line, lineno)?[..] else {
            return Err(parse_err(lineno, "edge line must be `u v c`"));
        };
        if c >= ce || c > 255 {
            return Err(GraphError::ColorOutOfRange {
                kind: "edge",
                color: c,
                limit: ce,
            });
        }
        g.add_edge(u, v, c as u8)?;
    }
    Ok((g, colors))
}
