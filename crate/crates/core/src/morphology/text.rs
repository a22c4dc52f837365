//! Line-oriented text format:
//!
//! ```text
//! morphology ant_2 nodes=5 edges=4
//! node 0 torso 0.25 0 1 0.01 0 0 0
//! ...
//! edge 0 1 1
//! act 0 0 1 -3.14159265 3.14159265 1
//! ```

use std::fmt::Write;

use super::blueprint::parse_tag;
use super::{Actuator, JointEdge, ModuleKind, ModuleNode, MorphologyGraph};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub fn serialize_morphology(g: &MorphologyGraph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "morphology {} nodes={} edges={}", g.blueprint_tag, g.nodes.len(), g.edges.len());
    for n in &g.nodes {
        let o = n.attach_offset;
        let _ = writeln!(
            s,
            "node {} {} {} {} {} {} {} {} {}",
            n.node_id,
            n.kind.as_str(),
            num(n.radius),
            num(n.length),
            num(n.mass),
            num(n.inertia),
            num(o.x),
            num(o.y),
            num(o.z)
        );
    }
    for e in &g.edges {
        let _ = writeln!(s, "edge {} {} {}", e.parent_id, e.child_id, e.actuators.len());
        for a in &e.actuators {
            let _ = writeln!(
                s,
                "act {} {} {} {} {} {}",
                num(a.axis.x),
                num(a.axis.y),
                num(a.axis.z),
                num(a.range_lo),
                num(a.range_hi),
                num(a.gear)
            );
        }
    }
    s
}

/// Nine significant digits, shortest rendering.
pub(crate) fn num(x: f64) -> String {
    let c = super::canon(x);
    if c == 0.0 {
        "0".to_string()
    } else {
        format!("{c}")
    }
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Lines { inner: it.peekable(), last: 0 }
    }

    fn next_or(&mut self, missing: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.inner.next() {
            Some((n, l)) => {
                self.last = n;
                Ok((n, l.split_whitespace().collect()))
            }
            None => Err(Error::parse(self.last + 1, format!("unexpected end of input: missing {missing}"))),
        }
    }
}

pub(crate) fn field<T: std::str::FromStr>(line: usize, tok: Option<&&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| Error::parse(line, format!("invalid {what} '{tok}'")))
}

pub(crate) fn keyed<T: std::str::FromStr>(line: usize, tok: Option<&&str>, key: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {key}=")))?;
    let v = tok
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::parse(line, format!("expected {key}=<value>, got '{tok}'")))?;
    v.parse().map_err(|_| Error::parse(line, format!("invalid {key} value '{v}'")))
}

pub fn parse_morphology(text: &str) -> Result<MorphologyGraph> {
    let mut lines = Lines::new(text);
    let (ln, head) = lines.next_or("morphology header")?;
    if head.first() != Some(&"morphology") {
        return Err(Error::parse(ln, "expected 'morphology' header"));
    }
    let tag: String = field(ln, head.get(1), "blueprint tag")?;
    let n_nodes: usize = keyed(ln, head.get(2), "nodes")?;
    let n_edges: usize = keyed(ln, head.get(3), "edges")?;

    let mut nodes = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let (ln, t) = lines.next_or(&format!("node section ({i} of {n_nodes} node lines read)"))?;
        if t.first() != Some(&"node") {
            return Err(Error::parse(ln, format!("expected node line, found '{}'", t.join(" "))));
        }
        let kind_s: String = field(ln, t.get(2), "kind")?;
        let kind = ModuleKind::parse(&kind_s).ok_or_else(|| Error::parse(ln, format!("unknown kind '{kind_s}'")))?;
        nodes.push(ModuleNode {
            node_id: field(ln, t.get(1), "node id")?,
            kind,
            radius: field(ln, t.get(3), "radius")?,
            length: field(ln, t.get(4), "length")?,
            mass: field(ln, t.get(5), "mass")?,
            inertia: field(ln, t.get(6), "inertia")?,
            attach_offset: Vec3::new(
                field(ln, t.get(7), "offset x")?,
                field(ln, t.get(8), "offset y")?,
                field(ln, t.get(9), "offset z")?,
            ),
            dof_index: -1,
        });
    }

    let mut edges = Vec::with_capacity(n_edges);
    for i in 0..n_edges {
        let (ln, t) = lines.next_or(&format!("edge section ({i} of {n_edges} edge lines read)"))?;
        if t.first() != Some(&"edge") {
            return Err(Error::parse(ln, format!("expected edge line, found '{}'", t.join(" "))));
        }
        let k: usize = field(ln, t.get(3), "actuator count")?;
        let mut actuators = Vec::with_capacity(k);
        for j in 0..k {
            let (ln, a) = lines.next_or(&format!("act lines for edge {i} ({j} of {k} read)"))?;
            if a.first() != Some(&"act") {
                return Err(Error::parse(ln, "expected act line"));
            }
            actuators.push(Actuator {
                axis: Vec3::new(field(ln, a.get(1), "axis x")?, field(ln, a.get(2), "axis y")?, field(ln, a.get(3), "axis z")?),
                range_lo: field(ln, a.get(4), "range_lo")?,
                range_hi: field(ln, a.get(5), "range_hi")?,
                gear: field(ln, a.get(6), "gear")?,
            });
        }
        edges.push(JointEdge {
            parent_id: field(ln, t.get(1), "parent id")?,
            child_id: field(ln, t.get(2), "child id")?,
            actuators,
        });
    }
    if let Some((ln, l)) = lines.inner.next() {
        return Err(Error::parse(ln, format!("trailing content '{l}'")));
    }

    let variation = parse_tag(&tag).map(|(_, _, v)| v).filter(|v| !v.is_empty());
    let mut g = MorphologyGraph { nodes, edges, blueprint_tag: tag, variation };
    g.assign_dofs();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{apply_size_scaling, generate_morphology, Blueprint};

    #[test]
    fn roundtrip_ant() {
        let g = generate_morphology(Blueprint::Ant, 4, None).unwrap();
        let text = serialize_morphology(&g);
        assert_eq!(parse_morphology(&text).unwrap(), g);
        assert_eq!(text, serialize_morphology(&g));
    }

    #[test]
    fn truncated_names_missing_section() {
        let g = generate_morphology(Blueprint::Ant, 2, None).unwrap();
        let text = serialize_morphology(&g);
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        match parse_morphology(&cut) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("node section"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let cut: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
        let err = parse_morphology(&cut).unwrap_err().to_string();
        assert!(err.contains("act lines"), "{err}");
    }

    #[test]
    fn comments_and_bad_numbers() {
        let g = generate_morphology(Blueprint::Worm, 2, None).unwrap();
        let text = format!("# worm\n{}", serialize_morphology(&g));
        assert_eq!(parse_morphology(&text).unwrap(), g);
        let bad = text.replace("node 1 body 0.25", "node 1 body abc");
        let err = parse_morphology(&bad).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn variation_survives_roundtrip() {
        let g = generate_morphology(Blueprint::Ant, 5, None).unwrap();
        let s = apply_size_scaling(&g, [0.9, 1.0, 1.1]).unwrap();
        let back = parse_morphology(&serialize_morphology(&s)).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.variation.unwrap().size_scales, Some([0.9, 1.0, 1.1]));
    }
}
