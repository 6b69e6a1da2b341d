//! Line-oriented text format:
//!
//! ```text
//! <n_vars> <tau_max> <role_0> ... <role_{n-1}>
//! <i> <j> <tau> <mark>
//! ```
//!
//! Edges are written in canonical storage order, so output is deterministic.

use std::fmt;
use std::str::FromStr;

use super::{EdgeMark, GraphError, TimeSeriesGraph, VariableRole};

impl fmt::Display for TimeSeriesGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.n_vars(), self.tau_max())?;
        for r in self.roles() {
            write!(f, " {r}")?;
        }
        writeln!(f)?;
        for (i, j, l, m) in self.edges() {
            writeln!(f, "{i} {j} {l} {}", m.symbol())?;
        }
        Ok(())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse { line, msg: msg.into() }
}

impl FromStr for TimeSeriesGraph {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = s.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
        let mut fields = header.split_whitespace();
        let n: usize = fields
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(1, "bad variable count"))?;
        let tau_max: usize = fields
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(1, "bad tau_max"))?;
        let roles = fields
            .map(VariableRole::from_str)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(1, e))?;
        if roles.len() != n {
            return Err(parse_err(1, format!("expected {n} roles, found {}", roles.len())));
        }
        let mut g = TimeSeriesGraph::new(roles, tau_max);
        for (idx, line) in lines {
            let lineno = idx + 1;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(parse_err(lineno, "expected `i j tau mark`"));
            }
            let num = |k: usize| -> Result<usize, GraphError> {
                parts[k].parse().map_err(|_| parse_err(lineno, format!("bad integer '{}'", parts[k])))
            };
            let (i, j, l) = (num(0)?, num(1)?, num(2)?);
            let mark = EdgeMark::from_symbol(parts[3])
                .ok_or_else(|| parse_err(lineno, format!("bad mark '{}'", parts[3])))?;
            if g.is_adjacent(i, j, l) {
                return Err(parse_err(lineno, "duplicate link"));
            }
            g.set_mark(i, j, l, mark).map_err(|e| parse_err(lineno, e.to_string()))?;
        }
        Ok(g)
    }
}
