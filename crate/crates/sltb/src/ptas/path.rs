//! Paths and cycles of fractional variables in the instance multigraph.
//!
//! The graph is bipartite between jobs and reverse positions with two edges
//! (one per test state) for every job/position pair; an edge is identified
//! with the variable `(job, position, state)`. A path starts and ends at
//! positions, so its edges come in (odd, even) pairs around each job: the
//! odd edge enters the job, the even edge leaves it.

use std::collections::{BTreeSet, HashMap};

use num_traits::Zero;

use crate::core::{Instance, JobId, Rational, TestState};

use super::solution::{LpSolution, VarKey};
use super::PtasError;

/// Node of the instance multigraph.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Node {
    Position(usize),
    Job(JobId),
}

/// A walk of pairwise-distinct variables from a start position to an end
/// position; start and end may coincide (a cycle). Odd edges are the 1st,
/// 3rd, ... along the walk.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Path {
    edges: Vec<VarKey>,
}

impl Path {
    /// Validates the walk structure: even length, proper alternation of
    /// shared nodes, distinct edges, distinct nodes except a closing cycle.
    pub fn new(edges: Vec<VarKey>) -> Result<Path, PtasError> {
        if edges.is_empty() || !edges.len().is_multiple_of(2) {
            return Err(PtasError::InvalidPath(format!(
                "walk needs a positive even number of edges, got {}",
                edges.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for e in &edges {
            if !seen.insert(*e) {
                return Err(PtasError::InvalidPath(format!("duplicate edge {e:?}")));
            }
        }
        let mut jobs = BTreeSet::new();
        for pair in edges.chunks(2) {
            let (j_in, j_out) = (pair[0].0, pair[1].0);
            if j_in != j_out {
                return Err(PtasError::InvalidPath(format!(
                    "edges {:?} and {:?} do not share a job",
                    pair[0], pair[1]
                )));
            }
            if !jobs.insert(j_in) {
                return Err(PtasError::InvalidPath(format!("job {j_in} visited twice")));
            }
        }
        let path = Path { edges };
        let positions = path.position_sequence();
        let mut inner = BTreeSet::new();
        for &p in &positions[1..positions.len() - 1] {
            if !inner.insert(p) {
                return Err(PtasError::InvalidPath(format!(
                    "inner position {p} visited twice"
                )));
            }
        }
        let (start, end) = (positions[0], positions[positions.len() - 1]);
        if inner.contains(&start) || inner.contains(&end) {
            return Err(PtasError::InvalidPath(
                "endpoint revisited as inner position".into(),
            ));
        }
        for (k, pair) in path.edges.chunks(2).enumerate() {
            if pair[1].1 != positions[k + 1] || pair[0].1 != positions[k] {
                return Err(PtasError::InvalidPath(
                    "consecutive edges do not share a position".into(),
                ));
            }
        }
        Ok(path)
    }

    pub fn edges(&self) -> &[VarKey] {
        &self.edges
    }

    /// Edge at 1-based odd positions along the walk (enters its job).
    pub fn is_odd(index: usize) -> bool {
        index.is_multiple_of(2)
    }

    /// Position nodes in walk order: start, inner positions, end.
    pub fn position_sequence(&self) -> Vec<usize> {
        let mut seq = vec![self.edges[0].1];
        seq.extend(self.edges.iter().skip(1).step_by(2).map(|e| e.1));
        seq
    }

    pub fn start_position(&self) -> usize {
        self.edges[0].1
    }

    pub fn end_position(&self) -> usize {
        self.edges[self.edges.len() - 1].1
    }

    pub fn is_cycle(&self) -> bool {
        self.start_position() == self.end_position()
    }

    pub fn jobs(&self) -> impl Iterator<Item = JobId> + '_ {
        self.edges.chunks(2).map(|pair| pair[0].0)
    }

    /// Inner positions `K(P)` in walk order (endpoints excluded).
    pub fn inner_positions(&self) -> Vec<usize> {
        let seq = self.position_sequence();
        seq[1..seq.len() - 1].to_vec()
    }

    pub fn var_set(&self) -> BTreeSet<VarKey> {
        self.edges.iter().copied().collect()
    }

    /// Entry and exit edges of a job on the path.
    pub fn job_edges(&self, job: JobId) -> Option<(VarKey, VarKey)> {
        self.edges
            .chunks(2)
            .find(|pair| pair[0].0 == job)
            .map(|pair| (pair[0], pair[1]))
    }

    /// Budget rate: the rate at which a unit shift changes total budget use.
    /// Each job contributes its cost weighted by whether its exit edge is
    /// tested minus whether its entry edge is tested.
    pub fn budget_rate(&self, instance: &Instance) -> Rational {
        let mut rate = Rational::zero();
        for pair in self.edges.chunks(2) {
            let (entry, exit) = (pair[0], pair[1]);
            let cost = instance.cost(entry.0);
            if exit.2 == TestState::Tested {
                rate += cost;
            }
            if entry.2 == TestState::Tested {
                rate -= cost;
            }
        }
        rate
    }

    /// If every odd edge has value `y` and every even edge `1 - y`, returns
    /// `y`.
    pub fn alternating_value(&self, x: &LpSolution) -> Option<Rational> {
        let y = x.get(self.edges[0]).clone();
        let complement = Rational::from_integer(1.into()) - &y;
        for (k, &e) in self.edges.iter().enumerate() {
            let expected = if Path::is_odd(k) { &y } else { &complement };
            if x.get(e) != expected {
                return None;
            }
        }
        Some(y)
    }

    pub fn is_fractional(&self, x: &LpSolution) -> bool {
        self.edges.iter().all(|&e| {
            let v = x.get(e);
            !v.is_zero() && !v.is_integer()
        })
    }

    /// Splits the walk at an inner position into the leading and trailing
    /// halves.
    pub fn cut(&self, position: usize) -> Result<(Path, Path), PtasError> {
        let seq = self.position_sequence();
        let slot = seq[1..seq.len() - 1]
            .iter()
            .position(|&p| p == position)
            .ok_or_else(|| {
                PtasError::InvalidPath(format!("position {position} is not an inner position"))
            })?
            + 1;
        let first = Path::new(self.edges[..2 * slot].to_vec())?;
        let second = Path::new(self.edges[2 * slot..].to_vec())?;
        Ok((first, second))
    }
}

/// Cut-position rule: among the `2q + 1` smallest inner positions, the one
/// appearing `(q + 1)`-st along the path, so both halves keep `q` of the
/// smallest positions. Shorter paths cut at the first inner position.
pub fn select_cut_position(path: &Path, q: usize) -> Result<usize, PtasError> {
    let inner = path.inner_positions();
    if inner.is_empty() {
        return Err(PtasError::EmptyInnerPositions);
    }
    let window = 2 * q + 1;
    if inner.len() >= window {
        let mut sorted = inner.clone();
        sorted.sort_unstable();
        let smallest: BTreeSet<usize> = sorted[..window].iter().copied().collect();
        let position = inner
            .iter()
            .filter(|p| smallest.contains(p))
            .nth(q)
            .copied()
            .expect("the window has 2q+1 members along the path");
        Ok(position)
    } else {
        Ok(inner[0])
    }
}

/// Fractional-edge adjacency of a solution.
struct FractionalGraph {
    by_job: HashMap<JobId, Vec<VarKey>>,
    by_position: HashMap<usize, Vec<VarKey>>,
}

impl FractionalGraph {
    fn build(x: &LpSolution) -> FractionalGraph {
        let mut by_job: HashMap<JobId, Vec<VarKey>> = HashMap::new();
        let mut by_position: HashMap<usize, Vec<VarKey>> = HashMap::new();
        for key in x.fractional_vars() {
            by_job.entry(key.0).or_default().push(key);
            by_position.entry(key.1).or_default().push(key);
        }
        FractionalGraph {
            by_job,
            by_position,
        }
    }

    fn incident(&self, node: Node) -> &[VarKey] {
        match node {
            Node::Job(j) => self.by_job.get(&j).map(Vec::as_slice).unwrap_or(&[]),
            Node::Position(i) => self.by_position.get(&i).map(Vec::as_slice).unwrap_or(&[]),
        }
    }
}

/// Builds a cycle of fractional variables by a deterministic walk: start at
/// the given edge's position endpoint and always extend along the
/// lexicographically smallest unused fractional edge, preferring edges
/// outside `avoid` when given. The walk closes when a node repeats; the
/// cycle is rotated to start at its smallest position.
pub fn build_cycle(
    x: &LpSolution,
    start_edge: VarKey,
    avoid: Option<&BTreeSet<VarKey>>,
) -> Result<Path, PtasError> {
    let graph = FractionalGraph::build(x);
    let mut used: BTreeSet<VarKey> = BTreeSet::new();
    let mut nodes: Vec<Node> = vec![Node::Position(start_edge.1)];
    let mut arrivals: Vec<VarKey> = Vec::new();
    let mut first_seen: HashMap<Node, usize> = HashMap::new();
    first_seen.insert(nodes[0], 0);

    let mut current = nodes[0];
    let mut next_edge = Some(start_edge);
    loop {
        let edge = match next_edge.take() {
            Some(e) => e,
            None => {
                let candidates = graph.incident(current);
                let pick = candidates
                    .iter()
                    .filter(|e| !used.contains(e))
                    .min_by_key(|e| {
                        let avoided = avoid.is_some_and(|a| a.contains(e));
                        (avoided, **e)
                    })
                    .copied();
                pick.ok_or_else(|| {
                    PtasError::InvariantViolation(format!(
                        "fractional walk is stuck at {current:?}"
                    ))
                })?
            }
        };
        used.insert(edge);
        let next = match current {
            Node::Position(_) => Node::Job(edge.0),
            Node::Job(_) => Node::Position(edge.1),
        };
        if let Some(&at) = first_seen.get(&next) {
            // Close the cycle from `next`'s first occurrence to here.
            let mut cycle_edges: Vec<VarKey> = arrivals[at..].to_vec();
            cycle_edges.push(edge);
            return canonical_cycle(cycle_edges);
        }
        nodes.push(next);
        arrivals.push(edge);
        first_seen.insert(next, nodes.len() - 1);
        current = next;
    }
}

/// Rotates a raw cycle walk so it starts (and ends) at its smallest
/// position, preserving orientation, and validates it. The raw walk may
/// close at a job node, in which case the edge list starts and ends
/// mid-pair; the rotation fixes that too.
fn canonical_cycle(edges: Vec<VarKey>) -> Result<Path, PtasError> {
    let n_edges = edges.len();
    if !n_edges.is_multiple_of(2) {
        return Err(PtasError::InvariantViolation(
            "cycle with an odd number of edges".into(),
        ));
    }
    // Positions occur where two adjacent edges share a position; find the
    // rotation offset that begins right after the smallest such position.
    let mut best: Option<(usize, usize)> = None; // (position, offset of next edge)
    for k in 0..n_edges {
        let prev = edges[(k + n_edges - 1) % n_edges];
        let cur = edges[k];
        if prev.1 == cur.1 {
            // Walk passes through position cur.1 between these edges.
            let pos = cur.1;
            if best.is_none_or(|(bp, _)| pos < bp) {
                best = Some((pos, k));
            }
        }
    }
    let (_, offset) =
        best.ok_or_else(|| PtasError::InvariantViolation("cycle visits no position".into()))?;
    let rotated: Vec<VarKey> = (0..n_edges).map(|k| edges[(offset + k) % n_edges]).collect();
    Path::new(rotated)
}

/// Starting edges for a second cycle: fractional variables outside the first
/// cycle, lexicographically. The walk may reuse first-cycle edges to close,
/// but the result must differ from the first cycle as an edge set.
pub fn build_second_cycle(x: &LpSolution, first: &Path) -> Result<Path, PtasError> {
    let avoid = first.var_set();
    for start in x.fractional_vars() {
        if avoid.contains(&start) {
            continue;
        }
        let candidate = build_cycle(x, start, Some(&avoid))?;
        if candidate.var_set() != avoid {
            return Ok(candidate);
        }
    }
    Err(PtasError::InvariantViolation(
        "no second cycle distinct from the first exists".into(),
    ))
}
