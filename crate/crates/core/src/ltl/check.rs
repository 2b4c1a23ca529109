//! Product of a state graph with the automaton of the negated formula,
//! searched for a reachable universal state (a bad prefix) and for an
//! accepting cycle (nested DFS).

use std::collections::VecDeque;

use super::{to_buchi, Buchi, Ltl, Prop, PropError};
use crate::explorer::{Choice, Graph, NodeId, Trace};
use crate::kernel::Kernel;

#[derive(Debug, Clone)]
pub enum Verdict {
    Holds,
    /// No violation in the explored part, but the graph was cut at `bound`.
    BoundedHolds {
        bound: usize,
    },
    Violated {
        trace: Trace,
    },
}

impl Verdict {
    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated { .. })
    }
}

/// Result of checking an abstract labelled graph; paths start at node 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabeledVerdict {
    Holds,
    Violated { path: Vec<usize>, loop_start: Option<usize> },
}

/// DFS frame: product node, choice that led here, successors, next index.
type Frame = (usize, Choice, Vec<(usize, Choice)>, usize);

struct Product<'a> {
    succ: &'a [Vec<(Choice, NodeId)>],
    /// Bit `i` of `bits[g]` is the value of `ba.props[i]` in node `g`.
    bits: Vec<u64>,
    ba: Buchi,
}

/// A path in the product projected to graph nodes: `nodes[0]` is the
/// initial node and `choices[i]` leads from `nodes[i]` to `nodes[i + 1]`.
struct Path {
    nodes: Vec<NodeId>,
    choices: Vec<Choice>,
    loop_start: Option<usize>,
}

impl Product<'_> {
    fn m(&self) -> usize {
        self.ba.len()
    }

    fn label_ok(&self, g: NodeId, q: usize) -> bool {
        self.ba.label_holds(q, |p| self.bits[g] >> p & 1 == 1)
    }

    fn initial(&self) -> Vec<usize> {
        self.ba.initial.iter().copied().filter(|&q| self.label_ok(0, q)).collect()
    }

    fn successors(&self, v: usize) -> Vec<(usize, Choice)> {
        let (g, q) = (v / self.m(), v % self.m());
        let mut out = Vec::new();
        for &(c, h) in &self.succ[g] {
            for &r in &self.ba.succ[q] {
                if self.label_ok(h, r) {
                    out.push((h * self.m() + r, c));
                }
            }
        }
        out
    }

    /// Shortest path to a product state whose automaton state accepts
    /// every continuation.
    fn bad_prefix(&self) -> Option<Path> {
        let m = self.m();
        let mut parent: Vec<Option<(usize, Choice)>> = vec![None; self.succ.len() * m];
        let mut seen = vec![false; self.succ.len() * m];
        let mut queue = VecDeque::new();
        for q in self.initial() {
            seen[q] = true;
            queue.push_back(q);
        }
        while let Some(v) = queue.pop_front() {
            if self.ba.states[v % m].universal {
                let mut nodes = vec![v / m];
                let mut choices = Vec::new();
                let mut cur = v;
                while let Some((p, c)) = parent[cur] {
                    nodes.push(p / m);
                    choices.push(c);
                    cur = p;
                }
                nodes.reverse();
                choices.reverse();
                return Some(Path { nodes, choices, loop_start: None });
            }
            for (w, c) in self.successors(v) {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((v, c));
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Nested depth-first search for an accepting lasso.
    fn accepting_lasso(&self) -> Option<Path> {
        const WHITE: u8 = 0;
        const CYAN: u8 = 1;
        const BLUE: u8 = 2;
        let m = self.m();
        let mut color = vec![WHITE; self.succ.len() * m];
        let mut red = vec![false; self.succ.len() * m];
        for root in self.initial() {
            if color[root] != WHITE {
                continue;
            }
            let mut stack: Vec<Frame> = vec![(root, Choice::Next, self.successors(root), 0)];
            color[root] = CYAN;
            while let Some(top) = stack.last_mut() {
                if top.3 < top.2.len() {
                    let (w, c) = top.2[top.3];
                    top.3 += 1;
                    if color[w] == WHITE {
                        color[w] = CYAN;
                        let ws = self.successors(w);
                        stack.push((w, c, ws, 0));
                    }
                    continue;
                }
                let v = top.0;
                if self.ba.states[v % m].accepting {
                    if let Some(red_path) = self.red_search(v, &color, &mut red) {
                        let target = red_path.last().unwrap().0;
                        let j = stack.iter().position(|f| f.0 == target).expect("cyan node is on the stack");
                        let mut nodes: Vec<NodeId> = stack.iter().map(|f| f.0 / m).collect();
                        let mut choices: Vec<Choice> = stack.iter().skip(1).map(|f| f.1).collect();
                        for (w, c) in red_path {
                            nodes.push(w / m);
                            choices.push(c);
                        }
                        return Some(Path { nodes, choices, loop_start: Some(j) });
                    }
                }
                color[v] = BLUE;
                stack.pop();
            }
        }
        None
    }

    /// From accepting `seed`, looks for a path back to a node on the blue
    /// stack. Returns the steps after `seed`.
    fn red_search(&self, seed: usize, color: &[u8], red: &mut [bool]) -> Option<Vec<(usize, Choice)>> {
        let mut stack: Vec<Frame> = vec![(seed, Choice::Next, self.successors(seed), 0)];
        while let Some(top) = stack.last_mut() {
            if top.3 >= top.2.len() {
                stack.pop();
                continue;
            }
            let (w, c) = top.2[top.3];
            top.3 += 1;
            if color[w] == 1 {
                let mut path: Vec<(usize, Choice)> = stack.iter().skip(1).map(|f| (f.0, f.1)).collect();
                path.push((w, c));
                return Some(path);
            }
            if !red[w] {
                red[w] = true;
                let ws = self.successors(w);
                stack.push((w, c, ws, 0));
            }
        }
        None
    }

    fn violation(&self) -> Option<Path> {
        self.bad_prefix().or_else(|| self.accepting_lasso())
    }
}

fn pack_bits(props: &[Prop], n: usize, holds: impl Fn(usize, &Prop) -> bool) -> Vec<u64> {
    assert!(props.len() <= 64, "at most 64 distinct propositions per formula");
    (0..n).map(|g| props.iter().enumerate().fold(0u64, |acc, (i, p)| acc | (holds(g, p) as u64) << i)).collect()
}

/// Checks `f` on every path of `g` from its initial node. Stuck states carry
/// a stutter loop, so finite executions count as infinite ones.
pub fn model_check(k: &Kernel, g: &Graph, f: &Ltl) -> Result<Verdict, PropError> {
    for p in f.atoms() {
        p.validate(k)?;
    }
    let ba = to_buchi(&Ltl::not(f.clone()));
    let bits = pack_bits(&ba.props, g.len(), |n, p| super::eval_prop(k, &g.states[n], p));
    let product = Product { succ: &g.edges, bits, ba };
    Ok(match product.violation() {
        Some(path) => {
            let steps: Vec<(Choice, NodeId)> =
                path.choices.iter().copied().zip(path.nodes.iter().skip(1).copied()).collect();
            Verdict::Violated { trace: g.trace_along(&steps, path.loop_start) }
        }
        None if g.truncated() => Verdict::BoundedHolds { bound: g.bound },
        None => Verdict::Holds,
    })
}

/// Checks `f` on an abstract graph with node 0 initial. Nodes without
/// successors end no infinite path and are ignored.
pub fn check_labeled(succ: &[Vec<usize>], holds: &dyn Fn(usize, &Prop) -> bool, f: &Ltl) -> LabeledVerdict {
    let ba = to_buchi(&Ltl::not(f.clone()));
    let edges: Vec<Vec<(Choice, NodeId)>> =
        succ.iter().map(|s| s.iter().map(|&t| (Choice::Next, t)).collect()).collect();
    let bits = pack_bits(&ba.props, succ.len(), holds);
    let product = Product { succ: &edges, bits, ba };
    // The bad-prefix shortcut assumes every node has a successor.
    let found = if succ.iter().all(|s| !s.is_empty()) { product.violation() } else { product.accepting_lasso() };
    match found {
        Some(p) => LabeledVerdict::Violated { path: p.nodes, loop_start: p.loop_start },
        None => LabeledVerdict::Holds,
    }
}
