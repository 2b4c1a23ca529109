//! Tableau translation (incoming/old/new/next node expansion) from an NNF
//! formula to a generalized Büchi automaton, then degeneralization.
//!
//! Automata are state-labelled: a run visits state `q` while reading a letter
//! that satisfies `label(q)`.

use std::collections::{BTreeSet, VecDeque};

use super::{Ltl, Prop};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    /// Index into [`Buchi::props`].
    pub prop: usize,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuchiState {
    pub label: Vec<Literal>,
    pub accepting: bool,
    /// Every infinite continuation from this state is accepted.
    pub universal: bool,
}

#[derive(Debug, Clone)]
pub struct Buchi {
    pub props: Vec<Prop>,
    pub states: Vec<BuchiState>,
    pub initial: Vec<usize>,
    pub succ: Vec<Vec<usize>>,
}

impl Buchi {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn label_holds(&self, q: usize, val: impl Fn(usize) -> bool) -> bool {
        self.states[q].label.iter().all(|l| val(l.prop) == l.positive)
    }

    /// Whether the automaton accepts the lasso word of length `n` looping
    /// back to `loop_start`.
    pub fn accepts_lasso(&self, n: usize, loop_start: usize, holds: &dyn Fn(usize, &Prop) -> bool) -> bool {
        let m = self.len();
        let next_pos = |i: usize| if i + 1 < n { i + 1 } else { loop_start };
        let ok = |i: usize, q: usize| self.label_holds(q, |p| holds(i, &self.props[p]));
        let succ = |(i, q): (usize, usize)| {
            let j = next_pos(i);
            self.succ[q].iter().copied().filter(move |&r| ok(j, r)).map(move |r| (j, r))
        };
        let mut seen = vec![false; n * m];
        let mut queue: VecDeque<(usize, usize)> =
            self.initial.iter().copied().filter(|&q| ok(0, q)).map(|q| (0, q)).collect();
        for &(i, q) in &queue {
            seen[i * m + q] = true;
        }
        let mut reach = Vec::new();
        while let Some(v) = queue.pop_front() {
            reach.push(v);
            for w in succ(v) {
                if !std::mem::replace(&mut seen[w.0 * m + w.1], true) {
                    queue.push_back(w);
                }
            }
        }
        reach.into_iter().filter(|&(_, q)| self.states[q].accepting).any(|start| {
            let mut seen = vec![false; n * m];
            let mut stack: Vec<_> = succ(start).collect();
            while let Some(v) = stack.pop() {
                if v == start {
                    return true;
                }
                if !std::mem::replace(&mut seen[v.0 * m + v.1], true) {
                    stack.extend(succ(v));
                }
            }
            false
        })
    }
}

const INIT: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node {
    incoming: BTreeSet<usize>,
    new: BTreeSet<Ltl>,
    old: BTreeSet<Ltl>,
    next: BTreeSet<Ltl>,
}

fn expand(f: Ltl) -> Vec<Node> {
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack = vec![Node {
        incoming: BTreeSet::from([INIT]),
        new: BTreeSet::from([f]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    }];
    while let Some(mut n) = stack.pop() {
        let Some(eta) = n.new.pop_first() else {
            if let Some(m) = nodes.iter_mut().find(|m| m.old == n.old && m.next == n.next) {
                m.incoming.extend(n.incoming);
                continue;
            }
            let id = nodes.len();
            stack.push(Node {
                incoming: BTreeSet::from([id]),
                new: n.next.clone(),
                old: BTreeSet::new(),
                next: BTreeSet::new(),
            });
            nodes.push(n);
            continue;
        };
        if n.old.contains(&eta) {
            stack.push(n);
            continue;
        }
        n.old.insert(eta.clone());
        match eta {
            Ltl::False => {}
            Ltl::True => stack.push(n),
            Ltl::Atom(ref p) => {
                if !n.old.contains(&Ltl::not(Ltl::Atom(p.clone()))) {
                    stack.push(n);
                }
            }
            Ltl::Not(ref a) => {
                if !n.old.contains(a) {
                    stack.push(n);
                }
            }
            Ltl::And(a, b) => {
                n.new.insert(*a);
                n.new.insert(*b);
                stack.push(n);
            }
            Ltl::Next(a) => {
                n.next.insert(*a);
                stack.push(n);
            }
            Ltl::Or(a, b) => {
                let mut n2 = n.clone();
                n.new.insert(*a);
                n2.new.insert(*b);
                stack.push(n2);
                stack.push(n);
            }
            Ltl::Until(ref a, ref b) => {
                let mut n2 = n.clone();
                n.new.insert((**a).clone());
                n.next.insert(eta.clone());
                n2.new.insert((**b).clone());
                stack.push(n2);
                stack.push(n);
            }
            Ltl::Release(ref a, ref b) => {
                let mut n2 = n.clone();
                n.new.insert((**b).clone());
                n.next.insert(eta.clone());
                n2.new.insert((**a).clone());
                n2.new.insert((**b).clone());
                stack.push(n2);
                stack.push(n);
            }
            Ltl::Implies(..) | Ltl::Globally(_) | Ltl::Finally(_) => unreachable!("input is in NNF"),
        }
    }
    nodes
}

fn untils(f: &Ltl, out: &mut BTreeSet<Ltl>) {
    match f {
        Ltl::Until(a, b) => {
            out.insert(f.clone());
            untils(a, out);
            untils(b, out);
        }
        Ltl::Not(a) | Ltl::Next(a) | Ltl::Globally(a) | Ltl::Finally(a) => untils(a, out),
        Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Implies(a, b) | Ltl::Release(a, b) => {
            untils(a, out);
            untils(b, out);
        }
        Ltl::True | Ltl::False | Ltl::Atom(_) => {}
    }
}

/// Büchi automaton accepting exactly the words satisfying `f`.
pub fn to_buchi(f: &Ltl) -> Buchi {
    let nnf = f.nnf();
    let props = nnf.atoms();
    let nodes = expand(nnf.clone());
    let mut goals = BTreeSet::new();
    untils(&nnf, &mut goals);
    let goals: Vec<Ltl> = goals.into_iter().collect();

    // Generalized acceptance: node q is in set i unless it still owes the
    // right-hand side of the i-th until.
    let in_set = |q: usize, i: usize| -> bool {
        match goals.get(i) {
            None => true,
            Some(g @ Ltl::Until(_, b)) => !nodes[q].old.contains(g) || nodes[q].old.contains(&**b),
            Some(_) => unreachable!(),
        }
    };
    let k = goals.len().max(1);
    let gsucc: Vec<Vec<usize>> =
        (0..nodes.len()).map(|q| (0..nodes.len()).filter(|r| nodes[*r].incoming.contains(&q)).collect()).collect();

    // Degeneralize into (node, level) pairs, keeping only reachable ones.
    let mut index = std::collections::HashMap::new();
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut initial = Vec::new();
    for q in (0..nodes.len()).filter(|q| nodes[*q].incoming.contains(&INIT)) {
        index.insert((q, 0), order.len());
        initial.push(order.len());
        order.push((q, 0));
        queue.push_back((q, 0));
    }
    let mut succ: Vec<Vec<usize>> = Vec::new();
    while let Some((q, i)) = queue.pop_front() {
        let j = if in_set(q, i) { (i + 1) % k } else { i };
        let mut out = Vec::new();
        for &r in &gsucc[q] {
            let id = *index.entry((r, j)).or_insert_with(|| {
                order.push((r, j));
                queue.push_back((r, j));
                order.len() - 1
            });
            out.push(id);
        }
        succ.push(out);
    }

    let states = order
        .iter()
        .map(|&(q, i)| {
            let label = nodes[q]
                .old
                .iter()
                .filter_map(|l| match l {
                    Ltl::Atom(p) => Some(Literal { prop: props.iter().position(|x| x == p).unwrap(), positive: true }),
                    Ltl::Not(a) => match &**a {
                        Ltl::Atom(p) => {
                            Some(Literal { prop: props.iter().position(|x| x == p).unwrap(), positive: false })
                        }
                        _ => None,
                    },
                    _ => None,
                })
                .collect();
            BuchiState { label, accepting: i == 0 && in_set(q, 0), universal: nodes[q].next.is_empty() }
        })
        .collect();
    Buchi { props, states, initial, succ }
}
