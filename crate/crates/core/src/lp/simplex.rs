//! Exact rational simplex and a best-bound branch-and-bound on top of it.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub type Q = BigRational;

/// minimize c.x subject to rows a.x <= b, with x_j >= 0 unless free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub free: Vec<bool>,
    pub integer: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal { x: Vec<Q>, value: Q, duals: Vec<Q> },
    Infeasible,
    Unbounded,
}

pub fn q_of(x: f64) -> Q {
    Q::from_float(x).expect("finite coefficient")
}

/// Largest f64 not exceeding r.
pub fn floor_f64(r: &Q) -> f64 {
    let mut f = r.to_f64().unwrap_or(f64::NAN);
    if f.is_finite() && q_of(f) > *r {
        f = f.next_down();
    }
    f
}

struct Tableau {
    t: Vec<Vec<Q>>, // m rows, ncols + 1 (rhs last)
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut [Q]) {
        let p = self.t[r][c].clone();
        for v in self.t[r].iter_mut() {
            *v = &*v / &p;
        }
        let prow = self.t[r].clone();
        for i in 0..self.t.len() {
            if i != r && !self.t[i][c].is_zero() {
                let f = self.t[i][c].clone();
                for (v, pv) in self.t[i].iter_mut().zip(&prow) {
                    if !pv.is_zero() {
                        *v -= &f * pv;
                    }
                }
            }
        }
        if !obj[c].is_zero() {
            let f = obj[c].clone();
            for (v, pv) in obj.iter_mut().zip(&prow) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    // Bland's rule; `allowed` masks columns that may enter. Returns false if unbounded.
    fn run(&mut self, obj: &mut [Q], allowed: &[bool]) -> bool {
        loop {
            let Some(c) = (0..self.ncols).find(|&j| allowed[j] && obj[j].is_negative()) else {
                return true;
            };
            let mut best: Option<(usize, Q)> = None;
            for i in 0..self.t.len() {
                if self.t[i][c].is_positive() {
                    let ratio = &self.t[i][self.ncols] / &self.t[i][c];
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = best else { return false };
            self.pivot(r, c, obj);
        }
    }
}

/// Two-phase exact simplex. Duals are the multipliers y >= 0 with
/// c + A^T y >= 0 (componentwise on nonnegative variables, equality on free
/// ones) and optimum = -b.y.
pub fn solve_exact(c: &[Q], a: &[Vec<Q>], b: &[Q], free: &[bool]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    // structural columns: x_j, then -x_j for free j
    let free_idx: Vec<usize> = (0..n).filter(|&j| free[j]).collect();
    let ns = n + free_idx.len();
    let slack0 = ns;
    let art0 = ns + m;
    let neg: Vec<bool> = b.iter().map(|v| v.is_negative()).collect();
    let ncols = art0 + m;
    let mut t = Vec::with_capacity(m);
    for i in 0..m {
        let s = if neg[i] { -Q::one() } else { Q::one() };
        let mut row = vec![Q::zero(); ncols + 1];
        for j in 0..n {
            row[j] = &a[i][j] * &s;
        }
        for (k, &j) in free_idx.iter().enumerate() {
            row[n + k] = -&a[i][j] * &s;
        }
        row[slack0 + i] = s.clone();
        if neg[i] {
            row[art0 + i] = Q::one();
        }
        row[ncols] = &b[i] * &s;
        t.push(row);
    }
    let basis = (0..m).map(|i| if neg[i] { art0 + i } else { slack0 + i }).collect();
    let mut tab = Tableau { t, basis, ncols };

    // phase 1
    let mut obj = vec![Q::zero(); ncols + 1];
    for i in 0..m {
        if neg[i] {
            obj[art0 + i] = Q::one();
        }
    }
    for i in 0..m {
        if neg[i] {
            for j in 0..=ncols {
                obj[j] = &obj[j] - &tab.t[i][j];
            }
        }
    }
    let mut allowed = vec![true; ncols];
    for i in 0..m {
        if !neg[i] {
            allowed[art0 + i] = false;
        }
    }
    tab.run(&mut obj, &allowed);
    if obj[ncols].is_negative() {
        return LpOutcome::Infeasible;
    }
    // drive remaining artificials out
    for r in 0..m {
        if tab.basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&j| !tab.t[r][j].is_zero()) {
                tab.pivot(r, c, &mut obj);
            }
        }
    }
    for j in art0..ncols {
        allowed[j] = false;
    }

    // phase 2
    let mut cost = vec![Q::zero(); ncols + 1];
    for j in 0..n {
        cost[j] = c[j].clone();
    }
    for (k, &j) in free_idx.iter().enumerate() {
        cost[n + k] = -&c[j];
    }
    let mut obj = cost.clone();
    for r in 0..m {
        let cb = cost[tab.basis[r]].clone();
        if !cb.is_zero() {
            for j in 0..=ncols {
                obj[j] = &obj[j] - &cb * &tab.t[r][j];
            }
        }
    }
    if !tab.run(&mut obj, &allowed) {
        return LpOutcome::Unbounded;
    }
    let mut xs = vec![Q::zero(); ns];
    for r in 0..m {
        if tab.basis[r] < ns {
            xs[tab.basis[r]] = tab.t[r][ncols].clone();
        }
    }
    let mut x: Vec<Q> = xs[..n].to_vec();
    for (k, &j) in free_idx.iter().enumerate() {
        x[j] = &x[j] - &xs[n + k];
    }
    let value: Q = -&obj[ncols];
    // reduced cost of slack i equals y_i, whatever the row sign
    let duals = (0..m).map(|i| obj[slack0 + i].clone()).collect();
    LpOutcome::Optimal { x, value, duals }
}

/// The lower bound certified by multipliers y, or None if they are not valid.
pub fn dual_bound(c: &[Q], a: &[Vec<Q>], b: &[Q], free: &[bool], y: &[Q]) -> Option<Q> {
    if y.len() != a.len() || y.iter().any(|v| v.is_negative()) {
        return None;
    }
    for j in 0..c.len() {
        let mut r = c[j].clone();
        for (i, row) in a.iter().enumerate() {
            r += &row[j] * &y[i];
        }
        if r.is_negative() || (free[j] && !r.is_zero()) {
            return None;
        }
    }
    Some(-b.iter().zip(y).map(|(bi, yi)| bi * yi).sum::<Q>())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    BudgetExceeded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub node: usize,
    pub parent: Option<usize>,
    /// (variable, "<=" or ">=", bound) added at this node.
    pub branch: Option<(usize, String, i64)>,
    pub bound: Option<f64>,
    pub outcome: String,
}

#[derive(Clone, Debug)]
pub struct MipResult {
    pub status: Status,
    /// Proven lower bound on the optimum (the optimum itself when optimal).
    pub bound: Option<Q>,
    pub x: Option<Vec<Q>>,
    pub duals: Option<Vec<Q>>,
    pub nodes: usize,
    pub audit: Vec<AuditEntry>,
}

struct Node {
    bound: Q,
    id: usize,
    extra: Vec<(usize, bool, i64)>, // (var, is_upper, value)
    x: Vec<Q>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then lowest id
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.cmp(&self.bound).then(o.id.cmp(&self.id))
    }
}

fn with_branches(a: &[Vec<Q>], b: &[Q], n: usize, extra: &[(usize, bool, i64)]) -> (Vec<Vec<Q>>, Vec<Q>) {
    let mut a2 = a.to_vec();
    let mut b2 = b.to_vec();
    for &(j, upper, v) in extra {
        let mut row = vec![Q::zero(); n];
        if upper {
            row[j] = Q::one();
            b2.push(Q::from_integer(BigInt::from(v)));
        } else {
            row[j] = -Q::one();
            b2.push(Q::from_integer(BigInt::from(-v)));
        }
        a2.push(row);
    }
    (a2, b2)
}

fn most_fractional(x: &[Q], integer: &[bool]) -> Option<usize> {
    let half = Q::new(BigInt::one(), BigInt::from(2));
    let mut best: Option<(usize, Q)> = None;
    for (j, v) in x.iter().enumerate() {
        if integer[j] && !v.is_integer() {
            let dist = (v.fract() - &half).abs();
            if best.as_ref().is_none_or(|(_, d)| dist < *d) {
                best = Some((j, dist));
            }
        }
    }
    best.map(|(j, _)| j)
}

/// Branch and bound over the integer-flagged variables, exploring nodes in
/// best-bound order. A node budget of `max_nodes` LP solves.
pub fn branch_and_bound(c: &[Q], a: &[Vec<Q>], b: &[Q], free: &[bool], integer: &[bool], max_nodes: usize) -> MipResult {
    let n = c.len();
    let mut audit = Vec::new();
    let mut nodes = 1;
    let root = solve_exact(c, a, b, free);
    let (x, value, duals) = match root {
        LpOutcome::Optimal { x, value, duals } => (x, value, duals),
        LpOutcome::Infeasible | LpOutcome::Unbounded => {
            let infeasible = matches!(root, LpOutcome::Infeasible);
            audit.push(AuditEntry {
                node: 0,
                parent: None,
                branch: None,
                bound: None,
                outcome: if infeasible { "infeasible" } else { "unbounded" }.into(),
            });
            return MipResult {
                status: if infeasible { Status::Infeasible } else { Status::BudgetExceeded },
                bound: None,
                x: None,
                duals: None,
                nodes,
                audit,
            };
        }
    };
    let pure = !integer.iter().any(|&f| f);
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: value, id: 0, extra: Vec::new(), x });
    let mut parents = vec![None];
    let mut branches: Vec<Option<(usize, String, i64)>> = vec![None];
    let mut next_id = 1;
    while let Some(node) = heap.pop() {
        let bound_f = Some(floor_f64(&node.bound));
        match most_fractional(&node.x, integer) {
            None => {
                audit.push(AuditEntry {
                    node: node.id,
                    parent: parents[node.id],
                    branch: branches[node.id].clone(),
                    bound: bound_f,
                    outcome: "integral".into(),
                });
                return MipResult {
                    status: Status::Optimal,
                    bound: Some(node.bound),
                    x: Some(node.x),
                    duals: pure.then_some(duals),
                    nodes,
                    audit,
                };
            }
            Some(j) => {
                if nodes >= max_nodes {
                    audit.push(AuditEntry {
                        node: node.id,
                        parent: parents[node.id],
                        branch: branches[node.id].clone(),
                        bound: bound_f,
                        outcome: "budget".into(),
                    });
                    return MipResult {
                        status: Status::BudgetExceeded,
                        bound: Some(node.bound),
                        x: None,
                        duals: None,
                        nodes,
                        audit,
                    };
                }
                audit.push(AuditEntry {
                    node: node.id,
                    parent: parents[node.id],
                    branch: branches[node.id].clone(),
                    bound: bound_f,
                    outcome: format!("branch on {j}"),
                });
                let fl = node.x[j].floor().to_integer().to_i64().unwrap_or(i64::MAX);
                for (upper, v) in [(true, fl), (false, fl + 1)] {
                    let mut extra = node.extra.clone();
                    extra.push((j, upper, v));
                    let (a2, b2) = with_branches(a, b, n, &extra);
                    nodes += 1;
                    let id = next_id;
                    next_id += 1;
                    parents.push(Some(node.id));
                    branches.push(Some((j, if upper { "<=" } else { ">=" }.into(), v)));
                    match solve_exact(c, &a2, &b2, free) {
                        LpOutcome::Optimal { x, value, .. } => heap.push(Node { bound: value, id, extra, x }),
                        _ => audit.push(AuditEntry {
                            node: id,
                            parent: Some(node.id),
                            branch: branches[id].clone(),
                            bound: None,
                            outcome: "infeasible".into(),
                        }),
                    }
                }
            }
        }
    }
    MipResult { status: Status::Infeasible, bound: None, x: None, duals: None, nodes, audit }
}

impl LinearProgram {
    pub fn exact(&self) -> (Vec<Q>, Vec<Vec<Q>>, Vec<Q>) {
        let c = self.objective.iter().map(|&v| q_of(v)).collect();
        let a = self.rows.iter().map(|r| r.coeffs.iter().map(|&v| q_of(v)).collect()).collect();
        let b = self.rows.iter().map(|r| q_of(r.rhs)).collect();
        (c, a, b)
    }

    pub fn solve(&self, max_nodes: usize) -> MipResult {
        let (c, a, b) = self.exact();
        branch_and_bound(&c, &a, &b, &self.free, &self.integer, max_nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qi(v: i64) -> Q {
        Q::from_integer(BigInt::from(v))
    }

    #[test]
    fn textbook_lp() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18  ->  36 at (2, 6)
        let c = vec![qi(-3), qi(-5)];
        let a = vec![vec![qi(1), qi(0)], vec![qi(0), qi(2)], vec![qi(3), qi(2)]];
        let b = vec![qi(4), qi(12), qi(18)];
        let LpOutcome::Optimal { x, value, duals } = solve_exact(&c, &a, &b, &[false, false]) else { panic!() };
        assert_eq!(value, qi(-36));
        assert_eq!(x, vec![qi(2), qi(6)]);
        assert_eq!(dual_bound(&c, &a, &b, &[false, false], &duals), Some(qi(-36)));
    }

    #[test]
    fn negative_rhs_and_free_variable() {
        // min z st -z <= -3 (z >= 3), z free
        let LpOutcome::Optimal { value, duals, .. } = solve_exact(&[qi(1)], &[vec![qi(-1)]], &[qi(-3)], &[true]) else {
            panic!()
        };
        assert_eq!(value, qi(3));
        assert_eq!(duals, vec![qi(1)]);
        assert!(matches!(solve_exact(&[qi(1)], &[vec![qi(1)], vec![qi(-1)]], &[qi(1), qi(-2)], &[false]), LpOutcome::Infeasible));
        assert!(matches!(solve_exact(&[qi(-1)], &[vec![qi(-1)]], &[qi(0)], &[false]), LpOutcome::Unbounded));
    }

    #[test]
    fn small_integer_program() {
        // max x + y st 2x + 2y <= 3 with x, y integer -> 1; relaxation 1.5
        let c = vec![qi(-1), qi(-1)];
        let a = vec![vec![qi(2), qi(2)]];
        let b = vec![qi(3)];
        let r = branch_and_bound(&c, &a, &b, &[false, false], &[true, true], 100);
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.bound, Some(qi(-1)));
        assert!(r.duals.is_none());
    }

    #[test]
    fn floor_rounds_down() {
        let third = Q::new(BigInt::from(1), BigInt::from(3));
        let f = floor_f64(&third);
        assert!(q_of(f) <= third);
        assert!(q_of(f.next_up()) > third);
    }
}
