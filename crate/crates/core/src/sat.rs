//! Satisfiability under assumptions and model enumeration.
//!
//! [`SatEngine`] is the seam between the analyses and a solver. The built-in
//! [`CdclSolver`] is an incremental conflict-driven clause-learning solver
//! with two watched literals, VSIDS branching, phase saving, Luby restarts and
//! activity-based learnt-clause reduction. Assumptions are handled as the
//! first decisions of each search, so learnt clauses stay valid across calls.

use thiserror::Error;

use crate::formula::{CnfFormula, Literal, Var};

/// Default variable bound for [`enumerate_models`].
pub const DEFAULT_ENUMERATION_LIMIT: u32 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatStatus {
    Sat,
    Unsat,
}

/// Result of one satisfiability query. `model` is indexed by variable slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatOutcome {
    pub status: SatStatus,
    pub model: Option<Vec<bool>>,
}

impl SatOutcome {
    pub fn is_sat(&self) -> bool {
        self.status == SatStatus::Sat
    }

    /// Literals made true by the model, in ascending variable order.
    pub fn model_literals(&self) -> Option<Vec<Literal>> {
        self.model.as_ref().map(|m| {
            m.iter()
                .enumerate()
                .map(|(slot, &value)| Literal::new(Var::from_slot(slot), value))
                .collect()
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SatError {
    #[error("assumption on variable {var} but the formula has {num_vars} variables")]
    AssumptionOutOfRange { var: u32, num_vars: u32 },
    #[error("refusing to enumerate models of a formula with {num_vars} variables (limit {limit})")]
    EnumerationLimit { num_vars: u32, limit: u32 },
}

/// An incremental satisfiability oracle.
pub trait SatEngine {
    fn num_vars(&self) -> u32;

    /// Adds a clause permanently. An empty slice makes the engine UNSAT.
    fn add_clause(&mut self, literals: &[Literal]);

    /// Decides `formula ∧ assumptions`, returning a total model when SAT.
    fn solve(&mut self, assumptions: &[Literal]) -> Result<SatOutcome, SatError>;

    /// Number of `solve` calls answered so far.
    fn solve_calls(&self) -> u64;
}

/// One-shot query on a fresh engine.
pub fn solve_under_assumptions(
    formula: &CnfFormula,
    assumptions: &[Literal],
) -> Result<SatOutcome, SatError> {
    CdclSolver::from_formula(formula).solve(assumptions)
}

// ---------------------------------------------------------------------------
// Built-in CDCL solver

type Lit = u32;

#[inline]
fn lit_of(l: Literal) -> Lit {
    (l.var().slot() as u32) << 1 | u32::from(!l.is_positive())
}

#[inline]
fn var_of(l: Lit) -> usize {
    (l >> 1) as usize
}

#[inline]
fn neg(l: Lit) -> Lit {
    l ^ 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    True,
    False,
    Undef,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    clause: u32,
    blocker: Lit,
}

#[derive(Debug)]
struct ClauseData {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

/// Binary max-heap of variables keyed by activity.
#[derive(Debug, Default)]
struct VarOrder {
    heap: Vec<u32>,
    position: Vec<Option<usize>>,
}

impl VarOrder {
    fn grow(&mut self, n: usize) {
        self.position.resize(n, None);
    }

    fn contains(&self, v: usize) -> bool {
        self.position[v].is_some()
    }

    fn insert(&mut self, v: usize, activity: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v as u32);
        let i = self.heap.len() - 1;
        self.position[v] = Some(i);
        self.sift_up(i, activity);
    }

    fn increased(&mut self, v: usize, activity: &[f64]) {
        if let Some(i) = self.position[v] {
            self.sift_up(i, activity);
        }
    }

    fn pop(&mut self, activity: &[f64]) -> Option<usize> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0] as usize;
        let last = self.heap.pop().unwrap();
        self.position[top] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = Some(0);
            self.sift_down(0, activity);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, activity: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if activity[p as usize] >= activity[v as usize] {
                break;
            }
            self.heap[i] = p;
            self.position[p as usize] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.position[v as usize] = Some(i);
    }

    fn sift_down(&mut self, mut i: usize, activity: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let left = 2 * i + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let child = if right < n
                && activity[self.heap[right] as usize] > activity[self.heap[left] as usize]
            {
                right
            } else {
                left
            };
            let c = self.heap[child];
            if activity[c as usize] <= activity[v as usize] {
                break;
            }
            self.heap[i] = c;
            self.position[c as usize] = Some(i);
            i = child;
        }
        self.heap[i] = v;
        self.position[v as usize] = Some(i);
    }
}

/// Incremental CDCL solver over a fixed variable set.
#[derive(Debug)]
pub struct CdclSolver {
    num_vars: u32,
    clauses: Vec<ClauseData>,
    learnts: Vec<u32>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<Value>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    order: VarOrder,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    var_inc: f64,
    clause_inc: f64,
    max_learnts: f64,
    ok: bool,
    calls: u64,
    conflicts: u64,
}

const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f64 = 0.999;
const RESTART_BASE: u64 = 100;

impl CdclSolver {
    pub fn new(num_vars: u32) -> CdclSolver {
        let n = num_vars as usize;
        let mut order = VarOrder::default();
        order.grow(n);
        let activity = vec![0.0; n];
        for v in 0..n {
            order.insert(v, &activity);
        }
        CdclSolver {
            num_vars,
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            assigns: vec![Value::Undef; n],
            level: vec![0; n],
            reason: vec![None; n],
            polarity: vec![false; n],
            activity,
            order,
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            seen: vec![false; n],
            var_inc: 1.0,
            clause_inc: 1.0,
            max_learnts: 1000.0,
            ok: true,
            calls: 0,
            conflicts: 0,
        }
    }

    pub fn from_formula(formula: &CnfFormula) -> CdclSolver {
        let mut solver = CdclSolver::new(formula.num_vars());
        if formula.has_empty_clause() {
            solver.ok = false;
        }
        for clause in formula.clauses() {
            solver.add_clause(clause.literals());
        }
        solver.max_learnts = (formula.clauses().len() as f64 / 3.0).max(1000.0);
        solver
    }

    /// Total conflicts over the solver's lifetime.
    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    #[inline]
    fn value(&self, l: Lit) -> Value {
        match self.assigns[var_of(l)] {
            Value::Undef => Value::Undef,
            Value::True => {
                if l & 1 == 0 {
                    Value::True
                } else {
                    Value::False
                }
            }
            Value::False => {
                if l & 1 == 0 {
                    Value::False
                } else {
                    Value::True
                }
            }
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        let v = var_of(l);
        debug_assert_eq!(self.assigns[v], Value::Undef);
        self.assigns[v] = if l & 1 == 0 {
            Value::True
        } else {
            Value::False
        };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn attach(&mut self, cref: u32) {
        let lits = &self.clauses[cref as usize].lits;
        let (a, b) = (lits[0], lits[1]);
        self.watches[neg(a) as usize].push(Watcher {
            clause: cref,
            blocker: b,
        });
        self.watches[neg(b) as usize].push(Watcher {
            clause: cref,
            blocker: a,
        });
    }

    fn cancel_until(&mut self, target: u32) {
        if self.decision_level() <= target {
            return;
        }
        let start = self.trail_lim[target as usize];
        for i in (start..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = var_of(l);
            self.assigns[v] = Value::Undef;
            self.reason[v] = None;
            self.polarity[v] = l & 1 == 0;
            self.order.insert(v, &self.activity);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(target as usize);
        self.qhead = start;
    }

    /// Unit propagation; returns a conflicting clause if one is found.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = neg(p);
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == Value::True {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.clause as usize;
                if self.clauses[cref].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                let kept = Watcher {
                    clause: w.clause,
                    blocker: first,
                };
                if first != w.blocker && self.value(first) == Value::True {
                    ws[j] = kept;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                let len = self.clauses[cref].lits.len();
                for k in 2..len {
                    let candidate = self.clauses[cref].lits[k];
                    if self.value(candidate) != Value::False {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[neg(candidate) as usize].push(kept);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = kept;
                j += 1;
                if self.value(first) == Value::False {
                    conflict = Some(w.clause);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.clause));
                }
            }
            ws.truncate(j);
            // Watches pushed onto this list during the scan must be kept.
            let added = std::mem::replace(&mut self.watches[p as usize], ws);
            self.watches[p as usize].extend(added);
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.increased(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.clause_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.clause_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut conflict: u32) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![0];
        let mut pending = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let current = self.decision_level();

        loop {
            if self.clauses[conflict as usize].learnt {
                self.bump_clause(conflict);
            }
            let lits = self.clauses[conflict as usize].lits.clone();
            let start = usize::from(p.is_some());
            for &q in &lits[start..] {
                let v = var_of(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= current {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[var_of(self.trail[index])] {
                    break;
                }
            }
            let lit = self.trail[index];
            p = Some(lit);
            self.seen[var_of(lit)] = false;
            pending -= 1;
            if pending == 0 {
                break;
            }
            conflict = self.reason[var_of(lit)].expect("implied literal has a reason");
        }
        learnt[0] = neg(p.unwrap());

        // Drop literals implied by the rest of the clause (local minimization).
        let mut kept = vec![learnt[0]];
        for &q in &learnt[1..] {
            let v = var_of(q);
            let redundant = match self.reason[v] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..].iter().all(|&x| {
                    let xv = var_of(x);
                    self.seen[xv] || self.level[xv] == 0
                }),
            };
            if !redundant {
                kept.push(q);
            }
        }
        for &q in &learnt {
            self.seen[var_of(q)] = false;
        }
        let mut learnt = kept;

        let backjump = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[var_of(learnt[i])] > self.level[var_of(learnt[max_i])] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[var_of(learnt[1])]
        };
        (learnt, backjump)
    }

    fn locked(&self, cref: u32) -> bool {
        let first = self.clauses[cref as usize].lits[0];
        self.value(first) == Value::True && self.reason[var_of(first)] == Some(cref)
    }

    fn reduce_learnts(&mut self) {
        let mut refs = std::mem::take(&mut self.learnts);
        refs.sort_by(|&a, &b| {
            self.clauses[a as usize]
                .activity
                .total_cmp(&self.clauses[b as usize].activity)
        });
        let half = refs.len() / 2;
        let mut kept = Vec::with_capacity(refs.len());
        for (i, &cref) in refs.iter().enumerate() {
            let c = &self.clauses[cref as usize];
            if i < half && c.lits.len() > 2 && !self.locked(cref) {
                let c = &mut self.clauses[cref as usize];
                c.deleted = true;
                c.lits = Vec::new();
            } else {
                kept.push(cref);
            }
        }
        self.learnts = kept;
        for ws in &mut self.watches {
            let clauses = &self.clauses;
            ws.retain(|w| !clauses[w.clause as usize].deleted);
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.assigns[v] == Value::Undef {
                return Some((v as u32) << 1 | u32::from(!self.polarity[v]));
            }
        }
        None
    }

    fn search(&mut self, assumptions: &[Lit], budget: u64) -> Option<SatStatus> {
        let mut local_conflicts = 0u64;
        loop {
            if let Some(conflict) = self.propagate() {
                self.conflicts += 1;
                local_conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Some(SatStatus::Unsat);
                }
                let (learnt, backjump) = self.analyze(conflict);
                self.cancel_until(backjump);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let cref = self.clauses.len() as u32;
                    self.clauses.push(ClauseData {
                        lits: learnt,
                        learnt: true,
                        deleted: false,
                        activity: 0.0,
                    });
                    self.attach(cref);
                    self.learnts.push(cref);
                    self.bump_clause(cref);
                    let first = self.clauses[cref as usize].lits[0];
                    self.enqueue(first, Some(cref));
                }
                self.var_inc /= VAR_DECAY;
                self.clause_inc /= CLAUSE_DECAY;
                continue;
            }

            if local_conflicts >= budget {
                self.cancel_until(0);
                return None;
            }
            if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                self.reduce_learnts();
                self.max_learnts *= 1.1;
            }

            let mut next = None;
            while (self.decision_level() as usize) < assumptions.len() {
                let a = assumptions[self.decision_level() as usize];
                match self.value(a) {
                    Value::True => self.trail_lim.push(self.trail.len()),
                    Value::False => return Some(SatStatus::Unsat),
                    Value::Undef => {
                        next = Some(a);
                        break;
                    }
                }
            }
            let decision = match next {
                Some(a) => a,
                None => match self.pick_branch() {
                    Some(l) => l,
                    None => return Some(SatStatus::Sat),
                },
            };
            self.trail_lim.push(self.trail.len());
            self.enqueue(decision, None);
        }
    }
}

/// Luby sequence 1, 1, 2, 1, 1, 2, 4, ...
fn luby(mut i: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1u64 << seq
}

impl SatEngine for CdclSolver {
    fn num_vars(&self) -> u32 {
        self.num_vars
    }

    fn add_clause(&mut self, literals: &[Literal]) {
        if !self.ok {
            return;
        }
        self.cancel_until(0);
        let mut lits: Vec<Lit> = Vec::with_capacity(literals.len());
        for &l in literals {
            assert!(
                l.var().index() <= self.num_vars,
                "clause literal {l} outside {} variables",
                self.num_vars
            );
            let x = lit_of(l);
            if lits.contains(&neg(x)) || self.value(x) == Value::True {
                return;
            }
            if !lits.contains(&x) && self.value(x) != Value::False {
                lits.push(x);
            }
        }
        match lits.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(lits[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cref = self.clauses.len() as u32;
                self.clauses.push(ClauseData {
                    lits,
                    learnt: false,
                    deleted: false,
                    activity: 0.0,
                });
                self.attach(cref);
            }
        }
    }

    fn solve(&mut self, assumptions: &[Literal]) -> Result<SatOutcome, SatError> {
        for a in assumptions {
            if a.var().index() > self.num_vars {
                return Err(SatError::AssumptionOutOfRange {
                    var: a.var().index(),
                    num_vars: self.num_vars,
                });
            }
        }
        self.calls += 1;
        let unsat = SatOutcome {
            status: SatStatus::Unsat,
            model: None,
        };
        if !self.ok {
            return Ok(unsat);
        }
        self.cancel_until(0);
        if self.propagate().is_some() {
            self.ok = false;
            return Ok(unsat);
        }
        let assumptions: Vec<Lit> = assumptions.iter().map(|&a| lit_of(a)).collect();
        let mut restart = 0u64;
        let status = loop {
            let budget = luby(restart) * RESTART_BASE;
            restart += 1;
            if let Some(status) = self.search(&assumptions, budget) {
                break status;
            }
        };
        let outcome = match status {
            SatStatus::Sat => SatOutcome {
                status,
                model: Some(self.assigns.iter().map(|&v| v == Value::True).collect()),
            },
            SatStatus::Unsat => unsat,
        };
        self.cancel_until(0);
        Ok(outcome)
    }

    fn solve_calls(&self) -> u64 {
        self.calls
    }
}

// ---------------------------------------------------------------------------
// Model enumeration

/// Lazily enumerates every satisfying total assignment by pruned exhaustive
/// search in lexicographic order (false before true, variable 1 first).
///
/// A clause is checked as soon as its highest variable is assigned, so
/// subtrees below a falsified clause are skipped.
#[derive(Debug)]
pub struct ModelIter {
    num_vars: usize,
    /// Clauses bucketed by the slot of their highest variable.
    closing: Vec<Vec<Vec<Literal>>>,
    assignment: Vec<bool>,
    /// Next value to try at each depth: 0 = false, 1 = true, 2 = exhausted.
    next: Vec<u8>,
    depth: usize,
    done: bool,
}

impl ModelIter {
    fn new(formula: &CnfFormula) -> ModelIter {
        let n = formula.num_vars() as usize;
        let mut closing = vec![Vec::new(); n];
        for clause in formula.clauses() {
            closing[clause.max_var().slot()].push(clause.literals().to_vec());
        }
        ModelIter {
            num_vars: n,
            closing,
            assignment: vec![false; n],
            next: vec![0; n + 1],
            depth: 0,
            done: formula.has_empty_clause(),
        }
    }

    fn consistent_at(&self, slot: usize) -> bool {
        self.closing[slot]
            .iter()
            .all(|c| c.iter().any(|l| l.eval(&self.assignment)))
    }
}

impl Iterator for ModelIter {
    type Item = Vec<bool>;

    fn next(&mut self) -> Option<Vec<bool>> {
        if self.done {
            return None;
        }
        if self.num_vars == 0 {
            self.done = true;
            return Some(Vec::new());
        }
        loop {
            if self.depth == self.num_vars {
                // Emit, then backtrack into the last variable.
                let model = self.assignment.clone();
                self.depth -= 1;
                return Some(model);
            }
            let d = self.depth;
            match self.next[d] {
                choice @ (0 | 1) => {
                    self.next[d] += 1;
                    self.assignment[d] = choice == 1;
                    if self.consistent_at(d) {
                        self.depth += 1;
                        self.next[self.depth.min(self.num_vars)] = 0;
                    }
                }
                _ => {
                    if d == 0 {
                        self.done = true;
                        return None;
                    }
                    self.depth -= 1;
                }
            }
        }
    }
}

/// Enumerates every model of `formula` exactly once.
pub fn enumerate_models(formula: &CnfFormula, var_limit: u32) -> Result<ModelIter, SatError> {
    if formula.num_vars() > var_limit {
        return Err(SatError::EnumerationLimit {
            num_vars: formula.num_vars(),
            limit: var_limit,
        });
    }
    Ok(ModelIter::new(formula))
}

/// Enumerates models through an engine by adding a blocking clause over all
/// variables after each model.
#[derive(Debug)]
pub struct BlockingEnumerator<E> {
    engine: E,
    done: bool,
}

impl<E: SatEngine> Iterator for BlockingEnumerator<E> {
    type Item = Vec<bool>;

    fn next(&mut self) -> Option<Vec<bool>> {
        if self.done {
            return None;
        }
        let outcome = self.engine.solve(&[]).expect("no assumptions");
        let Some(model) = outcome.model else {
            self.done = true;
            return None;
        };
        let block: Vec<Literal> = model
            .iter()
            .enumerate()
            .map(|(slot, &value)| Literal::new(Var::from_slot(slot), !value))
            .collect();
        self.engine.add_clause(&block);
        Some(model)
    }
}

/// Blocking-clause enumeration over the built-in solver.
pub fn enumerate_models_blocking(
    formula: &CnfFormula,
    var_limit: u32,
) -> Result<BlockingEnumerator<CdclSolver>, SatError> {
    if formula.num_vars() > var_limit {
        return Err(SatError::EnumerationLimit {
            num_vars: formula.num_vars(),
            limit: var_limit,
        });
    }
    Ok(BlockingEnumerator {
        engine: CdclSolver::from_formula(formula),
        done: false,
    })
}
