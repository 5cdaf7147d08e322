//! Deterministic big-step interpreter with optional execution tracing,
//! coverage collection, condition overrides and condition snapshots.
//!
//! Every executed statement is one step of fuel; a `while` consumes one step
//! per condition evaluation. Runtime errors never escape as Rust errors: they
//! end the run with [`Termination::RuntimeError`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::value::Value;
use crate::error::CallError;

pub const DEFAULT_FUEL: u64 = 100_000;

/// Native recursion guard; exceeding it ends the run as fuel exhaustion.
const MAX_CALL_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorKind {
    DivByZero,
    IndexOutOfBounds,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuntimeError {
    DivByZero,
    IndexOutOfBounds,
    Abort(String),
}

impl RuntimeError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            RuntimeError::DivByZero => ErrorKind::DivByZero,
            RuntimeError::IndexOutOfBounds => ErrorKind::IndexOutOfBounds,
            RuntimeError::Abort(_) => ErrorKind::Abort,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Termination {
    Normal(Value),
    RuntimeError { error: RuntimeError, node: NodeId },
    FuelExhausted,
}

/// A function invocation with concrete arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Call {
    #[serde(rename = "fn")]
    pub function: String,
    pub args: Vec<Value>,
}

impl Call {
    pub fn new(function: impl Into<String>, args: Vec<Value>) -> Self {
        Self {
            function: function.into(),
            args,
        }
    }
}

impl std::fmt::Display for Call {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}(", self.function)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Stmt,
    Branch,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub step: usize,
    pub node: NodeId,
    pub kind: EventKind,
    pub defs: Vec<String>,
    pub uses: Vec<String>,
    /// Outcome taken; present iff `kind == Branch`.
    pub branch_outcome: Option<bool>,
    /// Unforced evaluation of the condition (differs from `branch_outcome`
    /// only under an override).
    pub real_outcome: Option<bool>,
    pub frame: usize,
    /// Governing branch event, or the call-site event for top-level
    /// statements of a callee.
    pub control: Option<usize>,
    /// Return events of calls whose results this event consumed.
    pub calls: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameInfo {
    pub func: u32,
    pub call_event: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExecTrace {
    pub events: Vec<TraceEvent>,
    pub frames: Vec<FrameInfo>,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OverridePolicy {
    Uniform(bool),
    /// Forced outcomes for the first occurrences; later occurrences evaluate
    /// normally.
    PerOccurrence(Vec<bool>),
}

/// Forced outcomes for condition statements (`if`/`while`), keyed by node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ConditionOverrideSchedule {
    pub policies: BTreeMap<NodeId, OverridePolicy>,
}

impl ConditionOverrideSchedule {
    pub fn single(node: NodeId, policy: OverridePolicy) -> Self {
        let mut policies = BTreeMap::new();
        policies.insert(node, policy);
        Self { policies }
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    /// Checks that every key names an `if`/`while` in `program`.
    pub fn validate(&self, program: &Program) -> Result<(), CallError> {
        for id in self.policies.keys() {
            match program.stmt(*id) {
                Some(s) if s.is_condition() => {}
                _ => return Err(CallError::NotACondition(format!("{}#{}", id.func, id.index))),
            }
        }
        Ok(())
    }

    fn forced(&self, node: NodeId, occurrence: usize) -> Option<bool> {
        match self.policies.get(&node)? {
            OverridePolicy::Uniform(b) => Some(*b),
            OverridePolicy::PerOccurrence(seq) => seq.get(occurrence).copied(),
        }
    }
}

/// Environment and outcome at one evaluation of a watched condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondSnapshot {
    pub occurrence: usize,
    pub env: Vec<(String, Value)>,
    pub taken: bool,
    pub real: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceLevel {
    #[default]
    None,
    Coverage,
    Full,
}

#[derive(Debug, Clone, Default)]
pub struct ExecOptions<'a> {
    pub fuel: u64,
    pub trace: TraceLevel,
    pub overrides: Option<&'a ConditionOverrideSchedule>,
    pub capture_at: Option<NodeId>,
}

impl<'a> ExecOptions<'a> {
    pub fn new(fuel: u64) -> Self {
        Self {
            fuel,
            ..Default::default()
        }
    }

    pub fn traced(fuel: u64) -> Self {
        Self {
            fuel,
            trace: TraceLevel::Full,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecOutcome {
    pub termination: Termination,
    pub trace: Option<ExecTrace>,
    pub coverage: BTreeSet<NodeId>,
    pub snapshots: Vec<CondSnapshot>,
    pub steps: u64,
}

enum Stop {
    Error(RuntimeError, NodeId),
    Fuel,
}

enum Flow {
    Next,
    Return(Value, Option<usize>),
}

struct Frame {
    id: usize,
    vars: Vec<(String, Value)>,
    cur_event: Option<usize>,
    cur_stmt: NodeId,
}

impl Frame {
    fn get(&self, name: &str) -> &Value {
        &self
            .vars
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .expect("type checker guarantees declared variables")
            .1
    }

    fn get_mut(&mut self, name: &str) -> &mut Value {
        &mut self
            .vars
            .iter_mut()
            .rev()
            .find(|(n, _)| n == name)
            .expect("type checker guarantees declared variables")
            .1
    }
}

struct Interp<'p, 'o> {
    program: &'p Program,
    fuel: u64,
    steps: u64,
    level: TraceLevel,
    events: Vec<TraceEvent>,
    frames: Vec<FrameInfo>,
    coverage: BTreeSet<NodeId>,
    overrides: Option<&'o ConditionOverrideSchedule>,
    occurrences: HashMap<NodeId, usize>,
    capture_at: Option<NodeId>,
    snapshots: Vec<CondSnapshot>,
    depth: usize,
}

impl<'p, 'o> Interp<'p, 'o> {
    fn tracing(&self) -> bool {
        self.level == TraceLevel::Full
    }

    fn tick(&mut self) -> Result<(), Stop> {
        if self.steps >= self.fuel {
            return Err(Stop::Fuel);
        }
        self.steps += 1;
        Ok(())
    }

    fn enter(&mut self, f: &mut Frame, s: &Stmt, kind: EventKind, control: Option<usize>) -> Result<(), Stop> {
        self.tick()?;
        if self.level != TraceLevel::None {
            self.coverage.insert(s.id);
        }
        f.cur_stmt = s.id;
        if self.tracing() {
            let step = self.events.len();
            self.events.push(TraceEvent {
                step,
                node: s.id,
                kind,
                defs: Vec::new(),
                uses: Vec::new(),
                branch_outcome: None,
                real_outcome: None,
                frame: f.id,
                control,
                calls: Vec::new(),
            });
            f.cur_event = Some(step);
        }
        Ok(())
    }

    fn record_use(&mut self, f: &Frame, name: &str) {
        if let Some(ev) = f.cur_event {
            let uses = &mut self.events[ev].uses;
            if !uses.iter().any(|u| u == name) {
                uses.push(name.to_string());
            }
        }
    }

    fn record_def(&mut self, f: &Frame, name: &str) {
        if let Some(ev) = f.cur_event {
            self.events[ev].defs.push(name.to_string());
        }
    }

    fn fail(&mut self, f: &Frame, error: RuntimeError) -> Stop {
        // keep the failing statement as the last event even when a nested
        // call ran after it started
        if self.tracing() {
            if let Some(ev) = f.cur_event {
                if self.events.last().map(|e| e.node) != Some(f.cur_stmt) {
                    let src = &self.events[ev];
                    let step = self.events.len();
                    let ghost = TraceEvent {
                        step,
                        node: src.node,
                        kind: src.kind,
                        defs: Vec::new(),
                        uses: src.uses.clone(),
                        branch_outcome: None,
                        real_outcome: None,
                        frame: src.frame,
                        control: src.control,
                        calls: src.calls.clone(),
                    };
                    self.events.push(ghost);
                }
            }
        }
        Stop::Error(error, f.cur_stmt)
    }

    fn call(
        &mut self,
        func_idx: usize,
        args: Vec<Value>,
        call_event: Option<usize>,
    ) -> Result<(Value, Option<usize>), Stop> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Stop::Fuel);
        }
        let func = &self.program.functions[func_idx];
        let id = self.frames.len();
        self.frames.push(FrameInfo {
            func: func_idx as u32,
            call_event,
        });
        let mut frame = Frame {
            id,
            vars: func.params.iter().map(|p| p.name.clone()).zip(args).collect(),
            cur_event: None,
            cur_stmt: NodeId::new(func_idx as u32, 0),
        };
        self.depth += 1;
        let flow = self.block(&mut frame, &func.body, call_event);
        self.depth -= 1;
        match flow? {
            Flow::Return(v, ev) => Ok((v, ev)),
            Flow::Next => Ok((Value::UNIT, None)),
        }
    }

    fn block(&mut self, f: &mut Frame, b: &'p Block, control: Option<usize>) -> Result<Flow, Stop> {
        let mark = f.vars.len();
        let mut flow = Flow::Next;
        for s in &b.stmts {
            flow = self.stmt(f, s, control)?;
            if matches!(flow, Flow::Return(..)) {
                break;
            }
        }
        f.vars.truncate(mark);
        Ok(flow)
    }

    /// Evaluates a forced condition for its real outcome, then rolls back
    /// everything the evaluation recorded or consumed.
    fn speculate(&mut self, f: &mut Frame, cond: &Expr) -> Option<bool> {
        let (events, frames, steps, snapshots) =
            (self.events.len(), self.frames.len(), self.steps, self.snapshots.len());
        let coverage = (self.level != TraceLevel::None).then(|| self.coverage.clone());
        let occurrences = self.occurrences.clone();
        let real = self.eval(f, cond).ok().and_then(|v| v.as_bool());
        if let Some(ev) = f.cur_event {
            // keep the reads of the condition itself, drop callee links
            self.events[ev].calls.retain(|&c| c < events);
        }
        self.events.truncate(events);
        self.frames.truncate(frames);
        self.steps = steps;
        self.snapshots.truncate(snapshots);
        if let Some(c) = coverage {
            self.coverage = c;
        }
        self.occurrences = occurrences;
        real
    }

    fn condition(&mut self, f: &mut Frame, s: &Stmt, cond: &Expr) -> Result<bool, Stop> {
        let occurrence = {
            let n = self.occurrences.entry(s.id).or_insert(0);
            *n += 1;
            *n - 1
        };
        let forced = self.overrides.and_then(|o| o.forced(s.id, occurrence));
        let (taken, real) = match forced {
            None => {
                let b = self.eval(f, cond)?.as_bool().unwrap_or(false);
                (b, Some(b))
            }
            Some(b) => (b, self.speculate(f, cond)),
        };
        if self.capture_at == Some(s.id) {
            self.snapshots.push(CondSnapshot {
                occurrence,
                env: f.vars.clone(),
                taken,
                real,
            });
        }
        if let (true, Some(ev)) = (self.tracing(), f.cur_event) {
            self.events[ev].branch_outcome = Some(taken);
            self.events[ev].real_outcome = real;
        }
        Ok(taken)
    }

    fn stmt(&mut self, f: &mut Frame, s: &'p Stmt, control: Option<usize>) -> Result<Flow, Stop> {
        match &s.kind {
            StmtKind::Let(name, _, e) => {
                self.enter(f, s, EventKind::Stmt, control)?;
                let v = self.eval(f, e)?;
                self.record_def(f, name);
                f.vars.push((name.clone(), v));
            }
            StmtKind::Assign(LValue::Var(name), e) => {
                self.enter(f, s, EventKind::Stmt, control)?;
                let v = self.eval(f, e)?;
                self.record_def(f, name);
                *f.get_mut(name) = v;
            }
            StmtKind::Assign(LValue::Index(name, idx), e) => {
                self.enter(f, s, EventKind::Stmt, control)?;
                let i = self.eval(f, idx)?.as_int().unwrap_or(0);
                let v = self.eval(f, e)?.as_int().unwrap_or(0);
                self.record_use(f, name);
                let len = match f.get(name) {
                    Value::IntArray(items) => items.len(),
                    _ => 0,
                };
                if i < 0 || i as usize >= len {
                    return Err(self.fail(f, RuntimeError::IndexOutOfBounds));
                }
                self.record_def(f, name);
                if let Value::IntArray(items) = f.get_mut(name) {
                    items[i as usize] = v;
                }
            }
            StmtKind::If(c, then, els) => {
                self.enter(f, s, EventKind::Branch, control)?;
                let ev = f.cur_event;
                let taken = self.condition(f, s, c)?;
                let flow = if taken {
                    self.block(f, then, ev)?
                } else if let Some(els) = els {
                    self.block(f, els, ev)?
                } else {
                    Flow::Next
                };
                return Ok(flow);
            }
            StmtKind::While(c, body) => loop {
                self.enter(f, s, EventKind::Branch, control)?;
                let ev = f.cur_event;
                if !self.condition(f, s, c)? {
                    return Ok(Flow::Next);
                }
                if let Flow::Return(v, r) = self.block(f, body, ev)? {
                    return Ok(Flow::Return(v, r));
                }
            },
            StmtKind::Return(e) => {
                self.enter(f, s, EventKind::Stmt, control)?;
                let v = match e {
                    Some(e) => self.eval(f, e)?,
                    None => Value::UNIT,
                };
                return Ok(Flow::Return(v, f.cur_event));
            }
            StmtKind::Abort(msg) => {
                self.enter(f, s, EventKind::Stmt, control)?;
                return Err(self.fail(f, RuntimeError::Abort(msg.clone())));
            }
            StmtKind::Expr(e) => {
                self.enter(f, s, EventKind::Stmt, control)?;
                self.eval(f, e)?;
            }
        }
        Ok(Flow::Next)
    }

    fn eval(&mut self, f: &mut Frame, e: &Expr) -> Result<Value, Stop> {
        Ok(match e {
            Expr::Int(v) => Value::Int(*v),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(f, item)?.as_int().unwrap_or(0));
                }
                Value::IntArray(out)
            }
            Expr::Var(n) => {
                self.record_use(f, n);
                f.get(n).clone()
            }
            Expr::Index(n, idx) => {
                let i = self.eval(f, idx)?.as_int().unwrap_or(0);
                self.record_use(f, n);
                match f.get(n) {
                    Value::IntArray(items) if i >= 0 && (i as usize) < items.len() => Value::Int(items[i as usize]),
                    _ => return Err(self.fail(f, RuntimeError::IndexOutOfBounds)),
                }
            }
            Expr::Len(inner) => match self.eval(f, inner)? {
                Value::IntArray(items) => Value::Int(items.len() as i64),
                _ => Value::Int(0),
            },
            Expr::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(f, a)?);
                }
                let idx = self
                    .program
                    .function_index(name)
                    .expect("type checker guarantees defined functions");
                let (v, ret_event) = self.call(idx, vals, f.cur_event)?;
                if let (Some(ev), Some(r)) = (f.cur_event, ret_event) {
                    self.events[ev].calls.push(r);
                }
                v
            }
            Expr::Unary(UnOp::Not, inner) => Value::Bool(!self.eval(f, inner)?.as_bool().unwrap_or(false)),
            Expr::Unary(UnOp::Neg, inner) => Value::Int(self.eval(f, inner)?.as_int().unwrap_or(0).wrapping_neg()),
            Expr::Binary(BinOp::And, l, r) => {
                let lv = self.eval(f, l)?.as_bool().unwrap_or(false);
                Value::Bool(lv && self.eval(f, r)?.as_bool().unwrap_or(false))
            }
            Expr::Binary(BinOp::Or, l, r) => {
                let lv = self.eval(f, l)?.as_bool().unwrap_or(false);
                Value::Bool(lv || self.eval(f, r)?.as_bool().unwrap_or(false))
            }
            Expr::Binary(op, l, r) => {
                let lv = self.eval(f, l)?;
                let rv = self.eval(f, r)?;
                match op {
                    BinOp::Eq => Value::Bool(lv == rv),
                    BinOp::Ne => Value::Bool(lv != rv),
                    _ => {
                        let (a, b) = (lv.as_int().unwrap_or(0), rv.as_int().unwrap_or(0));
                        match op {
                            BinOp::Add => Value::Int(a.wrapping_add(b)),
                            BinOp::Sub => Value::Int(a.wrapping_sub(b)),
                            BinOp::Mul => Value::Int(a.wrapping_mul(b)),
                            BinOp::Div | BinOp::Rem if b == 0 => return Err(self.fail(f, RuntimeError::DivByZero)),
                            BinOp::Div => Value::Int(a.wrapping_div(b)),
                            BinOp::Rem => Value::Int(a.wrapping_rem(b)),
                            BinOp::Lt => Value::Bool(a < b),
                            BinOp::Le => Value::Bool(a <= b),
                            BinOp::Gt => Value::Bool(a > b),
                            BinOp::Ge => Value::Bool(a >= b),
                            BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or => unreachable!(),
                        }
                    }
                }
            }
        })
    }
}

/// Checks that `call` names an existing function with matching argument types.
pub fn check_call(program: &Program, call: &Call) -> Result<usize, CallError> {
    let idx = program
        .function_index(&call.function)
        .ok_or_else(|| CallError::UnknownFunction(call.function.clone()))?;
    let func = &program.functions[idx];
    if func.params.len() != call.args.len() {
        return Err(CallError::Arity {
            function: call.function.clone(),
            expected: func.params.len(),
            found: call.args.len(),
        });
    }
    for (p, a) in func.params.iter().zip(&call.args) {
        if p.ty != a.ty() {
            return Err(CallError::ArgumentType {
                function: call.function.clone(),
                param: p.name.clone(),
                expected: p.ty,
                found: a.ty(),
            });
        }
    }
    Ok(idx)
}

/// Runs `call` under the given options.
pub fn run(program: &Program, call: &Call, opts: &ExecOptions<'_>) -> Result<ExecOutcome, CallError> {
    let idx = check_call(program, call)?;
    if opts.fuel == 0 {
        return Err(CallError::ZeroFuel);
    }
    if let Some(o) = opts.overrides {
        o.validate(program)?;
    }
    let mut it = Interp {
        program,
        fuel: opts.fuel,
        steps: 0,
        level: opts.trace,
        events: Vec::new(),
        frames: Vec::new(),
        coverage: BTreeSet::new(),
        overrides: opts.overrides.filter(|o| !o.is_empty()),
        occurrences: HashMap::new(),
        capture_at: opts.capture_at,
        snapshots: Vec::new(),
        depth: 0,
    };
    let termination = match it.call(idx, call.args.clone(), None) {
        Ok((v, _)) => Termination::Normal(v),
        Err(Stop::Error(error, node)) => Termination::RuntimeError { error, node },
        Err(Stop::Fuel) => Termination::FuelExhausted,
    };
    let trace = (opts.trace == TraceLevel::Full).then(|| ExecTrace {
        events: std::mem::take(&mut it.events),
        frames: std::mem::take(&mut it.frames),
        termination: termination.clone(),
    });
    Ok(ExecOutcome {
        termination,
        trace,
        coverage: it.coverage,
        snapshots: it.snapshots,
        steps: it.steps,
    })
}

/// Executes `call` with full tracing.
pub fn execute(program: &Program, call: &Call, fuel: u64) -> Result<(Termination, ExecTrace), CallError> {
    let out = run(program, call, &ExecOptions::traced(fuel))?;
    Ok((out.termination, out.trace.expect("full trace requested")))
}

/// Executes `call` with full tracing, forcing condition outcomes per `schedule`.
pub fn execute_with_overrides(
    program: &Program,
    call: &Call,
    schedule: &ConditionOverrideSchedule,
    fuel: u64,
) -> Result<(Termination, ExecTrace), CallError> {
    let opts = ExecOptions {
        fuel,
        trace: TraceLevel::Full,
        overrides: Some(schedule),
        capture_at: None,
    };
    let out = run(program, call, &opts)?;
    Ok((out.termination, out.trace.expect("full trace requested")))
}

/// Runs without tracing; the fast path used by test execution.
pub fn evaluate(program: &Program, call: &Call, fuel: u64) -> Result<Termination, CallError> {
    Ok(run(program, call, &ExecOptions::new(fuel))?.termination)
}
