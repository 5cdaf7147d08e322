//! Structural checks on execution traces against the program they came from.

use std::collections::HashMap;

use super::ast::*;
use super::interp::{EventKind, ExecTrace, Termination};
use super::typeck;

fn parents(p: &Program) -> HashMap<NodeId, (Option<NodeId>, u8)> {
    fn block(b: &Block, parent: Option<NodeId>, branch: u8, out: &mut HashMap<NodeId, (Option<NodeId>, u8)>) {
        for s in &b.stmts {
            out.insert(s.id, (parent, branch));
            for (i, child) in s.blocks().into_iter().enumerate() {
                block(child, Some(s.id), i as u8, out);
            }
        }
    }
    let mut out = HashMap::new();
    for f in &p.functions {
        block(&f.body, None, 0, &mut out);
    }
    out
}

/// Checks that `trace` could have been produced by running `p`: node ids
/// exist, branch events carry outcomes, defs and uses name visible
/// variables, every event sits under its recorded governing branch, and a
/// runtime error is raised by the last event.
pub fn validate_trace(p: &Program, trace: &ExecTrace) -> Result<(), String> {
    let parent = parents(p);
    let scopes = typeck::scopes(p).ok_or("program does not type-check")?;
    for (i, ev) in trace.events.iter().enumerate() {
        let at = format!("event {i}");
        if ev.step != i {
            return Err(format!("{at}: step {} out of order", ev.step));
        }
        let stmt = p.stmt(ev.node).ok_or(format!("{at}: unknown node"))?;
        let raised = i + 1 == trace.events.len()
            && matches!(trace.termination, Termination::RuntimeError { node, .. } if node == ev.node);
        // a condition whose evaluation never finished has no outcome
        let unfinished = !matches!(trace.termination, Termination::Normal(_))
            && trace.events[i + 1..]
                .iter()
                .all(|e| e.frame != ev.frame || (e.node == ev.node && e.step + 1 == trace.events.len()));
        if (ev.kind == EventKind::Branch) != ev.branch_outcome.is_some() && !(unfinished && ev.branch_outcome.is_none())
        {
            return Err(format!("{at}: branch outcome presence mismatch"));
        }
        if (ev.kind == EventKind::Branch) != stmt.is_condition() {
            return Err(format!("{at}: event kind does not match statement"));
        }
        let frame = trace.frames.get(ev.frame).ok_or(format!("{at}: unknown frame"))?;
        if frame.func != ev.node.func {
            return Err(format!("{at}: frame runs another function"));
        }
        let visible = &scopes[&ev.node];
        let declared = match &stmt.kind {
            StmtKind::Let(n, ..) => Some(n.as_str()),
            _ => None,
        };
        for v in ev.uses.iter().chain(&ev.defs) {
            if !visible.iter().any(|(n, _)| n == v) && declared != Some(v.as_str()) {
                return Err(format!("{at}: variable {v} not in scope"));
            }
        }
        let (par, branch) = parent[&ev.node];
        match (par, ev.control) {
            (None, c) => {
                if c != frame.call_event {
                    return Err(format!("{at}: top-level statement not governed by its call site"));
                }
            }
            (Some(_), None) => return Err(format!("{at}: nested statement without governing branch")),
            (Some(pid), Some(c)) => {
                let g = trace
                    .events
                    .get(c)
                    .filter(|_| c < i)
                    .ok_or(format!("{at}: bad control index"))?;
                let expect = match p.stmt(pid).map(|s| &s.kind) {
                    Some(StmtKind::If(..)) => branch == 0,
                    _ => true,
                };
                if g.node != pid || g.frame != ev.frame || g.branch_outcome != Some(expect) {
                    return Err(format!("{at}: governing branch does not select this block"));
                }
            }
        }
        for &c in &ev.calls {
            // the raising event may repeat links of the evaluation it ends
            let r = trace
                .events
                .get(c)
                .filter(|_| c > i || (raised && c != i))
                .ok_or(format!("{at}: bad call link"))?;
            let is_return = matches!(p.stmt(r.node).map(|s| &s.kind), Some(StmtKind::Return(_)));
            if !is_return || r.frame <= ev.frame {
                return Err(format!("{at}: call link is not a callee return"));
            }
        }
    }
    if let Termination::RuntimeError { node, .. } = &trace.termination {
        if trace.events.last().map(|e| e.node) != Some(*node) {
            return Err("runtime error not raised by the last event".into());
        }
    }
    Ok(())
}
