use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AttributeRef, DeriveKind, DeriveSpec, Filter, FilterOp, FilterValue, Target, Task, TaskKind};

/// One broken invariant, located by a path such as `subtasks[1].filters[0].value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}",
            if self.path.is_empty() { "<root>" } else { &self.path },
            self.rule
        )
    }
}

pub fn validate(task: &Task) -> Vec<Violation> {
    let mut out = Vec::new();
    check_task(task, "", &mut out);
    out
}

fn join(base: &str, child: &str) -> String {
    if base.is_empty() {
        child.to_string()
    } else {
        format!("{base}.{child}")
    }
}

fn push(out: &mut Vec<Violation>, path: String, rule: &str) {
    out.push(Violation {
        path,
        rule: rule.to_string(),
    });
}

fn check_attr(a: &AttributeRef, path: String, out: &mut Vec<Violation>) {
    if a.name_part().is_some_and(|n| n.trim().is_empty()) {
        push(out, path.clone(), "attribute name must be nonempty");
    }
    if a.channel_part().is_some_and(|(_, v)| v.trim().is_empty()) {
        push(out, path, "channel value must be nonempty");
    }
}

fn check_task(t: &Task, path: &str, out: &mut Vec<Violation>) {
    match t.kind {
        TaskKind::Compare => {
            if t.subtasks.len() < 2 {
                push(out, join(path, "subtasks"), "compare requires ≥2 subtasks");
            }
            for (i, s) in t.subtasks.iter().enumerate() {
                if s.kind != TaskKind::Identify {
                    push(
                        out,
                        join(path, &format!("subtasks[{i}].kind")),
                        "compare subtasks must be identify",
                    );
                }
            }
        }
        _ if !t.subtasks.is_empty() => {
            push(out, join(path, "subtasks"), "only compare tasks may have subtasks");
        }
        _ => {}
    }
    match (&t.target, t.kind) {
        (Some(Target::Aggregate(agg)), TaskKind::Aggregate) => {
            check_attr(&agg.attribute, join(path, "target.attribute"), out)
        }
        (_, TaskKind::Aggregate) => push(out, join(path, "target"), "aggregate task requires an aggregate target"),
        (Some(Target::Aggregate(_)), _) => push(
            out,
            join(path, "target"),
            "aggregate target only allowed on aggregate tasks",
        ),
        (Some(Target::Attr(a)), _) => check_attr(a, join(path, "target"), out),
        (None, _) => {}
    }
    for (i, f) in t.filters.iter().enumerate() {
        check_filter(f, &join(path, &format!("filters[{i}]")), out);
    }
    if let Some(d) = &t.derive {
        check_derive(d, &join(path, "derive"), out);
    }
    for (i, s) in t.subtasks.iter().enumerate() {
        check_task(s, &join(path, &format!("subtasks[{i}]")), out);
    }
}

fn check_filter(f: &Filter, path: &str, out: &mut Vec<Violation>) {
    check_attr(&f.attr, join(path, "attr"), out);
    let vpath = join(path, "value");
    match &f.value {
        FilterValue::Literal(l) => {
            if l.as_str().is_empty() {
                push(out, vpath.clone(), "literal must be nonempty");
            }
            if f.op == FilterOp::In {
                push(out, join(path, "op"), "`in` requires a range value");
            }
        }
        FilterValue::Range(lo, hi) => {
            if f.op != FilterOp::In {
                push(out, join(path, "op"), "range value requires `in`");
            }
            match lo.scalar_cmp(hi) {
                Some(Ordering::Greater) => push(out, vpath.clone(), "range requires lo ≤ hi"),
                None => push(out, vpath.clone(), "range bounds must share a scalar type"),
                _ => {}
            }
        }
        FilterValue::List(items) => {
            if items.is_empty() {
                push(out, vpath.clone(), "list must be nonempty");
            }
            if f.op != FilterOp::Eq {
                push(out, join(path, "op"), "list value requires `=`");
            }
        }
        FilterValue::Aggregate(agg) => {
            if f.op == FilterOp::In {
                push(out, join(path, "op"), "aggregate value only allowed under =, >, <");
            }
            check_attr(&agg.attribute, join(&vpath, "attribute"), out);
        }
    }
    if f.direction.is_some() {
        let is_count = matches!(&f.value, FilterValue::Literal(l) if l.as_count().is_some());
        if !is_count || f.op == FilterOp::In {
            push(
                out,
                join(path, "direction"),
                "direction requires a positive rank count value",
            );
        }
    }
    if f.attr.is_visual() && !(f.op == FilterOp::Eq && matches!(f.value, FilterValue::Literal(_))) {
        push(out, join(path, "attr"), "visual referent filters must be `=` a literal");
    }
}

fn check_derive(d: &DeriveSpec, path: &str, out: &mut Vec<Violation>) {
    let n = d.operands.len();
    let ok = match d.kind {
        DeriveKind::Difference => n == 2,
        DeriveKind::Sum => n >= 2,
        DeriveKind::Rank | DeriveKind::Trend | DeriveKind::Growth => n == 1,
    };
    if !ok {
        let rule = match d.kind {
            DeriveKind::Difference => "difference requires exactly 2 operands",
            DeriveKind::Sum => "sum requires ≥2 operands",
            _ => "derivation requires exactly 1 operand",
        };
        push(out, join(path, "operands"), rule);
    }
    if d.direction.is_some() && d.kind != DeriveKind::Rank {
        push(out, join(path, "direction"), "only rank derivations take a direction");
    }
    for (i, a) in d.operands.iter().enumerate() {
        check_attr(a, join(path, &format!("operands[{i}]")), out);
    }
}
