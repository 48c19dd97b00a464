use super::text::{attr_to_string, filter_to_string};
use super::{serialize_task, DeriveKind, FilterValue, Task};
use crate::chart::{resolve_task_refs, ChartError, ChartSpec};

/// Sort every order-insensitive collection of the tree by its serialized
/// form (bytewise): filters, list values, subtasks, and the operands of
/// commutative derivations. Difference operands keep their order.
pub fn canonicalize(task: &Task) -> Task {
    let mut t = task.clone();
    canonicalize_in_place(&mut t);
    t
}

fn canonicalize_in_place(t: &mut Task) {
    for sub in &mut t.subtasks {
        canonicalize_in_place(sub);
    }
    for f in &mut t.filters {
        if let FilterValue::List(items) = &mut f.value {
            items.sort();
        }
    }
    t.filters.sort_by_cached_key(filter_to_string);
    if let Some(d) = &mut t.derive {
        if d.kind == DeriveKind::Sum {
            d.operands.sort_by_cached_key(attr_to_string);
        }
    }
    t.subtasks.sort_by_cached_key(serialize_task);
}

pub fn literally_equal(a: &Task, b: &Task) -> bool {
    serialize_task(&canonicalize(a)) == serialize_task(&canonicalize(b))
}

/// Equality after replacing visual-channel references by the data they are
/// bound to in `ctx`.
pub fn semantically_equal(a: &Task, b: &Task, ctx: &ChartSpec) -> Result<bool, ChartError> {
    if literally_equal(a, b) {
        return Ok(true);
    }
    let ra = resolve_task_refs(a, ctx)?;
    let rb = resolve_task_refs(b, ctx)?;
    Ok(literally_equal(&ra, &rb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{parse_task_text, AttributeRef, Filter};

    fn p(s: &str) -> Task {
        parse_task_text(s).unwrap()
    }

    #[test]
    fn sorts_filters_alphabetically() {
        let t = p("(identify consumption; filter: time = 2022, energy = coal)");
        assert_eq!(
            serialize_task(&canonicalize(&t)),
            "(identify consumption; filter: energy = coal, time = 2022)"
        );
    }

    #[test]
    fn idempotent_on_canonical_input() {
        let t = p("(identify consumption; filter: energy = coal, time = 2022)");
        assert_eq!(canonicalize(&t), t);
        assert_eq!(canonicalize(&canonicalize(&t)), canonicalize(&t));
    }

    #[test]
    fn subtasks_ordered_by_serialized_form() {
        let a = "(identify price; filter: fruit = oranges)";
        let b = "(identify price; filter: fruit = apples)";
        let t = p(&format!("(compare price; sub: {a}, {b})"));
        let mut expect = vec![a.to_string(), b.to_string()];
        expect.sort();
        let got: Vec<String> = canonicalize(&t).subtasks.iter().map(serialize_task).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn list_values_and_sum_operands_sorted_but_difference_kept() {
        let t = p("(sum x; filter: c = {b, a}; derive: sum(z, y))");
        assert_eq!(
            serialize_task(&canonicalize(&t)),
            "(sum x; filter: c = {a, b}; derive: sum(y, z))"
        );
        let d = p("(compare x; derive: difference(z, y); sub: (identify x), (identify x))");
        assert_eq!(canonicalize(&d).derive, d.derive);
    }

    #[test]
    fn literal_equality() {
        let a = p("(identify consumption; filter: energy = coal, time = 2022)");
        let b = p("(identify consumption; filter: time = 2022, energy = coal)");
        assert!(literally_equal(&a, &b));
        assert!(literally_equal(&a, &a));
        let c = Task::identify(AttributeRef::name("consumption"))
            .with_filter(Filter::eq(AttributeRef::name("energy"), "gas"))
            .with_filter(Filter::eq(AttributeRef::name("time"), "2022"));
        assert!(!literally_equal(&a, &c));
    }
}
