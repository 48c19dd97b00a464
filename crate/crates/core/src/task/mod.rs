//! Hierarchical visualization tasks.
//!
//! A [`Task`] is the structured meaning of one natural-language query:
//! an operation (identify, compare, aggregate, trend, sum) with an output
//! attribute, attribute filters, an optional derivation and, for
//! comparisons, nested identification subtasks.
//!
//! Tasks have a canonical text form (see [`text`]) and a JSON mirror
//! produced by the serde derives in this module.

mod canon;
pub mod text;
mod validate;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

pub use canon::{canonicalize, literally_equal, semantically_equal};
pub use text::{parse_task_text, serialize_task, FormatError, GRAMMAR_EBNF};
pub use validate::{validate, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Color,
    Shape,
    Orientation,
    Position,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Color, Channel::Shape, Channel::Orientation, Channel::Position];

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Color => "color",
            Channel::Shape => "shape",
            Channel::Orientation => "orientation",
            Channel::Position => "position",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// How a query refers to an attribute or a categorical choice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum AttributeRef {
    #[serde(rename = "byName")]
    Name { name: String },
    #[serde(rename = "byChannel")]
    Channel {
        channel: Channel,
        #[serde(rename = "channelValue")]
        value: String,
    },
    #[serde(rename = "mixed")]
    Mixed {
        name: String,
        channel: Channel,
        #[serde(rename = "channelValue")]
        value: String,
    },
}

impl AttributeRef {
    pub fn name(name: impl Into<String>) -> Self {
        AttributeRef::Name { name: name.into() }
    }

    pub fn channel(channel: Channel, value: impl Into<String>) -> Self {
        AttributeRef::Channel {
            channel,
            value: value.into(),
        }
    }

    pub fn mixed(name: impl Into<String>, channel: Channel, value: impl Into<String>) -> Self {
        AttributeRef::Mixed {
            name: name.into(),
            channel,
            value: value.into(),
        }
    }

    pub fn name_part(&self) -> Option<&str> {
        match self {
            AttributeRef::Name { name } | AttributeRef::Mixed { name, .. } => Some(name),
            AttributeRef::Channel { .. } => None,
        }
    }

    pub fn channel_part(&self) -> Option<(Channel, &str)> {
        match self {
            AttributeRef::Name { .. } => None,
            AttributeRef::Channel { channel, value } | AttributeRef::Mixed { channel, value, .. } => {
                Some((*channel, value))
            }
        }
    }

    pub fn is_visual(&self) -> bool {
        self.channel_part().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "in")]
    In,
}

impl FilterOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterOp::Eq => "=",
            FilterOp::Gt => ">",
            FilterOp::Lt => "<",
            FilterOp::In => "in",
        }
    }
}

/// Rank or position direction attached to count-valued filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Top,
    Bottom,
    Left,
    Right,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Top => "top",
            Direction::Bottom => "bottom",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "top" => Some(Direction::Top),
            "bottom" => Some(Direction::Bottom),
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            _ => None,
        }
    }
}

/// A scalar literal kept in its canonical text form.
///
/// The type of a literal (number, timestamp, text) is decided when it is
/// compared against an attribute, so the IR never loses the original
/// spelling of a value such as `2015Q1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Literal(pub String);

/// Lexical interpretation of a [`Literal`].
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Number(f64),
    Time(Timestamp),
    Text(String),
}

impl Literal {
    pub fn text(s: impl Into<String>) -> Self {
        Literal(s.into())
    }

    pub fn number(n: f64) -> Self {
        Literal(format_number(n))
    }

    pub fn time(ts: Timestamp) -> Self {
        Literal(ts.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_number(&self) -> Option<f64> {
        self.0.parse::<f64>().ok().filter(|n| n.is_finite())
    }

    pub fn as_timestamp(&self) -> Option<Timestamp> {
        self.0.parse().ok()
    }

    pub fn as_count(&self) -> Option<u32> {
        self.0.parse::<u32>().ok().filter(|&n| n >= 1)
    }

    pub fn classify(&self) -> Scalar {
        if let Some(n) = self.as_number() {
            Scalar::Number(n)
        } else if let Some(ts) = self.as_timestamp() {
            Scalar::Time(ts)
        } else {
            Scalar::Text(self.0.clone())
        }
    }

    /// Order two literals as numbers, then timestamps, then bytewise text.
    /// Returns `None` when they do not share a scalar type.
    pub fn scalar_cmp(&self, other: &Literal) -> Option<Ordering> {
        if let (Some(a), Some(b)) = (self.as_number(), other.as_number()) {
            return a.partial_cmp(&b);
        }
        if let (Some(a), Some(b)) = (self.as_timestamp(), other.as_timestamp()) {
            return Some(a.chrono_cmp(&b));
        }
        match (self.classify(), other.classify()) {
            (Scalar::Text(a), Scalar::Text(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
            _ => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shortest round-trip decimal form; integral values carry no fraction.
pub fn format_number(n: f64) -> String {
    if n == 0.0 {
        return "0".into();
    }
    format!("{}", n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateFn {
    Max,
    Min,
    Avg,
    Sum,
}

impl AggregateFn {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggregateFn::Max => "max",
            AggregateFn::Min => "min",
            AggregateFn::Avg => "avg",
            AggregateFn::Sum => "sum",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "max" => Some(AggregateFn::Max),
            "min" => Some(AggregateFn::Min),
            "avg" => Some(AggregateFn::Avg),
            "sum" => Some(AggregateFn::Sum),
            _ => None,
        }
    }

    pub fn apply(&self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        Some(match self {
            AggregateFn::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            AggregateFn::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            AggregateFn::Sum => values.iter().sum(),
            AggregateFn::Avg => values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AggregateSpec {
    pub aggregate: AggregateFn,
    pub attribute: AttributeRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterValue {
    Literal(Literal),
    Range(Literal, Literal),
    List(Vec<Literal>),
    Aggregate(AggregateSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Filter {
    pub attr: AttributeRef,
    pub op: FilterOp,
    pub value: FilterValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

impl Filter {
    pub fn eq(attr: AttributeRef, value: impl Into<String>) -> Self {
        Filter {
            attr,
            op: FilterOp::Eq,
            value: FilterValue::Literal(Literal(value.into())),
            direction: None,
        }
    }

    pub fn range(attr: AttributeRef, lo: impl Into<String>, hi: impl Into<String>) -> Self {
        Filter {
            attr,
            op: FilterOp::In,
            value: FilterValue::Range(Literal(lo.into()), Literal(hi.into())),
            direction: None,
        }
    }

    pub fn list(attr: AttributeRef, values: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Filter {
            attr,
            op: FilterOp::Eq,
            value: FilterValue::List(values.into_iter().map(|v| Literal(v.into())).collect()),
            direction: None,
        }
    }

    pub fn aggregate(attr: AttributeRef, op: FilterOp, aggregate: AggregateFn, of: AttributeRef) -> Self {
        Filter {
            attr,
            op,
            value: FilterValue::Aggregate(AggregateSpec {
                aggregate,
                attribute: of,
            }),
            direction: None,
        }
    }

    /// Count filter over a rank or position, e.g. "the largest three".
    pub fn rank(attr: AttributeRef, op: FilterOp, count: u32, direction: Direction) -> Self {
        Filter {
            attr,
            op,
            value: FilterValue::Literal(Literal(count.to_string())),
            direction: Some(direction),
        }
    }

    pub fn is_rank(&self) -> bool {
        self.direction.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeriveKind {
    Rank,
    Difference,
    Sum,
    Trend,
    Growth,
}

impl DeriveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeriveKind::Rank => "rank",
            DeriveKind::Difference => "difference",
            DeriveKind::Sum => "sum",
            DeriveKind::Trend => "trend",
            DeriveKind::Growth => "growth",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "rank" => Some(DeriveKind::Rank),
            "difference" => Some(DeriveKind::Difference),
            "sum" => Some(DeriveKind::Sum),
            "trend" => Some(DeriveKind::Trend),
            "growth" => Some(DeriveKind::Growth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeriveSpec {
    pub kind: DeriveKind,
    pub operands: Vec<AttributeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

impl DeriveSpec {
    pub fn new(kind: DeriveKind, operands: Vec<AttributeRef>) -> Self {
        DeriveSpec {
            kind,
            operands,
            direction: None,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = Some(direction);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Identify,
    Compare,
    Aggregate,
    Trend,
    Sum,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Identify => "identify",
            TaskKind::Compare => "compare",
            TaskKind::Aggregate => "aggregate",
            TaskKind::Trend => "trend",
            TaskKind::Sum => "sum",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "identify" => Some(TaskKind::Identify),
            "compare" => Some(TaskKind::Compare),
            "aggregate" => Some(TaskKind::Aggregate),
            "trend" => Some(TaskKind::Trend),
            "sum" => Some(TaskKind::Sum),
            _ => None,
        }
    }

    pub fn category(&self) -> TaskCategory {
        match self {
            TaskKind::Identify => TaskCategory::Identification,
            TaskKind::Compare => TaskCategory::Comparison,
            TaskKind::Aggregate => TaskCategory::Aggregation,
            TaskKind::Trend | TaskKind::Sum => TaskCategory::Derivation,
        }
    }
}

/// Reporting bucket for dataset statistics and per-category metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskCategory {
    Identification,
    Comparison,
    Aggregation,
    Derivation,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 4] = [
        TaskCategory::Identification,
        TaskCategory::Comparison,
        TaskCategory::Aggregation,
        TaskCategory::Derivation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskCategory::Identification => "identification",
            TaskCategory::Comparison => "comparison",
            TaskCategory::Aggregation => "aggregation",
            TaskCategory::Derivation => "derivation",
        }
    }
}

/// The output of a task: an attribute, or an aggregate for `aggregate` tasks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Aggregate(AggregateSpec),
    Attr(AttributeRef),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Task {
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive: Option<DeriveSpec>,
    #[serde(default)]
    pub subtasks: Vec<Task>,
}

impl Task {
    pub fn new(kind: TaskKind) -> Self {
        Task {
            kind,
            target: None,
            filters: Vec::new(),
            derive: None,
            subtasks: Vec::new(),
        }
    }

    pub fn identify(target: AttributeRef) -> Self {
        Task::new(TaskKind::Identify).with_target(target)
    }

    pub fn with_target(mut self, target: AttributeRef) -> Self {
        self.target = Some(Target::Attr(target));
        self
    }

    pub fn with_aggregate_target(mut self, aggregate: AggregateFn, attribute: AttributeRef) -> Self {
        self.target = Some(Target::Aggregate(AggregateSpec { aggregate, attribute }));
        self
    }

    pub fn with_filter(mut self, filter: Filter) -> Self {
        self.filters.push(filter);
        self
    }

    pub fn with_derive(mut self, derive: DeriveSpec) -> Self {
        self.derive = Some(derive);
        self
    }

    pub fn with_subtask(mut self, task: Task) -> Self {
        self.subtasks.push(task);
        self
    }

    pub fn category(&self) -> TaskCategory {
        self.kind.category()
    }

    pub fn target_attr(&self) -> Option<&AttributeRef> {
        match &self.target {
            Some(Target::Attr(a)) => Some(a),
            Some(Target::Aggregate(a)) => Some(&a.attribute),
            None => None,
        }
    }

    /// Number of filter nodes in the whole tree, subtasks included.
    pub fn filter_count(&self) -> usize {
        self.filters.len() + self.subtasks.iter().map(Task::filter_count).sum::<usize>()
    }

    /// All filters of the tree in depth-first order.
    pub fn all_filters(&self) -> Vec<&Filter> {
        let mut out: Vec<&Filter> = self.filters.iter().collect();
        for sub in &self.subtasks {
            out.extend(sub.all_filters());
        }
        out
    }

    pub fn depth(&self) -> usize {
        1 + self.subtasks.iter().map(Task::depth).max().unwrap_or(0)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_task(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_is_total_over_kinds() {
        let expect = [
            (TaskKind::Identify, TaskCategory::Identification),
            (TaskKind::Compare, TaskCategory::Comparison),
            (TaskKind::Aggregate, TaskCategory::Aggregation),
            (TaskKind::Trend, TaskCategory::Derivation),
            (TaskKind::Sum, TaskCategory::Derivation),
        ];
        for (kind, cat) in expect {
            assert_eq!(kind.category(), cat);
        }
    }

    #[test]
    fn json_mirror_field_names() {
        let t = Task::identify(AttributeRef::name("consumption"))
            .with_filter(Filter::eq(AttributeRef::name("energy"), "coal"))
            .with_filter(Filter::rank(
                AttributeRef::name("population"),
                FilterOp::Lt,
                3,
                Direction::Top,
            ));
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["kind"], "identify");
        assert_eq!(v["target"]["kind"], "byName");
        assert_eq!(v["filters"][0]["attr"]["name"], "energy");
        assert_eq!(v["filters"][0]["op"], "=");
        assert_eq!(v["filters"][0]["value"]["literal"], "coal");
        assert_eq!(v["filters"][1]["direction"], "top");
        assert!(v["subtasks"].as_array().unwrap().is_empty());
        let back: Task = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn aggregate_target_json() {
        let t = Task::new(TaskKind::Aggregate)
            .with_aggregate_target(AggregateFn::Avg, AttributeRef::name("life expectancy"));
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["target"]["aggregate"], "avg");
        let back: Task = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn literal_ordering() {
        let l = |s: &str| Literal::text(s);
        assert_eq!(l("5").scalar_cmp(&l("10")), Some(Ordering::Less));
        assert_eq!(l("2015Q1").scalar_cmp(&l("2016")), Some(Ordering::Less));
        assert_eq!(l("b").scalar_cmp(&l("a")), Some(Ordering::Greater));
        assert_eq!(l("abc").scalar_cmp(&l("3")), None);
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(2.5), "2.5");
    }
}
