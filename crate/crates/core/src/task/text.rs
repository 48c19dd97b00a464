//! Canonical text form of tasks.
//!
//! ```text
//! task      = "(" kind [ " " target ] { "; " clause } ")" ;
//! kind      = "identify" | "compare" | "aggregate" | "trend" | "sum" ;
//! target    = attrref | agg ;
//! clause    = "filter: " filter { ", " filter }
//!           | "derive: " derive
//!           | "sub: " task { ", " task } ;
//! filter    = attrref " " op " " value [ " @" direction ] ;
//! op        = "=" | ">" | "<" | "in" ;
//! value     = literal | "[" literal ", " literal "]"
//!           | "{" literal { ", " literal } "}" | agg ;
//! agg       = ("max" | "min" | "avg" | "sum") "(" attrref ")" ;
//! derive    = dkind "(" attrref { ", " attrref } ")" [ " @" direction ] ;
//! dkind     = "rank" | "difference" | "sum" | "trend" | "growth" ;
//! attrref   = word | channel | word "|" channel ;
//! channel   = ("color" | "shape" | "orientation" | "position") ":" word ;
//! direction = "top" | "bottom" | "left" | "right" ;
//! word      = bare | '"' { char | '\"' | '\\' } '"' ;
//! ```
//!
//! A bare word is any run of characters outside `()[]{},;|@:"=<>\` that does
//! not contain the token `in`; anything else is written quoted. The parser
//! accepts arbitrary whitespace between tokens; the serializer always emits
//! the single-space form above.

use std::fmt::Write as _;

use super::{
    validate, AggregateFn, AggregateSpec, AttributeRef, Channel, DeriveKind, DeriveSpec, Direction, Filter, FilterOp,
    FilterValue, Literal, Target, Task, TaskKind, Violation,
};

/// The task grammar in EBNF, as given to remote translator backends.
pub const GRAMMAR_EBNF: &str = r#"task      = "(" kind [ " " target ] { "; " clause } ")" ;
kind      = "identify" | "compare" | "aggregate" | "trend" | "sum" ;
target    = attrref | agg ;
clause    = "filter: " filter { ", " filter }
          | "derive: " derive
          | "sub: " task { ", " task } ;
filter    = attrref " " op " " value [ " @" direction ] ;
op        = "=" | ">" | "<" | "in" ;
value     = literal | "[" literal ", " literal "]"
          | "{" literal { ", " literal } "}" | agg ;
agg       = ("max" | "min" | "avg" | "sum") "(" attrref ")" ;
derive    = dkind "(" attrref { ", " attrref } ")" [ " @" direction ] ;
dkind     = "rank" | "difference" | "sum" | "trend" | "growth" ;
attrref   = word | channel | word "|" channel ;
channel   = ("color" | "shape" | "orientation" | "position") ":" word ;
direction = "top" | "bottom" | "left" | "right" ;
word      = bare | '"' { char | '\"' | '\\' } '"' ;
"#;

const RESERVED: &[char] = &[
    '(', ')', '[', ']', '{', '}', ',', ';', '|', '@', ':', '"', '=', '<', '>', '\\',
];
const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("task violates {} invariant(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

pub fn serialize_task(task: &Task) -> String {
    let mut out = String::new();
    write_task(&mut out, task);
    out
}

/// Parse and validate a task, returning its canonical form.
pub fn parse_task_text(text: &str) -> Result<Task, FormatError> {
    let mut p = Parser {
        src: text,
        pos: 0,
        depth: 0,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error("empty input"));
    }
    let task = p.task()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("trailing characters after task"));
    }
    let violations = validate(&task);
    if violations.is_empty() {
        Ok(super::canonicalize(&task))
    } else {
        Err(FormatError::Invalid(violations))
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

pub(crate) fn needs_quote(s: &str) -> bool {
    s.is_empty()
        || s.trim() != s
        || s.contains(RESERVED)
        || s.contains("  ")
        || s.chars().any(|c| c.is_whitespace() && c != ' ' || c.is_control())
        || s.split(' ').any(|tok| tok == "in")
}

pub(crate) fn write_word(out: &mut String, s: &str) {
    if needs_quote(s) {
        out.push('"');
        for c in s.chars() {
            if c == '"' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('"');
    } else {
        out.push_str(s);
    }
}

pub(crate) fn write_attr(out: &mut String, attr: &AttributeRef) {
    match attr {
        AttributeRef::Name { name } => write_word(out, name),
        AttributeRef::Channel { channel, value } => {
            out.push_str(channel.as_str());
            out.push(':');
            write_word(out, value);
        }
        AttributeRef::Mixed { name, channel, value } => {
            write_word(out, name);
            out.push('|');
            out.push_str(channel.as_str());
            out.push(':');
            write_word(out, value);
        }
    }
}

fn write_agg(out: &mut String, agg: &AggregateSpec) {
    out.push_str(agg.aggregate.as_str());
    out.push('(');
    write_attr(out, &agg.attribute);
    out.push(')');
}

fn write_value(out: &mut String, value: &FilterValue) {
    match value {
        FilterValue::Literal(l) => write_word(out, l.as_str()),
        FilterValue::Range(lo, hi) => {
            out.push('[');
            write_word(out, lo.as_str());
            out.push_str(", ");
            write_word(out, hi.as_str());
            out.push(']');
        }
        FilterValue::List(items) => {
            out.push('{');
            for (i, l) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_word(out, l.as_str());
            }
            out.push('}');
        }
        FilterValue::Aggregate(agg) => write_agg(out, agg),
    }
}

pub(crate) fn write_filter(out: &mut String, f: &Filter) {
    write_attr(out, &f.attr);
    let _ = write!(out, " {} ", f.op.as_str());
    write_value(out, &f.value);
    if let Some(d) = f.direction {
        let _ = write!(out, " @{}", d.as_str());
    }
}

pub(crate) fn filter_to_string(f: &Filter) -> String {
    let mut s = String::new();
    write_filter(&mut s, f);
    s
}

pub(crate) fn attr_to_string(a: &AttributeRef) -> String {
    let mut s = String::new();
    write_attr(&mut s, a);
    s
}

fn write_derive(out: &mut String, d: &DeriveSpec) {
    out.push_str(d.kind.as_str());
    out.push('(');
    for (i, op) in d.operands.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_attr(out, op);
    }
    out.push(')');
    if let Some(dir) = d.direction {
        let _ = write!(out, " @{}", dir.as_str());
    }
}

fn write_task(out: &mut String, task: &Task) {
    out.push('(');
    out.push_str(task.kind.as_str());
    match &task.target {
        Some(Target::Attr(a)) => {
            out.push(' ');
            write_attr(out, a);
        }
        Some(Target::Aggregate(agg)) => {
            out.push(' ');
            write_agg(out, agg);
        }
        None => {}
    }
    if !task.filters.is_empty() {
        out.push_str("; filter: ");
        for (i, f) in task.filters.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_filter(out, f);
        }
    }
    if let Some(d) = &task.derive {
        out.push_str("; derive: ");
        write_derive(out, d);
    }
    if !task.subtasks.is_empty() {
        out.push_str("; sub: ");
        for (i, s) in task.subtasks.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_task(out, s);
        }
    }
    out.push(')');
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, FormatError>;

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> FormatError {
        FormatError::Syntax {
            pos: self.pos,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> PResult<()> {
        if self.eat(c) {
            Ok(())
        } else if self.at_end() {
            Err(self.error(format!("unexpected end of input, expected `{c}`")))
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    /// Lowercase ASCII identifier at the cursor, without consuming it.
    fn peek_ident(&self) -> &'a str {
        let rest = self.rest();
        let end = rest.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(rest.len());
        &rest[..end]
    }

    fn ident(&mut self) -> &'a str {
        self.skip_ws();
        let id = self.peek_ident();
        self.pos += id.len();
        id
    }

    fn word(&mut self) -> PResult<String> {
        self.skip_ws();
        if self.peek() == Some('"') {
            self.pos += 1;
            let mut out = String::new();
            let mut chars = self.rest().char_indices();
            while let Some((i, c)) = chars.next() {
                match c {
                    '"' => {
                        self.pos += i + 1;
                        return Ok(out);
                    }
                    '\\' => match chars.next() {
                        Some((_, e)) => out.push(e),
                        None => break,
                    },
                    _ => out.push(c),
                }
            }
            self.pos = self.src.len();
            return Err(self.error("unterminated quoted word"));
        }
        let rest = self.rest();
        let mut end = rest.find(RESERVED).unwrap_or(rest.len());
        if let Some(i) = rest[..end].find(" in ") {
            end = i;
        }
        let word = rest[..end].trim();
        if word.is_empty() {
            return Err(self.error("expected a word"));
        }
        self.pos += end;
        Ok(word.to_string())
    }

    fn attrref(&mut self) -> PResult<AttributeRef> {
        self.skip_ws();
        let quoted = self.peek() == Some('"');
        let first = self.word()?;
        if !quoted && self.peek() == Some(':') {
            let channel =
                Channel::from_keyword(&first).ok_or_else(|| self.error(format!("unknown channel `{first}`")))?;
            self.pos += 1;
            let value = self.word()?;
            return Ok(AttributeRef::Channel { channel, value });
        }
        if self.eat('|') {
            let ch = self.ident();
            let channel = Channel::from_keyword(ch).ok_or_else(|| self.error(format!("unknown channel `{ch}`")))?;
            self.expect(':')?;
            let value = self.word()?;
            return Ok(AttributeRef::Mixed {
                name: first,
                channel,
                value,
            });
        }
        Ok(AttributeRef::Name { name: first })
    }

    /// Parses `agg(attr)` if the cursor is at an aggregate call.
    fn try_agg(&mut self) -> PResult<Option<AggregateSpec>> {
        self.skip_ws();
        let id = self.peek_ident();
        let Some(aggregate) = AggregateFn::from_keyword(id) else {
            return Ok(None);
        };
        if !self.rest()[id.len()..].starts_with('(') {
            return Ok(None);
        }
        self.pos += id.len() + 1;
        let attribute = self.attrref()?;
        self.expect(')')?;
        Ok(Some(AggregateSpec { aggregate, attribute }))
    }

    fn literal(&mut self) -> PResult<Literal> {
        Ok(Literal(self.word()?))
    }

    fn value(&mut self) -> PResult<FilterValue> {
        if self.eat('[') {
            let lo = self.literal()?;
            self.expect(',')?;
            let hi = self.literal()?;
            self.expect(']')?;
            return Ok(FilterValue::Range(lo, hi));
        }
        if self.eat('{') {
            let mut items = vec![self.literal()?];
            while self.eat(',') {
                items.push(self.literal()?);
            }
            self.expect('}')?;
            return Ok(FilterValue::List(items));
        }
        if let Some(agg) = self.try_agg()? {
            return Ok(FilterValue::Aggregate(agg));
        }
        Ok(FilterValue::Literal(self.literal()?))
    }

    fn direction(&mut self) -> PResult<Option<Direction>> {
        if !self.eat('@') {
            return Ok(None);
        }
        let id = self.ident();
        Direction::from_keyword(id)
            .map(Some)
            .ok_or_else(|| self.error(format!("unknown direction `{id}`")))
    }

    fn filter(&mut self) -> PResult<Filter> {
        let attr = self.attrref()?;
        self.skip_ws();
        let op = match self.peek() {
            Some('=') => FilterOp::Eq,
            Some('>') => FilterOp::Gt,
            Some('<') => FilterOp::Lt,
            _ if self.peek_ident() == "in" => FilterOp::In,
            _ => return Err(self.error("expected a filter operator")),
        };
        self.pos += op.as_str().len();
        let value = self.value()?;
        let direction = self.direction()?;
        Ok(Filter {
            attr,
            op,
            value,
            direction,
        })
    }

    fn derive(&mut self) -> PResult<DeriveSpec> {
        let id = self.ident();
        let kind = DeriveKind::from_keyword(id).ok_or_else(|| self.error(format!("unknown derivation `{id}`")))?;
        self.expect('(')?;
        let mut operands = vec![self.attrref()?];
        while self.eat(',') {
            operands.push(self.attrref()?);
        }
        self.expect(')')?;
        let direction = self.direction()?;
        Ok(DeriveSpec {
            kind,
            operands,
            direction,
        })
    }

    fn task(&mut self) -> PResult<Task> {
        self.expect('(')?;
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("task nesting too deep"));
        }
        let id = self.ident();
        let kind = TaskKind::from_keyword(id).ok_or_else(|| self.error(format!("unknown task kind `{id}`")))?;
        let mut task = Task::new(kind);
        self.skip_ws();
        match self.peek() {
            Some(';') | Some(')') => {}
            None => return Err(self.error("unexpected end of input")),
            _ => {
                task.target = Some(match self.try_agg()? {
                    Some(agg) => Target::Aggregate(agg),
                    None => Target::Attr(self.attrref()?),
                });
            }
        }
        let (mut seen_filter, mut seen_derive, mut seen_sub) = (false, false, false);
        loop {
            if self.eat(')') {
                break;
            }
            self.expect(';')?;
            let keyword = self.ident();
            self.expect(':')?;
            match keyword {
                "filter" if !seen_filter => {
                    seen_filter = true;
                    task.filters.push(self.filter()?);
                    while self.eat(',') {
                        task.filters.push(self.filter()?);
                    }
                }
                "derive" if !seen_derive => {
                    seen_derive = true;
                    task.derive = Some(self.derive()?);
                }
                "sub" if !seen_sub => {
                    seen_sub = true;
                    task.subtasks.push(self.task()?);
                    while self.eat(',') {
                        task.subtasks.push(self.task()?);
                    }
                }
                "filter" | "derive" | "sub" => return Err(self.error(format!("duplicate `{keyword}` clause"))),
                other => return Err(self.error(format!("unknown clause `{other}`"))),
            }
        }
        self.depth -= 1;
        Ok(task)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{AggregateFn, Filter};

    fn coal_task() -> Task {
        Task::identify(AttributeRef::name("consumption"))
            .with_filter(Filter::eq(AttributeRef::name("energy"), "coal"))
            .with_filter(Filter::eq(AttributeRef::name("time"), "2022"))
    }

    #[test]
    fn parses_the_reference_example() {
        let t = parse_task_text("(identify consumption; filter: energy = coal, time = 2022)").unwrap();
        assert_eq!(t, coal_task());
    }

    #[test]
    fn serializes_the_reference_example() {
        assert_eq!(
            serialize_task(&coal_task()),
            "(identify consumption; filter: energy = coal, time = 2022)"
        );
    }

    #[test]
    fn zero_filters_omit_the_clause() {
        let t = Task::identify(AttributeRef::name("consumption"));
        assert_eq!(serialize_task(&t), "(identify consumption)");
    }

    #[test]
    fn nested_aggregate_and_range() {
        let t = parse_task_text("(identify energy type; filter: percentage = max(percentage), time in [2010, 2020])")
            .unwrap();
        assert_eq!(t.target_attr(), Some(&AttributeRef::name("energy type")));
        assert_eq!(
            t.filters[0],
            Filter::aggregate(
                AttributeRef::name("percentage"),
                FilterOp::Eq,
                AggregateFn::Max,
                AttributeRef::name("percentage")
            )
        );
        assert_eq!(t.filters[1], Filter::range(AttributeRef::name("time"), "2010", "2020"));
    }

    #[test]
    fn unbalanced_input_is_a_format_error() {
        assert!(matches!(
            parse_task_text("(identify x; filter:"),
            Err(FormatError::Syntax { .. })
        ));
        assert!(parse_task_text("(identify consumption; filter: energy = coal").is_err());
        assert!(parse_task_text("identify consumption)").is_err());
        assert!(parse_task_text("").is_err());
        assert!(parse_task_text("(identify a) extra").is_err());
        assert!(parse_task_text("(explain a)").is_err());
        assert!(parse_task_text("(identify a; filter: b = c; filter: d = e)").is_err());
        assert!(parse_task_text("(identify a; where: b = c)").is_err());
    }

    #[test]
    fn channels_mixed_and_quoting() {
        let src = "(compare GDP; derive: difference(color:green, Canada|color:blue); sub: (identify GDP; filter: Canada|color:blue = Canada), (identify GDP; filter: color:green = green))";
        let t = parse_task_text(src).unwrap();
        assert_eq!(serialize_task(&t), src);
        let odd = Task::identify(AttributeRef::name("made in china"))
            .with_filter(Filter::eq(AttributeRef::name("a,b"), "say \"hi\""));
        let text = serialize_task(&odd);
        assert_eq!(text, r#"(identify "made in china"; filter: "a,b" = "say \"hi\"")"#);
        assert_eq!(parse_task_text(&text).unwrap(), odd);
    }

    #[test]
    fn lenient_whitespace() {
        let t = parse_task_text("( identify  consumption ;filter:energy=coal ,time =2022 )").unwrap();
        assert_eq!(t, coal_task());
    }

    #[test]
    fn rank_filters_and_lists() {
        let src = "(identify country; filter: country = {Canada, Germany, India}, population < 3 @top; derive: rank(population) @top)";
        let t = parse_task_text(src).unwrap();
        assert_eq!(t.filters[1].direction, Some(Direction::Top));
        assert_eq!(t.derive.as_ref().unwrap().direction, Some(Direction::Top));
        assert_eq!(serialize_task(&t), src);
    }

    #[test]
    fn invalid_trees_are_rejected() {
        assert!(matches!(
            parse_task_text("(compare GDP; sub: (identify GDP))"),
            Err(FormatError::Invalid(_))
        ));
    }

    #[test]
    fn deep_nesting_is_bounded() {
        let mut s = String::new();
        for _ in 0..40 {
            s.push_str("(compare x; sub: ");
        }
        assert!(parse_task_text(&s).is_err());
    }
}
