use super::spec::{AttrType, ChartSpec};
use super::state::ChartState;
use super::ChartError;
use crate::task::{AttributeRef, Channel, DeriveSpec, Filter, FilterOp, FilterValue, Literal, Target, Task};

/// What an [`AttributeRef`] denotes in a chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolved {
    Attribute(usize),
    Choice { attribute: usize, choice: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolveOptions {
    /// Consult attribute synonym tables after exact and case-insensitive
    /// name matching.
    pub synonyms: bool,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        ResolveOptions { synonyms: true }
    }
}

/// Resolves references against a spec plus any extra choices, such as the
/// names of derived series in a chart state.
pub struct Resolver<'a> {
    spec: &'a ChartSpec,
    extra: Vec<(usize, String)>,
    opts: ResolveOptions,
}

pub fn resolve_attribute(reference: &AttributeRef, spec: &ChartSpec) -> Result<Resolved, ChartError> {
    Resolver::new(spec).resolve(reference)
}

impl<'a> Resolver<'a> {
    pub fn new(spec: &'a ChartSpec) -> Self {
        Resolver {
            spec,
            extra: Vec::new(),
            opts: ResolveOptions::default(),
        }
    }

    /// Resolver that also knows the derived series of `state` as choices of
    /// the series attribute.
    pub fn for_state(state: &'a ChartState) -> Self {
        let mut r = Resolver::new(&state.spec);
        if let Some(s) = state.spec.series_index() {
            for d in &state.view.derived_series {
                let cats = d.rows.iter().filter_map(|row| row.category.clone());
                for name in std::iter::once(d.name.clone()).chain(cats) {
                    if !r.extra.iter().any(|(_, c)| *c == name) && !state.spec.attributes[s].choices.contains(&name) {
                        r.extra.push((s, name));
                    }
                }
            }
        }
        r
    }

    pub fn with_options(mut self, opts: ResolveOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn spec(&self) -> &ChartSpec {
        self.spec
    }

    pub fn resolve(&self, reference: &AttributeRef) -> Result<Resolved, ChartError> {
        match reference {
            AttributeRef::Name { name } => self.by_name(name),
            AttributeRef::Channel { channel, value } => self.by_channel(*channel, value),
            AttributeRef::Mixed { name, channel, value } => {
                let a = self.by_name(name)?;
                let b = self.by_channel(*channel, value)?;
                if a == b {
                    Ok(a)
                } else {
                    Err(ChartError::Inconsistent(format!("{name}|{}:{value}", channel.as_str())))
                }
            }
        }
    }

    /// Resolve a reference that must name an attribute.
    pub fn attribute(&self, reference: &AttributeRef) -> Result<usize, ChartError> {
        match self.resolve(reference)? {
            Resolved::Attribute(i) => Ok(i),
            Resolved::Choice { choice, .. } => Err(ChartError::TypeMismatch(format!(
                "`{choice}` is a category, not an attribute"
            ))),
        }
    }

    pub fn quantitative(&self, reference: &AttributeRef) -> Result<usize, ChartError> {
        let i = self.attribute(reference)?;
        if self.spec.attributes[i].kind != AttrType::Quantitative {
            return Err(ChartError::TypeMismatch(format!(
                "`{}` is not quantitative",
                self.spec.attributes[i].name
            )));
        }
        Ok(i)
    }

    fn choices(&self) -> impl Iterator<Item = (usize, &str)> {
        self.spec
            .attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind == AttrType::Categorical)
            .flat_map(|(i, a)| a.choices.iter().map(move |c| (i, c.as_str())))
            .chain(self.extra.iter().map(|(i, c)| (*i, c.as_str())))
    }

    fn by_name(&self, name: &str) -> Result<Resolved, ChartError> {
        let attrs = &self.spec.attributes;
        let tiers: [Vec<Resolved>; 5] = [
            attrs
                .iter()
                .enumerate()
                .filter(|(_, a)| a.name == name)
                .map(|(i, _)| Resolved::Attribute(i))
                .collect(),
            attrs
                .iter()
                .enumerate()
                .filter(|(_, a)| a.name.to_lowercase() == name.to_lowercase())
                .map(|(i, _)| Resolved::Attribute(i))
                .collect(),
            if self.opts.synonyms {
                attrs
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.synonyms.iter().any(|s| s.to_lowercase() == name.to_lowercase()))
                    .map(|(i, _)| Resolved::Attribute(i))
                    .collect()
            } else {
                Vec::new()
            },
            self.choices()
                .filter(|(_, c)| *c == name)
                .map(|(i, c)| Resolved::Choice {
                    attribute: i,
                    choice: c.to_string(),
                })
                .collect(),
            self.choices()
                .filter(|(_, c)| c.to_lowercase() == name.to_lowercase())
                .map(|(i, c)| Resolved::Choice {
                    attribute: i,
                    choice: c.to_string(),
                })
                .collect(),
        ];
        for mut tier in tiers {
            tier.dedup();
            match tier.len() {
                0 => continue,
                1 => return Ok(tier.pop().expect("one candidate")),
                _ => {
                    return Err(ChartError::Ambiguous {
                        reference: name.to_string(),
                        candidates: tier.iter().map(|r| self.describe(r)).collect(),
                    })
                }
            }
        }
        Err(ChartError::Unresolvable(name.to_string()))
    }

    fn by_channel(&self, channel: Channel, value: &str) -> Result<Resolved, ChartError> {
        let reference = format!("{}:{value}", channel.as_str());
        let binding = self
            .spec
            .binding_for(channel, value)
            .ok_or_else(|| ChartError::Unresolvable(reference.clone()))?;
        let owners: Vec<usize> = self
            .spec
            .attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind == AttrType::Categorical && a.choices.contains(&binding.choice))
            .map(|(i, _)| i)
            .collect();
        let attribute = match owners.as_slice() {
            [one] => *one,
            [] => return Err(ChartError::Unresolvable(reference)),
            many => match self.spec.series_index().filter(|s| many.contains(s)) {
                Some(s) => s,
                None => {
                    return Err(ChartError::Ambiguous {
                        reference,
                        candidates: many.iter().map(|&i| self.spec.attributes[i].name.clone()).collect(),
                    })
                }
            },
        };
        Ok(Resolved::Choice {
            attribute,
            choice: binding.choice.clone(),
        })
    }

    fn describe(&self, r: &Resolved) -> String {
        match r {
            Resolved::Attribute(i) => self.spec.attributes[*i].name.clone(),
            Resolved::Choice { attribute, choice } => format!("{}={choice}", self.spec.attributes[*attribute].name),
        }
    }

    /// Rewrite a reference into its by-name form: attributes by their
    /// declared name, choices by the choice itself.
    pub fn normalize(&self, reference: &AttributeRef) -> Result<AttributeRef, ChartError> {
        Ok(match self.resolve(reference)? {
            Resolved::Attribute(i) => AttributeRef::name(self.spec.attributes[i].name.clone()),
            Resolved::Choice { choice, .. } => AttributeRef::name(choice),
        })
    }

    /// Rewrite a filter so that it refers to data only. A filter whose
    /// attribute denotes a category (`color:green = green`,
    /// `Germany = Germany`) becomes `<attribute> = <choice>`.
    pub fn normalize_filter(&self, f: &Filter) -> Result<Filter, ChartError> {
        let mut out = f.clone();
        match self.resolve(&f.attr)? {
            Resolved::Attribute(i) => {
                let attr = &self.spec.attributes[i];
                out.attr = AttributeRef::name(attr.name.clone());
                if attr.kind == AttrType::Categorical {
                    let fix = |l: &mut Literal| {
                        if let Some(c) = attr
                            .choices
                            .iter()
                            .find(|c| c.to_lowercase() == l.as_str().to_lowercase())
                        {
                            *l = Literal::text(c.clone());
                        }
                    };
                    match &mut out.value {
                        FilterValue::Literal(l) => fix(l),
                        FilterValue::List(items) => items.iter_mut().for_each(fix),
                        _ => {}
                    }
                }
            }
            Resolved::Choice { attribute, choice } => {
                out.attr = AttributeRef::name(self.spec.attributes[attribute].name.clone());
                out.op = FilterOp::Eq;
                out.value = FilterValue::Literal(Literal::text(choice));
            }
        }
        if let FilterValue::Aggregate(agg) = &mut out.value {
            agg.attribute = self.normalize(&agg.attribute)?;
        }
        Ok(out)
    }

    pub fn normalize_task(&self, task: &Task) -> Result<Task, ChartError> {
        let mut t = task.clone();
        t.target = match &task.target {
            Some(Target::Attr(a)) => Some(Target::Attr(self.normalize(a)?)),
            Some(Target::Aggregate(agg)) => {
                let mut agg = agg.clone();
                agg.attribute = self.normalize(&agg.attribute)?;
                Some(Target::Aggregate(agg))
            }
            None => None,
        };
        t.filters = task
            .filters
            .iter()
            .map(|f| self.normalize_filter(f))
            .collect::<Result<_, _>>()?;
        if let Some(d) = &task.derive {
            t.derive = Some(DeriveSpec {
                kind: d.kind,
                operands: d.operands.iter().map(|o| self.normalize(o)).collect::<Result<_, _>>()?,
                direction: d.direction,
            });
        }
        t.subtasks = task
            .subtasks
            .iter()
            .map(|s| self.normalize_task(s))
            .collect::<Result<_, _>>()?;
        Ok(t)
    }
}

/// Replace every channel and mixed reference in `task` by the data it
/// denotes in `spec`, leaving a task that mentions names only.
pub fn resolve_task_refs(task: &Task, spec: &ChartSpec) -> Result<Task, ChartError> {
    Resolver::new(spec).normalize_task(task)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::spec::{Attribute, ChannelBinding, Encodings, Mark, Value};
    use crate::task::parse_task_text;
    use crate::time::Timestamp;

    fn spec() -> ChartSpec {
        let countries = ["Germany", "India", "germany2"];
        let rows = countries
            .iter()
            .map(|c| {
                vec![
                    Value::Text(c.to_string()),
                    Value::Time(Timestamp::year(2020)),
                    Value::Number(1.0),
                    Value::Number(2.0),
                ]
            })
            .collect();
        ChartSpec {
            attributes: vec![
                Attribute::categorical("country", countries.iter().map(|s| s.to_string()).collect()),
                Attribute::temporal("date", None),
                Attribute::quantitative("number of users", None).with_synonyms(&["users", "shared"]),
                Attribute::quantitative("Revenue", None).with_synonyms(&["shared"]),
            ],
            rows,
            mark: Mark::Line,
            encodings: Encodings {
                x: "date".into(),
                y: "number of users".into(),
                color: Some("country".into()),
            },
            channel_bindings: vec![ChannelBinding {
                channel: Channel::Color,
                value: "green".into(),
                choice: "Germany".into(),
            }],
        }
    }

    #[test]
    fn name_tiers() {
        let s = spec();
        assert_eq!(
            resolve_attribute(&AttributeRef::name("number of users"), &s),
            Ok(Resolved::Attribute(2))
        );
        assert_eq!(
            resolve_attribute(&AttributeRef::name("revenue"), &s),
            Ok(Resolved::Attribute(3))
        );
        assert_eq!(
            resolve_attribute(&AttributeRef::name("Users"), &s),
            Ok(Resolved::Attribute(2))
        );
        assert_eq!(
            resolve_attribute(&AttributeRef::name("india"), &s),
            Ok(Resolved::Choice {
                attribute: 0,
                choice: "India".into()
            })
        );
        assert!(matches!(
            resolve_attribute(&AttributeRef::name("zzz"), &s),
            Err(ChartError::Unresolvable(_))
        ));
        match resolve_attribute(&AttributeRef::name("shared"), &s) {
            Err(ChartError::Ambiguous { candidates, .. }) => assert_eq!(candidates.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        // exact beats case-insensitive
        assert_eq!(
            resolve_attribute(&AttributeRef::name("Germany"), &s),
            Ok(Resolved::Choice {
                attribute: 0,
                choice: "Germany".into()
            })
        );
    }

    #[test]
    fn synonyms_can_be_disabled() {
        let s = spec();
        let r = Resolver::new(&s).with_options(ResolveOptions { synonyms: false });
        assert!(r.resolve(&AttributeRef::name("users")).is_err());
    }

    #[test]
    fn channel_and_mixed() {
        let s = spec();
        let germany = Resolved::Choice {
            attribute: 0,
            choice: "Germany".into(),
        };
        assert_eq!(
            resolve_attribute(&AttributeRef::channel(Channel::Color, "green"), &s),
            Ok(germany.clone())
        );
        assert_eq!(
            resolve_attribute(&AttributeRef::mixed("Germany", Channel::Color, "green"), &s),
            Ok(germany)
        );
        assert!(matches!(
            resolve_attribute(&AttributeRef::mixed("India", Channel::Color, "green"), &s),
            Err(ChartError::Inconsistent(_))
        ));
        assert!(resolve_attribute(&AttributeRef::channel(Channel::Color, "blue"), &s).is_err());
    }

    #[test]
    fn channel_filters_normalize_to_data() {
        let s = spec();
        let a = parse_task_text("(identify number of users; filter: color:green = green)").unwrap();
        let b = parse_task_text("(identify number of users; filter: country = Germany)").unwrap();
        assert_eq!(resolve_task_refs(&a, &s).unwrap(), b);
        assert!(crate::task::semantically_equal(&a, &b, &s).unwrap());
        assert!(!crate::task::literally_equal(&a, &b));
    }
}
