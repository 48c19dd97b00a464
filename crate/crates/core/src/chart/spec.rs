use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use super::ChartError;
use crate::task::{format_number, Channel};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrType {
    Categorical,
    Temporal,
    Quantitative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: AttrType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<[Timestamp; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synonyms: Vec<String>,
}

impl Attribute {
    pub fn categorical(name: impl Into<String>, choices: Vec<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttrType::Categorical,
            choices,
            span: None,
            range: None,
            synonyms: Vec::new(),
        }
    }

    pub fn temporal(name: impl Into<String>, span: Option<[Timestamp; 2]>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttrType::Temporal,
            choices: Vec::new(),
            span,
            range: None,
            synonyms: Vec::new(),
        }
    }

    pub fn quantitative(name: impl Into<String>, range: Option<[f64; 2]>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttrType::Quantitative,
            choices: Vec::new(),
            span: None,
            range,
            synonyms: Vec::new(),
        }
    }

    pub fn with_synonyms(mut self, synonyms: &[&str]) -> Self {
        self.synonyms = synonyms.iter().map(|s| s.to_string()).collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Bar,
    Line,
    Area,
}

impl Mark {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mark::Bar => "bar",
            Mark::Line => "line",
            Mark::Area => "area",
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single cell of the data table.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Number(f64),
    Time(Timestamp),
}

impl Value {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_time(&self) -> Option<Timestamp> {
        match self {
            Value::Time(t) => Some(*t),
            _ => None,
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Text(s) => Json::String(s.clone()),
            Value::Number(n) => serde_json::Number::from_f64(*n).map(Json::Number).unwrap_or(Json::Null),
            Value::Time(t) => Json::String(t.to_string()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Number(n) => f.write_str(&format_number(*n)),
            Value::Time(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encodings {
    pub x: String,
    pub y: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBinding {
    pub channel: Channel,
    pub value: String,
    pub choice: String,
}

/// Declarative, data-bearing chart description.
///
/// Rows are stored column-aligned with `attributes`: `rows[i][j]` is the
/// value of attribute `j` in row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub attributes: Vec<Attribute>,
    pub rows: Vec<Vec<Value>>,
    pub mark: Mark,
    pub encodings: Encodings,
    pub channel_bindings: Vec<ChannelBinding>,
}

#[derive(Deserialize)]
struct SpecDoc {
    attributes: Vec<AttrDoc>,
    rows: Vec<Map<String, Json>>,
    mark: Mark,
    encodings: Encodings,
    #[serde(default, rename = "channelBindings")]
    channel_bindings: Vec<ChannelBinding>,
}

#[derive(Deserialize)]
struct AttrDoc {
    name: String,
    #[serde(rename = "type")]
    kind: AttrType,
    choices: Option<Vec<String>>,
    span: Option<[Json; 2]>,
    range: Option<[f64; 2]>,
    #[serde(default)]
    synonyms: Vec<String>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ChartError {
    ChartError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn json_to_time(v: &Json) -> Option<Timestamp> {
    match v {
        Json::String(s) => s.parse().ok(),
        Json::Number(n) => n
            .as_i64()
            .filter(|y| (1..=9999).contains(y))
            .map(|y| Timestamp::year(y as i32)),
        _ => None,
    }
}

impl ChartSpec {
    /// Parse and validate a chart-spec JSON document.
    pub fn from_json_str(text: &str) -> Result<Self, ChartError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: SpecDoc =
            serde_path_to_error::deserialize(de).map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;
        Self::from_doc(doc)
    }

    pub fn from_json(value: Json) -> Result<Self, ChartError> {
        let doc: SpecDoc =
            serde_path_to_error::deserialize(value).map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: SpecDoc) -> Result<Self, ChartError> {
        if doc.attributes.is_empty() {
            return Err(schema("attributes", "at least one attribute is required"));
        }
        let mut seen = HashSet::new();
        let mut attributes = Vec::with_capacity(doc.attributes.len());
        for (i, a) in doc.attributes.into_iter().enumerate() {
            if a.name.trim().is_empty() {
                return Err(schema(
                    format!("attributes[{i}].name"),
                    "attribute name must be nonempty",
                ));
            }
            if !seen.insert(a.name.to_lowercase()) {
                return Err(schema(
                    format!("attributes[{i}].name"),
                    format!("duplicate attribute `{}`", a.name),
                ));
            }
            let span = match a.span {
                Some([lo, hi]) => {
                    let lo = json_to_time(&lo)
                        .ok_or_else(|| schema(format!("attributes[{i}].span[0]"), "invalid timestamp"))?;
                    let hi = json_to_time(&hi)
                        .ok_or_else(|| schema(format!("attributes[{i}].span[1]"), "invalid timestamp"))?;
                    if lo.chrono_cmp(&hi).is_gt() {
                        return Err(schema(format!("attributes[{i}].span"), "span must be ordered"));
                    }
                    Some([lo, hi])
                }
                None => None,
            };
            if let Some([lo, hi]) = a.range {
                if lo > hi || !lo.is_finite() || !hi.is_finite() {
                    return Err(schema(format!("attributes[{i}].range"), "range must be ordered"));
                }
            }
            if a.choices.as_ref().is_some_and(|c| c.is_empty()) {
                return Err(schema(format!("attributes[{i}].choices"), "choices must be nonempty"));
            }
            attributes.push(Attribute {
                name: a.name,
                kind: a.kind,
                choices: a.choices.unwrap_or_default(),
                span,
                range: a.range,
                synonyms: a.synonyms,
            });
        }

        if doc.rows.is_empty() {
            return Err(ChartError::Consistency("chart has no data rows".into()));
        }
        let declared_choices: Vec<bool> = attributes.iter().map(|a| !a.choices.is_empty()).collect();
        let mut rows = Vec::with_capacity(doc.rows.len());
        for (r, obj) in doc.rows.iter().enumerate() {
            let mut row = Vec::with_capacity(attributes.len());
            for (j, attr) in attributes.iter_mut().enumerate() {
                let path = format!("rows[{r}].{}", attr.name);
                let raw = obj
                    .get(&attr.name)
                    .filter(|v| !v.is_null())
                    .ok_or_else(|| ChartError::Consistency(format!("row {r} has no value for `{}`", attr.name)))?;
                let value = match attr.kind {
                    AttrType::Categorical => {
                        let s = match raw {
                            Json::String(s) => s.clone(),
                            Json::Number(n) => n.to_string(),
                            _ => return Err(schema(path, "expected a categorical string")),
                        };
                        if declared_choices[j] {
                            if !attr.choices.contains(&s) {
                                return Err(ChartError::Consistency(format!(
                                    "row {r}: `{s}` is not a declared choice of `{}`",
                                    attr.name
                                )));
                            }
                        } else if !attr.choices.contains(&s) {
                            attr.choices.push(s.clone());
                        }
                        Value::Text(s)
                    }
                    AttrType::Temporal => {
                        Value::Time(json_to_time(raw).ok_or_else(|| schema(path, "expected a timestamp"))?)
                    }
                    AttrType::Quantitative => match raw.as_f64() {
                        Some(n) if n.is_finite() => Value::Number(n),
                        _ => return Err(schema(path, "expected a number")),
                    },
                };
                row.push(value);
            }
            rows.push(row);
        }

        for (j, attr) in attributes.iter_mut().enumerate() {
            match attr.kind {
                AttrType::Temporal if attr.span.is_none() => {
                    let mut ts = rows.iter().filter_map(|r| r[j].as_time());
                    let first = ts.next().expect("rows nonempty");
                    let (lo, hi) = ts.fold((first, first), |(lo, hi), t| {
                        (
                            if t.chrono_cmp(&lo).is_lt() { t } else { lo },
                            if t.chrono_cmp(&hi).is_gt() { t } else { hi },
                        )
                    });
                    attr.span = Some([lo, hi]);
                }
                AttrType::Quantitative if attr.range.is_none() => {
                    let (lo, hi) = rows
                        .iter()
                        .filter_map(|r| r[j].as_number())
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                    attr.range = Some([lo, hi]);
                }
                _ => {}
            }
        }

        let spec = ChartSpec {
            attributes,
            rows,
            mark: doc.mark,
            encodings: doc.encodings,
            channel_bindings: doc.channel_bindings,
        };
        spec.check_encodings()?;
        Ok(spec)
    }

    fn check_encodings(&self) -> Result<(), ChartError> {
        let x = self
            .attr_index(&self.encodings.x)
            .ok_or_else(|| schema("encodings.x", format!("unknown attribute `{}`", self.encodings.x)))?;
        if self.attributes[x].kind == AttrType::Quantitative {
            return Err(schema("encodings.x", "x must be temporal or categorical"));
        }
        let y = self
            .attr_index(&self.encodings.y)
            .ok_or_else(|| schema("encodings.y", format!("unknown attribute `{}`", self.encodings.y)))?;
        if self.attributes[y].kind != AttrType::Quantitative {
            return Err(schema("encodings.y", "y must be quantitative"));
        }
        if let Some(c) = &self.encodings.color {
            let ci = self
                .attr_index(c)
                .ok_or_else(|| schema("encodings.color", format!("unknown attribute `{c}`")))?;
            if self.attributes[ci].kind != AttrType::Categorical {
                return Err(schema("encodings.color", "color must be categorical"));
            }
        }
        for (i, b) in self.channel_bindings.iter().enumerate() {
            if !self.attributes.iter().any(|a| a.choices.contains(&b.choice)) {
                return Err(schema(
                    format!("channelBindings[{i}].choice"),
                    format!("`{}` is not a categorical choice", b.choice),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Json {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (a, v) in self.attributes.iter().zip(row) {
                    m.insert(a.name.clone(), v.to_json());
                }
                Json::Object(m)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert(
            "attributes".into(),
            serde_json::to_value(&self.attributes).expect("attributes serialize"),
        );
        doc.insert("rows".into(), Json::Array(rows));
        doc.insert("mark".into(), Json::String(self.mark.as_str().into()));
        doc.insert(
            "encodings".into(),
            serde_json::to_value(&self.encodings).expect("encodings serialize"),
        );
        if !self.channel_bindings.is_empty() {
            doc.insert(
                "channelBindings".into(),
                serde_json::to_value(&self.channel_bindings).expect("bindings serialize"),
            );
        }
        Json::Object(doc)
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attr(&self, name: &str) -> Option<&Attribute> {
        self.attr_index(name).map(|i| &self.attributes[i])
    }

    pub fn x_index(&self) -> usize {
        self.attr_index(&self.encodings.x).expect("validated encoding")
    }

    pub fn y_index(&self) -> usize {
        self.attr_index(&self.encodings.y).expect("validated encoding")
    }

    /// Attribute whose choices form the chart's series: the color encoding,
    /// or a categorical x axis.
    pub fn series_index(&self) -> Option<usize> {
        if let Some(c) = &self.encodings.color {
            return self.attr_index(c);
        }
        let x = self.x_index();
        (self.attributes[x].kind == AttrType::Categorical).then_some(x)
    }

    pub fn temporal_index(&self) -> Option<usize> {
        let x = self.x_index();
        if self.attributes[x].kind == AttrType::Temporal {
            return Some(x);
        }
        self.attributes.iter().position(|a| a.kind == AttrType::Temporal)
    }

    pub fn series_names(&self) -> Vec<String> {
        self.series_index()
            .map(|i| self.attributes[i].choices.clone())
            .unwrap_or_default()
    }

    pub fn binding_for(&self, channel: Channel, value: &str) -> Option<&ChannelBinding> {
        self.channel_bindings
            .iter()
            .find(|b| b.channel == channel && b.value.eq_ignore_ascii_case(value))
    }

    /// Visual value bound to a categorical choice on the given channel.
    pub fn channel_value_of(&self, channel: Channel, choice: &str) -> Option<&str> {
        self.channel_bindings
            .iter()
            .find(|b| b.channel == channel && b.choice == choice)
            .map(|b| b.value.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn energy_doc() -> Json {
        json!({
            "attributes": [
                {"name": "energy", "type": "categorical", "choices": ["coal", "gas", "solar"]},
                {"name": "time", "type": "temporal"},
                {"name": "consumption", "type": "quantitative", "synonyms": ["usage"]}
            ],
            "rows": [
                {"energy": "coal", "time": 2021, "consumption": 10},
                {"energy": "coal", "time": "2022", "consumption": 12},
                {"energy": "gas", "time": "2021", "consumption": 7},
                {"energy": "gas", "time": "2022", "consumption": 9}
            ],
            "mark": "line",
            "encodings": {"x": "time", "y": "consumption", "color": "energy"},
            "channelBindings": [{"channel": "color", "value": "green", "choice": "gas"}]
        })
    }

    #[test]
    fn loads_and_infers_extents() {
        let spec = ChartSpec::from_json(energy_doc()).unwrap();
        assert_eq!(spec.rows.len(), 4);
        assert_eq!(spec.attributes[2].range, Some([7.0, 12.0]));
        assert_eq!(spec.attributes[1].span.unwrap()[1].to_string(), "2022");
        assert_eq!(spec.channel_bindings[0].choice, "gas");
        assert_eq!(spec.series_index(), Some(0));
        let again = ChartSpec::from_json(spec.to_json()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn empty_rows_rejected() {
        let mut doc = energy_doc();
        doc["rows"] = json!([]);
        assert!(matches!(ChartSpec::from_json(doc), Err(ChartError::Consistency(_))));
    }

    #[test]
    fn missing_cell_rejected() {
        let mut doc = energy_doc();
        doc["rows"][2].as_object_mut().unwrap().remove("consumption");
        assert!(matches!(ChartSpec::from_json(doc), Err(ChartError::Consistency(_))));
    }

    #[test]
    fn schema_errors_carry_paths() {
        let mut doc = energy_doc();
        doc["mark"] = json!("pie");
        match ChartSpec::from_json(doc) {
            Err(ChartError::Schema { path, .. }) => assert_eq!(path, "mark"),
            other => panic!("unexpected {other:?}"),
        }
        let mut doc = energy_doc();
        doc["rows"][1]["consumption"] = json!("lots");
        match ChartSpec::from_json(doc) {
            Err(ChartError::Schema { path, .. }) => assert_eq!(path, "rows[1].consumption"),
            other => panic!("unexpected {other:?}"),
        }
        let mut doc = energy_doc();
        doc["encodings"]["y"] = json!("energy");
        assert!(ChartSpec::from_json(doc).is_err());
        let mut doc = energy_doc();
        doc["attributes"][0]["type"] = json!(5);
        match ChartSpec::from_json(doc) {
            Err(ChartError::Schema { path, .. }) => assert_eq!(path, "attributes[0].type"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
