use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GenConfig, GenError, Signature};
use crate::chart::{AttrType, Attribute, ChannelBinding, ChartSpec, Encodings, Mark, Value};
use crate::task::Channel;
use crate::time::Timestamp;

const BUNDLED: &[&str] = &[
    include_str!("../../vocab/agriculture.json"),
    include_str!("../../vocab/airlines-safety.json"),
    include_str!("../../vocab/astronomy.json"),
    include_str!("../../vocab/automotive.json"),
    include_str!("../../vocab/aviation-manufacturing.json"),
    include_str!("../../vocab/banking.json"),
    include_str!("../../vocab/biodiversity.json"),
    include_str!("../../vocab/chemistry.json"),
    include_str!("../../vocab/climate.json"),
    include_str!("../../vocab/cloud-computing.json"),
    include_str!("../../vocab/coffee.json"),
    include_str!("../../vocab/computer-science.json"),
    include_str!("../../vocab/crime.json"),
    include_str!("../../vocab/cryptocurrency.json"),
    include_str!("../../vocab/cybersecurity.json"),
    include_str!("../../vocab/demographics.json"),
    include_str!("../../vocab/ecommerce.json"),
    include_str!("../../vocab/economy.json"),
    include_str!("../../vocab/education.json"),
    include_str!("../../vocab/elections.json"),
    include_str!("../../vocab/electric-vehicles.json"),
    include_str!("../../vocab/energy.json"),
    include_str!("../../vocab/environment.json"),
    include_str!("../../vocab/fashion.json"),
    include_str!("../../vocab/fast-food.json"),
    include_str!("../../vocab/film.json"),
    include_str!("../../vocab/finance.json"),
    include_str!("../../vocab/fisheries.json"),
    include_str!("../../vocab/forestry.json"),
    include_str!("../../vocab/gaming.json"),
    include_str!("../../vocab/healthcare.json"),
    include_str!("../../vocab/hotels.json"),
    include_str!("../../vocab/housing.json"),
    include_str!("../../vocab/insurance.json"),
    include_str!("../../vocab/labor-market.json"),
    include_str!("../../vocab/language-learning.json"),
    include_str!("../../vocab/libraries.json"),
    include_str!("../../vocab/logistics.json"),
    include_str!("../../vocab/manufacturing.json"),
    include_str!("../../vocab/marathons.json"),
    include_str!("../../vocab/mining.json"),
    include_str!("../../vocab/museums.json"),
    include_str!("../../vocab/music.json"),
    include_str!("../../vocab/news-media.json"),
    include_str!("../../vocab/nutrition.json"),
    include_str!("../../vocab/oceanography.json"),
    include_str!("../../vocab/pets.json"),
    include_str!("../../vocab/pharmaceuticals.json"),
    include_str!("../../vocab/philanthropy.json"),
    include_str!("../../vocab/public-health.json"),
    include_str!("../../vocab/public-transit.json"),
    include_str!("../../vocab/publishing.json"),
    include_str!("../../vocab/real-estate.json"),
    include_str!("../../vocab/renewables.json"),
    include_str!("../../vocab/restaurants.json"),
    include_str!("../../vocab/retail.json"),
    include_str!("../../vocab/semiconductors.json"),
    include_str!("../../vocab/smartphones.json"),
    include_str!("../../vocab/social-media.json"),
    include_str!("../../vocab/space-exploration.json"),
    include_str!("../../vocab/sports.json"),
    include_str!("../../vocab/startups.json"),
    include_str!("../../vocab/stock-market.json"),
    include_str!("../../vocab/streaming-video.json"),
    include_str!("../../vocab/telecommunications.json"),
    include_str!("../../vocab/tourism.json"),
    include_str!("../../vocab/transportation.json"),
    include_str!("../../vocab/urban-planning.json"),
    include_str!("../../vocab/water-resources.json"),
    include_str!("../../vocab/weather.json"),
    include_str!("../../vocab/wine.json"),
];

/// Colors handed out to categorical choices, in order.
pub const PALETTE: [&str; 12] = [
    "red", "blue", "green", "orange", "purple", "brown", "pink", "gray", "yellow", "teal", "black", "cyan",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainVocab {
    pub domain: String,
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub domains: Vec<DomainVocab>,
}

impl Vocabulary {
    /// The topic vocabularies shipped with the crate.
    pub fn bundled() -> Self {
        let domains = BUNDLED
            .iter()
            .map(|text| serde_json::from_str(text).expect("bundled vocabulary parses"))
            .collect();
        Vocabulary { domains }
    }

    /// Load every `*.json` file of `dir`, one domain per file.
    pub fn load_dir(dir: &Path) -> Result<Self, GenError> {
        let entries = std::fs::read_dir(dir).map_err(|e| GenError::VocabMissing(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(GenError::VocabMissing(format!(
                "no vocabulary files in {}",
                dir.display()
            )));
        }
        let mut domains = Vec::new();
        for p in paths {
            let text = std::fs::read_to_string(&p)?;
            let d: DomainVocab = serde_json::from_str(&text).map_err(|e| GenError::InvalidVocab {
                domain: p.display().to_string(),
                message: e.to_string(),
            })?;
            domains.push(d);
        }
        let v = Vocabulary { domains };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.domains.is_empty() {
            return Err(GenError::VocabMissing("vocabulary has no domains".into()));
        }
        let mut seen = BTreeSet::new();
        for d in &self.domains {
            if !seen.insert(d.domain.to_lowercase()) {
                return Err(invalid(d, format!("duplicate domain `{}`", d.domain)));
            }
            validate_domain(d)?;
        }
        Ok(())
    }
}

fn invalid(d: &DomainVocab, message: String) -> GenError {
    GenError::InvalidVocab {
        domain: d.domain.clone(),
        message,
    }
}

fn validate_domain(d: &DomainVocab) -> Result<(), GenError> {
    let mut words = BTreeSet::new();
    let mut check_word = |w: &str| -> Result<(), GenError> {
        if w.trim().is_empty() || w.chars().any(|c| c.is_ascii_digit() || "(),;\"".contains(c)) {
            return Err(invalid(
                d,
                format!("`{w}` must be nonempty without digits or punctuation"),
            ));
        }
        if PALETTE.contains(&w.to_lowercase().as_str()) {
            return Err(invalid(d, format!("`{w}` collides with a channel value")));
        }
        if !words.insert(w.to_lowercase()) {
            return Err(invalid(d, format!("`{w}` is used twice")));
        }
        Ok(())
    };
    let (mut cats, mut quants) = (0, 0);
    for a in &d.attributes {
        check_word(&a.name)?;
        match a.kind {
            AttrType::Categorical => {
                cats += 1;
                if !(4..=PALETTE.len()).contains(&a.choices.len()) {
                    return Err(invalid(d, format!("`{}` needs 4 to {} choices", a.name, PALETTE.len())));
                }
                for c in &a.choices {
                    check_word(c)?;
                }
            }
            AttrType::Temporal => match a.span {
                Some([lo, hi]) if lo.granularity() == hi.granularity() && Timestamp::series(lo, hi).len() >= 4 => {}
                _ => return Err(invalid(d, format!("`{}` needs a span of at least four steps", a.name))),
            },
            AttrType::Quantitative => {
                quants += 1;
                match a.range {
                    Some([lo, hi]) if lo < hi => {}
                    _ => return Err(invalid(d, format!("`{}` needs a range", a.name))),
                }
            }
        }
    }
    if cats == 0 || quants == 0 {
        return Err(invalid(
            d,
            "a domain needs a categorical and a quantitative attribute".into(),
        ));
    }
    Ok(())
}

/// A categorical attribute, an optional temporal one and one or two
/// quantitative ones drawn from a single domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeCombo {
    pub id: String,
    pub domain: String,
    pub attrs: Vec<Attribute>,
    pub signature: Signature,
}

impl AttributeCombo {
    fn new(domain: &str, attrs: Vec<Attribute>) -> Self {
        let signature = Signature::of(&attrs).expect("combo built from typed attributes");
        let id = format!(
            "{domain}: {}",
            attrs.iter().map(|a| a.name.as_str()).collect::<Vec<_>>().join(" + ")
        );
        AttributeCombo {
            id,
            domain: domain.to_string(),
            attrs,
            signature,
        }
    }

    pub fn categorical(&self) -> &Attribute {
        self.attrs
            .iter()
            .find(|a| a.kind == AttrType::Categorical)
            .expect("combo has a category")
    }

    pub fn temporal(&self) -> Option<&Attribute> {
        self.attrs.iter().find(|a| a.kind == AttrType::Temporal)
    }

    pub fn quantitative(&self) -> Vec<&Attribute> {
        self.attrs.iter().filter(|a| a.kind == AttrType::Quantitative).collect()
    }

    pub fn color_of(&self, choice: &str) -> &'static str {
        let i = self
            .categorical()
            .choices
            .iter()
            .position(|c| c == choice)
            .expect("known choice");
        PALETTE[i]
    }

    pub fn mark(&self) -> Mark {
        match self.signature {
            Signature::CTQ => Mark::Line,
            _ => Mark::Bar,
        }
    }

    /// A chart of synthetic rows for this combo, deterministic in its id.
    pub fn chart_spec(&self) -> ChartSpec {
        let digest = crate::chart::element_id(&self.id, "");
        let seed = u64::from_str_radix(&digest[2..], 16).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cat = self.categorical();
        let quants = self.quantitative();
        let mut value = |a: &Attribute| {
            let [lo, hi] = a.range.expect("validated range");
            let v = lo + (hi - lo) * rng.gen::<f64>();
            let v = if hi - lo >= 100.0 {
                v.round()
            } else {
                (v * 100.0).round() / 100.0
            };
            Value::Number(v)
        };
        let mut rows = Vec::new();
        let times = self.temporal().map(|t| {
            let [lo, hi] = t.span.expect("validated span");
            Timestamp::series(lo, hi)
        });
        for c in &cat.choices {
            match &times {
                Some(ts) => {
                    for t in ts {
                        let mut row = vec![Value::Text(c.clone()), Value::Time(*t)];
                        row.extend(quants.iter().map(|q| value(q)));
                        rows.push(row);
                    }
                }
                None => {
                    let mut row = vec![Value::Text(c.clone())];
                    row.extend(quants.iter().map(|q| value(q)));
                    rows.push(row);
                }
            }
        }
        let encodings = match self.temporal() {
            Some(t) => Encodings {
                x: t.name.clone(),
                y: quants[0].name.clone(),
                color: Some(cat.name.clone()),
            },
            None => Encodings {
                x: cat.name.clone(),
                y: quants[0].name.clone(),
                color: None,
            },
        };
        ChartSpec {
            attributes: self.attrs.clone(),
            rows,
            mark: self.mark(),
            encodings,
            channel_bindings: cat
                .choices
                .iter()
                .enumerate()
                .map(|(i, c)| ChannelBinding {
                    channel: Channel::Color,
                    value: PALETTE[i].to_string(),
                    choice: c.clone(),
                })
                .collect(),
        }
    }
}

fn domain_combos(d: &DomainVocab) -> Vec<AttributeCombo> {
    let of = |k: AttrType| {
        d.attributes
            .iter()
            .filter(move |a| a.kind == k)
            .cloned()
            .collect::<Vec<_>>()
    };
    let (cats, temps, quants) = (
        of(AttrType::Categorical),
        of(AttrType::Temporal),
        of(AttrType::Quantitative),
    );
    let mut out = Vec::new();
    for c in &cats {
        for q in &quants {
            out.push(AttributeCombo::new(&d.domain, vec![c.clone(), q.clone()]));
            for t in &temps {
                out.push(AttributeCombo::new(&d.domain, vec![c.clone(), t.clone(), q.clone()]));
            }
        }
        for (i, q1) in quants.iter().enumerate() {
            for q2 in &quants[i + 1..] {
                out.push(AttributeCombo::new(&d.domain, vec![c.clone(), q1.clone(), q2.clone()]));
            }
        }
    }
    out
}

/// Draw `config.combos` attribute combinations, at least one per domain
/// (when the count allows), round-robin over shuffled per-domain lists.
pub fn gen_combos(config: &GenConfig, vocab: &Vocabulary) -> Result<Vec<AttributeCombo>, GenError> {
    vocab.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pools: Vec<Vec<AttributeCombo>> = vocab
        .domains
        .iter()
        .map(|d| {
            let mut v = domain_combos(d);
            v.shuffle(&mut rng);
            v.reverse();
            v
        })
        .collect();
    let mut out = Vec::with_capacity(config.combos);
    while out.len() < config.combos {
        let before = out.len();
        for pool in pools.iter_mut() {
            if out.len() == config.combos {
                break;
            }
            if let Some(c) = pool.pop() {
                out.push(c);
            }
        }
        if out.len() == before {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_vocabulary_is_valid_and_broad() {
        let v = Vocabulary::bundled();
        v.validate().unwrap();
        assert!(v.domains.len() >= 65);
    }

    #[test]
    fn default_combos_cover_every_domain_and_signature() {
        let v = Vocabulary::bundled();
        let combos = gen_combos(&GenConfig::default(), &v).unwrap();
        assert_eq!(combos.len(), 486);
        let domains: BTreeSet<_> = combos.iter().map(|c| c.domain.as_str()).collect();
        assert_eq!(domains.len(), v.domains.len());
        let sigs: BTreeSet<_> = combos.iter().map(|c| c.signature).collect();
        assert_eq!(sigs.len(), 3);
        let ids: BTreeSet<_> = combos.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids.len(), combos.len());
        assert_eq!(combos, gen_combos(&GenConfig::default(), &v).unwrap());
    }

    #[test]
    fn combo_charts_load() {
        let v = Vocabulary::bundled();
        for c in gen_combos(&GenConfig::default(), &v).unwrap().iter().step_by(7) {
            let spec = c.chart_spec();
            ChartSpec::from_json(spec.to_json()).unwrap_or_else(|e| panic!("{}: {e}", c.id));
        }
    }

    #[test]
    fn computer_science_listing() {
        let v = Vocabulary::bundled();
        let d = v.domains.iter().find(|d| d.domain == "computer science").unwrap();
        let combos = domain_combos(d);
        assert!(combos
            .iter()
            .any(|c| c.id == "computer science: programming language + year + number of users"));
    }

    #[test]
    fn missing_directory_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Vocabulary::load_dir(dir.path()),
            Err(GenError::VocabMissing(_))
        ));
        assert!(matches!(
            Vocabulary::load_dir(&dir.path().join("nope")),
            Err(GenError::VocabMissing(_))
        ));
        std::fs::write(
            dir.path().join("x.json"),
            r#"{"domain": "x", "attributes": [{"name": "k", "type": "categorical", "choices": ["a", "b", "c", "d"]}, {"name": "v", "type": "quantitative", "range": [0, 1]}]}"#,
        )
        .unwrap();
        assert_eq!(Vocabulary::load_dir(dir.path()).unwrap().domains.len(), 1);
    }
}
