//! Multi-hypothesis elicitation: ask the backend for 1..K structurally
//! diverse SQL realizations of the question and parse them into records.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llmio::{Backend, ChatMessage, Usage};

pub const HYPOTHESIS_TEMPLATE: &str = include_str!("../templates/hypothesis.txt");

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum StructuralDimension {
    JoinRoute,
    FilterEncoding,
    AggregationGranularity,
    TemporalInterpretation,
    Other,
}

impl fmt::Display for StructuralDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StructuralDimension::JoinRoute => "join_route",
            StructuralDimension::FilterEncoding => "filter_encoding",
            StructuralDimension::AggregationGranularity => "aggregation_granularity",
            StructuralDimension::TemporalInterpretation => "temporal_interpretation",
            StructuralDimension::Other => "other",
        };
        f.write_str(s)
    }
}

impl FromStr for StructuralDimension {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_lowercase().as_str() {
            "join_route" => StructuralDimension::JoinRoute,
            "filter_encoding" => StructuralDimension::FilterEncoding,
            "aggregation_granularity" => StructuralDimension::AggregationGranularity,
            "temporal_interpretation" => StructuralDimension::TemporalInterpretation,
            _ => StructuralDimension::Other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub index: u32,
    pub entities: Vec<String>,
    pub filters: Vec<String>,
    pub joins: Vec<String>,
    pub aggregations: Vec<String>,
    pub ambiguity_notes: Vec<String>,
    pub structural_dimensions: BTreeSet<StructuralDimension>,
}

impl Hypothesis {
    pub fn is_descriptive(&self) -> bool {
        !(self.entities.is_empty()
            && self.filters.is_empty()
            && self.joins.is_empty()
            && self.aggregations.is_empty())
    }

    /// Structured text block, the same shape the parser reads.
    pub fn to_text(&self) -> String {
        let mut out = format!("### Hypothesis {}\n", self.index);
        let mut line = |label: &str, items: &[String]| {
            if !items.is_empty() {
                out.push_str(&format!("{label}: {}\n", items.join("; ")));
            }
        };
        line("entities", &self.entities);
        line("filters", &self.filters);
        line("joins", &self.joins);
        line("aggregations", &self.aggregations);
        line("ambiguity_notes", &self.ambiguity_notes);
        if !self.structural_dimensions.is_empty() {
            let dims: Vec<String> = self
                .structural_dimensions
                .iter()
                .map(|d| d.to_string())
                .collect();
            out.push_str(&format!("dimensions: {}\n", dims.join(", ")));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub question: String,
    pub hypotheses: Vec<Hypothesis>,
    pub k: u32,
    /// The model emitted more than K blocks and the tail was dropped.
    pub truncated: bool,
    /// Output was unparseable after the repair re-prompt; a single degenerate
    /// hypothesis echoing the question stands in.
    pub fallback: bool,
}

impl HypothesisSet {
    pub fn m(&self) -> u32 {
        self.hypotheses.len() as u32
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

/// Parse hypothesis blocks out of model output. Indices are reassigned
/// 1-based in order of appearance.
pub fn parse_hypotheses(text: &str) -> Result<Vec<Hypothesis>> {
    let mut out: Vec<Hypothesis> = Vec::new();
    let mut current: Option<Hypothesis> = None;
    for raw in text.lines() {
        let line = raw.trim();
        let lower = line.to_lowercase();
        if lower.starts_with("### hypothesis") || lower.starts_with("## hypothesis") {
            if let Some(h) = current.take() {
                out.push(h);
            }
            current = Some(Hypothesis {
                index: out.len() as u32 + 2, // placeholder, reassigned below
                entities: Vec::new(),
                filters: Vec::new(),
                joins: Vec::new(),
                aggregations: Vec::new(),
                ambiguity_notes: Vec::new(),
                structural_dimensions: BTreeSet::new(),
            });
            continue;
        }
        let Some(h) = current.as_mut() else { continue };
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        match key.trim().to_lowercase().as_str() {
            "entities" => h.entities = split_list(value),
            "filters" => h.filters = split_list(value),
            "joins" => h.joins = split_list(value),
            "aggregations" => h.aggregations = split_list(value),
            "ambiguity_notes" => h.ambiguity_notes = split_list(value),
            "dimensions" => {
                h.structural_dimensions = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().unwrap_or(StructuralDimension::Other))
                    .collect();
            }
            _ => {}
        }
    }
    if let Some(h) = current.take() {
        out.push(h);
    }
    out.retain(Hypothesis::is_descriptive);
    if out.is_empty() {
        return Err(Error::Parse("no hypothesis blocks found".into()));
    }
    for (i, h) in out.iter_mut().enumerate() {
        h.index = i as u32 + 1;
    }
    Ok(out)
}

fn degenerate(question: &str) -> Hypothesis {
    Hypothesis {
        index: 1,
        entities: vec![question.to_string()],
        filters: Vec::new(),
        joins: Vec::new(),
        aggregations: Vec::new(),
        ambiguity_notes: vec!["fallback: hypothesis elicitation output was unparseable".into()],
        structural_dimensions: [StructuralDimension::Other].into_iter().collect(),
    }
}

pub fn elicitation_messages(question: &str, schema_view: &str, k: u32) -> Vec<ChatMessage> {
    let system = HYPOTHESIS_TEMPLATE.replace("{K}", &k.to_string());
    let user = format!("Question: {question}\n\nSchema:\n{schema_view}");
    vec![ChatMessage::system(system), ChatMessage::user(user)]
}

/// Elicit 1..K hypotheses. One repair re-prompt on parse failure, then a
/// flagged degenerate fallback.
pub fn elicit_hypotheses(
    question: &str,
    schema_view: &str,
    k: u32,
    backend: &dyn Backend,
) -> Result<(HypothesisSet, Vec<Usage>)> {
    if k < 1 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    let mut messages = elicitation_messages(question, schema_view, k);
    let mut usages = Vec::new();
    let (reply, usage) = backend.complete(&messages, &[])?;
    usages.push(usage);

    let parsed = match parse_hypotheses(&reply.content) {
        Ok(h) => Ok(h),
        Err(_) => {
            messages.push(reply);
            messages.push(ChatMessage::user(
                "Your previous reply could not be parsed. Reply again using only the \
                 `### Hypothesis N` block format described in the instructions.",
            ));
            let (repair, usage) = backend.complete(&messages, &[])?;
            usages.push(usage);
            parse_hypotheses(&repair.content)
        }
    };

    let (mut hypotheses, fallback) = match parsed {
        Ok(h) => (h, false),
        Err(_) => (vec![degenerate(question)], true),
    };
    let truncated = hypotheses.len() as u32 > k;
    hypotheses.truncate(k as usize);

    Ok((
        HypothesisSet {
            question: question.to_string(),
            hypotheses,
            k,
            truncated,
            fallback,
        },
        usages,
    ))
}

/// Advisory pairwise diversity check: a warning per pair of hypotheses whose
/// dimension tags and descriptive lists are all identical.
pub fn check_diversity(set: &HypothesisSet) -> Vec<String> {
    let hs = &set.hypotheses;
    if hs.len() < 2 {
        return Vec::new();
    }
    let mut warnings = Vec::new();
    for i in 0..hs.len() {
        for j in (i + 1)..hs.len() {
            let (a, b) = (&hs[i], &hs[j]);
            if a.structural_dimensions == b.structural_dimensions
                && a.entities == b.entities
                && a.filters == b.filters
                && a.joins == b.joins
                && a.aggregations == b.aggregations
                && a.ambiguity_notes == b.ambiguity_notes
            {
                warnings.push(format!(
                    "hypotheses {} and {} are identical in all structural dimensions",
                    a.index, b.index
                ));
            }
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmio::{ScriptedBackend, ScriptedResponse, request_key};

    fn scripted(question: &str, view: &str, k: u32, reply: &str) -> ScriptedBackend {
        let mut backend = ScriptedBackend::default();
        let key = request_key(&elicitation_messages(question, view, k), &[]);
        backend.insert(
            key,
            ScriptedResponse {
                message: ChatMessage::assistant(reply),
                usage: Usage::new(100, 20),
            },
        );
        backend
    }

    const TWO_BLOCKS: &str = "\
### Hypothesis 1
entities: orders
joins: orders to users via user_id
dimensions: join_route

### Hypothesis 2
entities: orders
filters: country on users
dimensions: filter_encoding
";

    #[test]
    fn parse_two_blocks() {
        let hs = parse_hypotheses(TWO_BLOCKS).unwrap();
        assert_eq!(hs.len(), 2);
        assert_eq!(hs[0].index, 1);
        assert_eq!(hs[0].joins, vec!["orders to users via user_id"]);
        assert!(hs[1]
            .structural_dimensions
            .contains(&StructuralDimension::FilterEncoding));
    }

    #[test]
    fn round_trip() {
        let hs = parse_hypotheses(TWO_BLOCKS).unwrap();
        let text: String = hs.iter().map(|h| h.to_text() + "\n").collect();
        assert_eq!(parse_hypotheses(&text).unwrap(), hs);
    }

    #[test]
    fn single_hypothesis_allowed() {
        let backend = scripted("q", "v", 4, "### Hypothesis 1\nentities: users\n");
        let (set, _) = elicit_hypotheses("q", "v", 4, &backend).unwrap();
        assert_eq!(set.m(), 1);
        assert!(!set.truncated);
        assert!(!set.fallback);
    }

    #[test]
    fn clamps_to_k_and_flags() {
        let mut reply = String::new();
        for i in 1..=5 {
            reply.push_str(&format!("### Hypothesis {i}\nentities: e{i}\n\n"));
        }
        let backend = scripted("q", "v", 4, &reply);
        let (set, _) = elicit_hypotheses("q", "v", 4, &backend).unwrap();
        assert_eq!(set.m(), 4);
        assert!(set.truncated);
    }

    #[test]
    fn unparseable_falls_back_after_repair() {
        // first reply and repair reply are both garbage
        let question = "q";
        let view = "v";
        let mut backend = ScriptedBackend::default();
        let base = elicitation_messages(question, view, 4);
        backend.insert(
            request_key(&base, &[]),
            ScriptedResponse {
                message: ChatMessage::assistant("no blocks here"),
                usage: Usage::new(1, 1),
            },
        );
        let mut repair_msgs = base;
        repair_msgs.push(ChatMessage::assistant("no blocks here"));
        repair_msgs.push(ChatMessage::user(
            "Your previous reply could not be parsed. Reply again using only the \
             `### Hypothesis N` block format described in the instructions.",
        ));
        backend.insert(
            request_key(&repair_msgs, &[]),
            ScriptedResponse {
                message: ChatMessage::assistant("still garbage"),
                usage: Usage::new(1, 1),
            },
        );
        let (set, usages) = elicit_hypotheses(question, view, 4, &backend).unwrap();
        assert!(set.fallback);
        assert_eq!(set.m(), 1);
        assert_eq!(usages.len(), 2);
    }

    #[test]
    fn diversity_warnings() {
        let hs = parse_hypotheses(TWO_BLOCKS).unwrap();
        let mut set = HypothesisSet {
            question: "q".into(),
            hypotheses: hs,
            k: 4,
            truncated: false,
            fallback: false,
        };
        assert!(check_diversity(&set).is_empty());
        // duplicate the first hypothesis
        let mut dup = set.hypotheses[0].clone();
        dup.index = 3;
        set.hypotheses.push(dup);
        assert_eq!(check_diversity(&set).len(), 1);
        // single hypothesis -> vacuous
        set.hypotheses.truncate(1);
        assert!(check_diversity(&set).is_empty());
    }
}
