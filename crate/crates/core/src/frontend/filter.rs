//! Deciding whether a request names a physical object, and which.

use serde::{Deserialize, Serialize};

use super::{FrontendError, LanguageModelClient};

/// Default instruction sent to the language model.
pub const DEFAULT_INSTRUCTION: &str = "Your task is to analyze the given text and determine whether it refers to a physical object or shape that is not an abstract idea. If it refers to something physical, return the relevant phrase that describes it; otherwise, respond with 'false.'";

/// Longest model response accepted as an object phrase.
pub const MAX_RESPONSE_CHARS: usize = 200;

pub const RESTATE_MESSAGE: &str =
    "That does not describe a physical object. Please restate your command as a request for an object to assemble.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidedPrompt {
    pub instruction: String,
    pub few_shot_examples: Vec<FewShot>,
}

impl Default for GuidedPrompt {
    fn default() -> Self {
        let shot = |input: &str, output: &str| FewShot {
            input: input.into(),
            output: output.into(),
        };
        Self {
            instruction: DEFAULT_INSTRUCTION.into(),
            few_shot_examples: vec![shot("I need a shelf", "shelf"), shot("Knowledge", "false")],
        }
    }
}

impl GuidedPrompt {
    /// Instruction followed by the worked examples.
    pub fn render(&self) -> String {
        let mut s = self.instruction.trim().to_string();
        if !self.few_shot_examples.is_empty() {
            s.push_str("\n\nExamples:");
            for ex in &self.few_shot_examples {
                s.push_str(&format!("\nText: \"{}\"\nResponse: \"{}\"", ex.input, ex.output));
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRequest {
    pub raw_text: String,
    pub extracted_phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub raw_text: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FilterOutcome {
    Object(ObjectRequest),
    Rejected(Rejection),
}

impl FilterOutcome {
    fn reject(raw: &str) -> Self {
        FilterOutcome::Rejected(Rejection {
            raw_text: raw.into(),
            message: RESTATE_MESSAGE.into(),
        })
    }

    fn object(raw: &str, phrase: String) -> Self {
        FilterOutcome::Object(ObjectRequest {
            raw_text: raw.into(),
            extracted_phrase: phrase,
        })
    }

    pub fn phrase(&self) -> Option<&str> {
        match self {
            FilterOutcome::Object(o) => Some(&o.extracted_phrase),
            FilterOutcome::Rejected(_) => None,
        }
    }
}

fn is_false(response: &str) -> bool {
    let t = response
        .trim()
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '`'))
        .trim_end_matches('.')
        .trim();
    t.eq_ignore_ascii_case("false")
}

/// Asks the model. The phrase is the trimmed response, untouched; a response
/// of `false` (any case, optionally quoted) or anything overlong is a
/// rejection.
pub fn filter_request(
    text: &str,
    client: &dyn LanguageModelClient,
    prompt: &GuidedPrompt,
) -> Result<FilterOutcome, FrontendError> {
    if text.trim().is_empty() {
        return Err(FrontendError::EmptyInput);
    }
    let response = client.complete(&prompt.render(), text)?;
    let phrase = response.trim();
    if phrase.is_empty() || phrase.chars().count() > MAX_RESPONSE_CHARS || is_false(phrase) {
        return Ok(FilterOutcome::reject(text));
    }
    Ok(FilterOutcome::object(text, phrase.to_string()))
}

const SCAFFOLDING: &[&str] = &[
    "please",
    "can you",
    "could you",
    "i want",
    "i need",
    "i would like",
    "i'd like",
    "make me",
    "build me",
    "assemble me",
    "create",
    "make",
    "build",
    "assemble",
    "a",
    "an",
    "the",
    "some",
];

const PURPOSE_MARKERS: &[&str] = &["to", "for", "that", "which", "so"];

/// Words that never name something to build.
pub const DEFAULT_ABSTRACT_LEXICON: &[&str] = &[
    "knowledge",
    "beauty",
    "memories",
    "memory",
    "love",
    "happiness",
    "joy",
    "hope",
    "peace",
    "freedom",
    "wisdom",
    "truth",
    "time",
    "idea",
    "ideas",
    "something",
    "anything",
    "nothing",
    "everything",
    "happy",
    "sad",
    "calm",
    "fun",
    "better",
    "smile",
];

/// Offline substitute for the model: strips request phrasing, cuts at the
/// first purpose clause, and rejects abstract heads.
pub fn fallback_filter(text: &str) -> FilterOutcome {
    fallback_filter_with(text, DEFAULT_ABSTRACT_LEXICON)
}

pub fn fallback_filter_with<S: AsRef<str>>(text: &str, lexicon: &[S]) -> FilterOutcome {
    let lowered = text.to_lowercase();
    let words: Vec<&str> = lowered
        .split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '-'))
        .filter(|w| !w.is_empty())
        .collect();

    let mut rest = &words[..];
    'strip: loop {
        for lead in SCAFFOLDING {
            let lead: Vec<&str> = lead.split(' ').collect();
            if rest.len() >= lead.len() && rest[..lead.len()] == lead[..] {
                rest = &rest[lead.len()..];
                continue 'strip;
            }
        }
        break;
    }
    let cut = rest
        .iter()
        .position(|w| PURPOSE_MARKERS.contains(w))
        .unwrap_or(rest.len());
    let phrase = &rest[..cut];

    let abstract_word = |w: &str| lexicon.iter().any(|l| l.as_ref() == w);
    match phrase.last() {
        Some(head) if !abstract_word(head) => FilterOutcome::object(text, phrase.join(" ")),
        _ => FilterOutcome::reject(text),
    }
}
