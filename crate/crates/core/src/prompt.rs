use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::input_builder::ReconstructedInput;

pub const DEFAULT_MARKER: &str = "<VIRTUAL_PROMPT>";
pub const DEFAULT_TEMPLATE: &str = "<VIRTUAL_PROMPT> Input: {input}\n Output:{output}";
const INPUT: &str = "{input}";
const OUTPUT: &str = "{output}";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template is missing the {0} placeholder")]
    Missing(&'static str),
    #[error("template contains the {0} placeholder more than once")]
    Repeated(&'static str),
    #[error("template must place {{input}} before {{output}}")]
    Order,
}

/// A template with exactly one `{input}` followed by exactly one `{output}`.
///
/// The literal text is split once at construction, so substituted values are
/// never rescanned for placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TemplateRepr", into = "TemplateRepr")]
pub struct PromptTemplate {
    template: String,
    virtual_marker: String,
    head: String,
    middle: String,
    tail: String,
}

#[derive(Serialize, Deserialize)]
struct TemplateRepr {
    template: String,
    #[serde(default = "default_marker")]
    virtual_marker: String,
}

fn default_marker() -> String {
    DEFAULT_MARKER.to_string()
}

impl TryFrom<TemplateRepr> for PromptTemplate {
    type Error = TemplateError;

    fn try_from(r: TemplateRepr) -> Result<Self, Self::Error> {
        PromptTemplate::with_marker(&r.template, &r.virtual_marker)
    }
}

impl From<PromptTemplate> for TemplateRepr {
    fn from(t: PromptTemplate) -> Self {
        TemplateRepr {
            template: t.template,
            virtual_marker: t.virtual_marker,
        }
    }
}

impl PromptTemplate {
    pub fn new(template: &str) -> Result<Self, TemplateError> {
        Self::with_marker(template, DEFAULT_MARKER)
    }

    pub fn with_marker(template: &str, marker: &str) -> Result<Self, TemplateError> {
        for p in [INPUT, OUTPUT] {
            match template.matches(p).count() {
                0 => return Err(TemplateError::Missing(p)),
                1 => {}
                _ => return Err(TemplateError::Repeated(p)),
            }
        }
        let i = template.find(INPUT).unwrap();
        let o = template.find(OUTPUT).unwrap();
        if o < i + INPUT.len() {
            return Err(TemplateError::Order);
        }
        Ok(PromptTemplate {
            template: template.to_string(),
            virtual_marker: marker.to_string(),
            head: template[..i].to_string(),
            middle: template[i + INPUT.len()..o].to_string(),
            tail: template[o + OUTPUT.len()..].to_string(),
        })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn virtual_marker(&self) -> &str {
        &self.virtual_marker
    }

    pub fn render_text(&self, input: &str, output: &str) -> String {
        let mut s = String::with_capacity(
            self.head.len() + input.len() + self.middle.len() + output.len() + self.tail.len(),
        );
        s.push_str(&self.head);
        s.push_str(input);
        s.push_str(&self.middle);
        s.push_str(output);
        s.push_str(&self.tail);
        s
    }

    /// Training-mode rendering; pass `""` as `output` for inference.
    pub fn render(&self, input: &ReconstructedInput, output: &str) -> String {
        self.render_text(&input.serialize(), output)
    }

    pub fn render_inference(&self, input: &ReconstructedInput) -> String {
        self.render(input, "")
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new(DEFAULT_TEMPLATE).expect("default template is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_template_literal() {
        let t = PromptTemplate::default();
        assert_eq!(
            t.render_text("X", "Y"),
            "<VIRTUAL_PROMPT> Input: X\n Output:Y"
        );
        assert_eq!(
            t.render_text("X", ""),
            "<VIRTUAL_PROMPT> Input: X\n Output:"
        );
        assert_eq!(t.virtual_marker(), "<VIRTUAL_PROMPT>");
    }

    #[test]
    fn placeholders_in_values_are_not_expanded() {
        let t = PromptTemplate::default();
        assert_eq!(
            t.render_text("{output}", "{input}"),
            "<VIRTUAL_PROMPT> Input: {output}\n Output:{input}"
        );
    }

    #[test]
    fn invalid_templates() {
        assert_eq!(
            PromptTemplate::new("Input: {input}"),
            Err(TemplateError::Missing("{output}"))
        );
        assert_eq!(
            PromptTemplate::new("{output}"),
            Err(TemplateError::Missing("{input}"))
        );
        assert_eq!(
            PromptTemplate::new("{input}{input}{output}"),
            Err(TemplateError::Repeated("{input}"))
        );
        assert_eq!(
            PromptTemplate::new("{output} {input}"),
            Err(TemplateError::Order)
        );
    }

    #[test]
    fn serde_validates() {
        let t: PromptTemplate =
            serde_json::from_str(r#"{"template":"A {input} B {output}"}"#).unwrap();
        assert_eq!(t.render_text("1", "2"), "A 1 B 2");
        assert!(serde_json::from_str::<PromptTemplate>(r#"{"template":"A {input}"}"#).is_err());
    }

    proptest! {
        #[test]
        fn render_is_injective_in_input(a in ".{0,20}", b in ".{0,20}", out in ".{0,10}") {
            let t = PromptTemplate::default();
            prop_assert_eq!(a == b, t.render_text(&a, &out) == t.render_text(&b, &out));
        }
    }
}
