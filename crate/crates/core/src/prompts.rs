//! Prompt templates for the judge, inverse-instruction, bug-injection and
//! reward-model system prompts. The texts live in `templates/` and are
//! treated as opaque data; this module only fills `{{placeholders}}` and
//! pulls tagged sections out of replies.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::types::{Criterion, Language};

pub const SALIENCY_SYSTEM: &str = include_str!("../templates/saliency_system.txt");
pub const SALIENCY_USER: &str = include_str!("../templates/saliency_user.txt");
pub const INVERSE_SYSTEM: &str = include_str!("../templates/inverse_system.txt");
pub const INVERSE_USER: &str = include_str!("../templates/inverse_user.txt");
pub const BUGGING_SYSTEM: &str = include_str!("../templates/bugging_system.txt");
pub const BUGGING_USER: &str = include_str!("../templates/bugging_user.txt");
pub const PRINCIPLES_ALL: &str = include_str!("../templates/principles_all.txt");
const CONTENT_STYLES: &str = include_str!("../templates/content_styles.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unfilled placeholder {{{{{0}}}}}")]
    Unfilled(String),
}

/// Substitute every `{{key}}` in `template`. Any placeholder left without a
/// value is an error.
pub fn render(template: &str, vars: &BTreeMap<&str, &str>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else {
            out.push_str(&rest[start..]);
            return Ok(out);
        };
        let key = &after[..end];
        match vars.get(key) {
            Some(v) => out.push_str(v),
            None => return Err(TemplateError::Unfilled(key.to_string())),
        }
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// A system + user message pair sent to a judge model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatPrompt {
    pub system: String,
    pub user: String,
}

/// Commit saliency rubric for one criterion.
pub fn saliency_prompt(
    criterion: Criterion,
    language: Language,
    old_file: &str,
    new_file: &str,
    message: &str,
) -> ChatPrompt {
    let vars = BTreeMap::from([
        ("criteria", criterion.label()),
        ("programming_language", language.as_str()),
        ("old_file_contents", old_file),
        ("new_file_contents", new_file),
        ("commit_message", message),
    ]);
    ChatPrompt {
        system: SALIENCY_SYSTEM.trim_end().to_string(),
        user: render(SALIENCY_USER, &vars).expect("saliency template placeholders are fixed"),
    }
}

/// Names of the problem styles an inverse instruction can imitate.
pub fn content_styles() -> Vec<&'static str> {
    CONTENT_STYLES
        .lines()
        .filter_map(|l| l.split_once(':').map(|(name, _)| name.trim()))
        .collect()
}

/// Inverse-instruction prompt for an (old, new) file pair.
pub fn inverse_instruction_prompt(
    language: Language,
    style: &str,
    old_file: &str,
    new_file: &str,
) -> ChatPrompt {
    let vars = BTreeMap::from([
        ("programming_language", language.as_str()),
        ("problem_style", style),
        ("content_style", style),
        ("old_file_contents", old_file),
        ("new_file_contents", new_file),
    ]);
    ChatPrompt {
        system: INVERSE_SYSTEM.trim_end().to_string(),
        user: render(INVERSE_USER, &vars).expect("inverse template placeholders are fixed"),
    }
}

/// Bug-injection prompt for producing functional-correctness negatives.
pub fn bugging_prompt(language: Language, problem: &str, solution: &str) -> ChatPrompt {
    let lang = BTreeMap::from([("programming_language", language.as_str())]);
    let vars = BTreeMap::from([
        ("programming_language", language.as_str()),
        ("problem_description", problem),
        ("solution_code", solution),
    ]);
    ChatPrompt {
        system: render(BUGGING_SYSTEM.trim_end(), &lang).expect("fixed placeholders"),
        user: render(BUGGING_USER, &vars).expect("fixed placeholders"),
    }
}

fn principle_heading(criterion: Criterion) -> &'static str {
    match criterion {
        Criterion::FC => "**Functional Correctness**",
        Criterion::EE => "**Runtime Efficiency**",
        Criterion::ME => "**Memory Efficiency**",
        Criterion::RM => "**Readability and Maintainability**",
        Criterion::SH => "**Security Hardness**",
    }
}

/// The principle paragraph for one criterion, without its list number.
pub fn principle_block(criterion: Criterion) -> &'static str {
    let heading = principle_heading(criterion);
    PRINCIPLES_ALL
        .split("\n\n")
        .flat_map(|para| para.lines())
        .find_map(|line| {
            let (_, body) = line.split_once(". ")?;
            body.starts_with(heading).then_some(body)
        })
        .expect("every criterion has a principle paragraph")
}

/// Reward-model system prompt listing every principle.
pub fn all_criteria_prompt() -> String {
    PRINCIPLES_ALL.trim_end().to_string()
}

/// Reward-model system prompt that names exactly one criterion.
pub fn single_criterion_prompt(criterion: Criterion) -> String {
    let preamble = PRINCIPLES_ALL
        .split("\n\n")
        .next()
        .expect("principles start with a preamble")
        .trim_end();
    format!(
        "{preamble}\n\nThe following criteria must govern your scoring for the current judgment session:\n\n1. {}",
        principle_block(criterion)
    )
}

/// Text between `[TAG]` and its closing tag. Both `[/TAG]` and `[\TAG]`
/// close a section; the templates use the two spellings interchangeably.
pub fn extract_tagged<'a>(reply: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("[{tag}]");
    let start = reply.find(&open)? + open.len();
    let rest = &reply[start..];
    let closers = [format!("[/{tag}]"), format!("[\\{tag}]")];
    let end = closers.iter().filter_map(|c| rest.find(c.as_str())).min()?;
    Some(rest[..end].trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_fills_and_rejects_missing() {
        let vars = BTreeMap::from([("a", "1")]);
        assert_eq!(render("x{{a}}y{{a}}", &vars).unwrap(), "x1y1");
        assert_eq!(
            render("{{b}}", &vars).unwrap_err(),
            TemplateError::Unfilled("b".into())
        );
    }

    #[test]
    fn saliency_prompt_has_no_placeholders() {
        let p = saliency_prompt(Criterion::ME, Language::Go, "old", "new", "msg");
        assert!(!p.user.contains("{{"));
        assert!(p.user.contains("[OLD_CODE]old[/OLD_CODE]"));
        assert!(p.user.contains("[NEW_CODE]new[/NEW_CODE]"));
        assert!(p.user.contains("[CHANGES]msg[/CHANGES]"));
        assert!(p.user.contains("written in Go"));
        assert!(p.user.starts_with("Code Change Review: Memory Efficiency"));
        assert!(p.user.contains("[RATING]"));
    }

    #[test]
    fn inverse_prompt_fills_styles() {
        let styles = content_styles();
        assert_eq!(styles.len(), 5);
        assert!(styles.contains(&"Stackoverflow Question"));
        let p = inverse_instruction_prompt(Language::Python, styles[0], "a", "b");
        assert!(!p.user.contains("{{"));
        assert!(p.user.contains("[EXAMPLE1]a[/EXAMPLE1]"));
    }

    #[test]
    fn bugging_prompt_fills_language() {
        let p = bugging_prompt(Language::Java, "sum two ints", "return a + b;");
        assert!(p.system.contains("experienced Java developer"));
        assert!(p.user.contains("[REFERENCE_SOLUTION]return a + b;[/REFERENCE_SOLUTION]"));
    }

    #[test]
    fn single_prompt_contains_only_its_principle() {
        let sh = single_criterion_prompt(Criterion::SH);
        assert!(sh.contains("**Security Hardness**: Does the response follow best practices for security hardness?"));
        assert!(!sh.contains("Memory Efficiency"));
        assert!(!sh.contains("Helpfulness"));
        let ee = single_criterion_prompt(Criterion::EE);
        assert!(ee.contains("**Runtime Efficiency**"));
    }

    #[test]
    fn all_prompt_lists_every_principle() {
        let all = all_criteria_prompt();
        for c in Criterion::ALL {
            assert!(all.contains(principle_heading(c)), "{c}");
        }
    }

    #[test]
    fn tagged_extraction_accepts_both_closers() {
        assert_eq!(extract_tagged("x [RATING] 4 [/RATING]", "RATING"), Some("4"));
        assert_eq!(
            extract_tagged("[INSTRUCTION]Do it.[\\INSTRUCTION]", "INSTRUCTION"),
            Some("Do it.")
        );
        assert_eq!(extract_tagged("[RATING]4", "RATING"), None);
        assert_eq!(extract_tagged("nothing", "RATING"), None);
    }
}
