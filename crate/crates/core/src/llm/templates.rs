//! Prompt templates and single-pass placeholder substitution.
//!
//! The five generation prompts are reproduced word for word; the explanation
//! and output-prediction prompts are this project's own.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    UseCases,
    CodeForUseCase,
    SubgoalAnnotate,
    ChangeableAreas,
    ClusterName,
    ExplainSelection,
    PredictOutput,
}

impl PromptKind {
    pub const ALL: [PromptKind; 7] = [
        PromptKind::UseCases,
        PromptKind::CodeForUseCase,
        PromptKind::SubgoalAnnotate,
        PromptKind::ChangeableAreas,
        PromptKind::ClusterName,
        PromptKind::ExplainSelection,
        PromptKind::PredictOutput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::UseCases => "use_cases",
            PromptKind::CodeForUseCase => "code_for_use_case",
            PromptKind::SubgoalAnnotate => "subgoal_annotate",
            PromptKind::ChangeableAreas => "changeable_areas",
            PromptKind::ClusterName => "cluster_name",
            PromptKind::ExplainSelection => "explain_selection",
            PromptKind::PredictOutput => "predict_output",
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            PromptKind::UseCases => USE_CASES,
            PromptKind::CodeForUseCase => CODE_FOR_USE_CASE,
            PromptKind::SubgoalAnnotate => SUBGOAL_ANNOTATE,
            PromptKind::ChangeableAreas => CHANGEABLE_AREAS,
            PromptKind::ClusterName => CLUSTER_NAME,
            PromptKind::ExplainSelection => EXPLAIN_SELECTION,
            PromptKind::PredictOutput => PREDICT_OUTPUT,
        }
    }

    /// Placeholders the template expects, in order of first appearance.
    pub fn placeholders(self) -> Vec<Placeholder> {
        let t = self.template();
        let mut found: Vec<(usize, Placeholder)> = Placeholder::ALL
            .iter()
            .filter_map(|p| t.find(p.token()).map(|at| (at, *p)))
            .collect();
        found.sort_by_key(|(at, _)| *at);
        found.into_iter().map(|(_, p)| p).collect()
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Placeholder {
    DomainName,
    UseCase,
    FullProgram,
    CodeSnippet,
    ProgramsInCluster,
    Selection,
}

impl Placeholder {
    pub const ALL: [Placeholder; 6] = [
        Placeholder::DomainName,
        Placeholder::UseCase,
        Placeholder::FullProgram,
        Placeholder::CodeSnippet,
        Placeholder::ProgramsInCluster,
        Placeholder::Selection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::DomainName => "DOMAIN_NAME",
            Placeholder::UseCase => "USE_CASE",
            Placeholder::FullProgram => "FULL_PROGRAM",
            Placeholder::CodeSnippet => "CODE_SNIPPET",
            Placeholder::ProgramsInCluster => "PROGRAMS_IN_CLUSTER",
            Placeholder::Selection => "SELECTION",
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Placeholder::DomainName => "{DOMAIN_NAME}",
            Placeholder::UseCase => "{USE_CASE}",
            Placeholder::FullProgram => "{FULL_PROGRAM}",
            Placeholder::CodeSnippet => "{CODE_SNIPPET}",
            Placeholder::ProgramsInCluster => "{PROGRAMS_IN_CLUSTER}",
            Placeholder::Selection => "{SELECTION}",
        }
    }
}

pub const USE_CASES: &str = "Give me 100 use cases of {DOMAIN_NAME}. A use case describes a task you can achieve with the given library. For example, for the math library in Python, calculating the area of a circle would be an appropriately specific use case, but doing calculations would be too general. List these use cases without any comments before or after. Basically, just give me a list of use cases and no other text. In addition, these use cases should be appropriate for instruction for novices.";

pub const CODE_FOR_USE_CASE: &str = "Write code to use {DOMAIN_NAME} to achieve the task I give to you. Return the code block without any text before or after. Basically, just give me the code block and no other text. \n\nWrite code to do the following: {USE_CASE}.";

pub const SUBGOAL_ANNOTATE: &str = "For this piece of code, instead of putting a comment for every line, could you combine comments to add subgoals? Subgoals should describe small chunks of code that achieve a task that can be explained in natural language, rather than describing the code on a single line. Each subgoal should be put as a comment before the code starts. \n\nHere is the code: {FULL_PROGRAM}.";

pub const CHANGEABLE_AREAS: &str = "We define a domain-specific programming plan as a piece of code common in programs from a particular application area (e.g., web parsing) that achieves a specific goal. I am providing you with a piece of code. Based on this definition, can you highlight the changeable areas?  Changeable areas are the parts of the idiom that would change when it is used in different scenarios. Could you give me the exact block of code from the line that would change. Don't give me the whole line. Just give me the part of the line that would change. For example, if just the URL changes in a line, give me just the URL. Give me each of these in a code block. List these code blocks without any comments before or after. Basically, just give me a list of code blocks of code parts that would change and no other text. \n\nHere is the code: {CODE_SNIPPET}";

pub const CLUSTER_NAME: &str = "I am giving you a cluster with comments which are the goals of some pieces of code along with the code. Come up with a name for this cluster of plans. Programming plans are pieces of code common in programs from a particular application area that are used to achieve a given goal. A name is reflective of what that plan achieves. So produce a name that would help me understand what goal the code  will be achieving. To reiterate, be very specific, and consider what each subgoal is doing. Do not consider the context. Just consider what the code is doing. Return the result to me in the form of the following string, \"Name: \". \n\nHere is the cluster: {PROGRAMS_IN_CLUSTER}";

pub const EXPLAIN_SELECTION: &str = "You are helping a programming instructor read example code. Explain in two or three sentences what the selected code does in the context of the full program. Keep the explanation accessible to novice programmers and do not restate the code.\n\nFull program:\n{FULL_PROGRAM}\n\nSelected code:\n{SELECTION}";

/// Output marker the prediction template asks for.
pub const OUTPUT_DELIMITER: &str = "OUTPUT:";

pub const PREDICT_OUTPUT: &str = "Walk through the following code step by step and predict exactly what it prints to standard output. Reason about each statement in turn. When you are done, write a line containing only OUTPUT: followed by the predicted output and nothing else. If the code prints nothing, leave the section after OUTPUT: empty.\n\nCode:\n{CODE_SNIPPET}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingPlaceholder(pub Placeholder);

/// Substitutes placeholder values in one left-to-right pass, so values that
/// happen to contain placeholder tokens are never expanded.
pub fn render(kind: PromptKind, values: &[(Placeholder, &str)]) -> Result<String, MissingPlaceholder> {
    let template = kind.template();
    let mut out = String::with_capacity(template.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let matched = Placeholder::ALL.iter().find(|p| rest[open..].starts_with(p.token()));
        out.push_str(&rest[..open]);
        match matched {
            Some(p) => {
                let value = values.iter().find(|(k, _)| k == p).ok_or(MissingPlaceholder(*p))?.1;
                out.push_str(value);
                rest = &rest[open + p.token().len()..];
            }
            None => {
                out.push('{');
                rest = &rest[open + 1..];
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_per_kind() {
        assert_eq!(PromptKind::UseCases.placeholders(), vec![Placeholder::DomainName]);
        assert_eq!(PromptKind::CodeForUseCase.placeholders(), vec![Placeholder::DomainName, Placeholder::UseCase]);
        assert_eq!(PromptKind::SubgoalAnnotate.placeholders(), vec![Placeholder::FullProgram]);
        assert_eq!(PromptKind::ChangeableAreas.placeholders(), vec![Placeholder::CodeSnippet]);
        assert_eq!(PromptKind::ClusterName.placeholders(), vec![Placeholder::ProgramsInCluster]);
        assert_eq!(PromptKind::ExplainSelection.placeholders(), vec![Placeholder::FullProgram, Placeholder::Selection]);
        assert_eq!(PromptKind::PredictOutput.placeholders(), vec![Placeholder::CodeSnippet]);
    }

    #[test]
    fn single_pass_substitution() {
        let out = render(PromptKind::CodeForUseCase, &[(Placeholder::DomainName, "{USE_CASE}"), (Placeholder::UseCase, "x")])
            .unwrap();
        assert!(out.starts_with("Write code to use {USE_CASE} to achieve"));
        assert!(out.ends_with("Write code to do the following: x."));
    }

    #[test]
    fn missing_value_is_reported() {
        assert_eq!(render(PromptKind::UseCases, &[]), Err(MissingPlaceholder(Placeholder::DomainName)));
    }
}
