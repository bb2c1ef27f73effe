use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseShape {
    BooleanVerdict,
    CodeBlock,
    SignatureBlock,
    FreeText,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: &'static str,
    pub role_preamble: &'static str,
    /// Text with `{{name}}` placeholders.
    pub body: &'static str,
    pub placeholders: &'static [&'static str],
    pub expected_response_shape: ResponseShape,
}

/// A rendered prompt, split the way chat endpoints take it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

impl RenderedPrompt {
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

/// Placeholder names used in `body`, in order of first appearance.
pub fn placeholders_in(body: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = body;
    while let Some(i) = rest.find("{{") {
        let after = &rest[i + 2..];
        match after.find("}}") {
            Some(j) => {
                let name = after[..j].trim().to_string();
                if !out.contains(&name) {
                    out.push(name);
                }
                rest = &after[j + 2..];
            }
            None => break,
        }
    }
    out
}

fn normalize_newlines(s: &str) -> String {
    s.replace("\r\n", "\n").replace('\r', "\n")
}

impl PromptTemplate {
    /// Every declared placeholder is used and every used one is declared.
    pub fn check(&self) -> Result<(), String> {
        let used: BTreeSet<String> = placeholders_in(self.body).into_iter().collect();
        let declared: BTreeSet<String> = self.placeholders.iter().map(|s| s.to_string()).collect();
        if used != declared {
            return Err(format!(
                "template {}: used {:?} but declared {:?}",
                self.template_id, used, declared
            ));
        }
        Ok(())
    }

    pub fn render(&self, substitutions: &BTreeMap<String, String>) -> Result<RenderedPrompt, LlmError> {
        let missing: Vec<String> = self
            .placeholders
            .iter()
            .filter(|p| !substitutions.contains_key(**p))
            .map(|p| p.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(LlmError::MissingPlaceholders { template_id: self.template_id.to_string(), missing });
        }
        let unexpected: Vec<String> =
            substitutions.keys().filter(|k| !self.placeholders.contains(&k.as_str())).cloned().collect();
        if !unexpected.is_empty() {
            return Err(LlmError::UnexpectedPlaceholders { template_id: self.template_id.to_string(), unexpected });
        }
        // Single pass, so substituted text containing `{{x}}` is left alone.
        let mut user = String::with_capacity(self.body.len());
        let mut rest = self.body;
        while let Some(i) = rest.find("{{") {
            user.push_str(&rest[..i]);
            let after = &rest[i + 2..];
            let j = after.find("}}").expect("checked template");
            let name = after[..j].trim();
            user.push_str(substitutions[name].trim_end());
            rest = &after[j + 2..];
        }
        user.push_str(rest);
        Ok(RenderedPrompt { system: normalize_newlines(self.role_preamble), user: normalize_newlines(&user) })
    }
}

/// Renders `template` with `substitutions` into one prompt text.
pub fn render_prompt(template: &PromptTemplate, substitutions: &BTreeMap<String, String>) -> Result<String, LlmError> {
    template.render(substitutions).map(|r| r.text())
}

const PREAMBLE: &str = "You are an expert in the Dafny programming language and its verifier. \
You write code that Dafny accepts without errors and you never weaken a method's requires/ensures contract.";

const JUDGE_PREAMBLE: &str = "You are an expert in the Dafny programming language and in program logic. \
You judge whether a stated property is true, not whether Dafny can prove it unaided.";

pub const DECOMPOSE: &str = "decompose-code";
pub const CONSISTENCY: &str = "decomposition-consistency-check";
pub const GATE: &str = "verifiability-gate";
pub const ASSERTION_GATE: &str = "assertion-correctness-gate";
pub const INVARIANT_GATE: &str = "invariant-correctness-gate";
pub const GENERATE: &str = "generate-body-and-annotations";
pub const AUGMENT: &str = "augment-annotations";
pub const REPAIR: &str = "repair-from-diagnostics";
pub const SUBLEMMA_ASSERTION: &str = "propose-sublemma-for-assertion";
pub const SUBLEMMA_INVARIANT: &str = "propose-sublemma-for-invariant";
pub const STRENGTHEN: &str = "strengthen-callee-contract";
pub const MERGE: &str = "merge-and-restore";

const TEMPLATES: &[PromptTemplate] = &[
    PromptTemplate {
        template_id: DECOMPOSE,
        role_preamble: PREAMBLE,
        body: "Refactor the method `{{method}}` in the program below so that every loop lives in its own auxiliary method.\n\
Each auxiliary method must contain at most one loop. Rewrite `{{method}}` to call them. Keep the requires/ensures clauses \
of `{{method}}` exactly as they are, keep every executable statement, and give each auxiliary method a contract that is \
strong enough for the caller.\n\n\
Parameter passing: {{strategy_description}}\n\n\
Program:\n```dafny\n{{program}}\n```\n\n\
{{feedback}}\n\
Reply with the complete refactored program in one ```dafny code block.",
        placeholders: &["method", "strategy_description", "program", "feedback"],
        expected_response_shape: ResponseShape::CodeBlock,
    },
    PromptTemplate {
        template_id: CONSISTENCY,
        role_preamble: JUDGE_PREAMBLE,
        body: "The method `{{method}}` was split into several methods.\n\nOriginal:\n```dafny\n{{original}}\n```\n\n\
Refactored:\n```dafny\n{{decomposed}}\n```\n\n\
Are all refactored methods verifiable on their own, and do the contracts of the auxiliary methods suffice to prove the \
contract of `{{method}}`? A contract such as `ensures true` does not suffice.\n\
Answer strictly yes or no on the first line, then give a one-line reason.",
        placeholders: &["method", "original", "decomposed"],
        expected_response_shape: ResponseShape::BooleanVerdict,
    },
    PromptTemplate {
        template_id: GATE,
        role_preamble: JUDGE_PREAMBLE,
        body: "Consider this Dafny declaration:\n```dafny\n{{signature}}\n```\n\n\
It is used in the following program:\n```dafny\n{{program}}\n```\n\n\
Proof outline from the user (may be empty):\n{{textual_proof}}\n\n\
Is the declaration logically correct, meaning its postconditions follow from its preconditions, so that a proof or \
implementation can exist?\nAnswer strictly yes or no.",
        placeholders: &["signature", "program", "textual_proof"],
        expected_response_shape: ResponseShape::BooleanVerdict,
    },
    PromptTemplate {
        template_id: ASSERTION_GATE,
        role_preamble: JUDGE_PREAMBLE,
        body: "Dafny could not prove this assertion:\n```dafny\n{{assertion}}\n```\n\nProgram:\n```dafny\n{{program}}\n```\n\n\
Is the assertion true at that point of the program, so that a helper lemma could establish it?\n\
Answer strictly yes or no.",
        placeholders: &["assertion", "program"],
        expected_response_shape: ResponseShape::BooleanVerdict,
    },
    PromptTemplate {
        template_id: INVARIANT_GATE,
        role_preamble: JUDGE_PREAMBLE,
        body: "Dafny could not prove this loop invariant:\n```dafny\n{{invariant}}\n```\n\nProgram:\n```dafny\n{{program}}\n```\n\n\
Is the invariant true on loop entry and preserved by every iteration, so that a helper lemma could establish it?\n\
Answer strictly yes or no.",
        placeholders: &["invariant", "program"],
        expected_response_shape: ResponseShape::BooleanVerdict,
    },
    PromptTemplate {
        template_id: GENERATE,
        role_preamble: PREAMBLE,
        body: "Write the body of this declaration, including every loop invariant, assertion and lemma call the verifier \
needs:\n```dafny\n{{signature}}\n```\n\n\
It belongs to this program, where declarations marked {:axiom} may be called and are assumed:\n```dafny\n{{program}}\n```\n\n\
Proof outline from the user (may be empty):\n{{textual_proof}}\n\n\
Already verified lemmas you may call:\n{{reusable_lemmas}}\n\n\
{{feedback}}\n\
Attempt {{attempt}}. Reply with the complete declaration (signature unchanged, with body) in one ```dafny code block.",
        placeholders: &["signature", "program", "textual_proof", "reusable_lemmas", "feedback", "attempt"],
        expected_response_shape: ResponseShape::CodeBlock,
    },
    PromptTemplate {
        template_id: AUGMENT,
        role_preamble: PREAMBLE,
        body: "Add the loop invariants, assertions and lemma calls the verifier needs to this declaration. Do not change its \
signature, its contract or any executable statement:\n```dafny\n{{body}}\n```\n\n\
Program, where declarations marked {:axiom} may be called and are assumed:\n```dafny\n{{program}}\n```\n\n\
Proof outline from the user (may be empty):\n{{textual_proof}}\n\n\
Already verified lemmas you may call:\n{{reusable_lemmas}}\n\n\
{{feedback}}\n\
Attempt {{attempt}}. Reply with the complete annotated declaration in one ```dafny code block.",
        placeholders: &["body", "program", "textual_proof", "reusable_lemmas", "feedback", "attempt"],
        expected_response_shape: ResponseShape::CodeBlock,
    },
    PromptTemplate {
        template_id: REPAIR,
        role_preamble: PREAMBLE,
        body: "The verifier rejected this declaration:\n```dafny\n{{candidate}}\n```\n\n\
Verifier output:\n```\n{{diagnostics}}\n```\n\n{{hint}}\n\n\
Program:\n```dafny\n{{program}}\n```\n\n\
Attempt {{attempt}}. Fix the declaration without changing its signature or contract. Reply with the complete declaration \
in one ```dafny code block.",
        placeholders: &["candidate", "diagnostics", "hint", "program", "attempt"],
        expected_response_shape: ResponseShape::CodeBlock,
    },
    PromptTemplate {
        template_id: SUBLEMMA_ASSERTION,
        role_preamble: PREAMBLE,
        body: "Dafny could not prove this assertion:\n```dafny\n{{assertion}}\n```\n\nVerifier output:\n```\n{{diagnostic}}\n```\n\n\
Program:\n```dafny\n{{program}}\n```\n\n\
Propose one helper lemma whose postcondition lets Dafny prove the assertion, and the call that uses it at the assertion. \
Choose a name not in: {{existing_names}}.\n\
Reply with two ```dafny code blocks: first the lemma signature with requires/ensures and no body, then the single call \
statement.",
        placeholders: &["assertion", "diagnostic", "program", "existing_names"],
        expected_response_shape: ResponseShape::SignatureBlock,
    },
    PromptTemplate {
        template_id: SUBLEMMA_INVARIANT,
        role_preamble: PREAMBLE,
        body: "Dafny could not prove this loop invariant:\n```dafny\n{{invariant}}\n```\n\nThe loop:\n```dafny\n{{loop}}\n```\n\n\
Verifier output:\n```\n{{diagnostic}}\n```\n\n\
Program:\n```dafny\n{{program}}\n```\n\n\
Propose one helper lemma stating that the invariant holds after one iteration of the loop when it held before (or, for \
a failure on entry, that it holds initially), taking the loop state as parameters, and the call to place in the loop \
body. Choose a name not in: {{existing_names}}.\n\
Reply with two ```dafny code blocks: first the lemma signature with requires/ensures and no body, then the single call \
statement.",
        placeholders: &["invariant", "loop", "diagnostic", "program", "existing_names"],
        expected_response_shape: ResponseShape::SignatureBlock,
    },
    PromptTemplate {
        template_id: STRENGTHEN,
        role_preamble: PREAMBLE,
        body: "The caller below fails to verify because the contract of `{{callee}}` is too weak:\n\
```dafny\n{{caller}}\n```\n\nVerifier output:\n```\n{{diagnostic}}\n```\n\n\
Current declaration of the callee:\n```dafny\n{{callee_signature}}\n```\n\n\
Program:\n```dafny\n{{program}}\n```\n\n\
Strengthen the ensures clauses of `{{callee}}` so that the caller verifies. Keep its parameters and requires clauses.\n\
Reply with the new signature, without a body, in one ```dafny code block.",
        placeholders: &["callee", "caller", "diagnostic", "callee_signature", "program"],
        expected_response_shape: ResponseShape::SignatureBlock,
    },
    PromptTemplate {
        template_id: MERGE,
        role_preamble: PREAMBLE,
        body: "These verified methods were obtained by moving loops of the original method into auxiliary methods:\n\
```dafny\n{{verified}}\n```\n\n\
Original program:\n```dafny\n{{original}}\n```\n\n\
Merge them back into the structure of the original program: put every loop back where it was, carry over the loop \
invariants, assertions and lemma calls, and express them over the variables of the original method. Keep every \
executable statement of the original exactly as it is.\n\n{{feedback}}\n\
Reply with the complete program in one ```dafny code block.",
        placeholders: &["verified", "original", "feedback"],
        expected_response_shape: ResponseShape::CodeBlock,
    },
];

/// The fixed set of templates, one per pipeline step.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateLibrary;

impl TemplateLibrary {
    pub fn all(&self) -> &'static [PromptTemplate] {
        TEMPLATES
    }

    pub fn get(&self, template_id: &str) -> Result<&'static PromptTemplate, LlmError> {
        TEMPLATES
            .iter()
            .find(|t| t.template_id == template_id)
            .ok_or_else(|| LlmError::UnknownTemplate(template_id.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn every_template_declares_its_placeholders() {
        let lib = TemplateLibrary;
        assert_eq!(lib.all().len(), 12);
        for t in lib.all() {
            t.check().unwrap();
            let full: BTreeMap<String, String> =
                t.placeholders.iter().map(|p| (p.to_string(), format!("<{p}>"))).collect();
            let text = render_prompt(t, &full).unwrap();
            assert!(!text.contains("{{"), "{} left a placeholder", t.template_id);
        }
    }

    #[test]
    fn gate_ends_with_yes_no_instruction() {
        let t = TemplateLibrary.get(GATE).unwrap();
        let text = render_prompt(
            t,
            &subs(&[("signature", "lemma L(s: seq<int>) ensures f(s) == g(s)"), ("program", "..."), ("textual_proof", "")]),
        )
        .unwrap();
        assert!(text.trim_end().ends_with("Answer strictly yes or no."));
    }

    #[test]
    fn missing_keys_are_listed() {
        let t = TemplateLibrary.get(GATE).unwrap();
        match render_prompt(t, &subs(&[("program", "x")])) {
            Err(LlmError::MissingPlaceholders { missing, .. }) => assert_eq!(missing, ["signature", "textual_proof"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_placeholder_template_renders_verbatim() {
        let t = PromptTemplate {
            template_id: "plain",
            role_preamble: "P",
            body: "Just say hi.",
            placeholders: &[],
            expected_response_shape: ResponseShape::FreeText,
        };
        assert_eq!(t.render(&BTreeMap::new()).unwrap().user, "Just say hi.");
    }

    #[test]
    fn line_endings_are_normalized_and_values_not_reexpanded() {
        let t = TemplateLibrary.get(ASSERTION_GATE).unwrap();
        let r = t.render(&subs(&[("assertion", "assert a\r\n  == {{b}};"), ("program", "p")])).unwrap();
        assert!(r.user.contains("assert a\n  == {{b}};"));
        assert!(!r.user.contains('\r'));
    }
}
