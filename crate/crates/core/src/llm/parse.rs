use super::LlmError;
use crate::dafny::{Program, StmtKind};
use crate::model::{DeclKind, MethodSignature};

/// Reads a yes/no answer.
///
/// Rules, in order: the first word; the word right after "answer" or
/// "verdict" (skipping "is"); the only one of yes/no that occurs as a word.
pub fn parse_verdict(response_text: &str) -> Result<bool, LlmError> {
    let words: Vec<String> = response_text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect();
    let as_verdict = |w: &str| match w {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    };
    if let Some(v) = words.first().and_then(|w| as_verdict(w)) {
        return Ok(v);
    }
    for (i, w) in words.iter().enumerate() {
        if w == "answer" || w == "verdict" {
            let mut j = i + 1;
            while j < words.len() && matches!(words[j].as_str(), "is" | "final" | "my" | "the") {
                j += 1;
            }
            if let Some(v) = words.get(j).and_then(|w| as_verdict(w)) {
                return Ok(v);
            }
        }
    }
    let yes = words.iter().any(|w| w == "yes");
    let no = words.iter().any(|w| w == "no");
    match (yes, no) {
        (true, false) => Ok(true),
        (false, true) => Ok(false),
        _ => Err(LlmError::UnparseableVerdict(response_text.chars().take(200).collect())),
    }
}

/// The reason text after a verdict line, if any.
pub fn verdict_reason(response_text: &str) -> String {
    let mut lines = response_text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().unwrap_or("");
    let rest: Vec<&str> = lines.collect();
    if rest.is_empty() {
        // "No, because ..." on one line.
        first.trim().trim_start_matches(|c: char| c.is_alphabetic()).trim_start_matches([',', '.', ':', ' ']).to_string()
    } else {
        rest.join(" ").trim().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBlock {
    pub code: String,
    /// No fence was found and the whole response was taken.
    pub low_confidence: bool,
}

/// Interiors of every fenced block, in order.
pub fn extract_code_blocks(response_text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in response_text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    // An unterminated final fence still counts.
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    blocks
}

/// The first fenced block; without one, the whole response flagged as low confidence.
pub fn extract_code_block(response_text: &str) -> Result<CodeBlock, LlmError> {
    if response_text.trim().is_empty() {
        return Err(LlmError::EmptyResponse);
    }
    match extract_code_blocks(response_text).into_iter().next() {
        Some(code) if !code.trim().is_empty() => Ok(CodeBlock { code, low_confidence: false }),
        Some(_) => Err(LlmError::EmptyResponse),
        None => Ok(CodeBlock { code: response_text.trim().to_string(), low_confidence: true }),
    }
}

/// A proposed helper lemma and the statement that calls it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubLemmaProposal {
    pub signature: MethodSignature,
    pub call: String,
    pub callee_args: String,
}

/// Parses a sub-lemma reply: a bodiless lemma declaration followed by its
/// call statement, either in two fenced blocks or as the last line of one.
pub fn parse_sublemma(response_text: &str) -> Result<SubLemmaProposal, LlmError> {
    let blocks = extract_code_blocks(response_text);
    let (decl_text, call_text) = match blocks.as_slice() {
        [] => split_call_line(response_text)?,
        [one] => split_call_line(one)?,
        [decl, call, ..] => (decl.clone(), call.trim().to_string()),
    };
    let program = Program::parse(&decl_text).map_err(|e| LlmError::Malformed(format!("sub-lemma reply: {e}")))?;
    let decl = program
        .decls
        .iter()
        .find(|d| d.kind == DeclKind::Lemma)
        .ok_or_else(|| LlmError::Malformed("sub-lemma reply has no lemma declaration".into()))?;
    if decl.body.is_some() {
        return Err(LlmError::Malformed("the proposed lemma must not have a body".into()));
    }
    let mut signature = decl.signature.clone();
    signature.other_clauses.retain(|c| !c.starts_with("decreases"));
    let name = signature.name.clone();
    let call = call_text.trim().trim_end_matches(';').trim().to_string();
    if !call.starts_with(&format!("{name}(")) || !is_single_call(&format!("{call};")) {
        return Err(LlmError::Malformed(format!("expected a call to `{name}`, got `{call}`")));
    }
    let open = call.find('(').expect("starts with name(");
    let close = call.rfind(')').expect("checked single call");
    Ok(SubLemmaProposal { callee_args: call[open + 1..close].to_string(), call: format!("{call};"), signature })
}

fn split_call_line(text: &str) -> Result<(String, String), LlmError> {
    let lines: Vec<&str> = text.lines().collect();
    let idx = lines
        .iter()
        .rposition(|l| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with("lemma") && !t.starts_with("requires") && !t.starts_with("ensures")
                && !t.starts_with("//") && is_single_call(if t.ends_with(';') { t } else { return false })
        })
        .ok_or_else(|| LlmError::Malformed("no call statement in sub-lemma reply".into()))?;
    let decl: Vec<&str> = lines.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, l)| *l).collect();
    Ok((decl.join("\n"), lines[idx].trim().to_string()))
}

/// Parses a reply holding exactly one callable declaration.
pub fn parse_declaration(code: &str) -> Result<(MethodSignature, Option<String>), LlmError> {
    let program = Program::parse(code).map_err(|e| LlmError::Malformed(e.to_string()))?;
    let d = program.decls.first().ok_or_else(|| LlmError::Malformed("no declaration found".into()))?;
    let body = d.body.map(|(o, c)| program.slice(o, c).to_string());
    Ok((d.signature.clone(), body))
}

/// Returns true when `stmt_text` is a single call statement.
pub fn is_single_call(stmt_text: &str) -> bool {
    let wrapped = format!("method __W() {{ {stmt_text} }}");
    let Ok(p) = Program::parse(&wrapped) else { return false };
    let Some(d) = p.decls.first() else { return false };
    match p.body(d) {
        Ok(Some(b)) => b.stmts.len() == 1 && matches!(b.stmts[0].kind, StmtKind::Call { .. }),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        assert!(parse_verdict("Yes, the signature is verifiable because...").unwrap());
        assert!(!parse_verdict("no").unwrap());
        assert!(!parse_verdict("The answer is: NO.").unwrap());
        assert!(parse_verdict("Yes — provable by induction").unwrap());
        assert!(parse_verdict("I cannot tell").is_err());
        assert!(parse_verdict("yes or no? hard to say").unwrap());
    }

    #[test]
    fn first_block_wins() {
        let r = "Here you go:\n```dafny\nlemma A() {}\n```\nand also\n```\nlemma B() {}\n```";
        assert_eq!(extract_code_block(r).unwrap(), CodeBlock { code: "lemma A() {}".into(), low_confidence: false });
        assert_eq!(extract_code_blocks(r).len(), 2);
    }

    #[test]
    fn unfenced_is_low_confidence_and_empty_is_error() {
        let r = "method M() {}\n";
        assert_eq!(extract_code_block(r).unwrap(), CodeBlock { code: "method M() {}".into(), low_confidence: true });
        assert!(matches!(extract_code_block("  \n"), Err(LlmError::EmptyResponse)));
    }

    #[test]
    fn sublemma_reply() {
        let r = "```dafny\nlemma lemmaSeqSumExtend(ints: seq<int>)\n  requires |ints| > 1\n  ensures seqSum(ints) == seqSum(ints[..|ints|-1]) + ints[|ints|-1]\n```\n```dafny\nlemmaSeqSumExtend(slice[..end+1]);\n```";
        let p = parse_sublemma(r).unwrap();
        assert_eq!(p.signature.name, "lemmaSeqSumExtend");
        assert_eq!(p.call, "lemmaSeqSumExtend(slice[..end+1]);");
        assert_eq!(p.callee_args, "slice[..end+1]");
        assert!(is_single_call(&p.call));
        assert!(!is_single_call("x := 1;"));
    }
}
