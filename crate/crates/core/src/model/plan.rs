use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MethodSignature;

/// How much state crosses the boundary between an outer method and a lifted loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Loop-carried accumulators are passed in and returned.
    FullSharing,
    /// Only the outer method's inputs and loop indices are passed.
    Decoupled,
    /// Only derived slices of the relevant inputs are passed.
    FullyDecoupled,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::FullSharing, Strategy::Decoupled, Strategy::FullyDecoupled];

    pub fn cli_name(self) -> &'static str {
        match self {
            Strategy::FullSharing => "full-sharing",
            Strategy::Decoupled => "decoupled",
            Strategy::FullyDecoupled => "fully-decoupled",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Strategy::FullSharing => {
                "Full sharing: pass the complete loop state into the lifted method, including intermediate \
                 accumulators computed by the enclosing loop, and return the updated accumulators."
            }
            Strategy::Decoupled => {
                "Decoupled: do not pass intermediate results. Pass the original input variables and the \
                 enclosing loop indices only; the lifted method computes its own result and the caller \
                 combines it."
            }
            Strategy::FullyDecoupled => {
                "Fully decoupled: do not pass intermediate results or indices. Pass only the derived slice \
                 of the relevant input (for example `ints[start..]`); the caller combines the result."
            }
        }
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full-sharing" => Ok(Strategy::FullSharing),
            "decoupled" => Ok(Strategy::Decoupled),
            "fully-decoupled" => Ok(Strategy::FullyDecoupled),
            other => Err(format!("unknown strategy `{other}` (expected full-sharing, decoupled or fully-decoupled)")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.cli_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: u32,
    pub start_column: u32,
    pub end_line: u32,
    pub end_column: u32,
    pub text: String,
}

impl SourceSpan {
    pub fn overlaps(&self, other: &SourceSpan) -> bool {
        let a = ((self.start_line, self.start_column), (self.end_line, self.end_column));
        let b = ((other.start_line, other.start_column), (other.end_line, other.end_column));
        a.0 < b.1 && b.0 < a.1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDefinition {
    pub signature: MethodSignature,
    /// Full definition text including header and braces.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftedMethod {
    pub definition: MethodDefinition,
    /// The loop in the original program this method replaces.
    pub original_span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    /// Span of the calling statement inside the decomposed outer method.
    pub span: SourceSpan,
    pub callee: String,
    pub arguments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionPlan {
    pub strategy: Strategy,
    pub outer_method: MethodDefinition,
    pub lifted_methods: Vec<LiftedMethod>,
    pub call_sites: Vec<CallSite>,
    /// The whole decomposed program.
    pub program: String,
    /// Parameter renamings the restoration step has to undo (lifted name -> caller expression).
    #[serde(default)]
    pub renamings: Vec<(String, String)>,
}

impl DecompositionPlan {
    pub fn is_identity(&self) -> bool {
        self.lifted_methods.is_empty()
    }

    pub fn lifted_names(&self) -> Vec<&str> {
        self.lifted_methods.iter().map(|m| m.definition.signature.name.as_str()).collect()
    }
}
