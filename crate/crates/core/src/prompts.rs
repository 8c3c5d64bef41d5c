//! Prompt templates. Placeholders are substituted literally with no extra
//! formatting.

use serde::{Deserialize, Serialize};

pub const GENERATION_SYSTEM: &str = "You are an expert competitive programmer.\n\
Output your solution as a single ```cpp ... ``` block, preceded by brief reasoning.";

pub const GENERATION_USER: &str = "{problem}";

pub const COMPARISON_USER: &str = r#"You are a competitive programming expert.

## Problem Statement
{problem}

## Solution A
```cpp
{code_a}
```

## Solution B
```cpp
{code_b}
```

Which solution is more likely to receive an Accepted verdict from an online judge — meaning it produces correct output within the time and memory limits for all valid inputs?

If both solutions appear incorrect (wrong answer, TLE, or other issues), choose the one that requires fewer modifications to become Accepted.

If they are fundamentally identical or equally likely to be Accepted, output TIE.

Respond with a JSON object and nothing else, in exactly this format:
{
  "feedback_a": "one sentence on Solution A's key strength or critical flaw",
  "feedback_b": "one sentence on Solution B's key strength or critical flaw",
  "winner": "A or B or TIE"
}"#;

pub const MUTATION_USER: &str = "## Problem
{problem}

## Solution
```cpp
{code}
```

## Pairwise Feedback
This solution was compared against other solutions multiple times:

{feedback_sections}

## Task
Write a solution that maximizes the probability of Accepted. {restart_clause}

Think briefly, then output your final solution as a single ```cpp ... ``` block.";

/// Block removed from [`MUTATION_USER`] when there is no feedback.
pub const MUTATION_FEEDBACK_BLOCK: &str = "## Pairwise Feedback
This solution was compared against other solutions multiple times:

{feedback_sections}

";

pub const RESTART_CLAUSE: &str =
    "You may refine the existing solution or take a different approach if the current one is fundamentally flawed.";

pub const WINS_HEADER: &str = "### Wins (this solution was judged better):";
pub const TIES_HEADER: &str = "### Ties (judged equally likely to be Accepted):";
pub const LOSSES_HEADER: &str = "### Losses (this solution was judged worse):";

pub const POINTWISE_USER: &str = r#"You are a competitive programming expert.

## Problem Statement
{problem}

## Solution
```cpp
{code}
```

Is this solution correct for all valid inputs, producing correct output within the time and memory limits?

Explain your reasoning briefly. End your response with a final line of exactly `VERDICT: YES` or `VERDICT: NO`."#;

pub const SELF_REFINE_USER: &str = "## Problem
{problem}

## Solution
```cpp
{code}
```

## Task
Review the solution above for correctness and efficiency. If it is already correct, output it unchanged. Otherwise, produce an improved version.

Think briefly, then output your final solution as a single ```cpp ... ``` block.";

/// Full template set; every field can be overridden from configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplates {
    pub generation_system: String,
    pub generation_user: String,
    pub comparison_user: String,
    pub mutation_user: String,
    pub pointwise_user: String,
    pub self_refine_user: String,
    /// Include the refine-or-restart permission in mutation prompts.
    pub allow_restart: bool,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            generation_system: GENERATION_SYSTEM.to_owned(),
            generation_user: GENERATION_USER.to_owned(),
            comparison_user: COMPARISON_USER.to_owned(),
            mutation_user: MUTATION_USER.to_owned(),
            pointwise_user: POINTWISE_USER.to_owned(),
            self_refine_user: SELF_REFINE_USER.to_owned(),
            allow_restart: true,
        }
    }
}

/// Replaces each `{key}` with its value in a single left-to-right pass, so
/// substituted text is never rescanned for placeholders.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    'outer: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (key, value) in values {
            let len = key.len() + 2;
            if tail.len() >= len
                && tail.as_bytes()[len - 1] == b'}'
                && &tail[1..len - 1] == *key
            {
                out.push_str(value);
                rest = &tail[len..];
                continue 'outer;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

/// Pulls the code out of a model reply: the last fenced block, preferring
/// ```` ```cpp ````. Replies without a fence are returned trimmed.
pub fn extract_code_block(reply: &str) -> String {
    let mut blocks = Vec::new();
    let mut rest = reply;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let Some(line_end) = after.find('\n') else { break };
        let lang = after[..line_end].trim().to_owned();
        let body = &after[line_end + 1..];
        let Some(end) = body.find("```") else { break };
        blocks.push((lang, body[..end].trim_end_matches('\n').to_owned()));
        rest = &body[end + 3..];
    }
    blocks
        .iter()
        .rev()
        .find(|(lang, _)| lang == "cpp" || lang == "c++")
        .or_else(|| blocks.last())
        .map(|(_, body)| body.clone())
        .unwrap_or_else(|| reply.trim().to_owned())
}
