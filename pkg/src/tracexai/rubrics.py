"""Canonical rubric registry.

The order of :data:`RUBRIC_IDS` is the canonical column order used by every
flag matrix, report and design matrix in the package.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Rubric:
    id: str
    name: str
    description: str


RUBRICS = (
    Rubric(
        "intent_alignment",
        "Intent Alignment",
        "Every action the agent takes serves the user's stated goal. Flag a violation if any "
        "tool call or reply pursues a different objective than the one the user asked for.",
    ),
    Rubric(
        "plan_adherence",
        "Plan Adherence",
        "The agent keeps to a coherent multi-step plan. Flag a violation if it skips, reorders "
        "or abandons plan steps without an observed reason.",
    ),
    Rubric(
        "tool_correctness",
        "Tool Correctness",
        "Tools are invoked with valid parameters: every required argument present, no "
        "arguments the tool does not accept, and only tools that exist.",
    ),
    Rubric(
        "tool_choice_accuracy",
        "Tool Choice Accuracy",
        "The agent selects the appropriate tool for the current sub-task. Flag a violation if a "
        "different tool than the one the sub-task calls for is used.",
    ),
    Rubric(
        "state_tracking_consistency",
        "State Tracking Consistency",
        "The agent's working state stays consistent with what tools have returned. Flag a "
        "violation if a value the agent carries contradicts the latest observed value.",
    ),
    Rubric(
        "error_recovery",
        "Error Awareness & Recovery",
        "When a tool call fails, the agent notices and recovers by retrying or choosing an "
        "alternative that succeeds. Flag a violation if an error is left unaddressed.",
    ),
)

RUBRIC_IDS = tuple(r.id for r in RUBRICS)
RUBRIC_BY_ID = {r.id: r for r in RUBRICS}


def canonical_order(ids) -> list[str]:
    ids = set(ids)
    unknown = ids - set(RUBRIC_IDS)
    if unknown:
        raise ValueError(f"unknown rubric ids: {sorted(unknown)}")
    return [r for r in RUBRIC_IDS if r in ids]
