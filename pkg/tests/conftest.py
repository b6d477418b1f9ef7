import pytest

from tracexai.rubrics import RUBRIC_IDS
from tracexai.synth_env import FaultSpec, OutcomeModel, generate_corpus
from tracexai.trace_model import Action, Observation, Outcome, Step, Trajectory


def make_trajectory(run_id="run-1", steps=None, success=True, score=1.0, meta=None):
    if steps is None:
        steps = [
            Step(0, {"goal": "g"}, Action("message", rationale="start"), Observation("env_feedback", {"user": "hi"})),
            Step(1, {"goal": "g"}, Action("tool_call", "lookup", {"q": 1}), Observation("tool_result", {"ok": 1})),
        ]
    return Trajectory(run_id, "task-1", "fixture", tuple(steps), Outcome(success, score), meta or {})


@pytest.fixture(scope="session")
def small_corpus():
    faults = FaultSpec({r: 0.3 for r in RUBRIC_IDS}, seed=11)
    outcome = OutcomeModel(1.0, {r: -1.0 for r in RUBRIC_IDS})
    corpus, truth = generate_corpus(300, faults, outcome)
    return corpus, truth, faults, outcome


# one verdict line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail=""):
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"{status} criterion {number}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
