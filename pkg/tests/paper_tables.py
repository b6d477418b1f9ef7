"""Contingency counts reconstructed from the published prevalence/reliability tables.

TAU-bench Airline: 19 failed and 31 successful runs. AssistantBench: 31 failed
and 2 successful runs. Counts are (a, b, c, d) = (flag & fail, no flag & fail,
flag & success, no flag & success).
"""

TAU_COUNTS = {
    "intent_alignment": (12, 7, 13, 18),
    "plan_adherence": (4, 15, 4, 27),
    "tool_correctness": (6, 13, 14, 17),
    "tool_choice_accuracy": (5, 14, 9, 22),
    "state_tracking_consistency": (10, 9, 6, 25),
    "error_recovery": (13, 6, 21, 10),
}

AB_COUNTS = {
    "intent_alignment": (24, 7, 2, 0),
    "plan_adherence": (1, 30, 0, 2),
    "tool_correctness": (17, 14, 1, 1),
    "tool_choice_accuracy": (15, 16, 0, 2),
    "state_tracking_consistency": (14, 17, 1, 1),
    "error_recovery": (16, 15, 1, 1),
}

# published cells as printed: prevalence (p_fail, p_succ, delta, ratio), reliability (p_flag, p_noflag, delta, rr)
TAU_PUBLISHED = {
    "intent_alignment": (("0.632", "0.419", "0.212", "1.506"), ("0.52", "0.72", "-0.20", "0.72")),
    "error_recovery": (("0.684", "0.677", "-0.007", "0.988"), ("0.618", "0.625", "-0.007", "0.99")),
    "state_tracking_consistency": (("0.526", "0.194", "0.333", "2.719"), ("0.375", "0.735", "-0.36", "0.51")),
    "tool_correctness": (("0.316", "0.452", "-0.136", "0.699"), ("0.70", "0.567", "0.133", "1.24")),
    "tool_choice_accuracy": (("0.263", "0.290", "-0.027", "0.906"), ("0.643", "0.611", "0.032", "1.05")),
    "plan_adherence": (("0.211", "0.129", "0.081", "1.632"), ("0.50", "0.643", "-0.143", "0.78")),
}
AB_PUBLISHED = {
    "intent_alignment": (("0.774", "1.000", "-0.226", "0.77"), ("0.077", "0.000", "0.077", "inf")),
    "error_recovery": (("0.516", "0.500", "0.016", "1.03"), ("0.059", "0.062", "-0.004", "0.94")),
    "state_tracking_consistency": (("0.452", "0.500", "-0.048", "0.90"), ("0.067", "0.056", "0.011", "1.20")),
    "tool_correctness": (("0.548", "0.500", "0.048", "1.10"), ("0.056", "0.067", "-0.011", "0.83")),
    "tool_choice_accuracy": (("0.484", "0.000", "0.484", "inf"), ("0.000", "0.111", "-0.111", "0.00")),
    "plan_adherence": (("0.032", "0.000", "0.032", "inf"), ("0.000", "0.062", "-0.062", "0.00")),
}

# cells whose printed value contradicts the probabilities printed in the same row:
# 0.684 - 0.677 is positive and 0.684 / 0.677 is above 1
INCONSISTENT_CELLS = {("tau", "error_recovery", "delta_prev"), ("tau", "error_recovery", "ratio_prev")}


def matches_printed(value, printed: str) -> bool:
    """True if ``value`` rounds to the printed cell at the cell's precision."""
    if printed == "inf":
        return value == float("inf")
    digits = len(printed.split(".")[1])
    return abs(float(value) - float(printed)) <= 0.5 * 10**-digits + 1e-12
