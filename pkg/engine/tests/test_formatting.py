from __future__ import annotations

import pytest
from app.models.schemas import (
    EffectRow,
    EffectsTable,
    ExperimentRow,
    SubstitutionPair,
    SummaryReport,
)
from app.utils.formatting import (
    display_name,
    format_effect,
    format_number,
    format_probability,
    format_size,
    render_effects,
    render_experiment,
    render_summary,
    render_table,
)


def test_estimate_with_se_cells():
    assert format_probability(0.955, 0.012) == "0.96 (0.01)"
    assert format_size(1209.4, 43.2) == "1209 (43)"
    assert format_probability(0.5, None) == "0.50 (NA)"


@pytest.mark.parametrize(
    "value,places,text",
    [(0.125, 2, "0.13"), (2.5, 0, "3"), (-0.001, 2, "0.00"), (None, 2, "NA")],
)
def test_format_number_rounds_half_up(value, places, text):
    assert format_number(value, places) == text


def test_format_effect():
    assert format_effect(None) == "--"
    assert format_effect(4.0) == "4.00"


@pytest.mark.parametrize(
    "method,reducer,name",
    [
        ("cosufficient_k8", "cox", "Cox + co-sufficient k=8"),
        ("split_f", "lasso", "split Lasso + F test"),
        ("naive_f", "cox", "Cox + F test"),
        ("ancillary", "cox", "Cox + ancillary"),
    ],
)
def test_display_name(method, reducer, name):
    assert display_name(method, reducer) == name


def test_text_table_alignment():
    text = render_table(["Method", "Coverage"], [["Cox + ancillary", "0.86 (0.02)"]])
    assert text.splitlines() == [
        "Method" + " " * 14 + "Coverage",
        "-" * 28,
        "Cox + ancillary  0.86 (0.02)",
    ]


def test_markdown_table():
    text = render_table(["a", "b"], [["1", "2"]], style="markdown")
    assert text == "| a | b |\n| --- | --- |\n| 1 | 2 |\n"


def test_render_experiment():
    row = ExperimentRow(
        method="cosufficient_k2",
        reducer="cox",
        coverage=0.96,
        coverage_se=0.0088,
        survival=0.97,
        survival_se=0.0076,
        mean_size=1209.2,
        size_se=43.4,
    )
    text = render_experiment([row], style="markdown")
    assert text.splitlines()[0] == "| Method | Coverage | Survival | E\\|M\\| |"
    assert text.splitlines()[2] == (
        "| Cox + co-sufficient k=2 | 0.96 (0.01) | 0.97 (0.01) | 1209 (43) |"
    )


def test_render_effects_marks_missing_values():
    table = EffectsTable(
        factors=["n", "t"],
        rows=[
            EffectRow(
                method="ancillary",
                reducer="lasso",
                coverage_effects={"n": 4.0, "t": None},
                size_effects={"n": 0.25, "t": None},
            )
        ],
    )
    body = render_effects(table).splitlines()[2]
    assert body.split("  ")[0] == "Lasso + ancillary"
    assert body.split()[-4:] == ["4.00", "--", "0.25", "--"]


def test_render_empty_summary():
    report = SummaryReport(
        method="ancillary", alpha=0.05, n_accepted=0, n_tested=7, empty=True
    )
    assert render_summary(report, ["x1", "x2"]) == (
        "method: ancillary  alpha: 0.05\n"
        "accepted models: 0 of 7 tested\n"
        "the confidence set is empty\n"
    )


def test_render_summary_names_variables():
    report = SummaryReport(
        method="cosufficient",
        alpha=0.1,
        n_accepted=2,
        n_tested=3,
        inclusion_freq={0: 0.5, 1: 1.0},
        top_substitutions=[SubstitutionPair(missing=0, substitute=1, frequency=1.0)],
    )
    lines = render_summary(report, ["age", "dose"]).splitlines()
    assert lines[1] == "accepted models: 2 of 3 tested"
    assert lines[5].startswith("dose")
    assert lines[6].startswith("age")
    assert lines[-1].split() == ["age", "dose", "1.00"]
