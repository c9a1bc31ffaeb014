"""Publication-style rendering of experiment and effects tables.

Probabilities are shown to two decimals and set sizes as integers, each with
its Monte Carlo standard error in parentheses, e.g. ``0.96 (0.01)`` and
``1209 (43)``. Rounding is half-up on the decimal representation so that
``0.955`` renders as ``0.96``.
"""

from __future__ import annotations

import re
from decimal import ROUND_HALF_UP, Decimal
from typing import Literal, Sequence

from app.models.schemas import EffectsTable, ExperimentRow, SummaryReport

TableStyle = Literal["text", "markdown"]

NOT_AVAILABLE = "NA"
NOT_ESTIMABLE = "--"

_LABEL = re.compile(r"^cosufficient_k(?P<k>\d+)$")
_METHOD_NAMES = {
    "ancillary": "ancillary",
    "naive_f": "F test",
    "split_f": "F test",
}
_REDUCER_NAMES = {"cox": "Cox", "lasso": "Lasso"}


def _round(value: float, places: int) -> Decimal:
    quantum = Decimal(1).scaleb(-places)
    return Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP)


def format_number(value: float | None, places: int) -> str:
    if value is None:
        return NOT_AVAILABLE
    rounded = _round(value, places)
    if rounded == 0:
        rounded = abs(rounded)
    return f"{rounded:.{places}f}"


def format_probability(value: float, se: float | None) -> str:
    return f"{format_number(value, 2)} ({format_number(se, 2)})"


def format_size(value: float, se: float | None) -> str:
    return f"{format_number(value, 0)} ({format_number(se, 0)})"


def format_effect(value: float | None) -> str:
    return NOT_ESTIMABLE if value is None else format_number(value, 2)


def display_name(method: str, reducer: str) -> str:
    """``cosufficient_k8``/``cox`` becomes ``Cox + co-sufficient k=8``."""

    reducer_name = _REDUCER_NAMES.get(reducer, reducer)
    match = _LABEL.match(method)
    if match:
        return f"{reducer_name} + co-sufficient k={match.group('k')}"
    if method == "split_f":
        return f"split {reducer_name} + F test"
    return f"{reducer_name} + {_METHOD_NAMES.get(method, method)}"


def _escape(cell: str) -> str:
    return cell.replace("|", "\\|")


def render_table(
    headers: Sequence[str], body: Sequence[Sequence[str]], style: TableStyle = "text"
) -> str:
    if style == "markdown":
        lines = ["| " + " | ".join(_escape(h) for h in headers) + " |"]
        lines.append("|" + "|".join(" --- " for _ in headers) + "|")
        lines.extend(
            "| " + " | ".join(_escape(cell) for cell in row) + " |" for row in body
        )
        return "\n".join(lines) + "\n"

    widths = [len(header) for header in headers]
    for row in body:
        widths = [max(width, len(cell)) for width, cell in zip(widths, row)]

    def line(cells: Sequence[str]) -> str:
        first = cells[0].ljust(widths[0])
        rest = [cell.rjust(width) for cell, width in zip(cells[1:], widths[1:])]
        return "  ".join([first, *rest]).rstrip()

    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    return "\n".join([line(headers), rule, *(line(row) for row in body)]) + "\n"


def render_experiment(
    rows: Sequence[ExperimentRow], style: TableStyle = "text"
) -> str:
    headers = ["Method", "Coverage", "Survival", "E|M|"]
    body = [
        [
            display_name(row.method, row.reducer),
            format_probability(row.coverage, row.coverage_se),
            format_probability(row.survival, row.survival_se),
            format_size(row.mean_size, row.size_se),
        ]
        for row in rows
    ]
    return render_table(headers, body, style)


def render_effects(table: EffectsTable, style: TableStyle = "text") -> str:
    headers = ["Method"]
    headers.extend(f"coverage {name}" for name in table.factors)
    headers.extend(f"log size {name}" for name in table.factors)
    body = []
    for row in table.rows:
        cells = [display_name(row.method, row.reducer)]
        cells.extend(format_effect(row.coverage_effects.get(n)) for n in table.factors)
        cells.extend(format_effect(row.size_effects.get(n)) for n in table.factors)
        body.append(cells)
    return render_table(headers, body, style)


def render_summary(
    report: SummaryReport, names: Sequence[str], style: TableStyle = "text"
) -> str:
    """Inclusion frequencies and top substitutions of one confidence set."""

    lines = [
        f"method: {report.method}  alpha: {report.alpha:g}",
        f"accepted models: {report.n_accepted} of {report.n_tested} tested",
    ]
    if report.empty:
        lines.append("the confidence set is empty")
        return "\n".join(lines) + "\n"
    inclusion = render_table(
        ["Variable", "Index", "Inclusion"],
        [
            [names[idx], str(idx), format_number(freq, 2)]
            for idx, freq in sorted(
                report.inclusion_freq.items(), key=lambda item: (-item[1], item[0])
            )
        ],
        style,
    )
    lines.extend(["", inclusion])
    if report.top_substitutions:
        substitutions = render_table(
            ["Missing", "Substitute", "Frequency"],
            [
                [
                    names[pair.missing],
                    names[pair.substitute],
                    format_number(pair.frequency, 2),
                ]
                for pair in report.top_substitutions
            ],
            style,
        )
        lines.append(substitutions)
    return "\n".join(lines).rstrip("\n") + "\n"
