from __future__ import annotations

import math

import pytest
from app.core.errors import DomainError
from app.models.schemas import ExperimentRow, ExperimentTable, ReplicateResult
from app.services.effects import factor_coding, marginal_effects


def _table(n, t, rho, covered, sizes, method="ancillary", reducer="cox"):
    results = [
        ReplicateResult(
            replicate=i,
            method=method,
            reducer=reducer,
            survived=True,
            covered=c,
            set_size=s,
            seed_used=i,
        )
        for i, (c, s) in enumerate(zip(covered, sizes))
    ]
    row = ExperimentRow(
        method=method,
        reducer=reducer,
        coverage=sum(covered) / len(covered),
        coverage_se=None,
        survival=1.0,
        survival_se=None,
        mean_size=sum(sizes) / len(sizes),
        size_se=None,
    )
    return ExperimentTable(
        rows=[row],
        factors={"n": n, "t": t, "rho": rho},
        replicates=len(results),
        results=results,
    )


def _covered(hits, total=10):
    return [i < hits for i in range(total)]


def test_factor_coding():
    tables = [
        _table(100, 0.5, 0.1, [True], [1]),
        _table(150, 0.5, 0.1, [True], [1]),
    ]
    coding = factor_coding(tables, ["n", "rho"])
    assert coding == {"n": {100.0: -1.0, 150.0: 1.0}, "rho": {0.1: 0.0}}


def test_identical_cells_have_no_effect():
    tables = [_table(n, 0.5, 0.1, _covered(5), [1, 5] * 5) for n in (100, 150)]
    row = marginal_effects(tables).row("ancillary", "cox")
    assert row.coverage_effects["n"] == pytest.approx(1.0, abs=1e-6)
    assert row.size_effects["n"] == pytest.approx(0.0, abs=1e-10)
    assert row.coverage_effects["t"] is None
    assert row.size_effects["rho"] is None


def test_effects_of_a_balanced_two_factor_design():
    tables = [
        _table(100, 0.5, 0.1, _covered(5), [1, 5] * 5),
        _table(100, 1.0, 0.1, _covered(5), [1, 5] * 5),
        _table(150, 0.5, 0.1, _covered(8), [17, 53] * 5),
        _table(150, 1.0, 0.1, _covered(8), [17, 53] * 5),
    ]
    effects = marginal_effects(tables)
    row = effects.row("ancillary", "cox")
    assert effects.factors == ["n", "t", "rho"]
    assert row.coverage_effects["n"] == pytest.approx(4.0, rel=1e-5)
    assert row.coverage_effects["t"] == pytest.approx(1.0, abs=1e-5)
    assert row.size_effects["n"] == pytest.approx(math.log(9.0), rel=1e-10)
    assert row.size_effects["t"] == pytest.approx(0.0, abs=1e-10)


def test_degenerate_coverage_is_not_estimable():
    tables = [
        _table(100, 0.5, 0.1, _covered(0), [1, 5] * 5),
        _table(150, 0.5, 0.1, _covered(10), [17, 53] * 5),
    ]
    row = marginal_effects(tables, factors=["n"]).row("ancillary", "cox")
    assert row.coverage_effects == {"n": None}
    assert row.size_effects["n"] == pytest.approx(math.log(9.0))


def test_constant_sizes_are_not_estimable():
    tables = [
        _table(100, 0.5, 0.1, _covered(4), [3] * 10),
        _table(150, 0.5, 0.1, _covered(6), [3] * 10),
    ]
    row = marginal_effects(tables, factors=["n"]).row("ancillary", "cox")
    assert row.size_effects == {"n": None}
    assert row.coverage_effects["n"] is not None


def test_failed_replicates_are_ignored():
    tables = [_table(n, 0.5, 0.1, _covered(5), [1, 5] * 5) for n in (100, 150)]
    tables[0].results.append(
        ReplicateResult(
            replicate=10,
            method="ancillary",
            reducer="cox",
            survived=False,
            covered=False,
            set_size=0,
            seed_used=10,
            failed=True,
        )
    )
    row = marginal_effects(tables).row("ancillary", "cox")
    assert row.coverage_effects["n"] == pytest.approx(1.0, abs=1e-6)


def test_input_checks():
    with pytest.raises(DomainError):
        marginal_effects([])
    three_levels = [_table(n, 0.5, 0.1, [True], [1]) for n in (100, 150, 200)]
    with pytest.raises(DomainError):
        marginal_effects(three_levels)
    with pytest.raises(DomainError):
        marginal_effects([_table(100, 0.5, 0.1, [True], [1])], factors=["sigma2"])
