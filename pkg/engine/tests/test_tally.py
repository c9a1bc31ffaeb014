from __future__ import annotations

import math

import pytest
from app.models.schemas import ReplicateResult
from app.services.tally import ExperimentTally


def _result(index, method="ancillary", reducer="cox", **values):
    fields = dict(survived=True, covered=True, set_size=10, seed_used=index)
    fields.update(values)
    return ReplicateResult(replicate=index, method=method, reducer=reducer, **fields)


def test_rows_keep_first_seen_order():
    tally = ExperimentTally()
    tally.record(_result(0, method="naive_f"))
    tally.record(_result(0, method="ancillary"))
    tally.record(_result(1, method="naive_f"))
    assert [row.method for row in tally.rows()] == ["naive_f", "ancillary"]


def test_rates_and_standard_errors():
    tally = ExperimentTally()
    outcomes = [(True, True, 4), (True, False, 8), (False, False, 0), (True, True, 12)]
    for index, (survived, covered, size) in enumerate(outcomes):
        tally.record(
            _result(index, survived=survived, covered=covered, set_size=size)
        )
    row = tally.rows()[0]
    assert row.coverage == 0.5
    assert row.survival == 0.75
    assert row.coverage_se == pytest.approx(math.sqrt(0.25 / 4))
    assert row.mean_size == 6.0
    assert row.size_se == pytest.approx(math.sqrt(80.0 / 3 / 4))


def test_failed_replicates_are_counted_not_averaged():
    tally = ExperimentTally()
    tally.record(_result(0, covered=True))
    tally.record(_result(1, survived=False, covered=False, set_size=0, failed=True))
    row = tally.rows()[0]
    assert row.failures == 1
    assert row.coverage == 1.0
    assert row.coverage_se is None
    assert row.size_se is None


def test_timing_summary():
    tally = ExperimentTally()
    for latency in (10.0, 20.0, 30.0):
        tally.record_latency(latency)
    timing = tally.timing()
    assert timing["replicates_timed"] == 3
    assert timing["replicate_ms_mean"] == 20.0
    assert timing["replicate_ms_p95"] == pytest.approx(29.0)


def test_reset_clears_cells():
    tally = ExperimentTally()
    tally.record(_result(0))
    tally.record_latency(5.0)
    tally.reset()
    assert tally.rows() == []
    assert tally.timing()["replicates_timed"] == 0
