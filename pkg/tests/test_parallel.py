import math

from dirac_spectra import parallel
from dirac_spectra.parallel import ENV_VAR, parallel_map, worker_count


def _nested(x):
    # runs inside a worker, so this inner map must stay serial
    return sum(parallel_map(math.sqrt, [x, x]))


def test_worker_count_respects_cap(monkeypatch):
    monkeypatch.setenv(ENV_VAR, "2")
    assert worker_count(8) == 2
    monkeypatch.setenv(ENV_VAR, "junk")
    assert worker_count(3) == 3
    monkeypatch.delenv(ENV_VAR)
    assert worker_count(0) == 1


def test_serial_and_pooled_results_agree(monkeypatch):
    monkeypatch.delenv(ENV_VAR, raising=False)
    items = [float(i) for i in range(40)]
    serial = parallel_map(math.sqrt, items, workers=1)
    pooled = parallel_map(math.sqrt, items, workers=2)
    assert serial == pooled == [math.sqrt(x) for x in items]


def test_nested_calls_run_serially(monkeypatch):
    monkeypatch.delenv(ENV_VAR, raising=False)
    assert parallel_map(_nested, [4.0, 9.0], workers=2) == [4.0, 6.0]
    assert parallel._IN_WORKER is False


def test_empty_input():
    assert parallel_map(math.sqrt, []) == []
