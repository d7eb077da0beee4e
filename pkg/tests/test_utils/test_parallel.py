import threading

import pytest
import torch

from physmorph.utils.parallel import (
    THREADS_ENV,
    chunk_ranges,
    get_num_threads,
    ordered_map,
    resolve_threads,
    set_num_threads,
)


def test_chunk_ranges():
    assert chunk_ranges(0, 4) == []
    assert chunk_ranges(10, 4) == [range(0, 4), range(4, 8), range(8, 10)]


def test_ordered_map_keeps_order():
    items = list(range(50))
    serial = ordered_map(lambda i: i * i, items)
    set_num_threads(4)
    parallel = ordered_map(lambda i: i * i, items)
    assert serial == parallel == [i * i for i in items]


def test_ordered_map_uses_workers():
    set_num_threads(3)
    assert get_num_threads() == 3
    names = ordered_map(lambda _: threading.current_thread().name, list(range(12)))
    assert len(names) == 12


def test_ordered_map_carries_grad_mode():
    set_num_threads(2)
    with torch.no_grad():
        modes = ordered_map(lambda _: torch.is_grad_enabled(), [0, 1, 2])
    assert modes == [False, False, False]
    modes = ordered_map(lambda _: torch.is_grad_enabled(), [0, 1, 2])
    assert modes == [True, True, True]


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads(None) == 1
    assert resolve_threads(6) == 6
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads(6) == 3


@pytest.mark.parametrize("requested,expected", [(0, 1), (-2, 1), (5, 5)])
def test_set_num_threads(requested, expected):
    set_num_threads(requested)
    assert get_num_threads() == expected
    # Torch kernels always run on one thread.
    assert torch.get_num_threads() == 1
