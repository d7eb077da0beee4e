"""Order-preserving parallel maps on the dask threaded scheduler."""
import os
from typing import Callable, List, Optional, Sequence, TypeVar

import dask
import structlog
import torch

log = structlog.get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "PHYSMORPH_THREADS"

_num_threads = 1


def resolve_threads(cli_threads: Optional[int]) -> int:
    """The environment variable wins over the command line flag."""
    env_value = os.environ.get(THREADS_ENV)
    if env_value:
        return max(1, int(env_value))
    return max(1, cli_threads or 1)


def set_num_threads(num_threads: int) -> None:
    """Configure the worker count used by `ordered_map`.

    Torch intra-op parallelism stays at one thread: reductions inside a kernel then keep a
    single summation order and runs are bit-identical whatever the worker count.
    """
    global _num_threads
    _num_threads = max(1, int(num_threads))
    torch.set_num_threads(1)
    log.debug("Threads configured.", workers=_num_threads)


def get_num_threads() -> int:
    return _num_threads


def ordered_map(fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    """Apply `fn` to every item, in parallel when several workers are configured.

    Results always come back in input order, so any reduction done by the caller over the
    returned list is independent of scheduling. The caller's autograd mode is carried into
    the worker threads.
    """
    if _num_threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    grad_enabled = torch.is_grad_enabled()

    def run(item: T) -> R:
        with torch.set_grad_enabled(grad_enabled):
            return fn(item)

    tasks = [dask.delayed(run)(item) for item in items]
    return list(dask.compute(*tasks, scheduler="threads", num_workers=_num_threads))


def chunk_ranges(total: int, chunk_size: int) -> List[range]:
    return [range(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]
