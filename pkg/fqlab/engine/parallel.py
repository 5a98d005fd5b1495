"""
Chunked enumeration with exact reductions.

Work is split into contiguous index ranges. With one worker the chunks run
inline; with more they run on a process pool. Chunk results are combined
with exact integer arithmetic, so totals never depend on the worker count.
"""

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple

from fqlab.config.settings import get_settings, resolve_workers


def chunk_ranges(total: int, chunk: Optional[int] = None) -> List[Tuple[int, int]]:
    """Contiguous [start, stop) ranges of at most `chunk` indices covering [0, total)."""
    chunk = chunk or get_settings().CHUNK_SIZE
    return [(start, min(start + chunk, total)) for start in range(0, total, chunk)]


def run_tasks(fn: Callable[..., Any], tasks: Sequence[Tuple], workers: Optional[int] = None) -> List[Any]:
    """Apply fn(*task) to every task, preserving task order."""
    workers = resolve_workers(workers)
    if workers == 1 or len(tasks) <= 1:
        return [fn(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *task) for task in tasks]
        return [f.result() for f in futures]


def sum_counters(parts: Iterable[Counter]) -> Counter:
    total: Counter = Counter()
    for part in parts:
        total.update(part)
    return total


def first_hit(results: Iterable[Optional[Any]]) -> Optional[Any]:
    """First non-None result in task order (the lexicographically smallest)."""
    for result in results:
        if result is not None:
            return result
    return None
