"""
Concurrency Helpers
Ordered fan-out of independent units (cases, folds) onto a thread pool.
"""
import asyncio
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


async def _gather_in_executor(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [loop.run_in_executor(executor, fn, item) for item in items]
        return list(await asyncio.gather(*futures))


def run_concurrently(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """
    Apply ``fn`` to every item and return the results in input order.

    ``workers == 1`` runs inline. Exceptions propagate from the first failing
    item; callers that need per-item failure capture wrap ``fn`` themselves.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return asyncio.run(_gather_in_executor(fn, items, min(workers, len(items))))
