# core/tasks.py
import asyncio
import logging
from typing import Callable, Dict, Hashable, Mapping, TypeVar

log = logging.getLogger(__name__)

T = TypeVar("T")


async def _gather_keyed(tasks: Mapping[Hashable, Callable[[], T]], jobs: int) -> Dict[Hashable, T]:
    sem = asyncio.Semaphore(jobs)

    async def one(key: Hashable, fn: Callable[[], T]):
        async with sem:
            return key, await asyncio.to_thread(fn)

    pending = [asyncio.create_task(one(k, fn), name=str(k)) for k, fn in tasks.items()]
    results: Dict[Hashable, T] = {}
    try:
        for key, value in await asyncio.gather(*pending):
            results[key] = value
    except Exception:
        for t in pending:
            t.cancel()
        raise
    return results


def run_keyed(tasks: Mapping[Hashable, Callable[[], T]], jobs: int = 1) -> Dict[Hashable, T]:
    """Run independent zero-argument callables and return their results by key.

    Scheduling never changes the result: each task owns its seed stream and
    callers aggregate in sorted key order.
    """
    if jobs <= 1 or len(tasks) <= 1:
        return {k: fn() for k, fn in tasks.items()}
    log.debug("[tasks] running %d tasks on %d workers", len(tasks), jobs)
    return asyncio.run(_gather_keyed(tasks, jobs))
