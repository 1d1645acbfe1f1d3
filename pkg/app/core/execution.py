import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


class SeedExecutionManager:
    """Runs independent, seeded units of work, optionally across processes.

    Results always come back in submission order, so the outcome does not
    depend on the worker count.
    """

    def __init__(self, workers: int = 1) -> None:
        if workers < 1:
            raise ValueError("workers must be at least 1")
        self.workers = workers

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
        work = list(items)
        if self.workers == 1 or len(work) <= 1:
            return [fn(item) for item in work]

        max_workers = min(self.workers, len(work))
        logger.debug("Dispatching %s units to %s workers", len(work), max_workers)
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(fn, work))
