"""
Worker Pool
Ordered fan-out of per-variant work across worker processes
"""

import logging
import time
from itertools import islice
from threading import Lock

from joblib import Parallel, delayed

logger = logging.getLogger(__name__)


def _batches(items, batch_size):
    iterator = iter(items)
    while True:
        batch = list(islice(iterator, batch_size))
        if not batch:
            return
        yield batch


class WorkerPool:
    """
    Ordered worker pool
    Applies a batch function to a stream and yields results in input order
    """

    def __init__(self, workers=1, batch_size=256, backend="loky"):
        """
        Initialize worker pool

        Args:
            workers: Number of worker processes; 1 runs inline
            batch_size: Items handed to a worker per task
            backend: joblib backend used when workers > 1
        """
        if workers < 1:
            raise ValueError(f"workers must be at least 1, got {workers}")
        if batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {batch_size}")
        self.workers = workers
        self.batch_size = batch_size
        self.backend = backend
        self.lock = Lock()

        self.total_batches = 0
        self.total_items = 0
        self.busy_seconds = 0.0

        logger.info(f"Worker Pool initialized: workers={workers}, batch_size={batch_size}")

    def _record(self, results, started):
        with self.lock:
            self.total_batches += 1
            self.total_items += len(results)
            self.busy_seconds += time.time() - started

    def map_ordered(self, batch_func, items):
        """
        Apply batch_func to consecutive batches of items

        Args:
            batch_func: Picklable function taking a list and returning a list
                of the same length
            items: Iterable, consumed lazily

        Yields:
            Individual results, in the order of items
        """
        started = time.time()
        if self.workers == 1:
            for batch in _batches(items, self.batch_size):
                results = batch_func(batch)
                self._record(results, started)
                started = time.time()
                yield from results
            return

        parallel = Parallel(
            n_jobs=self.workers,
            backend=self.backend,
            return_as="generator",
            pre_dispatch=f"{2 * self.workers}",
        )
        for results in parallel(delayed(batch_func)(batch) for batch in _batches(items, self.batch_size)):
            self._record(results, started)
            started = time.time()
            yield from results

    def get_stats(self):
        """Get pool statistics"""
        with self.lock:
            return {
                "workers": self.workers,
                "batch_size": self.batch_size,
                "total_batches": self.total_batches,
                "total_items": self.total_items,
                "busy_seconds": round(self.busy_seconds, 3),
            }
