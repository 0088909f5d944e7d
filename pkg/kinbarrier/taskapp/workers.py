"""
Worker pool for the data-parallel map over spatial cells.

Cells are cut into blocks of fixed size independent of the number of
workers, so the arithmetic for every cell is the same whatever the pool size.
"""
import logging
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_log = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 16


def default_workers():
    """Pool size configured through the KB_WORKERS setting (1 without Django settings)."""
    from django.conf import settings
    if not settings.configured:
        return 1
    return max(1, int(getattr(settings, 'KB_WORKERS', 1)))


class CellPool:
    """Map a function over blocks of x-cells with a thread pool.

    numpy releases the GIL inside the dense kernels, so threads give real
    parallelism and share the read-only quadrature tables without copies.
    """

    def __init__(self, workers=None, block_size=DEFAULT_BLOCK_SIZE):
        self.workers = default_workers() if workers is None else int(workers)
        if self.workers < 1:
            raise ValueError(f"Number of workers must be positive, got {self.workers}.")
        self.block_size = int(block_size)
        self._executor = None
        self._lock = threading.Lock()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def close(self):
        with self._lock:
            executor, self._executor = self._executor, None
        if executor is not None:
            executor.shutdown(wait=True)

    def _get_executor(self):
        with self._lock:
            if self._executor is None:
                _log.debug("Starting thread pool with %d workers.", self.workers)
                self._executor = ThreadPoolExecutor(max_workers=self.workers)
            return self._executor

    def blocks(self, n_cells):
        return [slice(start, min(start + self.block_size, n_cells))
                for start in range(0, n_cells, self.block_size)]

    def map_cells(self, func, n_cells):
        """Return the row-wise concatenation of func(block) over all cell blocks.

        func receives a slice of cell indices and must return an array whose
        first axis runs over these cells.
        """
        blocks = self.blocks(n_cells)
        if self.workers == 1 or len(blocks) == 1:
            results = [func(b) for b in blocks]
        else:
            results = list(self._get_executor().map(func, blocks))
        return np.concatenate(results, axis=0)


_serial_pool = None


def serial_pool():
    """Shared single-worker pool used when no pool is passed explicitly."""
    global _serial_pool
    if _serial_pool is None:
        _serial_pool = CellPool(workers=1)
    return _serial_pool
