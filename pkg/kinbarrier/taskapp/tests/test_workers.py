import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from kinbarrier.taskapp.workers import CellPool, default_workers


def _row_sums(data):
    return lambda block: data[block].sum(axis=1, keepdims=True)


@pytest.mark.parametrize('workers', [1, 2, 3])
def test_map_cells_concatenates_in_order(workers):
    data = np.arange(200.).reshape(50, 4)
    with CellPool(workers=workers, block_size=7) as pool:
        result = pool.map_cells(_row_sums(data), 50)
    np.testing.assert_array_equal(result[:, 0], data.sum(axis=1))


def test_worker_count_does_not_change_results():
    rng = np.random.default_rng(5)
    data = rng.uniform(size=(97, 33))
    with CellPool(workers=1) as serial, CellPool(workers=4) as parallel:
        a = serial.map_cells(_row_sums(data), 97)
        b = parallel.map_cells(_row_sums(data), 97)
    np.testing.assert_array_equal(a, b)


def test_default_workers_from_settings(settings):
    settings.KB_WORKERS = 3
    assert default_workers() == 3
    assert CellPool().workers == 3


def test_invalid_worker_count():
    with pytest.raises(ValueError):
        CellPool(workers=0)


def test_concurrent_maps_share_one_executor(mocker):
    executor_class = mocker.patch('kinbarrier.taskapp.workers.ThreadPoolExecutor', wraps=ThreadPoolExecutor)
    data = np.arange(400.).reshape(100, 4)
    results = []
    with CellPool(workers=2, block_size=10) as pool:
        threads = [threading.Thread(target=lambda: results.append(pool.map_cells(_row_sums(data), 100)))
                   for _ in range(8)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
    assert executor_class.call_count == 1
    assert len(results) == 8
    for result in results:
        np.testing.assert_array_equal(result[:, 0], data.sum(axis=1))
