"""
Tests du module de performance
"""

import threading

import pytest

from robust_ebayes.performance import ParallelProcessor, PerformanceMonitor, timed


class TestPerformanceMonitor:
    def test_records_operations(self):
        monitor = PerformanceMonitor()
        with monitor.start_operation("fit"):
            pass
        monitor.record_operation_time("fit", 2.0)

        stats = monitor.get_stats()["fit"]
        assert stats["count"] == 2
        assert stats["max_time"] == 2.0
        assert stats["avg_time"] == stats["total_time"] / 2

    def test_reset(self):
        monitor = PerformanceMonitor()
        monitor.record_operation_time("fit", 1.0)
        monitor.reset()
        assert monitor.get_stats() == {}

    def test_timed_decorator(self):
        monitor = PerformanceMonitor()

        @timed(monitor)
        def square(x):
            return x * x

        assert square(3) == 9
        assert square(4) == 16
        (name, stats), = monitor.get_stats().items()
        assert name.endswith("square")
        assert stats["count"] == 2


class TestParallelProcessor:
    def test_serial_path(self):
        processor = ParallelProcessor(max_workers=1)
        assert processor.map(lambda x: x + 1, range(5)) == [1, 2, 3, 4, 5]

    def test_results_keep_input_order(self):
        processor = ParallelProcessor(max_workers=4)
        barrier = threading.Barrier(4)

        def task(x):
            if x < 4:
                barrier.wait(timeout=5)
            return x * 10

        assert processor.map(task, range(8)) == [x * 10 for x in range(8)]

    def test_empty_input(self):
        assert ParallelProcessor(max_workers=3).map(str, []) == []

    def test_default_workers(self):
        assert ParallelProcessor().max_workers >= 1

    def test_local_closure_runs_on_threads(self):
        offset = 7
        seen = set()

        def task(x):
            seen.add(threading.get_ident())
            return x + offset

        assert ParallelProcessor(max_workers=2).map(task, range(6)) == [x + 7 for x in range(6)]
        assert threading.get_ident() not in seen

    def test_no_process_pool_option(self):
        with pytest.raises(TypeError):
            ParallelProcessor(max_workers=2, use_processes=True)
