"""Allocation accounting hook.

Code that creates component arrays calls :func:`record` with the number of
components.  Tests and benchmarks wrap a computation in
:func:`track_allocations` to learn the largest single array that was
allocated, which is how the matrix-free contract of the solvers is checked.
"""

import contextlib
import threading

_local = threading.local()


class AllocationTracker:
    def __init__(self):
        self.largest = 0
        self.count = 0
        self.total = 0

    def record(self, n):
        self.count += 1
        self.total += n
        if n > self.largest:
            self.largest = n


def record(n):
    stack = getattr(_local, "stack", None)
    if stack:
        for tracker in stack:
            tracker.record(int(n))


@contextlib.contextmanager
def track_allocations():
    tracker = AllocationTracker()
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    stack.append(tracker)
    try:
        yield tracker
    finally:
        stack.remove(tracker)
