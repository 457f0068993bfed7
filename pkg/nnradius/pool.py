""" Ordered parallel map on a Twisted thread pool

Workers only compute; results come back to the calling thread, which is the
only one that touches output files.
"""

import functools
import queue
from typing import Callable, Iterable, List, TypeVar

from twisted.logger import Logger
from twisted.python.threadpool import ThreadPool


_log = Logger()

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(func: Callable[[T], R], items: Iterable[T],
                workers: int = 1) -> List[R]:
    """ Apply ``func`` to every item, possibly concurrently

    :param func: Pure function of one item
    :param items: Inputs
    :param workers: Thread count; ``1`` or less runs serially in the caller
    :return: Results in input order. If any call raised, the exception of
             the earliest failing item is re-raised after all calls finish.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    done = queue.Queue()
    pool = ThreadPool(minthreads=1, maxthreads=min(workers, len(items)),
                      name="nnradius")
    pool.start()
    try:
        for index, item in enumerate(items):
            pool.callInThreadWithCallback(
                functools.partial(_deliver, done, index), func, item)
        outcomes = {}
        while len(outcomes) < len(items):
            index, success, value = done.get()
            outcomes[index] = (success, value)
    finally:
        pool.stop()

    results = []
    for index in range(len(items)):
        success, value = outcomes[index]
        if not success:
            _log.failure("worker item {index} failed", failure=value,
                         index=index)
            value.raiseException()
        results.append(value)
    return results


def _deliver(done: queue.Queue, index: int, success: bool, value) -> None:
    done.put((index, success, value))
