"""In-process publish/subscribe broker with bounded, drop-oldest topics."""

import threading
from collections import deque

from ..errors import QueueFull


class Broker:
    """Named FIFO topics, each bounded to ``capacity`` messages.

    Publishing to a full topic evicts its oldest message.  ``max_total``
    bounds messages across all topics; when that is reached and the target
    topic has nothing of its own to evict, publishing raises QueueFull.

    Consumers call :meth:`take`, which hands out at most one message per
    topic at a time (the topic is *leased* until :meth:`release`), so a
    topic is never processed by two consumers concurrently and its order is
    preserved.
    """

    def __init__(self, capacity=8, max_total=None):
        if capacity < 1:
            raise ValueError("topic capacity must be at least 1")
        self.capacity = capacity
        self.max_total = max_total
        self._topics = {}
        self._leased = set()
        self._cond = threading.Condition()
        self._closed = False
        self._rr = deque()

    def create_topic(self, name):
        with self._cond:
            if name not in self._topics:
                self._topics[name] = deque()
                self._rr.append(name)

    def remove_topic(self, name):
        """Drop a topic and its queued messages; returns the discarded messages."""
        with self._cond:
            queue = self._topics.pop(name, None)
            if name in self._rr:
                self._rr.remove(name)
            self._cond.notify_all()
            return list(queue or ())

    def depth(self, name):
        with self._cond:
            return len(self._topics.get(name, ()))

    def total(self):
        with self._cond:
            return sum(len(q) for q in self._topics.values())

    def publish(self, name, message):
        """Append ``message``; returns ``(evicted_messages, depth_after)``."""
        with self._cond:
            queue = self._topics[name]
            evicted = []
            if len(queue) >= self.capacity:
                evicted.append(queue.popleft())
            elif self.max_total is not None and self._total_locked() >= self.max_total:
                if not queue:
                    raise QueueFull(f"broker holds {self.max_total} messages")
                evicted.append(queue.popleft())
            queue.append(message)
            self._cond.notify()
            return evicted, len(queue)

    def _total_locked(self):
        return sum(len(q) for q in self._topics.values())

    def _next_ready(self):
        for _ in range(len(self._rr)):
            name = self._rr[0]
            self._rr.rotate(-1)
            if self._topics.get(name) and name not in self._leased:
                return name
        return None

    def take(self, timeout=None):
        """Lease the next available ``(topic, message)``; None on timeout or close."""
        with self._cond:
            while True:
                if self._closed:
                    return None
                name = self._next_ready()
                if name is not None:
                    self._leased.add(name)
                    return name, self._topics[name].popleft()
                if not self._cond.wait(timeout):
                    return None

    def release(self, name):
        with self._cond:
            self._leased.discard(name)
            self._cond.notify_all()

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()
