"""Topic-based publish/subscribe transport used by both ecosystems.

In-process delivery is synchronous: subscriber callbacks run before
``publish`` returns, which keeps the co-simulation loop deterministic.
Per-topic sequence numbers start at 1 and increase without gaps whether or
not anyone is subscribed. The bus itself is lock-protected so the socket
gateway can share it across reader threads; in-process users are expected
to drive it from a single thread.
"""

from __future__ import annotations

import re
import threading
from collections import deque
from dataclasses import dataclass, replace
from typing import Callable

from .messages import Dialect, MessageEnvelope, validate_envelope

_TOPIC_RE = re.compile(r"^/[a-z0-9_/]+$")


class UnknownTopic(KeyError):
    pass


class TopicNameError(ValueError):
    pass


@dataclass(frozen=True)
class Topic:
    name: str
    dialect: Dialect


class Subscription:
    """A registered receiver: either a callback or a pending-message queue."""

    def __init__(self, topic: Topic, callback: Callable[[MessageEnvelope], None] | None = None):
        self.topic = topic
        self.callback = callback
        self.queue: deque[MessageEnvelope] = deque()
        self.active = True

    def deliver(self, env: MessageEnvelope) -> None:
        if not self.active:
            return
        if self.callback is not None:
            self.callback(env)
        else:
            self.queue.append(env)

    def drain(self) -> list[MessageEnvelope]:
        out = list(self.queue)
        self.queue.clear()
        return out


class Bus:
    def __init__(self):
        self._topics: dict[str, Topic] = {}
        self._subs: dict[str, list[Subscription]] = {}
        self._seq: dict[str, int] = {}
        self._lock = threading.RLock()

    def register(self, name: str, dialect: Dialect) -> Topic:
        if not _TOPIC_RE.match(name):
            raise TopicNameError(f"invalid topic name {name!r}")
        with self._lock:
            existing = self._topics.get(name)
            if existing is not None:
                if existing.dialect is not dialect:
                    raise TopicNameError(f"topic {name!r} already registered with dialect {existing.dialect}")
                return existing
            topic = Topic(name, dialect)
            self._topics[name] = topic
            self._subs[name] = []
            self._seq[name] = 0
            return topic

    def topic(self, name: str) -> Topic:
        try:
            return self._topics[name]
        except KeyError:
            raise UnknownTopic(name) from None

    def topics(self) -> list[Topic]:
        with self._lock:
            return sorted(self._topics.values(), key=lambda t: t.name)

    def subscribe(self, name: str, callback: Callable[[MessageEnvelope], None] | None = None) -> Subscription:
        with self._lock:
            topic = self.topic(name)
            sub = Subscription(topic, callback)
            self._subs[name].append(sub)
            return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            sub.active = False
            subs = self._subs.get(sub.topic.name)
            if subs and sub in subs:
                subs.remove(sub)

    def publish(self, name: str, env: MessageEnvelope) -> int:
        """Assign the next per-topic seq and deliver to all subscribers in order."""
        with self._lock:
            topic = self.topic(name)
            if env.channel != name:
                raise ValueError(f"envelope channel {env.channel!r} does not match topic {name!r}")
            validate_envelope(env, topic.dialect)
            self._seq[name] += 1
            stamped = replace(env, seq=self._seq[name])
            receivers = list(self._subs[name])
        for sub in receivers:
            sub.deliver(stamped)
        return stamped.seq

    def last_seq(self, name: str) -> int:
        with self._lock:
            self.topic(name)
            return self._seq[name]
