"""In-process node/topic middleware.

Nodes subscribe to and publish on named topics; delivery is synchronous
on the publisher's call, in subscription order, so tests observe a total
order per topic. The bus supports the four liveness operations the rest
of the system leans on: restarting nodes (subscriptions re-attach,
messages published while stopped are dropped, new ones flow again),
changing parameters at run time, swapping a subscription's callback
between deliveries without any lifecycle event, and remapping the topic
a node publishes or subscribes to.

Topic schemas are structural: the first publish fixes a topic's record
shape and later publishes must match it. Well-known shapes get stable
names (`cmd_vel`, `pose`, `laser`); anything else is named after its
sorted key set.

All operations serialize through one re-entrant lock, so the bus may be
called from several threads; callbacks run under that lock and must be
brief.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

from .errors import BusError

__all__ = ["Bus", "Node", "Subscription", "Message", "UNSET", "CREATED", "NODE_RUNNING", "STOPPED"]

CREATED = "created"
NODE_RUNNING = "running"
STOPPED = "stopped"

# returned by get_param for parameters that were never set
UNSET = None

_KNOWN_SCHEMAS = {
    frozenset(("linear", "angular")): "cmd_vel",
    frozenset(("x", "y", "theta")): "pose",
    frozenset(("angle_min", "angle_increment", "range_max", "ranges")): "laser",
}


@dataclass(frozen=True)
class Message:
    topic: str
    schema: str
    payload: dict
    seq: int


class Subscription:
    """One node's binding of a callback to a (logical) topic."""

    __slots__ = ("node", "topic", "callback", "delivered_count", "actual_topic")

    def __init__(self, node: "Node", topic: str, callback: Callable[[Message], None]):
        self.node = node
        self.topic = topic  # name the node asked for; remap moves the actual binding
        self.actual_topic = topic
        self.callback = callback
        self.delivered_count = 0


class Node:
    __slots__ = ("name", "lifecycle", "subscriptions", "publications", "parameters")

    def __init__(self, name: str):
        self.name = name
        self.lifecycle = CREATED
        self.subscriptions: list[Subscription] = []
        self.publications: dict[str, str] = {}  # logical topic -> actual topic
        self.parameters: dict[str, object] = {}


class _Topic:
    __slots__ = ("name", "schema", "seq", "subscribers")

    def __init__(self, name: str, schema: str | None = None):
        self.name = name
        self.schema = schema
        self.seq = 0
        self.subscribers: list[Subscription] = []


class Bus:
    def __init__(self, on_event: Callable[[str, dict], None] | None = None):
        self._lock = threading.RLock()
        self._nodes: dict[str, Node] = {}
        self._topics: dict[str, _Topic] = {}
        self._on_event = on_event

    # -- node lifecycle ------------------------------------------------------

    def create_node(self, name: str) -> Node:
        with self._lock:
            if name in self._nodes:
                raise BusError(f"node name already in use: {name}")
            node = Node(name)
            self._nodes[name] = node
            self._event("lifecycle", {"event": "create", "node": name})
            return node

    def start(self, node: Node) -> None:
        with self._lock:
            if node.lifecycle == NODE_RUNNING:
                return
            node.lifecycle = NODE_RUNNING
            self._event("lifecycle", {"event": "start", "node": node.name})

    def stop(self, node: Node) -> None:
        with self._lock:
            if node.lifecycle == STOPPED:
                return
            node.lifecycle = STOPPED
            self._event("lifecycle", {"event": "stop", "node": node.name})

    # -- pub/sub ---------------------------------------------------------------

    def subscribe(self, node: Node, topic: str, callback: Callable[[Message], None]) -> Subscription:
        with self._lock:
            sub = Subscription(node, topic, callback)
            node.subscriptions.append(sub)
            self._topic(topic).subscribers.append(sub)
            return sub

    def replace_callback(self, subscription: Subscription, new_callback: Callable[[Message], None]) -> None:
        # hot swap: next delivery uses the new handler, no lifecycle event
        with self._lock:
            subscription.callback = new_callback

    def publish(self, node: Node, topic: str, payload: dict) -> int:
        """Deliver synchronously to every running subscriber; returns the count."""
        with self._lock:
            if node.lifecycle != NODE_RUNNING:
                raise BusError(f"node {node.name} cannot publish while {node.lifecycle}")
            actual = node.publications.setdefault(topic, topic)
            schema = _schema_name(payload)
            record = self._topic(actual)
            if record.schema is None:
                record.schema = schema
            elif record.schema != schema:
                raise BusError(
                    f"schema mismatch on {actual}: topic carries {record.schema}, payload is {schema}"
                )
            record.seq += 1
            message = Message(actual, schema, payload, record.seq)
            self._event("publish", {"node": node.name, "topic": actual, "schema": schema, "seq": record.seq})
            delivered = 0
            for sub in list(record.subscribers):
                if sub.node.lifecycle != NODE_RUNNING:
                    continue
                handler = sub.callback  # one handler version per delivery
                sub.delivered_count += 1
                delivered += 1
                handler(message)
            return delivered

    # -- parameters ------------------------------------------------------------

    def set_param(self, node: Node, name: str, value: object) -> None:
        with self._lock:
            node.parameters[name] = value
            self._event("lifecycle", {"event": "param", "node": node.name, "param": name, "value": value})

    def get_param(self, node: Node, name: str) -> object:
        with self._lock:
            return node.parameters.get(name, UNSET)

    # -- remapping ---------------------------------------------------------------

    def remap(self, node: Node, role: str, old_topic: str, new_topic: str) -> None:
        """Move a subscription or publication binding to another topic name."""
        with self._lock:
            if role == "publication":
                bound = [logical for logical, actual in node.publications.items() if actual == old_topic]
                if not bound:
                    raise BusError(f"node {node.name} has no publication bound to {old_topic}")
                for logical in bound:
                    node.publications[logical] = new_topic
                self._topic(new_topic)  # created on demand
            elif role == "subscription":
                moved = [s for s in node.subscriptions if s.actual_topic == old_topic]
                if not moved:
                    raise BusError(f"node {node.name} has no subscription bound to {old_topic}")
                if new_topic != old_topic:
                    old_record = self._topic(old_topic)
                    new_record = self._topic(new_topic)
                    for sub in moved:
                        old_record.subscribers.remove(sub)
                        new_record.subscribers.append(sub)
                        sub.actual_topic = new_topic
            else:
                raise BusError(f"unknown remap role: {role}")
            self._event(
                "lifecycle",
                {"event": "remap", "node": node.name, "role": role, "old": old_topic, "new": new_topic},
            )

    # -- introspection -------------------------------------------------------------

    def graph(self) -> list[dict]:
        """Node/topic connectivity for snapshots."""
        with self._lock:
            return [
                {
                    "name": node.name,
                    "lifecycle": node.lifecycle,
                    "subscribes": sorted({s.actual_topic for s in node.subscriptions}),
                    "publishes": sorted(set(node.publications.values())),
                }
                for node in self._nodes.values()
            ]

    def topic_seq(self, topic: str) -> int:
        with self._lock:
            record = self._topics.get(topic)
            return record.seq if record is not None else 0

    # -- internals ------------------------------------------------------------------

    def _topic(self, name: str) -> _Topic:
        record = self._topics.get(name)
        if record is None:
            record = _Topic(name)
            self._topics[name] = record
        return record

    def _event(self, kind: str, payload: dict) -> None:
        if self._on_event is not None:
            self._on_event(kind, payload)


def _schema_name(payload: dict) -> str:
    if not isinstance(payload, dict):
        raise BusError(f"payload must be a record, got {type(payload).__name__}")
    return _KNOWN_SCHEMAS.get(frozenset(payload), "record(" + ",".join(sorted(payload)) + ")")
