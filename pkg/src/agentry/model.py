"""Core runtime model: identities, virtual time, messages, and the behavior contract.

Everything an agent can be or do is expressed through the types here; the
platform modules only schedule them. All mutable agent state (the shell, the
key/value store, behavior internals) must stay JSON-serializable so an agent
can be detached, serialized, moved, and resumed at another location.
"""

from __future__ import annotations

import base64
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar, Iterable, Optional

from .errors import EmptyTypeTag, SteppingDone

# Simulation time is a dimensionless non-negative integer tick count.
Ticks = int

WILDCARD = "*"


@dataclass(frozen=True, order=True)
class AgentId:
    """Opaque runtime-assigned agent identity; never reused within a runtime."""

    value: int

    def __repr__(self) -> str:
        return f"AgentId({self.value})"


@dataclass(frozen=True, order=True)
class LocationId:
    """Opaque location identity plus its human-readable name.

    Equality and ordering use only ``value``; the name rides along for
    readable traces and serialized routes.
    """

    value: int
    name: str = field(compare=False)

    def __repr__(self) -> str:
        return f"LocationId({self.value}, {self.name!r})"


@dataclass(frozen=True)
class Message:
    """Typed, addressed unit of communication with an opaque payload."""

    sender: AgentId
    receiver: AgentId
    type_tag: str
    conversation_id: str
    payload: bytes
    sent_at: Ticks


def make_message(
    sender: AgentId,
    receiver: AgentId,
    type_tag: str,
    conversation_id: str,
    payload: bytes = b"",
    *,
    sent_at: Ticks = 0,
) -> Message:
    """Build a message, stamping it with the caller's clock reading.

    Raises EmptyTypeTag when ``type_tag`` is empty; self-addressed messages
    are legal.
    """
    if not type_tag:
        raise EmptyTypeTag("message type_tag must be non-empty")
    return Message(sender, receiver, type_tag, conversation_id, bytes(payload), sent_at)


def message_matches(msg: Message, type_filter: str, conversation: str | None = None) -> bool:
    """True when the message passes the type filter (``*`` matches all) and,
    if given, carries the expected conversation id."""
    if type_filter != WILDCARD and msg.type_tag != type_filter:
        return False
    if conversation is not None and msg.conversation_id != conversation:
        return False
    return True


# ---------------------------------------------------------------------------
# Wake conditions and step outcomes
# ---------------------------------------------------------------------------


class WakeCondition:
    """Marker base for the conditions a blocked behavior waits on."""


@dataclass(frozen=True)
class AtTime(WakeCondition):
    """Wake once the clock reaches ``tick`` (clock >= tick)."""

    tick: Ticks


@dataclass(frozen=True)
class OnMessage(WakeCondition):
    """Wake when the inbox holds a message matching ``type_filter``."""

    type_filter: str = WILDCARD


@dataclass(frozen=True)
class OnArrival(WakeCondition):
    """Wake once the agent is present (not in transit) at ``location``."""

    location: LocationId


@dataclass(frozen=True)
class AnyOf(WakeCondition):
    """Wake when any member condition is satisfied.

    Needed by composites whose children block on different conditions, and by
    behaviors that race a message against a deadline.
    """

    members: tuple[WakeCondition, ...]

    def __init__(self, members: Iterable[WakeCondition]):
        object.__setattr__(self, "members", tuple(members))


@dataclass(frozen=True)
class Never(WakeCondition):
    """A condition that is never satisfied; blocks the behavior permanently
    without keeping the runtime busy."""


class StepOutcome:
    """Marker base for what a behavior reports after one step."""


@dataclass(frozen=True)
class Running(StepOutcome):
    """The behavior made progress and wants another step next tick."""


@dataclass(frozen=True)
class Done(StepOutcome):
    """The behavior finished; the runtime must never step it again."""


@dataclass(frozen=True)
class Blocked(StepOutcome):
    """The behavior is waiting; step it again once ``wake`` is satisfied.

    Runtimes may also step a blocked behavior early (for example right after
    a migration); behaviors must treat such spurious steps as no-ops.
    """

    wake: WakeCondition


RUNNING = Running()
DONE = Done()


# ---------------------------------------------------------------------------
# Behavior contract
# ---------------------------------------------------------------------------

_BEHAVIOR_KINDS: dict[str, type["Behavior"]] = {}


def behavior_kinds() -> dict[str, type["Behavior"]]:
    """Snapshot of all registered behavior kinds (kind name -> class)."""
    return dict(_BEHAVIOR_KINDS)


class Behavior:
    """A resumable unit of agent activity, advanced one quantum per step.

    Subclasses set a class-level ``kind`` string (which auto-registers them
    for deserialization) and implement ``_step``, ``_to_dict_body`` and
    ``_from_dict_body``. Two behaviors compare equal when their serialized
    forms match, internal progress included.
    """

    kind: ClassVar[str]

    def __init_subclass__(cls, **kwargs: Any) -> None:
        super().__init_subclass__(**kwargs)
        kind = cls.__dict__.get("kind")
        if kind is None:
            return
        existing = _BEHAVIOR_KINDS.get(kind)
        if existing is not None and existing is not cls:
            raise ValueError(f"behavior kind {kind!r} already registered by {existing.__name__}")
        _BEHAVIOR_KINDS[kind] = cls

    def __init__(self) -> None:
        self._finished = False

    @property
    def finished(self) -> bool:
        return self._finished

    def step(self, ctx: "AgentContext") -> StepOutcome:
        """Advance exactly one quantum. Raises SteppingDone after Done."""
        if self._finished:
            raise SteppingDone(f"behavior {self.kind!r} stepped after completion")
        outcome = self._step(ctx)
        if isinstance(outcome, Done):
            self._finished = True
        return outcome

    def _step(self, ctx: "AgentContext") -> StepOutcome:
        raise NotImplementedError

    # Serialization ---------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind, "done": self._finished}
        d.update(self._to_dict_body())
        return d

    def _to_dict_body(self) -> dict[str, Any]:
        raise NotImplementedError

    @classmethod
    def _from_dict_body(cls, d: dict[str, Any]) -> "Behavior":
        raise NotImplementedError

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Behavior):
            return NotImplemented
        return type(other) is type(self) and other.to_dict() == self.to_dict()

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"<{type(self).__name__} done={self._finished}>"


def behavior_from_dict(d: dict[str, Any]) -> Behavior:
    """Rebuild a behavior from its serialized form, dispatching on ``kind``."""
    kind = d.get("kind")
    cls = _BEHAVIOR_KINDS.get(kind)
    if cls is None:
        raise ValueError(f"unknown behavior kind {kind!r}")
    behavior = cls._from_dict_body(d)
    behavior._finished = bool(d.get("done", False))
    return behavior


def clone_behavior(behavior: Behavior) -> Behavior:
    """Fresh copy of a behavior via a serialization round-trip."""
    return behavior_from_dict(behavior.to_dict())


# ---------------------------------------------------------------------------
# Canonical JSON helpers
# ---------------------------------------------------------------------------


def canonical_json(value: Any) -> bytes:
    """Deterministic JSON encoding: sorted keys, no whitespace, ASCII only."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def encode_payload(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def decode_payload(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def location_to_jsonable(loc: LocationId) -> dict[str, Any]:
    return {"value": loc.value, "name": loc.name}


def location_from_jsonable(d: dict[str, Any]) -> LocationId:
    return LocationId(int(d["value"]), str(d["name"]))


def message_to_jsonable(msg: Message) -> dict[str, Any]:
    return {
        "sender": msg.sender.value,
        "receiver": msg.receiver.value,
        "type": msg.type_tag,
        "conversation": msg.conversation_id,
        "payload": encode_payload(msg.payload),
        "sent_at": msg.sent_at,
    }


def message_from_jsonable(d: dict[str, Any]) -> Message:
    return Message(
        sender=AgentId(int(d["sender"])),
        receiver=AgentId(int(d["receiver"])),
        type_tag=str(d["type"]),
        conversation_id=str(d["conversation"]),
        payload=decode_payload(d["payload"]),
        sent_at=int(d["sent_at"]),
    )


# ---------------------------------------------------------------------------
# Agent shell
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MigrationReport:
    """What an agent knows about its most recent completed move."""

    src: LocationId
    dest: LocationId
    latency: Ticks
    arrived_at: Ticks


@dataclass
class AgentShell:
    """Identity, whereabouts, attached behaviors, and serializable user state."""

    id: AgentId
    home: LocationId
    current: LocationId
    behaviors: list[Behavior]
    state: dict[str, Any] = field(default_factory=dict)
    inbox: deque[Message] = field(default_factory=deque)


def serialize_shell(shell: AgentShell) -> bytes:
    """Encode a whole shell (behavior internals included) as canonical JSON."""
    return canonical_json(
        {
            "id": shell.id.value,
            "home": location_to_jsonable(shell.home),
            "current": location_to_jsonable(shell.current),
            "behaviors": [b.to_dict() for b in shell.behaviors],
            "state": shell.state,
            "inbox": [message_to_jsonable(m) for m in shell.inbox],
        }
    )


def deserialize_shell(data: bytes) -> AgentShell:
    d = json.loads(data.decode())
    return AgentShell(
        id=AgentId(int(d["id"])),
        home=location_from_jsonable(d["home"]),
        current=location_from_jsonable(d["current"]),
        behaviors=[behavior_from_dict(b) for b in d["behaviors"]],
        state=d["state"],
        inbox=deque(message_from_jsonable(m) for m in d["inbox"]),
    )


# ---------------------------------------------------------------------------
# Step context and buffered effects
# ---------------------------------------------------------------------------


@dataclass
class SendEffect:
    message: Message


@dataclass
class SpawnEffect:
    agent_id: AgentId
    at: LocationId
    behaviors: list[Behavior]


@dataclass
class MigrateEffect:
    dest: LocationId


@dataclass
class AttachEffect:
    target: AgentId
    behavior: Behavior


@dataclass
class TraceEffect:
    kind: str
    detail: dict[str, Any]


Effect = Any  # one of the effect dataclasses above


class AgentContext:
    """What a behavior sees and may do during one step.

    Reads (clock, inbox, state) act on the live shell; writes that touch the
    wider world (sends, spawns, migrations, attachments, trace events) are
    buffered in ``effects`` and applied atomically by the runtime when the
    step returns.
    """

    def __init__(
        self,
        *,
        now: Ticks,
        shell: AgentShell,
        registry: Any,
        reserve_agent_id: Callable[[], AgentId],
        new_conversation_id: Callable[[], str],
        last_migration: Optional[MigrationReport] = None,
    ) -> None:
        self.now = now
        self._shell = shell
        self.registry = registry
        self._reserve_agent_id = reserve_agent_id
        self._new_conversation_id = new_conversation_id
        self.last_migration = last_migration
        self.effects: list[Effect] = []

    # Read surface ----------------------------------------------------------

    @property
    def agent_id(self) -> AgentId:
        return self._shell.id

    @property
    def home(self) -> LocationId:
        return self._shell.home

    @property
    def location(self) -> LocationId:
        return self._shell.current

    @property
    def state(self) -> dict[str, Any]:
        return self._shell.state

    def peek_message(self, type_filter: str = WILDCARD, conversation: str | None = None) -> Message | None:
        for msg in self._shell.inbox:
            if message_matches(msg, type_filter, conversation):
                return msg
        return None

    def take_message(self, type_filter: str = WILDCARD, conversation: str | None = None) -> Message | None:
        """Remove and return the oldest matching message; non-matching
        messages stay queued for other behaviors."""
        for msg in self._shell.inbox:
            if message_matches(msg, type_filter, conversation):
                self._shell.inbox.remove(msg)
                return msg
        return None

    # Effect surface --------------------------------------------------------

    def send(self, msg: Message) -> None:
        self.effects.append(SendEffect(msg))

    def spawn(self, at: LocationId, behaviors: list[Behavior]) -> AgentId:
        """Request a new agent; its id is reserved immediately, the agent
        materializes when the step's effects are applied."""
        agent_id = self._reserve_agent_id()
        self.effects.append(SpawnEffect(agent_id, at, list(behaviors)))
        return agent_id

    def request_migration(self, dest: LocationId) -> None:
        self.effects.append(MigrateEffect(dest))

    def attach_behavior(self, target: AgentId, behavior: Behavior) -> None:
        """Append a behavior to ``target``'s list; it starts next tick."""
        self.effects.append(AttachEffect(target, behavior))

    def trace(self, detail: dict[str, Any], kind: str = "custom") -> None:
        self.effects.append(TraceEffect(kind, dict(detail)))

    def new_conversation_id(self) -> str:
        return self._new_conversation_id()

    def wake_satisfied(self, wake: WakeCondition) -> bool:
        """Evaluate a wake condition right now (used by composites to decide
        whether a blocked child may be stepped)."""
        return wake_satisfied(wake, now=self.now, shell=self._shell, in_transit=False)

    # Action dispatch -------------------------------------------------------

    def run_action(self, descriptor: Any, message: Message | None = None) -> bytes | None:
        fn = self.registry.resolve_action(descriptor.name)
        return fn(self, descriptor.params, message)

    def run_predicate(self, descriptor: Any) -> bool:
        fn = self.registry.resolve_predicate(descriptor.name)
        return bool(fn(self, descriptor.params))


def wake_satisfied(
    wake: WakeCondition,
    *,
    now: Ticks,
    shell: AgentShell,
    in_transit: bool,
) -> bool:
    """Evaluate a wake condition against an agent's current situation."""
    if isinstance(wake, AtTime):
        return now >= wake.tick
    if isinstance(wake, OnMessage):
        return any(message_matches(m, wake.type_filter) for m in shell.inbox)
    if isinstance(wake, OnArrival):
        return (not in_transit) and shell.current == wake.location
    if isinstance(wake, AnyOf):
        return any(
            wake_satisfied(member, now=now, shell=shell, in_transit=in_transit)
            for member in wake.members
        )
    if isinstance(wake, Never):
        return False
    raise TypeError(f"unknown wake condition {wake!r}")


def next_wake_time(wake: WakeCondition) -> Ticks | None:
    """Earliest future tick at which a time-based wake could fire, if any."""
    if isinstance(wake, AtTime):
        return wake.tick
    if isinstance(wake, AnyOf):
        times = [t for t in (next_wake_time(m) for m in wake.members) if t is not None]
        return min(times) if times else None
    return None
