"""A second, intentionally naive platform implementation.

Same hosting contract as the simulator, different machinery: fixed integer
delays instead of latency models, plain lists instead of priority queues, and
a clock that walks every tick instead of skipping idle stretches. Behaviors
cannot tell the two apart; the test suite runs against both to prove they
only depend on the adapter contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .actions import ActionRegistry
from .errors import (
    AlreadyMigrating,
    DuplicateLocationName,
    TickBudgetExceeded,
    UnknownAgent,
    UnknownLocation,
)
from .model import (
    AgentContext,
    AgentId,
    AgentShell,
    AttachEffect,
    Behavior,
    Blocked,
    Done,
    LocationId,
    Message,
    MigrateEffect,
    MigrationReport,
    Running,
    SendEffect,
    SpawnEffect,
    Ticks,
    TraceEffect,
    deserialize_shell,
    next_wake_time,
    serialize_shell,
    wake_satisfied,
)
from .trace import EventKind, TraceLog


@dataclass
class _Mail:
    due: Ticks
    seq: int
    msg: Message


@dataclass
class _Entry:
    shell: AgentShell
    outcomes: list[Any]
    attach_ticks: list[Ticks]
    last_steps: list[Ticks]
    alive: bool = True
    in_transit: bool = False
    blob: bytes = b""
    came_from: Optional[LocationId] = None
    going_to: Optional[LocationId] = None
    arrives: Ticks = -1
    travel_time: Ticks = 0
    deferred_attach: list[Behavior] = field(default_factory=list)
    last_trip: Optional[MigrationReport] = None


class MockPlatform:
    """Linear-scan in-memory platform with fixed delays."""

    def __init__(
        self,
        message_delay: Ticks = 1,
        migration_delay: Ticks = 1,
        max_ticks: Ticks = 10_000,
        registry: Optional[ActionRegistry] = None,
    ) -> None:
        if message_delay < 0 or migration_delay < 0:
            raise ValueError("delays must be non-negative")
        self.message_delay = message_delay
        self.migration_delay = migration_delay
        self.max_ticks = max_ticks
        self._registry = registry or ActionRegistry()
        self._locations: list[LocationId] = []
        self._entries: dict[AgentId, _Entry] = {}
        self._mail: list[_Mail] = []
        self._seq = 0
        self._ids_given = 0
        self._log = TraceLog()
        self._clock: Ticks = 0
        self._first_unprocessed: Ticks = 0
        self._conversations = 0
        self._started = False

    @property
    def registry(self) -> ActionRegistry:
        return self._registry

    # Locations -------------------------------------------------------------

    def create_location(self, name: str) -> LocationId:
        for loc in self._locations:
            if loc.name == name:
                raise DuplicateLocationName(f"location name {name!r} already in use")
        loc = LocationId(len(self._locations) + 1, name)
        self._locations.append(loc)
        return loc

    def locations(self) -> list[LocationId]:
        return list(self._locations)

    def location_named(self, name: str) -> LocationId:
        for loc in self._locations:
            if loc.name == name:
                return loc
        raise UnknownLocation(f"no location named {name!r}")

    def _require_location(self, loc: LocationId) -> None:
        if loc not in self._locations:
            raise UnknownLocation(f"location {loc!r} does not belong to this runtime")

    # Agents ----------------------------------------------------------------

    def reserve_agent_id(self) -> AgentId:
        self._ids_given += 1
        return AgentId(self._ids_given)

    def spawn_agent(
        self,
        at: LocationId,
        behaviors: list[Behavior],
        agent_id: Optional[AgentId] = None,
    ) -> AgentId:
        first = self._clock + 1 if self._started else 0
        return self._admit(at, behaviors, agent_id, self._clock, first)

    def _admit(
        self,
        at: LocationId,
        behaviors: list[Behavior],
        agent_id: Optional[AgentId],
        tick: Ticks,
        first_step: Ticks,
    ) -> AgentId:
        self._require_location(at)
        if agent_id is None:
            agent_id = self.reserve_agent_id()
        elif agent_id in self._entries:
            raise ValueError(f"agent id {agent_id!r} already in use")
        shell = AgentShell(id=agent_id, home=at, current=at, behaviors=list(behaviors))
        self._entries[agent_id] = _Entry(
            shell=shell,
            outcomes=[None] * len(shell.behaviors),
            attach_ticks=[first_step - 1] * len(shell.behaviors),
            last_steps=[-1] * len(shell.behaviors),
        )
        self._log.emit(tick, EventKind.SPAWN, agent_id, {"at": at.name})
        return agent_id

    def _entry(self, agent: AgentId) -> _Entry:
        entry = self._entries.get(agent)
        if entry is None:
            raise UnknownAgent(f"no agent {agent!r}")
        return entry

    def agent_location(self, agent: AgentId) -> Optional[LocationId]:
        entry = self._entry(agent)
        # dead agents keep reporting their final resting place
        return None if entry.in_transit else entry.shell.current

    def agents_at(self, location: LocationId) -> list[AgentId]:
        self._require_location(location)
        found = []
        for agent_id, entry in self._entries.items():
            if entry.alive and not entry.in_transit and entry.shell.current == location:
                found.append(agent_id)
        return found

    def is_alive(self, agent: AgentId) -> bool:
        entry = self._entries.get(agent)
        return entry is not None and entry.alive

    def agent_state(self, agent: AgentId) -> dict[str, Any]:
        entry = self._entry(agent)
        if entry.in_transit:
            return dict(deserialize_shell(entry.blob).state)
        return dict(entry.shell.state)

    # Messaging and migration ----------------------------------------------

    def send(self, msg: Message) -> None:
        self._post(msg, self._clock)

    def _post(self, msg: Message, tick: Ticks) -> None:
        self._mail.append(_Mail(tick + self.message_delay, self._seq, msg))
        self._seq += 1
        self._log.emit(
            tick,
            EventKind.SEND,
            msg.sender,
            {"type": msg.type_tag, "to": msg.receiver.value, "conversation": msg.conversation_id},
        )

    def migrate(self, agent: AgentId, dest: LocationId) -> None:
        self._depart(agent, dest, self._clock)

    def _depart(self, agent: AgentId, dest: LocationId, tick: Ticks) -> None:
        self._require_location(dest)
        entry = self._entry(agent)
        if entry.in_transit:
            raise AlreadyMigrating(f"agent {agent!r} is already in transit")
        if not entry.alive:
            raise UnknownAgent(f"agent {agent!r} has terminated")
        src = entry.shell.current
        self._log.emit(tick, EventKind.MIGRATE_START, agent, {"from": src.name, "to": dest.name})
        entry.blob = serialize_shell(entry.shell)
        entry.in_transit = True
        entry.came_from = src
        entry.going_to = dest
        entry.arrives = tick + self.migration_delay
        entry.travel_time = self.migration_delay

    def attach_behavior(self, target: AgentId, behavior: Behavior) -> None:
        self._append_behavior(target, behavior, self._clock)

    def _append_behavior(self, target: AgentId, behavior: Behavior, tick: Ticks) -> None:
        entry = self._entry(target)
        if not entry.alive:
            raise UnknownAgent(f"agent {target!r} has terminated")
        if entry.in_transit:
            entry.deferred_attach.append(behavior)
            return
        entry.shell.behaviors.append(behavior)
        entry.outcomes.append(None)
        entry.attach_ticks.append(tick)
        entry.last_steps.append(-1)

    # Clock and run loop ----------------------------------------------------

    def now(self) -> Ticks:
        return self._clock

    def trace(self) -> TraceLog:
        return self._log

    def new_conversation_id(self) -> str:
        self._conversations += 1
        return f"c{self._conversations}"

    def run(self, until: Optional[Ticks] = None) -> TraceLog:
        self._started = True
        tick = self._first_unprocessed
        while True:
            if until is not None and tick > until:
                break
            if until is None and self._quiet(tick):
                break
            if until is None and tick > self.max_ticks:
                raise TickBudgetExceeded(f"no quiescence by tick {self.max_ticks}")
            self._one_tick(tick)
            tick += 1
        self._first_unprocessed = tick
        if until is not None and until > self._clock:
            self._clock = until
        return self._log

    def _quiet(self, from_tick: Ticks) -> bool:
        """True when nothing will ever happen at from_tick or later."""
        if self._mail:
            return False
        for entry in self._entries.values():
            if entry.in_transit:
                return False
            if not entry.alive:
                continue
            for i, behavior in enumerate(entry.shell.behaviors):
                if behavior.finished:
                    continue
                out = entry.outcomes[i]
                if out is None or isinstance(out, Running):
                    return False
                if isinstance(out, Blocked):
                    if wake_satisfied(
                        out.wake, now=from_tick, shell=entry.shell, in_transit=False
                    ):
                        return False
                    if next_wake_time(out.wake) is not None:
                        return False
        return True

    def _one_tick(self, tick: Ticks) -> None:
        self._clock = tick
        self._land_travelers(tick, resume_today=True)
        self._deliver(tick)
        self._step_all(tick)
        while True:
            moved = self._land_travelers(tick, resume_today=False)
            moved = self._deliver(tick) or moved
            if not moved:
                break
        self._bury_finished(tick)

    def _land_travelers(self, tick: Ticks, resume_today: bool) -> bool:
        landed = False
        arrivals = []
        for agent_id, entry in self._entries.items():
            if entry.in_transit and entry.arrives <= tick:
                arrivals.append((entry.arrives, agent_id))
        for _, agent_id in sorted(arrivals):
            entry = self._entries[agent_id]
            src, dest, took = entry.came_from, entry.going_to, entry.travel_time
            shell = deserialize_shell(entry.blob)
            shell.current = dest
            entry.shell = shell
            entry.in_transit = False
            entry.blob = b""
            first = tick if resume_today else tick + 1
            entry.outcomes = [None] * len(shell.behaviors)
            entry.attach_ticks = [first - 1] * len(shell.behaviors)
            entry.last_steps = [-1] * len(shell.behaviors)
            for behavior in entry.deferred_attach:
                shell.behaviors.append(behavior)
                entry.outcomes.append(None)
                entry.attach_ticks.append(tick)
                entry.last_steps.append(-1)
            entry.deferred_attach = []
            entry.last_trip = MigrationReport(src, dest, took, tick)
            self._log.emit(
                tick,
                EventKind.MIGRATE_END,
                agent_id,
                {"from": src.name, "to": dest.name, "latency": took},
            )
            landed = True
        return landed

    def _deliver(self, tick: Ticks) -> bool:
        due = sorted(
            (m for m in self._mail if m.due <= tick), key=lambda m: (m.due, m.seq)
        )
        if not due:
            return False
        progressed = False
        for mail in due:
            entry = self._entries.get(mail.msg.receiver)
            info = {
                "type": mail.msg.type_tag,
                "from": mail.msg.sender.value,
                "conversation": mail.msg.conversation_id,
            }
            if entry is not None and entry.in_transit:
                mail.due = entry.arrives  # wait for the traveler
                continue
            self._mail.remove(mail)
            progressed = True
            if entry is None:
                self._log.emit(
                    tick,
                    EventKind.DELIVER,
                    mail.msg.receiver,
                    {**info, "failed": True, "reason": "unknown agent"},
                )
            elif not entry.alive:
                self._log.emit(
                    tick,
                    EventKind.DELIVER,
                    mail.msg.receiver,
                    {**info, "failed": True, "reason": "terminated"},
                )
            else:
                entry.shell.inbox.append(mail.msg)
                self._log.emit(tick, EventKind.DELIVER, mail.msg.receiver, info)
        return progressed

    def _step_all(self, tick: Ticks) -> None:
        for agent_id in list(self._entries):
            entry = self._entries[agent_id]
            if not entry.alive or entry.in_transit:
                continue
            count = len(entry.shell.behaviors)
            for i in range(count):
                if not entry.alive or entry.in_transit:
                    break
                behavior = entry.shell.behaviors[i]
                if not self._may_step(entry, i, tick):
                    continue
                ctx = AgentContext(
                    now=tick,
                    shell=entry.shell,
                    registry=self._registry,
                    reserve_agent_id=self.reserve_agent_id,
                    new_conversation_id=self.new_conversation_id,
                    last_migration=entry.last_trip,
                )
                outcome = behavior.step(ctx)
                entry.outcomes[i] = outcome
                entry.last_steps[i] = tick
                self._realize(agent_id, ctx.effects, tick)
                if isinstance(outcome, Done):
                    self._log.emit(
                        tick,
                        EventKind.BEHAVIOR_DONE,
                        agent_id,
                        {"kind": behavior.kind, "slot": i},
                    )

    def _may_step(self, entry: _Entry, i: int, tick: Ticks) -> bool:
        if entry.shell.behaviors[i].finished:
            return False
        if entry.attach_ticks[i] >= tick or entry.last_steps[i] >= tick:
            return False
        out = entry.outcomes[i]
        if out is None or isinstance(out, Running):
            return True
        if isinstance(out, Blocked):
            return wake_satisfied(out.wake, now=tick, shell=entry.shell, in_transit=False)
        return False

    def _realize(self, agent_id: AgentId, effects: list[Any], tick: Ticks) -> None:
        for effect in effects:
            if isinstance(effect, SendEffect):
                self._post(effect.message, tick)
            elif isinstance(effect, SpawnEffect):
                self._admit(effect.at, effect.behaviors, effect.agent_id, tick, tick + 1)
            elif isinstance(effect, MigrateEffect):
                self._depart(agent_id, effect.dest, tick)
            elif isinstance(effect, AttachEffect):
                self._append_behavior(effect.target, effect.behavior, tick)
            elif isinstance(effect, TraceEffect):
                self._log.emit(tick, EventKind(effect.kind), agent_id, effect.detail)
            else:
                raise TypeError(f"unknown effect {effect!r}")

    def _bury_finished(self, tick: Ticks) -> None:
        for agent_id, entry in self._entries.items():
            if not entry.alive or entry.in_transit:
                continue
            if all(b.finished for b in entry.shell.behaviors):
                entry.alive = False
                self._log.emit(tick, EventKind.TERMINATE, agent_id, {})
