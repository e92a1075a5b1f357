"""Deterministic discrete-event simulated platform.

One runtime hosts named locations and the agents living on them, advancing an
integer tick clock. Work is processed tick by tick (idle stretches are
skipped) in a fixed phase order:

1. finish migrations due this tick,
2. deliver messages due this tick,
3. step every runnable behavior (agent spawn order, behavior list order),
   applying each step's buffered effects immediately after it returns,
4. sweep zero-latency arrivals and deliveries produced during phase 3,
5. terminate agents whose behaviors have all finished.

All randomness (latency draws) comes from one seeded generator, so a given
config and scenario always yields a byte-identical trace.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Optional, Protocol

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


class LatencyModel(Protocol):
    def sample(self, rng: random.Random, src: LocationId, dst: LocationId) -> Ticks: ...


@dataclass(frozen=True)
class Fixed:
    """Constant latency in ticks."""

    ticks: Ticks

    def __post_init__(self) -> None:
        if self.ticks < 0:
            raise ValueError("latency must be non-negative")

    def sample(self, rng: random.Random, src: LocationId, dst: LocationId) -> Ticks:
        return self.ticks


@dataclass(frozen=True)
class UniformRange:
    """Latency drawn uniformly from [lo, hi] (inclusive) per send/migration."""

    lo: Ticks
    hi: Ticks

    def __post_init__(self) -> None:
        if not 0 <= self.lo <= self.hi:
            raise ValueError("require 0 <= lo <= hi")

    def sample(self, rng: random.Random, src: LocationId, dst: LocationId) -> Ticks:
        return rng.randint(self.lo, self.hi)


@dataclass(frozen=True)
class PerLink:
    """Fixed latency per ordered (source name, destination name) pair."""

    table: dict[tuple[str, str], Ticks]
    default: Ticks = 1

    def sample(self, rng: random.Random, src: LocationId, dst: LocationId) -> Ticks:
        return self.table.get((src.name, dst.name), self.default)


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    message_latency: LatencyModel = Fixed(1)
    migration_latency: LatencyModel = Fixed(1)
    max_ticks: Ticks = 10_000


@dataclass
class _Slot:
    """Per-behavior bookkeeping: last outcome and when it became steppable."""

    behavior: Behavior
    outcome: Any = None
    attach_tick: Ticks = -1
    last_step: Ticks = -1


_ACTIVE = "active"
_MIGRATING = "migrating"
_TERMINATED = "terminated"


@dataclass
class _AgentRecord:
    shell: AgentShell
    slots: list[_Slot]
    status: str = _ACTIVE
    # Transit bookkeeping, meaningful while status == _MIGRATING.
    blob: bytes = b""
    transit_from: Optional[LocationId] = None
    dest: Optional[LocationId] = None
    arrive_tick: Ticks = -1
    transit_latency: Ticks = 0
    pending_attach: list[Behavior] = field(default_factory=list)
    last_migration: Optional[MigrationReport] = None


class SimPlatform:
    """The event-driven simulated platform (see module docstring)."""

    def __init__(self, config: Optional[SimConfig] = None, registry: Optional[ActionRegistry] = None) -> None:
        self._config = config or SimConfig()
        self._registry = registry or ActionRegistry()
        self._rng = random.Random(self._config.seed)
        self._locs_by_name: dict[str, LocationId] = {}
        self._agents: dict[AgentId, _AgentRecord] = {}
        self._next_agent_value = 1
        self._next_loc_value = 1
        self._heap: list[tuple[Ticks, int, Message]] = []
        self._send_seq = 0
        self._log = TraceLog()
        self._clock: Ticks = 0
        self._next_tick: Ticks = 0
        self._conv_counter = 0
        self._ran = False

    # Config and registry ---------------------------------------------------

    @property
    def config(self) -> SimConfig:
        return self._config

    @property
    def registry(self) -> ActionRegistry:
        return self._registry

    # Locations -------------------------------------------------------------

    def create_location(self, name: str) -> LocationId:
        if name in self._locs_by_name:
            raise DuplicateLocationName(f"location name {name!r} already in use")
        loc = LocationId(self._next_loc_value, name)
        self._next_loc_value += 1
        self._locs_by_name[name] = loc
        return loc

    def locations(self) -> list[LocationId]:
        return list(self._locs_by_name.values())

    def location_named(self, name: str) -> LocationId:
        try:
            return self._locs_by_name[name]
        except KeyError:
            raise UnknownLocation(f"no location named {name!r}") from None

    def _check_location(self, loc: LocationId) -> None:
        if self._locs_by_name.get(loc.name) != loc:
            raise UnknownLocation(f"location {loc!r} does not belong to this runtime")

    # Agents ----------------------------------------------------------------

    def reserve_agent_id(self) -> AgentId:
        agent_id = AgentId(self._next_agent_value)
        self._next_agent_value += 1
        return agent_id

    def spawn_agent(
        self,
        at: LocationId,
        behaviors: list[Behavior],
        agent_id: Optional[AgentId] = None,
    ) -> AgentId:
        attach_tick = self._clock if self._ran else -1
        return self._do_spawn(at, behaviors, agent_id, self._clock, attach_tick)

    def _do_spawn(
        self,
        at: LocationId,
        behaviors: list[Behavior],
        agent_id: Optional[AgentId],
        tick: Ticks,
        attach_tick: Ticks,
    ) -> AgentId:
        self._check_location(at)
        if agent_id is None:
            agent_id = self.reserve_agent_id()
        elif agent_id in self._agents:
            raise ValueError(f"agent id {agent_id!r} already in use")
        shell = AgentShell(id=agent_id, home=at, current=at, behaviors=list(behaviors))
        slots = [_Slot(b, attach_tick=attach_tick) for b in shell.behaviors]
        self._agents[agent_id] = _AgentRecord(shell=shell, slots=slots)
        self._log.emit(tick, EventKind.SPAWN, agent_id, {"at": at.name})
        return agent_id

    def _record(self, agent: AgentId) -> _AgentRecord:
        rec = self._agents.get(agent)
        if rec is None:
            raise UnknownAgent(f"no agent {agent!r}")
        return rec

    def agent_location(self, agent: AgentId) -> Optional[LocationId]:
        rec = self._record(agent)
        if rec.status == _MIGRATING:
            return None
        # terminated agents report their final resting place
        return rec.shell.current

    def agents_at(self, location: LocationId) -> list[AgentId]:
        self._check_location(location)
        return [
            agent_id
            for agent_id, rec in self._agents.items()
            if rec.status == _ACTIVE and rec.shell.current == location
        ]

    def is_alive(self, agent: AgentId) -> bool:
        rec = self._agents.get(agent)
        return rec is not None and rec.status != _TERMINATED

    def agent_state(self, agent: AgentId) -> dict[str, Any]:
        rec = self._record(agent)
        if rec.status == _MIGRATING:
            return dict(deserialize_shell(rec.blob).state)
        return dict(rec.shell.state)

    # Messaging and migration ----------------------------------------------

    def send(self, msg: Message) -> None:
        self._do_send(msg, self._clock)

    def _do_send(self, msg: Message, tick: Ticks) -> None:
        latency = self._latency(self._config.message_latency, msg)
        heapq.heappush(self._heap, (tick + latency, self._send_seq, msg))
        self._send_seq += 1
        self._log.emit(
            tick,
            EventKind.SEND,
            msg.sender,
            {"type": msg.type_tag, "to": msg.receiver.value, "conversation": msg.conversation_id},
        )

    def _latency(self, model: LatencyModel, msg: Message) -> Ticks:
        src = self._location_of_for_latency(msg.sender)
        dst = self._location_of_for_latency(msg.receiver)
        return model.sample(self._rng, src, dst)

    def _location_of_for_latency(self, agent: AgentId) -> LocationId:
        rec = self._agents.get(agent)
        if rec is None:
            return LocationId(0, "?")
        if rec.status == _MIGRATING:
            return rec.dest  # type: ignore[return-value]
        return rec.shell.current

    def migrate(self, agent: AgentId, dest: LocationId) -> None:
        self._do_migrate(agent, dest, self._clock)

    def _do_migrate(self, agent: AgentId, dest: LocationId, tick: Ticks) -> None:
        self._check_location(dest)
        rec = self._record(agent)
        if rec.status == _MIGRATING:
            raise AlreadyMigrating(f"agent {agent!r} is already in transit")
        if rec.status == _TERMINATED:
            raise UnknownAgent(f"agent {agent!r} has terminated")
        src = rec.shell.current
        latency = self._config.migration_latency.sample(self._rng, src, dest)
        self._log.emit(tick, EventKind.MIGRATE_START, agent, {"from": src.name, "to": dest.name})
        rec.blob = serialize_shell(rec.shell)
        rec.status = _MIGRATING
        rec.transit_from = src
        rec.dest = dest
        rec.arrive_tick = tick + latency
        rec.transit_latency = latency

    def attach_behavior(self, target: AgentId, behavior: Behavior) -> None:
        self._do_attach(target, behavior, self._clock)

    def _do_attach(self, target: AgentId, behavior: Behavior, tick: Ticks) -> None:
        rec = self._record(target)
        if rec.status == _TERMINATED:
            raise UnknownAgent(f"agent {target!r} has terminated")
        if rec.status == _MIGRATING:
            rec.pending_attach.append(behavior)
            return
        rec.shell.behaviors.append(behavior)
        rec.slots.append(_Slot(behavior, attach_tick=tick))

    # Clock and run loop ----------------------------------------------------

    def now(self) -> Ticks:
        return self._clock

    def trace(self) -> TraceLog:
        return self._log

    def new_conversation_id(self) -> str:
        self._conv_counter += 1
        return f"c{self._conv_counter}"

    def run(self, until: Optional[Ticks] = None) -> TraceLog:
        self._ran = True
        while True:
            work = self._next_work_tick()
            if work is None:
                break
            if until is not None and work > until:
                break
            if until is None and work > self._config.max_ticks:
                raise TickBudgetExceeded(
                    f"no quiescence by tick {self._config.max_ticks} (next work at {work})"
                )
            self._process_tick(work)
        if until is not None and until > self._clock:
            self._clock = until
            self._next_tick = max(self._next_tick, until + 1)
        return self._log

    def _next_work_tick(self) -> Optional[Ticks]:
        floor = self._next_tick
        candidates: list[Ticks] = []
        if self._heap:
            candidates.append(max(self._heap[0][0], floor))
        for rec in self._agents.values():
            if rec.status == _MIGRATING:
                candidates.append(max(rec.arrive_tick, floor))
            elif rec.status == _ACTIVE:
                for slot in rec.slots:
                    tick = self._slot_next_tick(rec, slot, floor)
                    if tick is not None:
                        candidates.append(tick)
        return min(candidates) if candidates else None

    def _slot_next_tick(self, rec: _AgentRecord, slot: _Slot, floor: Ticks) -> Optional[Ticks]:
        if slot.behavior.finished:
            return None
        base = max(slot.attach_tick + 1, floor)
        out = slot.outcome
        if out is None or isinstance(out, Running):
            return base
        if isinstance(out, Blocked):
            if wake_satisfied(out.wake, now=base, shell=rec.shell, in_transit=False):
                return base
            wake_at = next_wake_time(out.wake)
            if wake_at is not None:
                return max(wake_at, base)
        return None

    def _process_tick(self, tick: Ticks) -> None:
        self._clock = tick
        self._finish_due_arrivals(tick, steppable=True)
        self._deliver_due(tick)
        self._step_phase(tick)
        self._end_of_tick_sweep(tick)
        self._termination_sweep(tick)
        self._next_tick = tick + 1

    # Phase helpers ---------------------------------------------------------

    def _finish_due_arrivals(self, tick: Ticks, steppable: bool) -> bool:
        due = [
            (rec.arrive_tick, agent_id)
            for agent_id, rec in self._agents.items()
            if rec.status == _MIGRATING and rec.arrive_tick <= tick
        ]
        for _, agent_id in sorted(due):
            self._finish_arrival(agent_id, tick, steppable)
        return bool(due)

    def _finish_arrival(self, agent_id: AgentId, tick: Ticks, steppable: bool) -> None:
        rec = self._agents[agent_id]
        src, dest, latency = rec.transit_from, rec.dest, rec.transit_latency
        shell = deserialize_shell(rec.blob)
        shell.current = dest
        rec.shell = shell
        rec.status = _ACTIVE
        rec.blob = b""
        attach = tick - 1 if steppable else tick
        rec.slots = [_Slot(b, attach_tick=attach) for b in shell.behaviors]
        for behavior in rec.pending_attach:
            shell.behaviors.append(behavior)
            rec.slots.append(_Slot(behavior, attach_tick=tick))
        rec.pending_attach = []
        rec.last_migration = MigrationReport(src, dest, latency, tick)
        self._log.emit(
            tick,
            EventKind.MIGRATE_END,
            agent_id,
            {"from": src.name, "to": dest.name, "latency": latency},
        )

    def _deliver_due(self, tick: Ticks) -> bool:
        progressed = False
        while self._heap and self._heap[0][0] <= tick:
            due, seq, msg = heapq.heappop(self._heap)
            rec = self._agents.get(msg.receiver)
            base = {
                "type": msg.type_tag,
                "from": msg.sender.value,
                "conversation": msg.conversation_id,
            }
            if rec is None:
                self._log.emit(
                    tick, EventKind.DELIVER, msg.receiver, {**base, "failed": True, "reason": "unknown agent"}
                )
            elif rec.status == _TERMINATED:
                self._log.emit(
                    tick, EventKind.DELIVER, msg.receiver, {**base, "failed": True, "reason": "terminated"}
                )
            elif rec.status == _MIGRATING:
                # Hold for the traveler; it reads its mail on arrival.
                heapq.heappush(self._heap, (rec.arrive_tick, seq, msg))
                continue
            else:
                rec.shell.inbox.append(msg)
                self._log.emit(tick, EventKind.DELIVER, msg.receiver, base)
            progressed = True
        return progressed

    def _step_phase(self, tick: Ticks) -> None:
        for agent_id in list(self._agents):
            rec = self._agents[agent_id]
            if rec.status != _ACTIVE:
                continue
            for index, slot in enumerate(list(rec.slots)):
                if rec.status != _ACTIVE:
                    break  # the agent migrated mid-tick
                if not self._slot_runnable(rec, slot, tick):
                    continue
                ctx = AgentContext(
                    now=tick,
                    shell=rec.shell,
                    registry=self._registry,
                    reserve_agent_id=self.reserve_agent_id,
                    new_conversation_id=self.new_conversation_id,
                    last_migration=rec.last_migration,
                )
                outcome = slot.behavior.step(ctx)
                slot.outcome = outcome
                slot.last_step = tick
                self._apply_effects(agent_id, ctx.effects, tick)
                if isinstance(outcome, Done):
                    self._log.emit(
                        tick,
                        EventKind.BEHAVIOR_DONE,
                        agent_id,
                        {"kind": slot.behavior.kind, "slot": index},
                    )

    def _slot_runnable(self, rec: _AgentRecord, slot: _Slot, tick: Ticks) -> bool:
        if slot.behavior.finished or slot.attach_tick >= tick or slot.last_step >= tick:
            return False
        out = slot.outcome
        if out is None or isinstance(out, Running):
            return True
        if isinstance(out, Blocked):
            return wake_satisfied(out.wake, now=tick, shell=rec.shell, in_transit=False)
        return False

    def _apply_effects(self, agent_id: AgentId, effects: list[Any], tick: Ticks) -> None:
        for effect in effects:
            if isinstance(effect, SendEffect):
                self._do_send(effect.message, tick)
            elif isinstance(effect, SpawnEffect):
                self._do_spawn(effect.at, effect.behaviors, effect.agent_id, tick, tick)
            elif isinstance(effect, MigrateEffect):
                self._do_migrate(agent_id, effect.dest, tick)
            elif isinstance(effect, AttachEffect):
                self._do_attach(effect.target, effect.behavior, tick)
            elif isinstance(effect, TraceEffect):
                self._log.emit(tick, EventKind(effect.kind), agent_id, effect.detail)
            else:
                raise TypeError(f"unknown effect {effect!r}")

    def _end_of_tick_sweep(self, tick: Ticks) -> None:
        # Zero-latency sends and migrations land within the same tick; their
        # targets become steppable next tick.
        while True:
            progressed = self._finish_due_arrivals(tick, steppable=False)
            progressed = self._deliver_due(tick) or progressed
            if not progressed:
                break

    def _termination_sweep(self, tick: Ticks) -> None:
        for agent_id, rec in self._agents.items():
            if rec.status != _ACTIVE:
                continue
            if all(slot.behavior.finished for slot in rec.slots):
                rec.status = _TERMINATED
                self._log.emit(tick, EventKind.TERMINATE, agent_id, {})
