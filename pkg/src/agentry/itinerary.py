"""Traveling under deadlines: routes, arrival windows, and delay estimates.

An itinerary drives its agent through an ordered route of objectives, each a
location with an inclusive [earliest, latest] arrival window expressed as
offsets from the route's base time. Arriving early means waiting for the
window to open; arriving late means enacting the configured missed-objective
policy, or halting for good when there is none.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

from .actions import ActionDescriptor
from .errors import EmptyRoute
from .model import (
    DONE,
    RUNNING,
    AgentContext,
    AtTime,
    Behavior,
    Blocked,
    Done,
    LocationId,
    Never,
    OnArrival,
    StepOutcome,
    Ticks,
    behavior_from_dict,
    clone_behavior,
    location_from_jsonable,
    location_to_jsonable,
)

Window = tuple[Ticks, Optional[Ticks]]


@dataclass(frozen=True)
class Objective:
    """One stop: where to be, when to be there, what to do on arrival.

    Offsets are relative to the route's base time; a ``latest_offset`` of
    None leaves the window open-ended.
    """

    location: LocationId
    earliest_offset: Ticks = 0
    latest_offset: Optional[Ticks] = None
    stop_tasks: tuple[ActionDescriptor, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "stop_tasks", tuple(self.stop_tasks))
        if self.earliest_offset < 0:
            raise ValueError("earliest_offset must be non-negative")
        if self.latest_offset is not None and self.latest_offset < self.earliest_offset:
            raise ValueError("latest_offset must be >= earliest_offset")

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "location": location_to_jsonable(self.location),
            "earliest": self.earliest_offset,
            "latest": self.latest_offset,
            "tasks": [t.to_jsonable() for t in self.stop_tasks],
        }

    @classmethod
    def from_jsonable(cls, d: dict[str, Any]) -> "Objective":
        return cls(
            location=location_from_jsonable(d["location"]),
            earliest_offset=int(d.get("earliest", 0)),
            latest_offset=None if d.get("latest") is None else int(d["latest"]),
            stop_tasks=tuple(ActionDescriptor.from_jsonable(t) for t in d.get("tasks", [])),
        )


@dataclass(frozen=True)
class Route:
    """A non-empty ordered list of objectives anchored at ``base_time``.

    ``base_time=None`` anchors the route at the tick the itinerary behavior
    first steps; the resolved value never changes afterwards.
    """

    objectives: tuple[Objective, ...]
    base_time: Optional[Ticks] = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "objectives", tuple(self.objectives))
        if not self.objectives:
            raise EmptyRoute("a route needs at least one objective")

    def window(self, index: int, base: Ticks) -> Window:
        obj = self.objectives[index]
        end = None if obj.latest_offset is None else base + obj.latest_offset
        return (base + obj.earliest_offset, end)

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "objectives": [o.to_jsonable() for o in self.objectives],
            "base_time": self.base_time,
        }

    @classmethod
    def from_jsonable(cls, d: dict[str, Any]) -> "Route":
        return cls(
            objectives=tuple(Objective.from_jsonable(o) for o in d["objectives"]),
            base_time=None if d.get("base_time") is None else int(d["base_time"]),
        )


# ---------------------------------------------------------------------------
# Arrival classification
# ---------------------------------------------------------------------------


class ArrivalClass:
    """Marker base: Early, OnTime, or Late."""


@dataclass(frozen=True)
class Early(ArrivalClass):
    wait_until: Ticks


@dataclass(frozen=True)
class OnTime(ArrivalClass):
    pass


@dataclass(frozen=True)
class Late(ArrivalClass):
    by: Ticks


def classify_arrival(window: Window, arrival: Ticks) -> ArrivalClass:
    """Inclusive at both bounds: early strictly before the window, late
    strictly after it, on time otherwise."""
    start, end = window
    if arrival < start:
        return Early(wait_until=start)
    if end is not None and arrival > end:
        return Late(by=arrival - end)
    return OnTime()


# ---------------------------------------------------------------------------
# Delay estimation
# ---------------------------------------------------------------------------

Link = tuple[str, str]


def _fraction_to_jsonable(value: Fraction) -> list[int]:
    return [value.numerator, value.denominator]


def _fraction_from_jsonable(pair: Sequence[int]) -> Fraction:
    return Fraction(int(pair[0]), int(pair[1]))


@dataclass(frozen=True)
class DelayEstimator:
    """Per-link travel time estimates smoothed exponentially.

    After observing latency d on a link with prior estimate e the new
    estimate is alpha*d + (1-alpha)*e, computed exactly on rationals.
    Unobserved links report ``default_estimate``. Updates return a new
    estimator; instances never mutate.
    """

    alpha: Fraction = Fraction(1, 2)
    default_estimate: Fraction = Fraction(0)
    links: dict[Link, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        object.__setattr__(self, "default_estimate", Fraction(self.default_estimate))
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.default_estimate < 0:
            raise ValueError("default_estimate must be non-negative")

    def estimate(self, link: Link) -> Fraction:
        return self.links.get(link, self.default_estimate)

    def updated(self, link: Link, observed: Ticks) -> "DelayEstimator":
        if observed < 0:
            raise ValueError("observed latency must be non-negative")
        prior = self.estimate(link)
        fresh = self.alpha * observed + (1 - self.alpha) * prior
        links = dict(self.links)
        links[link] = fresh
        return DelayEstimator(self.alpha, self.default_estimate, links)

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "alpha": _fraction_to_jsonable(self.alpha),
            "default": _fraction_to_jsonable(self.default_estimate),
            "links": [
                [src, dst, _fraction_to_jsonable(value)]
                for (src, dst), value in sorted(self.links.items())
            ],
        }

    @classmethod
    def from_jsonable(cls, d: dict[str, Any]) -> "DelayEstimator":
        return cls(
            alpha=_fraction_from_jsonable(d["alpha"]),
            default_estimate=_fraction_from_jsonable(d["default"]),
            links={
                (src, dst): _fraction_from_jsonable(value) for src, dst, value in d.get("links", [])
            },
        )


def observe_and_update_delay(est: DelayEstimator, link: Link, observed: Ticks) -> DelayEstimator:
    return est.updated(link, observed)


def next_departure_plan(
    est: DelayEstimator,
    current: LocationId,
    nxt: Objective,
    now: Ticks,
    base_time: Ticks = 0,
) -> Ticks:
    """Latest safe departure tick: leave so the predicted arrival does not
    precede the window, but never earlier than now. When even an immediate
    departure predicts a late arrival this still returns ``now`` (best
    effort; the late path handles the rest)."""
    window_start = base_time + nxt.earliest_offset
    estimate = est.estimate((current.name, nxt.location.name))
    return max(now, math.ceil(window_start - estimate))


# ---------------------------------------------------------------------------
# The itinerary behavior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ItineraryConfig:
    """Route, arrival listeners, and the missed-objective policy. Frozen:
    none of it can change once the behavior is enacted."""

    route: Route
    reached_listeners: tuple[ActionDescriptor, ...] = ()
    missed_behavior: Optional[Behavior] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "reached_listeners", tuple(self.reached_listeners))

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "route": self.route.to_jsonable(),
            "listeners": [l.to_jsonable() for l in self.reached_listeners],
            "missed_behavior": self.missed_behavior.to_dict() if self.missed_behavior else None,
        }

    @classmethod
    def from_jsonable(cls, d: dict[str, Any]) -> "ItineraryConfig":
        missed = d.get("missed_behavior")
        return cls(
            route=Route.from_jsonable(d["route"]),
            reached_listeners=tuple(ActionDescriptor.from_jsonable(l) for l in d.get("listeners", [])),
            missed_behavior=behavior_from_dict(missed) if missed else None,
        )


_START = "start"
_DEPART = "depart"
_TRAVELING = "traveling"
_WINDOW_WAIT = "window_wait"
_MISSED = "missed"
_HALTED = "halted"


class Itinerary(Behavior):
    """Visit the route's objectives in order, respecting arrival windows.

    Per objective: travel there (immediately by default; with
    ``planned_departures`` the departure is delayed to the latest tick the
    delay estimator still predicts an on-time arrival). On arrival the stop
    is classified against its absolute window. Early waits for the window to
    open, then proceeds as on time: the reached listeners fire, then the
    stop tasks run, then the journey continues. Late traces the miss and
    enacts a fresh copy of the missed-objective behavior before skipping to
    the next stop; without one the itinerary halts permanently and the halt
    is traced (the agent's other behaviors keep running).

    Observed migration latencies feed the estimator as the journey unfolds.
    """

    kind = "itinerary"

    def __init__(
        self,
        config: ItineraryConfig,
        planned_departures: bool = False,
        estimator: Optional[DelayEstimator] = None,
        *,
        _base: Optional[Ticks] = None,
        _index: int = 0,
        _phase: str = _START,
        _arrival: Optional[Ticks] = None,
        _arrival_class: str = "",
        _missed_clone: Optional[Behavior] = None,
    ):
        super().__init__()
        self.config = config
        self.planned_departures = planned_departures
        self.estimator = estimator if estimator is not None else DelayEstimator()
        self._base = _base
        self._index = _index
        self._phase = _phase
        self._arrival = _arrival
        self._arrival_class = _arrival_class
        self._missed_clone = _missed_clone

    # Stepping --------------------------------------------------------------

    def _objective(self) -> Objective:
        return self.config.route.objectives[self._index]

    def _window(self) -> Window:
        return self.config.route.window(self._index, self._base)

    def _step(self, ctx: AgentContext) -> StepOutcome:
        if self._phase == _START:
            route_base = self.config.route.base_time
            self._base = route_base if route_base is not None else ctx.now
            self._phase = _DEPART
        if self._phase == _DEPART:
            return self._depart(ctx)
        if self._phase == _TRAVELING:
            return self._traveling(ctx)
        if self._phase == _WINDOW_WAIT:
            if ctx.now < self._window()[0]:
                return Blocked(AtTime(self._window()[0]))
            return self._process_objective(ctx)
        if self._phase == _MISSED:
            return self._run_missed(ctx)
        return Blocked(Never())  # halted

    def _depart(self, ctx: AgentContext) -> StepOutcome:
        obj = self._objective()
        if ctx.location == obj.location:
            return self._handle_arrival(ctx, arrival=ctx.now)
        if self.planned_departures:
            depart_at = next_departure_plan(self.estimator, ctx.location, obj, ctx.now, self._base)
            if ctx.now < depart_at:
                return Blocked(AtTime(depart_at))
        ctx.request_migration(obj.location)
        self._phase = _TRAVELING
        return Blocked(OnArrival(obj.location))

    def _traveling(self, ctx: AgentContext) -> StepOutcome:
        obj = self._objective()
        if ctx.location != obj.location:
            return Blocked(OnArrival(obj.location))
        report = ctx.last_migration
        arrival = ctx.now
        if report is not None and report.dest == obj.location:
            self.estimator = self.estimator.updated((report.src.name, report.dest.name), report.latency)
            arrival = report.arrived_at
        return self._handle_arrival(ctx, arrival=arrival)

    def _handle_arrival(self, ctx: AgentContext, arrival: Ticks) -> StepOutcome:
        obj = self._objective()
        verdict = classify_arrival(self._window(), arrival)
        self._arrival = arrival
        if isinstance(verdict, Late):
            ctx.trace(
                {
                    "objective": self._index,
                    "location": obj.location.name,
                    "arrival": arrival,
                    "by": verdict.by,
                },
                kind="objective_missed",
            )
            if self.config.missed_behavior is None:
                self._phase = _HALTED
                ctx.trace(
                    {"halted": True, "objective": self._index, "location": obj.location.name}
                )
                return Blocked(Never())
            self._missed_clone = clone_behavior(self.config.missed_behavior)
            self._phase = _MISSED
            return self._run_missed(ctx)
        if isinstance(verdict, Early):
            self._arrival_class = "early"
            self._phase = _WINDOW_WAIT
            return Blocked(AtTime(verdict.wait_until))
        self._arrival_class = "on_time"
        return self._process_objective(ctx)

    def _process_objective(self, ctx: AgentContext) -> StepOutcome:
        obj = self._objective()
        ctx.trace(
            {
                "objective": self._index,
                "location": obj.location.name,
                "arrival": self._arrival,
                "class": self._arrival_class,
            },
            kind="objective_reached",
        )
        for descriptor in self.config.reached_listeners:
            self._run_quietly(ctx, descriptor)
        for descriptor in obj.stop_tasks:
            self._run_quietly(ctx, descriptor)
        return self._advance(ctx)

    @staticmethod
    def _run_quietly(ctx: AgentContext, descriptor: ActionDescriptor) -> None:
        try:
            ctx.run_action(descriptor, None)
        except Exception as exc:
            ctx.trace({"error": str(exc), "action": descriptor.name})

    def _run_missed(self, ctx: AgentContext) -> StepOutcome:
        outcome = self._missed_clone.step(ctx)
        if isinstance(outcome, Done):
            self._missed_clone = None
            return self._advance(ctx)
        return outcome

    def _advance(self, ctx: AgentContext) -> StepOutcome:
        self._index += 1
        self._arrival = None
        self._arrival_class = ""
        if self._index >= len(self.config.route.objectives):
            return DONE
        self._phase = _DEPART
        return RUNNING

    # Serialization ---------------------------------------------------------

    def _to_dict_body(self) -> dict[str, Any]:
        return {
            "config": self.config.to_jsonable(),
            "planned": self.planned_departures,
            "estimator": self.estimator.to_jsonable(),
            "base": self._base,
            "index": self._index,
            "phase": self._phase,
            "arrival": self._arrival,
            "arrival_class": self._arrival_class,
            "missed_clone": self._missed_clone.to_dict() if self._missed_clone else None,
        }

    @classmethod
    def _from_dict_body(cls, d: dict[str, Any]) -> "Itinerary":
        clone = d.get("missed_clone")
        return cls(
            ItineraryConfig.from_jsonable(d["config"]),
            planned_departures=bool(d.get("planned", False)),
            estimator=DelayEstimator.from_jsonable(d["estimator"]),
            _base=d.get("base"),
            _index=int(d.get("index", 0)),
            _phase=d.get("phase", _START),
            _arrival=d.get("arrival"),
            _arrival_class=d.get("arrival_class", ""),
            _missed_clone=behavior_from_dict(clone) if clone else None,
        )
