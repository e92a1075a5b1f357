"""Platform adapter protocol.

Behaviors and the assessment services are written against this surface only;
any runtime that honors it (the event-driven simulator, the naive mock, or a
real distributed platform) can host them unchanged.
"""

from __future__ import annotations

from typing import Any, Optional, Protocol, runtime_checkable

from .actions import ActionRegistry
from .model import AgentId, Behavior, LocationId, Message, Ticks
from .trace import TraceLog


@runtime_checkable
class PlatformAdapter(Protocol):
    """Minimal hosting contract for mobile agents.

    Time is a monotonic integer tick counter. Agents spawned before the first
    ``run`` call are stepped from tick 0; agents spawned at tick T by another
    agent are stepped from tick T + 1. At each processed tick the runtime
    finishes due migrations, delivers due messages, then steps runnable
    behaviors in agent spawn order and behavior list order.
    """

    @property
    def registry(self) -> ActionRegistry: ...

    def create_location(self, name: str) -> LocationId:
        """Create a named location. Names must be unique."""
        ...

    def locations(self) -> list[LocationId]: ...

    def location_named(self, name: str) -> LocationId: ...

    def reserve_agent_id(self) -> AgentId:
        """Allocate an agent id ahead of its spawn (ids are never reused)."""
        ...

    def spawn_agent(
        self,
        at: LocationId,
        behaviors: list[Behavior],
        agent_id: Optional[AgentId] = None,
    ) -> AgentId:
        """Create an agent at ``at`` whose home is ``at``."""
        ...

    def send(self, msg: Message) -> None:
        """Enqueue a message for delivery at now + latency. Delivery is
        reliable unless the receiver has terminated, in which case a failed
        delivery is traced and the message dropped without sender error."""
        ...

    def migrate(self, agent: AgentId, dest: LocationId) -> None:
        """Serialize the agent, move it, reactivate it at ``dest`` after the
        migration latency. The inbox keeps accumulating while in transit."""
        ...

    def attach_behavior(self, target: AgentId, behavior: Behavior) -> None:
        """Append a behavior to ``target``'s list; it is stepped from the
        next tick."""
        ...

    def agent_location(self, agent: AgentId) -> Optional[LocationId]:
        """Where the agent currently is, or None while it is in transit."""
        ...

    def agents_at(self, location: LocationId) -> list[AgentId]: ...

    def is_alive(self, agent: AgentId) -> bool: ...

    def agent_state(self, agent: AgentId) -> dict[str, Any]:
        """Copy of the agent's serializable key/value store."""
        ...

    def now(self) -> Ticks: ...

    def run(self, until: Optional[Ticks] = None) -> TraceLog:
        """Advance virtual time.

        With ``until`` set, run through that tick inclusive and pause. With
        ``until=None``, run to quiescence (no runnable behavior, no pending
        delivery or migration, no future timer); exceeding the configured
        tick budget before quiescence raises TickBudgetExceeded.
        """
        ...

    def trace(self) -> TraceLog: ...
