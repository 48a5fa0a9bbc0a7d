"""Recyclable consensus objects: a delivery-indication layer over a pluggable core.

Each object tracks an n-slot vector of delivery flags. The local flag flips
true when result() returns a decision (or the internal-fault symbol) and is
forced back to false whenever result() says undecided; remote flags mirror
the last flag received from each peer. was_delivered() reports 1 once n-t
flags are set, which is the evidence the recycling stack agrees on.
"""

from __future__ import annotations

from typing import Callable

from .cores import CORE_FAULT, AsyncCore
from .transport import EstPayload


class _ErrorSymbol:
    """Completed-but-void result of an incarnation hit by a transient fault."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "CORE_ERROR"


CORE_ERROR = _ErrorSymbol()


class RecyclableObject:
    def __init__(self, n: int, t: int, node_id: int, slot: int, core_factory: Callable[[int], AsyncCore]):
        self.n = n
        self.t = t
        self.node_id = node_id
        self.slot = slot
        self._core_factory = core_factory
        self.core: AsyncCore = core_factory(slot)
        self.delivered: list[bool] = [False] * n
        self.proposed: object = None

    def propose(self, value: int) -> None:
        """Record a proposal; a second propose in the same incarnation is a no-op."""
        if self.proposed is None:
            self.proposed = value
            self.core.propose(value)

    def result(self) -> object:
        """Decided value, CORE_ERROR, or None while the core is still running.

        Any non-None return marks the local delivery flag. The consistency
        test (None forces the flag back off) lives in observe_result so that
        a corrupted flag cannot outlive one call.
        """
        outcome = self.core.decided()
        if outcome is None:
            return None
        kind, value = outcome
        self.delivered[self.node_id] = True
        return CORE_ERROR if kind == CORE_FAULT else value

    def observe_result(self) -> object:
        """result() plus the consistency test: undecided implies flag off."""
        value = self.result()
        if value is None:
            self.delivered[self.node_id] = False
        return value

    def was_delivered(self) -> int:
        return 1 if sum(self.delivered) >= self.n - self.t else 0

    def recycle(self) -> None:
        """Reset core and delivery flags to the initial state."""
        self.core = self._core_factory(self.slot)
        self.delivered = [False] * self.n
        self.proposed = None

    def is_fresh(self) -> bool:
        return (
            self.proposed is None
            and not any(self.delivered)
            and self.core.is_initial()
        )

    def has_local_state(self) -> bool:
        """Whether this incarnation was actually in use at this node.

        Remote delivery flags alone are gossip (a Byzantine sender can set
        them at will); they are wiped by recycle() but do not make the
        object count as in-use.
        """
        return (
            self.proposed is not None
            or self.delivered[self.node_id]
            or not self.core.is_initial()
        )

    def merge_flag(self, sender: int, flag: bool) -> None:
        """Adopt the delivery flag last received from a peer (never from self)."""
        if sender != self.node_id and 0 <= sender < self.n:
            self.delivered[sender] = bool(flag)

    def pulse_step(self, est_inbox: dict[int, EstPayload]) -> EstPayload:
        """One synchronous step of the active object.

        Applies the consistency test, merges arriving flags, advances the
        core on the arriving core messages, and returns this node's est
        field for the round.
        """
        self.observe_result()
        core_inbox: dict[int, object] = {}
        for sender, payload in est_inbox.items():
            self.merge_flag(sender, payload.delivered)
            if payload.core is not None:
                core_inbox[sender] = payload.core
        core_out = self.core.step(core_inbox)
        return EstPayload(slot=self.slot, core=core_out, delivered=self.delivered[self.node_id])
