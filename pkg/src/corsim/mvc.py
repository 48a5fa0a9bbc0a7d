"""Self-stabilizing synchronous multivalued consensus by cyclic recomputation.

A non-self-stabilizing synchronous consensus core is re-run once per
schedule cycle: at phase 0 the previous run's decision is captured into a
floating output, the core is restarted, and fresh inputs are proposed;
phases 1..t+1 each run one processing step. Consumers read the floating
output at any time and therefore see, during cycle m, the decision over the
inputs sampled at phase 0 of cycle m-1.

The core here is exponential information gathering (EIG): t+1 all-to-all
exchanges build a tree of relayed values (level k holds what chains of k
distinct nodes reported), and the decision is a recursive strict-majority
resolve of that tree with default 0. With n > 3t this decides after exactly
t+1 exchanges and tolerates any Byzantine behaviour.

Note the processing window is {1..t+1}: t+1 exchanges are the known lower
bound for synchronous agreement with t faults, and the propose step of
phase 0 only initiates the first exchange.
"""

from __future__ import annotations

from collections import Counter
from typing import Callable

from .transport import CoPayload


class EigConsensus:
    """One restartable EIG run (the co instance of the recomputation wrapper)."""

    def __init__(self, n: int, t: int, node_id: int):
        self.n = n
        self.t = t
        self.node_id = node_id
        self.tree: dict[tuple, object] = {}
        self.exchanges_done = 0
        self.started = False

    def restart(self) -> None:
        self.tree = {}
        self.exchanges_done = 0
        self.started = False

    def propose(self, value: object) -> dict[int, CoPayload]:
        """Record the root value and broadcast it (first exchange)."""
        self.started = True
        self.tree[()] = value
        payload = CoPayload(level=0, entries=((tuple(), value),))
        return {j: payload for j in range(self.n)}

    def _store(self, sender: int, payload: CoPayload, expect_level: int) -> None:
        if not isinstance(payload, CoPayload):
            return
        if payload.level != expect_level or not isinstance(payload.entries, tuple):
            return
        for item in payload.entries:
            if not (isinstance(item, tuple) and len(item) == 2):
                continue
            label, value = item
            if not isinstance(label, tuple) or len(label) != expect_level:
                continue
            if sender in label or len(set(label)) != len(label):
                continue
            if any(not isinstance(x, int) or not (0 <= x < self.n) for x in label):
                continue
            try:
                hash(value)
            except TypeError:
                continue
            self.tree[label + (sender,)] = value

    def process(self, msgs: dict[int, CoPayload | None]) -> dict[int, CoPayload]:
        """Absorb the previous exchange and broadcast the next tree level.

        Malformed arrivals are dropped, which leaves their tree entries
        absent; the resolve treats absent as the default value.
        """
        if not self.started:
            return {}
        k = self.exchanges_done + 1
        for sender, payload in msgs.items():
            if payload is not None:
                self._store(sender, payload, k - 1)
        self.exchanges_done = k
        if k > self.t:
            return {}
        entries = tuple(
            (label, value)
            for label, value in sorted(self.tree.items())
            if len(label) == k
        )
        payload = CoPayload(level=k, entries=entries)
        return {j: payload for j in range(self.n)}

    def _resolve(self, label: tuple) -> object:
        if len(label) == self.t + 1:
            value = self.tree.get(label)
            return 0 if value is None else value
        children = [
            self._resolve(label + (j,)) for j in range(self.n) if j not in label
        ]
        value, count = Counter(children).most_common(1)[0]
        return value if 2 * count > len(children) else 0

    def result(self) -> object:
        """Root resolve after t+1 exchanges; None before completion."""
        if not self.started or self.exchanges_done < self.t + 1:
            return None
        return self._resolve(())


class MvcController:
    """Floating output plus the embedded co instance (the per-node state)."""

    def __init__(self, n: int, t: int, node_id: int):
        self.n = n
        self.t = t
        self.node_id = node_id
        self.co = EigConsensus(n, t, node_id)
        self.current_result: object = None

    def pulse(
        self,
        phase: int,
        co_msgs: dict[int, CoPayload | None],
        input_fn: Callable[[], object],
    ) -> dict[int, CoPayload]:
        if phase == 0:
            self.current_result = self.co.result()
            self.co.restart()
            return self.co.propose(input_fn())
        if 1 <= phase <= self.t + 1:
            return self.co.process(co_msgs)
        return {}

    def result(self) -> object:
        """Floating output; None means no completed cycle yet (treat as 0)."""
        return self.current_result
