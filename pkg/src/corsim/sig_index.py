"""Simultaneous increment-or-get index over the last four phases of the cycle.

Phase kappa-4 broadcasts the local index; kappa-3 votes for any value seen
from n-t distinct senders; kappa-2 adopts a majority-backed vote (save) and
reports with one bit whether n-t non-empty votes arrived; kappa-1 writes the
index: with an n-t quorum of 1-bits it becomes (save+inc) mod bound, with a
quorum of 0-bits it becomes 0, and otherwise the shared coin multiplies
(save+inc) so that disagreeing nodes land on a common value with
probability at least 1/2 per cycle. inc is 1 exactly when the multivalued
consensus decided 1, which is how agreed recycling evidence turns into one
index increment.
"""

from __future__ import annotations

from typing import Callable

from .env import Params
from .transport import SigPayload


class SigIndex:
    def __init__(self, params: Params, node_id: int):
        self.params = params
        self.node_id = node_id
        self.index = 0
        self.propose_val: object = None
        self.save: object = None
        self.bit = 0
        self.inc = 0
        # diagnostics for the harness: which branch the last write took
        self.last_quorum: str | None = None

    def get_index(self) -> int:
        """Raw read; out-of-range corrupted values are normalized at the next write."""
        return self.index

    def tally(self, msgs: dict[int, SigPayload | None], kind: str) -> dict[object, int]:
        counts: dict[object, int] = {}
        for payload in msgs.values():
            if isinstance(payload, SigPayload) and payload.kind == kind:
                counts[payload.value] = counts.get(payload.value, 0) + 1
        return counts

    def pulse(
        self,
        phase: int,
        msgs: dict[int, SigPayload | None],
        mvc_result: Callable[[], object],
        coin_bit: int,
    ) -> SigPayload | None:
        p = self.params
        k = p.kappa
        if phase == k - 4:
            return SigPayload(kind="index", value=self.index)

        if phase == k - 3:
            counts = self.tally(msgs, "index")
            self.propose_val = None
            for value, count in sorted(counts.items(), key=lambda kv: repr(kv[0])):
                if value is not None and count >= p.quorum:
                    self.propose_val = value
                    break
            return SigPayload(kind="propose", value=self.propose_val)

        if phase == k - 2:
            counts = self.tally(msgs, "propose")
            self.bit = 0
            self.save = None
            for value, count in sorted(counts.items(), key=lambda kv: repr(kv[0])):
                if value is not None and 2 * count > p.n:
                    self.save = value
                    break
            non_empty = sum(c for v, c in counts.items() if v is not None)
            if non_empty >= p.quorum:
                self.bit = 1
            if self.save is None:
                self.save = 0
            return SigPayload(kind="bit", value=self.bit)

        if phase == k - 1:
            counts = self.tally(msgs, "bit")
            self.inc = 1 if mvc_result() == 1 else 0
            save = self.save if isinstance(self.save, int) else 0
            if counts.get(1, 0) >= p.quorum:
                self.index = (save + self.inc) % p.index_states
                self.last_quorum = "ones"
            elif counts.get(0, 0) >= p.quorum:
                self.index = 0
                self.last_quorum = "zeros"
            else:
                self.index = (coin_bit * (save + self.inc)) % p.index_states
                self.last_quorum = "coin"
            return None

        return None
