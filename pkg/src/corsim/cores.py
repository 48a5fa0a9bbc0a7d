"""Pluggable asynchronous binary-consensus cores for the recyclable object layer.

Two implementations back the same contract:

* DelayStubCore -- safe by construction. A per-trial oracle owned by the
  simulator fixes the decision value (majority of the correct proposals) and
  reveals it to each node after an adversary-chosen delay in [0, dmax].
  It models asynchrony honestly (different nodes learn the decision in
  different rounds) without re-implementing a Byzantine consensus protocol.

* MmrLiteCore -- a simplified coin-based binary consensus (est/aux rounds
  driven by a shared coin) for end-to-end realism. It self-checks its state
  and reports an internal error instead of violating the contract when a
  transient fault leaves it unrecoverable, so completion holds from any
  starting state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

from .env import derived_int

# Decision kinds returned by AsyncCore.decided()
DECIDED = "decided"
CORE_FAULT = "fault"


class AsyncCore(Protocol):
    """Contract every core must honour.

    decided() returns None while undecided, (DECIDED, v) once a value is
    fixed, or (CORE_FAULT, None) when internal self-checks fail after a
    transient fault. Completion must eventually hold from any state.
    """

    def propose(self, value: int) -> None: ...

    def step(self, inbox: dict[int, object]) -> object | None: ...

    def decided(self) -> tuple[str, object] | None: ...

    def is_initial(self) -> bool: ...


def _majority_bit(values: list[object]) -> int:
    """Decision rule of the stub: strict majority of 1-proposals, ties to 0."""
    ones = sum(1 for v in values if v == 1)
    return 1 if 2 * ones > len(values) else 0


@dataclass
class _SlotRecord:
    trigger_round: int
    value: int
    reveal: dict[int, int]
    members: dict[int, object]  # node id -> the core instance bound at trigger time


class StubOracle:
    """Per-trial referee for DelayStubCore decisions.

    A slot's record triggers once every correct node's object at that slot
    carries a proposal; the decision value is the majority of those proposals
    and each node learns it reveal-delay rounds later. The record clears when
    every correct node's object at the slot is back to its initial state.
    """

    def __init__(self, seed: int, correct_ids: list[int], dmax: int):
        self.seed = seed
        self.correct_ids = list(correct_ids)
        self.dmax = dmax
        self.now = 0
        self.records: dict[int, _SlotRecord] = {}

    def begin_round(self, round_index: int) -> None:
        self.now = round_index

    def observe(self, round_index: int, objects_by_node: dict[int, list]) -> None:
        """End-of-round sweep: trigger new decisions, clear recycled slots."""
        slot_count = len(objects_by_node[self.correct_ids[0]])
        for slot in range(slot_count):
            objs = {i: objects_by_node[i][slot] for i in self.correct_ids}
            rec = self.records.get(slot)
            if rec is None:
                if all(o.core.proposed is not None for o in objs.values()):
                    proposals = [objs[i].core.proposed for i in self.correct_ids]
                    self.records[slot] = _SlotRecord(
                        trigger_round=round_index,
                        value=_majority_bit(proposals),
                        reveal={
                            i: round_index
                            + derived_int(
                                self.seed, "stub-delay", slot, round_index, i,
                                bound=self.dmax + 1,
                            )
                            for i in self.correct_ids
                        },
                        members={i: objs[i].core for i in self.correct_ids},
                    )
            elif all(o.is_fresh() for o in objs.values()):
                del self.records[slot]

    def decision_for(self, node_id: int, slot: int, core: "DelayStubCore") -> int | None:
        rec = self.records.get(slot)
        if rec is None:
            return None
        if rec.members.get(node_id) is not core:
            return None
        if self.now < rec.reveal.get(node_id, 0):
            return None
        return rec.value


class DelayStubCore:
    """Oracle-backed core: BC-validity/agreement/completion by construction."""

    def __init__(self, oracle: StubOracle, node_id: int, slot: int):
        self._oracle = oracle
        self._node_id = node_id
        self._slot = slot
        self.proposed: int | None = None
        self.decided_cache: object = None

    def propose(self, value: int) -> None:
        if self.proposed is None:
            self.proposed = value

    def step(self, inbox: dict[int, object]) -> object | None:
        return None

    def decided(self) -> tuple[str, object] | None:
        if self.decided_cache is None:
            v = self._oracle.decision_for(self._node_id, self._slot, self)
            if v is not None:
                self.decided_cache = v
        if self.decided_cache is None:
            return None
        if self.decided_cache not in (0, 1):
            # state corrupted past recognition: completed-but-void
            return (CORE_FAULT, None)
        return (DECIDED, self.decided_cache)

    def is_initial(self) -> bool:
        return self.proposed is None and self.decided_cache is None


# MMR-lite internals

_STALL_LIMIT = 64


@dataclass
class MmrLiteCore:
    """Coin-based binary consensus driven by one combined message per round.

    The payload ("MMR", round, endorsed-values, aux-vote-or-None) carries the
    binary-value broadcast and the auxiliary vote together so that laggards
    keep receiving endorsements. A value joins a node's endorsement set with
    t+1 backers and its candidate set with n-t backers; once n-t auxiliary
    votes land inside the candidate set the shared coin either confirms the
    single surviving value (decide) or seeds the next round's estimate.

    A node stuck longer than the stall limit (possible only from a corrupted
    mixed state) flags an internal fault so the object stays recyclable.
    """

    n: int
    t: int
    node_id: int
    coin: Callable[[int], int]  # mmr round -> shared bit
    proposed: int | None = None
    est: int | None = None
    round: int = 1
    my_ests: tuple = ()
    bin_values: tuple = ()
    aux_value: int | None = None
    est_seen: dict = field(default_factory=dict)  # (round, value) -> set of senders
    aux_seen: dict = field(default_factory=dict)  # round -> {sender: value}
    peer_rounds: dict = field(default_factory=dict)  # sender -> highest round seen
    decided_cache: object = None
    stalled_for: int = 0
    faulted: bool = False

    def propose(self, value: int) -> None:
        if self.proposed is None:
            self.proposed = value
            self.est = value if value in (0, 1) else 0
            self.my_ests = (self.est,)

    def _check_state(self) -> bool:
        if self.faulted:
            return False
        if self.est is not None and self.est not in (0, 1):
            self.faulted = True
        if not isinstance(self.round, int) or self.round < 1 or self.round > 10**6:
            self.faulted = True
        if self.stalled_for > _STALL_LIMIT:
            self.faulted = True
        return not self.faulted

    def _absorb(self, sender: int, msg: object) -> None:
        if not isinstance(msg, tuple) or len(msg) != 4 or msg[0] != "MMR":
            return
        _, rnd, ests, aux = msg
        if not isinstance(rnd, int) or not (1 <= rnd <= 10**6):
            return
        self.peer_rounds[sender] = max(self.peer_rounds.get(sender, 0), rnd)
        if isinstance(ests, tuple):
            for v in ests:
                if v in (0, 1):
                    self.est_seen.setdefault((rnd, v), set()).add(sender)
        if aux in (0, 1):
            self.aux_seen.setdefault(rnd, {})[sender] = aux

    def _catch_up(self) -> bool:
        """Adopt a higher round once t+1 peers are past this one (only
        reachable from a corrupted start)."""
        ahead = sorted(r for r in self.peer_rounds.values() if r > self.round)
        if len(ahead) >= self.t + 1:
            target = ahead[-(self.t + 1)]
            if target > self.round:
                self.round = target
                self.est = self.coin(target)
                self.my_ests = (self.est,)
                self.bin_values = ()
                self.aux_value = None
                return True
        return False

    def step(self, inbox: dict[int, object]) -> object | None:
        if self.proposed is None:
            return None
        if not self._check_state():
            return None
        for sender, msg in inbox.items():
            self._absorb(sender, msg)
        progressed = self._catch_up()

        # endorse with t+1 backers, admit as candidate with n-t backers
        ests = set(self.my_ests)
        for v in (0, 1):
            if len(self.est_seen.get((self.round, v), ())) >= self.t + 1:
                ests.add(v)
        if ests != set(self.my_ests):
            self.my_ests = tuple(sorted(ests))
            progressed = True
        candidates = set(self.bin_values)
        for v in (0, 1):
            if len(self.est_seen.get((self.round, v), ())) >= self.n - self.t:
                candidates.add(v)
        if candidates != set(self.bin_values):
            self.bin_values = tuple(sorted(candidates))
            progressed = True
        if self.bin_values and self.aux_value is None:
            self.aux_value = self.bin_values[0]
            progressed = True

        if self.aux_value is not None:
            arrived = self.aux_seen.get(self.round, {})
            backed = {s: v for s, v in arrived.items() if v in self.bin_values}
            if len(backed) >= self.n - self.t:
                view = set(backed.values())
                c = self.coin(self.round)
                if len(view) == 1:
                    b = view.pop()
                    if b == c and self.decided_cache is None:
                        self.decided_cache = b
                    self.est = b
                else:
                    self.est = c
                self.round += 1
                self.my_ests = (self.est,)
                self.bin_values = ()
                self.aux_value = None
                progressed = True

        if self.decided_cache is None:
            self.stalled_for = 0 if progressed else self.stalled_for + 1
        self._check_state()
        return ("MMR", self.round, self.my_ests, self.aux_value)

    def decided(self) -> tuple[str, object] | None:
        if self.decided_cache is not None:
            if self.decided_cache not in (0, 1):
                return (CORE_FAULT, None)
            return (DECIDED, self.decided_cache)
        if self.faulted:
            return (CORE_FAULT, None)
        return None

    def is_initial(self) -> bool:
        return (
            self.proposed is None
            and self.decided_cache is None
            and self.round == 1
            and not self.est_seen
            and not self.aux_seen
            and not self.faulted
        )


def stub_core_factory(oracle: StubOracle, node_id: int) -> Callable[[int], DelayStubCore]:
    def make(slot: int) -> DelayStubCore:
        return DelayStubCore(oracle, node_id, slot)

    return make


def mmr_core_factory(
    n: int, t: int, node_id: int, seed: int
) -> Callable[[int], MmrLiteCore]:
    def make(slot: int) -> MmrLiteCore:
        def coin(mmr_round: int) -> int:
            return derived_int(seed, "mmr-coin", slot, mmr_round, bound=2)

        return MmrLiteCore(n=n, t=t, node_id=node_id, coin=coin)

    return make
