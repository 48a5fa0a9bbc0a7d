"""Lock-step reliable message exchange and the multiplexed per-round envelope.

Every sub-protocol rides one envelope per (sender, receiver, round): an
est field for the recyclable object layer, a co field for the synchronous
consensus recomputation, and a sig field for the shared index. Delivery is
exact and authenticated; Byzantine senders may equivocate per receiver but
cannot alter their sender id.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass


@dataclass(frozen=True)
class EstPayload:
    """Recyclable-object piggyback: slot number, core message, sender's delivery flag."""

    slot: int
    core: object
    delivered: bool


@dataclass(frozen=True)
class CoPayload:
    """One consensus-core message: tree level plus (label, value) entries."""

    level: int
    entries: tuple


@dataclass(frozen=True)
class SigPayload:
    """Index-protocol message, tagged by phase kind: 'index', 'propose' or 'bit'."""

    kind: str
    value: object


@dataclass(frozen=True)
class Envelope:
    sender: int
    est: EstPayload | None = None
    co: CoPayload | None = None
    sig: SigPayload | None = None


@dataclass
class RoundMail:
    """Per-receiver mail for one round: sender id -> envelope."""

    inbox: dict[int, Envelope]
    complete: bool = True


def multiplex(
    sender: int,
    est: EstPayload | None = None,
    co: CoPayload | None = None,
    sig: SigPayload | None = None,
) -> Envelope:
    return Envelope(sender=sender, est=est, co=co, sig=sig)


def demultiplex(env: Envelope) -> tuple[EstPayload | None, CoPayload | None, SigPayload | None]:
    return env.est, env.co, env.sig


class TransportError(Exception):
    """Simulator bug: the round's outboxes violate the exchange contract."""


def exchange(
    round_index: int,
    outboxes: dict[int, dict[int, Envelope]],
    node_ids: list[int],
    correct_ids: list[int],
) -> dict[int, RoundMail]:
    """Deliver outboxes exactly: inbox[j][i] = outbox[i][j].

    No loss, duplication, reorder or forgery. A missing outbox for a correct
    node is a fatal simulator bug; a Byzantine node may omit destinations.
    """
    for i in correct_ids:
        if i not in outboxes:
            raise TransportError(f"round {round_index}: missing outbox for correct node {i}")
    mail = {j: RoundMail(inbox={}) for j in node_ids}
    for i in node_ids:
        for j, env in outboxes.get(i, {}).items():
            if env.sender != i:
                raise TransportError(
                    f"round {round_index}: node {i} attempted to send as {env.sender}"
                )
            if j in node_ids:
                mail[j].inbox[i] = env
    return mail


def serialize_envelope(env: Envelope) -> bytes:
    """Canonical byte form, used only for trace logging.

    Layout: sender byte, then for each present field a tag byte (1=est,
    2=co, 3=sig) followed by a little-endian u32 length and the payload repr.
    """
    out = bytearray([env.sender & 0xFF])
    for tag, payload in ((1, env.est), (2, env.co), (3, env.sig)):
        if payload is not None:
            body = repr(payload).encode("utf-8")
            out.append(tag)
            out += len(body).to_bytes(4, "little")
            out += body
    return bytes(out)


def traffic_digest(outboxes: dict[int, dict[int, Envelope]]) -> str:
    """Stable digest of one round's full message traffic."""
    h = hashlib.sha256()
    for i in sorted(outboxes):
        for j in sorted(outboxes[i]):
            h.update(i.to_bytes(2, "little"))
            h.update(j.to_bytes(2, "little"))
            h.update(serialize_envelope(outboxes[i][j]))
    return h.hexdigest()[:16]
