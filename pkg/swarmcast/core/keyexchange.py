# swarmcast/core/keyexchange.py

"""
Multi-party session key agreement over X25519.

Hub scheme: every node broadcasts its public point; the leader (lowest node
id in the roster) waits until it holds every point, draws a random 128-bit
session key and broadcasts it wrapped once per member under the pairwise
ECDH-derived wrapping key. Members unwrap and are established. Lost
messages are recovered by idempotent re-broadcasts on phase timeouts.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np

from ..exceptions import UnknownMemberError
from .codec import KeyxBody, PubkeyBody, WrappedKeyBody
from .crypto import (
    KEY_SIZE,
    KeyPair,
    SessionKey,
    derive_wrapping_key,
    ecdh_shared,
    unwrap_session_key,
    wrap_session_key,
)

logger = logging.getLogger(__name__)


class Role(Enum):
    LEADER = "leader"
    MEMBER = "member"


class Phase(Enum):
    IDLE = "idle"
    AWAITING_PUBKEYS = "awaiting_pubkeys"
    AWAITING_SESSION_KEY = "awaiting_session_key"
    ESTABLISHED = "established"


@dataclass(frozen=True)
class Start:
    now_ms: int


@dataclass(frozen=True)
class KeyxFrameIn:
    """One KEYX body taken from a received frame."""

    body: KeyxBody
    now_ms: int


@dataclass(frozen=True)
class KeyxTick:
    now_ms: int


KeyxEvent = Union[Start, KeyxFrameIn, KeyxTick]


@dataclass
class KeyExchangeState:
    node_id: int
    roster: FrozenSet[int]
    role: Role
    phase: Phase = Phase.IDLE
    known_pubkeys: Dict[int, bytes] = field(default_factory=dict)
    pairwise_secrets: Dict[int, bytes] = field(default_factory=dict)
    session_key: Optional[SessionKey] = None
    deadline_ms: Optional[int] = None
    established_at_ms: Optional[int] = None
    pending_wrapped: Optional[WrappedKeyBody] = None
    timeouts: int = 0

    @property
    def leader(self) -> int:
        return min(self.roster)

    @property
    def established(self) -> bool:
        return self.phase == Phase.ESTABLISHED


class GroupKeyExchange:
    """
    Key exchange state machine owned by a single node.

    ``run_group_exchange`` consumes one event and returns the updated state
    plus the KEYX bodies this node must broadcast.
    """

    def __init__(
        self,
        node_id: int,
        roster: FrozenSet[int],
        keypair: KeyPair,
        rng: np.random.Generator,
        retry_ms: int = 1000,
    ):
        if node_id not in roster:
            raise ValueError(f"node {node_id} is not in the roster")
        self.keypair = keypair
        self.rng = rng
        self.retry_ms = retry_ms
        role = Role.LEADER if node_id == min(roster) else Role.MEMBER
        self.state = KeyExchangeState(node_id=node_id, roster=frozenset(roster), role=role)
        self._last_resend_ms: Dict[int, int] = {}

    def _own_pubkey(self) -> PubkeyBody:
        return PubkeyBody(self.state.node_id, self.keypair.public_point)

    def run_group_exchange(self, event: KeyxEvent) -> Tuple[KeyExchangeState, List[KeyxBody]]:
        """
        Advance the exchange by one event.

        Raises:
            UnknownMemberError: If a public point arrives from outside the roster
        """
        if isinstance(event, Start):
            bodies = self._start(event.now_ms)
        elif isinstance(event, KeyxFrameIn):
            bodies = self._receive(event.body, event.now_ms)
        else:
            bodies = self._tick(event.now_ms)
        return self.state, bodies

    def _start(self, now_ms: int) -> List[KeyxBody]:
        state = self.state
        if state.phase != Phase.IDLE:
            return []
        state.known_pubkeys[state.node_id] = self.keypair.public_point

        if state.roster == {state.node_id}:
            self._establish(SessionKey(self.rng.bytes(KEY_SIZE)), now_ms)
            return []

        state.phase = (
            Phase.AWAITING_PUBKEYS if state.role == Role.LEADER else Phase.AWAITING_SESSION_KEY
        )
        state.deadline_ms = now_ms + self.retry_ms
        return [self._own_pubkey()]

    def _tick(self, now_ms: int) -> List[KeyxBody]:
        state = self.state
        if state.phase in (Phase.IDLE, Phase.ESTABLISHED) or state.deadline_ms is None:
            return []
        if now_ms < state.deadline_ms:
            return []
        state.timeouts += 1
        state.deadline_ms = now_ms + self.retry_ms
        logger.debug(f"Node {state.node_id} key exchange timeout in {state.phase.value}")
        return [self._own_pubkey()]

    def _receive(self, body: KeyxBody, now_ms: int) -> List[KeyxBody]:
        if isinstance(body, PubkeyBody):
            return self._receive_pubkey(body, now_ms)
        return self._receive_wrapped(body, now_ms)

    def _receive_pubkey(self, body: PubkeyBody, now_ms: int) -> List[KeyxBody]:
        state = self.state
        if body.owner not in state.roster:
            raise UnknownMemberError(f"public point from node {body.owner} outside the roster")
        if body.owner == state.node_id or state.phase == Phase.IDLE:
            return []

        if state.known_pubkeys.get(body.owner) != body.public_point:
            state.known_pubkeys[body.owner] = body.public_point
            state.pairwise_secrets.pop(body.owner, None)

        if state.role == Role.MEMBER:
            if body.owner == state.leader and state.pending_wrapped is not None:
                pending, state.pending_wrapped = state.pending_wrapped, None
                return self._receive_wrapped(pending, now_ms)
            return []

        if state.phase == Phase.AWAITING_PUBKEYS:
            if state.roster.issubset(state.known_pubkeys):
                return self._distribute(now_ms)
            return []

        # Established leader: a member repeating its point has not got the key yet.
        last = self._last_resend_ms.get(body.owner)
        if last is not None and now_ms - last < self.retry_ms // 2:
            return []
        self._last_resend_ms[body.owner] = now_ms
        return [self._own_pubkey(), self._wrap_for(body.owner)]

    def _receive_wrapped(self, body: WrappedKeyBody, now_ms: int) -> List[KeyxBody]:
        state = self.state
        if state.role != Role.MEMBER or body.member != state.node_id or state.established:
            return []
        if state.phase == Phase.IDLE:
            return []
        if state.leader not in state.known_pubkeys:
            state.pending_wrapped = body
            return []
        wrapping_key = derive_wrapping_key(self._pairwise(state.leader))
        session_key = unwrap_session_key(
            wrapping_key, state.leader, state.node_id, body.wrapped_key, body.wrap_tag
        )
        self._establish(session_key, now_ms)
        return []

    def _pairwise(self, peer: int) -> bytes:
        state = self.state
        if peer not in state.pairwise_secrets:
            state.pairwise_secrets[peer] = ecdh_shared(self.keypair, state.known_pubkeys[peer])
        return state.pairwise_secrets[peer]

    def _wrap_for(self, member: int) -> WrappedKeyBody:
        wrapping_key = derive_wrapping_key(self._pairwise(member))
        wrapped, tag = wrap_session_key(
            wrapping_key, self.state.node_id, member, self.state.session_key
        )
        return WrappedKeyBody(member, wrapped, tag)

    def _distribute(self, now_ms: int) -> List[KeyxBody]:
        state = self.state
        self._establish(SessionKey(self.rng.bytes(KEY_SIZE)), now_ms)
        members = sorted(state.roster - {state.node_id})
        for member in members:
            self._last_resend_ms[member] = now_ms
        logger.info(f"Leader {state.node_id} distributing session key to {len(members)} members")
        return [self._own_pubkey()] + [self._wrap_for(member) for member in members]

    def _establish(self, session_key: SessionKey, now_ms: int) -> None:
        state = self.state
        state.session_key = session_key
        state.phase = Phase.ESTABLISHED
        state.deadline_ms = None
        state.established_at_ms = now_ms
        logger.info(f"Node {state.node_id} established session key at {now_ms} ms")


def run_group_exchange(
    exchange: GroupKeyExchange, event: KeyxEvent
) -> Tuple[KeyExchangeState, List[KeyxBody]]:
    """Functional entry point: advance ``exchange`` by one event."""
    return exchange.run_group_exchange(event)
