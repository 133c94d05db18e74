"""Hosts that drive the endpoint state machines over a transport.

``run_exchange`` wires a sender and a receiver across a SimulatedLink in a
deterministic tick loop; it is the engine behind the protocol-mode trial
runner, the acceptance tests and the CLI's simulated mode.  The UDP runners
do the same over real datagrams, one process (or thread) per endpoint,
mapping one virtual tick to one millisecond.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from typing import Optional, Union

from .channel import ChannelConfig, ChannelStats, SimulatedLink, UdpTransport
from .frames import FrameError, decode_frame, encode_frame
from .keycodec import SessionKey
from .network import init_network
from .protocol import (
    DeliverKey,
    Event,
    Fail,
    FrameArrived,
    ProtocolConfig,
    ReceiverState,
    SendFrame,
    SenderState,
    SetTimer,
    Start,
    TimerFired,
    receiver_advance,
    sender_advance,
)
from .rng import RngState, seed_from_bytes

EndpointState = Union[SenderState, ReceiverState]


def derive_seed(master_seed: bytes, label: str) -> bytes:
    """Stable 16-byte sub-seed for one role or trial."""
    return hashlib.sha256(master_seed + b"/" + label.encode()).digest()[:16]


def make_sender(cfg: ProtocolConfig, seed: bytes) -> tuple[SenderState, RngState]:
    net, rng = init_network(cfg.params, seed_from_bytes(seed))
    return SenderState(net=net), rng


def make_receiver(cfg: ProtocolConfig, seed: bytes) -> tuple[ReceiverState, RngState]:
    net, rng = init_network(cfg.params, seed_from_bytes(seed))
    return ReceiverState(net=net), rng


@dataclass
class ExchangeOutcome:
    """End-to-end result of one driven exchange."""

    established: bool
    fail_reason: Optional[str]
    sender_key: Optional[SessionKey]
    receiver_key: Optional[SessionKey]
    rounds: int
    iterations: int
    ticks: int
    channel: ChannelStats
    decode_failures: int
    sender: SenderState
    receiver: ReceiverState


class _Host:
    """Bookkeeping for one endpoint inside the tick loop."""

    def __init__(self, name, state, advance, cfg, rng):
        self.name = name
        self.state = state
        self.advance = advance
        self.cfg = cfg
        self.rng = rng
        self.deadline: Optional[int] = None
        self.key: Optional[SessionKey] = None
        self.fail_reason: Optional[str] = None

    def feed(self, event: Event, link: SimulatedLink, now: int) -> None:
        self.state, actions, self.rng = self.advance(self.state, event, self.cfg, self.rng)
        for action in actions:
            if isinstance(action, SendFrame):
                link.send(self.name, encode_frame(action.frame), now)
            elif isinstance(action, SetTimer):
                self.deadline = now + action.ticks
            elif isinstance(action, DeliverKey):
                self.key = action.session
            elif isinstance(action, Fail):
                self.fail_reason = action.reason
        if self.state.phase in ("established", "failed"):
            self.deadline = None


def run_exchange(
    cfg: ProtocolConfig,
    master_seed: bytes,
    channel_config: ChannelConfig = ChannelConfig(),
    iteration_cap: int = 20_000,
    receiver_cfg: Optional[ProtocolConfig] = None,
) -> ExchangeOutcome:
    """Drive one full key exchange over a simulated link.

    ``receiver_cfg`` lets tests hand the two sides diverging configs (for
    example a mutated secret code); by default both share ``cfg``.  The
    run stops when both sides settle, either side fails, or the sender has
    opened more than ``iteration_cap`` rounds.
    """
    link = SimulatedLink(channel_config)
    sstate, srng = make_sender(cfg, derive_seed(master_seed, "sender"))
    rstate, rrng = make_receiver(
        receiver_cfg or cfg, derive_seed(master_seed, "receiver")
    )
    sender = _Host("a", sstate, sender_advance, cfg, srng)
    receiver = _Host("b", rstate, receiver_advance, receiver_cfg or cfg, rrng)
    decode_failures = 0

    now = 0
    sender.feed(Start(), link, now)
    # generous horizon: every round costs at most a timeout plus slack
    tick_limit = (iteration_cap + cfg.max_attempts + 4) * (cfg.timeout_ticks + 4)
    while now < tick_limit:
        for host in (sender, receiver):
            for datagram in link.poll(host.name, now):
                try:
                    frame = decode_frame(datagram)
                except FrameError:
                    decode_failures += 1
                    continue
                host.feed(FrameArrived(frame), link, now)
        for host in (sender, receiver):
            if host.deadline is not None and now >= host.deadline:
                host.deadline = None
                host.feed(TimerFired(), link, now)
        done = sender.state.phase in ("established", "failed") and receiver.state.phase in (
            "established",
            "failed",
        )
        if done or sender.state.phase == "failed" or receiver.state.phase == "failed":
            break
        if sender.state.rounds > iteration_cap:
            break
        now += 1

    established = (
        sender.state.phase == "established" and receiver.state.phase == "established"
    )
    return ExchangeOutcome(
        established=established,
        fail_reason=sender.fail_reason or receiver.fail_reason,
        sender_key=sender.key,
        receiver_key=receiver.key,
        rounds=sender.state.rounds,
        iterations=sender.state.iterations,
        ticks=now,
        channel=link.stats,
        decode_failures=decode_failures,
        sender=sender.state,
        receiver=receiver.state,
    )


# --- real-datagram runners ------------------------------------------------


def _run_udp(
    state: EndpointState,
    advance,
    cfg: ProtocolConfig,
    rng: RngState,
    transport: UdpTransport,
    tick_ms: float = 1.0,
    overall_timeout: float = 120.0,
    start: bool = False,
):
    """Drive one endpoint over UDP; one tick is ``tick_ms`` milliseconds."""
    key: Optional[SessionKey] = None
    fail: Optional[str] = None
    deadline: Optional[float] = None
    t0 = time.monotonic()

    def handle(event: Event) -> None:
        nonlocal state, rng, key, fail, deadline
        state, actions, rng = advance(state, event, cfg, rng)
        for action in actions:
            if isinstance(action, SendFrame):
                transport.send(encode_frame(action.frame))
            elif isinstance(action, SetTimer):
                deadline = time.monotonic() + action.ticks * tick_ms / 1000.0
            elif isinstance(action, DeliverKey):
                key = action.session
            elif isinstance(action, Fail):
                fail = action.reason

    if start:
        handle(Start())
    while state.phase not in ("established", "failed"):
        if time.monotonic() - t0 > overall_timeout:
            fail = fail or "overall timeout"
            break
        wait = 0.05
        if deadline is not None:
            wait = max(0.0, min(wait, deadline - time.monotonic()))
        datagram = transport.receive(timeout=max(wait, 1e-4))
        if datagram is not None:
            try:
                handle(FrameArrived(decode_frame(datagram)))
            except FrameError:
                continue
        if deadline is not None and time.monotonic() >= deadline:
            deadline = None
            handle(TimerFired())
    return state, key, fail


def run_udp_sender(
    cfg: ProtocolConfig,
    seed: bytes,
    transport: UdpTransport,
    tick_ms: float = 1.0,
    overall_timeout: float = 120.0,
):
    """Run the initiating endpoint over UDP until it settles."""
    state, rng = make_sender(cfg, seed)
    return _run_udp(
        state, sender_advance, cfg, rng, transport, tick_ms, overall_timeout, start=True
    )


def run_udp_receiver(
    cfg: ProtocolConfig,
    seed: bytes,
    transport: UdpTransport,
    tick_ms: float = 1.0,
    overall_timeout: float = 120.0,
):
    """Run the responding endpoint over UDP until it settles."""
    state, rng = make_receiver(cfg, seed)
    return _run_udp(
        state, receiver_advance, cfg, rng, transport, tick_ms, overall_timeout
    )
