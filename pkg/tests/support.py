"""Shared helpers for protocol-level tests: config factory and a recording host."""

from paritykex.channel import ChannelConfig, SimulatedLink
from paritykex.exchange import derive_seed, make_receiver, make_sender
from paritykex.frames import decode_frame, encode_frame
from paritykex.network import TpmParams
from paritykex.protocol import (
    DeliverKey,
    Fail,
    FrameArrived,
    ProtocolConfig,
    SendFrame,
    SetTimer,
    Start,
    TimerFired,
    receiver_advance,
    sender_advance,
)


def config(l=2, n=32, **kw):
    defaults = dict(
        params=TpmParams(k=3, n=n, l=l),
        ssc=b"sender-secret-0!",
        rsc=b"receiv-secret-0!",
        rule="random_walk",
        timeout_ticks=16,
        max_attempts=8,
    )
    defaults.update(kw)
    return ProtocolConfig(**defaults)


def drive(cfg, master_seed, channel=ChannelConfig(), cap=8000, receiver_cfg=None,
          on_delivery=None):
    """Tick-loop host that mirrors the library driver but records the wire.

    ``on_delivery(name, frame, hosts, feed, now)`` runs before each decoded
    frame is fed, so tests can snapshot states or replay frames.  Host slots:
    [state, advance, cfg, rng, deadline, key, fail_reason].
    """
    link = SimulatedLink(channel)
    sstate, srng = make_sender(cfg, derive_seed(master_seed, "sender"))
    rstate, rrng = make_receiver(receiver_cfg or cfg, derive_seed(master_seed, "receiver"))
    hosts = {
        "a": [sstate, sender_advance, cfg, srng, None, None, None],
        "b": [rstate, receiver_advance, receiver_cfg or cfg, rrng, None, None, None],
    }
    wire = []

    def feed(name, event, now):
        slot = hosts[name]
        state, actions, rng = slot[1](slot[0], event, slot[2], slot[3])
        slot[0], slot[3] = state, rng
        for action in actions:
            if isinstance(action, SendFrame):
                wire.append((name, action.frame))
                link.send(name, encode_frame(action.frame), now)
            elif isinstance(action, SetTimer):
                slot[4] = now + action.ticks
            elif isinstance(action, DeliverKey):
                slot[5] = action.session
            elif isinstance(action, Fail):
                slot[6] = action.reason
        if slot[0].phase in ("established", "failed"):
            slot[4] = None
        return actions

    feed("a", Start(), 0)
    now = 0
    while now < cap * (cfg.timeout_ticks + 4):
        for name in ("a", "b"):
            for datagram in link.poll(name, now):
                frame = decode_frame(datagram)
                if on_delivery is not None:
                    on_delivery(name, frame, hosts, feed, now)
                feed(name, FrameArrived(frame), now)
        for name in ("a", "b"):
            slot = hosts[name]
            if slot[4] is not None and now >= slot[4]:
                slot[4] = None
                feed(name, TimerFired(), now)
        phases = {hosts["a"][0].phase, hosts["b"][0].phase}
        if phases <= {"established", "failed"} or "failed" in phases:
            break
        if hosts["a"][0].rounds > cap:
            break
        now += 1
    return hosts, wire
