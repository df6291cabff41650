"""One-tick-latency broadcast channel between the RSU and the CAV.

Messages travel as encoded bytes and are decoded on reception.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from toc_manager.core.trace import Trace
from toc_manager.messages.codec import DecodeError, decode, encode
from toc_manager.messages.models import Message

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _Frame:
    sender: str
    sender_x: float
    payload: bytes
    kind: str


class MessageBus:
    """Queues frames sent in one tick and delivers them in the next.

    A frame reaches every other entity within comm_range of the sender's
    position at send time, each copy dropped independently with p_loss.
    """

    def __init__(
        self,
        comm_range: float = math.inf,
        p_loss: float = 0.0,
        rng: np.random.Generator | None = None,
        trace: Trace | None = None,
    ):
        if not 0 <= p_loss <= 1:
            raise ValueError(f"p_loss must lie in [0, 1], got {p_loss}")
        if p_loss > 0 and rng is None:
            raise ValueError("A lossy channel needs a random generator")
        self.comm_range = comm_range
        self.p_loss = p_loss
        self.rng = rng
        self.trace = trace or Trace("error")
        self._queue: list[_Frame] = []
        self.sent = 0
        self.delivered = 0

    def send(self, sender: str, sender_x: float, msg: Message, now: float) -> None:
        payload = encode(msg)
        kind = type(msg).__name__
        self._queue.append(_Frame(sender, sender_x, payload, kind))
        self.sent += 1
        self.trace.record(now, sender, "tx", "debug", kind=kind, size=len(payload))

    def _dropped(self) -> bool:
        if self.p_loss <= 0:
            return False
        if self.p_loss >= 1:
            return True
        return bool(self.rng.random() < self.p_loss)

    def deliver(self, positions: dict[str, float], now: float) -> dict[str, list[Message]]:
        """Inbox per entity for the frames queued during the previous tick."""
        inboxes: dict[str, list[Message]] = {name: [] for name in positions}
        frames, self._queue = self._queue, []
        for frame in frames:
            for name, x in positions.items():
                if name == frame.sender:
                    continue
                if abs(x - frame.sender_x) > self.comm_range or self._dropped():
                    continue
                try:
                    msg = decode(frame.payload)
                except DecodeError as e:
                    logger.warning(f"Dropping undecodable {frame.kind} for {name}: {e}")
                    continue
                inboxes[name].append(msg)
                self.delivered += 1
                self.trace.record(now, name, "rx", "debug", kind=frame.kind,
                                  sender=frame.sender)
        return inboxes
