"""Bookkeeping of advices issued by the RSU and their acknowledgments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from toc_manager.messages.models import Advice, AdviceKind


@dataclass
class IssuedAdvice:
    advice: Advice
    issued_at: float
    next_retransmit: float
    acknowledged: bool = False

    @property
    def advice_id(self) -> int:
        return self.advice.advice_id

    @property
    def kind(self) -> AdviceKind:
        return self.advice.kind


class AdviceLedger:
    """Issued advices per target station.

    advice_ids start at 1 and strictly increase per target; acknowledged
    advices are never handed out for retransmission again.
    """

    def __init__(self, retransmit_period: float = 1.0):
        if retransmit_period <= 0:
            raise ValueError(f"retransmit_period must be positive, got {retransmit_period}")
        self._period = retransmit_period
        self._issued: dict[int, list[IssuedAdvice]] = {}
        self._next_id: dict[int, int] = {}

    def issue(self, target: int, build: Callable[[int], Advice], now: float) -> Advice:
        """Allocate the next advice_id for target and record the advice."""
        advice_id = self._next_id.get(target, 1)
        self._next_id[target] = advice_id + 1
        advice = build(advice_id)
        self._issued.setdefault(target, []).append(
            IssuedAdvice(advice, now, now + self._period)
        )
        return advice

    def get(self, target: int, advice_id: int) -> IssuedAdvice | None:
        for record in self._issued.get(target, []):
            if record.advice_id == advice_id:
                return record
        return None

    def acknowledge(self, target: int, advice_id: int) -> bool:
        record = self.get(target, advice_id)
        if record is None:
            return False
        record.acknowledged = True
        return True

    def issued(self, target: int) -> list[IssuedAdvice]:
        return list(self._issued.get(target, []))

    def pending(self, target: int) -> list[IssuedAdvice]:
        return [r for r in self._issued.get(target, []) if not r.acknowledged]

    def targets(self) -> list[int]:
        return sorted(self._issued)

    def due(self, now: float, eps: float = 1e-9) -> dict[int, list[Advice]]:
        """Unacknowledged advices whose retransmission time has come.

        Their next retransmission is pushed one period further.
        """
        result: dict[int, list[Advice]] = {}
        for target in self.targets():
            for record in self.pending(target):
                if record.next_retransmit <= now + eps:
                    result.setdefault(target, []).append(record.advice)
                    record.next_retransmit += self._period
        return result
