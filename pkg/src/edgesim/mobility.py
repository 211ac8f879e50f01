"""Worker availability: a slotted two-state Markov chain, real traces, and
the predictors a master uses to guess whether a worker will be in range.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import EdgeSimError

log = logging.getLogger(__name__)


class DegenerateChain(EdgeSimError):
    pass


class InsufficientHistory(EdgeSimError):
    pass


class TraceParseError(EdgeSimError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


class GapError(EdgeSimError):
    pass


@dataclass(frozen=True)
class MarkovMobility:
    p_leave: float
    p_return: float
    slot_s: float = 10.0
    initial_state: bool = True

    def __post_init__(self):
        for name in ("p_leave", "p_return"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability, got {p}")
        if self.slot_s <= 0:
            raise ValueError("slot_s must be > 0")


def step_markov(m: MarkovMobility, state: bool, u: float) -> bool:
    if state:
        return not (u < m.p_leave)
    return u < m.p_return


def stationary_in_range(m: MarkovMobility) -> float:
    total = m.p_leave + m.p_return
    if total == 0:
        raise DegenerateChain("p_leave = p_return = 0: the chain never mixes")
    return m.p_return / total


def simulate_markov(m: MarkovMobility, n_slots: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean in-range state for slots ``0..n_slots-1``; slot 0 is the initial state."""
    out = np.empty(n_slots, dtype=bool)
    if n_slots == 0:
        return out
    u = rng.random(n_slots - 1)
    state = m.initial_state
    out[0] = state
    pl, pc = m.p_leave, m.p_return
    for i in range(1, n_slots):
        if state:
            state = not (u[i - 1] < pl)
        else:
            state = u[i - 1] < pc
        out[i] = state
    return out


@dataclass(frozen=True)
class MobilityTrace:
    slot_s: float
    states: tuple[tuple[int, int, bool], ...]

    def devices(self) -> list[int]:
        return sorted({d for _, d, _ in self.states})

    def series(self, device: int) -> list[bool]:
        rows = sorted((s, v) for s, d, v in self.states if d == device)
        return [v for _, v in rows]


def load_trace(path: Union[str, Path], slot_s: float = 10.0) -> MobilityTrace:
    """Read a ``slot,device,in_range`` CSV, rejecting gaps and duplicates."""
    path = Path(path)
    rows: list[tuple[int, int, bool]] = []
    seen: set[tuple[int, int]] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["slot", "device", "in_range"]:
            raise TraceParseError(path, 1, "expected header 'slot,device,in_range'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise TraceParseError(path, lineno, f"expected 3 fields, got {len(row)}")
            try:
                slot, device, flag = int(row[0]), int(row[1]), int(row[2])
            except ValueError:
                raise TraceParseError(path, lineno, f"non-integer field in {row!r}") from None
            if flag not in (0, 1):
                raise TraceParseError(path, lineno, f"in_range must be 0 or 1, got {flag}")
            if slot < 0 or device < 0:
                raise TraceParseError(path, lineno, "slot and device must be >= 0")
            if (slot, device) in seen:
                raise GapError(f"{path}:{lineno}: duplicate row for slot {slot}, device {device}")
            seen.add((slot, device))
            rows.append((slot, device, bool(flag)))
    by_device: dict[int, list[int]] = {}
    for slot, device, _ in rows:
        by_device.setdefault(device, []).append(slot)
    for device, slots in sorted(by_device.items()):
        slots.sort()
        for expected, got in enumerate(slots):
            if got != expected:
                raise GapError(f"{path}: device {device} is missing slot {expected}")
    return MobilityTrace(slot_s=slot_s, states=tuple(rows))


@dataclass(frozen=True)
class Statistical:
    """Out-of-range probability known a priori; availability is observed directly."""

    p_out: Optional[float] = None


@dataclass(frozen=True)
class Predicted:
    """The master's guess is the true next state, wrong with ``error_margin``."""

    error_margin: float = 0.0


@dataclass(frozen=True)
class MajorityVote:
    window_slots: int = 11

    def __post_init__(self):
        if self.window_slots < 1 or self.window_slots % 2 == 0:
            raise ValueError("window_slots must be a positive odd integer")


MobilityPredictor = Union[Statistical, Predicted, MajorityVote]


def predict_out_probability(pred: MobilityPredictor, history: Sequence[bool],
                            truth_next: bool, u: float) -> tuple[float, bool]:
    """Return ``(p_out, predicted_in_range)`` for the next slot."""
    if isinstance(pred, Statistical):
        if pred.p_out is None:
            raise ValueError("Statistical predictor needs p_out")
        return pred.p_out, truth_next
    if isinstance(pred, Predicted):
        guess = (not truth_next) if u < pred.error_margin else truth_next
        return (0.0 if guess else 1.0), guess
    if isinstance(pred, MajorityVote):
        w = pred.window_slots
        if len(history) < w:
            raise InsufficientHistory(f"need {w} slots of history, have {len(history)}")
        hits = sum(1 for v in history[-w:] if v)
        guess = hits > w / 2
        return (0.0 if guess else 1.0), guess
    raise TypeError(f"unknown predictor {pred!r}")


def out_probability(m: MarkovMobility, p_model: str = "stationary") -> float:
    """Scalar P_n for the estimators from a (leave, return) pair."""
    if p_model == "stationary":
        if m.p_leave + m.p_return == 0:
            return 0.0 if m.initial_state else 1.0
        return 1.0 - stationary_in_range(m)
    if p_model == "leave":
        return m.p_leave
    raise ValueError(f"unknown p_model {p_model!r}")


class SlotProcess:
    """Lazily realised per-slot availability for one worker.

    ``source`` is a :class:`MarkovMobility`, a list of booleans replayed
    cyclically, or ``None`` for a worker that never leaves.
    """

    _BLOCK = 256

    def __init__(self, source, rng: Optional[np.random.Generator] = None,
                 slot_s: float = 10.0, label: str = ""):
        self.source = source
        self.rng = rng
        self.label = label
        if isinstance(source, MarkovMobility):
            self.slot_s = source.slot_s
            self._states = [source.initial_state]
        elif source is None:
            self.slot_s = slot_s
            self._states = [True]
        else:
            if not source:
                raise ValueError("empty trace series")
            self.slot_s = slot_s
            self._states = []
        self._u: np.ndarray = np.empty(0)
        self._u_pos = 0
        self._wrapped_logged = False

    def _next_u(self) -> float:
        if self._u_pos >= len(self._u):
            self._u = self.rng.random(self._BLOCK)
            self._u_pos = 0
        v = self._u[self._u_pos]
        self._u_pos += 1
        return float(v)

    def state(self, slot: int) -> bool:
        src = self.source
        if src is None:
            return True
        if isinstance(src, MarkovMobility):
            states = self._states
            while len(states) <= slot:
                states.append(step_markov(src, states[-1], self._next_u()))
            return states[slot]
        if slot >= len(src) and not self._wrapped_logged:
            log.info("trace for %s exhausted after %d slots; wrapping around", self.label, len(src))
            self._wrapped_logged = True
        return bool(src[slot % len(src)])

    def slot_of(self, t_us: int) -> int:
        return int(t_us // int(round(self.slot_s * 1_000_000)))

    def at(self, t_us: int) -> bool:
        return self.state(self.slot_of(t_us))
