"""Online delay and energy estimates built from observed task outcomes.

Every sample is normalised by the outcome's ``scale`` so that probe tasks
(shrunk copies of a real task) feed the same per-task statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from .core import LOCAL, DeviceId, EdgeSimError, TaskOutcome

GAMMA_NEW_WEIGHT = 0.8


class NoSamples(EdgeSimError):
    pass


class CertainlyAbsent(EdgeSimError):
    pass


@dataclass(frozen=True)
class Ordinary:
    pass


@dataclass(frozen=True)
class New:
    use_helper_fail_energy: bool = False


@dataclass(frozen=True)
class Newest:
    pass


@dataclass(frozen=True)
class PrCompEwma:
    # weight kept by the previous value; new samples get 1 - beta
    beta: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")


EnergyModelKind = Union[Ordinary, New, Newest, PrCompEwma]


@dataclass
class DeviceStats:
    success_count: int = 0
    fail_count: int = 0
    delay_sum_s: float = 0.0
    energy_success_sum_mAh: float = 0.0
    fail_master_sum_mAh: float = 0.0
    fail_worker_sum_mAh: float = 0.0
    gamma_mAh: float = 0.0
    gamma_init: bool = False
    ewma_proc_mAh: float = 0.0
    proc_init: bool = False
    # master-side radio energy of offloading to this device
    ewma_off_mAh: float = 0.0
    off_init: bool = False

    @property
    def sampled(self) -> bool:
        return self.success_count > 0


@dataclass
class SchedulerState:
    """Per-master statistics over every device it may use."""

    devices: dict[DeviceId, DeviceStats] = field(default_factory=dict)

    def of(self, n: DeviceId) -> DeviceStats:
        s = self.devices.get(n)
        if s is None:
            s = self.devices[n] = DeviceStats()
        return s

    @property
    def k(self) -> int:
        return sum(s.success_count for s in self.devices.values())


def _ewma(old: float, init: bool, sample: float, new_weight: float) -> float:
    if not init:
        return sample
    return new_weight * sample + (1.0 - new_weight) * old


def avg_delay(stats: SchedulerState, n: DeviceId) -> float:
    s = stats.of(n)
    if s.success_count == 0:
        raise NoSamples(f"device {n} has no successful samples")
    return s.delay_sum_s / s.success_count


def estimated_completion_serial(stats: SchedulerState, n: DeviceId, k: int, K: int,
                                w_n: float, p_n: float) -> float:
    """Estimated time to finish tasks k..K if task k goes to device ``n``.

    ``k`` is the 1-based index of the task being decided.
    """
    if not 0 <= k <= K:
        raise ValueError(f"need 0 <= k <= K, got k={k}, K={K}")
    t0 = avg_delay(stats, LOCAL)
    if n == LOCAL:
        tn, p_n = t0, 0.0
    else:
        tn = avg_delay(stats, n)
    per_task = (t0 + tn) / 2.0 * (1.0 - p_n) + t0 * p_n
    return w_n + tn + t0 * p_n + per_task * (K - k)


def estimate_energy(stats: SchedulerState, n: DeviceId, kind: EnergyModelKind,
                    p_n: float) -> float:
    """Expected energy (mAh) of giving one task to device ``n``."""
    if n == LOCAL:
        p_n = 0.0
    s = stats.of(n)
    if isinstance(kind, Ordinary):
        if s.success_count == 0:
            raise NoSamples(f"device {n} has no successful samples")
        eps_n = s.energy_success_sum_mAh / s.success_count
        if p_n == 0.0:
            return eps_n
        s0 = stats.of(LOCAL)
        if s0.success_count == 0:
            raise NoSamples("local device has no successful samples")
        return eps_n + s0.energy_success_sum_mAh / s0.success_count * p_n
    if isinstance(kind, New):
        wasted = s.fail_master_sum_mAh
        if kind.use_helper_fail_energy:
            wasted += s.fail_worker_sum_mAh
        if s.success_count == 0:
            if s.fail_count > 0:
                return math.inf
            raise NoSamples(f"device {n} has no samples")
        return (s.energy_success_sum_mAh + wasted) / s.success_count
    if isinstance(kind, Newest):
        if not s.gamma_init:
            raise NoSamples(f"device {n} has no successful samples")
        if p_n == 0.0:
            return s.gamma_mAh
        s0 = stats.of(LOCAL)
        if not s0.gamma_init:
            raise NoSamples("local device has no successful samples")
        return s.gamma_mAh + s0.gamma_mAh * p_n
    if isinstance(kind, PrCompEwma):
        if not s.proc_init:
            raise NoSamples(f"device {n} has no successful samples")
        if p_n >= 1.0:
            return math.inf
        off = s.ewma_off_mAh if n != LOCAL else 0.0
        return (s.ewma_proc_mAh + off) / (1.0 - p_n)
    raise TypeError(f"unknown energy model {kind!r}")


def update_on_outcome(stats: SchedulerState, outcome: TaskOutcome,
                      kind: EnergyModelKind = Newest()) -> SchedulerState:
    """Fold one outcome into ``stats`` (in place) and return it."""
    s = stats.of(outcome.device)
    scale = outcome.scale
    e_o = outcome.master_energy_mAh / scale
    e_p = outcome.worker_energy_seen_mAh / scale
    if not outcome.status.ok:
        s.fail_count += 1
        s.fail_master_sum_mAh += e_o
        s.fail_worker_sum_mAh += outcome.worker_energy_mAh / scale
        return stats
    s.success_count += 1
    s.delay_sum_s += outcome.delay_s / scale
    s.energy_success_sum_mAh += e_o + e_p
    s.gamma_mAh = _ewma(s.gamma_mAh, s.gamma_init, e_o + e_p, GAMMA_NEW_WEIGHT)
    s.gamma_init = True
    new_weight = 1.0 - kind.beta if isinstance(kind, PrCompEwma) else 1.0 - PrCompEwma().beta
    if outcome.device == LOCAL:
        s.ewma_proc_mAh = _ewma(s.ewma_proc_mAh, s.proc_init, e_o, new_weight)
    else:
        s.ewma_proc_mAh = _ewma(s.ewma_proc_mAh, s.proc_init, e_p, new_weight)
        s.ewma_off_mAh = _ewma(s.ewma_off_mAh, s.off_init, e_o, new_weight)
        s.off_init = True
    s.proc_init = True
    return stats


def mobility_inflated_delay(stats: SchedulerState, n: DeviceId, p_n: float) -> float:
    if n == LOCAL:
        p_n = 0.0
    if p_n >= 1.0:
        raise CertainlyAbsent(f"device {n} is out of range with probability 1")
    return avg_delay(stats, n) / (1.0 - p_n)
