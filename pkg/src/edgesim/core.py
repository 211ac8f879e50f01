"""Domain types shared across the simulator, plus the energy ledger.

Energy is always reported in milliamp-hours (mAh). CPU energy for an
interval is attributed to an application from cumulative counters, the same
way a phone's battery statistics expose them: the application's share of
CPU time scales the total current drawn by every (cluster, speed) pair over
the interval.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional

SECONDS_PER_HOUR = 3600.0
US_PER_S = 1_000_000

# Index 0 is always the master's own CPU (local processing); 1..N are workers.
DeviceId = int
LOCAL = 0


class EdgeSimError(Exception):
    """Base class for every error raised by edgesim."""


class NegativeDelta(EdgeSimError):
    pass


class ZeroSystemTime(EdgeSimError):
    pass


class DuplicateAttempt(EdgeSimError):
    pass


def to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


def to_s(us: int) -> float:
    return us / US_PER_S


@dataclass(frozen=True)
class DeviceProfile:
    """Calibrated behaviour of one phone.

    ``cpu_current_mA`` lists ``(cluster, speed, current_mA)`` entries; the
    simulator runs every device at the first entry.
    """

    name: str
    mean_service_s: float
    link_bandwidth_Bps: float
    cpu_current_mA: tuple[tuple[int, int, float], ...]
    wifi_power_mA: float = 0.0
    service_jitter: float = 0.0
    initial_delay_s: float = 0.0
    group_owner_overhead: float = 1.0
    id: DeviceId = 0

    def __post_init__(self):
        if self.mean_service_s <= 0:
            raise ValueError(f"{self.name}: mean_service_s must be > 0")
        if not 0.0 <= self.service_jitter < 1.0:
            raise ValueError(f"{self.name}: service_jitter must be in [0, 1)")
        if self.link_bandwidth_Bps <= 0:
            raise ValueError(f"{self.name}: link_bandwidth_Bps must be > 0")
        if not self.cpu_current_mA:
            raise ValueError(f"{self.name}: cpu_current_mA needs at least one entry")
        for entry in self.cpu_current_mA:
            if len(entry) != 3 or entry[2] <= 0:
                raise ValueError(f"{self.name}: bad cpu_current_mA entry {entry!r}")
        if self.wifi_power_mA < 0:
            raise ValueError(f"{self.name}: wifi_power_mA must be >= 0")
        if self.initial_delay_s < 0:
            raise ValueError(f"{self.name}: initial_delay_s must be >= 0")
        if self.group_owner_overhead < 1.0:
            raise ValueError(f"{self.name}: group_owner_overhead must be >= 1")

    @property
    def active_pair(self) -> tuple[int, int]:
        c, s, _ = self.cpu_current_mA[0]
        return (c, s)

    def current_for(self, pair: tuple[int, int]) -> float:
        for c, s, ma in self.cpu_current_mA:
            if (c, s) == pair:
                return ma
        raise KeyError(f"{self.name}: no current for cluster/speed {pair}")


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    payload_bytes: int
    result_bytes: int = 0
    work_units: float = 1.0

    def __post_init__(self):
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be > 0")
        if self.result_bytes < 0:
            raise ValueError("result_bytes must be >= 0")
        if self.work_units <= 0:
            raise ValueError("work_units must be > 0")

    def scaled(self, fraction: float, task_id: int) -> "TaskSpec":
        """A proportionally shrunk copy, used for probe tasks."""
        return TaskSpec(
            task_id=task_id,
            payload_bytes=max(1, int(round(self.payload_bytes * fraction))),
            result_bytes=int(round(self.result_bytes * fraction)),
            work_units=self.work_units * fraction,
        )


class Status(enum.Enum):
    SUCCESS = 0
    FAILED_STEP_1 = 1
    FAILED_STEP_2 = 2
    FAILED_STEP_3 = 3

    @property
    def ok(self) -> bool:
        return self is Status.SUCCESS

    @property
    def failed_step(self) -> Optional[int]:
        return None if self is Status.SUCCESS else self.value

    @classmethod
    def failed_at(cls, step: int) -> "Status":
        return cls(step)


@dataclass(frozen=True)
class Usage:
    """Counter increments a device accumulated during one attempt."""

    cpu_time_app_s: float = 0.0
    cpu_time_all_s: float = 0.0
    cluster_speed_time_s: tuple[tuple[tuple[int, int], float], ...] = ()
    wifi_active_s: float = 0.0


@dataclass(frozen=True)
class TaskOutcome:
    """Result of one scheduling attempt of one task on one device.

    ``master_energy_mAh``/``worker_energy_mAh`` are ground truth.
    ``reported_worker_mAh`` is what the worker measured and sent back, which
    can differ from the truth when several tasks share its CPU. ``scale`` is
    the task size relative to a regular task (probes are < 1).
    """

    task_id: int
    device: DeviceId
    attempt: int
    status: Status
    start_s: float
    end_s: float
    master_energy_mAh: float = 0.0
    worker_energy_mAh: float = 0.0
    master: int = 0
    scale: float = 1.0
    probe: bool = False
    reported_worker_mAh: Optional[float] = None
    master_usage: Optional[Usage] = None
    worker_usage: Optional[Usage] = None

    def __post_init__(self):
        if self.end_s < self.start_s:
            raise ValueError("end_s must be >= start_s")
        if self.attempt < 1:
            raise ValueError("attempt must be >= 1")
        if self.master_energy_mAh < 0 or self.worker_energy_mAh < 0:
            raise ValueError("energies must be non-negative")

    @property
    def delay_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def worker_energy_seen_mAh(self) -> float:
        if self.reported_worker_mAh is None:
            return self.worker_energy_mAh
        return self.reported_worker_mAh


@dataclass(frozen=True)
class LedgerSnapshot:
    """Cumulative CPU counters of one device at one instant."""

    app_cpu_s: float = 0.0
    all_cpu_s: float = 0.0
    cluster_speed_s: Mapping[tuple[int, int], float] = field(default_factory=dict)


def interval_cpu_energy(before: LedgerSnapshot, after: LedgerSnapshot,
                        profile: DeviceProfile) -> float:
    """CPU energy (mAh) attributed to the app between two counter snapshots."""
    d_app = after.app_cpu_s - before.app_cpu_s
    d_all = after.all_cpu_s - before.all_cpu_s
    if d_app < 0 or d_all < 0:
        raise NegativeDelta("CPU time counters decreased between snapshots")
    d_pairs = {}
    for pair in set(before.cluster_speed_s) | set(after.cluster_speed_s):
        d = after.cluster_speed_s.get(pair, 0.0) - before.cluster_speed_s.get(pair, 0.0)
        if d < 0:
            raise NegativeDelta(f"cluster/speed counter {pair} decreased")
        d_pairs[pair] = d
    if d_app == 0:
        return 0.0
    if d_all == 0:
        raise ZeroSystemTime("application used CPU but the system CPU time did not advance")
    total_mAs = sum(d * profile.current_for(pair) for pair, d in sorted(d_pairs.items()))
    return (d_app / d_all) * total_mAs / SECONDS_PER_HOUR


def wifi_energy(active_s: float, profile: DeviceProfile) -> float:
    if active_s < 0:
        raise ValueError("active_s must be >= 0")
    return active_s / SECONDS_PER_HOUR * profile.wifi_power_mA


@dataclass
class LedgerEntry:
    master_mAh: float
    worker_mAh: float
    master_usage: Optional[Usage] = None
    worker_usage: Optional[Usage] = None
    probe: bool = False
    success: bool = True


class EnergyLedger:
    """Ground-truth energy of every attempt, failed ones included."""

    def __init__(self):
        self.entries: dict[tuple[int, int, DeviceId, int], LedgerEntry] = {}
        self.master_mAh = 0.0
        self.worker_mAh = 0.0

    @property
    def total_mAh(self) -> float:
        return self.master_mAh + self.worker_mAh

    def record(self, outcome: TaskOutcome) -> "EnergyLedger":
        key = (outcome.master, outcome.task_id, outcome.device, outcome.attempt)
        if key in self.entries:
            raise DuplicateAttempt(f"attempt {key} already recorded")
        self.entries[key] = LedgerEntry(
            master_mAh=outcome.master_energy_mAh,
            worker_mAh=outcome.worker_energy_mAh,
            master_usage=outcome.master_usage,
            worker_usage=outcome.worker_usage,
            probe=outcome.probe,
            success=outcome.status.ok,
        )
        self.master_mAh += outcome.master_energy_mAh
        self.worker_mAh += outcome.worker_energy_mAh
        return self

    def sum_entries(self) -> tuple[float, float]:
        m = sum(e.master_mAh for e in self.entries.values())
        w = sum(e.worker_mAh for e in self.entries.values())
        return m, w

    def copy(self) -> "EnergyLedger":
        return copy.deepcopy(self)


def record_attempt(ledger: EnergyLedger, outcome: TaskOutcome) -> EnergyLedger:
    """Return a new ledger with ``outcome`` added; ``ledger`` is untouched."""
    return ledger.copy().record(outcome)
