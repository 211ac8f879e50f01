"""Scheduling policies.

Online policies are pure functions of a :class:`ClusterView` (what the
master can observe right now) and its :class:`SchedulerState`. The offline
solvers take known per-task energy ``E`` and delay ``D`` vectors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .core import LOCAL, DeviceId, EdgeSimError
from .estimators import (
    CertainlyAbsent,
    EnergyModelKind,
    NoSamples,
    Newest,
    PrCompEwma,
    SchedulerState,
    estimate_energy,
    estimated_completion_serial,
    mobility_inflated_delay,
)

WAKE_INTERVAL_S = 0.5


class NoDevices(EdgeSimError):
    pass


class Infeasible(EdgeSimError):
    pass


# --- policies ---------------------------------------------------------------

@dataclass(frozen=True)
class NoCooperation:
    pass


@dataclass(frozen=True)
class FullOffloading:
    pass


@dataclass(frozen=True)
class MaccSerial:
    energy: EnergyModelKind = field(default_factory=Newest)


@dataclass(frozen=True)
class PrCompSerial:
    energy: EnergyModelKind = field(default_factory=PrCompEwma)


@dataclass(frozen=True)
class MaccParallel:
    energy: EnergyModelKind = field(default_factory=Newest)


@dataclass(frozen=True)
class ParallelBaseline:
    pass


@dataclass(frozen=True)
class Arc:
    pass


PolicyKind = Union[NoCooperation, FullOffloading, MaccSerial, PrCompSerial,
                   MaccParallel, ParallelBaseline, Arc]

SERIAL_POLICIES = (NoCooperation, FullOffloading, MaccSerial, PrCompSerial)
PARALLEL_POLICIES = (MaccParallel, ParallelBaseline, Arc)
ESTIMATING_POLICIES = (MaccSerial, PrCompSerial, MaccParallel, Arc)


def is_parallel(policy: PolicyKind) -> bool:
    return isinstance(policy, PARALLEL_POLICIES)


def uses_estimates(policy: PolicyKind) -> bool:
    return isinstance(policy, ESTIMATING_POLICIES)


def policy_name(policy: PolicyKind) -> str:
    return type(policy).__name__


class Rationale(enum.Enum):
    PROBE = "Probe"
    MIN_ENERGY_FEASIBLE = "MinEnergyFeasible"
    ONLY_FEASIBLE = "OnlyFeasible"
    FALLBACK = "Fallback"


@dataclass(frozen=True)
class ScheduleDecision:
    task_id: int
    device: DeviceId
    decided_at_s: float
    rationale: Rationale


@dataclass(frozen=True)
class Wait:
    duration_s: float
    # FullOffloading restarts its round-robin from the first worker
    reset_round_robin: bool = False


@dataclass
class ClusterView:
    """Everything a master can observe when it makes a decision.

    Times are seconds since the master started. ``initial_delay_s`` holds the
    *remaining* initial delay per device, so local processing is possible
    once ``initial_delay_s[0] == 0``.
    """

    now_s: float
    n_workers: int
    available: dict[DeviceId, bool]
    p_out: dict[DeviceId, float]
    initial_delay_s: dict[DeviceId, float]
    K: int
    deadline_s: float
    completed: int = 0
    idle: dict[DeviceId, bool] = field(default_factory=dict)
    pending: Sequence[int] = ()
    in_flight: int = 0
    last_worker: Optional[DeviceId] = None
    # devices this master has never sent anything to
    untried: frozenset = frozenset()

    @property
    def devices(self) -> list[DeviceId]:
        return list(range(self.n_workers + 1))

    def usable(self, n: DeviceId) -> bool:
        if self.initial_delay_s.get(n, 0.0) > 0.0:
            return False
        return n == LOCAL or self.available.get(n, False)

    def is_idle(self, n: DeviceId) -> bool:
        return self.idle.get(n, True)

    def needs_bootstrap(self, n: DeviceId) -> bool:
        return n in self.untried and self.is_idle(n)


# --- serial -----------------------------------------------------------------

def _serial_candidates(policy, stats: SchedulerState, view: ClusterView):
    """(device, estimated completion, energy, feasible) for every usable, sampled device."""
    k = view.completed + 1
    remaining = view.deadline_s - view.now_s
    out = []
    for n in view.devices:
        if not view.usable(n):
            continue
        p = 0.0 if n == LOCAL else view.p_out.get(n, 0.0)
        w = view.initial_delay_s.get(n, 0.0)
        try:
            energy = estimate_energy(stats, n, policy.energy, p)
            if isinstance(policy, PrCompSerial):
                if p >= 1.0:
                    continue
                est = w + mobility_inflated_delay(stats, n, p) * (view.K - k + 1)
            else:
                est = estimated_completion_serial(stats, n, k, view.K, w, p)
        except NoSamples:
            continue
        out.append((n, est, energy, est <= remaining))
    return out


def next_serial(policy: PolicyKind, stats: SchedulerState, view: ClusterView,
                task_id: Optional[int] = None) -> Union[ScheduleDecision, Wait]:
    """Decide where the next task goes, or how long to wait before asking again."""
    if view.n_workers < 0:
        raise NoDevices("cluster is empty")
    if task_id is None:
        task_id = view.completed
    now = view.now_s

    if isinstance(policy, NoCooperation):
        w0 = view.initial_delay_s.get(LOCAL, 0.0)
        if w0 > 0:
            return Wait(w0)
        return ScheduleDecision(task_id, LOCAL, now, Rationale.ONLY_FEASIBLE)

    if isinstance(policy, FullOffloading):
        if view.n_workers == 0:
            raise NoDevices("full offloading needs at least one worker")
        start = view.last_worker if view.last_worker else 0
        for i in range(1, view.n_workers + 1):
            n = (start + i - 1) % view.n_workers + 1
            if view.usable(n):
                return ScheduleDecision(task_id, n, now, Rationale.ONLY_FEASIBLE)
        return Wait(WAKE_INTERVAL_S, reset_round_robin=True)

    if isinstance(policy, (MaccSerial, PrCompSerial)):
        if not stats.of(LOCAL).sampled:
            # every completion estimate needs the local average delay
            return Wait(WAKE_INTERVAL_S)
        cands = _serial_candidates(policy, stats, view)
        if not cands:
            return Wait(WAKE_INTERVAL_S)
        feasible = [c for c in cands if c[3]]
        if feasible:
            best = min(feasible, key=lambda c: (c[2], c[0]))
            why = Rationale.ONLY_FEASIBLE if len(feasible) == 1 else Rationale.MIN_ENERGY_FEASIBLE
            return ScheduleDecision(task_id, best[0], now, why)
        best = min(cands, key=lambda c: (c[1], c[0]))
        return ScheduleDecision(task_id, best[0], now, Rationale.FALLBACK)

    raise TypeError(f"{policy_name(policy)} is not a serial policy")


# --- parallel ---------------------------------------------------------------

def dispatch_parallel(policy: PolicyKind, stats: SchedulerState,
                      view: ClusterView) -> list[ScheduleDecision]:
    """Assign pending tasks to idle devices; at most one new task per device."""
    pending = list(view.pending)
    now = view.now_s
    out: list[ScheduleDecision] = []

    def give(n: DeviceId, why: Rationale):
        if pending:
            out.append(ScheduleDecision(pending.pop(0), n, now, why))

    usable = [n for n in view.devices if view.usable(n)]

    if isinstance(policy, ParallelBaseline):
        for n in usable:
            if view.is_idle(n):
                give(n, Rationale.ONLY_FEASIBLE)
        return out

    if isinstance(policy, Arc):
        s0 = stats.of(LOCAL)
        qualifying = []
        for n in usable:
            if n == LOCAL:
                continue
            s = stats.of(n)
            if not s.off_init:
                if view.needs_bootstrap(n):
                    give(n, Rationale.PROBE)
                continue
            if not s0.proc_init or s.ewma_off_mAh < s0.ewma_proc_mAh:
                qualifying.append(n)
        for n in qualifying:
            if view.is_idle(n):
                give(n, Rationale.MIN_ENERGY_FEASIBLE)
        if not qualifying and LOCAL in usable and view.is_idle(LOCAL):
            give(LOCAL, Rationale.FALLBACK)
        return out

    if isinstance(policy, MaccParallel):
        # devices still in their initial delay count toward capacity but are
        # not dispatched to yet
        ranked = []
        for n in view.devices:
            if n != LOCAL and not view.available.get(n, False):
                continue
            p = 0.0 if n == LOCAL else view.p_out.get(n, 0.0)
            try:
                energy = estimate_energy(stats, n, policy.energy, p)
                delta = mobility_inflated_delay(stats, n, p)
            except NoSamples:
                if n in usable and view.needs_bootstrap(n):
                    give(n, Rationale.PROBE)
                continue
            except CertainlyAbsent:
                continue
            ranked.append((energy, n, delta))
        ranked.sort()
        need = len(pending) + view.in_flight + len(out)
        capacity = 0
        selected = []
        for energy, n, delta in ranked:
            if capacity >= need:
                break
            budget = view.deadline_s - now - view.initial_delay_s.get(n, 0.0)
            capacity += max(0, math.floor(budget / delta)) if delta > 0 else need
            selected.append(n)
        covered = capacity >= need
        for n in selected:
            if n in usable and view.is_idle(n):
                give(n, Rationale.MIN_ENERGY_FEASIBLE if covered else Rationale.FALLBACK)
        return out

    raise TypeError(f"{policy_name(policy)} is not a parallel policy")


# --- offline solvers --------------------------------------------------------

def solve_serial_offline(E: Sequence[float], D: Sequence[float], K: int,
                         deadline_s: float) -> list[int]:
    """All K tasks on the cheapest device that can finish them alone in time."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if len(E) != len(D):
        raise ValueError("E and D must have the same length")
    feasible = [n for n in range(len(E)) if D[n] * K <= deadline_s]
    if not feasible:
        raise Infeasible(f"no device finishes {K} tasks within {deadline_s} s")
    best = min(feasible, key=lambda n: (E[n], n))
    alloc = [0] * len(E)
    alloc[best] = K
    return alloc


def solve_parallel_offline(E: Sequence[float], D: Sequence[float], K: int,
                           deadline_s: float) -> list[int]:
    """Greedy fill from the cheapest device, each up to what fits before the deadline."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if len(E) != len(D):
        raise ValueError("E and D must have the same length")
    alloc = [0] * len(E)
    remaining = K
    for n in sorted(range(len(E)), key=lambda i: (E[i], i)):
        if remaining == 0:
            break
        k = min(remaining, math.floor(deadline_s / D[n]))
        alloc[n] = k
        remaining -= k
    if remaining > 0:
        raise Infeasible(f"{remaining} tasks do not fit before {deadline_s} s")
    return alloc
