"""Deterministic discrete-event simulation of one trial.

Virtual time is an integer number of microseconds. Events are ordered by
``(at_us, kind, device, task, seq)`` so that equal-time events always fire
in the same order.

An offload runs in three steps: the payload is sent to the worker, the
worker processes it, and the result is sent back. The worker's availability
is checked at the start of each step; if it is out of range the attempt
fails at that step. Local processing is a single processing step on the
master's own CPU. Every CPU is a processor-sharing server: with m tasks in
processing each advances at 1/m speed.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .core import (
    LOCAL,
    DeviceProfile,
    EnergyLedger,
    LedgerSnapshot,
    SECONDS_PER_HOUR,
    Status,
    TaskOutcome,
    TaskSpec,
    Usage,
    interval_cpu_energy,
    to_us,
)
from .estimators import Newest, SchedulerState, update_on_outcome
from .mobility import (
    MajorityVote,
    MarkovMobility,
    Predicted,
    SlotProcess,
    Statistical,
    out_probability,
    predict_out_probability,
)
from .schedulers import (
    ClusterView,
    ScheduleDecision,
    Wait,
    dispatch_parallel,
    is_parallel,
    next_serial,
    policy_name,
    uses_estimates,
)

PURPOSE_MOBILITY = 1
PURPOSE_PREDICTOR = 2
PURPOSE_SERVICE = 3
EXTRA_MASTER_BASE = 1000
PROBE_TASK_BASE = 1_000_000
DISPATCH_TICK_US = 500_000
_DONE_EPS_S = 1e-6


class Kind(enum.IntEnum):
    SLOT_TICK = 0
    STEP_COMPLETE = 1
    RETRIEVE_TIMEOUT = 2
    DISPATCH_WAKE = 3
    PROBE_TICK = 4


def stream(seed: int, purpose: int, *index: int) -> np.random.Generator:
    """Independent RNG stream for one (purpose, device) pair of a trial."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, purpose, *index])))


def contention_factor(in_flight: int) -> float:
    if in_flight < 1:
        raise ValueError("in_flight must be >= 1")
    return float(in_flight)


class Processor:
    """Processor-sharing CPU with cumulative usage counters."""

    def __init__(self, profile: DeviceProfile, label: str):
        self.profile = profile
        self.label = label
        self.pair = profile.active_pair
        self.current_mA = profile.current_for(self.pair)
        self.jobs: dict[int, float] = {}
        self.last_us = 0
        self.busy_s = 0.0
        self.gen = 0
        self.max_jobs = 0

    def advance(self, now_us: int):
        if now_us > self.last_us:
            dt = (now_us - self.last_us) / 1e6
            if self.jobs:
                share = dt / len(self.jobs)
                for k in self.jobs:
                    self.jobs[k] -= share
                self.busy_s += dt
            self.last_us = now_us

    def snapshot(self, now_us: int) -> LedgerSnapshot:
        self.advance(now_us)
        # the offloading service is the only CPU consumer in the simulation
        return LedgerSnapshot(self.busy_s, self.busy_s, {self.pair: self.busy_s})

    def add(self, key: int, work_s: float, now_us: int):
        self.advance(now_us)
        self.jobs[key] = work_s
        self.max_jobs = max(self.max_jobs, len(self.jobs))
        self.gen += 1

    def remove(self, key: int, now_us: int) -> float:
        self.advance(now_us)
        self.gen += 1
        return self.jobs.pop(key)

    def next_completion(self) -> Optional[int]:
        if not self.jobs:
            return None
        rem = min(self.jobs.values())
        return self.last_us + max(0, math.ceil(max(rem, 0.0) * len(self.jobs) * 1e6 - 1e-6))

    def pop_finished(self) -> list[int]:
        done = sorted(k for k, r in self.jobs.items() if r <= _DONE_EPS_S)
        for k in done:
            del self.jobs[k]
        if done:
            self.gen += 1
        return done


@dataclass
class Worker:
    index: int
    profile: DeviceProfile
    proc: Processor
    slots: SlotProcess
    source: object


@dataclass
class Attempt:
    uid: int
    master: "MasterRun"
    task: TaskSpec
    device: int
    attempt_no: int
    probe: bool
    scale: float
    start_us: int
    proc: Processor
    t1_s: float = 0.0
    t3_s: float = 0.0
    work_s: float = 0.0
    work_done_s: float = 0.0
    step: int = 0
    step_started_us: int = 0
    wifi_s: float = 0.0
    snap_before: Optional[LedgerSnapshot] = None
    done: bool = False


@dataclass
class MasterResult:
    master: int
    policy: str
    start_s: float
    completed: int
    failed_attempts: int
    completion_time_s: float
    deadline_met: bool
    success_counts: dict[int, int]


@dataclass
class TrialResult:
    scheduler: str
    seed: int
    n_workers: int
    completed: int
    failed_attempts: int
    completion_time_s: float
    total_energy_mAh: float
    master_energy_mAh: float
    per_device_energy_mAh: dict[str, float]
    per_device_success_counts: dict[int, int]
    deadline_met: bool
    probes: int = 0
    masters: tuple[MasterResult, ...] = ()
    ledger: Optional[EnergyLedger] = None
    events: list = field(default_factory=list)


class MasterRun:
    def __init__(self, idx: int, profile: DeviceProfile, start_us: int, cfg: ExperimentConfig,
                 phys: int):
        self.idx = idx
        self.profile = profile
        self.start_us = start_us
        self.policy = cfg.policy
        self.parallel = is_parallel(self.policy)
        self.estimating = uses_estimates(self.policy)
        self.stats = SchedulerState()
        self.K = cfg.K
        self.deadline_s = cfg.deadline_s
        self.local = Processor(profile, f"m{idx}")
        self.phys = phys
        self.completed = 0
        self.failed_attempts = 0
        self.finish_us: Optional[int] = None
        self.done = False
        self.started = False
        # serial state
        self.busy = False
        self.last_worker: Optional[int] = None
        self.wake_token = 0
        # parallel state
        self.pending: list[int] = list(range(cfg.K))
        self.inflight_tasks: dict[int, int] = {}
        # per device: uid of the real task / probe this master has on it
        self.real_on: dict[int, int] = {}
        self.probe_on: dict[int, int] = {}
        self.last_sample_us: dict[int, int] = {}
        self.tried: set[int] = set()
        self.attempts: dict[int, int] = {}
        self.success_counts: dict[int, int] = {}
        self.predicted: dict[int, list[bool]] = {}
        self.pred_rng: dict[int, np.random.Generator] = {}


class Simulation:
    def __init__(self, cfg: ExperimentConfig, seed: int, log_events: bool = False):
        self.cfg = cfg
        self.seed = seed
        self.log_events = log_events
        self.events: list[tuple] = []
        self.queue: list[tuple] = []
        self.seq = 0
        self.now = 0
        self.uid = 0
        self.probe_ids = 0
        self.probes = 0
        self.ledger = EnergyLedger()
        self.attempts: dict[int, Attempt] = {}
        self.service_rng: dict[int, np.random.Generator] = {}

        self.workers: list[Worker] = []
        for i in range(1, cfg.n_workers + 1):
            prof = cfg.devices[i]
            src = cfg.mobility[i - 1]
            slots = SlotProcess(src, stream(seed, PURPOSE_MOBILITY, i), cfg.trace_slot_s, label=f"w{i}")
            self.workers.append(Worker(i, prof, Processor(prof, f"w{i}"), slots, src))

        self.masters = [MasterRun(0, cfg.devices[0], 0, cfg, 0)]
        for j, extra in enumerate(cfg.additional_masters, start=1):
            self.masters.append(MasterRun(j, extra.device, to_us(extra.start_s), cfg, EXTRA_MASTER_BASE + j))
        for m in self.masters:
            for i in range(1, cfg.n_workers + 1):
                m.predicted[i] = []
                m.pred_rng[i] = stream(seed, PURPOSE_PREDICTOR, i, m.phys)
        self.horizon_us = to_us(cfg.deadline_s * cfg.horizon_factor)

    # --- plumbing -------------------------------------------------------------

    def push(self, at_us: int, kind: Kind, device: int, task: int, payload):
        self.seq += 1
        heapq.heappush(self.queue, (at_us, int(kind), device, task, self.seq, payload))

    def log(self, kind: str, task, device, detail: str = ""):
        if self.log_events:
            self.events.append((self.now, kind, task, device, detail))

    def worker(self, n: int) -> Worker:
        return self.workers[n - 1]

    def in_range(self, n: int) -> bool:
        return self.worker(n).slots.at(self.now)

    def jitter(self, phys: int, profile: DeviceProfile) -> float:
        rng = self.service_rng.get(phys)
        if rng is None:
            rng = self.service_rng[phys] = stream(self.seed, PURPOSE_SERVICE, phys)
        u = rng.random()
        return 1.0 + profile.service_jitter * (2.0 * u - 1.0)

    # --- what a master sees ---------------------------------------------------

    def predicted_in_range(self, m: MasterRun, n: int) -> bool:
        w = self.worker(n)
        slot = w.slots.slot_of(self.now)
        pred = self.cfg.predictor[n - 1]
        if isinstance(pred, Statistical):
            return w.slots.state(slot)
        if isinstance(pred, Predicted):
            cache = m.predicted[n]
            rng = m.pred_rng[n]
            while len(cache) <= slot:
                s = len(cache)
                _, guess = predict_out_probability(pred, (), w.slots.state(s), rng.random())
                cache.append(guess)
            return cache[slot]
        if isinstance(pred, MajorityVote):
            win = pred.window_slots
            initial = w.source.initial_state if isinstance(w.source, MarkovMobility) else True
            hist = [w.slots.state(s) for s in range(max(0, slot - win), slot)]
            hist = [initial] * (win - len(hist)) + hist
            _, guess = predict_out_probability(pred, hist, w.slots.state(slot), 0.0)
            return guess
        raise TypeError(f"unknown predictor {pred!r}")

    def p_out(self, n: int, seen_in_range: bool) -> float:
        pred = self.cfg.predictor[n - 1]
        if not isinstance(pred, Statistical):
            return 0.0 if seen_in_range else 1.0
        if pred.p_out is not None:
            return pred.p_out
        src = self.worker(n).source
        if src is None:
            return 0.0
        if isinstance(src, MarkovMobility):
            return out_probability(src, self.cfg.p_model)
        return 1.0 - sum(1 for v in src if v) / len(src)

    def remaining_delay_s(self, us_total: int, since_us: int) -> float:
        return max(0, us_total - (self.now - since_us)) / 1e6

    def view(self, m: MasterRun) -> ClusterView:
        n_workers = self.cfg.n_workers
        available = {LOCAL: True}
        p_out = {LOCAL: 0.0}
        delay = {LOCAL: self.remaining_delay_s(to_us(m.profile.initial_delay_s), m.start_us)}
        idle = {LOCAL: LOCAL not in m.real_on and LOCAL not in m.probe_on}
        for n in range(1, n_workers + 1):
            seen = self.predicted_in_range(m, n)
            available[n] = seen
            p_out[n] = self.p_out(n, seen)
            delay[n] = self.remaining_delay_s(to_us(self.worker(n).profile.initial_delay_s), 0)
            idle[n] = n not in m.real_on and n not in m.probe_on
        return ClusterView(
            now_s=(self.now - m.start_us) / 1e6, n_workers=n_workers, available=available,
            p_out=p_out, initial_delay_s=delay, K=m.K, deadline_s=m.deadline_s,
            completed=m.completed, idle=idle,
            pending=[t for t in m.pending if t not in m.inflight_tasks],
            in_flight=len(m.inflight_tasks), last_worker=m.last_worker,
            untried=frozenset(n for n in range(n_workers + 1) if n not in m.tried),
        )

    # --- attempts -------------------------------------------------------------

    def start_attempt(self, m: MasterRun, n: int, task: TaskSpec, probe: bool, detail: str = ""):
        self.uid += 1
        if probe:
            attempt_no = 1
            scale = self.cfg.probe_fraction
            self.probes += 1
        else:
            attempt_no = m.attempts.get(task.task_id, 0) + 1
            m.attempts[task.task_id] = attempt_no
            scale = 1.0
        proc = m.local if n == LOCAL else self.worker(n).proc
        att = Attempt(self.uid, m, task, n, attempt_no, probe, scale, self.now, proc)
        m.tried.add(n)
        self.attempts[att.uid] = att
        if probe:
            m.probe_on[n] = att.uid
        else:
            m.real_on[n] = att.uid
            if m.parallel:
                m.inflight_tasks[task.task_id] = att.uid
        self.log("ProbeDispatch" if probe else "Dispatch", task.task_id, n,
                 f"master={m.idx};attempt={attempt_no}" + (f";{detail}" if detail else ""))

        if n == LOCAL:
            overhead = m.profile.group_owner_overhead if self.cfg.n_workers >= 1 else 1.0
            self.begin_processing(att, m.profile, m.phys, overhead)
            return
        w = self.worker(n)
        att.t1_s = task.payload_bytes / w.profile.link_bandwidth_Bps
        att.t3_s = task.result_bytes / w.profile.link_bandwidth_Bps
        att.snap_before = w.proc.snapshot(self.now)
        if m.parallel and not probe:
            nominal = att.t1_s + task.work_units * w.profile.mean_service_s + att.t3_s
            self.push(self.now + to_us(nominal + self.cfg.retrieve_timeout_s),
                      Kind.RETRIEVE_TIMEOUT, n, task.task_id, att.uid)
        if not self.in_range(n):
            self.finish(att, Status.FAILED_STEP_1)
            return
        att.step = 1
        att.step_started_us = self.now
        self.push(self.now + to_us(att.t1_s), Kind.STEP_COMPLETE, n, task.task_id, (att.uid, 1))

    def begin_processing(self, att: Attempt, profile: DeviceProfile, phys: int, overhead: float = 1.0):
        att.step = 2
        att.step_started_us = self.now
        att.work_s = att.task.work_units * profile.mean_service_s * overhead * self.jitter(phys, profile)
        att.proc.add(att.uid, att.work_s, self.now)
        self.reschedule(att.proc, att.device)

    def reschedule(self, proc: Processor, device: int):
        at = proc.next_completion()
        if at is not None:
            self.push(at, Kind.STEP_COMPLETE, device, -1, (proc, proc.gen))

    def on_step_complete(self, payload, device: int):
        a, b = payload
        if isinstance(a, Processor):
            proc, gen = a, b
            if gen != proc.gen:
                return
            proc.advance(self.now)
            finished = proc.pop_finished()
            self.reschedule(proc, device)
            for uid in finished:
                att = self.attempts[uid]
                att.work_done_s = att.work_s
                self.after_processing(att)
            return
        att = self.attempts[a]
        if att.done:
            return
        if b == 1:
            att.wifi_s += att.t1_s
            if not self.in_range(att.device):
                self.finish(att, Status.FAILED_STEP_2)
                return
            w = self.worker(att.device)
            self.begin_processing(att, w.profile, w.index)
        elif b == 3:
            att.wifi_s += att.t3_s
            self.finish(att, Status.SUCCESS)

    def after_processing(self, att: Attempt):
        if att.done:
            return
        if att.device == LOCAL:
            self.finish(att, Status.SUCCESS)
            return
        if not self.in_range(att.device):
            self.finish(att, Status.FAILED_STEP_3)
            return
        att.step = 3
        att.step_started_us = self.now
        self.push(self.now + to_us(att.t3_s), Kind.STEP_COMPLETE, att.device, att.task.task_id, (att.uid, 3))

    def on_timeout(self, uid: int):
        att = self.attempts[uid]
        if att.done:
            return
        self.log("RetrieveTimeout", att.task.task_id, att.device, f"master={att.master.idx}")
        if att.step == 2 and att.uid in att.proc.jobs:
            left = att.proc.remove(att.uid, self.now)
            att.work_done_s = att.work_s - max(0.0, left)
            self.reschedule(att.proc, att.device)
        elif att.step in (1, 3):
            att.wifi_s += (self.now - att.step_started_us) / 1e6
        self.finish(att, Status.FAILED_STEP_3)

    def finish(self, att: Attempt, status: Status):
        att.done = True
        m = att.master
        cpu_mAh = att.work_done_s * att.proc.current_mA / SECONDS_PER_HOUR
        reported = None
        if att.device == LOCAL:
            master_mAh, worker_mAh = cpu_mAh, 0.0
            m_usage = Usage(att.work_done_s, att.work_done_s, ((att.proc.pair, att.work_done_s),), 0.0)
            w_usage = None
        else:
            wp = self.worker(att.device).profile
            master_mAh = att.wifi_s * m.profile.wifi_power_mA / SECONDS_PER_HOUR
            worker_wifi = att.wifi_s * wp.wifi_power_mA / SECONDS_PER_HOUR
            worker_mAh = cpu_mAh + worker_wifi
            m_usage = Usage(wifi_active_s=att.wifi_s)
            w_usage = Usage(att.work_done_s, att.work_done_s, ((att.proc.pair, att.work_done_s),), att.wifi_s)
            if status.ok:
                # what the worker measures from its app-level counters over the attempt
                after = att.proc.snapshot(self.now)
                reported = interval_cpu_energy(att.snap_before, after, wp) + worker_wifi
        outcome = TaskOutcome(
            task_id=att.task.task_id, device=att.device, attempt=att.attempt_no, status=status,
            start_s=att.start_us / 1e6, end_s=self.now / 1e6,
            master_energy_mAh=master_mAh, worker_energy_mAh=worker_mAh, master=m.idx,
            scale=att.scale, probe=att.probe, reported_worker_mAh=reported,
            master_usage=m_usage, worker_usage=w_usage,
        )
        self.ledger.record(outcome)
        if m.done:
            return
        if m.estimating:
            update_on_outcome(m.stats, outcome, getattr(m.policy, "energy", None) or Newest())
        if status.ok:
            m.last_sample_us[att.device] = att.start_us
        detail = f"master={m.idx};attempt={att.attempt_no}"
        if att.probe:
            m.probe_on.pop(att.device, None)
            self.log("ProbeDone" if status.ok else "ProbeFailed", att.task.task_id, att.device,
                     detail + ("" if status.ok else f";step={status.failed_step}"))
        else:
            m.real_on.pop(att.device, None)
            m.inflight_tasks.pop(att.task.task_id, None)
            if status.ok:
                m.completed += 1
                m.success_counts[att.device] = m.success_counts.get(att.device, 0) + 1
                m.pending.remove(att.task.task_id)
                self.log("Success", att.task.task_id, att.device, detail)
            else:
                m.failed_attempts += 1
                self.log("Failed", att.task.task_id, att.device, detail + f";step={status.failed_step}")
            if not m.parallel:
                m.busy = False
            if m.completed == m.K:
                self.master_done(m)
                return
        if status == Status.FAILED_STEP_1:
            # refused at dispatch: retrying at the same instant could loop forever
            # when the master keeps mispredicting, so back off one wake interval
            if not m.parallel:
                m.wake_token += 1
                self.push(self.now + DISPATCH_TICK_US, Kind.DISPATCH_WAKE, m.idx, -1, m.wake_token)
            return
        self.decide(m)

    def master_done(self, m: MasterRun):
        m.done = True
        m.finish_us = self.now
        self.log("MasterDone", -1, LOCAL, f"master={m.idx};completed={m.completed}")

    # --- decisions ------------------------------------------------------------

    def decide(self, m: MasterRun):
        if m.done or not m.started:
            return
        if m.parallel:
            self.decide_parallel(m)
        else:
            self.decide_serial(m)

    def decide_serial(self, m: MasterRun):
        if m.busy:
            return
        task_id = m.pending[0]
        d = next_serial(m.policy, m.stats, self.view(m), task_id=task_id)
        m.wake_token += 1
        if isinstance(d, Wait):
            if d.reset_round_robin:
                m.last_worker = None
            self.push(self.now + max(1, to_us(d.duration_s)), Kind.DISPATCH_WAKE, m.idx, -1, m.wake_token)
            return
        self.dispatch(m, d)

    def decide_parallel(self, m: MasterRun):
        for d in dispatch_parallel(m.policy, m.stats, self.view(m)):
            self.dispatch(m, d)

    def dispatch(self, m: MasterRun, d: ScheduleDecision):
        if not m.parallel:
            m.busy = True
            if d.device != LOCAL:
                m.last_worker = d.device
        task = TaskSpec(d.task_id, self.cfg.task.payload_bytes, self.cfg.task.result_bytes,
                        self.cfg.task.work_units)
        self.start_attempt(m, d.device, task, probe=False, detail=f"rationale={d.rationale.value}")

    def probe_tick(self, m: MasterRun):
        view = self.view(m)
        interval = to_us(self.cfg.probe_interval_s)
        for n in view.devices:
            if n in m.real_on or n in m.probe_on:
                continue
            if n != LOCAL and (not view.available[n] or view.initial_delay_s[n] > 0):
                continue
            last = m.last_sample_us.get(n)
            if m.parallel and n != LOCAL and n not in m.tried:
                # parallel masters bootstrap workers with a real task instead
                continue
            if last is not None and self.now - last < interval:
                continue
            self.probe_ids += 1
            task = self.cfg.task.scaled(self.cfg.probe_fraction, PROBE_TASK_BASE + self.probe_ids)
            self.start_attempt(m, n, task, probe=True)

    # --- main loop ------------------------------------------------------------

    def start_master(self, m: MasterRun):
        m.started = True
        self.log("MasterStart", -1, LOCAL, f"master={m.idx};policy={policy_name(m.policy)}")
        if m.estimating:
            self.probe_tick(m)
            self.push(self.now + to_us(self.cfg.probe_interval_s), Kind.PROBE_TICK, m.idx, -1, None)
        if m.parallel:
            self.push(self.now + DISPATCH_TICK_US, Kind.DISPATCH_WAKE, m.idx, -1, None)
            w0 = to_us(m.profile.initial_delay_s)
            if w0 > 0:
                self.push(self.now + w0, Kind.DISPATCH_WAKE, m.idx, -1, "w0")
        self.decide(m)

    def schedule_slot_ticks(self):
        if not any(m.parallel for m in self.masters):
            return
        for w in self.workers:
            if w.source is not None:
                self.push(to_us(w.slots.slot_s), Kind.SLOT_TICK, w.index, -1, 1)

    def run(self) -> TrialResult:
        for m in self.masters:
            self.push(m.start_us, Kind.DISPATCH_WAKE, m.idx, -1, "start")
        self.schedule_slot_ticks()
        while self.queue and not all(m.done for m in self.masters):
            at, kind, device, task, _, payload = heapq.heappop(self.queue)
            self.now = at
            for m in self.masters:
                if m.started and not m.done and self.now - m.start_us > self.horizon_us:
                    m.done = True
                    self.log("Horizon", -1, LOCAL, f"master={m.idx};completed={m.completed}")
            if kind == Kind.STEP_COMPLETE:
                self.on_step_complete(payload, device)
            elif kind == Kind.RETRIEVE_TIMEOUT:
                self.on_timeout(payload)
            elif kind == Kind.DISPATCH_WAKE:
                m = self.masters[device]
                if payload == "start":
                    self.start_master(m)
                elif m.done:
                    continue
                elif m.parallel:
                    if payload is None:
                        self.push(self.now + DISPATCH_TICK_US, Kind.DISPATCH_WAKE, m.idx, -1, None)
                    self.decide(m)
                elif payload == m.wake_token:
                    self.decide(m)
            elif kind == Kind.PROBE_TICK:
                m = self.masters[device]
                if not m.done:
                    self.probe_tick(m)
                    self.push(self.now + to_us(self.cfg.probe_interval_s), Kind.PROBE_TICK, m.idx, -1, None)
            elif kind == Kind.SLOT_TICK:
                w = self.worker(device)
                self.push(to_us(w.slots.slot_s * (payload + 1)), Kind.SLOT_TICK, device, -1, payload + 1)
                for m in self.masters:
                    if m.parallel:
                        self.decide(m)
        return self.result()

    def result(self) -> TrialResult:
        cfg = self.cfg
        per_master = []
        for m in self.masters:
            if m.finish_us is not None:
                t = (m.finish_us - m.start_us) / 1e6
            else:
                t = (self.now - m.start_us) / 1e6
            per_master.append(MasterResult(
                master=m.idx, policy=policy_name(m.policy), start_s=m.start_us / 1e6,
                completed=m.completed, failed_attempts=m.failed_attempts, completion_time_s=t,
                deadline_met=m.completed == m.K and t <= m.deadline_s,
                success_counts=dict(sorted(m.success_counts.items())),
            ))
        per_device: dict[str, float] = {}
        for (mi, _task, dev, _att), e in self.ledger.entries.items():
            mk = f"m{mi}"
            per_device[mk] = per_device.get(mk, 0.0) + e.master_mAh
            if dev != LOCAL:
                wk = f"w{dev}"
                per_device[wk] = per_device.get(wk, 0.0) + e.worker_mAh
        m0 = per_master[0]
        return TrialResult(
            scheduler=policy_name(cfg.policy), seed=self.seed, n_workers=cfg.n_workers,
            completed=m0.completed, failed_attempts=m0.failed_attempts,
            completion_time_s=m0.completion_time_s, total_energy_mAh=self.ledger.total_mAh,
            master_energy_mAh=self.ledger.master_mAh,
            per_device_energy_mAh=dict(sorted(per_device.items())),
            per_device_success_counts=m0.success_counts, deadline_met=m0.deadline_met,
            probes=self.probes, masters=tuple(per_master), ledger=self.ledger,
            events=self.events,
        )


def run_trial(cfg: ExperimentConfig, seed: int, log_events: bool = False) -> TrialResult:
    """Simulate one trial of ``cfg.policy``; identical inputs give identical results."""
    return Simulation(cfg, seed, log_events=log_events).run()


EVENT_LOG_HEADER = "at_us,kind,task,device,detail"


def format_event_log(events) -> str:
    lines = [EVENT_LOG_HEADER]
    for at, kind, task, device, detail in events:
        lines.append(f"{at},{kind},{task},{device},{detail}")
    return "\n".join(lines) + "\n"
