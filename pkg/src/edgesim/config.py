"""Experiment configuration: the JSON file format and its validation.

Unknown fields are errors so that a typo never silently falls back to a
default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional, Union

from .calibration import PRESETS, preset
from .core import DeviceProfile, EdgeSimError, TaskSpec
from .estimators import EnergyModelKind, New, Newest, Ordinary, PrCompEwma
from .mobility import (
    MajorityVote,
    MarkovMobility,
    MobilityPredictor,
    Predicted,
    Statistical,
    load_trace,
)
from .schedulers import (
    Arc,
    FullOffloading,
    MaccParallel,
    MaccSerial,
    NoCooperation,
    ParallelBaseline,
    PolicyKind,
    PrCompSerial,
)


class ConfigError(EdgeSimError):
    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


# A worker's mobility source: a Markov chain, a replayed boolean series, or
# None for a worker that never leaves.
MobilitySource = Union[MarkovMobility, tuple, None]


@dataclass(frozen=True)
class AdditionalMaster:
    device: DeviceProfile
    start_s: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskSpec
    K: int
    deadline_s: float
    devices: tuple[DeviceProfile, ...]
    mobility: tuple[MobilitySource, ...] = ()
    predictor: tuple[MobilityPredictor, ...] = ()
    policies: tuple[PolicyKind, ...] = (MaccSerial(),)
    p_model: str = "stationary"
    trials: int = 1
    base_seed: int = 0
    probe_interval_s: float = 10.0
    out_dir: str = "results"
    emit_event_log: bool = False
    additional_masters: tuple[AdditionalMaster, ...] = ()
    mobility_rest: MobilitySource = None
    trace_slot_s: float = 10.0
    probe_fraction: float = 0.005
    retrieve_timeout_s: float = 10.0
    notify_latency_s: float = 0.0
    horizon_factor: float = 50.0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("tasks.K", "must be >= 1")
        if self.deadline_s <= 0:
            raise ConfigError("deadline_s", "must be > 0")
        if not self.devices:
            raise ConfigError("devices", "need at least the master device")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if self.p_model not in ("stationary", "leave"):
            raise ConfigError("p_model", "must be 'stationary' or 'leave'")
        if self.probe_interval_s <= 0:
            raise ConfigError("probe_interval_s", "must be > 0")
        if not self.policies:
            raise ConfigError("policy", "at least one policy is required")
        n = self.n_workers
        if len(self.mobility) != n:
            raise ConfigError("mobility", f"expected {n} entries, got {len(self.mobility)}")
        if len(self.predictor) != n:
            raise ConfigError("predictor", f"expected {n} entries, got {len(self.predictor)}")

    @property
    def n_workers(self) -> int:
        return len(self.devices) - 1

    @property
    def policy(self) -> PolicyKind:
        return self.policies[0]

    def with_policy(self, policy: PolicyKind) -> "ExperimentConfig":
        return replace(self, policies=(policy,))


# --- parsing ----------------------------------------------------------------

def _check_keys(obj: Any, where: str, allowed: set[str], required: set[str] = frozenset()):
    if not isinstance(obj, dict):
        raise ConfigError(where, "expected an object")
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"{where}.{k}" if where else k, "unknown field")
    for k in required:
        if k not in obj:
            raise ConfigError(f"{where}.{k}" if where else k, "missing required field")


def _num(obj: dict, key: str, where: str, default=None, kind=float):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}.{key}", "missing required field")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}", f"expected a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigError(f"{where}.{key}", f"expected an integer, got {v!r}")
    return kind(v)


_PROFILE_FIELDS = {f.name for f in fields(DeviceProfile)} - {"id"}


def parse_device(obj: Any, where: str) -> DeviceProfile:
    _check_keys(obj, where, _PROFILE_FIELDS | {"preset"})
    d = dict(obj)
    if "cpu_current_mA" in d:
        try:
            d["cpu_current_mA"] = tuple((int(c), int(s), float(ma)) for c, s, ma in d["cpu_current_mA"])
        except (TypeError, ValueError):
            raise ConfigError(f"{where}.cpu_current_mA", "expected [[cluster, speed, mA], ...]") from None
    try:
        if "preset" in d:
            name = d.pop("preset")
            if name not in PRESETS:
                raise ConfigError(f"{where}.preset", f"unknown preset {name!r}; known: {sorted(PRESETS)}")
            return preset(name, **d)
        missing = {"name", "mean_service_s", "link_bandwidth_Bps", "cpu_current_mA"} - set(d)
        if missing:
            raise ConfigError(f"{where}.{sorted(missing)[0]}", "missing required field")
        return DeviceProfile(**d)
    except (ValueError, TypeError) as e:
        raise ConfigError(where, str(e)) from None


def parse_mobility(obj: Any, where: str, base_dir: Path, trace_cache: dict) -> MobilitySource:
    if obj is None or obj == "none":
        return None
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ConfigError(where, "expected {\"markov\": {...}}, {\"trace\": {...}} or null")
    (kind, body), = obj.items()
    w = f"{where}.{kind}"
    if kind == "markov":
        _check_keys(body, w, {"p_leave", "p_return", "slot_s", "initial_state"}, {"p_leave", "p_return"})
        try:
            return MarkovMobility(
                p_leave=_num(body, "p_leave", w), p_return=_num(body, "p_return", w),
                slot_s=_num(body, "slot_s", w, 10.0), initial_state=bool(body.get("initial_state", True)))
        except ValueError as e:
            raise ConfigError(w, str(e)) from None
    if kind == "trace":
        _check_keys(body, w, {"path", "device_index"}, {"path", "device_index"})
        path = Path(body["path"])
        if not path.is_absolute():
            path = base_dir / path
        key = str(path)
        if key not in trace_cache:
            trace_cache[key] = load_trace(path)
        series = trace_cache[key].series(int(body["device_index"]))
        if not series:
            raise ConfigError(w, f"trace has no rows for device {body['device_index']}")
        return tuple(series)
    raise ConfigError(where, f"unknown mobility kind {kind!r}")


def parse_predictor(obj: Any, where: str) -> MobilityPredictor:
    if isinstance(obj, str):
        obj = {obj: {}}
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ConfigError(where, "expected one of statistical / predicted / majority_vote")
    (kind, body), = obj.items()
    w = f"{where}.{kind}"
    body = body or {}
    try:
        if kind == "statistical":
            _check_keys(body, w, {"p_out"})
            return Statistical(p_out=body.get("p_out"))
        if kind == "predicted":
            _check_keys(body, w, {"error_margin"})
            e = _num(body, "error_margin", w, 0.0)
            if not 0.0 <= e <= 1.0:
                raise ConfigError(f"{w}.error_margin", "must be a probability")
            return Predicted(error_margin=e)
        if kind == "majority_vote":
            _check_keys(body, w, {"window_slots"})
            return MajorityVote(window_slots=_num(body, "window_slots", w, 11, int))
    except ValueError as e:
        raise ConfigError(w, str(e)) from None
    raise ConfigError(where, f"unknown predictor {kind!r}")


def parse_energy(obj: Any, where: str) -> EnergyModelKind:
    if isinstance(obj, str):
        obj = {obj: {}}
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ConfigError(where, "expected an energy model name")
    (kind, body), = obj.items()
    body = body or {}
    w = f"{where}.{kind}"
    if kind == "Ordinary":
        _check_keys(body, w, set())
        return Ordinary()
    if kind == "New":
        _check_keys(body, w, {"use_helper_fail_energy"})
        return New(use_helper_fail_energy=bool(body.get("use_helper_fail_energy", False)))
    if kind == "Newest":
        _check_keys(body, w, set())
        return Newest()
    if kind == "PrCompEwma":
        _check_keys(body, w, {"beta"})
        try:
            return PrCompEwma(beta=_num(body, "beta", w, 0.2))
        except ValueError as e:
            raise ConfigError(w, str(e)) from None
    raise ConfigError(where, f"unknown energy model {kind!r}")


_SIMPLE_POLICIES = {
    "NoCooperation": NoCooperation, "FullOffloading": FullOffloading,
    "ParallelBaseline": ParallelBaseline, "Arc": Arc,
}
_ESTIMATING_POLICIES = {"MaccSerial": MaccSerial, "PrCompSerial": PrCompSerial, "MaccParallel": MaccParallel}


def parse_policy(obj: Any, where: str) -> PolicyKind:
    if isinstance(obj, str):
        obj = {"name": obj}
    _check_keys(obj, where, {"name", "energy"}, {"name"})
    name = obj["name"]
    if name in _SIMPLE_POLICIES:
        if "energy" in obj:
            raise ConfigError(f"{where}.energy", f"{name} takes no energy model")
        return _SIMPLE_POLICIES[name]()
    if name in _ESTIMATING_POLICIES:
        cls = _ESTIMATING_POLICIES[name]
        if "energy" in obj:
            return cls(energy=parse_energy(obj["energy"], f"{where}.energy"))
        return cls()
    raise ConfigError(f"{where}.name", f"unknown policy {name!r}")


_TOP_FIELDS = {
    "tasks", "deadline_s", "devices", "mobility", "mobility_rest", "predictor", "policy",
    "p_model", "trials", "base_seed", "probe_interval_s", "outputs", "additional_masters",
    "trace_slot_s", "probe_fraction", "retrieve_timeout_s", "notify_latency_s", "description",
}


def parse_config(raw: dict, base_dir: Union[str, Path] = ".") -> ExperimentConfig:
    base_dir = Path(base_dir)
    _check_keys(raw, "", _TOP_FIELDS, {"tasks", "deadline_s", "devices", "policy"})

    t = raw["tasks"]
    _check_keys(t, "tasks", {"K", "payload_bytes", "result_bytes", "work_units"}, {"K", "payload_bytes"})
    K = _num(t, "K", "tasks", kind=int)
    try:
        task = TaskSpec(task_id=0, payload_bytes=_num(t, "payload_bytes", "tasks", kind=int),
                        result_bytes=_num(t, "result_bytes", "tasks", 0, int),
                        work_units=_num(t, "work_units", "tasks", 1.0))
    except ValueError as e:
        raise ConfigError("tasks", str(e)) from None

    devs = raw["devices"]
    if not isinstance(devs, list) or not devs:
        raise ConfigError("devices", "expected a non-empty list (master first)")
    devices = tuple(replace(parse_device(d, f"devices[{i}]"), id=i) for i, d in enumerate(devs))
    n = len(devices) - 1

    traces: dict = {}
    mob_raw = raw.get("mobility", [None] * n)
    if not isinstance(mob_raw, list):
        raise ConfigError("mobility", "expected a list with one entry per worker")
    mobility = [parse_mobility(m, f"mobility[{i}]", base_dir, traces) for i, m in enumerate(mob_raw)]
    rest = parse_mobility(raw.get("mobility_rest"), "mobility_rest", base_dir, traces)
    if len(mobility) > n:
        raise ConfigError("mobility", f"{len(mobility)} entries for {n} workers")
    if len(mobility) < n:
        if "mobility_rest" not in raw:
            raise ConfigError("mobility", f"{len(mobility)} entries for {n} workers and no mobility_rest")
        mobility += [rest] * (n - len(mobility))

    pred_raw = raw.get("predictor", "statistical")
    if isinstance(pred_raw, list):
        if len(pred_raw) != n:
            raise ConfigError("predictor", f"{len(pred_raw)} entries for {n} workers")
        predictor = tuple(parse_predictor(p, f"predictor[{i}]") for i, p in enumerate(pred_raw))
    else:
        predictor = (parse_predictor(pred_raw, "predictor"),) * n

    pol_raw = raw["policy"]
    if isinstance(pol_raw, list):
        policies = tuple(parse_policy(p, f"policy[{i}]") for i, p in enumerate(pol_raw))
    else:
        policies = (parse_policy(pol_raw, "policy"),)

    outputs = raw.get("outputs", {})
    _check_keys(outputs, "outputs", {"dir", "emit_event_log"})
    out_dir = Path(outputs.get("dir", "results"))

    extra = []
    for i, m in enumerate(raw.get("additional_masters", [])):
        w = f"additional_masters[{i}]"
        _check_keys(m, w, {"device", "start_s"}, {"device"})
        extra.append(AdditionalMaster(device=parse_device(m["device"], f"{w}.device"),
                                      start_s=_num(m, "start_s", w, 0.0)))

    return ExperimentConfig(
        task=task, K=K, deadline_s=_num(raw, "deadline_s", ""),
        devices=devices, mobility=tuple(mobility), predictor=predictor, policies=policies,
        p_model=raw.get("p_model", "stationary"),
        trials=_num(raw, "trials", "", 1, int),
        base_seed=_num(raw, "base_seed", "", 0, int),
        probe_interval_s=_num(raw, "probe_interval_s", "", 10.0),
        out_dir=str(out_dir),
        emit_event_log=bool(outputs.get("emit_event_log", False)),
        additional_masters=tuple(extra),
        mobility_rest=rest,
        trace_slot_s=_num(raw, "trace_slot_s", "", 10.0),
        probe_fraction=_num(raw, "probe_fraction", "", 0.005),
        retrieve_timeout_s=_num(raw, "retrieve_timeout_s", "", 10.0),
        notify_latency_s=_num(raw, "notify_latency_s", "", 0.0),
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}", e.msg) from None
    return parse_config(raw, base_dir=path.parent)
