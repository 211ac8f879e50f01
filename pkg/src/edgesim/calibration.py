"""Closed-form fit of the two phone presets to measured aggregate numbers.

The measured inputs are whole-run completion times and energies for three
setups, all with K tasks and a Nexus 5 master:

* no cooperation (every task local, after the master's initial delay),
* full offloading round-robin over one Nexus 5 and one Nexus 6P worker,
* full offloading round-robin over two Nexus 6P workers.

A task offloaded to a worker takes ``radio + service`` seconds where
``radio`` is the payload and result transfer time; the master's radio and
the worker's radio are both on for that time. The master's local service
time is stretched by the group-owner overhead whenever a worker is attached.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .core import SECONDS_PER_HOUR, DeviceProfile

CPU_PAIR = (0, 0)


@dataclass(frozen=True)
class Anchors:
    K: int = 60
    master_initial_delay_s: float = 145.0
    group_owner_overhead: float = 1.27
    payload_bytes: int = 2_000_000
    result_bytes: int = 2_000
    no_coop_s: float = 674.1425
    no_coop_mAh: float = 32.1214
    offload_mixed_s: float = 419.6430
    offload_mixed_mAh: float = 24.8485
    offload_6p_s: float = 340.9700
    offload_6p_mAh: float = 20.6334
    service_jitter: float = 0.05


@dataclass(frozen=True)
class Fit:
    local_task_s: float          # effective local time per task, overhead included
    service_5_s: float
    service_6p_s: float
    radio_s: float
    bandwidth_Bps: float
    cpu_5_mA: float
    cpu_6p_mA: float
    wifi_mA: float
    offload_5_task_s: float
    offload_6p_task_s: float
    offload_5_task_mAh: float
    offload_6p_task_mAh: float


def fit(a: Anchors = Anchors()) -> Fit:
    local_task_s = (a.no_coop_s - a.master_initial_delay_s) / a.K
    cpu_5 = a.no_coop_mAh * SECONDS_PER_HOUR / (a.K * local_task_s)
    service_5 = local_task_s / a.group_owner_overhead

    theta_6p = a.offload_6p_s / a.K
    theta_5 = 2.0 * a.offload_mixed_s / a.K - theta_6p
    radio = theta_5 - service_5
    if radio <= 0:
        raise ValueError("anchors imply a non-positive transfer time")

    e_6p = a.offload_6p_mAh / a.K * SECONDS_PER_HOUR            # mA*s per task
    e_5 = 2.0 * a.offload_mixed_mAh / a.K * SECONDS_PER_HOUR - e_6p
    # e_5 = service_5 * cpu_5 + radio * (wifi_master + wifi_worker), same phone model
    wifi = (e_5 - service_5 * cpu_5) / (2.0 * radio)
    service_6p = theta_6p - radio
    cpu_6p = (e_6p - 2.0 * radio * wifi) / service_6p
    if min(wifi, service_6p, cpu_6p) <= 0:
        raise ValueError("anchors imply non-physical device parameters")

    return Fit(
        local_task_s=local_task_s,
        service_5_s=service_5,
        service_6p_s=service_6p,
        radio_s=radio,
        bandwidth_Bps=(a.payload_bytes + a.result_bytes) / radio,
        cpu_5_mA=cpu_5,
        cpu_6p_mA=cpu_6p,
        wifi_mA=wifi,
        offload_5_task_s=theta_5,
        offload_6p_task_s=theta_6p,
        offload_5_task_mAh=e_5 / SECONDS_PER_HOUR,
        offload_6p_task_mAh=e_6p / SECONDS_PER_HOUR,
    )


def presets(a: Anchors = Anchors()) -> dict[str, DeviceProfile]:
    f = fit(a)
    common = dict(
        link_bandwidth_Bps=f.bandwidth_Bps,
        wifi_power_mA=f.wifi_mA,
        service_jitter=a.service_jitter,
        group_owner_overhead=a.group_owner_overhead,
    )
    return {
        "nexus5": DeviceProfile(
            name="nexus5", mean_service_s=f.service_5_s,
            cpu_current_mA=(CPU_PAIR + (f.cpu_5_mA,),), **common),
        "nexus6p": DeviceProfile(
            name="nexus6p", mean_service_s=f.service_6p_s,
            cpu_current_mA=(CPU_PAIR + (f.cpu_6p_mA,),), **common),
    }


PRESETS = presets()


def preset(name: str, **overrides) -> DeviceProfile:
    try:
        base = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown device preset {name!r}; known: {sorted(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base
