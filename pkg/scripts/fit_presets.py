"""Print the fitted phone presets and check them against the measured anchors."""

from dataclasses import asdict

from edgesim.calibration import Anchors, fit, presets
from edgesim.config import parse_config
from edgesim.engine import run_trial

SETUPS = (
    ("no_coop", "NoCooperation", ["nexus5", "nexus6p"]),
    ("offload_mixed", "FullOffloading", ["nexus5", "nexus6p"]),
    ("offload_6p", "FullOffloading", ["nexus6p", "nexus6p"]),
)


def main():
    a = Anchors()
    for k, v in asdict(fit(a)).items():
        print(f"{k:22s} {v:.6f}")
    for name, p in presets(a).items():
        print(name, p)
    print()
    for anchor, policy, workers in SETUPS:
        devs = [{"preset": "nexus5", "initial_delay_s": a.master_initial_delay_s, "service_jitter": 0.0}]
        devs += [{"preset": w, "service_jitter": 0.0} for w in workers]
        cfg = parse_config({"tasks": {"K": a.K, "payload_bytes": a.payload_bytes, "result_bytes": a.result_bytes},
                            "deadline_s": 600, "devices": devs, "mobility": [None] * len(workers),
                            "policy": policy})
        r = run_trial(cfg, 0)
        want_s, want_mAh = getattr(a, anchor + "_s"), getattr(a, anchor + "_mAh")
        print(f"{anchor:14s} sim {r.completion_time_s:9.3f} s {r.total_energy_mAh:8.4f} mAh"
              f"   anchor {want_s:9.3f} s {want_mAh:8.4f} mAh")


if __name__ == "__main__":
    main()
