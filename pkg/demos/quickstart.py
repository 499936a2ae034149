"""Compare the beamforming policies on one desk-scale channel draw.

Run with ``python3 demos/quickstart.py [seed]``.
"""

import sys

import numpy as np

from symbiris.ao import run_ao
from symbiris.baselines import random_beamforming, random_initialization_ao, water_filling_no_ris
from symbiris.channels import LinkGeometry, generate_channels
from symbiris.sdr import run_low_complexity
from symbiris.types import SystemConfig


def main(seed=0):
    cfg = SystemConfig(K=16, R_s=5.0, gamma=1.0)
    ch = generate_channels(cfg, LinkGeometry(), np.random.default_rng(seed))

    ao, trace = run_ao(ch, cfg)
    policies = {
        "AO": ao,
        "LowComplexity": run_low_complexity(ch, cfg)[0],
        "RandomBeam": random_beamforming(ch, cfg, rng=np.random.default_rng(seed)),
        "RandomInit": random_initialization_ao(ch, cfg, rng=np.random.default_rng(seed)),
        "NoRIS": water_filling_no_ris(ch.H1, cfg),
    }
    print(f"{'policy':<14} {'power [mW]':>11} {'R_p':>7} {'R_bs':>7} {'SNR':>9}  status")
    for name, sol in policies.items():
        print(f"{name:<14} {1e3 * sol.power:11.4f} {sol.R_p:7.3f} {sol.R_bs:7.3f} "
              f"{sol.gamma_bc:9.3g}  {sol.status.value}")
    print("\nAO power per outer iteration [mW]:")
    print("  " + "  ".join(f"{1e3 * p:.5f}" for p in trace.power))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
