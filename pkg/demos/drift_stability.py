"""
Living with a drifting fiber
============================

Masks are computed once and then replayed while the fiber's output modes
pick up a slow random phase walk. Small drift leaves the circuits intact;
strong drift washes them back to the uncalibrated speckle level.
"""

from dataclasses import replace

from fiberlab.bench import BenchConfig
from fiberlab.benchlab import CampaignConfig, DESettings, StabilitySettings, run_stability

base = CampaignConfig(bench=BenchConfig(n_fiber_modes=512), configurations=((2, 8),),
                      circuits_per_config=10, de=DESettings(generations=5), seed=3)

for sigma in (0.0, 0.02, 0.2):
    report = run_stability(replace(base, stability=StabilitySettings(steps=60, sigma=sigma, every=20)))
    trace = " -> ".join("%.3f" % p["fidelity_mean"] for p in report["series"])
    print("sigma %.2f: %s" % (sigma, trace))
