"""
Fidelity and loss across input/output configurations
====================================================

Random unitary circuits are programmed row by row through one calibrated
input. More inputs share the same fiber, so each input reaches fewer modes,
and circuits with more outputs are harder to reproduce.
"""

from fiberlab.bench import BenchConfig
from fiberlab.benchlab import CampaignConfig, DESettings, loss_report, run_campaign

config = CampaignConfig(
    bench=BenchConfig(n_fiber_modes=512, seed=0),
    configurations=tuple((n, m) for n in (2, 4, 8) for m in (14, 26, 38)),
    circuits_per_config=5,
    de=DESettings(segments=8, generations=10, population=16),
    seed=0,
)
report = run_campaign(config)

print("statistical fidelity (rows: inputs, columns: outputs)")
for n, row in report["table"]["fidelity"].items():
    print(n, " ".join("%.3f" % row[m] for m in ("14", "26", "38")))

# Losses with all interface factors, and with an anti-reflection coating
# that removes the Fresnel factor.
for row in loss_report(report):
    print("%dx%d: %.2f dB (%.2f dB with coating)"
          % (row["n"], row["m"], row["loss_db"], row["loss_db_antireflection"]))
