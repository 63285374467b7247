"""
Calibrating a fiber and focusing light through it
=================================================

A multimode fiber scrambles an input beam into speckle. Once its transfer
matrix is measured by phase-stepping holography, a phase-only mask on the
SLM can send the light into one chosen detector mode.
"""

import numpy as np

from fiberlab.bench import BenchConfig, build_device
from fiberlab.calibration import measure_tm, probe_basis, probe_response, row_correlation
from fiberlab.synthesis import focus_intensities

# A single-input bench with 512 fiber modes and a 24 x 24 macro-pixel SLM.
device = build_device(BenchConfig(n_fiber_modes=512, slm_grid=24, n_inputs=1, seed=1))
port = device.ports[0]
print("macro-pixels on the port:", int(device.pixels(port).sum()))

# Probe the fiber with 128 gratings. The outer ring of the port stays flat
# and acts as the co-propagating reference for the four phase steps.
basis = probe_basis(port, device.config.slm_grid, 128)
est = measure_tm(device, port, basis)
print("estimated TM shape (detector modes x probes):", est.shape)

# The simulator can show the true probe responses, so we can check the
# estimate row by row. A global phase per row is unknown and ignored.
corr = row_correlation(est, probe_response(device, basis))
print("worst row correlation with the truth: %.6f" % corr.min())

# Back-propagate a single-mode target and compare the focus with the mean
# speckle intensity under random masks.
for mode in range(3):
    focused, baseline = focus_intensities(device, est, mode, n_random=200, rng=mode)
    print("mode %d: enhancement %.1f (phase-only law %.1f)"
          % (mode, focused / baseline, 1 + np.pi / 4 * (basis.size - 1)))
