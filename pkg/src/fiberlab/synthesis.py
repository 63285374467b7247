"""Phase-mask synthesis: back-propagation through the estimated TM, then DE fine-tuning."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bench import PhaseMask, VirtualDevice, detect, port_pixels, port_radial
from .calibration import EstimatedTM
from .errors import DegenerateRow, InvalidParameter, InvalidShape
from .fieldcore import CircuitSpec, MeasuredCircuit
from .optimizer import DEParams, DEResult, de_maximize

MODES = ("loss-penalizing", "loss-corrected", "weighted")


@dataclass(frozen=True)
class SynthesisObjective:
    mode: str = "loss-penalizing"
    alpha: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameter(f"unknown objective mode {self.mode!r}")
        if not (0 <= self.alpha <= 1):
            raise InvalidParameter("alpha must lie in [0, 1]")

    def score(self, moduli, target_row) -> np.ndarray:
        """Objective for a batch of measured moduli rows (..., m)."""
        corrected, raw, power = row_scores(moduli, target_row)
        if self.mode == "loss-corrected":
            return corrected
        if self.mode == "loss-penalizing":
            return raw
        return self.alpha * corrected + (1 - self.alpha) * power


def row_scores(moduli, target_row):
    """(loss-corrected fidelity, raw fidelity, row power) for moduli rows (..., m)."""
    a = np.asarray(moduli, dtype=float)
    t = np.abs(np.asarray(target_row))
    t = t / np.linalg.norm(t)
    raw = a @ t
    norm = np.linalg.norm(a, axis=-1)
    corrected = np.divide(raw, norm, out=np.zeros_like(raw), where=norm > 0)
    return corrected, raw, norm ** 2


def _check_target(target_row, n_rows):
    t = np.asarray(target_row, dtype=complex).reshape(-1)
    if not np.any(t):
        raise DegenerateRow("target row is all zero")
    if len(t) > n_rows:
        raise InvalidShape(f"target needs {len(t)} detector modes, only {n_rows} available")
    return t


def conjugate_phases(est: EstimatedTM, target_row, dual: bool = True) -> np.ndarray:
    """Port-pixel phases of the phase-only back-propagated target field."""
    t = _check_target(target_row, est.entries.shape[0])
    m = len(t)
    rows = est.entries[:m]
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0):
        raise DegenerateRow("estimated TM has an all-zero row among the targets")
    # unit rows strip the unknown reference amplitude each row carries
    rows = rows / norms[:, None]
    # pin the global phase on the strongest target entry
    k = int(np.argmax(np.abs(t)))
    t = t * np.exp(-1j * np.angle(t[k]))
    v = rows.conj().T @ t
    field = est.basis.synthesize(v, dual=dual)
    return np.where(est.basis.reference, 0.0, np.mod(np.angle(field), 2 * np.pi))


def conjugate_mask(est: EstimatedTM, target_row, port=None, dual: bool = True) -> PhaseMask:
    port = est.port if port is None else port
    if port != est.port:
        raise InvalidParameter("estimated TM belongs to another port")
    basis = est.basis
    phases = np.zeros((basis.grid, basis.grid))
    phases[port_pixels(port, basis.grid, basis.aperture_radius)] = conjugate_phases(
        est, target_row, dual)
    return PhaseMask(phases, port)


def segment_labels(device: VirtualDevice, port, d: int) -> np.ndarray:
    """Assign each port pixel to one of d radial-angular segments."""
    if d < 1:
        raise InvalidParameter("need at least one segment")
    r, theta = port_radial(port, device.config.slm_grid, device.config.aperture_radius)
    rings = max(1, int(round(np.sqrt(d / 4))))
    per_ring = [d // rings] * rings
    per_ring[-1] += d - sum(per_ring)
    # equal-area rings
    ring = np.minimum((r ** 2 * rings).astype(int), rings - 1)
    frac = np.mod(theta, 2 * np.pi) / (2 * np.pi)
    labels = np.empty(len(r), dtype=int)
    offset = 0
    for k, n_sec in enumerate(per_ring):
        sel = ring == k
        labels[sel] = offset + np.minimum((frac[sel] * n_sec).astype(int), n_sec - 1)
        offset += n_sec
    return labels


def measured_moduli(device: VirtualDevice, port, pixel_phases, m: int, rng=None) -> np.ndarray:
    """Amplitude moduli on the first m detector modes, fill factor divided out."""
    intensity = detect(device, port, pixel_phases, rng)[..., :m]
    return np.sqrt(intensity / device.detector.fill_factor)


def focus_intensities(device: VirtualDevice, est: EstimatedTM, mode: int = 0,
                      n_random: int = 200, rng=None):
    """Intensity at one detector mode with the conjugate mask, and its mean over random masks.

    The ratio of the two is the single-target enhancement.
    """
    rng = np.random.default_rng(0) if rng is None else np.random.default_rng(rng)
    target = np.zeros(mode + 1, dtype=complex)
    target[mode] = 1
    port = est.port
    focused = float(detect(device, port, conjugate_phases(est, target))[mode])
    random = rng.uniform(0, 2 * np.pi, (n_random, int(device.pixels(port).sum())))
    baseline = float(np.mean(detect(device, port, random)[:, mode]))
    return focused, baseline


@dataclass
class FineTuneResult:
    mask: PhaseMask
    history: list
    initial: float
    final: float
    de: DEResult | None = None


def tuning_params(segments: int = 32, generations: int = 50, population: int | None = None,
                  seed: int = 0, **kwargs) -> DEParams:
    """DE settings for ``segments`` phase offsets, each bounded to [-pi, pi]."""
    return DEParams(bounds=((-np.pi, np.pi),) * segments, generations=generations,
                    population=population, seed=seed, **kwargs)


def fine_tune(device: VirtualDevice, mask0: PhaseMask, target_row, objective=None,
              de: DEParams | None = None, rng=None) -> FineTuneResult:
    """Differential-evolution search over per-segment phase offsets added to mask0.

    The number of segments is ``de.dim``; mask0 (zero offsets) is seeded into
    the initial population so the returned objective never falls below it.
    """
    objective = objective or SynthesisObjective()
    device.check_port(mask0.port)
    t = _check_target(target_row, device.detector.n_modes)
    m = len(t)
    port = mask0.port
    pix = device.pixels(port)
    base = mask0.phases[pix]

    def score(phases):
        return objective.score(measured_moduli(device, port, phases, m, rng), t)

    initial = float(score(base))
    if de is None or de.generations == 0:
        return FineTuneResult(mask0, [initial], initial, initial)
    labels = segment_labels(device, port, de.dim)

    def batch(offsets):
        return score(base[None, :] + offsets[:, labels])

    result = de_maximize(batch, de, x0=np.zeros(de.dim), vectorized=True)
    phases = mask0.phases.copy()
    phases[pix] = base + result.x[labels]
    return FineTuneResult(PhaseMask(phases, port), result.history, initial, result.value, result)


def row_seed(seed: int, row: int) -> int:
    return int(np.random.SeedSequence([seed, row]).generate_state(1)[0])


def implement_circuit(device: VirtualDevice, est: EstimatedTM, spec: CircuitSpec,
                      objective=None, de: DEParams | None = None, seed: int = 0,
                      return_masks: bool = False):
    """Implement each circuit row in turn through the calibrated port and measure it.

    Row i only ever sees spec row i: its DE and noise seeds derive from (seed, i).
    """
    objective = objective or SynthesisObjective()
    n, m = spec.shape
    if m > device.detector.n_modes:
        raise InvalidShape(f"circuit needs {m} outputs, detector has {device.detector.n_modes}")
    port = est.port
    pix = device.pixels(port)
    moduli = np.zeros((n, m))
    masks = []
    for i in range(n):
        rs = row_seed(seed, i)
        rng = np.random.default_rng(rs) if device.config.shot_noise is not None else None
        mask = conjugate_mask(est, spec.target[i])
        if de is not None and de.generations > 0:
            mask = fine_tune(device, mask, spec.target[i], objective,
                             replace(de, seed=rs), rng).mask
        moduli[i] = measured_moduli(device, port, mask.phases[pix], m, rng)
        masks.append(mask)
    measured = MeasuredCircuit(moduli, np.minimum(np.sum(moduli ** 2, axis=1), 1.0), {
        "objective": objective.mode, "alpha": objective.alpha, "seed": seed,
        "de": de.to_dict() if de is not None else None, "port": port.index,
        "label": spec.label})
    return (measured, masks) if return_masks else measured
