"""Transfer-matrix measurement by four-step phase-stepping holography.

Each probe is a phase grating displayed on the modulated part of a port
disk while an unmodulated outer ring of the same disk acts as a
co-propagating reference. Stepping the grating by a global phase and
demodulating the four detected intensities yields, for every detector mode d
and probe b, ``conj(E_ref[d]) * E_probe[d, b]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .bench import (InputPort, VirtualDevice, beam_amplitude, detect,
                    port_radial)
from .errors import BasisOverflow, DegenerateRow, InvalidParameter, InvalidShape, PortMismatch
from .fieldcore import matrix_to_json

STEPS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


@dataclass(frozen=True, eq=False)
class ProbeBasis:
    """Phase gratings restricted to the modulated region of one port disk.

    ``phases`` is (B, Q) in port-pixel order; reference pixels hold zero.
    """

    port: InputPort
    grid: int
    aperture_radius: float
    wavevectors: np.ndarray
    phases: np.ndarray
    reference: np.ndarray
    beam: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.wavevectors)

    @property
    def directions(self) -> np.ndarray:
        k = self.wavevectors.astype(float)
        return k / np.linalg.norm(k, axis=1)[:, None]

    @property
    def periods(self) -> np.ndarray:
        """Grating periods in macro-pixels."""
        return self.span / np.linalg.norm(self.wavevectors, axis=1)

    @property
    def span(self) -> float:
        """Port diameter in macro-pixels."""
        return 2 * self.port.waist * self.grid / (2 * self.aperture_radius)

    def fields(self, phases=None) -> np.ndarray:
        """Complex SLM fields (B, Q) of the probes on the modulated pixels only."""
        phases = self.phases if phases is None else phases
        return np.where(self.reference, 0, self.beam * np.exp(1j * phases))

    @cached_property
    def gram(self) -> np.ndarray:
        f = self.fields()
        return f.conj() @ f.T

    @cached_property
    def _gram_pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.gram, rcond=1e-10, hermitian=True)

    def synthesize(self, coefficients, dual: bool = True) -> np.ndarray:
        """Pixel field sum_b c_b probe_b, with c taken in the dual frame when ``dual``.

        The dual frame turns coefficients expressed as overlaps with the probes
        into the least-squares field on the probe span.
        """
        c = np.asarray(coefficients, dtype=complex)
        if dual:
            c = self._gram_pinv @ c
        return c @ self.fields()

    def describe(self) -> dict:
        return {"port": self.port.index, "size": self.size, "grid": self.grid,
                "reference_pixels": int(self.reference.sum()),
                "wavevectors": self.wavevectors.tolist()}


def grating_lattice(limit: int):
    """Nonzero integer wavevectors with |kx|, |ky| <= limit, by spatial frequency then angle."""
    ks = [(kx, ky) for kx in range(-limit, limit + 1) for ky in range(-limit, limit + 1)
          if (kx, ky) != (0, 0)]
    ks.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, math.atan2(k[1], k[0]) % (2 * math.pi)))
    return ks


def probe_basis(port: InputPort, grid: int, n_probes: int, aperture_radius: float = 1.0,
                reference_fraction: float = 0.1) -> ProbeBasis:
    """Lowest-frequency gratings on the port disk, reference ring excluded."""
    if n_probes < 0:
        raise InvalidParameter("probe count must be >= 0")
    r, _ = port_radial(port, grid, aperture_radius)
    # outer ring holding `reference_fraction` of the disk area
    reference = r ** 2 >= 1 - reference_fraction
    modulated = int((~reference).sum())
    if n_probes > modulated:
        raise BasisOverflow(f"{n_probes} probes exceed {modulated} modulated macro-pixels")
    x, y = _port_xy(port, grid, aperture_radius)
    span = 2 * port.waist
    limit = max(1, int(math.ceil(port.waist * grid / aperture_radius)))
    ks = grating_lattice(limit)[:n_probes]
    k = np.array(ks, dtype=int).reshape(-1, 2)
    phases = 2 * np.pi * (np.outer(k[:, 0], x) + np.outer(k[:, 1], y)) / span
    phases = np.where(reference, 0.0, np.mod(phases, 2 * np.pi))
    return ProbeBasis(port, grid, aperture_radius, k, phases, reference,
                      beam_amplitude(port, grid, aperture_radius))


def _port_xy(port, grid, aperture_radius):
    r, theta = port_radial(port, grid, aperture_radius)
    return r * port.waist * np.cos(theta), r * port.waist * np.sin(theta)


def phase_step_coefficient(intensities) -> complex:
    """Demodulate intensities at steps 0, pi/2, pi, 3pi/2 into conj(E_ref) E_probe.

    Works along the last axis, so stacks of measurements are accepted too.
    """
    i = np.asarray(intensities, dtype=float)
    c = (i[..., 0] - i[..., 2]) / 4 + 1j * (i[..., 3] - i[..., 1]) / 4
    return complex(c) if np.ndim(c) == 0 else c


@dataclass(frozen=True, eq=False)
class EstimatedTM:
    """Detector-modes x probes response, known up to one phase (and scale) per row."""

    entries: np.ndarray
    port: InputPort
    basis: ProbeBasis = field(repr=False)
    reference_phase_unknown: bool = True
    seed: int | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.entries)):
            raise InvalidShape("estimated TM has non-finite entries")

    @property
    def shape(self):
        return self.entries.shape

    def to_json(self) -> dict:
        return {"matrix": matrix_to_json(self.entries), "port": self.port.index,
                "basis": self.basis.describe(), "steps": len(STEPS), "seed": self.seed,
                "reference_phase_unknown": self.reference_phase_unknown}


def snap_to_levels(phases, levels: int):
    if not levels:
        return np.mod(phases, 2 * np.pi)
    step = 2 * np.pi / levels
    return np.mod(np.round(np.asarray(phases) / step), levels) * step


def measure_tm(device: VirtualDevice, port: InputPort, basis: ProbeBasis, rng=None,
               seed: int | None = None) -> EstimatedTM:
    device.check_port(port)
    if basis.port != port or basis.grid != device.config.slm_grid:
        raise PortMismatch("probe basis was built for another port or grid")
    if rng is None and device.config.shot_noise is not None:
        rng = np.random.default_rng(seed if seed is not None else device.config.seed)
    # snapping first keeps probe + step exactly on the SLM's level lattice
    probes = snap_to_levels(basis.phases, device.config.quantization_levels)
    # the estimate refers to the probes actually displayed
    basis = replace(basis, phases=probes)
    modulated = ~basis.reference
    stack = np.stack([np.where(modulated, probes + step, 0.0) for step in STEPS], axis=1)
    intensities = detect(device, port, stack, rng)          # (B, 4, K)
    coeffs = phase_step_coefficient(np.moveaxis(intensities, 1, -1))  # (B, K)
    entries = np.asarray(coeffs, dtype=complex).reshape(basis.size, -1).T
    if basis.size == 0:
        entries = np.zeros((device.detector.n_modes, 0), dtype=complex)
    return EstimatedTM(entries, port, basis, True, seed)


def probe_response(device: VirtualDevice, basis: ProbeBasis) -> np.ndarray:
    """Test-only ground truth: detector field (K, B) produced by each quantized probe alone."""
    probes = snap_to_levels(basis.phases, device.config.quantization_levels)
    return device.response(basis.port) @ basis.fields(probes).T


def reference_field(device: VirtualDevice, basis: ProbeBasis) -> np.ndarray:
    """Test-only ground truth: detector field (K,) from the unmodulated reference ring."""
    ref = np.where(basis.reference, basis.beam, 0)
    return device.response(basis.port) @ ref


def row_correlation(est, truth) -> np.ndarray:
    """|<est_d, truth_d>| / (|est_d| |truth_d|) per row; blind to a per-row phase."""
    a = np.asarray(getattr(est, "entries", est), dtype=complex)
    b = np.asarray(truth, dtype=complex)
    if a.shape != b.shape:
        raise InvalidShape(f"shape mismatch {a.shape} vs {b.shape}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise DegenerateRow("cannot correlate an all-zero row")
    return np.abs(np.sum(a.conj() * b, axis=1)) / (na * nb)
