"""Simulated SLM + multimode-fiber processor.

Pipeline for one displayed mask::

    phases --quantize--> SLM pixel field (Gaussian beam x e^{i phase})
           --port coupling (partial isometry)--> port block of fiber input modes
           --drift x TM--> fiber output modes --rank-1 projectors--> detector modes

The hidden transfer matrix is only reachable through ``oracle_*`` helpers and
``export_device(..., expose_ground_truth=True)``; those exist for tests.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import InvalidConfig, InvalidCount, InvalidParameter, PortMismatch
from .fieldcore import (FieldVector, TransferMatrix, as_rng, haar_unitary,
                        matrix_to_json, random_isometry)

SPAD_AREAS = 23
SPAD_FILL_FACTOR = 0.235


@dataclass(frozen=True)
class BenchConfig:
    n_fiber_modes: int = 512
    slm_grid: int = 32
    n_inputs: int = 2
    aperture_radius: float = 1.0
    slm_reflectivity: float = 0.95
    slm_fill_factor: float = 0.93
    fresnel_transmission: float = 0.90
    quantization_levels: int = 256
    shot_noise: float | None = None
    seed: int = 0
    detector: str = "spad"
    polarizations: int = 2
    camera_zones: int = 46
    reference_fraction: float = 0.1
    max_outputs: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_fiber_modes < 1:
            raise InvalidConfig("n_fiber_modes must be >= 1")
        if self.slm_grid < 2:
            raise InvalidConfig("slm_grid must be >= 2")
        if self.n_inputs < 1:
            raise InvalidConfig("n_inputs must be >= 1")
        if self.aperture_radius <= 0:
            raise InvalidConfig("aperture_radius must be positive")
        for name in ("slm_reflectivity", "slm_fill_factor", "fresnel_transmission"):
            t = getattr(self, name)
            if not (0 < t <= 1):
                raise InvalidConfig(f"{name} must lie in (0, 1], got {t}")
        if self.quantization_levels < 0:
            raise InvalidConfig("quantization_levels must be >= 0 (0 disables quantization)")
        if self.shot_noise is not None and self.shot_noise <= 0:
            raise InvalidConfig("shot_noise photon budget must be positive")
        if self.detector not in ("spad", "camera"):
            raise InvalidConfig(f"unknown detector kind {self.detector!r}")
        if self.polarizations not in (1, 2):
            raise InvalidConfig("polarizations must be 1 or 2")
        if self.detector == "camera" and self.camera_zones < 1:
            raise InvalidConfig("camera_zones must be >= 1")
        if not (0 < self.reference_fraction < 1):
            raise InvalidConfig("reference_fraction must lie in (0, 1)")
        if self.detector_mode_count > self.n_fiber_modes:
            raise InvalidConfig("more detector modes than fiber modes")
        if self.max_outputs is not None and self.n_inputs * self.max_outputs > self.n_fiber_modes:
            raise InvalidConfig(
                f"{self.n_inputs} inputs x {self.max_outputs} outputs exceeds "
                f"{self.n_fiber_modes} fiber modes")
        if modes_per_input(self.n_inputs, self.n_fiber_modes) < 1:
            raise InvalidConfig("too many inputs: a port would own no fiber mode")

    @property
    def detector_mode_count(self) -> int:
        per_pol = SPAD_AREAS if self.detector == "spad" else self.camera_zones
        return per_pol * self.polarizations

    @property
    def interface_transmission(self) -> float:
        return self.slm_reflectivity * self.slm_fill_factor * self.fresnel_transmission

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown bench config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class InputPort:
    index: int
    center: tuple
    waist: float


@dataclass(frozen=True, eq=False)
class PhaseMask:
    phases: np.ndarray
    port: InputPort

    def __post_init__(self):
        p = np.mod(np.asarray(self.phases, dtype=float), 2 * np.pi)
        object.__setattr__(self, "phases", p)

    @classmethod
    def flat(cls, port: InputPort, grid: int):
        return cls(np.zeros((grid, grid)), port)


@dataclass(frozen=True, eq=False)
class DetectorModel:
    kind: str
    centers: np.ndarray
    radii: np.ndarray
    polarization: np.ndarray
    fill_factor: float
    vectors: np.ndarray = field(repr=False)

    @property
    def n_modes(self) -> int:
        return len(self.centers)


def _ring_waist(n: int, radius: float) -> float:
    if n == 1:
        return radius
    s = math.sin(math.pi / n)
    return radius * s / (1 + s)


def pack_inputs(n: int, radius: float = 1.0) -> list[InputPort]:
    """Place n disjoint beam disks inside the aperture disk of the given radius."""
    if n < 1:
        raise InvalidCount(f"need at least one input, got {n}")
    waist = _ring_waist(n, radius)
    if n == 1:
        return [InputPort(0, (0.0, 0.0), waist)]
    ring = radius - waist
    return [InputPort(k, (ring * math.cos(2 * math.pi * k / n),
                          ring * math.sin(2 * math.pi * k / n)), waist)
            for k in range(n)]


def modes_per_input(n: int, n_fiber_modes: int) -> int:
    """Fiber modes reachable from one port; scales with the port's share of aperture area."""
    if n < 1:
        raise InvalidCount(f"need at least one input, got {n}")
    ratio = _ring_waist(n, 1.0)
    # small epsilon guards against floor(127.99999...) style artefacts
    return int(math.floor(n_fiber_modes * ratio ** 2 + 1e-9))


def pixel_coordinates(grid: int, radius: float = 1.0):
    """Centres of the grid x grid macro-pixels covering [-radius, radius]^2."""
    xs = ((np.arange(grid) + 0.5) / grid * 2 - 1) * radius
    return np.meshgrid(xs, xs, indexing="xy")


def port_pixels(port: InputPort, grid: int, radius: float = 1.0) -> np.ndarray:
    """Boolean grid x grid mask of macro-pixels whose centres fall in the port disk."""
    x, y = pixel_coordinates(grid, radius)
    cx, cy = port.center
    return (x - cx) ** 2 + (y - cy) ** 2 <= port.waist ** 2 * (1 + 1e-12)


def port_radial(port: InputPort, grid: int, radius: float = 1.0):
    """Normalized polar coordinates (r/waist, angle) of the port's pixels, in mask order."""
    x, y = pixel_coordinates(grid, radius)
    sel = port_pixels(port, grid, radius)
    dx = x[sel] - port.center[0]
    dy = y[sel] - port.center[1]
    return np.hypot(dx, dy) / port.waist, np.arctan2(dy, dx)


def beam_amplitude(port: InputPort, grid: int, radius: float = 1.0) -> np.ndarray:
    """Gaussian amplitude exp(-r^2/w^2) on the port pixels, normalized to unit power."""
    r, _ = port_radial(port, grid, radius)
    g = np.exp(-r ** 2)
    return g / np.linalg.norm(g)


def _detector_geometry(cfg: BenchConfig):
    per_pol = SPAD_AREAS if cfg.detector == "spad" else cfg.camera_zones
    if cfg.detector == "spad":
        # hexagonal array; circle area / hex cell area = fill factor
        pts = [(i + 0.5 * j, j * math.sqrt(3) / 2) for i in range(-4, 5) for j in range(-4, 5)]
        pts.sort(key=lambda p: (round(p[0] ** 2 + p[1] ** 2, 9), math.atan2(p[1], p[0])))
        centers = np.array(pts[:per_pol])
        r = math.sqrt(SPAD_FILL_FACTOR * math.sqrt(3) / (2 * math.pi))
        fill = SPAD_FILL_FACTOR
    else:
        side = math.ceil(math.sqrt(per_pol))
        centers = np.array([(i % side, i // side) for i in range(per_pol)], dtype=float)
        r = 0.5
        fill = 1.0
    centers = np.tile(centers, (cfg.polarizations, 1))
    pol = np.repeat(np.arange(cfg.polarizations), per_pol)
    return centers, np.full(len(centers), r), pol, fill


@dataclass(frozen=True, eq=False)
class VirtualDevice:
    config: BenchConfig
    tm: TransferMatrix
    ports: tuple
    detector: DetectorModel
    couplings: tuple = field(repr=False)
    drift_phases: np.ndarray = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def modes_per_port(self) -> int:
        return modes_per_input(self.config.n_inputs, self.config.n_fiber_modes)

    def port_block(self, port: InputPort) -> slice:
        m = self.modes_per_port
        return slice(port.index * m, (port.index + 1) * m)

    def check_port(self, port: InputPort):
        if not (0 <= port.index < len(self.ports)) or self.ports[port.index] != port:
            raise PortMismatch(f"port {port} does not belong to this device")

    def pixels(self, port: InputPort) -> np.ndarray:
        key = ("pixels", port.index)
        if key not in self._cache:
            self._cache[key] = port_pixels(port, self.config.slm_grid, self.config.aperture_radius)
        return self._cache[key]

    def beam(self, port: InputPort) -> np.ndarray:
        key = ("beam", port.index)
        if key not in self._cache:
            self._cache[key] = beam_amplitude(port, self.config.slm_grid, self.config.aperture_radius)
        return self._cache[key]

    def propagation(self) -> np.ndarray:
        """Effective fiber propagation diag(e^{i drift}) @ TM (unitary)."""
        return np.exp(1j * self.drift_phases)[:, None] * self.tm.entries

    def _fiber_map(self, port: InputPort) -> np.ndarray:
        """(N, Q) map from port pixel field to fiber output field, with interface losses."""
        key = ("fiber", port.index)
        if key not in self._cache:
            t = self.propagation()[:, self.port_block(port)]
            amp = math.sqrt(self.config.interface_transmission)
            self._cache[key] = amp * (t @ self.couplings[port.index])
        return self._cache[key]

    def response(self, port: InputPort) -> np.ndarray:
        """(K, Q) detector-field response to the port pixel field, fill factor included."""
        key = ("response", port.index)
        if key not in self._cache:
            u = self.detector.vectors
            amp = math.sqrt(self.detector.fill_factor)
            self._cache[key] = amp * (u.conj().T @ self._fiber_map(port))
        return self._cache[key]

    def quantize(self, phases):
        levels = self.config.quantization_levels
        phases = np.mod(phases, 2 * np.pi)
        if not levels:
            return phases
        step = 2 * np.pi / levels
        return np.mod(np.round(phases / step), levels) * step

    def pixel_field(self, port: InputPort, pixel_phases) -> np.ndarray:
        """SLM field on the port pixels for phases given in port-pixel order (batched on axis 0)."""
        return self.beam(port) * np.exp(1j * self.quantize(pixel_phases))


def build_device(config: BenchConfig) -> VirtualDevice:
    config.validate()
    ss = np.random.SeedSequence(config.seed)
    tm_ss, port_ss, det_ss = ss.spawn(3)
    tm = haar_unitary(config.n_fiber_modes, np.random.default_rng(tm_ss))
    tm = TransferMatrix(tm.entries, config.seed)
    ports = tuple(pack_inputs(config.n_inputs, config.aperture_radius))
    m = modes_per_input(config.n_inputs, config.n_fiber_modes)
    couplings = []
    for port, child in zip(ports, port_ss.spawn(len(ports))):
        q = int(port_pixels(port, config.slm_grid, config.aperture_radius).sum())
        if q == 0:
            raise InvalidConfig("slm_grid too coarse: a port covers no macro-pixel")
        couplings.append(random_isometry(m, q, np.random.default_rng(child)))
    centers, radii, pol, fill = _detector_geometry(config)
    k = len(centers)
    det_rng = np.random.default_rng(det_ss)
    g = det_rng.standard_normal((config.n_fiber_modes, k)) + 1j * det_rng.standard_normal(
        (config.n_fiber_modes, k))
    vectors, _ = np.linalg.qr(g)
    detector = DetectorModel(config.detector, centers, radii, pol, fill, vectors)
    return VirtualDevice(config, tm, ports, detector, tuple(couplings),
                         np.zeros(config.n_fiber_modes))


def _mask_pixels(device: VirtualDevice, mask: PhaseMask) -> np.ndarray:
    device.check_port(mask.port)
    grid = device.config.slm_grid
    if mask.phases.shape != (grid, grid):
        raise InvalidParameter(f"mask must be {grid}x{grid}, got {mask.phases.shape}")
    return mask.phases[device.pixels(mask.port)]


def detect(device: VirtualDevice, port: InputPort, pixel_phases, rng=None) -> np.ndarray:
    """Detector intensities for phases in port-pixel order; batched over leading axes."""
    device.check_port(port)
    s = device.pixel_field(port, np.asarray(pixel_phases, dtype=float))
    amps = s @ device.response(port).T
    intensity = amps.real ** 2 + amps.imag ** 2
    budget = device.config.shot_noise
    if budget is not None:
        if rng is None:
            raise InvalidParameter("shot-noise device needs an explicit rng")
        intensity = as_rng(rng).poisson(intensity * budget) / budget
    return intensity


def measure(device: VirtualDevice, mask: PhaseMask, rng=None) -> np.ndarray:
    """Detector-mode intensities (fraction of the unit incident power) for one mask."""
    return detect(device, mask.port, _mask_pixels(device, mask), rng)


def oracle_field(device: VirtualDevice, mask: PhaseMask) -> FieldVector:
    """Test-only: complex field over all fiber output modes before detection."""
    s = device.pixel_field(mask.port, _mask_pixels(device, mask))
    return FieldVector(device._fiber_map(mask.port) @ s)


def launched_power(device: VirtualDevice, mask: PhaseMask) -> float:
    """Test-only: power the mask couples into the port's guided fiber modes (before interface losses)."""
    s = device.pixel_field(mask.port, _mask_pixels(device, mask))
    a = device.couplings[mask.port.index] @ s
    return float(np.vdot(a, a).real)


def apply_drift(device: VirtualDevice, steps: int, sigma: float, rng=None) -> VirtualDevice:
    """Advance a Gaussian phase random walk on every fiber output mode."""
    if sigma < 0:
        raise InvalidParameter(f"sigma must be >= 0, got {sigma}")
    if steps < 0:
        raise InvalidParameter(f"steps must be >= 0, got {steps}")
    if sigma == 0 or steps == 0:
        return device
    rng = as_rng(rng)
    kicks = rng.normal(0.0, sigma, size=(steps, device.config.n_fiber_modes)).sum(axis=0)
    return replace(device, drift_phases=device.drift_phases + kicks, _cache={})


def export_device(device: VirtualDevice, expose_ground_truth: bool = False) -> dict:
    """JSON-ready description of the device; hidden matrices only on request."""
    cfg = device.config
    out = {
        "config": cfg.to_dict(),
        "modes_per_input": device.modes_per_port,
        "ports": [{"index": p.index, "center": list(p.center), "waist": p.waist,
                   "pixels": int(device.pixels(p).sum())} for p in device.ports],
        "detector": {"kind": device.detector.kind,
                     "fill_factor": device.detector.fill_factor,
                     "n_modes": device.detector.n_modes,
                     "centers": device.detector.centers.tolist(),
                     "radii": device.detector.radii.tolist(),
                     "polarization": device.detector.polarization.tolist()},
        "ground_truth_exposed": bool(expose_ground_truth),
    }
    if expose_ground_truth:
        warnings.warn("exporting hidden ground-truth transfer matrix (oracle mode)", stacklevel=2)
        out["ground_truth"] = {
            "tm": matrix_to_json(device.tm.entries),
            "drift_phases": device.drift_phases.tolist(),
            "couplings": [matrix_to_json(c) for c in device.couplings],
            "detector_vectors": matrix_to_json(device.detector.vectors),
        }
    return out
