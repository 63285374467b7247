"""Benchmark campaigns on the virtual bench: fidelity/loss sweeps and drift stability."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from .bench import BenchConfig, apply_drift, build_device
from .calibration import measure_tm, probe_basis
from .errors import InvalidConfig
from .fieldcore import (CircuitSpec, LossBudget, budget_total, row_overlaps,
                        statistical_fidelity, to_db)
from .synthesis import SynthesisObjective, implement_circuit, measured_moduli, tuning_params

SCHEMA_VERSION = 1
CSV_COLUMNS = ("config_n", "config_m", "circuit_index", "fidelity_corrected",
               "fidelity_raw", "row_power_mean", "loss_db", "seed")
FRESNEL = "fresnel-reflections"


@dataclass(frozen=True)
class DESettings:
    segments: int = 8
    generations: int = 15
    population: int | None = 16
    differential_weight: float = 0.8
    crossover: float = 0.9

    def params(self, seed: int = 0):
        if self.generations == 0:
            return None
        return tuning_params(self.segments, self.generations, self.population, seed,
                             differential_weight=self.differential_weight,
                             crossover=self.crossover)


@dataclass(frozen=True)
class StabilitySettings:
    steps: int = 100
    sigma: float = 0.0
    every: int = 10
    configuration: tuple | None = None
    circuits: int | None = None


@dataclass(frozen=True)
class CampaignConfig:
    bench: BenchConfig = field(default_factory=BenchConfig)
    configurations: tuple = ((2, 8),)
    circuits_per_config: int = 100
    circuit_source: str = "haar"
    circuits_file: str | None = None
    objective: str = "loss-penalizing"
    alpha: float = 0.5
    de: DESettings = field(default_factory=DESettings)
    n_probes: int | None = None
    stability: StabilitySettings | None = None
    seed: int = 0

    def __post_init__(self):
        confs = tuple((int(n), int(m)) for n, m in self.configurations)
        object.__setattr__(self, "configurations", confs)
        if self.circuits_per_config < 0:
            raise InvalidConfig("circuits_per_config must be >= 0")
        if self.circuit_source not in ("haar", "file"):
            raise InvalidConfig(f"unknown circuit source {self.circuit_source!r}")
        if self.circuit_source == "file" and not self.circuits_file:
            raise InvalidConfig("circuit_source 'file' needs circuits_file")
        SynthesisObjective(self.objective, self.alpha)
        for n, m in confs:
            if n < 1 or m < 1:
                raise InvalidConfig(f"bad configuration {n}x{m}")
            if n * m > self.bench.n_fiber_modes:
                raise InvalidConfig(
                    f"{n}x{m} violates the mode-count condition for "
                    f"{self.bench.n_fiber_modes} fiber modes")
            if m > self.bench.detector_mode_count:
                raise InvalidConfig(f"{m} outputs exceed {self.bench.detector_mode_count} detector modes")

    def to_dict(self) -> dict:
        return {
            "bench": self.bench.to_dict(),
            "configurations": [list(c) for c in self.configurations],
            "circuits_per_config": self.circuits_per_config,
            "circuit_source": self.circuit_source,
            "circuits_file": self.circuits_file,
            "objective": self.objective,
            "alpha": self.alpha,
            "de": vars(self.de).copy(),
            "n_probes": self.n_probes,
            "stability": None if self.stability is None else {
                **vars(self.stability),
                "configuration": None if self.stability.configuration is None
                else list(self.stability.configuration)},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict):
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown campaign config keys: {sorted(unknown)}")
        try:
            if "bench" in data:
                data["bench"] = BenchConfig.from_dict(data["bench"])
            if "de" in data:
                data["de"] = DESettings(**data["de"])
            if data.get("stability") is not None:
                st = dict(data["stability"])
                if st.get("configuration") is not None:
                    st["configuration"] = tuple(st["configuration"])
                data["stability"] = StabilitySettings(**st)
            return cls(**data)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from exc

    def with_seed(self, seed: int):
        return replace(self, seed=seed, bench=replace(self.bench, seed=seed))


def circuit_seed(master: int, n: int, m: int, k: int) -> int:
    return int(np.random.SeedSequence([master, n, m, k]).generate_state(1)[0])


def default_probe_count(device, basis_reference) -> int:
    """All reachable fiber modes, capped by the modulated macro-pixels."""
    return min(device.modes_per_port, int((~basis_reference).sum()))


def calibrated_device(config: CampaignConfig, n: int):
    """Build the n-input device and calibrate its first port."""
    max_m = max((m for nn, m in config.configurations if nn == n), default=None)
    bench = replace(config.bench, n_inputs=n, max_outputs=max_m)
    device = build_device(bench)
    port = device.ports[0]
    grid, radius = bench.slm_grid, bench.aperture_radius
    empty = probe_basis(port, grid, 0, radius, bench.reference_fraction)
    n_probes = config.n_probes or default_probe_count(device, empty.reference)
    basis = probe_basis(port, grid, n_probes, radius, bench.reference_fraction)
    est = measure_tm(device, port, basis, seed=bench.seed)
    return device, est


def _load_circuits(config: CampaignConfig):
    with open(config.circuits_file) as fh:
        data = json.load(fh)
    return [CircuitSpec.from_json(c) for c in data["circuits"]]


def _circuits(config: CampaignConfig, n: int, m: int):
    if config.circuit_source == "file":
        pool = [c for c in _load_circuits(config) if c.shape[1] == m]
        if not pool and config.circuits_per_config:
            raise InvalidConfig(f"{config.circuits_file} holds no circuit with {m} outputs")
        for k in range(config.circuits_per_config):
            yield k, circuit_seed(config.seed, n, m, k), pool[k % len(pool)]
        return
    for k in range(config.circuits_per_config):
        s = circuit_seed(config.seed, n, m, k)
        yield k, s, CircuitSpec.haar(m, s, label=f"haar-{n}x{m}-{k}")


def circuit_record(k, seed, spec, measured) -> dict:
    power = float(np.mean(measured.row_power))
    return {
        "circuit_index": k,
        "seed": seed,
        "fidelity_corrected": statistical_fidelity(measured, spec, normalize=True),
        "fidelity_raw": statistical_fidelity(measured, spec, normalize=False),
        "row_power_mean": power,
        "loss_db": to_db(power) if power > 0 else float("inf"),
        "row_fidelity": row_overlaps(measured, spec, True).tolist(),
        "row_power": measured.row_power.tolist(),
    }


def loss_budget(bench: BenchConfig, row_power: float) -> LossBudget:
    """Decompose a mean row power into interface factors and target-mode routing."""
    routing = row_power / bench.interface_transmission
    return LossBudget((("slm-reflectivity", bench.slm_reflectivity),
                       ("slm-fill-factor", bench.slm_fill_factor),
                       (FRESNEL, bench.fresnel_transmission),
                       ("mode-routing", min(max(routing, 1e-300), 1.0))))


def _summary(n, m, bench, records) -> dict:
    out = {"n": n, "m": m, "n_circuits": len(records), "circuits": records}
    if not records:
        out.update(fidelity_mean=None, fidelity_std=None, fidelity_raw_mean=None,
                   loss_db_mean=None, loss_db_std=None, row_power_mean=None, loss_budget=None)
        return out
    fid = np.array([r["fidelity_corrected"] for r in records])
    raw = np.array([r["fidelity_raw"] for r in records])
    loss = np.array([r["loss_db"] for r in records])
    power = np.array([r["row_power_mean"] for r in records])
    budget = loss_budget(bench, float(np.mean(power)))
    total, db = budget_total(budget)
    out.update(fidelity_mean=float(np.mean(fid)), fidelity_std=float(np.std(fid)),
               fidelity_raw_mean=float(np.mean(raw)),
               loss_db_mean=float(np.mean(loss)), loss_db_std=float(np.std(loss)),
               row_power_mean=float(np.mean(power)),
               loss_budget={"factors": budget.as_dict(), "transmission": total, "db": db})
    return out


def _implement_configuration(config, device, est, n, m, keep_masks=False):
    objective = SynthesisObjective(config.objective, config.alpha)
    records, masks, specs = [], [], []
    for k, seed, spec in _circuits(config, n, m):
        measured, row_masks = implement_circuit(device, est, spec, objective,
                                                config.de.params(seed), seed,
                                                return_masks=True)
        records.append(circuit_record(k, seed, spec, measured))
        if keep_masks:
            masks.append(row_masks)
            specs.append(spec)
    return records, masks, specs


def _provenance(config: CampaignConfig) -> dict:
    return {"master_seed": config.seed, "bench_seed": config.bench.seed,
            "fiberlab_version": __version__, "numpy_version": np.__version__,
            "circuit_seeds": "SeedSequence([master, n, m, circuit_index])",
            "row_seeds": "SeedSequence([circuit_seed, row])"}


def run_campaign(config: CampaignConfig) -> dict:
    """Implement circuits_per_config circuits for every (n, m) and aggregate the statistics."""
    results = []
    devices = {}
    for n, m in config.configurations:
        if config.circuits_per_config == 0:
            results.append(_summary(n, m, config.bench, []))
            continue
        if n not in devices:
            devices[n] = calibrated_device(config, n)
        device, est = devices[n]
        records, _, _ = _implement_configuration(config, device, est, n, m)
        results.append(_summary(n, m, replace(config.bench, n_inputs=n), records))
    table = {"fidelity": {}, "loss_db": {}}
    for r in results:
        table["fidelity"].setdefault(str(r["n"]), {})[str(r["m"])] = r["fidelity_mean"]
        table["loss_db"].setdefault(str(r["n"]), {})[str(r["m"])] = r["loss_db_mean"]
    return {"schema_version": SCHEMA_VERSION, "kind": "campaign", "config": config.to_dict(),
            "configurations": results, "table": table, "provenance": _provenance(config)}


def run_stability(config: CampaignConfig) -> dict:
    """Calibrate once, store masks, then alternate drift and re-measurement without re-synthesis."""
    st = config.stability
    if st is None:
        raise InvalidConfig("stability section missing from config")
    if st.steps < 0 or st.every < 1 or st.sigma < 0:
        raise InvalidConfig("stability needs steps >= 0, every >= 1, sigma >= 0")
    n, m = st.configuration or config.configurations[0]
    if st.circuits is not None:
        config = replace(config, circuits_per_config=st.circuits)
    device, est = calibrated_device(replace(config, configurations=((n, m),)), n)
    records, masks, specs = _implement_configuration(config, device, est, n, m, keep_masks=True)
    port = est.port
    pix = device.pixels(port)
    drift_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xD81F7]))

    def evaluate(dev):
        fid, power = [], []
        for row_masks, spec in zip(masks, specs):
            # row by row, exactly as implement_circuit measures, so sigma = 0 is bit-identical
            moduli = np.array([measured_moduli(dev, port, mk.phases[pix], m) for mk in row_masks])
            fid.append(statistical_fidelity(moduli, spec, True))
            power.append(float(np.mean(np.minimum(np.sum(moduli ** 2, axis=1), 1.0))))
        return fid, power

    def point(step, fid, power):
        return {"step": step,
                "fidelity_mean": float(np.mean(fid)) if fid else None,
                "fidelity_std": float(np.std(fid)) if fid else None,
                "coupling_mean": float(np.mean(power)) if power else None,
                "coupling_std": float(np.std(power)) if power else None}

    fid0, power0 = evaluate(device)
    series = [point(0, fid0, power0)]
    for step in range(1, st.steps + 1):
        device = apply_drift(device, 1, st.sigma, drift_rng)
        if step % st.every == 0 or step == st.steps:
            series.append(point(step, *evaluate(device)))
    return {"schema_version": SCHEMA_VERSION, "kind": "stability", "config": config.to_dict(),
            "configuration": [n, m], "initial_circuits": records, "series": series,
            "provenance": _provenance(config)}


def loss_report(report: dict) -> list[dict]:
    """Per configuration: loss with all factors and with the Fresnel factor removed."""
    rows = []
    for r in report["configurations"]:
        if r.get("loss_budget") is None:
            continue
        budget = LossBudget(tuple(r["loss_budget"]["factors"].items()))
        _, db = budget_total(budget)
        _, db_ar = budget_total(budget.without(FRESNEL))
        rows.append({"n": r["n"], "m": r["m"], "loss_db": db, "loss_db_antireflection": db_ar,
                     "difference_db": db - db_ar})
    return rows


def circuits_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report["configurations"]:
        for c in r["circuits"]:
            w.writerow([r["n"], r["m"], c["circuit_index"], repr(c["fidelity_corrected"]),
                        repr(c["fidelity_raw"]), repr(c["row_power_mean"]), repr(c["loss_db"]),
                        c["seed"]])
    return buf.getvalue()


def stability_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ("step", "fidelity_mean", "fidelity_std", "coupling_mean", "coupling_std")
    w.writerow(cols)
    for p in report["series"]:
        w.writerow([p["step"]] + [repr(p[c]) for c in cols[1:]])
    return buf.getvalue()


def dumps(report) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
