import cmath
import math

import numpy as np
import pytest

from fiberlab.bench import BenchConfig, build_device, pack_inputs
from fiberlab.calibration import (grating_lattice, measure_tm, phase_step_coefficient,
                                  probe_basis, probe_response, reference_field,
                                  row_correlation)
from fiberlab.errors import BasisOverflow, DegenerateRow, PortMismatch


def intensities(e_ref, e_probe):
    """Direct |E_ref + e^{i theta} E_probe|^2 at the four steps."""
    return [abs(e_ref + cmath.exp(1j * t) * e_probe) ** 2
            for t in (0, math.pi / 2, math.pi, 3 * math.pi / 2)]


def test_phase_step_examples():
    assert intensities(1, 0.5) == pytest.approx([2.25, 1.25, 0.25, 1.25])
    assert phase_step_coefficient([2.25, 1.25, 0.25, 1.25]) == pytest.approx(0.5)
    assert phase_step_coefficient([0.7] * 4) == 0
    assert phase_step_coefficient(intensities(1, 0.3j)) == pytest.approx(0.3j)


def test_phase_step_recovers_conj_ref_times_probe(rng):
    for _ in range(50):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        assert phase_step_coefficient(intensities(a, b)) == pytest.approx(np.conj(a) * b)


def test_phase_step_linear_in_probe(rng):
    a = 0.8 - 0.3j
    b1, b2 = rng.normal(size=2) + 1j * rng.normal(size=2)
    lhs = phase_step_coefficient(intensities(a, 2 * b1 - 3j * b2))
    rhs = 2 * phase_step_coefficient(intensities(a, b1)) - 3j * phase_step_coefficient(
        intensities(a, b2))
    assert lhs == pytest.approx(rhs)


def test_single_probe_is_lowest_frequency():
    basis = probe_basis(pack_inputs(1)[0], 32, 1)
    assert basis.wavevectors.tolist() == [[1, 0]]
    assert basis.periods[0] == pytest.approx(32.0)


def test_probes_distinct_direction_period():
    basis = probe_basis(pack_inputs(2)[0], 32, 100)
    pairs = {(tuple(np.round(d, 9)), round(p, 9)) for d, p in zip(basis.directions, basis.periods)}
    assert len(pairs) == 100


def test_reference_disjoint_from_modulated():
    basis = probe_basis(pack_inputs(1)[0], 32, 50)
    assert np.all(basis.phases[:, basis.reference] == 0)
    assert np.all(basis.fields()[:, basis.reference] == 0)
    frac = basis.reference.mean()
    assert 0.05 < frac < 0.15


def test_gratings_orthogonal_on_square_lattice():
    # on a full L x L support, integer-wavevector gratings are exactly orthogonal
    L = 16
    x, y = np.meshgrid(np.arange(L), np.arange(L))
    ks = [k for k in grating_lattice(L // 2 - 1)][:60]
    f = np.array([np.exp(2j * np.pi * (kx * x + ky * y) / L).ravel() for kx, ky in ks]) / L
    gram = f.conj() @ f.T
    assert np.max(np.abs(gram - np.eye(len(ks)))) < 1e-6


def test_probes_linearly_independent_on_disk():
    basis = probe_basis(pack_inputs(2)[0], 32, 128)
    assert np.linalg.matrix_rank(basis.fields()) == 128


def test_basis_overflow():
    with pytest.raises(BasisOverflow):
        probe_basis(pack_inputs(8)[0], 32, 500)


def test_noiseless_calibration_oracle(small_device):
    dev = small_device
    port = dev.ports[0]
    basis = probe_basis(port, dev.config.slm_grid, 64)
    est = measure_tm(dev, port, basis)
    truth = probe_response(dev, basis)
    assert est.shape == (dev.detector.n_modes, 64)
    assert row_correlation(est, truth).min() > 0.99
    ref = reference_field(dev, basis)
    expected = np.abs(ref)[:, None] * np.abs(truth)
    assert np.max(np.abs(np.abs(est.entries) - expected)) / np.max(expected) < 1e-6
    assert np.allclose(est.entries, ref.conj()[:, None] * truth, atol=1e-14)


def test_calibration_deterministic(small_device):
    dev = small_device
    basis = probe_basis(dev.ports[0], dev.config.slm_grid, 20)
    a = measure_tm(dev, dev.ports[0], basis)
    b = measure_tm(dev, dev.ports[0], basis)
    assert np.array_equal(a.entries, b.entries)


def test_zero_probe_column(small_device):
    dev = small_device
    basis = probe_basis(dev.ports[0], dev.config.slm_grid, 3)
    # a probe equal to the unmodulated reference (all-zero phase) carries a flat field;
    # replacing its field by zero amplitude must yield a zero column
    from dataclasses import replace
    beam = basis.beam.copy()
    beam[~basis.reference] = 0
    blind = replace(basis, beam=beam)
    dev2 = dev
    truth = probe_response(dev2, blind)
    assert np.all(truth == 0)


def test_port_mismatch(two_port_device):
    dev = two_port_device
    basis = probe_basis(dev.ports[1], 32, 5)
    with pytest.raises(PortMismatch):
        measure_tm(dev, dev.ports[0], basis)


def test_row_correlation_examples(rng):
    a = rng.normal(size=(4, 6)) + 1j * rng.normal(size=(4, 6))
    assert np.allclose(row_correlation(a, a), 1)
    assert np.allclose(row_correlation(np.array([[1, 0]]), np.array([[0, 1]])), 0)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))[:, None]
    assert np.allclose(row_correlation(a * phases, a), 1)
    with pytest.raises(DegenerateRow):
        row_correlation(np.zeros((1, 2)), np.ones((1, 2)))


def test_shot_noise_degrades_smoothly():
    medians = []
    for budget in (1e4, 1e5, 1e6, 1e7):
        rows = []
        for seed in range(10):
            dev = build_device(BenchConfig(n_fiber_modes=64, n_inputs=1, seed=seed,
                                           shot_noise=budget))
            port = dev.ports[0]
            basis = probe_basis(port, 32, 64)
            est = measure_tm(dev, port, basis, rng=np.random.default_rng(seed))
            rows.append(row_correlation(est, probe_response(dev, basis)))
        medians.append(float(np.median(np.concatenate(rows))))
    assert all(a < b for a, b in zip(medians, medians[1:]))
    assert medians[2] > 0.95 and medians[3] > 0.95
