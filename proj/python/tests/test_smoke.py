import numpy as np
import pytest

import wavefield as wf


def test_registry_lists_ten_scenarios():
    names = [name for name, _ in wf.scenarios()]
    assert len(names) == 10
    assert "bell_case1" in names


def test_free_gaussian_width():
    grid = wf.Grid(-64.0, 64.0, 1024, 0.005)
    psi = wf.evolve(grid, wf.gaussian(grid, 0.0, 2.0, 0.0), steps=400)
    x = np.array([grid.x(i) for i in range(grid.n)])
    rho = np.abs(psi) ** 2
    width = np.sqrt(np.sum(rho * x * x) * grid.dx)
    assert width == pytest.approx(wf.free_gaussian_width(2.0, 2.0), rel=1e-6)
    assert np.sum(rho) * grid.dx == pytest.approx(1.0, abs=1e-12)


def test_transfer_matrices_isometric():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u, _ = np.linalg.qr(z)
    a = np.array([0.6, 0.8j])
    b = np.array([1.0, 0.0])
    tl, tr = wf.transfer_matrices(u, a, b)
    assert np.allclose(tl.conj().T @ tl, np.eye(2), atol=1e-12)
    assert np.allclose(tr @ b, u @ np.kron(a, b), atol=1e-12)


def test_run_two_spin():
    result = wf.run_scenario("two_spin_crossing", seed=3)
    assert result["passed"]
    assert result["exit_code"] == 0
    assert result["summary"]["config"]["seed"] == "3"


def test_bad_config_raises_usage_error():
    with pytest.raises(wf.UsageError):
        wf.run_scenario("two_spin_crossing", colour="red")
