import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eqlab.analysis import verify_euler_lagrange
from eqlab.field import bump_well, energy, height, zero_potential
from eqlab.grid import DiscreteMeasure, GridError, GridSpec, make_domain, support_diameter
from eqlab.kernels import GaussianBounded, Riesz
from eqlab.solver import (SolverConfig, SolverError, frank_wolfe_minimize, height_ascent,
                          microscopic_diffusion, project_simplex)


def test_config_validation():
    with pytest.raises(SolverError):
        SolverConfig(tol=0)
    with pytest.raises(SolverError):
        SolverConfig(step="newton")
    with pytest.raises(SolverError):
        SolverConfig(init="gaussian")


def test_fully_attractive_kernel_collapses_to_a_point():
    # W = 1 - e^{-r^2}: any split of mass costs ¼W(d) > 0 against E = 0 for an atom
    g = GridSpec.centered(1, 2.0, 32)
    k = GaussianBounded(1, amplitude=-1.0, offset=1.0)
    D = make_domain("full_space", g)
    m, trace = frank_wolfe_minimize(k, zero_potential(g), D, SolverConfig(max_iters=2000))
    assert support_diameter(m) <= g.spacing * np.sqrt(g.dim)
    assert energy(k, zero_potential(g), m) <= 1e-6


def test_balayage_recovers_phi(line_instance):
    k, g, phi, U, D = line_instance
    m, trace = frank_wolfe_minimize(k, U, D, SolverConfig())
    assert trace.status == "converged"
    assert np.abs(m.weights - phi.weights).sum() <= 1e-8
    rep = verify_euler_lagrange(k, U, D, m)
    assert rep.passed
    assert abs(rep.C0) <= 1e-10


def test_frank_wolfe_without_polish_decreases_energy(line_instance):
    k, g, phi, U, D = line_instance
    m, trace = frank_wolfe_minimize(k, U, D, SolverConfig(max_iters=300, polish=False))
    obj = np.array(trace.objective)
    assert np.all(np.diff(obj) <= 1e-12)
    # the minimum value is E[phi] = -½ phi·T phi
    assert obj[-1] >= energy(k, U, phi) - 1e-12
    # the Frank-Wolfe gap bounds the suboptimality
    assert obj[-1] - energy(k, U, phi) <= trace.gap[-1] + 1e-12


def test_minimizer_on_half_line_stays_in_domain():
    g = GridSpec.centered(1, 2.0, 128)
    k = Riesz(1, -0.5)
    U = bump_well(g, 3.0, 1.0)
    D = make_domain("half_line", g, {"x0": 0.0})
    m, _ = frank_wolfe_minimize(k, U, D, SolverConfig())
    assert m.weights[~D.mask].sum() == 0
    assert verify_euler_lagrange(k, U, D, m).passed


def test_bad_initialization():
    g = GridSpec.centered(1, 1.0, 16)
    D = make_domain("half_line", g, {"x0": 0.0})
    init = DiscreteMeasure.point_mass(g, (0,))
    with pytest.raises(SolverError, match="bad initialization"):
        frank_wolfe_minimize(Riesz(1, -0.5), zero_potential(g), D, init=init)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 20), elements=st.floats(-5, 5)))
def test_project_simplex(v):
    p = project_simplex(v)
    assert abs(p.sum() - 1) <= 1e-12 and (p >= 0).all()
    np.testing.assert_allclose(project_simplex(p), p, atol=1e-12)
    # variational inequality against the vertices
    for j in range(v.size):
        q = np.zeros(v.size)
        q[j] = 1.0
        assert np.dot(v - p, q - p) <= 1e-9


def test_height_ascent_matches_minimizer_level():
    g = GridSpec.centered(1, 3.0, 128)
    k = Riesz(1, -0.5)
    U = bump_well(g, 2.0, 1.0)
    D = make_domain("full_space", g)
    m, _ = frank_wolfe_minimize(k, U, D, SolverConfig())
    C0 = verify_euler_lagrange(k, U, D, m).C0
    rho, trace = height_ascent(k, U, D, SolverConfig(max_iters=20000))
    H = height(k, U, rho, D)[0]
    assert H <= C0 + 1e-9
    assert C0 - H <= 1e-3 * (1 + abs(C0))
    rho2, _ = height_ascent(k, U, D, SolverConfig(max_iters=10), refine=True)
    assert height(k, U, rho2, D)[0] == pytest.approx(C0, abs=1e-7)


@pytest.mark.parametrize("d,b,n,half", [(1, -0.5, 128, 2.0), (2, -1.5, 40, 2.0), (3, -2.0, 20, 2.0)])
def test_microscopic_diffusion_raises_far_potential(d, b, n, half):
    g = GridSpec.centered(d, half, n)
    rng = np.random.default_rng(7)
    m = DiscreteMeasure(g, rng.dirichlet(np.ones(g.size)).reshape(g.shape))
    x = np.zeros(d)
    delta = 2.5 * g.spacing
    out, rep = microscopic_diffusion(Riesz(d, b), m, x, delta)
    assert rep.positive
    assert abs(out.mass - 1) <= 1e-12
    r = g.radii(x)
    np.testing.assert_allclose(out.weights[r >= 2 * delta], m.weights[r >= 2 * delta])


def test_microscopic_diffusion_errors():
    g = GridSpec.centered(1, 1.0, 32)
    m = DiscreteMeasure.point_mass(g, (16,))
    k = Riesz(1, -0.5)
    with pytest.raises(SolverError, match="at least 2h"):
        microscopic_diffusion(k, m, [0.0], g.spacing)
    with pytest.raises(SolverError, match="empty"):
        microscopic_diffusion(k, m, [0.8], 2 * g.spacing)
    edge = DiscreteMeasure.point_mass(g, (0,))
    with pytest.raises(GridError, match="leaves the grid"):
        microscopic_diffusion(k, edge, g.center_of((0,)), 3 * g.spacing)
