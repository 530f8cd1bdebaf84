
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laserflash.errors import InvalidParameterError, OutOfBoxError
from laserflash.pce import SQRT3, build_basis, eval_basis
from laserflash.pipeline import build_operators, forward
from laserflash.solvers import (DiscretizationParams, SurrogateBox, Thermogram, evaluate_surrogate,
                                in_gamma, plain_solve, pulse_fractions, sgfem_solve)

from conftest import copper
from oracles import latin_hypercube, relative_linf, slab_top_face


def test_discretization_validation():
    with pytest.raises(InvalidParameterError):
        DiscretizationParams(n_t=801, n_d=401)
    with pytest.raises(InvalidParameterError):
        DiscretizationParams(n_t=0, n_d=2)
    with pytest.raises(InvalidParameterError):
        DiscretizationParams(n_t=400, k=-1)
    d = DiscretizationParams(n_t=800, n_d=401)
    assert d.stride == 2
    g = copper().geometry
    assert d.tau(g) == pytest.approx(5e-5)
    t = d.measurement_times(g)
    assert len(t) == 401 and t[0] == 0.0 and t[-1] == g.T


def test_box_validation():
    with pytest.raises(InvalidParameterError):
        SurrogateBox(mu_lambda=1.0, nu_lambda=1.0, mu_I=1.0, nu_I=0.1)     # lambda < 0 at corner
    with pytest.raises(InvalidParameterError):
        SurrogateBox(mu_lambda=10.0, nu_lambda=1.0, mu_I=1.0, nu_I=1.0)    # I < 0 at corner
    with pytest.raises(InvalidParameterError):
        SurrogateBox(mu_lambda=10.0, nu_lambda=0.0, mu_I=1.0, nu_I=0.1)
    box = SurrogateBox.from_bounds(150.0, 507.0, 0.6e12, 1.8e12)
    (l0, l1), (i0, i1) = box.bounds
    assert (l0, l1) == pytest.approx((150.0, 507.0))
    assert (i0, i1) == pytest.approx((0.6e12, 1.8e12))
    assert box.zeta((SQRT3, -SQRT3)) == pytest.approx((507.0, 0.6e12))


def test_pulse_fractions():
    g = copper().geometry
    s = pulse_fractions(g, 800)
    assert np.all(s[:8] == 1.0) and np.all(s[8:] == 0.0)
    s = pulse_fractions(g, 80)          # tau = 5e-4 > t_f
    assert s[0] == pytest.approx(0.8) and np.all(s[1:] == 0.0)
    for n_t in (50, 80, 100, 400, 1600):
        assert pulse_fractions(g, n_t).sum() * g.T / n_t == pytest.approx(g.t_f, rel=1e-12)


def test_zero_intensity_is_equilibrium(small_config, small_ops):
    th = plain_solve(small_ops, small_config.material, small_config.geometry, small_config.disc,
                     350.0, 0.0)
    np.testing.assert_allclose(th.temps, small_config.material.T_a, rtol=1e-13)


def test_bad_parameters(small_config, small_ops):
    c = small_config
    for lam, I in ((0.0, 1e12), (-1.0, 1e12), (350.0, -1.0), (float("nan"), 1e12)):
        with pytest.raises(InvalidParameterError):
            plain_solve(small_ops, c.material, c.geometry, c.disc, lam, I)


def adiabatic_rise(c, I):
    g = c.geometry
    return I * g.z_f * g.t_f / (c.material.heat_capacity * g.H)


@settings(max_examples=10, deadline=None)
@given(lam=st.floats(50.0, 800.0), I=st.floats(0.0, 3e12))
def test_undershoot_bounded_on_coarse_mesh(small_config, small_ops, lam, I):
    # consistent-mass P1 elements can dip slightly below T_a on coarse meshes
    c = small_config
    th, u = plain_solve(small_ops, c.material, c.geometry, c.disc, lam, I, return_final=True)
    floor = c.material.T_a - 1e-6 - 0.05 * adiabatic_rise(c, I)
    assert th.temps.min() >= floor and u.min() >= floor


@pytest.mark.parametrize("lam", [50.0, 355.0, 800.0])
def test_maximum_principle_fine_mesh(lam):
    c = copper("discretization.h_target=4.6e-5")
    _, ops = build_operators(c)
    th, u = plain_solve(ops, c.material, c.geometry, c.disc, lam, 1.8e12, return_final=True)
    assert th.temps.min() >= c.material.T_a - 1e-6
    assert u.min() >= c.material.T_a - 1e-6


def test_insulated_slab_series():
    # kappa = 0 and a uniform profile reduce the problem to a 1D slab
    c = copper("material.kappa=0")
    th = forward(c, 350.0, 1e12)
    g, rc = c.geometry, c.material.heat_capacity
    ref = slab_top_face(th.times, g.H, g.z_f, g.t_f, 1e12, rc, 350.0 / rc, c.material.T_a)
    rise = ref[-1] - c.material.T_a
    assert np.abs(th.temps - ref).max() <= 0.02 * rise


def test_spatial_convergence():
    o = ("discretization.n_t=100", "discretization.n_d=101")
    ref = forward(copper(*o, "discretization.h_target=4.25e-5"), 355.0, 1.2e12).temps
    errors = [np.abs(forward(copper(*o, f"discretization.h_target={h}"), 355.0, 1.2e12).temps
                     - ref).max() for h in (3.4e-4, 1.7e-4, 8.5e-5)]
    assert errors[0] > errors[1] > errors[2]


def degenerate_box(mu_l, mu_I):
    return SurrogateBox(mu_lambda=mu_l, nu_lambda=1e-12 * mu_l, mu_I=mu_I, nu_I=1e-12 * mu_I)


def test_degenerate_box_reduces_to_plain(small_config, small_ops):
    c = small_config
    box = degenerate_box(330.0, 1.2e12)
    sur = sgfem_solve(small_ops, c.material, c.geometry, build_basis(3), box, c.disc)
    plain = plain_solve(small_ops, c.material, c.geometry, c.disc, 330.0, 1.2e12).temps
    np.testing.assert_allclose(sur.B[:, 0], plain, rtol=1e-8)
    assert np.abs(sur.B[:, 1:]).max() <= 1e-8 * plain.max()


def test_surrogate_structure(small_config, small_surrogate):
    B = small_surrogate.B
    assert B.shape == (small_config.disc.n_d, 28)
    assert B[0, 0] == small_config.material.T_a
    assert np.all(B[0, 1:] == 0.0)
    assert np.all(np.isfinite(B))
    assert not B.flags.writeable
    info = small_surrogate.info
    assert info["n_k"] == 28 and info["system_size"] == info["n_h"] * 28


def test_surrogate_evaluation(small_config, small_ops, small_surrogate, rng):
    sur = small_surrogate
    y, y2 = rng.uniform(-SQRT3, SQRT3, 2), rng.uniform(-SQRT3, SQRT3, 2)
    a, b = 0.3, -1.7
    lhs = sur.B @ (a * eval_basis(sur.basis, y) + b * eval_basis(sur.basis, y2))
    rhs = a * evaluate_surrogate(sur, y).temps + b * evaluate_surrogate(sur, y2).temps
    np.testing.assert_allclose(lhs, rhs, rtol=1e-13)
    for p in (y, y2, (SQRT3, -SQRT3)):
        assert evaluate_surrogate(sur, p).temps[0] == pytest.approx(small_config.material.T_a, rel=1e-15)
    with pytest.raises(OutOfBoxError):
        evaluate_surrogate(sur, (1.8, 0.0))
    # centre of the box against the plain solver
    c = small_config
    centre = evaluate_surrogate(sur, (0.0, 0.0)).temps
    plain = plain_solve(small_ops, c.material, c.geometry, c.disc, c.box.mu_lambda, c.box.mu_I).temps
    assert relative_linf(centre, plain) <= 1e-3


def test_k_convergence(small_config, small_ops):
    c = small_config
    pts = latin_hypercube(20, seed=7)
    plains = [plain_solve(small_ops, c.material, c.geometry, c.disc, *c.box.zeta(y)).temps for y in pts]
    errors = []
    for k in (1, 2, 4, 6):
        sur = sgfem_solve(small_ops, c.material, c.geometry, build_basis(k), c.box, c.disc)
        rise = [np.abs(evaluate_surrogate(sur, y).temps - p).max() / (p.max() - p[0])
                for y, p in zip(pts, plains)]
        errors.append(max(rise))
    assert all(e1 >= e2 for e1, e2 in zip(errors, errors[1:]))
    assert errors[3] <= errors[1] / 10


def test_misaligned_measurement_times(small_config, small_ops):
    c = small_config
    with pytest.raises(InvalidParameterError):
        sgfem_solve(small_ops, c.material, c.geometry, build_basis(1), c.box, c.disc,
                    measurement_times=np.linspace(0, 1, c.disc.n_d))


def test_store_steps(small_config, small_ops):
    c = small_config
    sur = sgfem_solve(small_ops, c.material, c.geometry, build_basis(2), c.box, c.disc,
                      store_steps=(0, c.disc.n_t))
    U = sur.coeffs[c.disc.n_t]
    np.testing.assert_allclose(U @ small_ops.w, sur.B[-1], rtol=1e-13)
    assert np.all(sur.coeffs[0][0] == c.material.T_a)


def test_in_gamma_and_thermogram():
    assert in_gamma((SQRT3, -SQRT3)) and not in_gamma((SQRT3 * 1.001, 0.0))
    with pytest.raises(InvalidParameterError):
        Thermogram(np.array([0.0, 0.0]), np.array([1.0, 2.0]))
    with pytest.raises(InvalidParameterError):
        Thermogram(np.array([0.0, 1.0]), np.array([1.0]))
