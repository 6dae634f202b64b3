import numpy as np
import pytest
from numpy.polynomial.hermite import hermval

from kppw.bvp import Mesh, solve
from kppw.errors import SpecMismatch
from kppw.logshift import (
    RhsVariant,
    ShiftExpansion,
    _Forcing,
    assemble_B,
    build_expansion,
    expansion_residual,
    residual_slope,
    shift_function,
    solve_phi,
    solve_psi,
)

LAM0 = 0.5


@pytest.fixture(scope="module")
def B(profile_113):
    return assemble_B(profile_113, LAM0)


@pytest.fixture(scope="module")
def psi(B, profile_113):
    return solve_psi(B, profile_113)


def gaussian_states(y, center, width, m=12):
    # d^j/dy^j exp(-x^2) = (-1)^j H_j(x) exp(-x^2), x = (y - c)/w
    x = (y - center) / width
    out = np.empty((y.size, m))
    for j in range(m):
        c = np.zeros(j + 1)
        c[j] = 1.0
        out[:, j] = (-1) ** j * hermval(x, c) * np.exp(-x * x) / width**j
    return out


def test_zero_maps_to_zero(B):
    assert np.all(B.apply(np.zeros((len(B.mesh), 11))) == 0)


def test_kernel_order_under_refinement(disp113, profile_113):
    coarse = solve(disp113, LAM0, Mesh.uniform(n=1000))
    d1 = assemble_B(coarse).kernel_defect()
    d2 = assemble_B(profile_113).kernel_defect()
    assert d2 < d1 / 8  # fourth order would give 16
    h = profile_113.mesh.points[1] - profile_113.mesh.points[0]
    assert d2 < 100 * h**4


def test_far_right_reduces_to_constant_coefficients(B):
    y = B.mesh.points
    G = gaussian_states(y, 45.0, 1.5)
    D = B.apply(G[:, :11])
    nl = B.left.shape[0]
    defects = D[nl:nl + 11 * B.mesh.N].reshape(B.mesh.N, 11)
    # last row: interval average of w^(11) - lam^3 w''' - w, which vanishes for
    # the exact continuum operator only up to the forcing it represents
    mid = 0.5 * (y[:-1] + y[1:])
    Gm = gaussian_states(mid, 45.0, 1.5)
    cont = Gm[:, 11] - (LAM0**3 * Gm[:, 3] + Gm[:, 0])
    sel = (mid > 38) & (mid < 52)
    scale = np.max(np.abs(Gm[:, 11]))
    assert np.max(np.abs(defects[sel, 10] - cont[sel])) < 1e-2 * scale
    assert np.max(np.abs(defects[sel, :10])) < 1e-2 * scale


def test_homogeneous_solve_is_zero(B):
    (S,), _ = B.solve_gauged([_Forcing()])
    assert np.max(np.abs(S)) < 1e-12


def test_manufactured_second_derivative(B, profile_113):
    # differentiating the profile equation twice gives B f'' = 2 f'^2
    (S,), _ = B.solve_gauged([_Forcing((), ((1, 1, 2.0),))])
    fp, fpp = profile_113.values[:, 1], profile_113.values[:, 2]
    expect = fpp - B.inner(fpp, fp) / B.inner(fp, fp) * fp
    assert np.max(np.abs(S[:, 0] - expect)) < 1e-5 * np.max(np.abs(expect))


def test_psi_is_speed_derivative(disp113, profile_113, psi, B):
    # differentiating the profile equation in lam0: B(df/dlam0) = -3 lam0^2 f''',
    # so psi = -df/dlam0 up to the translation mode
    eps = 1e-4
    mesh = profile_113.mesh
    fa = solve(disp113, LAM0 + eps, mesh, guess=profile_113).f
    fb = solve(disp113, LAM0 - eps, mesh, guess=profile_113).f
    d = -(fa - fb) / (2 * eps)
    fp = profile_113.values[:, 1]
    d -= B.inner(d, fp) / B.inner(fp, fp) * fp
    assert np.max(np.abs(psi[:, 0] - d)) < 1e-3 * np.max(np.abs(d))


def test_psi_gauge_and_check(B, profile_113, psi):
    exp = ShiftExpansion(profile_113, 1.0, psi, solve_phi(B, profile_113, psi, 1.0))
    assert exp.check(B) == []


def test_phi_vanishes_at_zero_shift(B, profile_113, psi):
    assert np.max(np.abs(solve_phi(B, profile_113, psi, 0.0))) < 1e-12


def test_phi_quadratic_in_shift(B, profile_113, psi):
    p1 = solve_phi(B, profile_113, psi, 1.0)
    pm = solve_phi(B, profile_113, psi, -1.0)
    p2 = solve_phi(B, profile_113, psi, 2.0)
    lin, quad = 0.5 * (p1 - pm), 0.5 * (p1 + pm)
    assert np.max(np.abs(p2 - (2 * lin + 4 * quad))) < 1e-8 * np.max(np.abs(p2))


def test_phi_rejects_foreign_psi(B, profile_113, psi):
    with pytest.raises(SpecMismatch):
        solve_phi(B, profile_113, 2 * psi, 1.0)


def test_spec_guards(classic, profile_113):
    with pytest.raises(SpecMismatch):
        assemble_B(solve(classic, 2.0))
    with pytest.raises(SpecMismatch):
        assemble_B(profile_113, 0.7)


def test_shift_function():
    g = shift_function(1.5, 100.0)
    assert g[0] == pytest.approx(1.5 * np.log(100.0))
    assert abs(g[2] / g[1]) == pytest.approx(1 / 100.0)
    assert abs(g[3] / g[2]) == pytest.approx(2 / 100.0)
    with pytest.raises(ValueError):
        shift_function(1.0, 0.0)


def test_unperturbed_residual_vanishes(profile_113):
    exp = build_expansion(profile_113, k_shift=0.0, with_psi=False)
    for t in (10.0, 1e3, 1e5):
        assert expansion_residual(exp, t) == 0.0
    with pytest.raises(ValueError):
        expansion_residual(exp, 5.0)


@pytest.mark.parametrize("variant, with_psi, slope", [
    (RhsVariant.THIRD, True, -2.0),
    (RhsVariant.SECOND, True, -1.0),
    (RhsVariant.THIRD, False, -1.0),
])
def test_residual_slopes(profile_113, variant, with_psi, slope):
    exp = build_expansion(profile_113, 1.0, variant, with_psi=with_psi)
    assert residual_slope(exp) == pytest.approx(slope, abs=0.1)
    assert set(exp.to_dict()["residual_norms"]) == {"100.0", "1000.0", "10000.0"}


def test_second_order_layer_without_fprime(profile_113):
    exp = build_expansion(profile_113, 1.0, with_phi=True, include_fprime=False)
    assert residual_slope(exp) == pytest.approx(-3.0, abs=0.15)
