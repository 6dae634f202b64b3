import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kppw.charroots import bundle_dims, characteristic_poly, polyval, root_collision_lambda, roots
from kppw.errors import BracketInvalid, DegenerateLeadingCoefficient, InvalidSpec
from kppw.model import catalog_lookup


def test_classic_polynomial(classic):
    assert np.array_equal(characteristic_poly(classic, 2.0, 0), [1.0, 2.0, 1.0])
    assert np.array_equal(characteristic_poly(classic, 2.0, 1), [1.0, 2.0, -1.0])


def test_stationary_dispersion_polynomial(disp11):
    p = characteristic_poly(disp11, 0.0, 0)
    assert p[0] == -1 and p[-1] == 1 and not np.any(p[1:-1])


def test_she4_polynomial(she4):
    lam = 0.83
    assert np.allclose(characteristic_poly(she4, lam, 0), [-1, 0, 0, lam, 1])


def test_polynomial_guards(disp11):
    with pytest.raises(ValueError):
        characteristic_poly(disp11, 1.0, 2)
    with pytest.raises(InvalidSpec):
        characteristic_poly(disp11.with_n(1), 1.0, 0)


def test_double_root():
    r = roots([1.0, 2.0, 1.0])
    assert np.allclose(r, [-1, -1], atol=1e-7)


def test_roots_of_unity():
    p = np.zeros(12)
    p[0], p[-1] = 1.0, -1.0
    r = roots(p)
    expect = np.exp(2j * np.pi * np.arange(11) / 11)
    assert np.max(np.min(np.abs(r[:, None] - expect[None, :]), axis=1)) < 1e-13
    assert np.sum(r.real < 0) == 6
    assert sorted(np.nonzero(np.cos(2 * np.pi * np.arange(11) / 11) < 0)[0]) == [3, 4, 5, 6, 7, 8]


def test_vieta_product():
    r = roots([1.0, 0.0, 0.0, -1.0, -1.0])
    assert np.prod(r) == pytest.approx(-1.0, abs=1e-13)


def test_roots_guards():
    with pytest.raises(DegenerateLeadingCoefficient):
        roots([0.0, 1.0, 2.0])
    with pytest.raises(DegenerateLeadingCoefficient):
        roots([3.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=12))
def test_roots_are_roots(tail):
    p = np.array([1.0] + tail)
    r = roots(p)
    assert r.size == len(tail)
    scale = np.sum(np.abs(p)) * np.maximum(1.0, np.abs(r)) ** (p.size - 1)
    assert np.all(np.abs(polyval(p, r)) <= 1e-8 * scale)
    # conjugate symmetry is exact
    assert np.allclose(np.sort_complex(r), np.sort_complex(np.conj(r)), atol=0)


def test_bundles_classic(classic):
    b = bundle_dims(classic, 2.0)
    assert b.at0.n_minus == 2
    assert b.at1.n_plus == 1 and b.at1.n_minus == 1
    assert b.balance == 0
    assert not b.has_center


def test_bundles_stationary_dispersion(disp11):
    b = bundle_dims(disp11, 0.0)
    assert (b.at0.n_minus, b.at0.n_plus) == (6, 5)
    assert b.at1.n_plus == 6
    assert b.to_dict()["m"] == 11


def test_hyperbolic_center_modes():
    assert bundle_dims(catalog_lookup("hyperbolic", 10, 2), 1.0).has_center


def test_collision_classic(classic):
    assert root_collision_lambda(classic, 0, 1.0, 3.0) == pytest.approx(2.0, abs=1e-6)
    assert root_collision_lambda(classic, 0, 3.0, 5.0) is None


def test_collision_she4(she4):
    # -t^4 + lam t - 1 and its derivative vanish together at lam = 4 * 3^(-3/4)
    exact = 4.0 * 3.0 ** -0.75
    assert exact == pytest.approx((256 / 27) ** 0.25, rel=1e-14)
    lam = root_collision_lambda(she4, 1, 1.0, 2.5)
    assert lam == pytest.approx(exact, abs=1e-6)


def test_collision_bracket_guard(classic):
    with pytest.raises(BracketInvalid):
        root_collision_lambda(classic, 0, 3.0, 1.0)
