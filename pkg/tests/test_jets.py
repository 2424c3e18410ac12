"""Jet arithmetic against finite-difference and closed-form oracles."""
import numpy as np
import pytest

from mhdpinn.jets import (Jet2, JetDomainError, jcos, jet_apply, jet_const,
                          jet_seed, jexp, jsin, jtanh, tanh_derivs)

SLOTS = ("val", "dx", "dy", "dt", "dxx", "dxy", "dyy")


def fd_slots(f, x, y, t, h=1e-4):
    """Central finite differences for all seven jet slots of f(x, y, t)."""
    v = f(x, y, t)
    return {
        "val": v,
        "dx": (f(x + h, y, t) - f(x - h, y, t)) / (2 * h),
        "dy": (f(x, y + h, t) - f(x, y - h, t)) / (2 * h),
        "dt": (f(x, y, t + h) - f(x, y, t - h)) / (2 * h),
        "dxx": (f(x + h, y, t) - 2 * v + f(x - h, y, t)) / h ** 2,
        "dyy": (f(x, y + h, t) - 2 * v + f(x, y - h, t)) / h ** 2,
        "dxy": (f(x + h, y + h, t) - f(x + h, y - h, t)
                - f(x - h, y + h, t) + f(x - h, y - h, t)) / (4 * h ** 2),
    }


def assert_matches_fd(jet_fn, plain_fn, x, y, t, rtol=1e-6, atol=1e-6):
    jx, jy, jt = jet_seed(x, y, t)
    jet = jet_fn(jx, jy, jt)
    ref = fd_slots(plain_fn, x, y, t)
    for name in SLOTS:
        got = np.asarray(getattr(jet, name))
        np.testing.assert_allclose(got, ref[name], rtol=rtol, atol=atol,
                                   err_msg=f"slot {name}")


def test_constant_jet_has_zero_derivatives():
    for c in (0.0, 3.5, np.pi):
        j = jet_const(c)
        assert j.val == c
        assert all(np.all(s == 0.0) for s in j.slots()[1:])


def test_seed_jets():
    jx, jy, jt = jet_seed(0.2, 0.3, 0.1)
    assert jx.val == 0.2 and jx.dx == 1.0
    assert np.all(jx.dy == 0) and np.all(jx.dxx == 0)
    assert jy.dy == 1.0 and np.all(jy.dxy == 0) and np.all(jy.dyy == 0)
    assert jt.dt == 1.0 and np.all(jt.dx == 0) and np.all(jt.dxx == 0)


def test_tanh_at_zero():
    jx, _, _ = jet_seed(0.0, 0.0, 0.0)
    j = jtanh(jx)
    assert j.val == 0.0
    assert j.dx == 1.0
    assert j.dxx == 0.0


def test_product_of_seeds():
    jx, jy, _ = jet_seed(2.0, 3.0, 0.0)
    j = jx * jy
    assert j.val == 6.0 and j.dx == 3.0 and j.dy == 2.0
    assert j.dxy == 1.0 and j.dxx == 0.0 and j.dyy == 0.0


def test_division_by_zero_is_a_domain_error():
    jx, jy, _ = jet_seed(1.0, 0.0, 0.0)
    with pytest.raises(JetDomainError):
        jx / jy


def test_jet_apply_covers_elementary_ops():
    jx, jy, _ = jet_seed(0.4, 0.7, 0.2)
    assert jet_apply("+", jx, jy).val == pytest.approx(1.1)
    assert jet_apply("-", jx, jy).val == pytest.approx(-0.3)
    assert jet_apply("*", jx, jy).val == pytest.approx(0.28)
    assert jet_apply("/", jx, jy).val == pytest.approx(0.4 / 0.7)
    assert jet_apply("tanh", jx).val == pytest.approx(np.tanh(0.4))
    assert jet_apply("sin", jx).val == pytest.approx(np.sin(0.4))
    assert jet_apply("cos", jx).val == pytest.approx(np.cos(0.4))
    assert jet_apply("exp", jx).val == pytest.approx(np.exp(0.4))
    p = jx ** 3.0
    assert p.val == pytest.approx(0.4 ** 3)
    assert p.dx == pytest.approx(3 * 0.4 ** 2)
    with pytest.raises(ValueError):
        jet_apply("no-such-op", jx)


def test_random_compositions_match_finite_differences():
    rng = np.random.default_rng(42)

    def jet_fn(jx, jy, jt):
        return jsin(jx * jy) + jexp(jt * 0.5) * jtanh(jx - jy) \
            + jcos(jy) * (jx * jx) + (jx * jy * jt)

    def plain_fn(x, y, t):
        return np.sin(x * y) + np.exp(t * 0.5) * np.tanh(x - y) \
            + np.cos(y) * x ** 2 + x * y * t

    for _ in range(100):
        x, y, t = rng.uniform(-1.5, 1.5, size=3)
        assert_matches_fd(jet_fn, plain_fn, x, y, t)


def test_quotient_composition_matches_finite_differences():
    rng = np.random.default_rng(7)
    jet_fn = lambda jx, jy, jt: (jx * jx + jet_const(1.0)) / (jexp(jy) + 2.0)
    plain_fn = lambda x, y, t: (x ** 2 + 1.0) / (np.exp(y) + 2.0)
    for _ in range(30):
        x, y, t = rng.uniform(-1.0, 1.0, size=3)
        assert_matches_fd(jet_fn, plain_fn, x, y, t)


def test_batched_jets_equal_scalar_jets():
    rng = np.random.default_rng(3)
    xs, ys, ts = rng.uniform(-1, 1, size=(3, 16))
    jx, jy, jt = jet_seed(xs, ys, ts)
    batched = jsin(jx * jy) + jtanh(jt)
    for i in range(16):
        sx, sy, st = jet_seed(xs[i], ys[i], ts[i])
        single = jsin(sx * sy) + jtanh(st)
        for name in SLOTS:
            np.testing.assert_allclose(np.asarray(getattr(batched, name))[i],
                                       getattr(single, name), rtol=1e-14)


def test_restrict_slices_array_slots_and_keeps_scalars():
    xs, ys, ts = np.ones(8), np.zeros(8), np.zeros(8)
    jx, _, _ = jet_seed(xs, ys, ts)
    sub = jx.restrict(slice(2, 5))
    assert np.asarray(sub.val).shape == (3,)
    scalarish = Jet2(np.arange(8.0), 1.0)
    sub2 = scalarish.restrict(slice(0, 4))
    assert np.asarray(sub2.val).shape == (4,)
    assert sub2.dx == 1.0


def test_tanh_derivs_values():
    x = np.linspace(-2, 2, 11)
    v, f1, f2, f3 = tanh_derivs(x, order=3)
    np.testing.assert_allclose(v, np.tanh(x), rtol=1e-15)
    np.testing.assert_allclose(f1, 1 - np.tanh(x) ** 2, rtol=1e-14)
    np.testing.assert_allclose(f2, -2 * np.tanh(x) * (1 - np.tanh(x) ** 2),
                               rtol=1e-13, atol=1e-16)
    np.testing.assert_allclose(
        f3, -2 * (1 - np.tanh(x) ** 2) * (1 - 3 * np.tanh(x) ** 2),
        rtol=1e-13, atol=1e-16)


def test_tanh_derivs_inplace_buffers_match():
    x = np.linspace(-1, 1, 64).reshape(8, 8)
    ref = tanh_derivs(x, order=3)
    bufs = [np.empty_like(x) for _ in range(4)]
    got = tanh_derivs(x.copy(), order=3, out=bufs)
    for r, g in zip(ref, got):
        np.testing.assert_array_equal(r, g)


try:
    from hypothesis import given, settings
    from hypothesis import strategies as hst

    finite = hst.floats(min_value=-3.0, max_value=3.0,
                        allow_nan=False, allow_infinity=False)

    @given(finite, finite, finite)
    @settings(max_examples=50, deadline=None)
    def test_product_rule_commutes(x, y, t):
        jx, jy, jt = jet_seed(x, y, t)
        a, b = jsin(jx) + jy, jcos(jy) * jt
        left, right = a * b, b * a
        for name in SLOTS:
            np.testing.assert_allclose(np.asarray(getattr(left, name)),
                                       np.asarray(getattr(right, name)),
                                       rtol=1e-12, atol=1e-12)

    @given(finite, finite, finite)
    @settings(max_examples=50, deadline=None)
    def test_add_sub_roundtrip(x, y, t):
        jx, jy, _ = jet_seed(x, y, t)
        back = (jx + jy) - jy
        for name in SLOTS:
            np.testing.assert_allclose(np.asarray(getattr(back, name)),
                                       np.asarray(getattr(jx, name)),
                                       rtol=1e-12, atol=1e-12)
except ImportError:  # pragma: no cover - hypothesis is a test extra
    pass
