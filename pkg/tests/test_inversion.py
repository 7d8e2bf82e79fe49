import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.special import eval_chebyt, eval_hermitenorm, eval_jacobi, eval_legendre, roots_legendre

from sigflow.evaluation import l2_error
from sigflow.exceptions import DepthError, DomainError, InputError
from sigflow.inversion import (
    Augmentation,
    FourierCoeffs,
    PolyCoeffs,
    augment_fourier,
    augment_ortho,
    fourier_functionals,
    invert_fourier,
    invert_ortho,
    make_family,
    ortho_functionals,
    reconstruct,
    reconstruct_values,
    taylor_weight_functionals,
)
from sigflow.tensor_algebra import SampledPath, signature
from sigflow.words import WordPoly, half_shuffle_right, shuffle


def e(*letters, c=1.0):
    return WordPoly({tuple(letters): c})


def fourier_oracle(t, x, N):
    """Trapezoid quadrature of the coefficient integrals on [0, 2pi]."""
    trap = lambda y: np.sum(0.5 * (y[..., 1:] + y[..., :-1]) * np.diff(t), axis=-1)
    out = [trap(x) / (2 * np.pi)]
    for m in range(1, N + 1):
        out += [trap(x * np.cos(m * t)) / np.pi, trap(x * np.sin(m * t)) / np.pi]
    return np.stack(out, axis=-1)


FAMILIES = [make_family("legendre"), make_family("chebyshev"), make_family("jacobi", alpha=0.5, beta=0.0),
            make_family("jacobi", alpha=1.5, beta=-0.5), make_family("hermite", t0=0.2, eps=0.3)]


# --- families ----------------------------------------------------------------

def test_family_values_match_scipy():
    t = np.linspace(-1, 1, 41)
    for n, row in enumerate(make_family("legendre").evaluate(6, t)):
        np.testing.assert_allclose(row, eval_legendre(n, t), atol=1e-12)
    for n, row in enumerate(make_family("chebyshev").evaluate(6, t)):
        np.testing.assert_allclose(row, eval_chebyt(n, t), atol=1e-12)
    for n, row in enumerate(make_family("jacobi", alpha=0.5, beta=2.0).evaluate(6, t)):
        np.testing.assert_allclose(row, eval_jacobi(n, 0.5, 2.0, t), atol=1e-10)
    H = make_family("hermite", t0=0.2, eps=0.3)
    for n, row in enumerate(H.evaluate(6, t)):
        np.testing.assert_allclose(row, eval_hermitenorm(n, (t - 0.2) / 0.3), atol=1e-9)


def test_legendre_p2_and_norms():
    L = make_family("legendre")
    assert L.evaluate(2, 1.0)[2] == pytest.approx(1.0)
    assert [L.norm(n) for n in range(4)] == pytest.approx([2 / (2 * n + 1) for n in range(4)])


@pytest.mark.parametrize("fam", FAMILIES[1:4], ids=lambda f: f.label)
def test_norms_match_quadrature(fam):
    for n in range(5):
        val, _ = integrate.quad(lambda s: fam.weight(s) * fam.evaluate(n, s)[n] ** 2, -1, 1, limit=200)
        assert fam.norm(n) == pytest.approx(val, rel=1e-7)


def test_hermite_norm_and_centre_values():
    eps = 0.3
    H = make_family("hermite", t0=0.2, eps=eps)
    for n in range(5):
        assert H.norm(n) == pytest.approx(eps * math.sqrt(2 * math.pi) * math.factorial(n))
        v = H.evaluate(n, 0.2)[n]
        expected = 0.0 if n % 2 else (-0.5) ** (n // 2) * math.factorial(n) / math.factorial(n // 2)
        assert v == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.label)
def test_recurrence_leading_coefficients_positive(fam):
    assert all(fam.A(n) > 0 for n in range(21))
    assert all(fam.norm(n) > 0 for n in range(21))


def test_bad_family_parameters():
    with pytest.raises(DomainError):
        make_family("jacobi", alpha=-1.0, beta=0.0)
    with pytest.raises(DomainError):
        make_family("hermite", eps=0.0)
    with pytest.raises(DomainError):
        make_family("laguerre")
    assert make_family("jacobi", alpha=0.0, beta=0.0).kind == "legendre"


# --- functionals -------------------------------------------------------------

def test_fourier_functional_examples():
    f0 = fourier_functionals(0)
    assert len(f0) == 1 and f0.functionals[0].isclose(e(4, 1, c=1 / (2 * np.pi)))
    f1 = fourier_functionals(1)
    b1 = half_shuffle_right(shuffle(e(4), e(2)), e(1)) * (1 / np.pi)
    assert f1.functionals[2].isclose(b1)
    for N in range(6):
        fs = fourier_functionals(N)
        assert fs.depth == N + 2
        assert max(f.max_length for f in fs.functionals) == N + 2
        assert fs.names[:1] == ["a0"] and len(fs) == 2 * N + 1


def test_legendre_functionals_by_hand():
    fs = ortho_functionals(make_family("legendre"), 2)
    l0, l1, l2 = fs.functionals
    assert l0.isclose(e(2, 1, c=0.5))
    assert l1.isclose(e(1, 2, 1, c=1.5) + e(2, 1, 1, c=1.5) + e(2, 1, c=-1.5))
    expected = (e(1, 1, 2, 1, c=7.5) + e(1, 2, 1, 1, c=7.5) + e(2, 1, 1, 1, c=7.5)
                + e(1, 2, 1, c=-7.5) + e(2, 1, 1, c=-7.5) + e(2, 1, c=2.5))
    assert l2.isclose(expected)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.label)
def test_depth_accounting(fam):
    for N in range(5):
        fs = ortho_functionals(fam, N)
        assert fs.depth == N + 2
        assert all(f.max_length <= N + 2 for f in fs.functionals)
    if fam.kind != "chebyshev":
        for M in range(3):
            ts = taylor_weight_functionals(make_family("legendre"), 3, M)
            assert ts.depth == 3 + M + 2


def test_functional_set_depth_check():
    from sigflow.inversion import FunctionalSet
    with pytest.raises(DepthError):
        FunctionalSet("x", 0, [e(1, 2, 3)], ["f"], depth=2, dim=3)


def test_trie_evaluation_matches_dense():
    rng = np.random.default_rng(0)
    t = np.sort(rng.uniform(0, 2 * np.pi, 30))
    path = SampledPath(t, np.stack([t, np.sin(t), np.cos(t) - 1, rng.normal(size=30)], 1))
    fs = fourier_functionals(2)
    np.testing.assert_allclose(fs.evaluate(path.increments()), fs.pair(signature(path, 4)), atol=1e-11)


def test_taylor_reduces_to_plain_functionals():
    fam = make_family("legendre")
    a = taylor_weight_functionals(fam, 3, 0).functionals
    b = ortho_functionals(fam, 3).functionals
    assert all(x.isclose(y) for x, y in zip(a, b))


def test_taylor_l0_general_form():
    fam = make_family("jacobi", alpha=2.0, beta=1.0)
    M = 3
    omega = fam.taylor_coefficients(M)
    np.testing.assert_allclose(omega, [0.0, 4.0, -4.0, 1.0])  # (1-t)^2(1+t) in powers of (t+1)
    l0 = taylor_weight_functionals(fam, 1, M).functionals[0]
    expected = WordPoly()
    for i in range(M + 1):
        powers = WordPoly.empty()
        for _ in range(i):
            powers = shuffle(powers, e(1))
        expected = expected + half_shuffle_right(shuffle(e(2), powers), e(1)) * float(omega[i])
    assert l0.isclose(expected * (fam.A(0) / fam.norm(0)))


# --- augmentation ------------------------------------------------------------

def test_augment_fourier_examples():
    z, _ = augment_fourier(SampledPath(np.linspace(0, 1, 9), np.zeros(9)))
    assert np.all(z.values[:, 3] == 0.0)
    assert z.values[0, 1] == 0.0 and abs(z.values[-1, 1]) < 1e-15
    t = z.times
    np.testing.assert_allclose(z.values[:, 2], np.cos(t) - 1.0)
    assert t[0] == 0.0 and t[-1] == pytest.approx(2 * np.pi)
    mid = np.cos(np.pi) - 1
    assert mid == -2.0


def test_mirror_length_and_symmetry():
    x = np.random.default_rng(1).normal(size=7)
    z, aug = augment_fourier(SampledPath(np.linspace(0, 1, 7), x), mirror=True)
    assert len(z) == 2 * 7 + 1 and aug.prepended and aug.mirror
    v = z.values[1:, 3]
    np.testing.assert_allclose(v, v[::-1])
    np.testing.assert_allclose(np.diff(z.times), np.diff(z.times)[0])


def test_prepend_only_when_needed():
    _, aug = augment_ortho(SampledPath(np.linspace(0, 1, 5), [0.0, 1, 2, 3, 4]), make_family("legendre"))
    assert not aug.prepended
    _, aug = augment_ortho(SampledPath(np.linspace(0, 1, 5), [1.0, 1, 2, 3, 4]), make_family("legendre"))
    assert aug.prepended
    assert Augmentation.from_dict(aug.to_dict()) == aug


def test_chebyshev_weight_rejected():
    p = SampledPath(np.linspace(0, 1, 10), np.linspace(0, 1, 10))
    with pytest.raises(DomainError):
        invert_ortho(p, make_family("chebyshev"), 2)
    with pytest.raises(DomainError):
        make_family("chebyshev").taylor_coefficients(2)


# --- Fourier inversion -------------------------------------------------------

def test_fourier_sine():
    t = np.linspace(0, 2 * np.pi, 10_000)
    c = invert_fourier(SampledPath(t, np.sin(t)), 3)
    np.testing.assert_allclose(c.b[0], 1.0, atol=1e-3)
    np.testing.assert_allclose(np.concatenate([[c.a0], c.a, c.b[1:]]), 0.0, atol=1e-3)


def test_fourier_mixed_polynomial():
    t = np.linspace(0, 2 * np.pi, 10_000)
    x = 2 * np.sin(t) + 0.5 * np.cos(2 * t) - 0.5
    c = invert_fourier(SampledPath(t, x), 3)
    oracle = fourier_oracle(t, x, 3)
    np.testing.assert_allclose(c.vector(), oracle, atol=1e-3)
    assert c.a0 == pytest.approx(-0.5, abs=1e-3) and c.b[0] == pytest.approx(2, abs=1e-3)
    assert c.a[1] == pytest.approx(0.5, abs=1e-3)


def test_fourier_zero_and_validation():
    c = invert_fourier(np.zeros(50), 2)
    assert np.all(c.vector() == 0.0)
    with pytest.raises(InputError):
        invert_fourier(np.zeros(0), 2)
    with pytest.raises(InputError):
        invert_fourier(np.array([0.0, np.nan, 1.0]), 1)


@given(st.integers(0, 2**31), st.floats(-3, 3))
def test_fourier_linearity(seed, c):
    rng = np.random.default_rng(seed)
    x, y = np.cumsum(rng.normal(size=(2, 40)), axis=1)
    x[0] = y[0] = 0.0
    lhs = invert_fourier(c * x + y, 3, prepend_zero=False).vector()
    rhs = c * invert_fourier(x, 3, prepend_zero=False).vector() + invert_fourier(y, 3, prepend_zero=False).vector()
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(c)) * max(1.0, np.abs(rhs).max()))


def test_fourier_reconstruction_trig_polynomial():
    t = np.linspace(0, 2 * np.pi, 10_000)
    x = np.sin(t) - 0.3 * np.sin(3 * t) + 0.2 * (np.cos(2 * t) - 1)
    rec = reconstruct(invert_fourier(SampledPath(t, x), 3), t)
    assert l2_error(SampledPath(t, x), rec) <= 1e-3


def test_fourier_error_nonincreasing_in_order():
    t = np.linspace(0, 1, 2000)
    x = np.exp(-t) * np.sin(5 * t) + t**2
    errs = [l2_error(x, reconstruct_values(invert_fourier(x, N, mirror=True, times=t), t), t)
            for N in range(1, 9)]
    assert all(b <= a + 1e-6 for a, b in zip(errs, errs[1:]))


def test_reconstruct_zero_and_domain():
    t = np.linspace(0, 1, 20)
    c = invert_fourier(np.zeros(20), 2, times=t)
    np.testing.assert_array_equal(reconstruct_values(c, t), 0.0)
    with pytest.raises(DomainError):
        reconstruct_values(c, np.array([0.0, 5.0]))
    fc = FourierCoeffs.from_vector(np.arange(5.0), c.augmentation)
    np.testing.assert_array_equal(fc.vector(), np.arange(5.0))
    assert fc.names() == ["a0", "a1", "b1", "a2", "b2"]


# --- polynomial inversion ----------------------------------------------------

def gauss_oracle(fam, t, x, N, n_nodes=200):
    s, w = roots_legendre(n_nodes)
    xs = np.interp(s, t, x)
    P = fam.evaluate(N, s)
    return np.array([np.sum(w * fam.weight(s) * xs * P[n]) / fam.norm(n) for n in range(N + 1)])


def test_legendre_linear_path():
    t = np.linspace(-1, 1, 200)
    c = invert_ortho(SampledPath(t, t + 1), make_family("legendre"), 2)
    np.testing.assert_allclose(c.alpha, [1.0, 1.0, 0.0], atol=1e-4)


def test_legendre_l0_on_path():
    from sigflow.words import pair_on_path
    t = np.linspace(-1, 1, 100)
    path = SampledPath(t, np.stack([t, t + 1], 1))
    l0 = ortho_functionals(make_family("legendre"), 0).functionals[0]
    assert pair_on_path(l0, path) == pytest.approx(1.0, abs=1e-12)


def test_ortho_zero_path():
    c = invert_ortho(np.zeros(30), make_family("jacobi", alpha=0.5, beta=0.0), 3)
    assert np.all(c.alpha == 0.0)


@pytest.mark.parametrize("fam", [make_family("legendre"), make_family("jacobi", alpha=0.5, beta=0.0)],
                         ids=lambda f: f.label)
def test_cubic_matches_gauss_oracle(fam):
    rng = np.random.default_rng(5)
    t = np.linspace(-1, 1, 4001)
    coef = rng.normal(size=4)
    x = np.polyval(coef, t) - np.polyval(coef, -1.0)
    c = invert_ortho(SampledPath(t, x), fam, 3)
    np.testing.assert_allclose(c.alpha, gauss_oracle(fam, t, x, 3), atol=1e-4)


def test_taylor_jacobi01_matches_weighted():
    fam = make_family("jacobi", alpha=0.0, beta=1.0)
    rng = np.random.default_rng(8)
    t = np.linspace(-1, 1, 3000)
    for _ in range(3):
        a = rng.normal(size=3)
        x = a[0] * np.sin(2 * t + a[1]) + a[2] * t
        x = x - x[0]
        ref = invert_ortho(SampledPath(t, x), fam, 3).alpha
        got = invert_ortho(SampledPath(t, x), fam, 3, functionals=taylor_weight_functionals(fam, 3, 1)).alpha
        np.testing.assert_allclose(got, ref, atol=1e-4)


def test_ortho_reconstruction_restores_timestamps():
    t = np.linspace(3.0, 7.0, 500)
    x = 0.5 * (t - 3.0) ** 2
    c = invert_ortho(SampledPath(t, x), make_family("legendre"), 2)
    rec = reconstruct(c, t)
    np.testing.assert_allclose(rec.values[:, 0], x, atol=1e-4)
    np.testing.assert_array_equal(rec.times, t)


def test_hermite_pointwise_reconstruction():
    t = np.linspace(0, 1, 120)
    x = np.sin(6 * t) + 0.3 * t
    fam = make_family("hermite", eps=0.05)
    c = invert_ortho(x, fam, 2, times=t)
    assert isinstance(c, PolyCoeffs) and c.alpha.shape == (120, 3)
    rec = reconstruct_values(c, t)
    leg = reconstruct_values(invert_ortho(x, make_family("legendre"), 2, times=t), t)
    assert l2_error(x, rec, t) < 0.05 * l2_error(x, leg, t)
