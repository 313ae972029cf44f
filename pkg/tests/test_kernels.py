import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ptcrystal import kernels, _pykernels
from ptcrystal.errors import NumericalError

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_backend_selected():
    assert kernels.BACKEND in kernels.available()
    assert "python" in kernels.available()
    with pytest.raises(ValueError):
        kernels.load("fortran")


@settings(max_examples=50, deadline=None)
@given(re=arrays(float, 33, elements=finite), im=arrays(float, 33, elements=finite),
       theta=arrays(float, 33, elements=st.floats(-10, 10)))
def test_apply_phase_preserves_modulus(re, im, theta):
    psi = re + 1j * im
    expect = np.abs(psi)
    for name in kernels.available():
        mod = kernels.load(name)
        work = psi.copy()
        mod.apply_phase(work, np.exp(1j * theta))
        np.testing.assert_allclose(np.abs(work), expect, rtol=1e-13, atol=1e-300)
        assert mod.max_abs(work) == pytest.approx(expect.max(), rel=1e-13)


def test_resolvent_nodes_against_dense(backend):
    rng = np.random.default_rng(3)
    diag = rng.normal(size=(20, 7)) * 5
    offsets, values = [1, -1], [0.3, 0.05]
    z = 1.5 + 0.01j
    got = backend.resolvent_nodes(diag, offsets, values, z, 4, 3)
    for j in range(20):
        h = np.diag(diag[j]).astype(complex)
        h += np.diag(np.full(6, 0.3), -1) + np.diag(np.full(6, 0.05), 1)
        want = np.linalg.inv(z * np.eye(7) - h)[4, 3]
        assert got[j] == pytest.approx(want, rel=1e-12)


def test_resolvent_nodes_singular_is_nan(backend):
    diag = np.array([[1.0, 2.0], [0.5, 3.0]])
    got = backend.resolvent_nodes(diag, [], [], 1.0 + 0j, 0, 0)
    assert np.isnan(got[0]) and got[1] == pytest.approx(2.0)


def test_dp45_against_expm(backend):
    rng = np.random.default_rng(1)
    h = rng.normal(size=(6, 6)) + 0.3j * rng.normal(size=(6, 6))
    c0 = np.eye(6, dtype=complex)[0]
    times = np.linspace(0, 2, 5)
    rec, n = backend.dp45_linear(h, c0, times, 1e-11, 1e-15)
    assert n > 0
    for t, c in zip(times, rec):
        np.testing.assert_allclose(c, sla.expm(-1j * h * t) @ c0, rtol=1e-8, atol=1e-10)


def test_backends_identical_dp45():
    if len(kernels.available()) < 2:
        pytest.skip("compiled kernels not built")
    h = np.diag([0.0, 1.0, 4.0]) + np.diag([0.2, 0.2], -1)
    c0 = np.array([1, 0, 0], dtype=complex)
    t = np.linspace(0, 5, 11)
    a, na = kernels.load("cython").dp45_linear(h, c0, t, 1e-10, 1e-14)
    b, nb = _pykernels.dp45_linear(h, c0, t, 1e-10, 1e-14)
    assert na == nb
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_dp45_nonfinite(backend):
    h = np.array([[1e308j]])
    with pytest.raises(NumericalError):
        backend.dp45_linear(h, np.array([1.0 + 0j]), np.array([0.0, 1.0]), 1e-10, 1e-14)
