import math
import warnings

import numpy as np
import pytest
import scipy.fft as sfft

from conftest import KB, V0, at
from ptcrystal import _pykernels
from ptcrystal.errors import AccuracyWarning, NumericalError
from ptcrystal.packet import (
    PeakTrace,
    SpectrumProfile,
    WaveField,
    asymptotic_psi1,
    born_c1,
    born_psi1,
    init_gaussian,
    late_slope,
    order_filter,
    peak_amplitude,
    plateau_value,
    propagate,
    propagate_snapshots,
)
from ptcrystal.potential import PotentialFamily, make_pt_lattice

FREE = PotentialFamily(1.0, {}, {}, 0.0)
PLATEAU = 20 / math.sqrt(math.pi) * V0  # (pi/kB) * w/(2 sqrt(pi)) * V0 at w=80, a=1


def free_gaussian(w, k0, t, x):
    """Exact solution of i psi_t = -psi_xx from exp(-(x/w)^2 + i k0 x)."""
    s = 1 + 4j * t / w**2
    return np.exp(-((x - 2 * k0 * t) ** 2) / (w**2 * s) + 1j * k0 * x - 1j * k0**2 * t) / np.sqrt(s)


def test_init_gaussian_values():
    wf = init_gaussian(80.0)
    x = wf.x_grid
    assert wf.values[x == 0][0] == pytest.approx(1.0)
    assert abs(wf.values[x == 80.0][0]) == pytest.approx(math.exp(-1), abs=1e-15)
    assert peak_amplitude(wf) == pytest.approx(1.0)
    assert wf.dx == 0.125 and x[0] == -1024.0


def test_init_gaussian_carrier():
    wf = init_gaussian(80.0)
    k = wf.k_grid
    dk = k[1] - k[0]
    peak = k[np.argmax(np.abs(sfft.fft(wf.values)))]
    assert abs(peak - (-KB / 2)) <= dk


def test_init_gaussian_size_limits():
    init_gaussian(300.0, 2048.0, 16384)
    with pytest.raises(ValueError):
        init_gaussian(300.0, 512.0, 4096)


@pytest.mark.parametrize("w, length, points", [
    (80.0, 2048.0, 10000),   # not a power of two
    (0.5, 2048.0, 16384),    # w < 8 dx
    (600.0, 2048.0, 16384),  # w > L/4
    (16.0, 2048.0, 512),     # w < 8 dx on a coarse grid
])
def test_init_gaussian_rejects(w, length, points):
    with pytest.raises(ValueError):
        init_gaussian(w, length, points)


def test_peak_amplitude_homogeneous():
    wf = init_gaussian(80.0)
    doubled = WaveField(wf.domain_length, wf.points, 2 * wf.values)
    assert peak_amplitude(doubled) == pytest.approx(2 * peak_amplitude(wf))


def test_order_filter_single_carrier():
    wf = init_gaussian(80.0)
    np.testing.assert_allclose(order_filter(wf, 0).values, wf.values, atol=1e-10)
    assert np.abs(order_filter(wf, 1).values).max() < 1e-8


def test_order_filter_partition(runs):
    wf = init_gaussian(80.0)
    total = sum(order_filter(wf, l).values for l in range(-2, 4))
    np.testing.assert_allclose(total, wf.values, atol=1e-9)
    field, _ = runs.get(1.0)
    total = sum(order_filter(field, l).values for l in range(-2, 4))
    np.testing.assert_allclose(total, field.values, atol=1e-9)


def test_free_propagation_matches_exact_solution():
    wf = init_gaussian(80.0, 2048.0, 8192)
    out, tr = propagate(wf, FREE, None, 0.02, 2000, 50)
    exact = free_gaussian(80.0, -KB / 2, 40.0, wf.x_grid)
    np.testing.assert_allclose(out.values, exact, atol=1e-10)
    want_peak = (1 + (4 * 40.0 / 80.0**2) ** 2) ** -0.25
    assert abs(tr.values[-1] - want_peak) < 1e-6
    dens = np.abs(out.values) ** 2
    centroid = np.sum(wf.x_grid * dens) / dens.sum()
    assert abs(centroid - (-KB * 40.0)) < 1e-6


def test_hermitian_norm_short_run():
    wf = init_gaussian(40.0, 1024.0, 8192)
    out, _ = propagate(wf, make_pt_lattice(V0, 1.0, 0.0), None, 0.002, 2000, 100)
    assert abs(out.norm() / wf.norm() - 1) < 1e-12


def test_non_unitary_without_renormalisation():
    wf = init_gaussian(40.0, 1024.0, 8192)
    out, _ = propagate(wf, make_pt_lattice(V0, 1.0, 1.0), None, 0.002, 2000, 100)
    assert abs(out.norm() / wf.norm() - 1) > 1e-3


def test_strang_second_order_small_grid():
    wf = init_gaussian(40.0, 1024.0, 8192)
    f = make_pt_lattice(V0, 1.0, 1.0)
    finals = {}
    for dt in (0.008, 0.004, 0.002):
        finals[dt], _ = propagate(wf, f, None, dt, int(round(4.0 / dt)), int(round(1.0 / dt)))
    e1 = np.abs(finals[0.008].values - finals[0.004].values).max()
    e2 = np.abs(finals[0.004].values - finals[0.002].values).max()
    assert e1 / e2 == pytest.approx(4.0, abs=0.5)


def test_backends_agree(backend):
    wf = init_gaussian(40.0, 1024.0, 8192)
    f = make_pt_lattice(V0, 1.0, 1.0)
    a, ta = propagate(wf, f, None, 0.002, 200, 50, track_orders=(1,), backend=backend)
    b, tb = propagate(wf, f, None, 0.002, 200, 50, track_orders=(1,), backend=_pykernels)
    np.testing.assert_allclose(a.values, b.values, atol=1e-13)
    np.testing.assert_allclose(ta.values, tb.values, atol=1e-13)


def test_records_and_snapshots_consistent():
    wf = init_gaussian(40.0, 1024.0, 8192)
    f = make_pt_lattice(V0, 1.0, 1.0)
    whole, tw = propagate(wf, f, None, 0.002, 1000, 50, track_orders=(1,))
    fields, ts = propagate_snapshots(wf, f, [0.0, 1.0, 2.0], None, 0.002, 50, track_orders=(1,))
    np.testing.assert_allclose(ts.times, tw.times, atol=1e-12)
    np.testing.assert_allclose(ts.values, tw.values, rtol=1e-12)
    np.testing.assert_allclose(fields[-1].values, whole.values, atol=1e-12)
    assert [fl.time for fl in fields] == [0.0, 1.0, 2.0]


def test_accuracy_guard():
    with pytest.raises(ValueError):
        propagate(init_gaussian(80.0), FREE, None, 0.02, 10, 5)  # k_max^2 dt = 12.6


def test_overflow_aborts():
    grow = PotentialFamily(1.0, {}, {0: 10.0}, 1.0)  # V = 10 i
    wf = init_gaussian(40.0, 1024.0, 8192)
    with pytest.raises(NumericalError, match="exceeds"):
        propagate(wf, grow, None, 0.002, 2000, 10)


def test_wrap_detector():
    wf = init_gaussian(16.0, 256.0, 2048)
    with pytest.raises(NumericalError, match="boundary"):
        propagate(wf, FREE, None, 0.002, 12000, 50)


def test_born_amplitude_at_bragg_point():
    for t in (0.5, 5.0, 20.0):
        assert abs(born_c1(-KB / 2, t)) == pytest.approx(t, rel=1e-14)


def test_born_amplitude_closed_form():
    k = np.array([-0.6, -0.45, -0.3]) * KB
    t = 3.0
    d = KB * (2 * k + KB)
    want = -1j * np.exp(-1j * (k + KB) ** 2 * t) * (np.exp(1j * d * t) - 1) / (1j * d)
    np.testing.assert_allclose(born_c1(k, t), want, rtol=1e-12)


def test_born_vanishes_at_start():
    x = np.linspace(-200, 200, 101)
    assert np.abs(born_psi1(SpectrumProfile.bragg(80.0), 0.0, x)).max() == 0
    assert np.abs(born_psi1(SpectrumProfile.bragg(80.0), 1e-6, x)).max() < 1e-4


def test_born_matches_split_step_in_weak_lattice():
    wf = init_gaussian(80.0)
    out, tr = propagate(wf, make_pt_lattice(0.05, 1.0, 1.0), None, 0.002, 10000, 50, track_orders=(1,))
    born = 0.05 * np.abs(born_psi1(SpectrumProfile.bragg(80.0), 20.0, wf.x_grid[::2])).max()
    assert abs(born - tr.order_values[1][-1]) < 0.1 * tr.order_values[1][-1]


def test_spectrum_profile_normalised():
    prof = SpectrumProfile.bragg(80.0)
    k = np.linspace(-KB / 2 - 0.5, -KB / 2 + 0.5, 20001)
    assert np.trapezoid(prof(k), k) == pytest.approx(1.0, abs=1e-10)


def test_asymptotic_plateau_value():
    prof = SpectrumProfile.bragg(80.0)
    x = np.linspace(-1000, 1000, 4001)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AccuracyWarning)
        val = asymptotic_psi1(prof, 100.0, x)
    inside = np.abs(x) < KB * 100.0
    np.testing.assert_allclose(np.abs(val[inside]), 20 / math.sqrt(math.pi), rtol=1e-14)
    assert np.all(val[~inside] == 0)
    assert V0 * 20 / math.sqrt(math.pi) == pytest.approx(2.2568, abs=1e-4)
    assert plateau_value(80.0, V0) == pytest.approx(V0 * 20 / math.sqrt(math.pi), rel=1e-14)


def test_asymptotic_warns_early():
    prof = SpectrumProfile.bragg(80.0)
    with pytest.warns(AccuracyWarning):
        asymptotic_psi1(prof, 20.0, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", AccuracyWarning)
        asymptotic_psi1(prof, 80.0, 0.0)


def test_threshold_fringes_on_left(runs):
    field, _ = runs.get(1.0)
    x, psi = field.x_grid, field.values
    mod = np.abs(psi)
    # psi_0 sits at -kB t; where it overlaps psi_1 the modulus oscillates
    left = (x > -KB * 40 - 40) & (x < -KB * 40 + 40)
    right = (x > 40) & (x < 200)
    assert np.ptp(mod[left]) > 1.0
    assert np.ptp(mod[right]) < 0.5


def test_order1_edges(runs):
    wf = init_gaussian(80.0)
    fields, _ = propagate_snapshots(wf, make_pt_lattice(V0, 1.0, 1.0), [20.0], None, 0.002, 50)
    mod = np.abs(order_filter(fields[-1], 1).values)
    x = wf.x_grid
    inside = np.nonzero(mod >= 0.5 * mod.max())[0]
    edge = KB * 20.0
    assert abs(x[inside[0]] + edge) < 3.0
    assert abs(x[inside[-1]] - edge) < 3.0


def test_saturation(runs):
    _, tr = runs.get(1.0)
    t, p1 = tr.times, tr.order_values[1]
    win = (t >= 25 - 1e-9) & (t <= 40 + 1e-9)
    assert np.all(np.abs(p1[win] - PLATEAU) < 0.1 * PLATEAU)
    early = late_slope(t, p1, 0.0, 5.0)
    assert abs(late_slope(t, p1, 25.0, 40.0)) < 0.05 * early


def test_early_linear_growth_wide_packet(runs):
    _, tr = runs.get(1.0, w=300.0, t_end=12.0)
    slope = late_slope(tr.times, tr.values - 1, 3.0, 12.0)
    assert slope == pytest.approx(V0, rel=0.15)


def test_below_threshold_decay(runs):
    _, tr = runs.get(0.9)
    assert tr.values[-1] < tr.values.max()
    assert late_slope(tr.times, tr.values, 25.0, 40.0) < 0


def test_above_threshold_growth(runs):
    _, tr = runs.get(1.1)
    a, b, c = (at(tr.times, tr.values, t) for t in (10.0, 20.0, 40.0))
    assert a < b < c


def test_peak_trace_window():
    tr = PeakTrace(np.arange(5.0), np.arange(5.0) * 2)
    t, v = tr.window(1.0, 3.0)
    assert list(t) == [1.0, 2.0, 3.0] and list(v) == [2.0, 4.0, 6.0]
