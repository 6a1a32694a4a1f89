import math

import numpy as np
import pytest
from scipy import signal
from scipy.linalg import expm, solve_continuous_lyapunov

from conftest import bistable_point, response_params, squeezing_point
from nanomass.errors import NotBistable, UnstableBranch
from nanomass.model import Drive, ResonatorParams, UnitSystem, coth_factor, zero_point_length
from nanomass.response import integrated_spectrum, ring_down_time, spectral_density
from nanomass.dynamics import (
    GridSpec,
    UNRESOLVED,
    basin_map,
    default_window,
    estimate_spectrum_mc,
    flow_rhs,
    frequency_sweep,
    integrate_displacement,
    integrate_flow,
    polyline_distance,
    quadrature,
    quadrature_variance,
    saddle_eigenvectors,
    separatrix,
    simulate_ensemble,
    simulate_langevin,
    steady_amplitude,
)
from nanomass.steady_state import linearize, solve_energy


def branches_at(params, drive):
    return solve_energy(params, drive)


# Exact linear-response statistics of dz/dt = -M z + noise, z = (Re c, Im c).
# The complex noise has <F F*> = W' coth, i.e. W' coth / 2 per real component.


def readout(phi):
    return 2.0 * np.array([math.cos(phi), -math.sin(phi)])


def lyapunov_variance(lin, params, phi):
    q = 0.5 * lin.w.real * coth_factor(params) * np.eye(2)
    sigma = solve_continuous_lyapunov(lin.matrix(), q)
    a = readout(phi)
    return float(a @ sigma @ a)


def expected_welch(lin, params, phi, sample_dt, nperseg):
    """Mean of the Hann-window Welch estimator for the exact sampled process.

    Built from the autocovariance R(k D) = a^T exp(-M k D) Sigma a, so window
    leakage and aliasing are included and only the integrator error remains.
    """
    m = lin.matrix()
    q = 0.5 * lin.w.real * coth_factor(params) * np.eye(2)
    cov = solve_continuous_lyapunov(m, q)
    a = readout(phi)
    step = expm(-m * sample_dt)
    r = np.empty(nperseg)
    for k in range(nperseg):
        r[k] = a @ cov @ a
        cov = step @ cov
    w = signal.get_window("hann", nperseg)
    lag_w = np.array([np.dot(w[: nperseg - k], w[k:]) for k in range(nperseg)])
    lags = np.arange(-(nperseg - 1), nperseg)
    rr = np.concatenate([r[:0:-1], r]) * np.concatenate([lag_w[:0:-1], lag_w])
    omega = 2 * math.pi * np.fft.fftshift(np.fft.fftfreq(nperseg, sample_dt))
    vals = np.cos(np.outer(omega, lags * sample_dt)) @ rr * sample_dt / np.sum(w**2)
    return omega, vals


def test_flow_rhs_fixed_points(params):
    _, drive = bistable_point()
    for b in branches_at(params, drive):
        assert abs(flow_rhs(b.c_m, params, drive)) < 1e-9


def test_flow_rhs_linear_decay():
    p = ResonatorParams(1.0, 0.02, 0.0, 0.0, 0.5, 1.0, UnitSystem.DIMENSIONLESS)
    d = Drive(1.03, 0.0)
    c = 0.3 - 0.7j
    assert flow_rhs(c, p, d) == pytest.approx(-complex(0.02, -0.03) * c, rel=1e-14)


def test_flow_jacobian_matches_linearization(params):
    _, drive = bistable_point()
    for b in branches_at(params, drive):
        lin = linearize(b, params, drive)
        h = 1e-6 * max(1.0, abs(b.c_m))
        jac = np.empty((2, 2))
        for j, dz in enumerate((h, 1j * h)):
            d = (flow_rhs(b.c_m + dz, params, drive) - flow_rhs(b.c_m - dz, params, drive)) / (2 * h)
            jac[:, j] = d.real, d.imag
        assert np.allclose(jac, -lin.matrix(), atol=1e-6)


def test_flow_stays_at_attractor(params):
    _, drive = bistable_point()
    b = branches_at(params, drive)[0]
    traj = integrate_flow(b.c_m, params, drive, t_max=100.0)
    assert traj.attractor == 1
    assert np.all(np.abs(traj.c_values - b.c_m) < 1e-8)


def test_flow_from_saddle_unstable_direction(params):
    _, drive = bistable_point()
    c1, c2, c3 = branches_at(params, drive)
    (rate_u, dir_u), _ = saddle_eigenvectors(c2, params, drive)
    ends = set()
    for sign in (1, -1):
        traj = integrate_flow(c2.c_m + sign * 1e-6 * dir_u, params, drive, t_max=2e4)
        assert traj.attractor in (1, 3)
        ends.add(traj.attractor)
        assert np.max(np.abs(traj.c_values) ** 2) < 2 * c3.energy
    assert ends == {1, 3}


def test_flow_along_stable_direction_returns_near_saddle(params):
    _, drive = bistable_point()
    c2 = branches_at(params, drive)[1]
    (rate_u, _), (rate_s, dir_s) = saddle_eigenvectors(c2, params, drive)
    eps = 1e-6
    traj = integrate_flow(c2.c_m - eps * dir_s, params, drive, t_max=2.0 / abs(rate_s), capture_tol=0.0)
    dist = np.abs(traj.c_values - c2.c_m)
    # Short times: the deviation shrinks at the stable rate before the unstable one takes over.
    assert dist.min() < 0.5 * eps


def test_noiseless_decay_rate(params):
    d = Drive(1.02, 5e-3)
    (b,) = branches_at(params, d)
    lin = linearize(b, params, d)
    traj = integrate_flow(b.c_m + 1e-3, params, d, t_max=40 * ring_down_time(lin), capture_tol=0.0)
    t, dev = traj.times, np.abs(traj.c_values - b.c_m)
    late = (t > 10 * ring_down_time(lin)) & (dev > 1e-12)
    # Oscillating decay: fit the upper envelope through local maxima.
    idx = np.nonzero(late)[0]
    peaks = idx[1:-1][(dev[idx][1:-1] >= dev[idx][:-2]) & (dev[idx][1:-1] >= dev[idx][2:])]
    use = peaks if peaks.size > 3 else idx
    slope = np.polyfit(t[use], np.log(dev[use]), 1)[0]
    expected = min(lin.lambda0.real, lin.lambda1.real)
    assert -slope == pytest.approx(expected, rel=0.02)


def test_integrate_flow_rejects_bad_step(params):
    with pytest.raises(ValueError):
        integrate_flow(0j, params, Drive(1.0, 1e-3), dt=-1.0)


@pytest.fixture(scope="module")
def small_basins():
    params, drive = bistable_point()
    grid = GridSpec(**{**default_window(params, drive).__dict__, "n_re": 60, "n_im": 60})
    return params, drive, grid, basin_map(params, drive, grid)


def test_basin_labels_and_attractors(small_basins):
    params, drive, grid, bm = small_basins
    c1, _, c3 = branches_at(params, drive)
    hr, hi = grid.cell
    for b in (c1, c3):
        i = int((b.c_m.real - grid.re_min) // hr)
        j = int((b.c_m.imag - grid.im_min) // hi)
        assert bm.labels[j, i] == b.index
    assert set(np.unique(bm.labels)) <= {UNRESOLVED, 1, 3}
    assert {1, 3} <= set(np.unique(bm.labels))


def test_basin_boundary_follows_separatrix(small_basins):
    params, drive, grid, bm = small_basins
    cell = max(grid.cell)
    assert polyline_distance(bm.boundary_cells(), bm.separatrix).max() <= 2 * cell
    if bm.unresolved_cells().size:
        assert polyline_distance(bm.unresolved_cells(), bm.separatrix).max() <= cell


def test_basin_labels_stable_under_refinement(small_basins):
    params, drive, grid, bm = small_basins
    slow = min(min(l.lambda0.real, l.lambda1.real) for l in (linearize(b, params, drive) for b in branches_at(params, drive)) if l.det > 0)
    base_dt = 0.05 / max(abs(linearize(b, params, drive).w) for b in branches_at(params, drive))
    fine = basin_map(params, drive, grid, dt=0.5 * base_dt, t_max=120.0 / slow, with_separatrix=False)
    resolved = (bm.labels != UNRESOLVED) & (fine.labels != UNRESOLVED)
    assert np.mean(bm.labels[resolved] == fine.labels[resolved]) >= 0.999


def test_basin_requires_bistability(params):
    with pytest.raises(NotBistable):
        basin_map(params, Drive(0.95, 1e-3))
    with pytest.raises(NotBistable):
        separatrix(params, Drive(0.95, 1e-3))


def test_separatrix_geometry(small_basins):
    params, drive, grid, bm = small_basins
    c2 = branches_at(params, drive)[1]
    sep = bm.separatrix
    assert np.min(np.abs(sep - c2.c_m)) <= 1e-7 * abs(c2.c_m) * 1.0001
    finer = separatrix(params, drive, grid, eps_rel=5e-8)
    assert polyline_distance(finer[:: max(1, finer.size // 200)], sep).max() < 1e-3 * max(grid.cell)


def test_separatrix_separates_basins(small_basins):
    params, drive, grid, bm = small_basins
    sep = bm.separatrix
    inside = np.array([grid.contains(z) for z in sep])
    pts = sep[inside][:: max(1, inside.sum() // 6)][1:-1]
    h = 0.02 * max(grid.cell)
    for k, z in enumerate(pts):
        j = np.argmin(np.abs(sep - z))
        tangent = sep[min(j + 1, sep.size - 1)] - sep[max(j - 1, 0)]
        normal = 1j * tangent / abs(tangent)
        ends = {integrate_flow(z + s * h * normal, params, drive, t_max=1e5).attractor for s in (1, -1)}
        assert ends == {1, 3}


def test_langevin_determinism(params):
    d = Drive(1.02, 5e-3)
    (b,) = branches_at(params, d)
    a = simulate_ensemble(4, b.c_m, params, d, None, 200.0, seed=99)
    c = simulate_ensemble(4, b.c_m, params, d, None, 200.0, seed=99)
    assert np.array_equal(a.c_values, c.c_values)
    # Trajectory k is reproducible on its own.
    single = simulate_langevin(b.c_m, params, d, None, 200.0, seed=99, index=2)
    assert np.array_equal(single.c_values, a.c_values[2])
    other = simulate_ensemble(4, b.c_m, params, d, None, 200.0, seed=100)
    assert not np.array_equal(a.c_values, other.c_values)
    assert np.all(np.diff(a.times) > 0) and np.all(np.isfinite(a.c_values))


def test_langevin_zero_temperature_floor():
    params = response_params(temperature=0.0)
    d = Drive(1.0, 0.0)
    (b,) = branches_at(params, d)
    lin = linearize(b, params, d)
    t_rd = ring_down_time(lin)
    ens = simulate_ensemble(400, 0j, params, d, None, 60 * t_rd, seed=1, record_every=20)
    var, se = quadrature_variance(ens, 0.0, stride=5)
    assert var == pytest.approx(1.0, abs=4 * se + 0.02)


def test_langevin_rejects_saddle(params):
    _, drive = bistable_point()
    c2 = branches_at(params, drive)[1]
    with pytest.raises(UnstableBranch):
        simulate_ensemble(2, c2.c_m, params, drive, None, 10.0, seed=1, branch=c2)
    with pytest.raises(ValueError):
        simulate_ensemble(2, c2.c_m, params, drive, None, 10.0, seed=1, mode="quantum")


@pytest.fixture(scope="module")
def squeezed_ensemble():
    params, drive, b, lin = squeezing_point(0.6)
    t_rd = ring_down_time(lin)
    ens = simulate_ensemble(1024, b.c_m, params, drive, None, 20 * t_rd + 80 * t_rd, seed=17, record_every=10)
    return params, lin, ens


def test_stationary_mean_zero(squeezed_ensemble):
    params, lin, ens = squeezed_ensemble
    t_rd = ring_down_time(lin)
    keep = ens.times >= 20 * t_rd
    per_traj = (ens.c_values[:, keep] - ens.c_m).mean(axis=1)
    for part in (per_traj.real, per_traj.imag):
        assert abs(part.mean()) < 3 * part.std(ddof=1) / math.sqrt(part.size)


def test_quadrature_variance_matches_exact_covariance(squeezed_ensemble):
    params, lin, ens = squeezed_ensemble
    stride = int(round(2 * ring_down_time(lin) / ens.sample_dt))
    for offset in np.linspace(0, math.pi, 5):
        phi = lin.phi0 + offset
        var, se = quadrature_variance(ens, phi, stride=stride)
        assert var == pytest.approx(lyapunov_variance(lin, params, phi), rel=0.05)


def test_principal_axis_ratio(squeezed_ensemble):
    params, lin, ens = squeezed_ensemble
    stride = int(round(2 * ring_down_time(lin) / ens.sample_dt))
    # Largest and smallest stationary quadratures sit a quarter turn apart.
    phis = lin.phi0 + np.linspace(0, math.pi, 37)
    exact = np.array([lyapunov_variance(lin, params, p) for p in phis])
    lo, hi = phis[np.argmin(exact)], phis[np.argmax(exact)]
    ratio = quadrature_variance(ens, lo, stride=stride)[0] / quadrature_variance(ens, hi, stride=stride)[0]
    z = lin.zeta
    assert ratio == pytest.approx((1 - z) / (1 + z), rel=0.05)


def test_variance_matches_integrated_form_at_minimum_phase(squeezed_ensemble):
    params, lin, ens = squeezed_ensemble
    stride = int(round(2 * ring_down_time(lin) / ens.sample_dt))
    phi = lin.phi0 + math.pi
    var, _ = quadrature_variance(ens, phi, stride=stride)
    assert var == pytest.approx(integrated_spectrum(phi, lin, params), rel=0.10)


@pytest.mark.xfail(strict=True, reason="reduced integrated form mislabels the squeezed and anti-squeezed quadratures")
def test_variance_matches_integrated_form_all_phases(squeezed_ensemble):
    params, lin, ens = squeezed_ensemble
    stride = int(round(2 * ring_down_time(lin) / ens.sample_dt))
    for offset in (0.0, math.pi / 2):
        var, _ = quadrature_variance(ens, lin.phi0 + offset, stride=stride)
        assert var == pytest.approx(integrated_spectrum(lin.phi0 + offset, lin, params), rel=0.10)


def _central(spec, lin, width=3.0):
    return np.abs(spec.omega) <= width * abs(lin.w)


def test_mc_spectrum_matches_linear_response(squeezed_ensemble):
    params, lin, ens = squeezed_ensemble
    phi = lin.phi0 + 0.7
    spec = estimate_spectrum_mc(ens, phi, nperseg=256)
    band = _central(spec, lin)
    omega, expected = expected_welch(lin, params, phi, ens.sample_dt, 256)
    assert np.allclose(omega, spec.omega)
    within = np.abs(spec.values[band] - expected[band]) <= 2 * spec.stderr[band]
    # About 95% of bins should land within two standard errors; the rest is
    # the Euler-Maruyama step error, about 1.5% at the default step.
    assert within.mean() >= 0.85
    assert abs(np.median(spec.values[band] / expected[band] - 1)) < 0.03
    assert spec.integral == pytest.approx(lyapunov_variance(lin, params, phi), rel=0.10)


@pytest.mark.xfail(strict=True, reason="W,V density differs from the simulated spectrum beyond statistics")
def test_mc_spectrum_matches_wv_density(squeezed_ensemble):
    # Same criterion as the passing check above; the window bias (~2%) is far
    # below the 50% median gap between the density and the exact spectrum.
    params, lin, ens = squeezed_ensemble
    phi = lin.phi0 + 0.7
    spec = estimate_spectrum_mc(ens, phi, nperseg=256)
    band = _central(spec, lin)
    density = spectral_density(spec.omega[band], phi, lin, params)
    assert np.mean(np.abs(spec.values[band] - density) <= 2 * spec.stderr[band]) >= 0.85
    assert abs(np.median(spec.values[band] / density - 1)) < 0.03


def test_mc_spectrum_linear_phase_independent():
    params = response_params(temperature=1.0)
    d = Drive(1.01, 0.0)
    (b,) = branches_at(params, d)
    lin = linearize(b, params, d)
    t_rd = ring_down_time(lin)
    ens = simulate_ensemble(256, 0j, params, d, None, 100 * t_rd, seed=5, record_every=10)
    a = estimate_spectrum_mc(ens, 0.0, nperseg=128)
    c = estimate_spectrum_mc(ens, 1.2, nperseg=128)
    band = _central(a, lin)
    diff = np.abs(a.values[band] - c.values[band])
    err = np.hypot(a.stderr[band], c.stderr[band])
    assert np.mean(diff <= 2 * err) >= 0.85
    # Lorentzian-like: peak at the detuning, where the response is resonant.
    assert abs(a.omega[np.argmax(a.values)] - abs(lin.w.imag)) < 3 * (a.omega[1] - a.omega[0]) or abs(
        a.omega[np.argmax(a.values)] + abs(lin.w.imag)
    ) < 3 * (a.omega[1] - a.omega[0])


def test_mc_spectrum_error_band_shrinks(squeezed_ensemble):
    params, lin, ens = squeezed_ensemble
    phi = lin.phi0
    errs = []
    for n in (64, 256, 1024):
        sub = [ens[i] for i in range(n)]
        burn = 20 * ring_down_time(lin)
        spec = estimate_spectrum_mc((t for t in sub), phi, nperseg=256, burn_in=burn)
        errs.append(np.median(spec.stderr[_central(spec, lin)]))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.3)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.3)


def test_mc_spectrum_rejects_short_segment(squeezed_ensemble):
    params, lin, ens = squeezed_ensemble
    with pytest.raises(ValueError):
        estimate_spectrum_mc(ens, 0.0, nperseg=10**6)


def test_quadrature_helper():
    assert quadrature(1j, math.pi / 2) == pytest.approx(-2.0)
    assert np.allclose(quadrature(np.array([1.0, 1j]), 0.0), [2.0, 0.0])


def test_displacement_linear_ringdown():
    params = ResonatorParams(1.0, 0.02, 0.0, 0.0, 0.5, 1.0, UnitSystem.DIMENSIONLESS)
    traj = integrate_displacement(1.0, 0.0, params, Drive(1.0, 0.0), 0.05, 200.0)
    env = np.abs(traj.x + 1j * traj.v / params.omega0)
    slope = np.polyfit(traj.times, np.log(env), 1)[0]
    assert -slope == pytest.approx(params.gamma, rel=0.01)


def test_displacement_matches_rotating_frame(params):
    from nanomass.bifurcation import critical_point

    p = 0.5 * critical_point(params).p_c
    x0 = zero_point_length(params)
    for wp in (0.99, 1.0, 1.03):
        (b,) = branches_at(params, Drive(wp, p))
        traj = integrate_displacement(0.0, 0.0, params, Drive(wp, p), 0.1, 1500.0)
        assert steady_amplitude(traj, wp) == pytest.approx(2 * x0 * abs(b.c_m), rel=0.03)


def test_displacement_hysteresis_inside_band(params):
    from nanomass.bifurcation import critical_point, fold_detunings_parametric

    p = 2 * critical_point(params).p_c
    lo, hi = fold_detunings_parametric(params, p)
    grid = 1.0 + lo + np.array([-0.5, 0.3, 0.5]) * (hi - lo)
    up = frequency_sweep(params, p, grid, 1500.0, 0.1)
    down = frequency_sweep(params, p, grid[::-1], 1500.0, 0.1)[::-1]
    assert abs(up[0] / down[0] - 1) < 0.05
    assert abs(up[1] / down[1] - 1) > 0.2
    assert abs(up[2] / down[2] - 1) > 0.2


def test_displacement_options():
    params = ResonatorParams(1.0, 0.02, 0.0, 0.0, 0.5, 1.0, UnitSystem.DIMENSIONLESS)
    with pytest.raises(ValueError):
        integrate_displacement(0.0, 0.0, params, Drive(1.0, 0.0), 0.1, 1.0, damping="cubic")
    with pytest.raises(ValueError):
        integrate_displacement(0.0, 0.0, params, Drive(1.0, 0.0), 0.0, 1.0)
