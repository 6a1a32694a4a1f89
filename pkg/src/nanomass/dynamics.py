"""Time-domain engine: deterministic flow, basins, Langevin ensembles, displacement ODE.

Noise convention: the complex white noise F has <F> = <FF> = 0 and
<F(t) F*(t')> = W' coth(hbar omega0 / 2 k_B T) delta(t - t'), the average of
the two bath orderings in the classical limit. With this intensity the
stationary homodyne variance of a linear resonator equals coth(...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import signal
from scipy.integrate import solve_ivp

from .errors import NotBistable, StepSizeUnderflow, UnstableBranch
from .model import Drive, ResonatorParams, coth_factor, drive_to_force, zero_point_length
from .response import SpectrumResult, ring_down_time
from .steady_state import (
    Linearization,
    Stability,
    SteadyBranch,
    linearize,
    solve_energy,
    theta,
)

CAPTURE_TOL = 1e-8
BASIN_CAPTURE_TOL = 1e-6
NOISE_BLOCK = 1024
UNRESOLVED = 0
# Coefficient of gamma3 in the x^2 dx/dt damping term, relative to 2 gamma3.
DAMPING_FORMS = {"envelope": 1.0, "third": 1.0 / 3.0}


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    c_values: np.ndarray
    seed: int | None = None
    dt: float = math.nan
    integrator: str = ""
    index: int = 0
    attractor: int | None = None


@dataclass(frozen=True)
class Ensemble:
    """Langevin trajectories sharing one time grid; row i is trajectory i."""

    times: np.ndarray
    c_values: np.ndarray
    seed: int
    dt: float
    mode: str
    c_m: complex
    lin: Linearization | None = None

    def __len__(self) -> int:
        return self.c_values.shape[0]

    def __getitem__(self, i: int) -> Trajectory:
        return Trajectory(self.times, self.c_values[i], self.seed, self.dt, f"euler-maruyama/{self.mode}", i)

    @property
    def sample_dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else self.dt


@dataclass(frozen=True)
class GridSpec:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_re: int = 200
    n_im: int = 200

    @property
    def cell(self) -> tuple[float, float]:
        return (self.re_max - self.re_min) / self.n_re, (self.im_max - self.im_min) / self.n_im

    def centres(self) -> tuple[np.ndarray, np.ndarray]:
        hr, hi = self.cell
        return (
            self.re_min + (np.arange(self.n_re) + 0.5) * hr,
            self.im_min + (np.arange(self.n_im) + 0.5) * hi,
        )

    def contains(self, c: complex, margin: float = 0.0) -> bool:
        return (
            self.re_min - margin <= c.real <= self.re_max + margin
            and self.im_min - margin <= c.imag <= self.im_max + margin
        )


@dataclass(frozen=True)
class BasinMap:
    """labels[j, i] is the attractor index (1 or 3) of the cell at (re[i], im[j]); 0 if unresolved."""

    grid: GridSpec
    re: np.ndarray
    im: np.ndarray
    labels: np.ndarray
    separatrix: np.ndarray
    saddle: complex
    attractors: dict = field(default_factory=dict)

    def boundary_cells(self) -> np.ndarray:
        """Complex midpoints between horizontally or vertically adjacent cells of different resolved labels."""
        lab = self.labels
        pts = []
        zr, zi = np.meshgrid(self.re, self.im)
        z = zr + 1j * zi
        for a, b, za, zb in (
            (lab[:, :-1], lab[:, 1:], z[:, :-1], z[:, 1:]),
            (lab[:-1, :], lab[1:, :], z[:-1, :], z[1:, :]),
        ):
            mask = (a != b) & (a != UNRESOLVED) & (b != UNRESOLVED)
            pts.append(0.5 * (za[mask] + zb[mask]))
        return np.concatenate(pts)

    def unresolved_cells(self) -> np.ndarray:
        zr, zi = np.meshgrid(self.re, self.im)
        return (zr + 1j * zi)[self.labels == UNRESOLVED]


def flow_rhs(c, params: ResonatorParams, drive: Drive):
    """Noiseless drift -Theta(C, C*)."""
    return -theta(c, params, drive)


def _rk4(c, h, params, drive):
    k1 = flow_rhs(c, params, drive)
    k2 = flow_rhs(c + 0.5 * h * k1, params, drive)
    k3 = flow_rhs(c + 0.5 * h * k2, params, drive)
    k4 = flow_rhs(c + h * k3, params, drive)
    return c + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def default_flow_dt(params: ResonatorParams, drive: Drive, c_init: complex = 0j) -> float:
    """0.05 over the fastest local rate among the branches and the starting point."""
    rates = [params.gamma + (params.gamma3 + abs(params.kerr)) * abs(c_init) ** 2]
    for b in solve_energy(params, drive):
        lin = linearize(b, params, drive)
        rates += [abs(lin.lambda0), abs(lin.lambda1), abs(lin.w)]
    return 0.05 / max(rates)


def _attractor_points(params, drive) -> list[tuple[int, complex]]:
    return [(b.index, b.c_m) for b in solve_energy(params, drive) if b.stability.is_stable]


def integrate_flow(
    c_init: complex,
    params: ResonatorParams,
    drive: Drive,
    dt: float | None = None,
    t_max: float = 1.0,
    rtol: float = 1e-10,
    capture_tol: float = CAPTURE_TOL,
    attractors: Sequence[tuple[int, complex]] | None = None,
) -> Trajectory:
    """RK4 with step-doubling (Richardson) error control; stops once within capture_tol of an attractor.

    ``dt`` is the largest step allowed.
    """
    if dt is None:
        dt = default_flow_dt(params, drive, c_init)
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    if attractors is None:
        attractors = _attractor_points(params, drive)
    c = complex(c_init)
    t, h = 0.0, dt
    h_floor = 1e-13 * max(t_max, dt)
    times, values = [0.0], [c]
    hit = None
    while t < t_max:
        for idx, a in attractors:
            if abs(c - a) < capture_tol:
                hit = idx
                break
        if hit is not None:
            break
        h = min(h, t_max - t)
        full = _rk4(c, h, params, drive)
        half = _rk4(_rk4(c, 0.5 * h, params, drive), 0.5 * h, params, drive)
        err = abs(half - full) / 15.0
        tol = rtol * max(abs(c), 1e-300) + 1e-300
        if not math.isfinite(err):
            err = math.inf
        if err <= tol:
            c = half + (half - full) / 15.0
            t += h
            times.append(t)
            values.append(c)
            grow = 2.0 if err == 0 else min(2.0, 0.9 * (tol / err) ** 0.2)
            h = min(dt, h * max(grow, 1.0))
        else:
            h *= max(0.2, 0.9 * (tol / err) ** 0.2) if math.isfinite(err) else 0.2
            if h < h_floor:
                raise StepSizeUnderflow(f"step fell below {h_floor:.3g} at t={t:.6g}")
    return Trajectory(np.array(times), np.array(values), None, dt, "rk4-richardson", 0, hit)


def saddle_eigenvectors(branch: SteadyBranch, params: ResonatorParams, drive: Drive):
    """((rate_u, dir_u), (rate_s, dir_s)) of the saddle, directions as unit complex numbers."""
    lin = linearize(branch, params, drive)
    vals, vecs = np.linalg.eig(-lin.matrix())
    order = np.argsort(vals.real)
    s, u = order[0], order[-1]
    if not (vals[u].real > 0 > vals[s].real):
        raise NotBistable("operating point has no saddle")

    def as_complex(v):
        v = np.real_if_close(v).real
        z = complex(v[0], v[1])
        return z / abs(z)

    return (float(vals[u].real), as_complex(vecs[:, u])), (float(vals[s].real), as_complex(vecs[:, s]))


def _bistable_branches(params, drive):
    branches = solve_energy(params, drive)
    kinds = [b.stability for b in branches]
    if len(branches) != 3 or Stability.SADDLE not in kinds:
        raise NotBistable(f"{len(branches)} steady state(s) at omega_p={drive.omega_p!r}, p={drive.p!r}")
    return branches


def default_window(params: ResonatorParams, drive: Drive, margin: float = 0.6) -> GridSpec:
    """Square window around the three steady states."""
    pts = np.array([b.c_m for b in _bistable_branches(params, drive)] + [0j])
    centre = 0.5 * (pts.real.max() + pts.real.min()) + 0.5j * (pts.imag.max() + pts.imag.min())
    half = 0.5 * max(np.ptp(pts.real), np.ptp(pts.imag)) * (1.0 + margin)
    cr, ci, half = float(centre.real), float(centre.imag), float(half)
    return GridSpec(cr - half, cr + half, ci - half, ci + half)


def separatrix(
    params: ResonatorParams,
    drive: Drive,
    window: GridSpec | None = None,
    eps_rel: float = 1e-7,
    max_time: float | None = None,
) -> np.ndarray:
    """Stable manifold of the saddle, traced backward in time until it leaves the window.

    Returns a complex polyline ordered from one end through the saddle to the other.
    """
    branches = _bistable_branches(params, drive)
    saddle = next(b for b in branches if b.stability is Stability.SADDLE)
    window = window or default_window(params, drive)
    (_, _), (rate_s, dir_s) = saddle_eigenvectors(saddle, params, drive)
    eps = eps_rel * abs(saddle.c_m)
    span = max(window.re_max - window.re_min, window.im_max - window.im_min)
    margin = 0.05 * span
    if max_time is None:
        max_time = 400.0 / params.gamma
    max_step = 0.02 / max(abs(linearize(b, params, drive).w) for b in branches)

    def backward(_, y):
        d = -flow_rhs(complex(y[0], y[1]), params, drive)
        return [d.real, d.imag]

    def leave(_, y):
        c = complex(y[0], y[1])
        return min(
            c.real - (window.re_min - margin),
            (window.re_max + margin) - c.real,
            c.imag - (window.im_min - margin),
            (window.im_max + margin) - c.imag,
        )

    leave.terminal = True
    arms = []
    for sign in (1.0, -1.0):
        c0 = saddle.c_m + sign * eps * dir_s
        sol = solve_ivp(
            backward,
            (0.0, max_time),
            [c0.real, c0.imag],
            method="DOP853",
            rtol=1e-10,
            atol=1e-12 * max(1.0, abs(saddle.c_m)),
            max_step=max_step,
            events=leave,
        )
        arms.append(sol.y[0] + 1j * sol.y[1])
    return np.concatenate([arms[1][::-1], [saddle.c_m], arms[0]])


def polyline_distance(points, polyline: np.ndarray) -> np.ndarray:
    """Euclidean distance from each complex point to a complex polyline."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    a, b = polyline[:-1], polyline[1:]
    ab = b - a
    len2 = np.abs(ab) ** 2
    len2 = np.where(len2 > 0, len2, 1.0)
    out = np.empty(pts.size)
    for k in range(0, pts.size, 256):
        p = pts[k : k + 256, None]
        s = np.clip(((p - a) * np.conj(ab)).real / len2, 0.0, 1.0)
        out[k : k + 256] = np.abs(p - (a + s * ab)).min(axis=1)
    return out


def basin_map(
    params: ResonatorParams,
    drive: Drive,
    grid: GridSpec | None = None,
    dt: float | None = None,
    t_max: float | None = None,
    capture_tol: float = BASIN_CAPTURE_TOL,
    with_separatrix: bool = True,
) -> BasinMap:
    """Label every grid cell by the attractor its noiseless flow reaches (fixed-step RK4)."""
    branches = _bistable_branches(params, drive)
    grid = grid or default_window(params, drive)
    re, im = grid.centres()
    zr, zi = np.meshgrid(re, im)
    z0 = (zr + 1j * zi).ravel()
    attractors = [(b.index, b.c_m) for b in branches if b.stability.is_stable]
    lins = [linearize(b, params, drive) for b in branches]
    if dt is None:
        r_max = float(np.abs(z0).max())
        fast = max(
            [abs(l.lambda0) for l in lins]
            + [abs(l.lambda1) for l in lins]
            + [params.gamma + (params.gamma3 + abs(params.kerr)) * r_max**2]
        )
        dt = 0.05 / fast
    if t_max is None:
        slow = min(
            min(l.lambda0.real, l.lambda1.real) for l, b in zip(lins, branches) if b.stability.is_stable
        )
        t_max = 60.0 / slow
    labels = np.zeros(z0.size, dtype=np.int8)
    active = np.arange(z0.size)
    c = z0.copy()
    n_steps = int(math.ceil(t_max / dt))
    for step in range(n_steps + 1):
        if step % 4 == 0 or step == n_steps:
            done = np.zeros(active.size, dtype=bool)
            for idx, a in attractors:
                hit = np.abs(c - a) < capture_tol
                labels[active[hit]] = idx
                done |= hit
            blown = ~np.isfinite(c)
            done |= blown
            if done.any():
                keep = ~done
                active, c = active[keep], c[keep]
            if active.size == 0:
                break
        if step < n_steps:
            c = _rk4(c, dt, params, drive)
    sep = separatrix(params, drive, grid) if with_separatrix else np.empty(0, dtype=complex)
    saddle = next(b.c_m for b in branches if b.stability is Stability.SADDLE)
    return BasinMap(
        grid,
        re,
        im,
        labels.reshape(grid.n_im, grid.n_re),
        sep,
        saddle,
        {idx: a for idx, a in attractors},
    )


def default_langevin_dt(lin: Linearization) -> float:
    return 0.01 / max(abs(lin.lambda0), abs(lin.lambda1))


def burn_in_time(lin: Linearization) -> float:
    return 20.0 * ring_down_time(lin)


def _streams(seed: int, first: int, n: int) -> list[np.random.Generator]:
    return [
        np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, first + i])))
        for i in range(n)
    ]


def _nearest_stable(c_init, params, drive) -> SteadyBranch:
    stable = [b for b in solve_energy(params, drive) if b.stability.is_stable]
    if not stable:
        raise UnstableBranch("no stable branch at this operating point")
    return min(stable, key=lambda b: abs(b.c_m - c_init))


def simulate_ensemble(
    n: int,
    c_init: complex,
    params: ResonatorParams,
    drive: Drive,
    dt: float | None,
    t_max: float,
    seed: int,
    mode: str = "linearized",
    branch: SteadyBranch | None = None,
    record_every: int = 1,
    first_index: int = 0,
) -> Ensemble:
    """Euler-Maruyama integration of n independent trajectories.

    Trajectory k draws its noise from a Philox stream keyed by (seed, first_index + k),
    so any trajectory can be reproduced on its own.
    """
    if mode not in ("linearized", "full"):
        raise ValueError(f"mode must be 'linearized' or 'full', got {mode!r}")
    if n < 1 or t_max <= 0 or record_every < 1:
        raise ValueError("n, t_max and record_every must be positive")
    if branch is None:
        branch = _nearest_stable(c_init, params, drive)
    lin = linearize(branch, params, drive)
    if mode == "linearized" and (not branch.stability.is_stable or not lin.is_stable):
        raise UnstableBranch(f"linearized mode needs a stable branch, got {branch.stability.value}")
    if dt is None:
        dt = default_langevin_dt(lin)
    if dt <= 0:
        raise ValueError("dt must be positive")
    coth = coth_factor(params)
    n_steps = int(round(t_max / dt))
    n_rec = n_steps // record_every + 1
    out = np.empty((n, n_rec), dtype=complex)
    gens = _streams(seed, first_index, n)

    c_m = branch.c_m
    if mode == "linearized":
        state = np.full(n, complex(c_init) - c_m)
        amp = math.sqrt(lin.w.real * coth * dt / 2.0)
    else:
        state = np.full(n, complex(c_init))
    offset = c_m if mode == "linearized" else 0.0
    out[:, 0] = state + offset
    step = 0
    while step < n_steps:
        block = min(NOISE_BLOCK, n_steps - step)
        noise = np.stack([g.standard_normal((block, 2)) for g in gens])
        dw = noise[..., 0] + 1j * noise[..., 1]
        for k in range(block):
            if mode == "linearized":
                state = state - (lin.w * state + lin.v * np.conj(state)) * dt + amp * dw[:, k]
            else:
                e = state.real**2 + state.imag**2
                scale = np.sqrt((params.gamma + 2.0 * params.gamma3 * e) * coth * dt / 2.0)
                state = state + flow_rhs(state, params, drive) * dt + scale * dw[:, k]
            step += 1
            if step % record_every == 0:
                out[:, step // record_every] = state + offset
        if not np.all(np.isfinite(state)):
            raise StepSizeUnderflow(f"non-finite state by t={step * dt:.6g}; reduce dt")
    times = np.arange(n_rec) * (dt * record_every)
    return Ensemble(times, out, seed, dt, mode, c_m, lin)


def simulate_langevin(
    c_init: complex,
    params: ResonatorParams,
    drive: Drive,
    dt: float | None,
    t_max: float,
    seed: int,
    mode: str = "linearized",
    index: int = 0,
    branch: SteadyBranch | None = None,
    record_every: int = 1,
) -> Trajectory:
    ens = simulate_ensemble(1, c_init, params, drive, dt, t_max, seed, mode, branch, record_every, index)
    return Trajectory(ens.times, ens.c_values[0], seed, ens.dt, f"euler-maruyama/{mode}", index)


def quadrature(c, phi_lo: float):
    """Homodyne quadrature exp(i phi_LO) c + c.c."""
    return 2.0 * (np.exp(1j * phi_lo) * np.asarray(c)).real


def _stationary(ens: Ensemble, burn_in: float | None) -> np.ndarray:
    if burn_in is None:
        burn_in = burn_in_time(ens.lin) if ens.lin is not None else 0.0
    keep = ens.times >= burn_in - 1e-12 * max(ens.times[-1], 1.0)
    if keep.sum() < 2:
        raise ValueError(f"no stationary samples after burn-in {burn_in:.6g}")
    return ens.c_values[:, keep] - ens.c_m


def quadrature_variance(
    ens: Ensemble, phi_lo: float, burn_in: float | None = None, stride: int = 1
) -> tuple[float, float]:
    """Pooled variance of the fluctuation quadrature and its standard error over trajectories."""
    x = quadrature(_stationary(ens, burn_in)[:, ::stride], phi_lo)
    per_traj = np.mean(x**2, axis=1)
    return float(per_traj.mean()), float(per_traj.std(ddof=1) / math.sqrt(len(per_traj))) if len(per_traj) > 1 else math.nan


def estimate_spectrum_mc(
    ens: Ensemble | Iterable[Trajectory],
    phi_lo: float,
    nperseg: int = 256,
    burn_in: float | None = None,
) -> SpectrumResult:
    """Welch estimate of P_phiLO(omega), normalized so (1/2pi) * integral P d omega is the variance."""
    if not isinstance(ens, Ensemble):
        trajs = list(ens)
        ens = Ensemble(
            trajs[0].times,
            np.stack([t.c_values for t in trajs]),
            trajs[0].seed or 0,
            trajs[0].dt,
            "external",
            0j,
            None,
        )
        burn_in = 0.0 if burn_in is None else burn_in
    x = quadrature(_stationary(ens, burn_in), phi_lo)
    if x.shape[1] < nperseg:
        raise ValueError(f"stationary segment has {x.shape[1]} samples, fewer than nperseg={nperseg}")
    fs = 1.0 / ens.sample_dt
    f, pxx = signal.welch(
        x, fs=fs, nperseg=nperseg, return_onesided=False, scaling="density", detrend=False, axis=-1
    )
    f, pxx = np.fft.fftshift(f), np.fft.fftshift(pxx, axes=-1)
    mean = pxx.mean(axis=0)
    stderr = pxx.std(axis=0, ddof=1) / math.sqrt(pxx.shape[0]) if pxx.shape[0] > 1 else None
    omega = 2.0 * math.pi * f
    d_omega = 2.0 * math.pi * fs / nperseg
    zero = float(mean[np.argmin(np.abs(omega))])
    return SpectrumResult(omega, mean, phi_lo, zero, float(mean.sum() * d_omega / (2.0 * math.pi)), stderr)


@dataclass(frozen=True)
class DisplacementTrajectory:
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    phase: float = 0.0


def integrate_displacement(
    x_init: float,
    v_init: float,
    params: ResonatorParams,
    drive: Drive,
    dt: float,
    t_max: float,
    record_every: int = 1,
    phase0: float = 0.0,
    damping: str = "envelope",
) -> DisplacementTrajectory:
    """Fixed-step RK4 for the full second-order equation of motion (noiseless).

    x'' + 2 gamma [1 + kappa (gamma3/gamma) (x/x0)^2] x' + omega0^2 [1 + 2K/(3 omega0) (x/x0)^2] x
        = (f/m) exp(-i theta(t)) + c.c.,  theta(t) = phase0 + omega_p t.

    ``damping="envelope"`` uses kappa = 1, whose rotating-wave reduction gives
    the nonlinear damping gamma3 |C|^2 of the envelope equation; ``"third"``
    uses kappa = 1/3, which reduces to gamma3 |C|^2 / 3.
    ``phase`` of the result is theta at t_max, for phase-continuous sweeps.
    """
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    if damping not in DAMPING_FORMS:
        raise ValueError(f"damping must be one of {sorted(DAMPING_FORMS)}")
    x0 = zero_point_length(params)
    fm = drive_to_force(drive.p, drive.phi_p, params, drive.omega_p) / params.mass
    fr, fi = 2.0 * fm.real, 2.0 * fm.imag
    g2 = 2.0 * params.gamma
    g3 = 2.0 * params.gamma3 * DAMPING_FORMS[damping]
    w2 = params.omega0**2
    kk = w2 * 2.0 * params.kerr / (3.0 * params.omega0)
    wp = drive.omega_p
    inv_x02 = 1.0 / (x0 * x0)
    cos, sin = math.cos, math.sin

    def acc(t, x, v):
        th = phase0 + wp * t
        q = x * x * inv_x02
        # 2 Re(fm exp(-i th))
        force = fr * cos(th) + fi * sin(th)
        return force - (g2 + g3 * q) * v - (w2 + kk * q) * x

    n_steps = int(round(t_max / dt))
    n_rec = n_steps // record_every + 1
    xs = np.empty(n_rec)
    vs = np.empty(n_rec)
    x, v = float(x_init), float(v_init)
    xs[0], vs[0] = x, v
    h = dt
    for n in range(n_steps):
        t = n * h
        a1 = acc(t, x, v)
        x2, v2 = x + 0.5 * h * v, v + 0.5 * h * a1
        a2 = acc(t + 0.5 * h, x2, v2)
        x3, v3 = x + 0.5 * h * v2, v + 0.5 * h * a2
        a3 = acc(t + 0.5 * h, x3, v3)
        x4, v4 = x + h * v3, v + h * a3
        a4 = acc(t + h, x4, v4)
        x += h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if (n + 1) % record_every == 0:
            xs[(n + 1) // record_every], vs[(n + 1) // record_every] = x, v
    if not (math.isfinite(x) and math.isfinite(v)):
        raise StepSizeUnderflow("displacement diverged; reduce dt")
    times = np.arange(n_rec) * (dt * record_every)
    return DisplacementTrajectory(times, xs, vs, phase0 + wp * n_steps * dt)


def steady_amplitude(traj: DisplacementTrajectory, omega_p: float, periods: int = 20) -> float:
    """Amplitude of the omega_p component over the last whole periods, by demodulation."""
    dt = traj.times[1] - traj.times[0]
    n = int(round(periods * 2.0 * math.pi / omega_p / dt))
    if n < 2 or n > traj.x.size:
        raise ValueError("trajectory too short for the requested number of periods")
    t = traj.times[-n:]
    x = traj.x[-n:]
    return float(2.0 * abs(np.mean(x * np.exp(1j * omega_p * t))))


def frequency_sweep(
    params: ResonatorParams,
    p: float,
    omega_grid: Sequence[float],
    settle_time: float,
    dt: float,
    x_init: float = 0.0,
    v_init: float = 0.0,
    periods: int = 20,
    damping: str = "envelope",
) -> np.ndarray:
    """Quasi-static sweep through omega_grid in the given order, carrying state and drive phase over."""
    x, v, phase = x_init, v_init, 0.0
    amps = []
    for wp in omega_grid:
        traj = integrate_displacement(
            x, v, params, Drive(float(wp), p), dt, settle_time, phase0=phase, damping=damping
        )
        amps.append(steady_amplitude(traj, float(wp), periods))
        x, v, phase = float(traj.x[-1]), float(traj.v[-1]), traj.phase
    return np.array(amps)
