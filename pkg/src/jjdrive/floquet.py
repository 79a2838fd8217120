"""Time-ordered propagation, Floquet decomposition and ramped-pulse studies."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .hamiltonian import TimeDependentOperator

_C1 = 0.5 - math.sqrt(3) / 6
_C2 = 0.5 + math.sqrt(3) / 6
_K = math.sqrt(3) / 12


class StepUnderflow(RuntimeError):
    pass


class ZoneBoundaryWarning(RuntimeWarning):
    pass


def _as_callable(h):
    if callable(h):
        return h
    mat = np.asarray(h)
    return lambda t: mat


def expm_hermitian(h, dt):
    """exp(-i h dt) for Hermitian h."""
    h = (h + h.conj().T) / 2
    if np.iscomplexobj(h) and not np.any(h.imag):
        h = h.real
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * vals * dt)[None, :]) @ vecs.conj().T


def magnus_step(h, t, dt):
    """Fourth-order Magnus propagator over [t, t+dt] from two Gauss-Legendre samples."""
    h1 = h(t + _C1 * dt)
    h2 = h(t + _C2 * dt)
    heff = 0.5 * (h1 + h2) - 1j * _K * dt * (h2 @ h1 - h1 @ h2)
    return expm_hermitian(heff, dt)


def propagate(h, t0: float, t1: float, psi0=None, tol: float = 1e-9, first_step: float | None = None,
              max_step: float | None = None):
    """U(t1, t0) (or U psi0) with adaptive step doubling on the local propagator defect."""
    h = _as_callable(h)
    span = t1 - t0
    dim = h(t0).shape[0]
    u = np.eye(dim, dtype=complex)
    if span == 0:
        return u if psi0 is None else np.asarray(psi0, dtype=complex).copy()
    if isinstance(h, TimeDependentOperator) and h.is_static:
        u = expm_hermitian(h.static, span)
        return u if psi0 is None else u @ psi0
    max_step = abs(span) if max_step is None else max_step
    step = min(first_step or abs(span) / 16, max_step)
    t = t0
    direction = 1 if span > 0 else -1
    while (t1 - t) * direction > 0:
        step = min(step, abs(t1 - t), max_step)
        dt = direction * step
        full = magnus_step(h, t, dt)
        half = magnus_step(h, t + dt / 2, dt / 2) @ magnus_step(h, t, dt / 2)
        err = np.abs(full - half).max()
        if err <= tol:
            u = half @ u
            t += dt
            grow = 2.0 if err == 0 else min(2.0, 0.9 * (tol / err) ** 0.2)
            step *= grow
        else:
            step *= max(0.2, 0.9 * (tol / err) ** 0.2)
            if step < 1e-14 * abs(span):
                raise StepUnderflow(f"step size underflow at t={t:.6g} s (defect {err:.3g})")
    return u if psi0 is None else u @ np.asarray(psi0, dtype=complex)


def fixed_step_propagator(h, t0, t1, n_steps: int, sample_every: int | None = None):
    """Magnus-4 product over equal steps; optionally also the partial products every k steps."""
    h = _as_callable(h)
    dt = (t1 - t0) / n_steps
    steps = [magnus_step(h, t0 + j * dt, dt) for j in range(n_steps)]
    if sample_every is None:
        return _kernels.ordered_product(steps)
    samples = [np.eye(steps[0].shape[0], dtype=complex)]
    u = samples[0]
    for j in range(0, n_steps, sample_every):
        u = _kernels.ordered_product(steps[j:j + sample_every]) @ u
        samples.append(u)
    return samples[-1], samples


def period_propagator(h, period: float, n_samples: int = 64, tol: float = 1e-9, t0: float = 0.0):
    """Monodromy U(t0+T, t0) and the propagators at n_samples uniform times in the period."""
    h = _as_callable(h)
    samples = [np.eye(h(t0).shape[0], dtype=complex)]
    dt = period / n_samples
    for j in range(n_samples):
        step = propagate(h, t0 + j * dt, t0 + (j + 1) * dt, tol=tol, first_step=dt / 4)
        samples.append(step @ samples[-1])
    return samples[-1], samples


def unitarity_defect(u) -> float:
    return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())


# ---------------------------------------------------------------- Floquet

def fold(quasi, omega_d):
    """Fold quasi-energies (rad/s) into (-omega_d/2, omega_d/2]."""
    q = np.mod(np.asarray(quasi) + omega_d / 2, omega_d) - omega_d / 2
    return np.where(q <= -omega_d / 2, q + omega_d, q)


@dataclass
class FloquetBasis:
    omega_d: float
    quasi: np.ndarray        # rad/s, folded
    modes: np.ndarray        # (n_samples, dim, n_states): |Phi_a(t_j)>, t_j = j T / n_samples
    monodromy: np.ndarray
    labels: np.ndarray       # static eigenstate index with max overlap at t = 0
    notes: list = field(default_factory=list)

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega_d

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.modes.shape[0]) * self.period / self.modes.shape[0]

    def index_of(self, static_index: int) -> int:
        hits = np.flatnonzero(self.labels == static_index)
        if len(hits) != 1:
            raise KeyError(f"static state {static_index} has {len(hits)} Floquet partners")
        return int(hits[0])


def floquet_modes(h, omega_d: float, n_samples: int = 64, tol: float = 1e-9, static=None) -> FloquetBasis:
    """Floquet modes and folded quasi-energies from the one-period monodromy."""
    h = _as_callable(h)
    period = 2 * np.pi / omega_d
    u_t, samples = period_propagator(h, period, n_samples, tol)
    defect = unitarity_defect(u_t)
    if defect > 1e-9:
        raise RuntimeError(f"monodromy not unitary (defect {defect:.3g})")
    tri, vecs = scipy.linalg.schur(u_t, output="complex")
    lam = np.diag(tri)
    quasi = fold(-np.angle(lam) / period, omega_d)
    modes = np.empty((n_samples, u_t.shape[0], u_t.shape[0]), dtype=complex)
    for j in range(n_samples):
        t = j * period / n_samples
        modes[j] = (samples[j] @ vecs) * np.exp(1j * quasi * t)[None, :]
    static = h(0.0) if static is None else static
    _, svecs = np.linalg.eigh(static)
    labels = np.argmax(np.abs(svecs.conj().T @ vecs), axis=0)
    notes = []
    edge = np.abs(np.abs(quasi) - omega_d / 2) < 1e-6 * omega_d
    if np.count_nonzero(edge) > 1:
        notes.append("quasi-energy near-degeneracy at the zone boundary")
        warnings.warn(notes[-1], ZoneBoundaryWarning, stacklevel=2)
    return FloquetBasis(omega_d, quasi, modes, u_t, labels, notes)


# ---------------------------------------------------------------- ramps

def steady_displacement(omega: float, kappa: float, g0: float, omega_d: float):
    """(xi_plus, xi_minus) with xi(t) = xi_plus e^{i wd t} + xi_minus e^{-i wd t}.

    Steady response of a mode driven by i hbar g0 sin(wd t)(a^dag - a).
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if kappa == 0 and omega == omega_d:
        raise ZeroDivisionError("undamped resonance")
    return -g0 / (2 * (omega + omega_d - 0.5j * kappa)), g0 / (2 * (omega - omega_d - 0.5j * kappa))


def displacement_signal(xi_plus, xi_minus, omega_d):
    """t -> xi(t) + xi(t)^*"""
    return lambda t: 2 * (xi_plus * np.exp(1j * omega_d * t) + xi_minus * np.exp(-1j * omega_d * t)).real


@dataclass(frozen=True)
class PulseEnvelope:
    ramp_time: float
    shape: str = "linear"

    def rise(self, s):
        s = min(max(s, 0.0), 1.0)
        if self.shape == "linear":
            return s
        if self.shape == "smoothstep":
            return s * s * (3 - 2 * s)
        raise ValueError(f"unknown ramp shape {self.shape!r}")

    def __call__(self, t: float, flat: float) -> float:
        tr = self.ramp_time
        if t < -tr or t >= flat + tr:
            return 0.0
        if t < 0:
            return self.rise((t + tr) / tr)
        if t < flat:
            return 1.0
        return self.rise(1 - (t - flat) / tr)


@dataclass
class RampTraces:
    flat_times: np.ndarray
    lab: np.ndarray           # (n_times, n_levels)
    displaced: np.ndarray
    ramp_report: dict
    displaced_by_period: np.ndarray | None = None  # flat DF populations after 0, 1, 2, ... periods

    @property
    def discrepancy(self) -> float:
        return float(np.abs(self.lab - self.displaced).max())

    def aligned_discrepancy(self, max_offset: int | None = None):
        """(discrepancy, offset) minimized over a common shift of the DF trace by whole periods.

        The ramps themselves accumulate part of the parametric evolution, which shows up as a
        lead of the lab trace of order the ramp time; the default search window is the ramp time.
        """
        if self.displaced_by_period is None:
            raise ValueError("no per-period displaced-frame trace recorded")
        period = self.ramp_report["period"]
        if max_offset is None:
            max_offset = int(math.ceil(self.ramp_report["ramp_time"] / period))
        idx = np.rint(self.flat_times / period).astype(int)
        limit = min(max_offset, len(self.displaced_by_period) - 1 - idx.max())
        return min((float(np.abs(self.lab - self.displaced_by_period[idx + k]).max()), k)
                   for k in range(limit + 1))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            levels = self.lab.shape[1]
            w.writerow(["t_p", *[f"P{n}" for n in range(levels)], "frame"])
            for frame, data in (("lab", self.lab), ("displaced", self.displaced)):
                for t, row in zip(self.flat_times, data):
                    w.writerow([repr(float(t)), *[repr(float(x)) for x in row], frame])


def ramp_experiment(static, drive_operator, drive_signal, displaced: TimeDependentOperator,
                    envelope: PulseEnvelope, omega_d: float, flat_periods, levels: int = 3,
                    tol: float = 1e-9, steps_per_period: int = 256) -> RampTraces:
    """Lab-frame ramped pulses against the flat displaced-frame evolution.

    The lab Hamiltonian is static + envelope(t) * drive_signal(t) * drive_operator.  Flat-top
    durations are whole drive periods, so the ramp-down propagator is shared by every point.
    Populations are reported in the static eigenbasis.
    """
    period = 2 * np.pi / omega_d
    tr = envelope.ramp_time
    _, basis = np.linalg.eigh(static)
    start = basis[:, 0]

    def lab(t, flat):
        return static + envelope(t, flat) * drive_signal(t) * drive_operator

    flat_h = lambda t: static + drive_signal(t) * drive_operator  # noqa: E731
    u_up = propagate(lambda t: lab(t, np.inf), -tr, 0.0, tol=tol, max_step=period / 64) if tr > 0 else None
    u_down = propagate(lambda t: lab(t, 0.0), 0.0, tr, tol=tol, max_step=period / 64) if tr > 0 else None
    u_flat = fixed_step_propagator(flat_h, 0.0, period, steps_per_period)
    v_flat = fixed_step_propagator(displaced, 0.0, period, steps_per_period)

    psi_lab = start if u_up is None else u_up @ start
    psi_df = start.astype(complex)
    flat_periods = np.asarray(flat_periods, dtype=int)
    proj = basis[:, :levels].conj().T
    lab_pop = []
    done = 0
    for m in flat_periods:
        for _ in range(m - done):
            psi_lab = u_flat @ psi_lab
        done = m
        out = psi_lab if u_down is None else u_down @ psi_lab
        lab_pop.append(np.abs(proj @ out) ** 2)
    by_period = [np.abs(proj @ psi_df) ** 2]
    for _ in range(flat_periods.max() + int(math.ceil(tr / period))):
        psi_df = v_flat @ psi_df
        by_period.append(np.abs(proj @ psi_df) ** 2)
    by_period = np.array(by_period)
    return RampTraces(flat_periods * period, np.array(lab_pop), by_period[flat_periods],
                      {"ramp_time": tr, "period": period}, by_period)


def ramp_conditions(omega, kappa, omega_d, ramp_time, process_rate):
    """Dimensionless ramp figures: t_r |w +- wd - i k/2| should be >> 1, t_r * rate << 1."""
    return {
        "fast_response": ramp_time * abs(omega + omega_d - 0.5j * kappa),
        "slow_response": ramp_time * abs(omega - omega_d - 0.5j * kappa),
        "process": ramp_time * process_rate,
    }
