"""Lindblad master-equation oracle.

Density matrices are vectorized row-major, so vec(A rho B) = kron(A, B.T) vec(rho).
Hamiltonians are H/hbar in rad/s; channel rates are in 1/s.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .floquet import magnus_step


class PositivityViolation(RuntimeError):
    pass


class UnreliableRate(RuntimeError):
    pass


class ModelMismatch(RuntimeError):
    pass


@dataclass
class Channel:
    """Thermal channel: (1 + n) D[sqrt(rate) L] + n D[sqrt(rate) L^dagger]."""
    operator: np.ndarray
    rate: float = 1.0
    occupation: float = 0.0
    name: str = ""

    def jumps(self):
        out = []
        if self.rate * (1 + self.occupation) > 0:
            out.append(math.sqrt(self.rate * (1 + self.occupation)) * np.asarray(self.operator))
        if self.rate * self.occupation > 0:
            out.append(math.sqrt(self.rate * self.occupation) * np.asarray(self.operator).conj().T)
        return out


def joint_channel(ops, weights, occupation=0.0, name="joint"):
    """One bath shared by several modes: D[sum_k c_k a_k], never split into separate terms."""
    op = sum(w * o for w, o in zip(weights, ops))
    return Channel(op, 1.0, occupation, name)


def split_channels(ops, weights, occupation=0.0):
    """The uncorrelated variant, sum_k D[c_k a_k], kept for comparison."""
    return [Channel(w * o, 1.0, occupation, f"split{k}") for k, (w, o) in enumerate(zip(weights, ops))]


@dataclass
class LindbladModel:
    hamiltonian: object  # matrix or callable t -> matrix, rad/s
    channels: list = field(default_factory=list)

    def h(self, t: float) -> np.ndarray:
        return self.hamiltonian(t) if callable(self.hamiltonian) else np.asarray(self.hamiltonian)

    @property
    def dim(self) -> int:
        return self.h(0.0).shape[0]

    @property
    def is_static(self) -> bool:
        return not callable(self.hamiltonian) or getattr(self.hamiltonian, "is_static", False)

    def jumps(self):
        return [j for c in self.channels for j in c.jumps()]

    def dissipate(self, rho):
        out = np.zeros_like(rho, dtype=complex)
        for l in self.jumps():
            ld = l.conj().T
            out += l @ rho @ ld - 0.5 * (ld @ l @ rho + rho @ ld @ l)
        return out

    def rhs(self, t, rho):
        h = self.h(t)
        return -1j * (h @ rho - rho @ h) + self.dissipate(rho)

    def dissipator_super(self) -> np.ndarray:
        d = self.dim
        eye = np.eye(d)
        out = np.zeros((d * d, d * d), dtype=complex)
        for l in self.jumps():
            ldl = l.conj().T @ l
            out += np.kron(l, l.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T)
        return out

    def superoperator(self, t: float = 0.0) -> np.ndarray:
        h = self.h(t)
        eye = np.eye(self.dim)
        return -1j * (np.kron(h, eye) - np.kron(eye, h.T)) + self.dissipator_super()


# ---------------------------------------------------------------- integration

def _vec(rho):
    return np.asarray(rho, dtype=complex).reshape(-1)


def _unvec(v, d):
    return v.reshape(d, d)


def check_state(rho, tol=1e-8, where=""):
    """Raise on trace or positivity violations, return (trace error, min eigenvalue)."""
    herm = np.abs(rho - rho.conj().T).max()
    if herm > 1e-8:
        raise PositivityViolation(f"density matrix not Hermitian ({herm:.3g}) {where}")
    tr_err = abs(np.trace(rho) - 1)
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if tr_err > tol:
        raise PositivityViolation(f"trace drift {tr_err:.3g} {where}")
    if lam < -tol:
        raise PositivityViolation(f"negative eigenvalue {lam:.3g} {where}")
    return tr_err, lam


def _super_magnus(model, t, dt):
    """Second-order midpoint propagator of the Liouvillian, exact for static models."""
    return scipy.linalg.expm(model.superoperator(t + dt / 2) * dt)


def evolve(model: LindbladModel, rho0, times, tol: float = 1e-8, max_step: float | None = None,
           check: bool = True):
    """rho(t) at the requested times.

    Static models use the exact superoperator exponential between output times.  Driven models
    use midpoint exponentials with step doubling on the propagated state.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    if check:
        check_state(rho0, 1e-8, "in initial state")
    times = np.asarray(times, dtype=float)
    out = [rho0]
    v = _vec(rho0)
    if model.is_static:
        gen = model.superoperator()
        for a, b in zip(times[:-1], times[1:]):
            v = scipy.linalg.expm(gen * (b - a)) @ v
            out.append(_unvec(v, d))
    else:
        step = (times[1] - times[0]) / 8 if len(times) > 1 else 0.0
        for a, b in zip(times[:-1], times[1:]):
            t = a
            while t < b:
                dt = min(step, b - t, max_step or np.inf)
                full = _super_magnus(model, t, dt) @ v
                half = _super_magnus(model, t + dt / 2, dt / 2) @ (_super_magnus(model, t, dt / 2) @ v)
                err = np.abs(full - half).max()
                if err <= tol:
                    v, t = half, t + dt
                    step = dt * min(2.0, 0.9 * (tol / max(err, 1e-300)) ** (1 / 3))
                else:
                    step = dt * max(0.2, 0.9 * (tol / err) ** (1 / 3))
                    if step < 1e-15 * max(abs(b), 1e-300):
                        raise PositivityViolation(f"step underflow at t={t:.6g}")
            out.append(_unvec(v, d))
    out = [(r + r.conj().T) / 2 for r in out]
    if check:
        for t, r in zip(times, out):
            check_state(r, tol=max(1e-8, 10 * tol), where=f"at t={t:.6g} s")
    return out


def period_map(model: LindbladModel, period: float, substeps: int = 64, t0: float = 0.0,
               unitary_steps: int = 1) -> np.ndarray:
    """One-period superoperator from Strang splitting of coherent and dissipative parts.

    The coherent substeps are fourth-order Magnus unitaries, so every factor is completely
    positive and the composite map stays a valid channel whatever the step.  Each of the
    ``substeps`` dissipative splits covers ``unitary_steps`` Magnus steps; the dissipator is
    usually slow compared with the drive, so a few splits per period are enough.
    """
    d = model.dim
    dt = period / substeps
    dis = model.dissipator_super()
    half = scipy.linalg.expm(dis * dt / 2)
    full = half @ half
    p = half.copy()
    for k in range(substeps):
        u = np.eye(d, dtype=complex)
        for j in range(unitary_steps):
            h = dt / unitary_steps
            u = magnus_step(model.h, t0 + k * dt + j * h, h) @ u
        cols = p.reshape(d, d, d * d)
        cols = np.einsum("ij,jkc->ikc", u, cols)
        cols = np.einsum("kl,ilc->ikc", u.conj(), cols)
        p = (half if k == substeps - 1 else full) @ cols.reshape(d * d, d * d)
    return p


def _apply_dissipator(jumps, rho):
    out = np.zeros_like(rho)
    for l, ld, ldl in jumps:
        out += l @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl)
    return out


class StroboscopicPropagator:
    """Period-to-period evolution of a state without forming the superoperator.

    Uses the same Strang splitting as :func:`period_map`: the unitary factors for one period
    are precomputed (the Hamiltonian is periodic) and the static dissipator is applied by a
    Taylor series of ``order`` terms.  Cost per period is a few dense d x d products, so it
    reaches Hilbert sizes where the d^2 x d^2 map would not fit.
    """

    def __init__(self, model: LindbladModel, period: float, substeps: int = 4, unitary_steps: int = 16,
                 order: int = 6, t0: float = 0.0):
        import scipy.sparse as sp
        self.period = period
        self.dt = period / substeps
        d = model.dim
        self.unitaries = []
        h = self.dt / unitary_steps
        for k in range(substeps):
            u = np.eye(d, dtype=complex)
            for j in range(unitary_steps):
                u = magnus_step(model.h, t0 + k * self.dt + j * h, h) @ u
            self.unitaries.append(u)
        self.jumps = []
        for l in model.jumps():
            l = sp.csr_matrix(l)
            ld = l.conj().T.tocsr()
            self.jumps.append((l, ld, (ld @ l).tocsr()))
        self.order = order
        rate = sum(abs(ldl).sum(axis=1).max() for _, _, ldl in self.jumps) if self.jumps else 0.0
        if rate * self.dt > 0.5:
            raise ValueError(f"dissipator step too large (rate*dt = {rate * self.dt:.3g}); raise substeps")

    def _dissipate(self, rho, tau):
        if not self.jumps:
            return rho
        term, out = rho, rho.copy()
        for n in range(1, self.order + 1):
            # sparse @ dense keeps the products cheap
            term = _apply_dissipator(self.jumps, term) * (tau / n)
            out = out + term
        return out

    def step(self, rho):
        rho = self._dissipate(rho, self.dt / 2)
        for k, u in enumerate(self.unitaries):
            rho = u @ rho @ u.conj().T
            rho = self._dissipate(rho, self.dt if k < len(self.unitaries) - 1 else self.dt / 2)
        return rho

    def run(self, rho0, n_periods: int, sample_every: int = 1, observables=()):
        """Same return shape as :func:`evolve_periodic`."""
        rho = np.asarray(rho0, dtype=complex)
        idx, rec = [0], [rho]
        for m in range(1, n_periods + 1):
            rho = self.step(rho)
            if m % sample_every == 0:
                rho = (rho + rho.conj().T) / 2
                idx.append(m)
                rec.append(rho)
        if observables:
            return np.array(idx), np.array([[np.trace(r @ o) for r in rec] for o in observables])
        return np.array(idx), rec


def map_power(pmap: np.ndarray, n: int) -> np.ndarray:
    """pmap**n by repeated squaring."""
    return np.linalg.matrix_power(pmap, n)


def evolve_periodic(pmap: np.ndarray, rho0, n_periods: int, sample_every: int = 1, observables=()):
    """Stroboscopic evolution under a one-period map.

    Returns (period indices, states or observable traces).  With ``observables`` only the
    expectation values Tr[rho O] are kept.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    v = _vec(rho0)
    idx, rec = [0], [v]
    for m in range(1, n_periods + 1):
        v = pmap @ v
        if m % sample_every == 0:
            idx.append(m)
            rec.append(v)
    rec = np.array(rec)
    if observables:
        # Tr[rho O] = sum_ij rho_ij O_ji
        return np.array(idx), np.array([rec @ _vec(np.asarray(o).T) for o in observables])
    return np.array(idx), [_unvec(r, d) for r in rec]


# ---------------------------------------------------------------- rate extraction

@dataclass
class SlopeFit:
    rate: float
    r_squared: float
    window: tuple


def slope_rate(times, signal, window_fraction: float = 2 / 3, min_r2: float = 0.99) -> SlopeFit:
    """Decay rate from a straight-line fit of log|signal| over the last part of the trace."""
    times = np.asarray(times, dtype=float)
    y = np.log(np.abs(np.asarray(signal)))
    start = int(len(times) * (1 - window_fraction))
    t, y = times[start:], y[start:]
    slope, icpt = np.polyfit(t, y, 1)
    resid = y - (slope * t + icpt)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0 else 1 - np.sum(resid**2) / ss_tot
    if r2 < min_r2:
        raise UnreliableRate(f"non-linear decay; rate unreliable (R^2 = {r2:.4f})")
    return SlopeFit(-slope, r2, (t[0], t[-1]))


def transition_operator(basis, labels, space, source: tuple, target: tuple, mode: int):
    """sum over spectator labels of |target-like><source-like| in the dressed basis.

    ``source`` / ``target`` give the occupation of ``mode``; every label that agrees elsewhere
    is summed over (the reduced-matrix element of that mode).
    """
    index = {tuple(l): k for k, l in enumerate(labels)}
    d = basis.shape[0]
    op = np.zeros((d, d), dtype=complex)
    for lab, k in index.items():
        if lab[mode] != source:
            continue
        other = list(lab)
        other[mode] = target
        j = index.get(tuple(other))
        if j is not None:
            op += np.outer(basis[:, j], basis[:, k].conj())
    return op


def dressed_basis(h_static, space, max_excitations=None):
    """Eigenvectors of a static Hamiltonian labeled by their dominant Fock state."""
    vals, vecs = np.linalg.eigh(h_static)
    labels = [space.label(int(np.argmax(np.abs(vecs[:, k])))) for k in range(len(vals))]
    if len(set(labels)) != len(labels):
        warnings.warn("dressed labels collide; using Fock labels of the largest component anyway",
                      RuntimeWarning, stacklevel=2)
    return vals, vecs, labels


def ramsey_dephasing(pmap, rho0, measure, period, n_periods, sample_every=1, min_r2=0.99):
    """Ramsey decay rate from |Tr[rho M01]| sampled stroboscopically."""
    idx, (trace,) = evolve_periodic(pmap, rho0, n_periods, sample_every, observables=[measure])
    return slope_rate(idx * period, trace, min_r2=min_r2), idx * period, trace


def decay_extraction(pmap, rho0, measure, period, n_periods, sample_every=1, min_r2=0.99):
    """Population decay rate from Tr[rho M11] sampled stroboscopically."""
    idx, (trace,) = evolve_periodic(pmap, rho0, n_periods, sample_every, observables=[measure])
    return slope_rate(idx * period, trace.real, min_r2=min_r2), idx * period, trace.real


# ---------------------------------------------------------------- parameter fit

def normal_modes(omega_a, omega_b, c_a, c_b):
    """Complex frequencies (omega, kappa) of two modes sharing one bath channel."""
    m = np.array([[1j * omega_a - c_a**2 / 2, -c_a * c_b / 2],
                  [-c_a * c_b / 2, 1j * omega_b - c_b**2 / 2]])
    lam = np.linalg.eigvals(m)
    lam = lam[np.argsort(lam.imag)]
    return lam.imag, -2 * lam.real


@dataclass
class LindbladFit:
    omega_a: float   # rad/s
    omega_b: float
    c_a: float       # sqrt(1/s)
    c_b: float
    residual: float  # f_obj

    def table_units(self):
        """(GHz, GHz, sqrt(rad/ns), sqrt(rad/ns))"""
        return (self.omega_a / (2 * np.pi * 1e9), self.omega_b / (2 * np.pi * 1e9),
                self.c_a / math.sqrt(1e9), self.c_b / math.sqrt(1e9))


def fit_lindblad_parameters(omega_a, omega_b, kappa_a, kappa_b, tol: float = 1e-4) -> LindbladFit:
    """Dressed frequencies and joint-channel weights that reproduce two complex eigenfrequencies.

    Inputs in rad/s and 1/s.  Internally scaled to rad/ns.
    """
    s = 1e-9
    target = np.array([omega_a, omega_b, kappa_a, kappa_b]) * s

    def resid(x):
        w, k = normal_modes(x[0], x[1], x[2], x[3])
        return np.concatenate([(w - target[:2]) / target[:2], (k - target[2:]) / target[2:]])

    starts = [np.array([target[0], target[1], math.sqrt(abs(target[2])), math.sqrt(abs(target[3]))]),
              np.array([target[0], target[1], math.sqrt(abs(target[3])), math.sqrt(abs(target[2]))])]
    best = None
    for x0 in starts:
        sol = scipy.optimize.least_squares(resid, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if best is None or sol.cost < best.cost:
            best = sol
    f_obj = float(np.sum(best.fun**2))
    if f_obj > tol:
        raise ModelMismatch(f"model mismatch: f_obj = {f_obj:.3g}")
    wa, wb, ca, cb = best.x
    return LindbladFit(wa / s, wb / s, abs(ca) / math.sqrt(s), abs(cb) / math.sqrt(s), f_obj)


def input_output_drive(c_weights, power, omega_d):
    """Near-resonant drive amplitudes g_k = 2 c_k sqrt(P / (hbar omega_d)), rad/s."""
    from .modes import HBAR
    return 2 * np.asarray(c_weights) * math.sqrt(power / (HBAR * omega_d))


def steady_response(omegas, c_weights, drive, omega_d, extra_kappa=None):
    """Classical steady-state amplitudes of modes sharing a joint channel.

    Drive term cos(wd t) sum_k i g_k (a_k^dag - a_k); returns (xi_plus, xi_minus) per mode
    with a_k(t) = xi_plus e^{i wd t} + xi_minus e^{-i wd t}.
    """
    omegas = np.asarray(omegas, dtype=float)
    c = np.asarray(c_weights, dtype=float)
    g = np.asarray(drive, dtype=float)
    damp = np.outer(c, c) / 2
    if extra_kappa is not None:
        damp = damp + np.diag(np.asarray(extra_kappa) / 2)
    # da/dt = -i w a - damp a + g cos(wd t)
    gen = -1j * np.diag(omegas) - damp
    xi_minus = np.linalg.solve(-1j * omega_d * np.eye(len(c)) - gen, g / 2)
    xi_plus = np.linalg.solve(1j * omega_d * np.eye(len(c)) - gen, g / 2)
    return xi_plus, xi_minus


# ---------------------------------------------------------------- driven transmon + filter oracle

def ramp_periods(ramp_time: float, period: float) -> int:
    """Ramp length rounded up to whole drive periods."""
    return int(math.ceil(ramp_time / period - 1e-9))


DENSE_MAP_LIMIT = 40  # Hilbert dimension up to which the d^2 x d^2 period map is formed


def _stroboscopic(model, period, rho0, every, samples, measure, substeps):
    """Tr[rho M] every ``every`` periods, via the dense map for small systems."""
    if model.dim <= DENSE_MAP_LIMIT:
        pmap = map_power(period_map(model, period, substeps, unitary_steps=8), every)
        idx, (trace,) = evolve_periodic(pmap, rho0, samples, 1, [measure])
        return idx * every, trace
    prop = StroboscopicPropagator(model, period, substeps=substeps)
    idx, (trace,) = prop.run(rho0, every * samples, every, [measure])
    return idx, trace


@dataclass
class FilterOracle:
    """Transmon plus two filter modes sharing one bath, simulated in the displaced frame.

    The filter drive enters only through the junction phase displacement, so the filters sit
    near their undriven (vacuum or thermal) state and small cutoffs suffice.  Mode order is
    (transmon, filter a, filter b).  ``c_weights`` are the signed joint-channel weights;
    ``split=True`` replaces the joint channel with independent channels for comparison.
    """

    omegas: tuple            # (q, a, b), rad/s
    josephson_energy: float  # joules
    beta: tuple              # (q, a, b)
    c_weights: tuple         # (c_a, c_b), sqrt(1/s)
    kappa_q: float = 0.0
    split: bool = False

    def build(self, displacement, omega_d: float, cutoffs, occupation: float = 0.0):
        from .hamiltonian import FockSpace, HamiltonianModel, build
        space = FockSpace(list(cutoffs))
        frame = {"frame": "displaced", "omega_d": omega_d, "displacement": [displacement]}
        model = HamiltonianModel(list(self.omegas), [self.josephson_energy], [list(self.beta)],
                                 tuple(cutoffs), **frame)
        h = build(model, space)
        ops = [space.lower(1), space.lower(2)]
        make = split_channels if self.split else joint_channel
        channels = make(ops, list(self.c_weights), occupation)
        channels = channels if isinstance(channels, list) else [channels]
        if self.kappa_q > 0:
            channels.append(Channel(space.lower(0), self.kappa_q, 0.0, "transmon"))
        return LindbladModel(h, channels), h, space

    def _initial(self, h, omega_d, displacement, labels, vecs, states):
        """Floquet modes continuously connected to the requested dressed states."""
        from .floquet import floquet_modes
        idx = [labels.index(s) for s in states]
        if displacement == 0:
            return [vecs[:, k] for k in idx]
        fb = floquet_modes(h, omega_d, n_samples=8, static=h.static)
        return [fb.modes[0][:, fb.index_of(k)] for k in idx]

    def dephasing_rate(self, displacement, omega_d, cutoffs, occupation=0.0, duration=0.25e-6,
                       samples=25, substeps=4, min_r2=0.99):
        """Ramsey rate of the transmon 0-1 coherence, reduced over the filter states."""
        lm, h, space = self.build(displacement, omega_d, cutoffs, occupation)
        _, vecs, labels = dressed_basis(h.static, space)
        g, e = self._initial(h, omega_d, displacement, labels, vecs, [(0, 0, 0), (1, 0, 0)])
        psi = (g + e) / math.sqrt(2)
        measure = transition_operator(vecs, labels, space, 1, 0, mode=0)
        period = 2 * np.pi / omega_d
        every = max(1, int(duration / period / samples))
        idx, trace = _stroboscopic(lm, period, np.outer(psi, psi.conj()), every, samples, measure, substeps)
        return slope_rate(idx * period, trace, min_r2=min_r2).rate

    def decay_rate(self, displacement, omega_d, cutoffs, duration=2e-6, samples=50, substeps=8,
                   min_r2=0.99):
        """Decay of the transmon first excited manifold, summed over filter states."""
        lm, h, space = self.build(displacement, omega_d, cutoffs)
        _, vecs, labels = dressed_basis(h.static, space)
        (e,) = self._initial(h, omega_d, displacement, labels, vecs, [(1, 0, 0)])
        measure = sum(np.outer(vecs[:, k], vecs[:, k].conj()) for k, l in enumerate(labels) if l[0] == 1)
        period = 2 * np.pi / omega_d
        every = max(1, int(duration / period / samples))
        idx, trace = _stroboscopic(lm, period, np.outer(e, e.conj()), every, samples, measure, substeps)
        return slope_rate(idx * period, trace.real, min_r2=min_r2).rate

    def drive_displacement(self, power, omega_d):
        """Junction phasor from the input-output calibrated filter drive."""
        c = np.asarray(self.c_weights, dtype=float)
        g = input_output_drive(c, power, omega_d)
        xi_plus, xi_minus = steady_response(self.omegas[1:], c, g, omega_d)
        beta = np.asarray(self.beta[1:], dtype=float)
        return complex(2 * np.sum(beta * (xi_plus + np.conj(xi_minus)))), xi_plus, xi_minus
