"""Truncated Fock-space Hamiltonians for static, biased and driven frames.

Operators are dense matrices over the tensor product of per-mode Fock spaces.
Hamiltonians are returned as H/hbar, in rad/s.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .modes import HBAR

FRAMES = ("static", "biased", "displaced", "irrotational", "overlap")


class LabelingAmbiguity(RuntimeError):
    pass


class FockSpace:
    def __init__(self, cutoffs):
        self.cutoffs = tuple(int(c) for c in cutoffs)
        if any(c < 2 for c in self.cutoffs):
            raise ValueError("every Fock cutoff must be at least 2")
        self.dim = int(np.prod(self.cutoffs))
        self._ops = {}

    @property
    def modes(self) -> int:
        return len(self.cutoffs)

    def identity(self):
        return np.eye(self.dim, dtype=complex)

    def _embed(self, i, single):
        mats = [np.eye(c) for c in self.cutoffs]
        mats[i] = single
        return reduce(np.kron, mats)

    def lower(self, i):
        if ("a", i) not in self._ops:
            c = self.cutoffs[i]
            self._ops["a", i] = self._embed(i, np.diag(np.sqrt(np.arange(1, c)), 1))
        return self._ops["a", i]

    def raise_(self, i):
        return self.lower(i).conj().T

    def number(self, i):
        if ("n", i) not in self._ops:
            self._ops["n", i] = self._embed(i, np.diag(np.arange(self.cutoffs[i], dtype=float)))
        return self._ops["n", i]

    def position(self, i):
        """a + a^dagger"""
        a = self.lower(i)
        return a + a.conj().T

    def momentum(self, i):
        """i (a^dagger - a)"""
        a = self.lower(i)
        return 1j * (a.conj().T - a)

    def index(self, label) -> int:
        return int(np.ravel_multi_index(tuple(label), self.cutoffs))

    def label(self, index) -> tuple:
        return tuple(int(x) for x in np.unravel_index(index, self.cutoffs))

    def basis(self, label) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(label)] = 1
        return v


def is_hermitian(op, rtol=1e-12) -> bool:
    scale = max(np.abs(op).max(), 1e-300)
    return np.abs(op - op.conj().T).max() < rtol * scale


def apply_function(op, func):
    """f(op) for a Hermitian operator through its spectral decomposition."""
    if not is_hermitian(op):
        raise ValueError("operator is not Hermitian")
    op = (op + op.conj().T) / 2
    if np.iscomplexobj(op) and not np.any(op.imag):
        op = op.real
    vals, vecs = np.linalg.eigh(op)
    return (vecs * func(vals)[None, :]) @ vecs.conj().T


def phase_operator(space: FockSpace, beta_row) -> np.ndarray:
    """sum_i beta_i (a_i + a_i^dagger), a real symmetric matrix"""
    out = np.zeros((space.dim, space.dim))
    for i, b in enumerate(beta_row):
        if b != 0:
            out += b * space.position(i)
    return out


def cos_nl_operator(space: FockSpace, beta_row, offset: float = 0.0):
    """cos(phi + offset) + (phi + offset)^2 / 2, phi = sum_i beta_i (a_i + a_i^dagger)."""
    phi = phase_operator(space, beta_row)
    return apply_function(phi, lambda x: np.cos(x + offset) + (x + offset) ** 2 / 2)


def sin_nl_operator(space: FockSpace, beta_row, offset: float = 0.0):
    """sin(phi + offset) - (phi + offset)"""
    phi = phase_operator(space, beta_row)
    return apply_function(phi, lambda x: np.sin(x + offset) - (x + offset))


# ---------------------------------------------------------------- models

def _phasor_signal(phasor, omega_d):
    phasor = complex(phasor)
    return lambda t: (phasor * np.exp(1j * omega_d * t)).real


@dataclass
class HamiltonianModel:
    omega: np.ndarray              # rad/s, per mode
    josephson_energy: np.ndarray   # joules, per junction
    beta: np.ndarray               # (n_junctions, n_modes)
    cutoffs: tuple
    frame: str = "static"
    dc_phase: np.ndarray | None = None
    omega_d: float = 0.0
    displacement: np.ndarray | None = None  # DF junction phasors, or callables of t
    modulation: np.ndarray | None = None    # IG junction phasors
    residual: np.ndarray | None = None      # overlap junction phasors
    charge_drive: np.ndarray | None = None  # overlap per-mode phasors, joules

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.josephson_energy = np.atleast_1d(np.asarray(self.josephson_energy, dtype=float))
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        allowed = {"static": set(), "biased": set(), "displaced": {"displacement"},
                   "irrotational": {"modulation"}, "overlap": {"residual", "charge_drive"}}[self.frame]
        for slot in ("displacement", "modulation", "residual", "charge_drive"):
            if getattr(self, slot) is not None and slot not in allowed:
                raise ValueError(f"frame {self.frame!r} does not take a {slot} term")
        if self.beta.shape != (len(self.josephson_energy), len(self.omega)):
            raise ValueError("beta must be (n_junctions, n_modes)")

    def phase_signals(self):
        """Per-junction scalar phase added inside the cosine, as functions of t."""
        slot = {"displaced": self.displacement, "irrotational": self.modulation,
                "overlap": self.residual}.get(self.frame)
        if slot is None:
            return [None] * len(self.josephson_energy)
        return [s if callable(s) else _phasor_signal(s, self.omega_d) for s in slot]


@dataclass
class TimeDependentOperator:
    """static + sum_j coefficient_j(t) * operator_j, in rad/s."""
    static: np.ndarray
    terms: list = field(default_factory=list)  # (callable, matrix)
    period: float | None = None

    def __call__(self, t: float) -> np.ndarray:
        out = self.static.astype(complex)
        for coef, op in self.terms:
            c = coef(t)
            if c != 0:
                out += c * op
        return out

    @property
    def is_static(self) -> bool:
        return not self.terms

    @property
    def dim(self) -> int:
        return self.static.shape[0]


def build(model: HamiltonianModel, space: FockSpace | None = None) -> TimeDependentOperator:
    """Assemble H(t)/hbar for the model's frame as a static part plus modulated terms."""
    space = space or FockSpace(model.cutoffs)
    h0 = np.zeros((space.dim, space.dim))
    for i, w in enumerate(model.omega):
        h0 += w * space.number(i)
    terms = []
    dc = np.zeros(len(model.josephson_energy)) if model.dc_phase is None else np.asarray(model.dc_phase)
    for k, (ej, row, signal) in enumerate(zip(model.josephson_energy, model.beta, model.phase_signals())):
        e = ej / HBAR
        cd, sd = np.cos(dc[k]), np.sin(dc[k])
        phi = phase_operator(space, row)
        vals, vecs = np.linalg.eigh(phi)

        def spec(f, vecs=vecs, vals=vals):
            return (vecs * f(vals)[None, :]) @ vecs.conj().T

        cos_op = spec(lambda x: np.cos(x + dc[k]))
        sin_op = spec(lambda x: np.sin(x + dc[k]))
        phi2 = phi @ phi
        # cos(dc + phi + y) - cos dc + sin dc (phi + y) + cos dc (phi + y)^2 / 2, times -E_J
        h0 += -e * (cos_op - cd * np.eye(space.dim) + sd * phi + 0.5 * cd * phi2)
        if signal is None:
            continue
        terms.append((lambda t, s=signal: -(np.cos(s(t)) - 1.0), e * cos_op))
        terms.append((lambda t, s=signal: np.sin(s(t)), e * sin_op))
        terms.append((lambda t, s=signal, cd=cd: -cd * s(t), e * phi))
        terms.append((lambda t, s=signal, cd=cd, sd=sd: -(sd * s(t) + 0.5 * cd * s(t) ** 2),
                      e * space.identity()))
        if model.frame == "irrotational":
            terms.append((signal, e * phi))
    if model.frame == "overlap" and model.charge_drive is not None:
        for i, g in enumerate(model.charge_drive):
            sig = g if callable(g) else _phasor_signal(g, model.omega_d)
            terms.append((lambda t, s=sig: s(t) / HBAR, space.momentum(i)))  # i g (a^dag - a)
    period = 2 * np.pi / model.omega_d if model.omega_d else None
    return TimeDependentOperator(h0, terms, period)


def static_hamiltonian(model: HamiltonianModel, space=None) -> np.ndarray:
    return build(HamiltonianModel(model.omega, model.josephson_energy, model.beta, model.cutoffs,
                                  "biased" if model.dc_phase is not None else "static", model.dc_phase),
                 space).static


# ---------------------------------------------------------------- spectra

@dataclass
class Eigensystem:
    energies: np.ndarray  # rad/s
    vectors: np.ndarray   # columns
    space: FockSpace
    labels: dict          # Fock label tuple -> eigen index

    def energy(self, label) -> float:
        try:
            return self.energies[self.labels[tuple(label)]]
        except KeyError:
            raise KeyError(f"state {tuple(label)} was not labeled") from None

    def state(self, label) -> np.ndarray:
        return self.vectors[:, self.labels[tuple(label)]]

    def to_json(self) -> str:
        return json.dumps({"energies_hz": {str(k): self.energies[v] / (2 * np.pi) for k, v in
                                           sorted(self.labels.items())}}, indent=2)


def labels_up_to(cutoffs, max_excitations: int):
    out = []
    for lab in itertools.product(*[range(min(c, max_excitations + 1)) for c in cutoffs]):
        if sum(lab) <= max_excitations:
            out.append(lab)
    return sorted(out, key=lambda x: (sum(x), tuple(-v for v in x)))


def diagonalize_and_label(h, space: FockSpace, labels=None, max_excitations: int = 2) -> Eigensystem:
    """Eigenpairs sorted by energy; each requested Fock label gets the eigenvector of max |overlap|."""
    if not is_hermitian(h):
        raise ValueError("Hamiltonian is not Hermitian")
    h = (h + h.conj().T) / 2
    if np.iscomplexobj(h) and not np.any(h.imag):
        h = h.real
    vals, vecs = np.linalg.eigh(h)
    labels = labels_up_to(space.cutoffs, max_excitations) if labels is None else [tuple(x) for x in labels]
    weights = np.abs(vecs) ** 2
    assigned = {}
    owner = {}
    for lab in labels:
        row = weights[space.index(lab)]
        j = int(np.argmax(row))
        if j in owner:
            table = {str(owner[j]): float(weights[space.index(owner[j]), j]), str(lab): float(row[j])}
            raise LabelingAmbiguity(f"eigenvector {j} claimed by two labels; overlaps {table}")
        owner[j] = lab
        assigned[lab] = j
    return Eigensystem(vals, vecs, space, assigned)


def cross_kerr(eig: Eigensystem, mode_i: int, mode_j: int) -> float:
    """E_{1i,1j} - E_{1i} - E_{1j} + E_0, in Hz."""
    n = eig.space.modes
    zero = (0,) * n
    ei = tuple(1 if m == mode_i else 0 for m in range(n))
    ej = tuple(1 if m == mode_j else 0 for m in range(n))
    both = tuple(1 if m in (mode_i, mode_j) else 0 for m in range(n))
    return (eig.energy(both) - eig.energy(ei) - eig.energy(ej) + eig.energy(zero)) / (2 * np.pi)


def dump_operator(op: np.ndarray, path) -> None:
    """Dense binary layout: int64 ndim, int64 dims, then row-major complex128 data."""
    op = np.ascontiguousarray(op, dtype=np.complex128)
    with open(path, "wb") as f:
        np.array([op.ndim, *op.shape], dtype=np.int64).tofile(f)
        op.tofile(f)


def load_operator(path) -> np.ndarray:
    with open(path, "rb") as f:
        ndim = int(np.fromfile(f, np.int64, 1)[0])
        shape = tuple(np.fromfile(f, np.int64, ndim))
        return np.fromfile(f, np.complex128).reshape(shape)
