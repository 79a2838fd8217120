"""Normal modes of the linearized circuit and the dc-bias Bogoliubov rotation."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import constants

from .netlist import PHI0, CircuitNetlist, NetlistError, require_valid, stamp

HBAR = constants.hbar


class DegenerateModesWarning(RuntimeWarning):
    pass


class UnstableExpansionPoint(ValueError):
    pass


@dataclass
class ModeBasis:
    omega: np.ndarray          # rad/s
    kappa: np.ndarray          # rad/s, energy decay rate
    beta: np.ndarray           # (n_junctions, n_modes), signed
    junctions: list
    josephson_energy: np.ndarray  # joules, per junction
    profiles: np.ndarray       # (n_free_nodes, n_modes) node-flux shapes, u^T Gamma u = omega^2
    nodes: list
    notes: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.omega)

    @property
    def participation(self) -> np.ndarray:
        return self.beta**2 * 2 * self.josephson_energy[:, None] / (HBAR * self.omega[None, :])

    @property
    def signs(self) -> np.ndarray:
        return np.where(self.beta < 0, -1, 1)

    def zero_point_flux(self) -> np.ndarray:
        """Node flux zero-point amplitudes, webers."""
        return self.profiles * np.sqrt(HBAR / (2 * self.omega))[None, :]

    def subset(self, keep) -> "ModeBasis":
        keep = list(keep)
        return ModeBasis(self.omega[keep], self.kappa[keep], self.beta[:, keep], self.junctions,
                         self.josephson_energy, self.profiles[:, keep], self.nodes, list(self.notes))

    def to_json(self) -> str:
        rows = []
        for i in range(self.size):
            rows.append({
                "mode": i,
                "frequency_hz": self.omega[i] / (2 * np.pi),
                "linewidth_hz": self.kappa[i] / (2 * np.pi),
                "beta": {j: float(self.beta[k, i]) for k, j in enumerate(self.junctions)},
            })
        return json.dumps({"modes": rows, "sign_convention": "largest node-flux component positive",
                           "notes": self.notes}, indent=2)


def eigenmodes(net: CircuitNetlist, load_ports: bool = True) -> ModeBasis:
    """Complex eigenfrequencies lambda = i omega - kappa/2 of the linear network.

    Ports are loaded by their reference impedance, so the port loss shows up in kappa.
    """
    require_valid(net)
    cap, cond, inv_l = stamp(net, load_ports=load_ports)
    n = cap.shape[0]
    a = np.block([[np.zeros((n, n)), np.eye(n)], [-inv_l, -cond]])
    b = scipy.linalg.block_diag(np.eye(n), cap)
    lam, vec = scipy.linalg.eig(a, b)

    scale = np.sqrt(max(np.abs(inv_l).max(), 1e-300) / max(np.abs(cap).max(), 1e-300))
    notes = []
    picked = []
    for k, lk in enumerate(lam):
        if not np.isfinite(lk):
            continue
        if abs(lk) < 1e-9 * scale:
            notes.append("zero-frequency mode excluded")
            continue
        if lk.imag <= 1e-12 * scale:
            continue
        if abs(lk.imag) < abs(lk.real):
            notes.append(f"over-damped mode at {lk.imag / (2 * np.pi):.6g} Hz")
        picked.append(k)

    for k in picked:
        lam[k], vec[:n, k] = _refine(lam[k], vec[:n, k], cap, cond, inv_l)
    omega = lam[picked].imag
    kappa = -2 * lam[picked].real
    profiles = np.empty((n, len(picked)))
    for col, k in enumerate(picked):
        u = vec[:n, k]
        big = np.argmax(np.abs(u))
        u = u * np.exp(-1j * np.angle(u[big]))
        ur = u.real
        norm = ur @ inv_l @ ur
        if norm <= 0:
            # purely capacitive subspace has no inductive energy; use charging normalization
            ur = ur / np.sqrt(ur @ cap @ ur)
        else:
            ur = ur * omega[col] / np.sqrt(norm)
        profiles[:, col] = ur

    junctions = [b.id for b in net.junctions]
    ej = np.array([b.josephson_energy for b in net.junctions])
    beta = junction_phase_amplitudes(net, profiles, omega)

    # sort on frequency, then on largest junction participation
    part = beta**2 * 2 * ej[:, None] / (HBAR * omega[None, :]) if len(ej) else np.zeros((0, len(omega)))
    strongest = part.max(axis=0) if len(ej) else np.zeros(len(omega))
    order = np.lexsort((-strongest, omega))
    basis = ModeBasis(omega[order], np.maximum(kappa[order], 0.0), beta[:, order], junctions, ej,
                      profiles[:, order], net.free_nodes, notes)
    _warn_degenerate(basis.omega)
    return basis


def _refine(lam, u, cap, cond, inv_l, iterations=3):
    """Polish an eigenpair of (lam^2 C + lam G + K) u = 0.

    All three matrices are real symmetric, so u^T (not u^H) gives a stationary quotient and
    the linewidth of high-Q modes survives the conditioning of the state-space pencil.
    """
    for _ in range(iterations):
        a, b, c = u @ cap @ u, u @ cond @ u, u @ inv_l @ u
        roots = np.roots([a, b, c])
        lam = roots[np.argmin(np.abs(roots - lam))]
        q = lam**2 * cap + lam * cond + inv_l
        try:
            nxt = np.linalg.solve(q + 1e-14 * np.abs(q).max() * np.eye(len(u)), u)
        except np.linalg.LinAlgError:
            break
        u = nxt / np.linalg.norm(nxt)
    return lam, u


def junction_phase_amplitudes(net, profiles, omega) -> np.ndarray:
    idx = net.node_index()
    zpf = profiles * np.sqrt(HBAR / (2 * omega))[None, :]
    out = np.zeros((len(net.junctions), len(omega)))
    for k, b in enumerate(net.junctions):
        across = np.zeros(len(omega))
        if b.node_from in idx:
            across += zpf[idx[b.node_from]]
        if b.node_to in idx:
            across -= zpf[idx[b.node_to]]
        out[k] = across / PHI0
    return out


def participation(net: CircuitNetlist, modes: ModeBasis):
    """Signed junction participations beta, energy participations p and EPR signs."""
    if [b.id for b in net.junctions] != modes.junctions:
        raise NetlistError("mode basis was computed for a different set of junctions")
    _warn_degenerate(modes.omega)
    return modes.beta, modes.participation, modes.signs


def _warn_degenerate(omega):
    for i in range(len(omega) - 1):
        if abs(omega[i + 1] - omega[i]) < 1e-9 * omega[i]:
            warnings.warn(f"degenerate subspace at {omega[i] / (2 * np.pi):.9g} Hz; beta basis-dependent",
                          DegenerateModesWarning, stacklevel=3)


# ---------------------------------------------------------------- dc bias

@dataclass
class DcBias:
    phases: np.ndarray  # equilibrium phase across each junction, radians

    def gradient(self, josephson_energy, beta, extra=None) -> np.ndarray:
        """Linear-in-x coefficient of the potential at the expansion point (joules per unit x)."""
        grad = (np.asarray(josephson_energy) * np.sin(self.phases)) @ np.asarray(beta)
        if extra is not None:
            grad = grad + np.asarray(extra)
        return grad

    def verify(self, josephson_energy, beta, extra=None, tol=1e-10) -> None:
        grad = self.gradient(josephson_energy, beta, extra)
        scale = max(np.max(np.abs(josephson_energy)), 1e-300)
        if np.max(np.abs(grad), initial=0.0) > tol * scale:
            raise UnstableExpansionPoint(f"dc phases are not an equilibrium: residual gradient {grad}")


@dataclass
class BiasedBasis:
    omega: np.ndarray        # rotated mode frequencies, rad/s
    beta: np.ndarray         # (n_junctions, n_modes) rotated participations
    position_map: np.ndarray  # x = S x~
    momentum_map: np.ndarray  # p = T p~
    phases: np.ndarray

    def symplectic_defect(self) -> float:
        return float(np.abs(self.position_map @ self.momentum_map.T - np.eye(len(self.omega))).max())


def biased_quadratic_form(omega, josephson_energy, beta, phases):
    """Position-quadrature matrix K in H = (p^T W p + x^T K x)/4 around the biased point."""
    w = HBAR * np.asarray(omega, dtype=float)
    k = np.diag(w)
    for ej, row, ph in zip(josephson_energy, np.asarray(beta), phases):
        k = k + 2 * ej * (np.cos(ph) - 1) * np.outer(row, row)
    return np.diag(w), k


def biased_basis(modes_omega, josephson_energy, beta, bias: DcBias, extra_gradient=None) -> BiasedBasis:
    """Bogoliubov rotation removing the bias-induced quadratic coupling between modes."""
    bias.verify(josephson_energy, beta, extra_gradient)
    w, k = biased_quadratic_form(modes_omega, josephson_energy, beta, bias.phases)
    root_w = np.sqrt(np.diag(w))
    m = root_w[:, None] * k * root_w[None, :]
    lam, o = np.linalg.eigh((m + m.T) / 2)
    if lam.min() <= 0:
        raise UnstableExpansionPoint("biased quadratic form is not positive definite")
    s = root_w[:, None] * o * lam[None, :] ** -0.25
    t = (1 / root_w)[:, None] * o * lam[None, :] ** 0.25
    energy = np.sqrt(lam)
    rotated = np.asarray(beta) @ s
    return BiasedBasis(energy / HBAR, rotated, s, t, np.asarray(bias.phases))
