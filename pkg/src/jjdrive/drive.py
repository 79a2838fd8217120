"""Drive extraction: junction phase displacements, irrotational-gauge modulations,
and overlap charge drives, all from linear circuit responses."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .modes import HBAR, ModeBasis, eigenmodes, junction_phase_amplitudes
from .netlist import (PHI0, CircuitNetlist, ImpedanceSet, NetlistError, impedance_matrix, make_netlist,
                      open_junctions, require_valid, stamp)


class IllConditionedWarning(RuntimeWarning):
    pass


class IncompleteModeSetWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------- power calibration

def dbm_to_watts(dbm: float) -> float:
    return 1e-3 * 10 ** (dbm / 10)


def watts_to_dbm(watts: float) -> float:
    return 10 * math.log10(watts / 1e-3) if watts > 0 else -math.inf


@dataclass(frozen=True)
class DriveSpec:
    port: str
    omega_d: float
    z0: float = 50.0
    power: float | None = None            # watts, available from the source
    source_voltage: complex | None = None  # source phasor amplitude, volts

    @classmethod
    def from_dbm(cls, port, omega_d, dbm, z0=50.0):
        return power_voltage(cls(port, omega_d, z0, power=dbm_to_watts(dbm)))

    @property
    def voltage(self) -> complex:
        if self.source_voltage is None:
            return power_voltage(self).source_voltage
        return self.source_voltage

    def at(self, omega_d: float) -> "DriveSpec":
        return replace(self, omega_d=omega_d)


def power_voltage(spec: DriveSpec) -> DriveSpec:
    """Fill whichever of power / source voltage is missing, via P = |V_S|^2 / (8 Z0)."""
    if spec.z0 <= 0:
        raise ValueError("Z0 must be positive")
    if (spec.power is None) == (spec.source_voltage is None):
        raise ValueError("give exactly one of power or source_voltage")
    if spec.power is None:
        return replace(spec, power=abs(spec.source_voltage) ** 2 / (8 * spec.z0))
    if spec.power < 0:
        raise ValueError("power must be non-negative")
    return replace(spec, source_voltage=complex(math.sqrt(8 * spec.power * spec.z0)))


def _as_list(drives):
    return [drives] if isinstance(drives, DriveSpec) else list(drives)


def _common_frequency(drives):
    freqs = {d.omega_d for d in drives}
    if len(freqs) != 1:
        raise ValueError("monochromatic extraction needs a single drive frequency")
    return freqs.pop()


# ---------------------------------------------------------------- junction responses

def port_response(net: CircuitNetlist, port: str, terminals, omega: float) -> np.ndarray:
    """Z_{terminal, port} / (Z0 + Z_port,port) with the other ports terminated by their Z0."""
    z0 = net.branch(port).value
    others = {b.id for b in net.ports if b.id != port}
    z = impedance_matrix(net, [port, *terminals], omega, load_ports=bool(others),
                         exclude={port}) if others else impedance_matrix(net, [port, *terminals], omega)
    return z[1:, 0] / (z0 + z[0, 0])


def _table_response(zset: ImpedanceSet, port: str, terminals, omega, z0, mode):
    zpp = zset.at(omega, port, port, mode)
    return np.array([zset.at(omega, t, port, mode) for t in terminals]) / (z0 + zpp)


def phase_susceptibility(source, port: str, terminals, omega: float, z0=None, mode="linear") -> np.ndarray:
    """Junction phase per volt of source amplitude: Z_JP / (i phi0 omega (Z0 + Z_PP))."""
    if isinstance(source, ImpedanceSet):
        if z0 is None:
            raise ValueError("impedance tables need an explicit Z0")
        resp = _table_response(source, port, terminals, omega, z0, mode)
    else:
        resp = port_response(source, port, terminals, omega)
    return resp / (1j * PHI0 * omega)


def df_displacements(source, drives, junctions=None, mode="linear") -> np.ndarray:
    """Junction phase displacement phasors from the closed-junction circuit response.

    ``source`` is a netlist or an ImpedanceSet; several drive ports add linearly.
    """
    drives = [power_voltage(d) if d.source_voltage is None else d for d in _as_list(drives)]
    if junctions is None:
        if isinstance(source, ImpedanceSet):
            raise ValueError("name the junction terminals when extracting from a table")
        junctions = [b.id for b in source.junctions]
    total = np.zeros(len(junctions), dtype=complex)
    for d in drives:
        chi = phase_susceptibility(source, d.port, junctions, d.omega_d, d.z0, mode)
        total += d.voltage * chi
    return total


def ig_opened(source, drives, junctions=None, mode="linear") -> np.ndarray:
    """Irrotational-gauge phase modulations from the opened-junction circuit."""
    if isinstance(source, CircuitNetlist):
        if junctions is None:
            junctions = [b.id for b in source.junctions]
        source = open_junctions(source)
    return df_displacements(source, drives, junctions, mode)


def inductive_elements(net: CircuitNetlist, modes: ModeBasis, include_inductors=False):
    """Element ids, energies phi0^2/L and beta rows for the R-matrix inversion."""
    branches = [b for b in net.branches
                if b.kind == "junction" or (include_inductors and b.kind == "inductor")]
    ids = [b.id for b in branches]
    energy = np.array([PHI0**2 / b.value for b in branches])
    sub = make_netlist([b if b.kind == "junction" else replace(b, kind="junction") for b in branches]
                       + [b for b in net.branches if b.id not in ids], net.ground, net.nodes)
    beta = junction_phase_amplitudes(sub, modes.profiles, modes.omega)
    order = [b.id for b in sub.junctions]
    return ids, energy, beta[[order.index(i) for i in ids]]


def ig_r_matrix(modes: ModeBasis, omega_d: float, energy=None, beta=None, mode_subset=None):
    """Matrix R with R F = A linking IG modulations to DF displacements; returns (R, cond)."""
    energy = modes.josephson_energy if energy is None else np.asarray(energy)
    beta = modes.beta if beta is None else np.asarray(beta)
    keep = np.arange(modes.size) if mode_subset is None else np.asarray(mode_subset)
    if mode_subset is not None and len(keep) < modes.size:
        warnings.warn("mode set truncated; modal reconstruction is incomplete and F_J is biased",
                      IncompleteModeSetWarning, stacklevel=2)
    w, k = modes.omega[keep], modes.kappa[keep]
    b = beta[:, keep]
    denom = HBAR * (omega_d**2 - w**2 - k**2 / 4 - 1j * k * omega_d)
    r = (b * (2 * w / denom)[None, :]) @ b.T * energy[None, :] + np.eye(len(energy))
    cond = np.linalg.cond(r)
    if cond > 1e10:
        warnings.warn(f"R matrix ill-conditioned near resonance (cond={cond:.3g})",
                      IllConditionedWarning, stacklevel=2)
    return r, cond


def ig_closed(displacements, r) -> np.ndarray:
    try:
        return np.linalg.solve(r, displacements)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(f"R is singular (cond={np.linalg.cond(r):.3g})") from None


def ig_sensitivity(r, displacements, sigma_rel: float) -> np.ndarray:
    """Std of |dF_J| per junction for uncorrelated relative errors sigma_rel on each A_k."""
    rinv = np.linalg.inv(r)
    return np.sqrt((np.abs(rinv * np.asarray(displacements)[None, :]) ** 2).sum(axis=1)) * sigma_rel


# ---------------------------------------------------------------- overlap method

def driven_node_voltages(net: CircuitNetlist, drives) -> dict:
    """Node voltage phasors of the closed-junction circuit driven through its ports."""
    drives = _as_list(drives)
    omega = _common_frequency(drives)
    require_valid(net)
    cap, cond, inv_l = stamp(net, load_ports=True)
    y = cond + 1j * omega * cap + inv_l / (1j * omega)
    idx = net.node_index()
    rhs = np.zeros(len(idx), dtype=complex)
    for d in drives:
        b = net.branch(d.port)
        current = d.voltage / b.value  # Norton equivalent of V_S behind Z0
        if b.node_from in idx:
            rhs[idx[b.node_from]] += current
        if b.node_to in idx:
            rhs[idx[b.node_to]] -= current
    v = np.linalg.solve(y, rhs)
    out = {n: v[i] for n, i in idx.items()}
    out[net.ground] = 0j
    return out


def overlap_reference(net: CircuitNetlist, ports=None) -> CircuitNetlist:
    """Undriven reference circuit: every drive port replaced by a short.

    Only capacitive port coupling is supported; an inductive branch on a port node would
    add flux modulations that this lumped overlap does not capture.
    """
    ports = [b.id for b in net.ports] if ports is None else list(ports)
    merge = {}
    for pid in ports:
        b = net.branch(pid)
        hot, cold = (b.node_from, b.node_to) if b.node_to == net.ground else (b.node_to, b.node_from)
        merge[hot] = cold
    for b in net.branches:
        if b.kind in ("inductor", "junction") and (b.node_from in merge or b.node_to in merge):
            raise NetlistError(f"branch {b.id} couples inductively to a port node; overlap extraction "
                               "supports capacitive port coupling only")

    def m(n):
        while n in merge:
            n = merge[n]
        return n

    kept = []
    for b in net.branches:
        if b.id in ports:
            continue
        nb = replace(b, node_from=m(b.node_from), node_to=m(b.node_to))
        if nb.node_from != nb.node_to:
            kept.append(nb)
    nodes = [n for n in net.nodes if n not in merge]
    return make_netlist(kept, net.ground, nodes)


def full_profiles(ref: CircuitNetlist, net: CircuitNetlist, modes: ModeBasis) -> dict:
    """Map reference-circuit node-flux profiles onto the original node names."""
    idx = ref.node_index()
    zero = np.zeros(modes.size)
    return {n: (modes.profiles[idx[n]] if n in idx else zero) for n in net.nodes}


@dataclass
class OverlapResult:
    charge_drive: np.ndarray   # g_i phasors, joules
    overlap: np.ndarray        # O_i phasors
    contributions: np.ndarray  # (n_junctions, n_modes) A_k^(i) phasors
    omega_d: float

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.contributions, axis=1)


def overlap_charge_drives(net: CircuitNetlist, modes: ModeBasis, node_voltages: dict, omega_d: float,
                          ref: CircuitNetlist | None = None, internal_kappa=None) -> OverlapResult:
    """Project the driven capacitor voltages on the undriven mode voltage profiles.

    ``modes`` must come from ``ref`` (the undriven circuit).  With ``internal_kappa`` given,
    the lossy-overlap variant splits each linewidth into port and internal parts.
    """
    ref = overlap_reference(net) if ref is None else ref
    cap, _, _ = stamp(ref)
    norm = np.einsum("ni,nm,mi->i", modes.profiles, cap, modes.profiles)
    lossless = modes.kappa == 0
    if np.any(np.abs(norm[lossless] - 1) > 1e-8):
        raise NetlistError(f"mode profiles not capacitance-normalized (max error {np.abs(norm - 1).max():.2e})")
    prof = full_profiles(ref, net, modes)
    overlap = np.zeros(modes.size, dtype=complex)
    for b in net.capacitors:
        dv = node_voltages[b.node_from] - node_voltages[b.node_to]
        du = prof[b.node_from] - prof[b.node_to]
        overlap += b.value * dv * du / np.sqrt(norm)

    w, k = modes.omega, modes.kappa
    k_int = 0.0 if internal_kappa is None else np.asarray(internal_kappa)
    prefactor = (omega_d**2 - w**2 - k**2 / 4 - 1j * omega_d * k) / (w**2 + k**2 / 4 + 1j * omega_d * k_int)
    g = prefactor * np.sqrt(HBAR * w / 2) * overlap
    response = (2j * omega_d + k) / (w**2 - omega_d**2 + 1j * k * omega_d + k**2 / 4) / HBAR
    contributions = modes.beta * (g * response)[None, :]
    return OverlapResult(g, overlap, contributions, omega_d)


def overlap_residuals(displacements, result: OverlapResult, n_keep: int | None = None) -> np.ndarray:
    n_keep = result.contributions.shape[1] if n_keep is None else n_keep
    return np.asarray(displacements) - result.contributions[:, :n_keep].sum(axis=1)


def overlap_extract(net: CircuitNetlist, drives):
    """Convenience chain: reference modes, driven voltages, overlaps and DF displacements."""
    drives = _as_list(drives)
    omega_d = _common_frequency(drives)
    ref = overlap_reference(net)
    modes = eigenmodes(ref)
    res = overlap_charge_drives(net, modes, driven_node_voltages(net, drives), omega_d, ref)
    return modes, res, df_displacements(net, drives)


# ---------------------------------------------------------------- susceptibility tables

@dataclass
class DriveParameterSet:
    omega_d: float
    frame: str
    junctions: list
    displacement: np.ndarray | None = None   # DF
    modulation: np.ndarray | None = None     # IG
    residual: np.ndarray | None = None       # overlap
    charge_drive: np.ndarray | None = None   # overlap, per mode
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def enc(a):
            return None if a is None else [[abs(x), float(np.angle(x))] for x in np.atleast_1d(a)]
        return json.dumps({"omega_d": self.omega_d, "frame": self.frame, "junctions": self.junctions,
                           "displacement": enc(self.displacement), "modulation": enc(self.modulation),
                           "residual": enc(self.residual), "charge_drive": enc(self.charge_drive),
                           "provenance": self.provenance}, indent=2)


def susceptibility(kind: str, net: CircuitNetlist, port: str, omegas, junctions=None) -> np.ndarray:
    """Parameter phasor per volt of source amplitude over a frequency grid.

    kind is 'A' (DF displacement), 'F' (opened-junction IG modulation) or 'g' (overlap drive).
    """
    junctions = [b.id for b in net.junctions] if junctions is None else junctions
    z0 = net.branch(port).value
    rows = []
    for w in omegas:
        unit = DriveSpec(port, w, z0, source_voltage=1.0)
        if kind == "A":
            rows.append(df_displacements(net, unit, junctions))
        elif kind == "F":
            rows.append(ig_opened(net, unit, junctions))
        elif kind == "g":
            rows.append(overlap_extract(net, unit)[1].charge_drive)
        else:
            raise ValueError(f"unknown parameter kind {kind!r}")
    return np.array(rows)
