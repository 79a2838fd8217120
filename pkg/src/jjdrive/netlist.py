"""Lumped-element Josephson circuit netlists and modified nodal analysis.

Phasors follow the e^{+i w t} time dependence throughout, so a capacitor has
impedance 1/(i w C) and an inductor i w L.  Voltages across a branch are
measured from ``node_from`` to ``node_to``.
"""

from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants

from . import _kernels

PHI0 = constants.hbar / (2 * constants.e)  # reduced flux quantum, Wb

KINDS = ("capacitor", "inductor", "resistor", "junction", "port")
_UNITS = {"capacitor": "F", "inductor": "H", "resistor": "ohm", "junction": "H", "port": "ohm"}


class NetlistError(ValueError):
    pass


class ResonantSingularity(NetlistError):
    pass


class SingularityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Branch:
    id: str
    kind: str
    node_from: str
    node_to: str
    value: float
    opened: bool = False  # junction removed from the network but kept as a terminal

    @property
    def josephson_energy(self) -> float:
        if self.kind != "junction":
            raise NetlistError(f"branch {self.id} is not a junction")
        return PHI0**2 / self.value


@dataclass(frozen=True)
class CircuitNetlist:
    nodes: tuple
    branches: tuple
    ground: str = "0"

    def branch(self, branch_id: str) -> Branch:
        for b in self.branches:
            if b.id == branch_id:
                return b
        raise NetlistError(f"unknown branch {branch_id!r}")

    @property
    def junctions(self) -> list:
        return [b for b in self.branches if b.kind == "junction"]

    @property
    def ports(self) -> list:
        return [b for b in self.branches if b.kind == "port"]

    @property
    def capacitors(self) -> list:
        return [b for b in self.branches if b.kind == "capacitor"]

    @property
    def free_nodes(self) -> list:
        return [n for n in self.nodes if n != self.ground]

    def node_index(self) -> dict:
        return {n: i for i, n in enumerate(self.free_nodes)}

    def with_junction_inductance(self, scale: float) -> "CircuitNetlist":
        out = tuple(replace(b, value=b.value * scale) if b.kind == "junction" else b for b in self.branches)
        return replace(self, branches=out)

    def digest(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:16]


def make_netlist(branches, ground: str = "0", nodes=None) -> CircuitNetlist:
    """Build a netlist from (kind, id, from, to, value) tuples or Branch objects."""
    out = []
    for b in branches:
        out.append(b if isinstance(b, Branch) else Branch(b[1], b[0], b[2], b[3], float(b[4])))
    if nodes is None:
        seen = [ground]
        for b in out:
            for n in (b.node_from, b.node_to):
                if n not in seen:
                    seen.append(n)
        nodes = seen
    return CircuitNetlist(tuple(nodes), tuple(out), ground)


@dataclass
class ValidationReport:
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __str__(self) -> str:
        return "valid" if self.ok else "; ".join(self.problems)


def validate_netlist(net: CircuitNetlist) -> ValidationReport:
    rep = ValidationReport()
    if net.ground not in net.nodes:
        rep.problems.append(f"missing ground node {net.ground!r}")
    ids = set()
    for b in net.branches:
        if b.id in ids:
            rep.problems.append(f"duplicate branch id {b.id!r}")
        ids.add(b.id)
        if b.kind not in KINDS:
            rep.problems.append(f"branch {b.id}: unknown kind {b.kind!r}")
        for n in (b.node_from, b.node_to):
            if n not in net.nodes:
                rep.problems.append(f"branch {b.id}: unknown node {n!r}")
        if b.node_from == b.node_to:
            rep.problems.append(f"branch {b.id}: both ends on node {b.node_from!r}")
        if not (math.isfinite(b.value) and b.value > 0):
            rep.problems.append(f"branch {b.id}: non-positive element value {b.value!r}")
    # connectivity through any branch, ports included
    adj = {n: set() for n in net.nodes}
    for b in net.branches:
        if b.node_from in adj and b.node_to in adj:
            adj[b.node_from].add(b.node_to)
            adj[b.node_to].add(b.node_from)
    if net.ground in adj:
        seen, stack = {net.ground}, [net.ground]
        while stack:
            for m in adj[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        for n in net.nodes:
            if not adj[n]:
                rep.problems.append(f"dangling node {n!r}")
            elif n not in seen:
                rep.problems.append(f"node {n!r} not connected to ground")
    return rep


def require_valid(net: CircuitNetlist) -> None:
    rep = validate_netlist(net)
    if not rep.ok:
        raise NetlistError(str(rep))


# ---------------------------------------------------------------- file format

def dumps(net: CircuitNetlist) -> str:
    lines = ["# jjdrive netlist v1", f"ground {net.ground}"]
    lines += [f"node {n}" for n in net.nodes if n != net.ground]
    for b in net.branches:
        extra = " opened" if b.opened else ""
        lines.append(f"{b.kind} {b.id} {b.node_from} {b.node_to} {b.value!r} {_UNITS[b.kind]}{extra}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> CircuitNetlist:
    ground, nodes, branches = None, [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "ground":
            ground = tok[1]
        elif tok[0] == "node":
            nodes.append(tok[1])
        elif tok[0] in KINDS:
            if len(tok) < 6 or tok[5] != _UNITS[tok[0]]:
                raise NetlistError(f"line {lineno}: expected '<kind> <id> <from> <to> <value> {_UNITS[tok[0]]}'")
            branches.append(Branch(tok[1], tok[0], tok[2], tok[3], float(tok[4]), "opened" in tok[6:]))
        else:
            raise NetlistError(f"line {lineno}: unknown record {tok[0]!r}")
    if ground is None:
        raise NetlistError("missing ground record")
    return CircuitNetlist(tuple([ground] + nodes), tuple(branches), ground)


def save(net: CircuitNetlist, path) -> None:
    with open(path, "w") as f:
        f.write(dumps(net))


def load(path) -> CircuitNetlist:
    with open(path) as f:
        return loads(f.read())


# ---------------------------------------------------------------- MNA

def open_junctions(net: CircuitNetlist) -> CircuitNetlist:
    """Remove every junction from the network (L_J -> inf), keeping its terminal."""
    out = tuple(replace(b, opened=True) if b.kind == "junction" else b for b in net.branches)
    return replace(net, branches=out)


def stamp(net: CircuitNetlist, load_ports: bool = False, exclude=()):
    """Real capacitance, conductance and inverse-inductance nodal matrices."""
    idx = net.node_index()
    n = len(idx)
    cap, cond, inv_l = np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n))
    for b in net.branches:
        if b.id in exclude or b.opened:
            continue
        if b.kind == "capacitor":
            target, val = cap, b.value
        elif b.kind == "resistor":
            target, val = cond, 1.0 / b.value
        elif b.kind in ("inductor", "junction"):
            target, val = inv_l, 1.0 / b.value
        elif b.kind == "port" and load_ports:
            target, val = cond, 1.0 / b.value
        else:
            continue
        i, j = idx.get(b.node_from), idx.get(b.node_to)
        if i is not None:
            target[i, i] += val
        if j is not None:
            target[j, j] += val
        if i is not None and j is not None:
            target[i, j] -= val
            target[j, i] -= val
    return cap, cond, inv_l


def incidence(net: CircuitNetlist, terminals) -> np.ndarray:
    idx = net.node_index()
    inc = np.zeros((len(idx), len(terminals)))
    for t, tid in enumerate(terminals):
        b = net.branch(tid)
        if b.node_from in idx:
            inc[idx[b.node_from], t] += 1.0
        if b.node_to in idx:
            inc[idx[b.node_to], t] -= 1.0
    return inc


def _check_terminals(net, terminals):
    for tid in terminals:
        if net.branch(tid).kind not in ("port", "junction"):
            raise NetlistError(f"terminal {tid!r} must be a port or a junction")


def impedance_matrix(net: CircuitNetlist, terminals, omega: float, load_ports: bool = False,
                     exclude=()) -> np.ndarray:
    """Open-circuit impedance matrix between terminals at one angular frequency."""
    if omega <= 0:
        raise NetlistError("omega must be positive")
    require_valid(net)
    _check_terminals(net, terminals)
    cap, cond, inv_l = stamp(net, load_ports, exclude)
    y = cond + 1j * omega * cap + inv_l / (1j * omega)
    inc = incidence(net, terminals)
    try:
        x = np.linalg.solve(y, inc)
    except np.linalg.LinAlgError:
        raise ResonantSingularity(
            f"nodal matrix singular at omega={omega:.6g} rad/s; add port loading or a resistive path") from None
    cond_num = np.linalg.cond(y)
    if not np.isfinite(cond_num) or cond_num > 1e12:
        warnings.warn(f"nodal matrix condition number {cond_num:.3g} at omega={omega:.6g} rad/s; "
                      "results flagged as unreliable", SingularityWarning, stacklevel=2)
    return inc.T @ x


def impedance_sweep(net: CircuitNetlist, terminals, omegas, load_ports: bool = False,
                    exclude=()) -> "ImpedanceSet":
    require_valid(net)
    _check_terminals(net, terminals)
    omegas = np.asarray(omegas, dtype=float)
    if np.any(omegas <= 0) or np.any(np.diff(omegas) <= 0):
        raise NetlistError("frequency grid must be positive and strictly increasing")
    cap, cond, inv_l = stamp(net, load_ports, exclude)
    z = _kernels.nodal_sweep(cond, cap, inv_l, incidence(net, terminals), omegas)
    if not np.all(np.isfinite(z)):
        raise ResonantSingularity("nodal matrix singular somewhere on the grid")
    return ImpedanceSet(omegas, list(terminals), z)


def admittance_at_junction(net: CircuitNetlist, junction: str, omega: float,
                           include_other_junctions: bool = True, grid_step: float | None = None):
    """Admittance seen by one junction (itself removed, ports loaded) and dY/domega."""
    require_valid(net)
    if net.branch(junction).kind != "junction":
        raise NetlistError(f"{junction!r} is not a junction")
    exclude = {junction}
    if not include_other_junctions:
        exclude |= {b.id for b in net.junctions}
    h = omega * 1e-6
    if grid_step is not None and grid_step > 10 * h:
        raise NetlistError(f"insufficient resolution: grid step {grid_step:.3g} exceeds {10 * h:.3g} rad/s")

    def y_at(w):
        return 1.0 / impedance_matrix(net, [junction], w, load_ports=True, exclude=exclude)[0, 0]

    y0 = y_at(omega)
    dy = (y_at(omega + h) - y_at(omega - h)) / (2 * h)
    return y0, dy


# ---------------------------------------------------------------- impedance tables

@dataclass
class ImpedanceSet:
    omegas: np.ndarray
    terminals: list
    z: np.ndarray  # (n_omega, n_term, n_term), physics convention
    convention: str = "physics"
    interpolated: bool = False

    def index(self, terminal: str) -> int:
        return self.terminals.index(terminal)

    def at(self, omega: float, m: str, n: str, mode: str = "linear") -> complex:
        i, j = self.index(m), self.index(n)
        w = self.omegas
        if omega < w[0] or omega > w[-1]:
            raise NetlistError(f"omega={omega:.6g} outside impedance grid [{w[0]:.6g}, {w[-1]:.6g}]")
        k = int(np.searchsorted(w, omega))
        if k < len(w) and w[k] == omega:
            return complex(self.z[k, i, j])
        if mode == "nearest":
            raise NetlistError(f"omega={omega:.6g} not on grid (nearest-with-error mode)")
        self.interpolated = True
        t = (omega - w[k - 1]) / (w[k] - w[k - 1])
        lo, hi = self.z[k - 1, i, j], self.z[k, i, j]
        return complex((1 - t) * lo.real + t * hi.real, (1 - t) * lo.imag + t * hi.imag)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["omega_rad_s", "terminal_m", "terminal_n", "re_Z", "im_Z", "convention"])
            for k, w in enumerate(self.omegas):
                for i, m in enumerate(self.terminals):
                    for j, n in enumerate(self.terminals):
                        z = self.z[k, i, j]
                        wr.writerow([repr(float(w)), m, n, repr(float(z.real)), repr(float(z.imag)), "physics"])

    @classmethod
    def from_csv(cls, path) -> "ImpedanceSet":
        rows = []
        with open(path, newline="") as f:
            for r in csv.DictReader(f):
                z = complex(float(r["re_Z"]), float(r["im_Z"]))
                conv = r.get("convention", "physics").strip()
                if conv == "engineering":  # tables written with j = -i
                    z = z.conjugate()
                elif conv != "physics":
                    raise NetlistError(f"unknown phasor convention {conv!r}")
                rows.append((float(r["omega_rad_s"]), r["terminal_m"], r["terminal_n"], z))
        omegas = sorted({r[0] for r in rows})
        terms = []
        for r in rows:
            for t in (r[1], r[2]):
                if t not in terms:
                    terms.append(t)
        z = np.full((len(omegas), len(terms), len(terms)), np.nan + 0j)
        wi = {w: i for i, w in enumerate(omegas)}
        for w, m, n, val in rows:
            z[wi[w], terms.index(m), terms.index(n)] = val
        return cls(np.array(omegas), terms, z)
