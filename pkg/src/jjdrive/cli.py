"""Command-line workbench: configuration, task orchestration and result bundles."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np
import yaml

from . import __version__
from . import netlist as nl

METHODS = ("df", "ig-closed", "ig-open", "overlap")
TASKS = ("extract", "modes", "impedance", "rates", "hamiltonian", "floquet", "lindblad")

_UREG = None


class ConfigError(ValueError):
    pass


def _ureg():
    global _UREG
    if _UREG is None:
        import pint
        _UREG = pint.UnitRegistry()
    return _UREG


def quantity(text, unit: str) -> float:
    """Parse '1.25 GHz' into SI magnitude of ``unit``; bare numbers are rejected."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        raise ConfigError(f"missing unit on {text!r} (expected {unit})")
    text = str(text).strip()
    if unit == "W" and text.lower().endswith("dbm"):
        from .drive import dbm_to_watts
        return dbm_to_watts(float(text[:-3]))
    if unit == "rad/s" and text.endswith("Hz"):
        return 2 * math.pi * _ureg().Quantity(text).to("Hz").magnitude
    q = _ureg().Quantity(text)
    if q.dimensionless and unit != "":
        raise ConfigError(f"missing unit on {text!r} (expected {unit})")
    return float(q.to(unit).magnitude)


# ---------------------------------------------------------------- configuration

@dataclass
class ExperimentConfig:
    netlist: Path
    output: Path
    methods: list = field(default_factory=list)
    tasks: list = field(default_factory=list)
    drive: dict = field(default_factory=dict)
    rates: dict = field(default_factory=dict)
    hamiltonian: dict = field(default_factory=dict)
    lindblad: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    raw: str = ""

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.raw.encode()).hexdigest()[:16]

    def frequency_grid(self):
        f = self.drive.get("frequencies")
        if f is None:
            raise ConfigError("drive.frequencies is required")
        if isinstance(f, dict):
            return np.linspace(quantity(f["start"], "rad/s"), quantity(f["stop"], "rad/s"), int(f["points"]))
        return np.array([quantity(x, "rad/s") for x in f])


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    raw = path.read_text()
    data = yaml.safe_load(raw) or {}
    base = path.parent
    if "netlist" not in data:
        raise ConfigError("config needs a netlist")
    cfg = ExperimentConfig(
        netlist=(base / data["netlist"]).resolve(),
        output=(base / data.get("output", "out")).resolve(),
        methods=list(data.get("methods", [])),
        tasks=list(data.get("tasks", [])),
        drive=dict(data.get("drive", {})),
        rates=dict(data.get("rates", {})),
        hamiltonian=dict(data.get("hamiltonian", {})),
        lindblad=dict(data.get("lindblad", {})),
        tolerances=dict(data.get("tolerances", {})),
        seed=int(data.get("seed", 0)),
        raw=raw,
    )
    if not cfg.netlist.exists():
        raise ConfigError(f"netlist file not found: {cfg.netlist}")
    for m in cfg.methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    for t in cfg.tasks:
        if t not in TASKS:
            raise ConfigError(f"unknown task {t!r}; choose from {', '.join(TASKS)}")
    for k, v in cfg.tolerances.items():
        if not float(v) > 0:
            raise ConfigError(f"tolerance {k} must be positive")
    return cfg


# ---------------------------------------------------------------- bundle writing

def _csv_text(header, rows, stamp) -> str:
    buf = io.StringIO()
    buf.write(f"# {stamp}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


class Bundle:
    """Collects outputs in memory and writes them (plus a manifest) in a fixed order."""

    def __init__(self, root: Path, config_hash: str):
        self.root = Path(root)
        self.config_hash = config_hash
        self.files = {}

    @property
    def stamp(self) -> str:
        return f"config_hash={self.config_hash} jjdrive={__version__}"

    def add_csv(self, name, header, rows):
        self.files[name] = _csv_text(header, rows, self.stamp)

    def add_json(self, name, obj):
        obj = dict(obj, config_hash=self.config_hash, version=__version__)
        self.files[name] = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"

    def write(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        manifest = {}
        for name in sorted(self.files):
            data = self.files[name].encode()
            (self.root / name).write_bytes(data)
            manifest[name] = hashlib.sha256(data).hexdigest()
        man = {"config_hash": self.config_hash, "version": __version__, "files": manifest}
        (self.root / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
        return self.root / "manifest.json"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(type(x))


# ---------------------------------------------------------------- tasks

def _drives(cfg, omega):
    from .drive import DriveSpec
    d = cfg.drive
    z0 = quantity(d.get("z0", "50 ohm"), "ohm")
    if "power" in d:
        return DriveSpec(d["port"], omega, z0, power=quantity(d["power"], "W"))
    return DriveSpec(d["port"], omega, z0, source_voltage=quantity(d["voltage"], "V"))


def task_extract(cfg, net):
    from . import drive as dr
    from .modes import eigenmodes
    junctions = [b.id for b in net.junctions]
    rows = []
    modes = eigenmodes(net) if "ig-closed" in cfg.methods else None
    for w in cfg.frequency_grid():
        spec = _drives(cfg, w)
        values = {}
        a = dr.df_displacements(net, spec, junctions)
        if "df" in cfg.methods:
            values["df"] = a
        if "ig-open" in cfg.methods:
            values["ig-open"] = dr.ig_opened(net, spec, junctions)
        if "ig-closed" in cfg.methods:
            r, _ = dr.ig_r_matrix(modes, w)
            values["ig-closed"] = dr.ig_closed(a, r)
        if "overlap" in cfg.methods:
            _, res, _ = dr.overlap_extract(net, spec)
            values["overlap"] = res.contributions.sum(axis=1)
        for method in cfg.methods:
            for j, v in zip(junctions, values[method]):
                rows.append([w, method, j, abs(v), float(np.angle(v))])
    return {"extract.csv": (["omega_rad_s", "method", "junction", "magnitude", "phase_rad"], rows)}


def task_modes(cfg, net):
    from .modes import eigenmodes
    m = eigenmodes(net)
    rows = [[i, m.omega[i], m.kappa[i], *m.beta[:, i]] for i in range(m.size)]
    header = ["mode", "omega_rad_s", "kappa_1_s", *[f"beta_{j}" for j in m.junctions]]
    return {"modes.csv": (header, rows), "modes.json": json.loads(m.to_json())}


def task_impedance(cfg, net):
    terms = cfg.drive.get("terminals") or [b.id for b in net.ports + net.junctions]
    zset = nl.impedance_sweep(net, terms, cfg.frequency_grid(), load_ports=False)
    rows = [[w, m, n, zset.z[k, i, j].real, zset.z[k, i, j].imag, zset.convention]
            for k, w in enumerate(zset.omegas) for i, m in enumerate(terms) for j, n in enumerate(terms)]
    return {"impedance.csv": (["omega_rad_s", "terminal_m", "terminal_n", "re_Z", "im_Z", "convention"], rows)}


def task_rates(cfg, net):
    """Single-junction decay by three routes: port-voltage noise, admittance zero, complex eigenfrequency."""
    from .modes import eigenmodes
    from .rates import NoisePsd, admittance_mode, purcell_admittance, purcell_transmon
    port = cfg.rates.get("port") or net.ports[0].id
    temp = quantity(cfg.rates.get("temperature", "0 K"), "K")
    junction = net.junctions[0]
    m = eigenmodes(net)
    k = int(np.argmax(m.participation[0]))
    w = m.omega[k]
    psd = NoisePsd(net.branch(port).value, temp)
    z = nl.impedance_matrix(nl.open_junctions(net), [junction.id, port], w)
    g_noise = purcell_transmon(z[0, 1], z[1, 1], junction.value, w, psd)
    w_adm, y, dy = admittance_mode(net, junction.id, w)
    g_adm = purcell_admittance(y, dy)
    rows = [["port-noise", w, g_noise, w / g_noise],
            ["admittance", w_adm, g_adm, w_adm / g_adm],
            ["eigenmode", w, m.kappa[k], w / m.kappa[k]]]
    return {"rates.csv": (["method", "omega_rad_s", "rate_1_s", "quality_factor"], rows)}


def _hamiltonian_inputs(cfg, net):
    from .modes import eigenmodes
    m = eigenmodes(net)
    keep = cfg.hamiltonian.get("modes", list(range(m.size)))
    cut = cfg.hamiltonian.get("cutoffs", [6] * len(keep))
    return m, keep, tuple(int(c) for c in cut)


def task_hamiltonian(cfg, net):
    from .hamiltonian import HamiltonianModel, diagonalize_and_label, static_hamiltonian, FockSpace, cross_kerr
    m, keep, cut = _hamiltonian_inputs(cfg, net)
    model = HamiltonianModel(m.omega[keep], m.josephson_energy, m.beta[:, keep], cut)
    space = FockSpace(cut)
    eig = diagonalize_and_label(static_hamiltonian(model, space), space)
    rows = [[i, j, cross_kerr(eig, i, j)] for i in range(len(keep)) for j in range(i + 1, len(keep))]
    levels = [["".join(map(str, lab)), (eig.energy(lab) - eig.energy((0,) * len(keep))) / (2 * math.pi)]
              for lab in eig.labels]
    return {"cross_kerr.csv": (["mode_i", "mode_j", "chi_hz"], rows),
            "levels.csv": (["label", "frequency_hz"], levels)}


def task_floquet(cfg, net):
    from .drive import df_displacements
    from .floquet import floquet_modes
    from .hamiltonian import HamiltonianModel, build
    m, keep, cut = _hamiltonian_inputs(cfg, net)
    rows = []
    for w in cfg.frequency_grid():
        a = df_displacements(net, _drives(cfg, w))
        model = HamiltonianModel(m.omega[keep], m.josephson_energy, m.beta[:, keep], cut,
                                 frame="displaced", omega_d=w, displacement=a)
        h = build(model)
        fb = floquet_modes(h, w, n_samples=int(cfg.hamiltonian.get("samples", 64)), static=h.static)
        for idx in range(min(len(fb.quasi), int(cfg.hamiltonian.get("levels", 4)))):
            try:
                rows.append([w, idx, fb.quasi[fb.index_of(idx)]])
            except KeyError:  # hybridized level, no unique partner
                continue
    return {"floquet.csv": (["omega_d_rad_s", "static_level", "quasi_energy_rad_s"], rows)}


def task_lindblad(cfg, net):
    from .lindblad import fit_lindblad_parameters
    from .modes import eigenmodes
    m = eigenmodes(net)
    ia, ib = cfg.lindblad.get("modes", [0, 1])
    fit = fit_lindblad_parameters(m.omega[ia], m.omega[ib], m.kappa[ia], m.kappa[ib])
    return {"lindblad_fit.json": {"omega_a_rad_s": fit.omega_a, "omega_b_rad_s": fit.omega_b,
                                  "c_a_sqrt_1_s": fit.c_a, "c_b_sqrt_1_s": fit.c_b, "f_obj": fit.residual}}


TASK_FUNCS = {"extract": task_extract, "modes": task_modes, "impedance": task_impedance, "rates": task_rates,
              "hamiltonian": task_hamiltonian, "floquet": task_floquet, "lindblad": task_lindblad}


def run(cfg: ExperimentConfig) -> Path:
    """Execute every task and write a bundle; identical configs give identical bytes."""
    np.random.seed(cfg.seed)
    net = nl.load(cfg.netlist)
    nl.require_valid(net)
    bundle = Bundle(cfg.output, cfg.digest)
    threads = int(os.environ.get("JJDRIVE_THREADS", "1"))

    def job(name):
        try:
            return name, TASK_FUNCS[name](cfg, net)
        except Exception as exc:  # surface with task context
            raise RuntimeError(f"task {name!r} failed: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(job, cfg.tasks))
    for _, outputs in results:
        for fname, payload in outputs.items():
            if fname.endswith(".csv"):
                bundle.add_csv(fname, *payload)
            else:
                bundle.add_json(fname, payload)
    return bundle.write()


# ---------------------------------------------------------------- compare

def _read_csv(path):
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def compare(bundle_a, bundle_b, rtol: float = 1e-9, per_column=None, atol: float = 0.0):
    """Relative differences of every numeric column shared by two bundles.

    Returns (passed, report rows).  Text columns must match exactly.
    """
    per_column = per_column or {}
    a, b = Path(bundle_a), Path(bundle_b)
    man_a = json.loads((a / "manifest.json").read_text())["files"]
    man_b = json.loads((b / "manifest.json").read_text())["files"]
    if set(man_a) != set(man_b):
        raise ConfigError(f"schema mismatch: files differ ({sorted(set(man_a) ^ set(man_b))})")
    report, ok = [], True
    for name in sorted(man_a):
        if not name.endswith(".csv"):
            continue
        ha, ra = _read_csv(a / name)
        hb, rb = _read_csv(b / name)
        if ha != hb or len(ra) != len(rb):
            raise ConfigError(f"schema mismatch in {name}")
        for c, col in enumerate(ha):
            va = [r[c] for r in ra]
            vb = [r[c] for r in rb]
            try:
                xa, xb = np.array(va, dtype=float), np.array(vb, dtype=float)
            except ValueError:
                same = va == vb
                ok &= same
                report.append((name, col, 0.0 if same else math.inf, 0.0, same))
                continue
            scale = np.maximum(np.abs(xa), np.abs(xb))
            diff = np.abs(xa - xb)
            rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1), 0.0)
            rel = np.where(diff <= atol, 0.0, rel)
            worst = float(rel.max()) if len(rel) else 0.0
            tol = float(per_column.get(col, rtol))
            passed = worst <= tol
            ok &= passed
            report.append((name, col, worst, tol, passed))
    return ok, report


# ---------------------------------------------------------------- click interface

def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


@click.group()
@click.version_option(__version__)
def main():
    """Driven Josephson-circuit workbench."""


@main.command()
@click.argument("netlist_path", type=click.Path(exists=True))
def validate(netlist_path):
    """Check a netlist file for structural problems."""
    try:
        net = nl.load(netlist_path)
    except nl.NetlistError as exc:
        _fail(exc)
    report = nl.validate_netlist(net)
    click.echo(str(report) if not report.ok else f"ok: {len(net.branches)} branches, digest {net.digest()}")
    sys.exit(0 if report.ok else 1)


@main.command()
@click.argument("netlist_path", type=click.Path(exists=True))
@click.option("--terminals", required=True, help="comma-separated port/junction ids")
@click.option("--start", required=True, help="e.g. '2 GHz'")
@click.option("--stop", required=True)
@click.option("--points", default=101, show_default=True)
@click.option("-o", "--output", type=click.Path(), required=True)
def impedance(netlist_path, terminals, start, stop, points, output):
    """Sweep the open-circuit impedance matrix and write it as CSV."""
    net = nl.load(netlist_path)
    grid = np.linspace(quantity(start, "rad/s"), quantity(stop, "rad/s"), points)
    nl.impedance_sweep(net, terminals.split(","), grid).to_csv(output)


@main.command()
@click.argument("netlist_path", type=click.Path(exists=True))
def modes(netlist_path):
    """Print the linear eigenmodes as JSON."""
    from .modes import eigenmodes
    click.echo(eigenmodes(nl.load(netlist_path)).to_json())


def _task_command(task):
    @click.argument("config_path", type=click.Path(exists=True))
    def cmd(config_path):
        try:
            cfg = load_config(config_path)
        except ConfigError as exc:
            _fail(exc)
        cfg.tasks = [task]
        click.echo(str(run(cfg)))
    cmd.__name__ = task
    cmd.__doc__ = f"Run the {task} task from a config file and write a bundle."
    return cmd


for _task in ("extract", "hamiltonian", "floquet", "rates", "lindblad"):
    main.command(name=_task)(_task_command(_task))


@main.command(name="run")
@click.argument("config_path", type=click.Path(exists=True))
def run_cmd(config_path):
    """Run every task listed in a config file."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        _fail(exc)
    click.echo(str(run(cfg)))


@main.command(name="compare")
@click.argument("bundle_a", type=click.Path(exists=True))
@click.argument("bundle_b", type=click.Path(exists=True))
@click.option("--rtol", default=1e-9, show_default=True, type=float)
@click.option("--column-tol", multiple=True, help="column=tol, overrides --rtol")
def compare_cmd(bundle_a, bundle_b, rtol, column_tol):
    """Compare two bundles column by column; exit status 1 on any failure."""
    per = {c.split("=")[0]: float(c.split("=")[1]) for c in column_tol}
    try:
        ok, report = compare(bundle_a, bundle_b, rtol, per)
    except ConfigError as exc:
        _fail(exc)
    for name, col, worst, tol, passed in report:
        click.echo(f"{'PASS' if passed else 'FAIL'} {name}:{col} max_rel={worst:.3g} tol={tol:.3g}")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
