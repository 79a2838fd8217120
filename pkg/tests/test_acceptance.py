"""Acceptance criteria 1-11.  Each test prints one PASS/FAIL line; the terminal summary
collects them per criterion.

Run just this file with ``pytest tests/test_acceptance.py -v``; the decoherence comparison
(criterion 10) dominates the runtime at roughly ten minutes on one core.
"""

import time
import warnings

import numpy as np
import pytest

from jjdrive.drive import (DriveSpec, df_displacements, ig_closed, ig_opened, ig_r_matrix, ig_sensitivity,
                           overlap_extract, overlap_residuals)
from jjdrive.floquet import (PulseEnvelope, displacement_signal, expm_hermitian, propagate, ramp_experiment,
                             steady_displacement, unitarity_defect)
from jjdrive.hamiltonian import FockSpace, HamiltonianModel, build, cross_kerr, diagonalize_and_label
from jjdrive.lindblad import Channel, FilterOracle, LindbladModel, check_state, evolve, fit_lindblad_parameters
from jjdrive.modes import eigenmodes
from jjdrive.netlist import (ResonantSingularity, SingularityWarning, impedance_matrix, make_netlist,
                             open_junctions, validate_netlist)
from jjdrive.rates import (NoisePsd, admittance_mode, charge_basis_transmon, driven_transmon_rates,
                           gauge_sweep_fgr, naive_dephasing, purcell_admittance, purcell_squid, purcell_transmon)

from circuits import (FILTER_EJ_HZ, H, TABLE_BETA, TABLE_CHI_KHZ, TABLE_EIGEN, TABLE_FIT, TABLE_OMEGA_GHZ, TWO_PI,
                      reduced_squid, squid, two_filter)
from circuits import purcell_transmon as purcell_circuit
from oracles import random_netlist, small_circuits, tableau_impedance, wk_monte_carlo

pytestmark = pytest.mark.slow


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------- 1

@pytest.mark.criterion(1)
def test_power_voltage_calibration(criterion):
    with Clock() as clk:
        v_high = DriveSpec.from_dbm("P", 1.0, -39.4, z0=50.0).voltage.real
        v_low = DriveSpec.from_dbm("P", 1.0, -128.1, z0=50.0).voltage.real
    ok = rel(v_high, 6.77e-3) <= 0.01 and rel(v_low, 0.250e-6) <= 0.01 and clk.elapsed < 1
    assert criterion(ok, f"-39.4 dBm -> {v_high * 1e3:.4f} mV, -128.1 dBm -> {v_low * 1e6:.4f} uV "
                         f"({clk.elapsed * 1e3:.1f} ms)")


# ---------------------------------------------------------------- 2

def table_cross_kerr(cutoffs):
    omegas = [TWO_PI * f * 1e9 for f in TABLE_OMEGA_GHZ]
    model = HamiltonianModel(omegas, [FILTER_EJ_HZ * H], [list(TABLE_BETA)], cutoffs)
    space = FockSpace(list(cutoffs))
    eig = diagonalize_and_label(build(model, space).static, space)
    return {"aq": cross_kerr(eig, 0, 2) / 1e3, "bq": cross_kerr(eig, 1, 2) / 1e3, "ab": cross_kerr(eig, 0, 1) / 1e3}


@pytest.mark.criterion(2)
def test_cross_kerr_reproduction(criterion):
    with Clock() as clk:
        coarse = table_cross_kerr((4, 4, 8))
        fine = table_cross_kerr((8, 8, 16))
    err = {k: rel(fine[k], TABLE_CHI_KHZ[k]) for k in fine}
    drift = {k: rel(coarse[k], fine[k]) for k in fine}
    ok = max(err.values()) <= 0.01 and max(drift.values()) <= 0.01 and clk.elapsed < 60
    detail = ", ".join(f"chi_{k} {fine[k]:.5g} kHz (err {err[k]:.1e}, doubling drift {drift[k]:.1e})" for k in fine)
    assert criterion(ok, f"{detail} ({clk.elapsed:.1f} s)")


# ---------------------------------------------------------------- 3

@pytest.mark.criterion(3)
def test_lindblad_parameter_fit(criterion):
    e = TABLE_EIGEN
    with Clock() as clk:
        fit = fit_lindblad_parameters(TWO_PI * e["f_a"], TWO_PI * e["f_b"], TWO_PI * e["k_a"], TWO_PI * e["k_b"])
    fa, fb, ca, cb = fit.table_units()
    got = {"f_a": fa * 1e9, "f_b": fb * 1e9, "c_a": ca, "c_b": cb}
    err = max(rel(got[k], TABLE_FIT[k]) for k in got)
    ok = err <= 1e-3 and fit.residual <= 1e-5 and clk.elapsed < 10
    assert criterion(ok, f"omega~ {fa:.5f}/{fb:.5f} GHz, c {ca:.5f}/{cb:.5f}, max rel err {err:.1e}, "
                         f"f_obj {fit.residual:.1e} ({clk.elapsed:.2f} s)")


# ---------------------------------------------------------------- 4

def purcell_routes(lj):
    net = purcell_circuit(lj)
    m = eigenmodes(net)
    k = int(np.argmax(m.participation[0]))
    w = m.omega[k]
    z = impedance_matrix(open_junctions(net), ["J", "P"], w)
    noise = purcell_transmon(z[0, 1], z[1, 1], lj, w, NoisePsd(50.0, 0.0))
    w_adm, y, dy = admittance_mode(net, "J", w)
    return {"port-noise": w / noise, "admittance": w_adm / purcell_admittance(y, dy), "eigenmode": w / m.kappa[k]}


@pytest.mark.criterion(4)
def test_purcell_triangulation(criterion):
    net = purcell_circuit()
    c = {b.id: b.value for b in net.branches}
    # bare qubit and resonator frequencies coincide here
    l_cross = c["Lr"] * (c["Cr"] + c["Cg"] + c["Ck"]) / (c["CJ"] + c["Cg"])
    worst, band_worst, n_gated = 0.0, 0.0, 0
    with Clock() as clk:
        for x in np.linspace(0.6, 1.6, 21):
            q = purcell_routes(x * l_cross)
            spread = max(q.values()) / min(q.values()) - 1
            if abs(x - 1) >= 0.15 - 1e-9:
                worst = max(worst, spread)
                n_gated += 1
            else:
                band_worst = max(band_worst, spread)
    ok = worst <= 0.05 and clk.elapsed < 60
    assert criterion(ok, f"{n_gated} L_J points >= 15% from the crossing ({l_cross * 1e9:.2f} nH): worst pairwise "
                         f"Q spread {worst:.2%}; inside the avoided band {band_worst:.1%} ({clk.elapsed:.1f} s)")


# ---------------------------------------------------------------- 5

def squid_decay(net):
    m = eigenmodes(net)
    k = int(np.argmax(m.participation.sum(axis=0)))
    w = m.omega[k]
    inductances = [net.branch("J1").value, net.branch("J2").value]
    z = impedance_matrix(open_junctions(net), ["J1", "J2", "P"], w)
    return purcell_squid(z[:2, 2], z[2, 2], inductances, w, NoisePsd(50.0, 0.0)), m.kappa[k]


def reduced_decay(net):
    red = reduced_squid(net)
    m = eigenmodes(red)
    k = int(np.argmax(m.participation[0]))
    w = m.omega[k]
    z = impedance_matrix(open_junctions(red), ["J1", "P"], w)
    return purcell_transmon(z[0, 1], z[1, 1], red.branch("J1").value, w, NoisePsd(50.0, 0.0))


@pytest.mark.criterion(5)
def test_squid_interference(criterion):
    with Clock() as clk:
        common, _ = squid_decay(squid(15e-9, 15e-9, "common"))
        diff, diff_eig = squid_decay(squid(15e-9, 15e-9, "differential"))
        asym = squid(10e-9, 30e-9, "differential")   # L_sigma = 7.5 nH
        full, full_eig = squid_decay(asym)
        reduced = reduced_decay(asym)
    suppression = np.inf if diff == 0 else common / diff
    mismatch = abs(reduced / full - 1)
    ok = suppression >= 1e4 and mismatch > 0.2 and clk.elapsed < 60
    assert criterion(ok, f"symmetric: common {common:.3g}/s vs differential {diff:.3g}/s (eigenmode "
                         f"{diff_eig:.2g}/s), suppression {suppression:.3g}; asymmetric 10/30 nH: full {full:.3g}/s "
                         f"(eigenmode {full_eig:.3g}/s), L_sigma reduction {reduced:.3g}/s, mismatch {mismatch:.0%} "
                         f"({clk.elapsed:.1f} s)")


# ---------------------------------------------------------------- 6

@pytest.mark.criterion(6)
def test_irrotational_cross_validation(criterion):
    net = squid(12e-9, 20e-9, "mixed", cg=1e-15, cx=1e-15)
    m = eigenmodes(net)
    grid = TWO_PI * np.linspace(2e9, 14e9, 241)
    worst, n_far, sens = 0.0, 0, []
    with Clock() as clk, warnings.catch_warnings():
        warnings.simplefilter("ignore")  # conditioning warnings near resonance are expected here
        for w in grid:
            spec = DriveSpec.from_dbm("P", w, -80)
            a = df_displacements(net, spec)
            opened = ig_opened(net, spec)
            r, _ = ig_r_matrix(m, w)
            closed = ig_closed(a, r)
            if np.all(np.abs(w - m.omega) >= 5 * m.kappa):
                worst = max(worst, float(np.max(np.abs(np.abs(closed) / np.abs(opened) - 1))))
                n_far += 1
            sens.append(float(np.max(ig_sensitivity(r, a, 0.01) / np.abs(opened))))
    peak = grid[int(np.argmax(sens))]
    nearest = m.omega[int(np.argmin(np.abs(m.omega - peak)))]
    step = grid[1] - grid[0]
    ok = worst < 1e-3 and abs(peak - nearest) <= step and clk.elapsed < 120
    assert criterion(ok, f"{n_far} points >= 5 linewidths off resonance: max |F| mismatch {worst:.1e}; "
                         f"sensitivity peak {peak / TWO_PI / 1e9:.3f} GHz vs mode {nearest / TWO_PI / 1e9:.3f} GHz "
                         f"({clk.elapsed:.1f} s)")


# ---------------------------------------------------------------- 7

@pytest.mark.criterion(7)
def test_overlap_completeness(criterion):
    net = squid(12e-9, 20e-9, "mixed")
    worst_res, monotone, n_steps = 0.0, True, 0
    with Clock() as clk:
        for f in (3e9, 6e9, 7.5e9, 9e9, 13e9):
            modes, res, a = overlap_extract(net, DriveSpec.from_dbm("P", TWO_PI * f, -80))
            worst_res = max(worst_res, np.linalg.norm(overlap_residuals(a, res)) / np.linalg.norm(a))
            partial = res.partial_sums()
            err = np.abs(np.abs(partial) - np.abs(a)[:, None]).max(axis=0) / np.abs(a).max()
            for n in range(1, modes.size):
                # adding mode n (0-based) to the first n; required when the drive sits below it
                if TWO_PI * f < modes.omega[n]:
                    monotone &= bool(err[n] <= err[n - 1] * (1 + 1e-9) + 1e-15)
                    n_steps += 1
    ok = worst_res < 1e-8 and monotone and n_steps > 0 and clk.elapsed < 120
    assert criterion(ok, f"max ||A_res||/||A|| {worst_res:.1e}; partial sums non-worsening over {n_steps} steps: "
                         f"{monotone} ({clk.elapsed:.1f} s)")


# ---------------------------------------------------------------- 8

@pytest.mark.criterion(8)
def test_displaced_frame_ramp_study(criterion):
    w, ej, beta = TWO_PI * 3.098e9, 10e9 * H, 0.359
    g0, wd, cut = TWO_PI * 5.566e9, TWO_PI * 0.975e9, 30
    space = FockSpace([cut])
    h0 = build(HamiltonianModel([w], [ej], [[beta]], (cut,)), space).static
    xp, xm = steady_displacement(w, 0.0, g0, wd)
    sig = displacement_signal(xp, xm, wd)
    df = build(HamiltonianModel([w], [ej], [[beta]], (cut,), frame="displaced", omega_d=wd,
                                displacement=[lambda t: beta * sig(t)]), space)
    drive_op = g0 * space.momentum(0)
    from jjdrive.floquet import floquet_modes, fold
    fb = floquet_modes(df, wd, n_samples=16)
    splitting = abs(fold(fb.quasi[fb.index_of(0)] - fb.quasi[fb.index_of(1)], wd))
    period = TWO_PI / wd
    periods = np.unique(np.linspace(0, 1.2 * TWO_PI / splitting / period, 25).astype(int))
    out = {}
    with Clock() as clk:
        for tr in (5.16e-9, 0.40e-9, 50e-9):
            traces = ramp_experiment(h0, drive_op, lambda t: np.sin(wd * t), df, PulseEnvelope(tr), wd, periods)
            out[tr] = (traces.aligned_discrepancy()[0], traces.discrepancy)
    ok = out[5.16e-9][0] < 0.1 and out[0.40e-9][0] > 0.3 and out[50e-9][0] > 0.3 and clk.elapsed < 600
    detail = ", ".join(f"t_r {tr * 1e9:g} ns: {d:.3f} (unaligned {raw:.3f})" for tr, (d, raw) in out.items())
    assert criterion(ok, f"max population discrepancy {detail} ({clk.elapsed:.0f} s)")


# ---------------------------------------------------------------- 9

@pytest.mark.criterion(9)
def test_gauge_invariance(criterion):
    ec, ej = 0.25e9 * H, 12.5e9 * H
    with Clock() as clk:
        h0, n_op, sin_t = charge_basis_transmon(ec, ej, 25, offset_charge=0.1)
        noise = NoisePsd(50.0, 0.02)
        rates, _ = gauge_sweep_fgr(h0, n_op, ej * sin_t, lambda w: (8 * ec) ** 2 * 1e-20 * noise(w),
                                   [0, 0.25, 0.5, 0.75, 1.0])
    spread = np.ptp(rates) / rates[0]
    ok = rates[0] > 0 and spread <= 1e-10 and clk.elapsed < 10
    assert criterion(ok, f"zeta 0..1 relative spread {spread:.1e} ({clk.elapsed:.2f} s)")


# ---------------------------------------------------------------- 10

DECAY_CUTOFFS = (6, 2, 2)
DEPHASING_CUTOFFS = (8, 3, 3)
THERMAL_CUTOFFS = (6, 5, 5)


@pytest.fixture(scope="module")
def filter_setup():
    net = two_filter()
    m = eigenmodes(net)
    q = int(np.argmax(m.participation[0]))
    a, b = [k for k in range(m.size) if k != q]
    fit = fit_lindblad_parameters(m.omega[a], m.omega[b], m.kappa[a], m.kappa[b])
    # the shared-bath weights carry the sign of each filter's voltage at the output port
    port = m.nodes.index("r")
    sign = np.sign(m.profiles[port, [a, b]])
    beta = m.beta[0]
    oracle = FilterOracle((m.omega[q], fit.omega_a, fit.omega_b), m.josephson_energy[0], (beta[q], beta[a], beta[b]),
                          (sign[0] * fit.c_a, sign[1] * fit.c_b), kappa_q=m.kappa[q])
    return {"net": net, "modes": m, "q": q, "a": a, "b": b, "fit": fit, "oracle": oracle}


def fm_rates(s, displacement, wd, occupation=0.0):
    m, q = s["modes"], s["q"]
    return driven_transmon_rates(s["net"], "PR", "J", m.omega[q], m.beta[0, q], displacement, wd, occupation)


def within(ratios, tol=0.10):
    return sum(abs(r - 1) <= tol for r in ratios)


@pytest.mark.criterion(10)
def test_drive_induced_decay(criterion, filter_setup):
    s, oracle = filter_setup, filter_setup["oracle"]
    freqs = [1.200, 1.225, 1.250, 1.275, 1.300, 1.325, 1.350]
    ratios = []
    with Clock() as clk:
        wd0 = TWO_PI * 1.25e9
        fm0 = fm_rates(s, 0.0, wd0)[0].rate
        lme0 = oracle.decay_rate(0.0, wd0, DECAY_CUTOFFS)
        for f in freqs:
            wd = TWO_PI * f * 1e9
            amp = df_displacements(s["net"], DriveSpec.from_dbm("PL", wd, -39.4))[0]
            fm = fm_rates(s, amp, wd)[0].rate - fm0
            lme = oracle.decay_rate(amp, wd, DECAY_CUTOFFS) - lme0
            ratios.append(lme / fm)
    n_ok = within(ratios)
    ok = n_ok >= 5
    assert criterion(ok, f"drive-induced decay at -39.4 dBm, LME/FM over 1.20-1.35 GHz: "
                         f"{' '.join(f'{r:.3f}' for r in ratios)} ({n_ok}/7 within 10%, {clk.elapsed:.0f} s)",
                     part="decay")


@pytest.mark.criterion(10)
def test_drive_induced_dephasing_cold(criterion, filter_setup):
    s, oracle, m, fit = filter_setup, filter_setup["oracle"], filter_setup["modes"], filter_setup["fit"]
    freqs = [3.30, 3.33, 3.36, 3.38, 3.40, 3.42, 3.46]
    mid_band = {3.36, 3.38, 3.40}
    power = 10 ** ((-128.1 - 30) / 10)
    # naive baseline: incoherent single-filter sum with the dressed cross-Kerr couplings
    space = FockSpace(list(DEPHASING_CUTOFFS))
    eig = diagonalize_and_label(oracle.build(0.0, 1.0, DEPHASING_CUTOFFS)[1].static, space)
    chi = TWO_PI * np.array([cross_kerr(eig, 0, 1), cross_kerr(eig, 0, 2)])
    kappa = m.kappa[[s["a"], s["b"]]]
    ratios, naive = [], []
    with Clock() as clk:
        wd0 = TWO_PI * 3.38e9
        fm0 = fm_rates(s, 0.0, wd0)[1].rate
        lme0 = oracle.dephasing_rate(0.0, wd0, DEPHASING_CUTOFFS)
        for f in freqs:
            wd = TWO_PI * f * 1e9
            amp_lme, xp, xm = oracle.drive_displacement(power, wd)
            amp_circuit = df_displacements(s["net"], DriveSpec.from_dbm("PR", wd, -128.1))[0]
            fm = fm_rates(s, amp_circuit, wd)[1].rate - fm0
            lme = oracle.dephasing_rate(amp_lme, wd, DEPHASING_CUTOFFS) - lme0
            ratios.append(lme / fm)
            n_coh = np.abs(xp) ** 2 + np.abs(xm) ** 2
            naive.append(naive_dephasing(chi, kappa, [fit.omega_a, fit.omega_b], n_coh, wd) / fm)
    n_ok = within(ratios)
    naive_off = [f for f, r in zip(freqs, naive) if f in mid_band and abs(r - 1) > 0.25]
    criterion(n_ok >= 3, f"n_B=0 LME/FM at 3.30-3.46 GHz: {' '.join(f'{r:.3f}' for r in ratios)} "
                         f"({n_ok}/7 within 10%, {clk.elapsed:.0f} s)", part="dephasing n_B=0")
    criterion(bool(naive_off), f"naive/FM {' '.join(f'{r:.3f}' for r in naive)}; off by >25% mid-band at "
                               f"{', '.join(f'{f:.2f}' for f in naive_off) or 'none'} GHz", part="naive baseline")
    assert n_ok >= 3 and naive_off


@pytest.mark.criterion(10)
@pytest.mark.parametrize("occupation", [0.25, 0.5])
def test_drive_induced_dephasing_thermal(criterion, filter_setup, occupation):
    s, oracle = filter_setup, filter_setup["oracle"]
    freqs = [3.33, 3.36, 3.38, 3.40]
    power = 10 ** ((-128.1 - 30) / 10)
    ratios = []
    with Clock() as clk:
        wd0 = TWO_PI * 3.38e9
        fm0 = fm_rates(s, 0.0, wd0, occupation)[1].rate
        lme0 = oracle.dephasing_rate(0.0, wd0, THERMAL_CUTOFFS, occupation)
        for f in freqs:
            wd = TWO_PI * f * 1e9
            amp_lme, _, _ = oracle.drive_displacement(power, wd)
            amp_circuit = df_displacements(s["net"], DriveSpec.from_dbm("PR", wd, -128.1))[0]
            fm = fm_rates(s, amp_circuit, wd, occupation)[1].rate - fm0
            lme = oracle.dephasing_rate(amp_lme, wd, THERMAL_CUTOFFS, occupation) - lme0
            ratios.append(lme / fm)
    n_ok = within(ratios)
    assert criterion(n_ok >= 3, f"n_B={occupation} LME/FM at 3.33-3.40 GHz: {' '.join(f'{r:.3f}' for r in ratios)} "
                                f"({n_ok}/4 within 10%, {clk.elapsed:.0f} s)", part=f"dephasing n_B={occupation}")


@pytest.mark.criterion(10)
def test_decoherence_cutoff_convergence(criterion, filter_setup):
    """Production cutoffs against larger spaces along the transmon and filter axes."""
    oracle, net = filter_setup["oracle"], filter_setup["net"]

    def increment(rate, amp, wd, cuts, *args):
        return rate(amp, wd, cuts, *args) - rate(0.0, wd, cuts, *args)

    with Clock() as clk:
        wd = TWO_PI * 1.25e9
        amp = df_displacements(net, DriveSpec.from_dbm("PL", wd, -39.4))[0]
        decay = [increment(oracle.decay_rate, amp, wd, c) for c in (DECAY_CUTOFFS, (8, 2, 2), (6, 3, 3))]
        wd = TWO_PI * 3.38e9
        amp, _, _ = oracle.drive_displacement(10 ** ((-128.1 - 30) / 10), wd)
        cold = [increment(oracle.dephasing_rate, amp, wd, c) for c in (DEPHASING_CUTOFFS, (10, 3, 3), (8, 5, 5))]
        warm = [increment(oracle.dephasing_rate, amp, wd, c, 0.25) for c in (THERMAL_CUTOFFS, (8, 5, 5))]
    changes = {"decay": [rel(decay[0], d) for d in decay[1:]],
               "dephasing n_B=0": [rel(cold[0], d) for d in cold[1:]],
               "dephasing n_B=0.25": [rel(warm[0], d) for d in warm[1:]]}
    worst = max(max(v) for v in changes.values())
    # truncation error must stay well inside the 10% agreement tolerance
    ok = worst <= 0.05
    detail = "; ".join(f"{k} {' '.join(f'{x:.1%}' for x in v)}" for k, v in changes.items())
    assert criterion(ok, f"change against larger cutoffs: {detail} ({clk.elapsed:.0f} s)", part="convergence")


# ---------------------------------------------------------------- 11

def random_hermitian(rng, n, scale):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (x + x.conj().T) / 2


@pytest.mark.criterion(11)
def test_property_suites(criterion):
    rng = np.random.default_rng(20240611)
    counts, failures = {}, []
    with Clock() as clk:
        # MNA reciprocity and passivity on random netlists
        checked = 0
        for _ in range(1000):
            net, omega = random_netlist(rng)
            loaded = bool(rng.integers(2))
            terms = [p.id for p in net.ports] + [j.id for j in net.junctions][:2]
            with warnings.catch_warnings():
                warnings.simplefilter("error", SingularityWarning)
                try:
                    z = impedance_matrix(net if loaded else open_junctions(net), terms, omega, load_ports=loaded)
                except (ResonantSingularity, SingularityWarning):
                    continue
            scale = np.abs(z).max()
            if not (np.allclose(z, z.T, atol=1e-9 * scale)
                    and np.linalg.eigvalsh((z + z.conj().T) / 2).min() >= -1e-9 * scale):
                failures.append("mna")
            checked += 1
            if checked >= 150:
                break
        counts["random netlists"] = checked

        # brute-force Kirchhoff oracle on every small circuit
        checked, omega = 0, TWO_PI * 1.3e9
        for nodes, branches in small_circuits():
            net = make_netlist(branches + [("port", "P", "1", "0", 50.0)], nodes=nodes)
            if not validate_netlist(net).ok:
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("error", SingularityWarning)
                try:
                    z = impedance_matrix(net, ["P"], omega)
                except (ResonantSingularity, SingularityWarning):
                    continue
            ref = tableau_impedance(branches, nodes, "0", [("1", "0")], omega)
            if not np.allclose(z, ref, rtol=1e-9, atol=1e-12):
                failures.append("kirchhoff")
            checked += 1
        counts["Kirchhoff circuits"] = checked

        # propagator unitarity
        worst = 0.0
        for _ in range(30):
            n = int(rng.integers(2, 9))
            h0, h1 = random_hermitian(rng, n, 1e9), random_hermitian(rng, n, rng.uniform(0.2, 5) * 1e9)
            u = propagate(lambda t: h0 + np.cos(TWO_PI * 0.7e9 * t) * h1, 0.0, 3e-9, tol=1e-10)
            worst = max(worst, unitarity_defect(u))
        worst = max(worst, unitarity_defect(expm_hermitian(h0, 1e-9)))
        if worst >= 1e-9:
            failures.append("unitarity")
        counts["propagators"] = 31

        # Lindblad trace and positivity
        n_states = 0
        for _ in range(20):
            d = int(rng.integers(2, 6))
            h0, h1 = random_hermitian(rng, d, 1e9), random_hermitian(rng, d, 3e8)
            chans = [Channel(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)), 2e7 * rng.uniform(0.1, 1),
                             rng.uniform(0, 1)) for _ in range(2)]
            x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            rho0 = x @ x.conj().T
            model = LindbladModel(lambda t, h0=h0, h1=h1: h0 + np.cos(2e9 * t) * h1, chans)
            for rho in evolve(model, rho0 / np.trace(rho0), np.linspace(0, 5e-9, 6), tol=1e-9):
                try:
                    check_state(rho, tol=1e-7)
                except Exception:
                    failures.append("lindblad")
                n_states += 1
        counts["Lindblad states"] = n_states

        # Wiener-Khinchin Monte Carlo
        wk = wk_monte_carlo()
        sigmas = [abs(mean - pred) / err for _, mean, pred, err in wk]
        if max(sigmas) >= 3:
            failures.append("wiener-khinchin")
        counts["WK lags"] = len(wk)
    ok = not failures and counts["random netlists"] >= 100 and clk.elapsed < 600
    detail = ", ".join(f"{k} {v}" for k, v in counts.items())
    assert criterion(ok, f"{detail}; unitarity defect {worst:.1e}; WK max deviation {max(sigmas):.2f} sigma; "
                         f"failures: {sorted(set(failures)) or 'none'} ({clk.elapsed:.0f} s)")
