"""Decoherence rates from port voltage noise.

Conventions: coupling operators are derivatives of H/hbar with respect to the noisy
parameter (rad/s per unit), susceptibilities map source volts to parameter units, and a
PSD S(omega) at positive omega describes emission of energy hbar*omega into the port.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.integrate
from scipy import constants

from .modes import HBAR

KB = constants.k


class FgrInvalid(ValueError):
    pass


class BroadbandWarning(RuntimeWarning):
    pass


class ZoneTruncationWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------- noise spectra

def bose(omega, temperature):
    """Bose occupation continued to negative frequency, n(-w) = -1 - n(w)."""
    omega = np.asarray(omega, dtype=float)
    if temperature == 0:
        return np.where(omega > 0, 0.0, np.where(omega < 0, -1.0, np.nan))
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / np.expm1(HBAR * omega / (KB * temperature))


@dataclass
class NoisePsd:
    """S(w) = 2 hbar w Z0 [1 + n_B(w)] + S_in(w)."""
    z0: float = 50.0
    temperature: float | None = 0.0
    occupation: object = None     # callable n_B(w) for w > 0, overrides temperature
    input_spectrum: object = None  # callable S_in(w)

    def __post_init__(self):
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    def emission_factor(self, omega: float) -> float:
        """hbar w [1 + n_B(w)], including its w -> 0 limit k_B T."""
        if self.occupation is not None:
            if omega > 0:
                return HBAR * omega * (1 + self.occupation(omega))
            if omega < 0:
                return HBAR * -omega * self.occupation(-omega)
            # linear extrapolation of hbar w n(w) to w = 0: k_B T for a Bose occupation, 0 for a constant one
            eps = 1e-3
            return max(0.0, HBAR * eps * (2 * self.occupation(eps) - 2 * self.occupation(2 * eps)))
        t = self.temperature or 0.0
        if omega == 0:
            return KB * t
        if t == 0:
            return HBAR * omega if omega > 0 else 0.0
        x = HBAR * omega / (KB * t)
        return KB * t * x / -math.expm1(-x) if x > -700 else 0.0

    def __call__(self, omega: float) -> float:
        s = 2 * self.z0 * self.emission_factor(float(omega))
        if self.input_spectrum is not None:
            s += self.input_spectrum(omega)
        return s

    def matrix(self, omega: float) -> np.ndarray:
        return np.array([[self(omega)]])


@dataclass
class PortNoise:
    """Independent (or explicitly correlated) noise on several ports."""
    ports: list
    cross: object = None  # optional callable w -> (P, P) cross-spectral matrix

    def matrix(self, omega: float) -> np.ndarray:
        if self.cross is not None:
            return np.asarray(self.cross(omega))
        return np.diag([p(omega) for p in self.ports])

    def __call__(self, omega):
        if len(self.ports) != 1:
            raise ValueError("scalar PSD requested from a multiport noise model")
        return self.ports[0](omega)


def psd(model: NoisePsd, omega: float) -> float:
    return model(omega)


def _psd_matrix(psd, omega):
    return psd.matrix(omega) if hasattr(psd, "matrix") else np.array([[psd(omega)]])


# ---------------------------------------------------------------- couplings

@dataclass
class NoiseCoupling:
    """d(H/hbar)/d(parameter) and the parameter's susceptibility to each port voltage."""
    operator: object        # matrix, or callable t -> matrix for periodic couplings
    susceptibility: object  # callable w -> complex or array over ports
    name: str = ""

    def chi(self, omega) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.susceptibility(omega), dtype=complex))

    def at(self, t):
        return self.operator(t) if callable(self.operator) else self.operator


@dataclass
class RateReport:
    method: str
    rate: float             # 1/s
    frequency: float        # rad/s at which noise was sampled (dominant term)
    states: tuple = ()
    quality_factor: float | None = None
    inputs: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=str, indent=2)


def _quadratic(x, smat):
    return float(np.real(np.conj(x) @ smat @ x))


def fgr_decay(energies, vectors, couplings, psd, m: int, n: int, broadband_check=True) -> RateReport:
    """Golden-rule rate m -> n with the coherent sum over channels inside the modulus."""
    energies = np.asarray(energies)
    omega = float(energies[m] - energies[n])
    if omega == 0:
        raise FgrInvalid("degenerate states; use fgr_dephasing")
    x = 0
    for c in couplings:
        elem = vectors[:, n].conj() @ c.at(0.0) @ vectors[:, m]
        x = x + elem * c.chi(omega)
    x = np.atleast_1d(x)
    rate = _quadratic(x, _psd_matrix(psd, omega))
    if broadband_check and rate > 0:
        h = abs(omega) * 1e-6
        for c in couplings:
            slope = np.abs(c.chi(omega + h) - c.chi(omega - h)) / (2 * h)
            if np.any(slope * rate > 0.1 * np.abs(c.chi(omega)) + 0.0):
                warnings.warn("susceptibility not broadband on the scale of the rate", BroadbandWarning,
                              stacklevel=2)
                break
    return RateReport("fgr", rate, omega, (m, n), abs(omega) / rate if rate > 0 else None)


def fgr_dephasing(energies, vectors, couplings, psd, m: int, n: int, zero=0.0) -> RateReport:
    """Pure dephasing 1/2 |sum_i (V_mm - V_nn) chi_i(0)|^2 S(0); chi is sampled at ``zero``."""
    s0 = _psd_matrix(psd, zero)
    if not np.all(np.isfinite(s0)):
        raise FgrInvalid("PSD diverges at zero frequency; golden-rule dephasing is ill-defined")
    x = 0
    for c in couplings:
        if not np.any(s0):
            break
        op = c.at(0.0)
        diff = (vectors[:, m].conj() @ op @ vectors[:, m]) - (vectors[:, n].conj() @ op @ vectors[:, n])
        x = x + diff * c.chi(zero)
    x = np.atleast_1d(x)
    if not np.any(s0):
        return RateReport("fgr-dephasing", 0.0, zero, (m, n))
    return RateReport("fgr-dephasing", 0.5 * _quadratic(x, s0), zero, (m, n))


def floquet_matrix_elements(basis, operator_at, alpha: int, beta: int, n_max: int, samples=None):
    """Fourier components V_{beta alpha, n} = (1/T) int e^{i n wd t} <Phi_b(t)|V(t)|Phi_a(t)> dt."""
    times = basis.times
    idx = np.arange(len(times)) if samples is None else samples
    vals = np.array([basis.modes[j][:, beta].conj() @ operator_at(times[j]) @ basis.modes[j][:, alpha]
                     for j in idx])
    orders = np.arange(-n_max, n_max + 1)
    phase = np.exp(1j * basis.omega_d * np.outer(orders, times[idx]))
    return orders, phase @ vals / len(idx)


def floquet_markov_rates(basis, couplings, psd, alpha: int, beta: int, n_max: int = 8):
    """Decay alpha -> beta and pure dephasing between alpha and beta for a periodically driven system.

    ``alpha`` and ``beta`` index Floquet modes.  Returns (decay, dephasing) RateReports.
    """
    wd = basis.omega_d
    diff = basis.quasi[alpha] - basis.quasi[beta]
    trans, diag_a, diag_b = [], [], []
    for c in couplings:
        orders, v_ba = floquet_matrix_elements(basis, c.at, alpha, beta, n_max)
        _, v_aa = floquet_matrix_elements(basis, c.at, alpha, alpha, n_max)
        _, v_bb = floquet_matrix_elements(basis, c.at, beta, beta, n_max)
        trans.append(v_ba)
        diag_a.append(v_aa)
        diag_b.append(v_bb)
        # coarse-grid check on the Fourier integrals
        half = np.arange(0, len(basis.times), 2)
        _, coarse = floquet_matrix_elements(basis, c.at, alpha, beta, n_max, half)
        if np.abs(coarse - v_ba).max() > 1e-6 * max(np.abs(v_ba).max(), 1e-300):
            basis.notes.append("Floquet time grid under-resolves the coupling harmonics")

    decay_terms, deph_terms = [], []
    for j, n in enumerate(orders):
        w = diff + n * wd
        s_w = _psd_matrix(psd, w)
        if np.any(s_w):
            x = sum(c.chi(w) * trans[i][j] for i, c in enumerate(couplings))
            decay_terms.append(_quadratic(np.atleast_1d(x), s_w))
        else:
            decay_terms.append(0.0)
        w0 = n * wd
        s_0 = _psd_matrix(psd, w0)
        if np.any(s_0):
            y = sum(c.chi(w0) * (diag_a[i][j] - diag_b[i][j]) for i, c in enumerate(couplings))
            deph_terms.append(0.5 * _quadratic(np.atleast_1d(y), s_0))
        else:
            deph_terms.append(0.0)
    decay_terms, deph_terms = np.array(decay_terms), np.array(deph_terms)
    for terms in (decay_terms, deph_terms):
        total = terms.sum()
        if total > 0 and max(terms[0], terms[-1]) > 0.01 * total:
            warnings.warn("last Brillouin zone carries more than 1% of the rate", ZoneTruncationWarning,
                          stacklevel=2)
    dominant = orders[int(np.argmax(decay_terms))]
    return (RateReport("floquet-markov", float(decay_terms.sum()), diff + dominant * wd, (alpha, beta)),
            RateReport("floquet-markov-dephasing", float(deph_terms.sum()), 0.0, (alpha, beta)))


def junction_noise_operator(space, josephson_energy: float, beta_row, displacement=None, linear=False):
    """d(H/hbar)/dA for phase noise A on one junction.

    With ``displacement`` (callable t -> A(t)) the operator is time-periodic and its linear part
    is removed, since linear phase noise is already accounted for by the undriven decay.
    ``linear=True`` keeps only the first-order term E_J * phi.
    """
    from .hamiltonian import apply_function, phase_operator
    phi = phase_operator(space, beta_row)
    if linear:
        return josephson_energy * phi / HBAR
    if displacement is None:
        return josephson_energy * apply_function(phi, np.sin) / HBAR
    vals, vecs = np.linalg.eigh(phi)
    scale = josephson_energy / HBAR

    def at(t):
        a = float(displacement(t))
        return scale * ((vecs * (np.sin(vals + a) - vals)[None, :]) @ vecs.conj().T)
    return at


def port_phase_coupling(net, port: str, junction: str, operator, name=""):
    """NoiseCoupling for voltage noise on ``port`` acting through the phase of ``junction``."""
    from .drive import phase_susceptibility
    from .netlist import SingularityWarning

    def chi(w):
        if w == 0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SingularityWarning)
                return phase_susceptibility(net, port, [junction], 1.0)[0].real  # dc limit
        val = phase_susceptibility(net, port, [junction], abs(w))[0]
        return val if w > 0 else np.conj(val)
    return NoiseCoupling(operator, chi, name or f"{junction}<-{port}")


# ---------------------------------------------------------------- case formulas

def purcell_transmon(z_jp, z_pp, inductance, omega, psd: NoisePsd) -> float:
    """Linearized transmon decay through a port, from opened-junction impedances."""
    ratio = abs(z_jp / (psd.z0 + z_pp)) ** 2
    return psd(omega) / (2 * HBAR * omega) * ratio / inductance


def purcell_squid(z_jp, z_pp, inductances, omega, psd: NoisePsd) -> float:
    """Two-junction decay with the junction contributions summed coherently."""
    inv = 1 / np.asarray(inductances, dtype=float)
    l_sigma = 1 / inv.sum()
    coherent = np.sum(inv * np.asarray(z_jp)) / (psd.z0 + z_pp)
    return psd(omega) / (2 * HBAR * omega) * l_sigma * abs(coherent) ** 2


def purcell_admittance(y, dy, omega=None) -> float:
    """2 Re Y / Im Y' at a zero of Im Y."""
    if dy.imag <= 0:
        raise ValueError("invalid mode slope: Im Y' must be positive")
    return 2 * y.real / dy.imag


def admittance_mode(net, junction: str, guess: float, span: float = 0.2):
    """Zero of Im Y_total near ``guess`` where Y_total includes the junction's linear inductance.

    Returns (omega, Y, dY/domega).
    """
    from scipy.optimize import brentq
    from .netlist import admittance_at_junction
    inductance = net.branch(junction).value

    def total(w):
        y, dy = admittance_at_junction(net, junction, w)
        return y - 1j / (w * inductance), dy + 1j / (w**2 * inductance)

    grid = np.linspace(guess * (1 - span), guess * (1 + span), 81)
    im = np.array([total(w)[0].imag for w in grid])
    slope = np.array([total(w)[1].imag for w in grid])
    hits = [k for k in range(len(grid) - 1) if im[k] < 0 <= im[k + 1] and slope[k] > 0]
    if not hits:
        raise ValueError("no admittance zero with positive slope near the guess")
    k = min(hits, key=lambda k: abs(grid[k] - guess))
    w = brentq(lambda w: total(w)[0].imag, grid[k], grid[k + 1], xtol=guess * 1e-13)
    y, dy = total(w)
    return w, y, dy


def transmon_decay_closed_form(c_j, c_g, omega, z0, c_eff=None) -> float:
    """Weak-coupling lumped transmon decay in terms of capacitances."""
    c_sigma = c_j + c_g
    c_eff = c_sigma if c_eff is None else c_eff
    return (c_eff / c_sigma) ** 2 / c_eff / (1 / (z0 * omega**2 * c_g**2) + z0 * (c_j / c_sigma) ** 2)


def analytic_rates(chi0, beta_a, beta_q, omega_a, kappa_a, n_coh, detuning, omega_d=None, n_th=0.0,
                   relaxation=None, n_bath_drive=0.0) -> dict:
    """Leading-order drive-induced rates for a transmon dispersively coupled to a driven mode.

    ``detuning`` is w_q' - 2 w_d - w_a.  ``relaxation`` (K_a at w_d) switches on the full
    coherent-dephasing expression.  The thermal term is returned both with chi^2 (dimensionally
    consistent) and with a single power of chi.
    """
    g_sb = 0.5 * chi0 * beta_a / beta_q * n_coh
    out = {
        "sideband_coupling": g_sb,
        "decay": g_sb**2 * kappa_a / (detuning**2 + kappa_a**2 / 4),
        "dephasing_thermal": (1 + n_th) * n_th * chi0**2 / kappa_a,
        "dephasing_thermal_linear_chi": (1 + n_th) * n_th * chi0 / kappa_a,
    }
    if omega_d is not None:
        out["dephasing_coherent"] = 0.5 * chi0**2 * n_coh * kappa_a / ((omega_d - omega_a) ** 2 + kappa_a**2 / 4)
        if relaxation is not None:
            k = relaxation
            out["dephasing_coherent_full"] = (0.5 * chi0**2 * n_coh * (1 + 2 * n_bath_drive) * k /
                                              ((omega_d - omega_a) ** 2 * (omega_d + omega_a) ** 2
                                               / (2 * omega_d) ** 2 + k**2 / 4))
    return out


def multi_junction_rates(ej, beta, displacement, cross_psd, omega_q, omega_d, integral_limit=None) -> dict:
    """Drive-induced decay and dephasing for several junctions sharing one noisy port.

    ``cross_psd(w)`` returns the (M, M) matrix S_{dA_k dA_l}(w); ``displacement`` are the
    junction phase phasors at the drive frequency.
    """
    ej = np.asarray(ej, dtype=float)
    beta = np.asarray(beta, dtype=float)
    amp2 = np.abs(np.asarray(displacement)) ** 2
    w_sb = omega_q - 2 * omega_d
    s_sb = np.asarray(cross_psd(w_sb))
    decay = np.real(np.einsum("k,l,kl->", ej * beta * amp2, ej * beta * amp2, s_sb)) / (64 * HBAR**2)
    s_plus, s_minus = np.asarray(cross_psd(omega_d)), np.asarray(cross_psd(-omega_d))
    weights = ej * beta**2
    coherent = np.real(np.einsum("k,l,kl->", weights * np.sqrt(amp2), weights * np.sqrt(amp2),
                                 s_plus + s_minus)) / (8 * HBAR**2)
    limit = integral_limit or 4 * omega_q

    def integrand(w):
        a, b = np.asarray(cross_psd(w)), np.asarray(cross_psd(-w))
        return np.real(np.einsum("k,l,kl,lk->", weights, weights, a, b))

    thermal = scipy.integrate.quad(integrand, -limit, limit, limit=400)[0] / (8 * math.pi * HBAR**2)
    return {"decay": float(decay), "dephasing_coherent": float(coherent), "dephasing_thermal": float(thermal)}


def naive_dephasing(chi_qk, kappa_k, omega_k, n_coh_k, omega_d) -> float:
    """Incoherent sum of single-mode coherent-photon dephasing contributions."""
    chi_qk, kappa_k, omega_k, n_coh_k = map(np.asarray, (chi_qk, kappa_k, omega_k, n_coh_k))
    return float(np.sum(0.5 * n_coh_k * chi_qk**2 * kappa_k / ((omega_d - omega_k) ** 2 + kappa_k**2 / 4)))


# ---------------------------------------------------------------- gauge check

def charge_basis_transmon(ec, ej, n_cut: int = 20, offset_charge: float = 0.0):
    """H0, n and sin(theta) in the charge basis |n>, n = -n_cut..n_cut (energies in joules)."""
    n = np.arange(-n_cut, n_cut + 1, dtype=float)
    shift = np.diag(np.ones(2 * n_cut), -1)  # e^{i theta}|n> = |n+1>
    cos_t = (shift + shift.T) / 2
    sin_t = (shift - shift.T) / 2j
    h0 = 4 * ec * np.diag((n - offset_charge) ** 2) - ej * cos_t
    return h0, np.diag(n), sin_t


def gauge_sweep_fgr(h0, n_op, dh_dtheta, charge_noise_psd, zetas, i: int = 1, j: int = 0):
    """Golden-rule rate i -> j with the noise split between charge and phase by zeta.

    ``dh_dtheta`` is the phase derivative of H0 (joules), evaluated directly, and
    ``charge_noise_psd`` is S_de(w) in J^2 s.  The phase-noise and cross spectra follow from
    dF/dt = de/hbar.
    """
    vals, vecs = np.linalg.eigh(h0)
    omega = (vals[i] - vals[j]) / HBAR
    n_ij = vecs[:, i].conj() @ n_op @ vecs[:, j]
    d_ij = vecs[:, i].conj() @ dh_dtheta @ vecs[:, j]
    s_e = charge_noise_psd(omega)
    s_f = s_e / (HBAR * omega) ** 2
    s_ef = -1j * HBAR * omega * s_f   # <de(t) dF(0)> spectrum
    s_fe = 1j * HBAR * omega * s_f
    rates = []
    for z in zetas:
        a_ij, b_ij = (1 - z) * n_ij, z * d_ij
        total = (abs(a_ij) ** 2 * s_e + abs(b_ij) ** 2 * s_f
                 + a_ij * np.conj(b_ij) * s_ef + b_ij * np.conj(a_ij) * s_fe)
        rates.append(total.real / HBAR**2)
    return np.array(rates), {"omega": omega, "n": n_ij, "d": d_ij}


# ---------------------------------------------------------------- driven transmon, one port

def driven_transmon_rates(net, port: str, junction: str, omega_q: float, beta_q: float, displacement,
                          omega_d: float, occupation: float = 0.0, cutoff: int = 8, n_max: int = 8,
                          samples: int = 64):
    """Floquet-Markov decay 1 -> 0 and dephasing for a single transmon mode under a DF drive.

    The filter network is not quantized: its coherent response is the displacement phasor and
    its noise is the port PSD pushed through the port-to-junction phase susceptibility.
    Returns (decay, dephasing) RateReports.
    """
    from .floquet import floquet_modes
    from .hamiltonian import FockSpace, HamiltonianModel, build
    from .netlist import PHI0
    ej = PHI0**2 / net.branch(junction).value
    space = FockSpace([cutoff])
    model = HamiltonianModel([omega_q], [ej], [[beta_q]], (cutoff,), frame="displaced", omega_d=omega_d,
                             displacement=[displacement])
    h = build(model, space)
    basis = floquet_modes(h, omega_d, n_samples=samples, static=h.static)
    signal = lambda t: (displacement * np.exp(1j * omega_d * t)).real
    op = junction_noise_operator(space, ej, [beta_q], displacement=signal)
    coupling = port_phase_coupling(net, port, junction, op)
    psd = NoisePsd(net.branch(port).value, occupation=lambda w: occupation)
    return floquet_markov_rates(basis, [coupling], psd, basis.index_of(1), basis.index_of(0), n_max)
