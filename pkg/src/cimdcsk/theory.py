"""Analytical BER and throughput of CIM-DCSK-AmBC and the SR-DCSK benchmark.

Energy bookkeeping: chips have unit mean square, so a direct-link symbol
carries ``E_s = (P1 + P2) L`` and ``gamma_s = E_s / N0``. With
``E_b = E_s / N_bits`` and ``N_bits = 1 + m_c + (P1 + P2) / 4`` bits per symbol
across both links, ``gamma_s = N_bits * Eb/N0``.

Decision-variable moments are reported divided by ``sqrt(E_s N0)`` so they
depend on ``gamma_s`` only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special, stats
from scipy.interpolate import CubicSpline

from .channel import ChannelProfile
from .errors import InvalidParameterError, NumericalFailureError
from .modem import SrParams, SystemParams

QUAD_RTOL = 1e-8


@dataclass(frozen=True)
class SnrPoint:
    eb_n0_db: float
    n_bits: int

    def __post_init__(self):
        if self.n_bits <= 0:
            raise InvalidParameterError(f"n_bits must be positive, got {self.n_bits}")

    @classmethod
    def for_system(cls, params, eb_n0_db: float) -> "SnrPoint":
        return cls(float(eb_n0_db), params.total_bits)

    @property
    def eb_n0(self) -> float:
        return 10.0 ** (self.eb_n0_db / 10.0)

    @property
    def gamma_s(self) -> float:
        return self.n_bits * self.eb_n0

    def n0(self, symbol_energy: float) -> float:
        """Noise density for a symbol of the given chip energy."""
        return symbol_energy / self.gamma_s


@dataclass(frozen=True)
class GaussianDecisionStats:
    """Means and variances of the correct-code and wrong-code correlator outputs."""

    mu1: float
    sigma1_sq: float
    mu2: float
    sigma2_sq: float

    @property
    def omega(self) -> float:
        return self.sigma2_sq


def _check_gamma(gamma_s):
    if isinstance(gamma_s, (int, float)):
        if not gamma_s > 0:
            raise InvalidParameterError(f"gamma_s must be positive, got {gamma_s}")
    elif np.any(np.asarray(gamma_s) <= 0):
        raise InvalidParameterError(f"gamma_s must be positive, got {gamma_s}")


def _quad_raw(f, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(f, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=200, full_output=True)[:3]
    return val, err, info.get("neval")


def _quad(f, a, b, what, **diag):
    """Adaptive quadrature that raises on non-convergence instead of warning."""
    val, err, neval = _quad_raw(f, a, b)
    if not np.isfinite(val) or err > max(1e-6 * abs(val), 1e-300):
        raise NumericalFailureError(
            f"{what}: quadrature did not converge", interval=(a, b), value=val, error=err, evaluations=neval, **diag
        )
    return val


def _half_erfc_inv_sqrt(ratio):
    """``0.5 * erfc(ratio ** -0.5)``, the Gaussian-approximation DCSK error form."""
    if isinstance(ratio, float):
        return 0.5 * math.erfc(1.0 / math.sqrt(ratio))
    return 0.5 * special.erfc(1.0 / np.sqrt(ratio))


# -- direct link -------------------------------------------------------------


def decision_stats(params: SystemParams, gamma_s: float) -> GaussianDecisionStats:
    _check_gamma(gamma_s)
    P1, P2, L = params.P1, params.P2, params.L
    noise_noise = P1 * P2 * L / (4.0 * gamma_s)
    return GaussianDecisionStats(
        mu1=P1 * P2 / (P1 + P2) * math.sqrt(gamma_s),
        sigma1_sq=P1 * P2 / 2.0 + noise_noise,
        mu2=0.0,
        sigma2_sq=P1 * P1 * P2 / (2.0 * (P1 + P2)) + noise_noise,
    )


_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _folded_pdf(u, mu, s):
    """Density of ``|Y|`` at ``u >= 0`` for ``Y ~ Normal(mu, s**2)`` (scalar)."""
    a, b = (u - mu) / s, (u + mu) / s
    return _INV_SQRT_2PI / s * (math.exp(-0.5 * a * a) + math.exp(-0.5 * b * b))


def _max_exceeds(u, scale, competitors):
    """``1 - erf(u / scale) ** competitors`` without cancellation (scalar)."""
    tail = math.erfc(u / scale)
    if competitors == 1:
        return tail
    return -math.expm1(competitors * math.log1p(-tail))


def p_ed(params: SystemParams, gamma_s: float) -> float:
    """Probability that a wrong code's correlator magnitude beats the right one.

    Integrates the folded-normal density of ``|I_a|`` against the probability
    that the largest of ``M - 1`` independent ``|I_n|`` exceeds it.
    """
    _check_gamma(gamma_s)
    if params.M == 1:
        return 0.0
    st = decision_stats(params, gamma_s)
    mu, s1, s2 = st.mu1, math.sqrt(st.sigma1_sq), math.sqrt(st.sigma2_sq)

    scale = s2 * math.sqrt(2.0)

    def integrand(u):
        return _folded_pdf(u, mu, s1) * _max_exceeds(u, scale, params.M - 1)

    top = mu + 40.0 * s1
    # the integrand peaks between the two means' tails; split there
    cut = min(mu * s2 / (s1 + s2), top)
    pieces = sorted({0.0, cut, mu, top})
    total = sum(_quad(integrand, a, b, "p_ed", gamma_s=gamma_s) for a, b in zip(pieces, pieces[1:]) if b > a)
    return float(min(max(total, 0.0), 1.0))


def folded_normal_moments(mu: float, sigma_sq: float) -> tuple[float, float]:
    """Mean and variance of ``|Y|`` for ``Y ~ Normal(mu, sigma_sq)``."""
    s = math.sqrt(sigma_sq)
    mean = s * math.sqrt(2.0 / math.pi) * math.exp(-mu * mu / (2.0 * sigma_sq)) + mu * math.erf(mu / (s * math.sqrt(2.0)))
    return mean, mu * mu + sigma_sq - mean * mean


def closed_form_moments(params: SystemParams, gamma_s: float, literal: bool = False) -> tuple[float, float]:
    """Mean ``Gamma`` and variance ``rho`` of ``|I_a|`` used by the closed form.

    ``literal=True`` keeps the printed expressions: the erf argument equals the
    exponent (no square root) and the first term of ``rho`` has the
    ``(P1 + P2) / (P1 P2)`` ratio inverted.
    """
    _check_gamma(gamma_s)
    P1, P2, L = params.P1, params.P2, params.L
    if not literal:
        st = decision_stats(params, gamma_s)
        return folded_normal_moments(st.mu1, st.sigma1_sq)
    expo = (P1 * P2 / (P1 + P2) ** 2) * gamma_s**2 / (gamma_s + 0.5 * L)
    Gamma = math.sqrt((P1 * P2 + 0.5 * P1 * P2 * L / gamma_s) / math.pi) * math.exp(-expo) - (
        P1 * P2 / (P1 + P2) * math.sqrt(gamma_s) * math.erf(-expo)
    )
    rho = ((P1 + P2) / (P1 * P2)) ** 2 * gamma_s + 0.5 * P1 * P2 + P1 * P2 * L / (4.0 * gamma_s) - Gamma**2
    return Gamma, rho


def p_ed_closed_form(params: SystemParams, gamma_s: float, literal: bool = False) -> float:
    """Code-index error probability with ``|I_a|`` approximated as Normal(Gamma, rho).

    The corrected variant evaluates the wrong-code CDF as ``erf(u / sqrt(2 Omega))``;
    ``literal=True`` uses ``erf(u / (2 Omega))`` together with the literal moments.
    """
    if params.M == 1:
        return 0.0
    Gamma, rho = closed_form_moments(params, gamma_s, literal)
    if not rho > 0:
        raise NumericalFailureError("closed-form variance is not positive", gamma_s=gamma_s, rho=rho, literal=literal)
    omega = decision_stats(params, gamma_s).omega
    scale = 2.0 * omega if literal else math.sqrt(2.0 * omega)
    sr = math.sqrt(rho)

    def integrand(u):
        return _folded_pdf(u, Gamma, sr) * _max_exceeds(u, scale, params.M - 1)

    top = abs(Gamma) + 40.0 * sr
    pieces = sorted({0.0, min(abs(Gamma), top) / 2, abs(Gamma), top})
    total = sum(_quad(integrand, a, b, "p_ed_closed_form", gamma_s=gamma_s) for a, b in zip(pieces, pieces[1:]) if b > a)
    return float(total)


def p_e_mod(params: SystemParams, gamma_s):
    """Error probability of the modulated bit given the right code was detected."""
    _check_gamma(gamma_s)
    P1, P2 = params.P1, params.P2
    g = gamma_s if isinstance(gamma_s, (int, float)) else np.asarray(gamma_s, dtype=float)
    ratio = (P1 + P2) ** 2 / (P1 * P2 * g) + (P1 + P2) * params.beta / (2.0 * P1 * P2 * g**2)
    return _half_erfc_inv_sqrt(ratio)


def q_index_errors(m_c: int, M: int) -> float:
    """Expected number of wrong index bits given a code-index error."""
    if m_c < 1 or M != 2**m_c:
        raise InvalidParameterError(f"need M = 2**m_c with m_c >= 1, got m_c={m_c}, M={M}")
    return sum(i * math.comb(m_c, i) for i in range(1, m_c + 1)) / (M - 1)


def p_edir_from_parts(ped: float, pe: float, m_c: int, M: int) -> float:
    """Combine index-error and sign-error probabilities into the direct-link BER."""
    p_em = pe * (1.0 - ped) + 0.5 * ped
    if m_c == 0:
        return p_em
    p_ecim = q_index_errors(m_c, M) / m_c * ped
    return m_c / (1.0 + m_c) * p_ecim + p_em / (1.0 + m_c)


def p_edir(params: SystemParams, gamma_s: float) -> float:
    """Average direct-link BER over index and modulated bits (AWGN)."""
    return p_edir_from_parts(p_ed(params, gamma_s), float(p_e_mod(params, gamma_s)), params.m_c, params.M)


# -- backscatter link --------------------------------------------------------


def p_ebc(params: SystemParams, gamma_s):
    """Backscatter-link BER in AWGN at unit reflection gain.

    For a reflection gain ``G`` (``zeta**2`` times any channel power gain) the
    BER is ``p_ebc(params, G * gamma_s)``.
    """
    _check_gamma(gamma_s)
    n = params.P1 + params.P2
    g = np.asarray(gamma_s, dtype=float)
    return _half_erfc_inv_sqrt(n / g + n * params.beta / (8.0 * g**2))


def _chi2_less(L: int, lam_a: float, lam_b: float, what: str) -> float:
    """``P(A < B)`` for independent noncentral chi-square ``A``, ``B`` with L degrees of freedom."""
    if lam_b == 0.0:
        pdf_b = lambda t: stats.chi2.pdf(t, L)  # noqa: E731
    else:
        pdf_b = lambda t: stats.ncx2.pdf(t, L, lam_b)  # noqa: E731

    def integrand(t):
        return pdf_b(t) * stats.ncx2.cdf(t, L, lam_a)

    hi = stats.chi2.ppf(1.0 - 1e-15, L) + 2.0 * lam_b + 40.0 * math.sqrt(L + 2.0 * lam_b)
    pieces = [0.0, float(L), L + lam_b, hi]
    return float(sum(_quad(integrand, a, b, what) for a, b in zip(pieces, pieces[1:]) if b > a))


def p_ebc_constant_energy(params: SystemParams, gamma_s: float) -> float:
    """Exact backscatter BER when every chaotic sequence has energy exactly L.

    The correlator ``<A, B>`` equals ``(|A+B|**2 - |A-B|**2) / 4``; the two
    energies are independent noncentral and central chi-square variables with
    L degrees of freedom, so no Gaussian approximation is needed.
    """
    _check_gamma(gamma_s)
    lam = 8.0 * gamma_s / (params.P1 + params.P2)
    return _chi2_less(params.L, lam, 0.0, "p_ebc_constant_energy")


def p_e_mod_constant_energy(params: SystemParams, gamma_s: float) -> float:
    """Exact modulated-bit error, given the right code, for chips of energy exactly L.

    Scaling the summed reference by ``1/sqrt(P1)`` and the despread information
    part by ``1/sqrt(P2)`` gives two vectors with equal noise, so the same
    sum/difference split applies with means ``(sqrt(P1) +- sqrt(P2)) x``.
    """
    _check_gamma(gamma_s)
    P1, P2 = params.P1, params.P2
    scale = gamma_s / (P1 + P2)  # L / N0
    lam_plus = (math.sqrt(P1) + math.sqrt(P2)) ** 2 * scale
    lam_minus = (math.sqrt(P1) - math.sqrt(P2)) ** 2 * scale
    return _chi2_less(params.L, lam_plus, lam_minus, "p_e_mod_constant_energy")


# -- SR-DCSK benchmark -------------------------------------------------------


def sr_p_direct(sr: SrParams, gamma_s):
    """Benchmark direct-link BER: a DCSK correlator with 1 reference and P copies."""
    _check_gamma(gamma_s)
    g = np.asarray(gamma_s, dtype=float)
    n = 1 + sr.P
    return _half_erfc_inv_sqrt(n**2 / (sr.P * g) + n * sr.beta / (2.0 * sr.P * g**2))


def sr_p_bc(sr: SrParams, gamma_s):
    """Benchmark backscatter BER at unit reflection gain.

    Each half of the information part is folded into ``K = P/2`` alternating
    replicas; with ``N0 = beta / gamma_s`` the Gaussian-approximation ratio is
    ``2 N0 / (K R) + N0**2 / (2 K**2 R)``.
    """
    _check_gamma(gamma_s)
    g = np.asarray(gamma_s, dtype=float)
    K, R = sr.P // 2, sr.R
    n0 = sr.beta / g
    return _half_erfc_inv_sqrt(2.0 * n0 / (K * R) + n0**2 / (2.0 * K * K * R))


# -- fading ------------------------------------------------------------------


def rayleigh_pdf(gamma_h, L_paths: int, gamma_bar: float):
    """Density of the summed SNR over ``L_paths`` equal-power Rayleigh taps."""
    if L_paths < 1 or gamma_bar <= 0:
        raise InvalidParameterError(f"need L_paths >= 1 and gamma_bar > 0, got {L_paths}, {gamma_bar}")
    if isinstance(gamma_h, (int, float)):
        if gamma_h < 0:
            return 0.0
        if gamma_h == 0:
            return 1.0 / gamma_bar if L_paths == 1 else 0.0
        return math.exp(
            (L_paths - 1) * math.log(gamma_h) - math.lgamma(L_paths) - L_paths * math.log(gamma_bar) - gamma_h / gamma_bar
        )
    g = np.asarray(gamma_h, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logpdf = special.xlogy(L_paths - 1, g) - special.gammaln(L_paths) - L_paths * math.log(gamma_bar) - g / gamma_bar
    return np.where(g < 0, 0.0, np.exp(logpdf))


def _require_equal_gain(profile: ChannelProfile):
    if not profile.is_equal_gain:
        raise InvalidParameterError("quadrature needs equal tap powers; use method='monte_carlo'")


def _breakpoints(transition: float, mean: float) -> list[float]:
    pts = {0.0, mean, 10.0 * mean, 100.0 * mean}
    for k in (0.01, 0.1, 1.0, 10.0):
        pts.add(k * transition)
    return sorted(pts)


def _average(cond, pdf, transition, mean, what):
    """Piecewise quadrature of ``cond * pdf``; accuracy is judged on the total."""
    pts = _breakpoints(transition, mean)
    f = lambda t: float(cond(t)) * float(pdf(t))  # noqa: E731
    pieces = [_quad_raw(f, a, b) for a, b in zip(pts, pts[1:]) if b > a]
    total = sum(v for v, _, _ in pieces)
    err = sum(e for _, e, _ in pieces)
    if not np.isfinite(total) or err > max(1e-6 * abs(total), 1e-300):
        raise NumericalFailureError(f"{what}: quadrature did not converge", breakpoints=pts, value=total, error=err)
    # the tail beyond the last breakpoint is negligible by construction
    total += _quad_raw(f, pts[-1], np.inf)[0]
    return float(min(max(total, 0.0), 1.0))


def _transition_gain(cond: Callable[[float], float], gamma_s: float) -> float:
    """Gain where the conditional BER has dropped to about 1e-3."""
    lo, hi = 1e-12, 1e12
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if cond(mid * gamma_s) > 1e-3:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.01:
            break
    return hi


def fading_gain_average(cond, gamma_s: float, profile: ChannelProfile) -> float:
    """``E[cond(H * gamma_s)]`` with ``H`` the summed tap power of ``profile``.

    Uses the summed-SNR density with ``gamma_bar = path_loss * gamma_s / paths``.
    """
    _require_equal_gain(profile)
    Lp = profile.paths
    gamma_bar = profile.path_loss * gamma_s / Lp
    trans = _transition_gain(cond, gamma_s) * gamma_s
    return _average(cond, lambda g: rayleigh_pdf(g, Lp, gamma_bar), trans, Lp * gamma_bar, "fading average")


def product_gain_pdf(z, profile_f: ChannelProfile, profile_g: ChannelProfile):
    """Density of ``F * G`` for independent summed tap powers of two profiles."""
    a, b = profile_f.paths, profile_g.paths
    theta = (profile_f.path_loss / a) * (profile_g.path_loss / b)
    z = np.asarray(z, dtype=float)
    s = 2.0 * np.sqrt(np.maximum(z, 1e-300) / theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        logpdf = (
            math.log(2.0)
            + ((a + b) / 2.0 - 1.0) * np.log(z)
            - (a + b) / 2.0 * math.log(theta)
            - special.gammaln(a)
            - special.gammaln(b)
            + np.log(special.kve(a - b, s))
            - s
        )
    return np.where(z > 0, np.exp(logpdf), 0.0)


def cascade_gain_average(cond, gamma_s: float, profile_f: ChannelProfile, profile_g: ChannelProfile) -> float:
    """``E[cond(F * G * gamma_s)]`` over the tag's two-hop Rayleigh cascade."""
    _require_equal_gain(profile_f)
    _require_equal_gain(profile_g)
    trans = _transition_gain(cond, gamma_s)
    mean = profile_f.path_loss * profile_g.path_loss
    return _average(lambda z: cond(z * gamma_s), lambda z: product_gain_pdf(z, profile_f, profile_g), trans, mean, "cascade average")


def _tabulate(cond, lo: float, hi: float, nodes: int = 241):
    """Cubic spline of ``log cond`` over ``log gamma`` for fast vectorized evaluation."""
    grid = np.geomspace(lo, hi, nodes)
    vals = np.array([float(cond(g)) for g in grid])
    floor = np.finfo(float).tiny
    spline = CubicSpline(np.log(grid), np.log(np.maximum(vals, floor)))

    def evaluate(g):
        g = np.clip(np.asarray(g, dtype=float), lo, hi)
        return np.exp(spline(np.log(g)))

    return evaluate


def monte_carlo_average(cond, gamma_s: float, gains: np.ndarray, vectorized: bool = False) -> tuple[float, float]:
    """Sample mean and standard error of ``cond(gain * gamma_s)`` over drawn gains."""
    gains = np.asarray(gains, dtype=float)
    g = gains * gamma_s
    if vectorized:
        vals = np.asarray(cond(g), dtype=float)
    elif np.ptp(g) <= 1e-12 * g.max():
        vals = np.full(g.shape, float(cond(float(g[0]))))
    else:
        lo = max(float(g.min()), 1e-9 * gamma_s, 1e-12)
        vals = _tabulate(cond, lo, float(g.max()))(g)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


def _summed_tap_power(profile: ChannelProfile, rng, draws: int) -> np.ndarray:
    from .channel import draw

    return np.sum(draw(profile, rng, size=draws).coefficients ** 2, axis=-1)


def ber_dir_fading(
    params: SystemParams,
    eb_n0_db: float,
    profile_h: ChannelProfile,
    method: str = "quadrature",
    draws: int = 100_000,
    seed: int = 0,
) -> float:
    """Direct-link BER averaged over the Rayleigh multipath channel h."""
    gamma_s = SnrPoint.for_system(params, eb_n0_db).gamma_s
    cond = lambda g: p_edir(params, g)  # noqa: E731
    if method == "quadrature":
        return fading_gain_average(cond, gamma_s, profile_h)
    if method == "monte_carlo":
        gains = _summed_tap_power(profile_h, np.random.default_rng(seed), draws)
        return monte_carlo_average(cond, gamma_s, gains)[0]
    raise InvalidParameterError(f"unknown method {method!r}")


def ber_bc_fading(
    params: SystemParams,
    eb_n0_db: float,
    profile_f: ChannelProfile,
    profile_g: ChannelProfile,
    method: str = "quadrature",
    draws: int = 100_000,
    seed: int = 0,
) -> float:
    """Backscatter BER averaged over the f -> tag -> g cascade.

    The conditional SNR is ``zeta**2 * F * G * gamma_s`` with ``F`` and ``G``
    the summed tap powers of the two hops.
    """
    gamma_s = SnrPoint.for_system(params, eb_n0_db).gamma_s * params.zeta**2
    cond = lambda g: p_ebc(params, g)  # noqa: E731
    if method == "quadrature":
        return cascade_gain_average(cond, gamma_s, profile_f, profile_g)
    if method == "monte_carlo":
        rng = np.random.default_rng(seed)
        gains = _summed_tap_power(profile_f, rng, draws) * _summed_tap_power(profile_g, rng, draws)
        return monte_carlo_average(cond, gamma_s, gains, vectorized=True)[0]
    raise InvalidParameterError(f"unknown method {method!r}")


# -- throughput --------------------------------------------------------------


def throughput(ber: float, n_p: int, n_bc_per_symbol: int, system: str = "CIM") -> float:
    """Normalized backscatter throughput for an ``n_p``-bit packet.

    ``n_bc_per_symbol`` is the CIM system's backscatter bits per symbol; the SR
    benchmark sends one, so its packet takes that many times longer.
    """
    if not 0.0 <= ber <= 1.0:
        raise InvalidParameterError(f"BER must lie in [0, 1], got {ber}")
    if n_p < 1 or n_bc_per_symbol < 1:
        raise InvalidParameterError("n_p and n_bc_per_symbol must be >= 1")
    success = (1.0 - ber) ** n_p
    system = system.upper()
    if system == "CIM":
        return success
    if system == "SR":
        return success / n_bc_per_symbol
    raise InvalidParameterError(f"unknown system {system!r}")
