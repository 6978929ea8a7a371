"""Heston model characteristic function, its parameter gradient, and cumulants.

Model dynamics under the risk-neutral measure:

    dS_t = (r - q) S_t dt + sqrt(v_t) S_t dW_1
    dv_t = kappa (v_bar - v_t) dt + sigma sqrt(v_t) dW_2,   d<W_1, W_2> = rho dt

Transform convention used throughout this package: for the density f of the
log return z = ln(S_T / S_t),

    fhat(u) = E[exp(-i u z)] = integral f(z) exp(-i u z) dz,

i.e. the *negative*-exponent transform.  Consequences worth remembering:

* fhat(0) = 1 and fhat(i) = exp((r - q) tau)  (martingale identity),
* the conditional transform of y = ln(S_T / K) given x = ln(S_t / K) is
  fhat(u; x) = exp(-i u x) fhat(u).

Two algebraically equivalent closed forms are provided: ``chf_cui`` (compact
form with simple parameter derivatives) and ``chf_schoutens`` (the classic
branch-cut-free form, kept as a long-maturity fallback).  Both are continuous
in u over the full parameter domain.

Gradient ordering: all five-component parameter gradients in this package are
ordered (v0, v_bar, sigma, kappa, rho) -- see ``PARAM_ORDER``.  Note this is
*not* the field order of ``HestonParams``; use ``HestonParams.as_array`` /
``from_array`` instead of hand-rolling conversions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

# Canonical ordering of the five model parameters in every gradient,
# Jacobian column, bounds vector and calibration step of this package.
PARAM_ORDER = ("v0", "v_bar", "sigma", "kappa", "rho")


class ChfOverflowError(ArithmeticError):
    """Characteristic function evaluation left the double-precision range.

    Raised when an evaluation produces non-finite values.  Callers can lower
    the frequency range (smaller quadrature cutoff / wavelet scale) or switch
    the characteristic function form.
    """


@dataclass(frozen=True)
class HestonParams:
    """The five Heston parameters.

    Attributes:
        kappa: mean-reversion rate of the variance, 1/years (> 0).
        v_bar: long-run variance level (> 0).
        sigma: volatility of variance ("vol of vol", > 0).
        rho:   correlation between price and variance shocks, in [-1, 1].
        v0:    initial variance (> 0).
    """

    kappa: float
    v_bar: float
    sigma: float
    rho: float
    v0: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.v_bar <= 0:
            raise ValueError(f"v_bar must be positive, got {self.v_bar}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.v0 <= 0:
            raise ValueError(f"v0 must be positive, got {self.v0}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [-1, 1], got {self.rho}")

    def as_array(self) -> np.ndarray:
        """Parameters as a vector in ``PARAM_ORDER`` = (v0, v_bar, sigma, kappa, rho)."""
        return np.array([self.v0, self.v_bar, self.sigma, self.kappa, self.rho])

    @classmethod
    def from_array(cls, vec) -> "HestonParams":
        """Inverse of :meth:`as_array`."""
        v0, v_bar, sigma, kappa, rho = (float(v) for v in vec)
        return cls(kappa=kappa, v_bar=v_bar, sigma=sigma, rho=rho, v0=v0)

    def feller_ratio(self) -> float:
        """2*kappa*v_bar / sigma^2; > 1 keeps the variance strictly positive.

        Not enforced anywhere: realistic FX/IR/equity parameter sets violate it.
        """
        return 2.0 * self.kappa * self.v_bar / self.sigma**2


@dataclass(frozen=True)
class MarketContext:
    """Market-side inputs shared by all quotes: spot, rate and dividend yield."""

    spot: float
    rate: float = 0.0
    dividend: float = 0.0

    def __post_init__(self):
        if self.spot <= 0:
            raise ValueError(f"spot must be positive, got {self.spot}")

    @property
    def drift(self) -> float:
        """Risk-neutral log-return drift rate r - q."""
        return self.rate - self.dividend


@dataclass
class ChfEvaluation:
    """Characteristic function value and (optionally) its parameter gradient.

    ``gradient`` holds d fhat / d theta = h(u) * fhat(u) ordered per
    ``PARAM_ORDER``; ``None`` when only the value was requested.
    """

    value: complex
    gradient: Optional[np.ndarray] = None


def _core_terms(u, tau: float, theta: HestonParams):
    """Shared intermediates xi, u^2 - iu, d for both characteristic forms."""
    u = np.asarray(u, dtype=np.complex128)
    iu = 1j * u
    xi = theta.kappa + theta.sigma * theta.rho * iu
    u2 = u * u - iu
    d = np.sqrt(xi * xi + theta.sigma**2 * u2)
    return u, iu, xi, u2, d


def _check_finite(values) -> None:
    # a single reduction: any inf/nan poisons the sum
    total = np.asarray(values).sum()
    if not (np.isfinite(total.real) and np.isfinite(total.imag)):
        raise ChfOverflowError(
            "characteristic function overflowed double precision; "
            "reduce the frequency range or switch form"
        )


def chf_cui(u, tau: float, theta: HestonParams, ctx: MarketContext,
            stabilized: bool = True):
    """Characteristic function of ln(S_T/S_t), compact form.

    Accepts scalar or array ``u`` (real or complex); returns a matching
    complex scalar/array.

    The hyperbolic terms cosh(d tau/2), sinh(d tau/2) overflow for large
    Re(d) tau.  The default evaluation factors exp(d tau / 2) out of every
    ratio and keeps the leading exponential in log space, which removes the
    overflow without changing the value.  ``stabilized=False`` evaluates the
    hyperbolics directly and is kept only so tests can demonstrate the
    overflow; do not use it for pricing.

    Raises:
        ChfOverflowError: if the evaluation produces non-finite values.
    """
    u, iu, xi, u2, d = _core_terms(u, tau, theta)
    sigma, kappa, v_bar, v0 = theta.sigma, theta.kappa, theta.v_bar, theta.v0

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if stabilized:
            decay = np.exp(-d * tau)  # |.| <= 1 since Re(d) >= 0
            a1 = u2 * (1.0 - decay) / 2.0                       # A1 exp(-d tau/2)
            a2 = (d * (1.0 + decay) + xi * (1.0 - decay)) / 2.0  # v0 A2 exp(-d tau/2)
            big_a = v0 * a1 / a2
            # log B: the exp((kappa - d) tau / 2) factor never leaves log space
            big_d = (np.log(d) + (kappa - d) * tau / 2.0
                     - np.log((d + xi) / 2.0 + (d - xi) * decay / 2.0))
        else:
            sh = np.sinh(d * tau / 2.0)
            ch = np.cosh(d * tau / 2.0)
            big_a = v0 * u2 * sh / (d * ch + xi * sh)
            big_d = (np.log(d) + (kappa - d) * tau / 2.0
                     - np.log((d + xi) / 2.0 + (d - xi) * np.exp(-d * tau) / 2.0))

        exponent = (-iu * ctx.drift * tau
                    + kappa * v_bar * theta.rho * tau * iu / sigma
                    - big_a
                    + (2.0 * kappa * v_bar / sigma**2) * big_d)
        out = np.exp(exponent)

    _check_finite(out)
    return out if out.ndim else complex(out)


def chf_schoutens(u, tau: float, theta: HestonParams, ctx: MarketContext):
    """Characteristic function of ln(S_T/S_t), branch-cut-free classic form.

    Equal to :func:`chf_cui` wherever both evaluate finitely; exposed
    separately because reference pricers built on it behave differently in
    the extreme-maturity regimes where the naive compact form overflows.
    """
    u, iu, xi, u2, d = _core_terms(u, tau, theta)
    sigma, kappa, v_bar, v0 = theta.sigma, theta.kappa, theta.v_bar, theta.v0

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        g = (xi - d) / (xi + d)
        decay = np.exp(-d * tau)
        one_m_gdecay = 1.0 - g * decay
        term_vbar = (kappa * v_bar / sigma**2) * (
            (xi - d) * tau - 2.0 * np.log(one_m_gdecay / (1.0 - g)))
        term_v0 = (v0 / sigma**2) * (xi - d) * (1.0 - decay) / one_m_gdecay
        out = np.exp(-iu * ctx.drift * tau + term_vbar + term_v0)

    _check_finite(out)
    return out if out.ndim else complex(out)


def chf_cui_parts(u, tau: float, theta: HestonParams, ctx: MarketContext):
    """fhat(u) plus the stabilized intermediates the gradient reuses.

    Returns (value, parts).  ``parts`` is an opaque tuple consumed by
    :func:`chf_gradient_from_parts`; holding on to it lets a pricer reuse
    the transcendental-heavy work of a price evaluation when the gradient
    at the same parameters is requested next (the gradient assembly itself
    is purely rational in these intermediates).
    """
    u, iu, xi, u2, d = _core_terms(u, tau, theta)
    sigma, kappa, v_bar, v0 = theta.sigma, theta.kappa, theta.v_bar, theta.v0

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        decay = np.exp(-d * tau)
        one_m = 1.0 - decay
        a1 = u2 * one_m / 2.0
        a2 = (d * (1.0 + decay) + xi * one_m) / 2.0  # v0 A2 exp(-d tau/2)
        big_a = v0 * a1 / a2
        big_d = (np.log(d) + (kappa - d) * tau / 2.0
                 - np.log((d + xi) / 2.0 + (d - xi) * decay / 2.0))
        exponent = (-iu * ctx.drift * tau
                    + kappa * v_bar * theta.rho * tau * iu / sigma
                    - big_a
                    + (2.0 * kappa * v_bar / sigma**2) * big_d)
        value = np.exp(exponent)
    _check_finite(value)
    return value, (u, iu, xi, u2, d, decay, a2, big_a, big_d)


def chf_gradient_from_parts(tau: float, theta: HestonParams, value, parts):
    """Gradient h(u) fhat(u) from a previous :func:`chf_cui_parts` call.

    Rational in the stored intermediates: no square roots, logarithms or
    exponentials are evaluated, which is what makes reusing the price
    evaluation's characteristic values during calibration worthwhile.

    The h components are assembled from the closed-form partials of the
    intermediates (d, A1, A2, A, log B) with every unbounded factor
    exp(d tau / 2) cancelled in ratio form, so the gradient is available in
    exactly the regimes where the stabilized value is.  At u = 0 the
    gradient is identically zero (fhat == 1 for every parameter value) and
    is returned as exact zeros.
    """
    u, iu, xi, u2, d, decay, a2, big_a, big_d = parts
    sigma, kappa, v_bar, v0, rho = (
        theta.sigma, theta.kappa, theta.v_bar, theta.v0, theta.rho)

    zero_mask = (u == 0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if np.any(zero_mask):
            # guard the divisions below; masked entries are zeroed at the end
            iu = np.where(zero_mask, 1j, iu)
            u2 = np.where(zero_mask, 1.0 + 0.0j, u2)

        one_p = 1.0 + decay
        one_m = 1.0 - decay

        # Partials w.r.t. rho, all expressed as ratios against a2 so the
        # exp(d tau / 2) factors cancel:
        #   d_drho          = xi sigma i u / d
        #   (dA2/drho)/A2   = sigma iu (2 + xi tau) c_rho / (2 d a2)
        #   (dA1/drho)/A2   = v0 iu u2 tau xi sigma (1+decay) / (4 d a2)
        # with c_rho = (xi (1+decay) + d (1-decay)) / 2.
        d_drho = xi * sigma * iu / d
        c_rho = (xi * one_p + d * one_m) / 2.0
        r2_rho = sigma * iu * (2.0 + xi * tau) * c_rho / (2.0 * d * a2)
        r1_rho = v0 * iu * u2 * tau * xi * sigma * one_p / (4.0 * d * a2)
        dA_drho = r1_rho - big_a * r2_rho

        # Partials w.r.t. sigma (same ratio treatment).
        d_dsigma = (rho / sigma) * d_drho + sigma * u2 / d
        r1_sigma = v0 * u2 * tau * d_dsigma * one_p / (4.0 * a2)
        r2_sigma = ((rho / sigma) * r2_rho
                    + (2.0 + tau * xi) / (v0 * tau * xi * iu) * r1_rho
                    + sigma * tau * big_a / (2.0 * v0))
        dA_dsigma = r1_sigma - big_a * r2_sigma

        two_kvb = 2.0 * kappa * v_bar / sigma**2

        h_v0 = -big_a / v0
        h_vbar = two_kvb / v_bar * big_d + kappa * rho * tau * iu / sigma
        h_rho = (kappa * v_bar * tau * iu / sigma
                 - dA_drho
                 + two_kvb / d * (d_drho - d * r2_rho))
        # d/dkappa acts through xi (1/(sigma iu) times the rho-derivative)
        # plus the explicit exp(kappa tau / 2) factor inside log B.
        h_kappa = (v_bar * rho * tau * iu / sigma
                   - dA_drho / (sigma * iu)
                   + (2.0 * v_bar / sigma**2) * big_d
                   + two_kvb * (xi / (d * d) - r2_rho / (sigma * iu) + tau / 2.0))
        h_sigma = (-kappa * v_bar * rho * tau * iu / sigma**2
                   - dA_dsigma
                   - 2.0 * two_kvb / sigma * big_d
                   + two_kvb / d * (d_dsigma - d * r2_sigma))

        grad = np.stack([h_v0, h_vbar, h_sigma, h_kappa, h_rho]) * value
        if np.any(zero_mask):
            grad = np.where(zero_mask[None, ...], 0.0 + 0.0j, grad)

    _check_finite(grad)
    return grad


def chf_with_gradient(u, tau: float, theta: HestonParams, ctx: MarketContext):
    """Vectorized fhat(u) and gradient d fhat/d theta = h(u) fhat(u).

    Returns:
        (value, gradient): ``value`` with the shape of ``u``; ``gradient``
        with shape (5,) + u.shape, ordered per ``PARAM_ORDER``.
    """
    value, parts = chf_cui_parts(np.asarray(u, dtype=np.complex128),
                                 tau, theta, ctx)
    return value, chf_gradient_from_parts(tau, theta, value, parts)


def chf_gradient(u, tau: float, theta: HestonParams,
                 ctx: MarketContext) -> ChfEvaluation:
    """Scalar convenience wrapper around :func:`chf_with_gradient`."""
    value, grad = chf_with_gradient(u, tau, theta, ctx)
    if np.ndim(value):
        return ChfEvaluation(value=value, gradient=grad)
    return ChfEvaluation(value=complex(value), gradient=grad.reshape(5))


def cumulants(theta: HestonParams, tau: float, ctx: MarketContext):
    """First, second and fourth cumulant of z = ln(S_T/S_t).

    With m(s) = E[v_s] = v_bar + (v0 - v_bar) e^{-kappa s} and
    B(s) = (1 - e^{-kappa (tau - s)}) / kappa, the exact moments are

        c1 = (r - q) tau - 1/2 int m
        c2 = int m  -  sigma rho int B m  +  (sigma^2 / 4) int B^2 m,

    (the three variance terms are the martingale part, the leverage
    covariance and the variance of the integrated-variance drift).  All
    integrals are elementary and are written below in decaying exponentials
    so large kappa*tau cannot overflow.  The unwieldy fourth cumulant is
    returned as 0: the truncation-interval rule consuming these values is
    backed by an adaptive density-mass check, which takes over c4's role.
    c2 (and c4) are clamped at zero as a numerical guard.

    Returns:
        (c1, c2, c4) floats, c2 >= 0, c4 >= 0.
    """
    kappa, v_bar, sigma, rho, v0 = (
        theta.kappa, theta.v_bar, theta.sigma, theta.rho, theta.v0)
    ekt = np.exp(-kappa * tau)
    ekt2 = np.exp(-2.0 * kappa * tau)
    dv = v0 - v_bar

    int_m = v_bar * tau + dv * (1.0 - ekt) / kappa
    int_bm = (int_m - v_bar * (1.0 - ekt) / kappa - dv * tau * ekt) / kappa
    int_b2m = (int_m
               - 2.0 * v_bar * (1.0 - ekt) / kappa
               - 2.0 * dv * tau * ekt
               + v_bar * (1.0 - ekt2) / (2.0 * kappa)
               + dv * (ekt - ekt2) / kappa) / kappa**2

    c1 = ctx.drift * tau - 0.5 * int_m
    c2 = int_m - sigma * rho * int_bm + sigma**2 / 4.0 * int_b2m
    return float(c1), max(float(c2), 0.0), 0.0
