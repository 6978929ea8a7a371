"""Bundled parameter sets and strike/maturity fixtures for the experiments.

Named parameter sets:

* ``theta1``      -- the literature stress vector (kappa=3, v_bar=0.1,
                     sigma=0.25, rho=-0.8, v0=0.08).  Kept for reference and
                     gradient tests; note that the published stress-table
                     *values* are not produced by this vector.
* ``stress``      -- the vector that actually reproduces the published
                     stress prices (verified against an independent
                     Black-Scholes-limit oracle): theta2 with sigma=0.5751.
* ``theta2``      -- the calibration target for the speed experiments.
* ``theta2-start``-- the perturbed initial guess (identical to ``stress``).
* ``fx``/``ir``/``eq`` -- realistic long-dated FX / interest-rate / equity
                     sets for the convergence experiments.

Quote sets:

* ``set1`` -- 40 strikes, single expiry 0.119047619047619.
* ``set2`` -- the same 40 strikes spread over 8 expiries (5 per expiry).
* ``set3`` -- set2 priced/calibrated with per-quote grouping (the grouping
              is a protocol, not different data; see the speed experiment).
* ``stress``-- the 3x2 stress grid (K in {50, 100, 200}, tau in {45, 0.04},
              spot 100).

Sets 1/2 quote moneyness-style strikes against spot 1.0 with zero rate and
dividend; ``--rate`` style overrides live in the harness.
"""

from __future__ import annotations

import hashlib
import json
import os

from .heston import HestonParams, MarketContext
from .swift import OptionQuote

FIXTURE_DIR_ENV = "SWIFTCAL_FIXTURE_DIR"

PARAM_SETS = {
    "theta1": HestonParams(kappa=3.0, v_bar=0.1, sigma=0.25, rho=-0.8, v0=0.08),
    "theta2": HestonParams(kappa=1.5768, v_bar=0.0398, sigma=0.0175,
                           rho=-0.5711, v0=0.0175),
    "theta2-start": HestonParams(kappa=1.5768, v_bar=0.0398, sigma=0.5751,
                                 rho=-0.5711, v0=0.0175),
    "stress": HestonParams(kappa=1.5768, v_bar=0.0398, sigma=0.5751,
                           rho=-0.5711, v0=0.0175),
    "fx": HestonParams(kappa=0.5, v_bar=0.04, sigma=1.0, rho=-0.9, v0=0.04),
    "ir": HestonParams(kappa=0.3, v_bar=0.04, sigma=0.9, rho=-0.5, v0=0.04),
    "eq": HestonParams(kappa=1.0, v_bar=0.09, sigma=1.0, rho=0.04, v0=0.09),
}

CONVERGE_TARGETS = ("fx", "ir", "eq")

SET2_MATURITIES = (
    0.119047619047619,
    0.238095238095238,
    0.357142857142857,
    0.476190476190476,
    0.595238095238095,
    0.714285714285714,
    1.07142857142857,
    1.42857142857143,
)

SET2_STRIKES = (
    (0.9371, 0.9956, 1.0427, 1.2287, 1.3939),
    (0.8603, 0.9868, 1.0463, 1.2399, 1.4102),
    (0.8112, 0.9728, 1.0499, 1.2485, 1.4291),
    (0.7760, 0.9588, 1.0530, 1.2659, 1.4456),
    (0.7470, 0.9464, 1.0562, 1.2646, 1.4603),
    (0.7216, 0.9358, 1.0593, 1.2715, 1.4736),
    (0.6699, 0.9175, 1.0663, 1.2859, 1.5005),
    (0.6137, 0.9025, 1.0766, 1.3046, 1.5328),
)

SET1_MATURITY = SET2_MATURITIES[0]

STRESS_SPOT = 100.0
STRESS_STRIKES = (50.0, 100.0, 200.0)
STRESS_MATURITIES = (45.0, 0.04)

DEFAULT_CONTEXT = MarketContext(spot=1.0, rate=0.0, dividend=0.0)
STRESS_CONTEXT = MarketContext(spot=STRESS_SPOT, rate=0.0, dividend=0.0)


def set1_quotes():
    """All 40 strikes at the single expiry, without prices."""
    return [OptionQuote(strike=k, maturity=SET1_MATURITY)
            for row in SET2_STRIKES for k in row]


def set2_quotes():
    """8 expiries x 5 strikes, without prices."""
    return [OptionQuote(strike=k, maturity=tau)
            for tau, row in zip(SET2_MATURITIES, SET2_STRIKES) for k in row]


def stress_quotes():
    """The 3x2 stress grid (long and short maturities), without prices."""
    return [OptionQuote(strike=k, maturity=tau)
            for tau in STRESS_MATURITIES for k in STRESS_STRIKES]


QUOTE_SETS = {"set1": set1_quotes, "set2": set2_quotes, "set3": set2_quotes,
              "stress": stress_quotes}


def quote_set_context(name: str) -> MarketContext:
    return STRESS_CONTEXT if name == "stress" else DEFAULT_CONTEXT


def fixture_checksum() -> str:
    """SHA-256 of a canonical serialization of every bundled fixture."""
    blob = {
        "params": {name: [p.kappa, p.v_bar, p.sigma, p.rho, p.v0]
                   for name, p in sorted(PARAM_SETS.items())},
        "set2": {"maturities": list(SET2_MATURITIES),
                 "strikes": [list(r) for r in SET2_STRIKES]},
        "set1_maturity": SET1_MATURITY,
        "stress": {"spot": STRESS_SPOT, "strikes": list(STRESS_STRIKES),
                   "maturities": list(STRESS_MATURITIES)},
    }
    return hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()


def fixture_dir() -> str:
    """Directory searched for named quote files before the bundled sets."""
    return os.environ.get(FIXTURE_DIR_ENV, "")
