"""Tests for Black-Scholes pricing and implied-vol inversion."""

import math

import numpy as np
import pytest
from scipy import integrate as sci_integrate

from qamcpricer.black_scholes import BSInputs, bs_price, bs_vega, implied_vol
from qamcpricer.errors import DomainError


def lognormal_payoff_oracle(S0, K, T, r, q, sigma, kind):
    """Discounted quadrature of the lognormal payoff integral."""

    def integrand(z):
        st = S0 * np.exp((r - q - 0.5 * sigma**2) * T + sigma * np.sqrt(T) * z)
        payoff = np.maximum(st - K, 0.0) if kind == "C" else np.maximum(K - st, 0.0)
        return payoff * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)

    val, _ = sci_integrate.quad(integrand, -13, 13, limit=400)
    return math.exp(-r * T) * val


class TestBsPrice:
    def test_atm_call_matches_quadrature_oracle(self):
        inp = BSInputs(100.0, 100.0, 1.0, 0.0, 0.0, 0.2)
        # Oracle value 7.9655674564 (quad, abs err ~7e-8)
        assert bs_price(inp, "C") == pytest.approx(7.965567455405804, abs=1e-12)
        assert bs_price(inp, "C") == pytest.approx(lognormal_payoff_oracle(100, 100, 1, 0, 0, 0.2, "C"), abs=1e-6)

    def test_put_matches_quadrature_oracle(self):
        inp = BSInputs(100.0, 95.0, 0.5, 0.03, 0.01, 0.25)
        oracle = lognormal_payoff_oracle(100.0, 95.0, 0.5, 0.03, 0.01, 0.25, "P")
        assert bs_price(inp, "P") == pytest.approx(oracle, abs=1e-6)

    def test_small_sigma_reaches_intrinsic(self):
        inp = BSInputs(100.0, 80.0, 1.0, 0.03, 0.01, 1e-6)
        df = math.exp(-0.03)
        fw = 100.0 * math.exp(0.02)
        assert bs_price(inp, "C") == pytest.approx(df * (fw - 80.0), abs=1e-10)

    def test_put_call_parity_random_inputs(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            S0 = rng.uniform(10, 200)
            K = rng.uniform(0.5 * S0, 1.5 * S0)
            T = rng.uniform(0.05, 3.0)
            r = rng.uniform(0.0, 0.08)
            q = rng.uniform(0.0, 0.05)
            sigma = rng.uniform(0.05, 1.0)
            inp = BSInputs(S0, K, T, r, q, sigma)
            lhs = bs_price(inp, "C") - bs_price(inp, "P")
            rhs = S0 * math.exp(-q * T) - K * math.exp(-r * T)
            assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, S0))

    def test_vega_positive_finite_differences(self):
        for sigma in np.linspace(0.05, 1.5, 12):
            inp = BSInputs(100.0, 105.0, 0.75, 0.02, 0.0, sigma)
            h = 1e-5
            fd = (bs_price(inp.with_sigma(sigma + h), "C") - bs_price(inp.with_sigma(sigma - h), "C")) / (2 * h)
            assert fd > 0
            assert fd == pytest.approx(bs_vega(inp), rel=1e-5)

    def test_invariant_violations_raise(self):
        with pytest.raises(DomainError):
            BSInputs(-1.0, 100.0, 1.0)
        with pytest.raises(DomainError):
            BSInputs(100.0, 100.0, 0.0)
        with pytest.raises(DomainError):
            bs_price(BSInputs(100.0, 100.0, 1.0, 0.0, 0.0, 0.0), "C")
        with pytest.raises(DomainError):
            bs_price(BSInputs(100.0, 100.0, 1.0, 0.0, 0.0, 0.2), "X")


class TestImpliedVol:
    def test_round_trip(self):
        inp = BSInputs(100.0, 110.0, 1.0, 0.02, 0.0, 0.2)
        price = bs_price(inp, "C")
        assert implied_vol(price, inp, "C") == pytest.approx(0.2, abs=1e-8)

    @pytest.mark.parametrize("sigma", [0.05, 0.2, 0.8, 2.0])
    @pytest.mark.parametrize("kind", ["C", "P"])
    def test_round_trip_grid(self, sigma, kind):
        inp = BSInputs(50.0, 55.0, 0.5, 0.03, 0.01, sigma)
        price = bs_price(inp, kind)
        assert implied_vol(price, inp, kind) == pytest.approx(sigma, abs=1e-8)

    def test_below_intrinsic_rejected(self):
        inp = BSInputs(100.0, 80.0, 1.0, 0.0, 0.0, 0.2)
        with pytest.raises(DomainError):
            implied_vol(19.0, inp, "C")  # intrinsic is 20

    def test_monotone_in_price(self):
        inp = BSInputs(100.0, 100.0, 1.0, 0.0, 0.0, 0.2)
        prices = [6.0, 8.0, 10.0, 14.0]
        vols = [implied_vol(p, inp, "C") for p in prices]
        assert all(a < b for a, b in zip(vols, vols[1:]))
