"""Expected cost of piecewise-constant round trips.

For phases ``[a, b]`` (trading) and ``[c, d]`` (impact source) with ``d <= a``
the double integral of ``G(t - s)`` is a four-term combination of the kernel's
double primitive ``G2``; a phase interacting with itself gives ``G2(b - a)``.
This makes every cost exact for kernels with a closed-form ``G2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .errors import KernelDomainError, ValidationError
from .model import (
    DecayKernel,
    Exponential,
    KernelSpec,
    Linear,
    PowerLaw,
    PowerLawSign,
    Strategy,
    Tabulated,
    _check_dims,
    in_out_turn,
)
from .quadrature import integrate


@dataclass
class CostBreakdown:
    per_pair: np.ndarray
    total: float
    method: str = "closed_form"
    quadrature_error_estimate: float = 0.0
    components: dict[str, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "total": self.total,
            "per_pair": self.per_pair.tolist(),
            "method": self.method,
            "quadrature_error_estimate": self.quadrature_error_estimate,
        }
        for name, arr in self.components.items():
            out[name] = arr.tolist()
        return out


def _pair_weights(times: np.ndarray, g2) -> np.ndarray:
    """``W[k, l] = int_{phase k} dt int_{phase l, s < t} G(t - s) ds`` for ``l <= k``."""
    a, b = times[:-1], times[1:]
    K = a.size
    W = np.zeros((K, K))
    W[np.diag_indices(K)] = g2(b - a)
    if K > 1:
        k, l = np.tril_indices(K, -1)
        W[k, l] = (g2(b[k] - a[l]) - g2(a[k] - a[l])
                   - g2(b[k] - b[l]) + g2(a[k] - b[l]))
    return W


def _closed_pair(kernel: DecayKernel, fn, strat: Strategy, i: int, j: int):
    drift = np.asarray(fn(strat.rates[:, j]), dtype=float)
    vi = strat.rates[:, i]
    if not (np.any(drift) and np.any(vi)):
        return 0.0, 0.0
    if isinstance(kernel, Tabulated):
        err = [0.0]

        def g2(x):
            vals = [kernel.double_primitive_with_error(v) for v in np.atleast_1d(x)]
            err[0] += sum(e for _, e in vals)
            return np.array([v for v, _ in vals]).reshape(np.shape(x))

        W = _pair_weights(strat.times, g2)
        return float(vi @ W @ drift), err[0] * float(np.abs(vi).max() * np.abs(drift).max())
    W = _pair_weights(strat.times, kernel.double_primitive)
    return float(vi @ W @ drift), 0.0


def _quadrature_pair(kernel: DecayKernel, fn, strat: Strategy, i: int, j: int, atol: float):
    """Nested adaptive quadrature of the cost double integral for one pair."""
    if not kernel.bounded:
        raise KernelDomainError(
            "power-law kernels are singular at zero lag; the quadrature path is refused, "
            "use the analytic phase integrals")
    times = strat.times
    drift = np.asarray(fn(strat.rates[:, j]), dtype=float)
    vi = strat.rates[:, i]
    bps = tuple(kernel.breakpoints)
    total, err = 0.0, 0.0
    for k in np.flatnonzero(vi):
        a, b = times[k], times[k + 1]
        for l in np.flatnonzero(drift[: k + 1]):
            c, d = times[l], times[l + 1]

            def inner(t, c=c, d=d):
                t = np.atleast_1d(t)
                out = np.empty_like(t)
                for m, tm in enumerate(t):
                    hi = min(d, tm)
                    # integrate G over lags u = t - s, s in [c, hi]
                    out[m] = integrate(kernel, tm - hi, tm - c, rtol=1e-12, atol=atol * 1e-3,
                                       breakpoints=bps)[0] if hi > c else 0.0
                return out

            cuts = [c + x for x in bps] + [d + x for x in bps] + [d]
            val, e = integrate(inner, a, b, rtol=1e-10, atol=atol, breakpoints=cuts)
            total += vi[k] * drift[l] * val
            err += abs(vi[k] * drift[l]) * e
    return total, err


def cost(spec: KernelSpec, strat: Strategy, method: str = "auto") -> CostBreakdown:
    """Expected cost ``C = sum_ij int xdot^i_t int_0^t f^{ij}(xdot^j_s) G^{ij}(t-s) ds dt``.

    ``method`` is ``"auto"`` (closed forms where available, quadrature for
    tabulated kernels), ``"closed_form"`` or ``"quadrature"`` (nested adaptive
    Gauss-Legendre; refused for power-law kernels).
    """
    _check_dims(spec, strat)
    if method not in ("auto", "closed_form", "quadrature"):
        raise ValidationError(f"unknown cost method {method!r}")
    if not np.all(np.isfinite(strat.rates)):
        raise ValidationError("strategy rates must be finite")
    n = spec.n_assets
    per_pair = np.zeros((n, n))
    err = 0.0
    used_quad = False
    if method == "quadrature":
        vmax = float(np.abs(strat.rates).max()) if strat.rates.size else 0.0
        fmax = max((float(np.abs(spec.f[i][j](strat.rates[:, j])).max())
                    for i in range(n) for j in range(n)), default=0.0)
        atol = 1e-12 * max(fmax * vmax * strat.horizon**2, 1e-300)
    for i in range(n):
        for j in range(n):
            kern = spec.G[i][j]
            if method == "quadrature":
                val, e = _quadrature_pair(kern, spec.f[i][j], strat, i, j, atol)
                used_quad = True
            else:
                if method == "closed_form" and not kern.analytic:
                    raise ValidationError(f"G[{i}][{j}] ({kern.kind}) has no closed form")
                val, e = _closed_pair(kern, spec.f[i][j], strat, i, j)
                used_quad |= not kern.analytic
            if not math.isfinite(val):
                raise ValidationError(f"non-finite cost contribution for pair ({i}, {j})")
            per_pair[i, j] = val
            err += e
    return CostBreakdown(per_pair, float(per_pair.sum()),
                         "quadrature" if used_quad else "closed_form", float(err))


def cost_in_out(spec: KernelSpec, v1, v2, T: float) -> CostBreakdown:
    """Cost of the two-phase in-out strategy split into build, cross and unwind terms.

    ``C_A`` is the build phase acting on itself, ``C_B`` the unwind phase
    trading against the impact of the build phase, ``C_C`` the unwind phase
    acting on itself.
    """
    v1 = np.atleast_1d(np.asarray(v1, dtype=float))
    v2 = np.atleast_1d(np.asarray(v2, dtype=float))
    n = spec.n_assets
    if v1.size != n or v2.size != n:
        raise ValidationError(f"dimension mismatch: spec has {n} assets, rates have {v1.size}")
    if not (T > 0 and math.isfinite(T)):
        raise ValidationError("horizon T must be positive and finite")
    theta = in_out_turn(v1, v2, T)
    CA, CB, CC = np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            g2 = spec.G[i][j].double_primitive
            fn = spec.f[i][j]
            f1, f2 = fn(v1[j]), fn(v2[j])
            # zero-length second phase (v1 = 0) has no interaction term
            cross = float(g2(T) - g2(theta) - g2(T - theta)) if theta < T else 0.0
            CA[i, j] = v1[i] * f1 * float(g2(theta))
            CB[i, j] = v2[i] * f1 * cross
            CC[i, j] = v2[i] * f2 * float(g2(T - theta))
    per_pair = CA + CB + CC
    method = "quadrature" if any(not g.analytic for row in spec.G for g in row) else "closed_form"
    return CostBreakdown(per_pair, float(per_pair.sum()), method, 0.0,
                         {"C_A": CA, "C_B": CB, "C_C": CC})


def powerlaw_lambda(eta, gamma, T):
    """``Lambda = eta T^{2-gamma} (2^gamma - 1) / ((1-gamma)(2-gamma))`` (elementwise)."""
    eta = np.asarray(eta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    return eta * T ** (2.0 - gamma) * (2.0**gamma - 1.0) / ((1.0 - gamma) * (2.0 - gamma))


def cost_powerlaw_inout(eta, gamma, delta, v, T: float) -> CostBreakdown:
    """Equal-phase round trip under power-law kernels and power-law impact.

    Each asset trades at ``v_i`` on ``[0, T/2]`` and at ``-v_i`` on ``[T/2, T]``.
    Then ``C^{ij} = Lambda^{ij} v_i sgn(v_j) |v_j|^{delta^{ij}}``; for a hedged
    pair (``v_j`` of opposite sign) the cross term enters negatively.
    """
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    n = v.size
    for name, arr in (("eta", eta), ("gamma", gamma), ("delta", delta)):
        if arr.shape != (n, n):
            raise ValidationError(f"{name} must be {n}x{n}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{name} contains non-finite entries")
    if np.any((gamma <= 0) | (gamma >= 1)):
        raise ValidationError("power-law kernel exponents must lie in (0, 1)")
    if np.any((delta <= 0) | (delta > 1)):
        raise ValidationError("impact exponents must lie in (0, 1]")
    if not (T > 0 and math.isfinite(T)):
        raise ValidationError("horizon T must be positive and finite")
    lam = powerlaw_lambda(eta, gamma, T)
    per_pair = lam * v[:, None] * (np.sign(v) * np.abs(v)[None, :] ** delta)
    return CostBreakdown(per_pair, float(per_pair.sum()), "closed_form", 0.0, {"Lambda": lam})


def powerlaw_spec(eta, gamma, delta) -> KernelSpec:
    """KernelSpec with ``G = tau^{-gamma}`` and ``f = eta sgn(v) |v|^delta`` entrywise."""
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    n = eta.shape[0]
    G = [[PowerLaw(float(gamma[i, j])) for j in range(n)] for i in range(n)]
    f = [[Linear(float(eta[i, j])) if delta[i, j] == 1.0 and eta[i, j] < 0
          else PowerLawSign(float(eta[i, j]), float(delta[i, j])) for j in range(n)]
         for i in range(n)]
    return KernelSpec(n, G, f)


# ---------------------------------------------------------------------------
# Three-phase strategy under exponential decay
# ---------------------------------------------------------------------------

# G2 weights of each pair of the three-phase strategy with phase length h:
# bracket = sum_m c_m G2(m h).
THREE_PHASE_BRACKETS = {
    (0, 0): {1: 1, 2: 2, 3: -1},
    (1, 1): {1: 4, 2: -1},
    (0, 1): {1: 2, 2: -3, 3: 1},
    (1, 0): {1: -3, 2: 1},
}


def _moment(coeffs: dict[int, int], power: int) -> int:
    return sum(c * m**power for m, c in coeffs.items())


def three_phase_bracket(coeffs: dict[int, int], rho: float, h: float) -> float:
    """``sum_m c_m G2(m h)`` for ``G = exp(-rho tau)`` without cancellation loss.

    With ``G2(x) = sum_k (-rho)^k x^{k+2} / (k+2)!`` the bracket becomes a
    power series in ``y = rho h`` whose coefficients are exact integers; the
    series is used for ``y < 1`` and the closed form above that.
    """
    y = rho * h
    if y >= 1.0:
        return float(sum(c * Exponential(rho).double_primitive(m * h) for m, c in coeffs.items()))
    total = 0.0
    term_scale = h * h
    for k in range(60):
        mom = _moment(coeffs, k + 2)
        if mom:
            total += float(Fraction(mom, math.factorial(k + 2))) * term_scale
        term_scale *= -y
        if abs(term_scale) < 1e-18 * max(abs(total), 1e-300) and k > 4:
            break
    return total


def _expansion_coefficients() -> dict[tuple[int, int], Fraction]:
    # first-order (in rho) coefficient of each bracket, in units of rho h^3
    return {pair: Fraction(-_moment(c, 3), 6) for pair, c in THREE_PHASE_BRACKETS.items()}


def exponential_expansion_cost(eta, rho, v, T: float) -> tuple[float, float]:
    """Exact and leading-order cost of the three-phase strategy under exponential decay.

    Asset ``a`` trades ``(va, 0, -va)`` and asset ``b`` trades ``(-vb, vb, 0)``
    over three phases of length ``T/3``; ``eta`` must be symmetric.  The
    leading-order term is linear in the decay rates; its coefficients follow
    from expanding the exact brackets.
    """
    eta = np.asarray(eta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    if eta.shape != (2, 2) or rho.shape != (2, 2) or v.shape != (2,):
        raise ValidationError("expansion cost needs 2x2 eta, 2x2 rho and a 2-vector of rates")
    if not np.isclose(eta[0, 1], eta[1, 0], rtol=1e-12, atol=0.0):
        raise ValidationError("exponential expansion requires symmetric cross impact eta_ab == eta_ba")
    if np.any(rho < 0) or not (T > 0):
        raise ValidationError("decay rates must be >= 0 and T > 0")
    va, vb = v
    h = T / 3.0
    weight = {(0, 0): va * va, (1, 1): vb * vb, (0, 1): va * vb, (1, 0): va * vb}
    exact = 0.0
    leading = 0.0
    first = _expansion_coefficients()
    for (i, j), coeffs in THREE_PHASE_BRACKETS.items():
        exact += eta[i, j] * weight[i, j] * three_phase_bracket(coeffs, rho[i, j], h)
        leading += eta[i, j] * weight[i, j] * float(first[i, j]) * rho[i, j] * h**3
    return float(exact), float(leading)
