"""Detection of price manipulation: spectral test, constructive search, size bound, slippage.

Every positive finding carries a certificate, an explicit round-trip
:class:`~crossimpact.model.Strategy` whose cost, re-priced with
:func:`crossimpact.cost.cost`, is strictly negative.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .cost import cost, cost_in_out, cost_powerlaw_inout
from .errors import ValidationError
from .model import (
    KernelSpec,
    Linear,
    Permanent,
    PowerLaw,
    PowerLawSign,
    Strategy,
)

log = logging.getLogger(__name__)

CONDITIONS = (
    "OddnessViolation",
    "NonzeroAtZero",
    "SizeBound",
    "NonlinearityWithBoundedKernel",
    "AsymmetryViolation",
    "DecayRateCondition",
    "SpectralNegativity",
    "None",
)

# certificates must beat rounding noise of the closed forms by a wide margin
NEGATIVE_MARGIN = 1e-12
T_FLOOR = 1e-9


@dataclass
class ArbitrageReport:
    admits_manipulation: bool
    binding_condition: str = "None"
    certificate: Strategy | None = None
    certificate_cost: float | None = None
    min_eigenvalue: float | None = None
    detail: str = ""
    pair: tuple[int, int] | None = None
    warnings: list[str] = field(default_factory=list)
    searched: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "admits_manipulation": self.admits_manipulation,
            "binding_condition": self.binding_condition,
            "certificate_cost": self.certificate_cost,
            "min_eigenvalue": self.min_eigenvalue,
            "detail": self.detail,
            "pair": list(self.pair) if self.pair is not None else None,
            "warnings": list(self.warnings),
            "searched": self.searched,
        }
        if self.certificate is not None:
            out["certificate"] = {
                "times": self.certificate.times.tolist(),
                "rates": self.certificate.rates.tolist(),
            }
        else:
            out["certificate"] = None
        return out


def _cost_scale(spec: KernelSpec, strat: Strategy) -> float:
    n = spec.n_assets
    vmax = float(np.abs(strat.rates).max())
    fmax = max(float(np.max(np.abs(spec.f[i][j](strat.rates[:, j])))) for i in range(n) for j in range(n))
    return max(fmax * vmax * strat.horizon**2, 1e-300)


def verify_certificate(spec: KernelSpec, strat: Strategy) -> tuple[bool, float]:
    """Re-price ``strat`` and report whether it is a negative-cost round trip."""
    if not strat.is_round_trip():
        return False, float("nan")
    total = cost(spec, strat).total
    return bool(total < -NEGATIVE_MARGIN * _cost_scale(spec, strat)), total


def _found(spec, strat, condition, detail="", pair=None, **extra) -> ArbitrageReport | None:
    ok, total = verify_certificate(spec, strat)
    if not ok:
        return None
    return ArbitrageReport(True, condition, strat, total, detail=detail, pair=pair, **extra)


# ---------------------------------------------------------------------------
# Spectral check
# ---------------------------------------------------------------------------


def _linear_eta(spec: KernelSpec) -> np.ndarray:
    for i, row in enumerate(spec.f):
        for j, fn in enumerate(row):
            if not fn.linear:
                raise ValidationError(
                    f"spectral check needs linear impact; f[{i}][{j}] is {fn.kind} "
                    "(use constructive_search)")
    return spec.eta()


def _cell_weights(kernel, n: int, dt: float) -> np.ndarray:
    # exact cost weights of piecewise-constant rates on n cells of width dt
    g2 = kernel.double_primitive
    lag = np.arange(n + 1) * dt
    vals = np.asarray(g2(lag), dtype=float)
    W = np.zeros((n, n))
    W[np.diag_indices(n)] = vals[1]
    for m in range(1, n):
        # cells k, l = k - m: G2((m+1)dt) - 2 G2(m dt) + G2((m-1)dt)
        W[np.arange(m, n), np.arange(0, n - m)] = vals[m + 1] - 2 * vals[m] + vals[m - 1]
    return W


def spectral_check(spec: KernelSpec, grid_size: int = 64, dt: float | None = None) -> ArbitrageReport:
    """Quadratic-form test on a uniform grid of ``grid_size`` cells of width ``dt``.

    Reports the minimum eigenvalue of the symmetrised kernel matrix
    ``M[(i,t),(j,s)] = eta^{ij} G^{ij}(|t - s| dt)``.  A certificate is sought
    from the eigenvector of ``M`` projected onto per-asset zero-sum rates and
    from the exact cell-averaged cost form restricted to round trips; a
    finding is reported only if that certificate prices negative.
    """
    eta = _linear_eta(spec)
    if not spec.is_bounded():
        raise ValidationError("spectral check needs bounded kernels")
    n = int(grid_size)
    if n < 2:
        raise ValidationError("grid_size must be >= 2")
    N = spec.n_assets
    if dt is None:
        dt = default_horizon(spec) / n
    if not (dt > 0 and math.isfinite(dt)):
        raise ValidationError("dt must be positive")
    lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) * dt
    M = np.zeros((N * n, N * n))
    Q = np.zeros((N * n, N * n))
    for i in range(N):
        for j in range(N):
            kern = spec.G[i][j]
            M[i * n:(i + 1) * n, j * n:(j + 1) * n] = eta[i, j] * np.asarray(kern(lags))
            Q[i * n:(i + 1) * n, j * n:(j + 1) * n] = eta[i, j] * _cell_weights(kern, n, dt)
    M = 0.5 * (M + M.T)
    Q = 0.5 * (Q + Q.T)
    evals, evecs = np.linalg.eigh(M)
    min_eig = float(evals[0])
    times = np.arange(n + 1) * dt
    searched = {"grid_size": n, "dt": dt}

    candidates = []
    if min_eig < 0:
        vec = evecs[:, 0].reshape(N, n)
        vec = vec - vec.mean(axis=1, keepdims=True)
        if np.abs(vec).max() > 0:
            candidates.append(("projected_eigenvector", vec / np.abs(vec).max()))
    # orthonormal basis of zero-sum rate vectors per asset
    basis = np.linalg.qr(np.eye(n)[:, :-1] - 1.0 / n)[0][:, : n - 1]
    B = np.kron(np.eye(N), basis)
    rq = B.T @ Q @ B
    r_evals, r_evecs = np.linalg.eigh(0.5 * (rq + rq.T))
    searched["restricted_min_eigenvalue"] = float(r_evals[0])
    if r_evals[0] < 0:
        vec = (B @ r_evecs[:, 0]).reshape(N, n)
        candidates.append(("restricted_eigenvector", vec / np.abs(vec).max()))
    for name, vec in candidates:
        strat = Strategy(times, vec.T)
        rep = _found(spec, strat, "SpectralNegativity", detail=name, searched=searched)
        if rep is not None:
            rep.min_eigenvalue = min_eig
            return rep
    return ArbitrageReport(False, "None", min_eigenvalue=min_eig, searched=searched)


# ---------------------------------------------------------------------------
# Constructive search
# ---------------------------------------------------------------------------


def default_horizon(spec: KernelSpec, level: float = 0.99) -> float:
    """Largest ``T <= 1`` with ``min_ij G^{ij}(T) >= level`` (1 when unbounded or flat)."""
    if not spec.is_bounded():
        return 1.0

    def gmin(t):
        return min(float(g(t)) for row in spec.G for g in row)

    if gmin(1.0) >= level:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gmin(mid) >= level:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return lo if lo > 0 else hi * 1e-3


def _horizons(cap: float) -> list[float]:
    out = []
    T = cap
    while T >= T_FLOOR:
        out.append(T)
        T *= 0.5
    return out


def default_v_grid(per_decade: int = 21, decades: int = 4, start: float = 1e-2) -> np.ndarray:
    return start * np.logspace(0, decades, per_decade * decades - (decades - 1))


def _permanent_twin(spec: KernelSpec) -> KernelSpec:
    n = spec.n_assets
    return KernelSpec(n, [[Permanent()] * n for _ in range(n)], spec.f)


def _first_hit(candidates: Sequence[Any], probe: Callable[[Any], ArbitrageReport | None],
               threads: int) -> ArbitrageReport | None:
    """First candidate (by grid order) for which ``probe`` returns a report."""
    if threads <= 1:
        for cand in candidates:
            rep = probe(cand)
            if rep is not None:
                return rep
        return None
    chunk = max(4 * threads, 1)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, len(candidates), chunk):
            results = list(pool.map(probe, candidates[start:start + chunk]))
            for rep in results:
                if rep is not None:
                    return rep
    return None


def _embed(n: int, idx: Sequence[int], vals: Sequence[float]) -> np.ndarray:
    out = np.zeros(n)
    for i, v in zip(idx, vals):
        out[i] += v
    return out


def _in_out_probe(spec, twin, condition, T_list, pair):
    """Probe for an in-out candidate ``(v1, v2, detail)``: screen at ``G = 1``, then shrink ``T``."""

    def probe(cand):
        v1, v2, detail = cand
        try:
            lead = cost_in_out(twin, v1, v2, 1.0).total
        except ValidationError:
            return None
        if not lead < 0:
            return None
        for T in T_list:
            if cost_in_out(spec, v1, v2, T).total < 0:
                rep = _found(spec, Strategy.in_out(v1, v2, T), condition, detail, pair)
                if rep is not None:
                    return rep
        return None

    return probe


def _odd_residual(fn, v) -> np.ndarray:
    a, b = np.asarray(fn(v)), np.asarray(fn(-v))
    return np.abs(a + b) > 1e-12 * (np.abs(a) + np.abs(b))


def _oddness_step(spec, twin, vg, T_list, threads):
    n = spec.n_assets
    for i in range(n):
        for j in range(n):
            fn = spec.f[i][j]
            f0 = float(fn(0.0))
            if f0 != 0.0:
                condition, detail = "NonzeroAtZero", f"f[{i}][{j}](0) = {f0:g}"
            elif np.any(_odd_residual(fn, vg)):
                condition, detail = "OddnessViolation", f"f[{i}][{j}](v) + f[{i}][{j}](-v) != 0"
            else:
                continue
            cands = []
            for v in vg:
                patterns = [((i,), (v,)), ((i,), (-v,))]
                if j != i:
                    patterns = [((i, j), (v, v)), ((i, j), (v, -v)), ((i, j), (-v, -v)),
                                ((i, j), (-v, v))] + patterns + [((j,), (v,)), ((j,), (-v,))]
                for idx, vals in patterns:
                    v1 = _embed(n, idx, vals)
                    cands.append((v1, -v1, detail))
            rep = _first_hit(cands, _in_out_probe(spec, twin, condition, T_list, (i, j)), threads)
            if rep is not None:
                return rep
    return None


def _is_linear(fn, vg) -> bool:
    if fn.linear:
        return True
    v = np.concatenate([vg, -vg])
    ratio = np.asarray(fn(v)) / v
    return bool(np.all(np.abs(ratio - ratio[0]) <= 1e-9 * max(np.abs(ratio).max(), 1e-300)))


KAPPAS = tuple(-(2.0**k) for k in range(-3, 4))
LAMBDAS = tuple(s * 2.0**k for k in range(-3, 4) for s in (1.0, -1.0))


def _nonlinearity_step(spec, twin, vg, T_list, threads):
    n = spec.n_assets
    for i in range(n):
        for j in range(n):
            if _is_linear(spec.f[i][j], vg):
                continue
            detail = f"f[{i}][{j}] is not linear"
            cands = []
            for kappa in KAPPAS:
                for v in vg:
                    for sgn in (1.0, -1.0):
                        v2 = sgn * v
                        if i == j:
                            v1 = _embed(n, (i,), (kappa * v2,))
                            cands.append((v1, v1 / kappa, detail))
                            continue
                        for lam in LAMBDAS:
                            # lambda = v_i / v_j in both phases
                            v1 = _embed(n, (i, j), (lam * kappa * v2, kappa * v2))
                            cands.append((v1, v1 / kappa, detail))
            rep = _first_hit(cands, _in_out_probe(spec, twin, "NonlinearityWithBoundedKernel",
                                                  T_list, (i, j)), threads)
            if rep is not None:
                return rep
    return None


RATIOS = (1.0, 2.0, 0.5, 4.0, 0.25, 8.0, 0.125, 16.0, 0.0625)


def _three_phase(n, a, b, va, vb, T):
    return Strategy.three_phase(va, vb, T, n_assets=n, a=a, b=b)


def _three_phase_probe(spec, twin, condition, T_list, screen=True):
    n = spec.n_assets

    def probe(cand):
        a, b, va, vb, detail = cand
        if screen and not twin_cost(twin, n, a, b, va, vb) < 0:
            return None
        for T in T_list:
            rep = _found(spec, _three_phase(n, a, b, va, vb, T), condition, detail, (a, b))
            if rep is not None:
                return rep
        return None

    return probe


def twin_cost(twin, n, a, b, va, vb):
    return cost(twin, _three_phase(n, a, b, va, vb, 1.0)).total


def _symmetry_step(spec, twin, T_list, threads):
    n = spec.n_assets
    if not spec.is_all_linear():
        return None
    eta = spec.eta()
    scale = np.abs(eta).max()
    for i in range(n):
        for j in range(i + 1, n):
            if abs(eta[i, j] - eta[j, i]) <= 1e-12 * scale:
                continue
            # a is the asset whose cross-impact on it is larger
            a, b = (i, j) if eta[i, j] > eta[j, i] else (j, i)
            detail = f"eta[{i}][{j}] = {eta[i, j]:g} != eta[{j}][{i}] = {eta[j, i]:g}"
            cands = [(a, b, 1.0, r, detail) for r in RATIOS]
            cands += [(a, b, 1.0, -r, detail) for r in RATIOS]
            cands += [(b, a, 1.0, s * r, detail) for s in (1.0, -1.0) for r in RATIOS]
            rep = _first_hit(cands, _three_phase_probe(spec, twin, "AsymmetryViolation", T_list), threads)
            if rep is not None:
                return rep
    return None


def _powerlaw_params(spec: KernelSpec):
    n = spec.n_assets
    eta, gamma, delta = np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            g, fn = spec.G[i][j], spec.f[i][j]
            if not isinstance(g, PowerLaw):
                return None
            if isinstance(fn, PowerLawSign):
                eta[i, j], delta[i, j] = fn.eta, fn.delta
            elif isinstance(fn, Linear):
                eta[i, j], delta[i, j] = fn.eta, 1.0
            else:
                return None
            gamma[i, j] = g.gamma
    return eta, gamma, delta


POWERLAW_LAMBDAS = tuple(2.0**-k for k in range(6, 0, -1))
POWERLAW_V = tuple(2.0**k for k in range(-10, 11))


def _delta_uniqueness_step(spec, threads):
    params = _powerlaw_params(spec)
    if params is None:
        return None
    eta, gamma, delta = params
    n = spec.n_assets
    if np.ptp(delta) == 0:
        return None
    cands = []
    for b in range(n):
        for a in range(n):
            if a == b or (delta[b, b] == delta[b, a] and delta[a, a] == delta[a, b]):
                continue
            for lam in POWERLAW_LAMBDAS:
                for v in POWERLAW_V:
                    for sb in (1.0, -1.0):
                        u = _embed(n, (a, b), (lam * v, sb * v))
                        cands.append((u, (a, b)))

    def probe(cand):
        u, pair = cand
        if not cost_powerlaw_inout(eta, gamma, delta, u, 1.0).total < 0:
            return None
        a, b = pair
        detail = (f"delta_uniqueness: impact exponents of assets {a}, {b} differ "
                  f"(delta[{b}][{b}] = {delta[b, b]:g}, delta[{b}][{a}] = {delta[b, a]:g}, "
                  f"delta[{a}][{a}] = {delta[a, a]:g}, delta[{a}][{b}] = {delta[a, b]:g})")
        return _found(spec, Strategy.in_out(u, -u, 1.0), "DecayRateCondition", detail, pair)

    rep = _first_hit(cands, probe, threads)
    return rep


def _size_bound_step(spec, T_list, threads):
    n = spec.n_assets
    eta = spec.eta()
    cands = []
    for i in range(n):
        for j in range(i + 1, n):
            for r in RATIOS:
                for s in (-1.0, 1.0):
                    v1 = _embed(n, (i, j), (1.0, s * r))
                    cands.append((v1, (i, j)))

    def probe(cand):
        v1, pair = cand
        i, j = pair
        sym = 0.5 * (eta[i, j] + eta[j, i])
        # without a size-bound violation a negative in-out cost is a decay effect
        if sym * sym > eta[i, i] * eta[j, j] * (1 + 1e-12) or min(eta[i, i], eta[j, j]) < 0:
            condition, detail = "SizeBound", "in-out at equal rates, cross impact above the size bound"
        else:
            condition, detail = "DecayRateCondition", "in-out at equal rates under non-uniform decay"
        for T in T_list:
            if cost_in_out(spec, v1, -v1, T).total < 0:
                rep = _found(spec, Strategy.in_out(v1, -v1, T), condition, detail, pair)
                if rep is not None:
                    return rep
        return None

    return _first_hit(cands, probe, threads)


def _decay_step(spec, T_list, threads):
    n = spec.n_assets
    cands = []
    for a in range(n):
        for b in range(n):
            if a != b:
                cands += [(a, b, 1.0, s * r, "three-phase strategy under decaying impact")
                          for s in (1.0, -1.0) for r in RATIOS]
    return _first_hit(cands, _three_phase_probe(spec, None, "DecayRateCondition", T_list, screen=False),
                      threads)


def powerlaw_warnings(spec: KernelSpec) -> list[str]:
    """Single-asset necessary conditions for power-law self-impact (advisory only)."""
    params = _powerlaw_params(spec)
    if params is None:
        return []
    _, gamma, delta = params
    gstar = 2.0 - math.log(3) / math.log(2)
    out = []
    for i in range(spec.n_assets):
        if gamma[i, i] < gstar:
            out.append(f"asset {i}: gamma = {gamma[i, i]:g} below {gstar:.3f} (single-asset condition)")
        if gamma[i, i] + delta[i, i] < 1:
            out.append(f"asset {i}: gamma + delta = {gamma[i, i] + delta[i, i]:g} < 1 (single-asset condition)")
    return out


def constructive_search(
    spec: KernelSpec,
    *,
    v_grid: Iterable[float] | None = None,
    T_cap: float | None = None,
    threads: int = 1,
) -> ArbitrageReport:
    """Look for a manipulating round trip using explicit two- and three-phase strategies.

    The tests run in a fixed order (oddness and ``f(0)``, nonlinearity under a
    bounded kernel, asymmetry of linear impact, uniqueness of the power-law
    impact exponent, size bound, decay rates) and the first certificate by
    grid order wins.  Each candidate's horizon is halved from ``T_cap`` until
    it prices negative or falls below ``1e-9``.
    """
    vg = np.asarray(list(v_grid) if v_grid is not None else default_v_grid(), dtype=float)
    if vg.size == 0 or np.any(vg <= 0):
        raise ValidationError("v_grid must hold positive rates")
    cap = float(T_cap) if T_cap is not None else default_horizon(spec)
    if not (cap > 0 and math.isfinite(cap)):
        raise ValidationError("T_cap must be positive")
    T_list = _horizons(cap)
    threads = max(int(threads), 1)
    twin = _permanent_twin(spec)
    searched = {
        "v_grid": [float(vg[0]), float(vg[-1]), int(vg.size)],
        "T_cap": cap,
        "T_floor": T_FLOOR,
        "kappas": list(KAPPAS),
        "lambdas": list(LAMBDAS),
        "ratios": list(RATIOS),
    }
    warnings = powerlaw_warnings(spec)
    steps = [
        lambda: _oddness_step(spec, twin, vg, T_list, threads),
        lambda: _nonlinearity_step(spec, twin, vg, T_list, threads) if spec.is_bounded() else None,
        lambda: _symmetry_step(spec, twin, T_list, threads),
        lambda: _delta_uniqueness_step(spec, threads),
    ]
    if spec.is_all_linear():
        steps.append(lambda: _size_bound_step(spec, T_list, threads))
        steps.append(lambda: _decay_step(spec, T_list, threads))
    for step in steps:
        rep = step()
        if rep is not None:
            rep.warnings = warnings
            rep.searched = searched
            return rep
    return ArbitrageReport(False, "None", warnings=warnings, searched=searched)


# ---------------------------------------------------------------------------
# Size bound and slippage
# ---------------------------------------------------------------------------


@dataclass
class SizeBoundResult:
    violated_pairs: list[tuple[int, int]]
    min_eigenvalue: float
    negative_diagonal: list[int]

    @property
    def psd(self) -> bool:
        return self.min_eigenvalue >= 0 and not self.negative_diagonal

    def to_dict(self):
        return {"violated_pairs": [list(p) for p in self.violated_pairs],
                "min_eigenvalue": self.min_eigenvalue,
                "negative_diagonal": self.negative_diagonal, "psd": self.psd}


def size_bound_check(eta, rtol: float = 1e-12) -> SizeBoundResult:
    """Pairwise bound ``|eta^{ij}| <= sqrt(eta^{ii} eta^{jj})`` plus the eigenvalue test.

    For two assets the pairwise bound and positive semidefiniteness coincide;
    for more assets only the minimum eigenvalue is conclusive.
    """
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    if eta.ndim != 2 or eta.shape[0] != eta.shape[1]:
        raise ValidationError("eta must be a square matrix")
    if not np.all(np.isfinite(eta)):
        raise ValidationError("eta contains non-finite entries")
    if not np.allclose(eta, eta.T, rtol=1e-12, atol=0.0):
        raise ValidationError("size bound check needs symmetric eta (asymmetry is a separate condition)")
    diag = np.diag(eta)
    negative = [int(i) for i in np.flatnonzero(diag < 0)]
    pairs = []
    n = eta.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            bound = math.sqrt(max(diag[i], 0.0) * max(diag[j], 0.0))
            if abs(eta[i, j]) > bound * (1 + rtol):
                pairs.append((i, j))
    return SizeBoundResult(pairs, float(np.linalg.eigvalsh(eta)[0]), negative)


@dataclass
class SlippageAssessment:
    pair: tuple[str, str]
    delta_eta: float
    spreads_bp: tuple[float, float]
    vT: tuple[float, float]
    T: float
    ratio: float

    @property
    def profitable(self) -> bool:
        return self.ratio > 1.0

    def to_dict(self):
        return {"pair": list(self.pair), "delta_eta": self.delta_eta,
                "spreads_bp": list(self.spreads_bp), "vT": list(self.vT), "T": self.T,
                "ratio": self.ratio, "profitable": self.profitable}


def slippage_ratio(delta_eta: float, B_a: float, B_b: float, avg_trade_value_a: float,
                   avg_trade_value_b: float, T_units: float, *, reference_T: float = 3.0,
                   pair: tuple[str, str] = ("a", "b")) -> SlippageAssessment:
    """Gain from asymmetric cross-impact over spread costs for the three-phase strategy.

    ``ratio = v_a v_b T delta_eta / (6 (v_a B_a + v_b B_b))``.  The rates are
    fixed by executing three average-sized trades in ``reference_T`` units
    (``v_i reference_T = 3 * avg_trade_value_i``) and held at that speed for
    ``T_units``.  Spreads are in basis points of value.
    """
    vals = dict(delta_eta=delta_eta, B_a=B_a, B_b=B_b, avg_trade_value_a=avg_trade_value_a,
                avg_trade_value_b=avg_trade_value_b, T_units=T_units, reference_T=reference_T)
    for name, x in vals.items():
        if not math.isfinite(x) or x < 0:
            raise ValidationError(f"{name} must be finite and non-negative, got {x}")
    if B_a == 0 or B_b == 0:
        raise ValidationError("zero spread: the slippage ratio is undefined")
    for name in ("avg_trade_value_a", "avg_trade_value_b", "T_units", "reference_T"):
        if vals[name] == 0:
            raise ValidationError(f"{name} must be positive")
    va = 3.0 * avg_trade_value_a / reference_T
    vb = 3.0 * avg_trade_value_b / reference_T
    ba, bb = B_a * 1e-4, B_b * 1e-4
    ratio = va * vb * T_units * delta_eta / (6.0 * (va * ba + vb * bb))
    return SlippageAssessment(pair, delta_eta, (B_a, B_b), (va * T_units, vb * T_units), T_units, ratio)
