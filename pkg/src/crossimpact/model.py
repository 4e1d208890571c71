"""Model primitives: decay kernels, impact functions, kernel specs and strategies.

The expected price drift of asset ``i`` under a trading schedule ``x`` is::

    E[S^i_t - S^i_0] = sum_j  int_0^t f^{ij}(xdot^j_s) G^{ij}(t - s) ds

Kernels are dimensionless with ``G(0) = 1`` for bounded families; all units of
impact live in the impact functions.  Trading rates are shares per unit time.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import KernelDomainError, ValidationError
from .quadrature import integrate

ROUND_TRIP_RTOL = 1e-12

# ---------------------------------------------------------------------------
# Decay kernels
# ---------------------------------------------------------------------------


class DecayKernel:
    """Base class.  Subclasses are immutable dataclasses."""

    kind: str = ""
    bounded: bool = True
    analytic: bool = True

    def __call__(self, tau):
        raise NotImplementedError

    def primitive(self, x):
        """``int_0^x G(u) du``."""
        raise NotImplementedError

    def double_primitive(self, x):
        """``int_0^x int_0^u G(w) dw du``."""
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def params(self) -> dict[str, Any]:
        return {}

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": self.params()}


def _check_lag(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise KernelDomainError("kernel lag must be non-negative")
    return tau


@dataclass(frozen=True)
class Permanent(DecayKernel):
    kind = "permanent"

    def __call__(self, tau):
        tau = _check_lag(tau)
        return np.ones_like(tau) if tau.ndim else 1.0

    def primitive(self, x):
        return np.asarray(x, dtype=float) * 1.0

    def double_primitive(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * x * x


# Taylor coefficients of (y - 1 + e^{-y}) / y^2 = sum_k (-1)^k y^k / (k+2)!
_EXP_G2_SERIES = np.array([(-1.0) ** k / math.factorial(k + 2) for k in range(12)])


@dataclass(frozen=True)
class Exponential(DecayKernel):
    rho: float
    kind = "exponential"

    def __post_init__(self):
        if not math.isfinite(self.rho) or self.rho < 0:
            raise ValidationError(f"exponential decay rate must be finite and >= 0, got {self.rho}")

    def __call__(self, tau):
        tau = _check_lag(tau)
        out = np.exp(-self.rho * tau)
        return out if out.ndim else float(out)

    def primitive(self, x):
        x = np.asarray(x, dtype=float)
        if self.rho == 0.0:
            return x * 1.0
        return -np.expm1(-self.rho * x) / self.rho

    def double_primitive(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.atleast_1d(x)
        y = self.rho * xs
        # the closed form cancels catastrophically for small rho * x
        small = np.abs(y) < 0.05
        out = np.empty_like(y)
        out[small] = xs[small] ** 2 * np.polyval(_EXP_G2_SERIES[::-1], y[small])
        big = ~small
        out[big] = (y[big] + np.expm1(-y[big])) / self.rho**2 if np.any(big) else 0.0
        return out.reshape(x.shape)

    def params(self):
        return {"rho": self.rho}


@dataclass(frozen=True)
class PowerLaw(DecayKernel):
    """``G(tau) = tau^{-gamma}``, singular at zero lag."""

    gamma: float
    kind = "powerlaw"
    bounded = False

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValidationError(f"power-law exponent must lie in (0, 1), got {self.gamma}")

    def __call__(self, tau):
        tau = _check_lag(tau)
        if np.any(tau == 0):
            raise KernelDomainError("kernel singular at zero lag")
        out = tau ** (-self.gamma)
        return out if out.ndim else float(out)

    def primitive(self, x):
        x = np.asarray(x, dtype=float)
        return x ** (1.0 - self.gamma) / (1.0 - self.gamma)

    def double_primitive(self, x):
        x = np.asarray(x, dtype=float)
        g = self.gamma
        return x ** (2.0 - g) / ((1.0 - g) * (2.0 - g))

    def params(self):
        return {"gamma": self.gamma}


@dataclass(frozen=True, eq=False)
class Tabulated(DecayKernel):
    """Piecewise-linear kernel through ``(lags, values)``.

    Values are held constant before the first and after the last lag.  The
    single primitive is exact; the double primitive uses adaptive quadrature
    split at the table lags.
    """

    lags: tuple[float, ...]
    values: tuple[float, ...]
    assert_monotone: bool = False
    kind = "tabulated"
    analytic = False

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if lags.ndim != 1 or lags.shape != values.shape or lags.size == 0:
            raise ValidationError("tabulated kernel needs equal-length, non-empty lags and values")
        if not (np.all(np.isfinite(lags)) and np.all(np.isfinite(values))):
            raise ValidationError("tabulated kernel contains non-finite entries")
        if lags[0] < 0 or np.any(np.diff(lags) <= 0):
            raise ValidationError("tabulated kernel lags must be non-negative and strictly increasing")
        object.__setattr__(self, "lags", tuple(lags.tolist()))
        object.__setattr__(self, "values", tuple(values.tolist()))
        if self.assert_monotone and not self.is_non_increasing():
            bad = int(np.argmax(np.diff(values) > 1e-12))
            raise ValidationError(
                f"tabulated kernel is not non-increasing: value rises between lag "
                f"{lags[bad]} and {lags[bad + 1]}"
            )

    def __eq__(self, other):
        return (isinstance(other, Tabulated) and self.lags == other.lags
                and self.values == other.values)

    def __hash__(self):
        return hash((self.lags, self.values))

    def is_non_increasing(self, atol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.values) <= atol))

    def is_strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) < 0))

    def __call__(self, tau):
        tau = _check_lag(tau)
        out = np.interp(tau, self.lags, self.values)
        return out if np.ndim(out) else float(out)

    @property
    def breakpoints(self):
        return self.lags

    def _nodes(self):
        lags = np.asarray(self.lags)
        vals = np.asarray(self.values)
        if lags[0] > 0:
            lags = np.concatenate([[0.0], lags])
            vals = np.concatenate([[vals[0]], vals])
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(lags))])
        return lags, vals, cum

    def primitive(self, x):
        # piecewise-linear G integrates exactly to a piecewise quadratic
        x = _check_lag(x)
        lags, vals, cum = self._nodes()
        k = np.clip(np.searchsorted(lags, x, side="right") - 1, 0, lags.size - 1)
        h = x - lags[k]
        slope = np.zeros_like(vals)
        slope[:-1] = np.diff(vals) / np.diff(lags)
        return cum[k] + vals[k] * h + 0.5 * slope[k] * h * h

    def double_primitive_with_error(self, x: float) -> tuple[float, float]:
        return integrate(self.primitive, 0.0, float(x), breakpoints=self.lags, order=4)

    def double_primitive(self, x):
        x = np.asarray(x, dtype=float)
        g2 = np.vectorize(lambda v: self.double_primitive_with_error(v)[0], otypes=[float])
        return g2(x)

    def params(self):
        return {"lags": list(self.lags), "values": list(self.values),
                "assert_monotone": self.assert_monotone}


def eval_kernel(kernel: DecayKernel, tau):
    """Evaluate ``G(tau)``; power laws refuse ``tau = 0``."""
    return kernel(tau)


# ---------------------------------------------------------------------------
# Instantaneous impact functions
# ---------------------------------------------------------------------------


class ImpactFunction:
    kind: str = ""
    linear: bool = False

    def __call__(self, v):
        raise NotImplementedError

    def params(self) -> dict[str, Any]:
        return {}

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": self.params()}


@dataclass(frozen=True)
class Linear(ImpactFunction):
    eta: float
    kind = "linear"
    linear = True

    def __post_init__(self):
        if not math.isfinite(self.eta):
            raise ValidationError("linear impact coefficient must be finite")

    def __call__(self, v):
        out = self.eta * np.asarray(v, dtype=float)
        return out if out.ndim else float(out)

    def params(self):
        return {"eta": self.eta}


@dataclass(frozen=True)
class PowerLawSign(ImpactFunction):
    """``f(v) = eta * sign(v) * |v|^delta``."""

    eta: float
    delta: float
    kind = "powerlaw_sign"

    def __post_init__(self):
        if not math.isfinite(self.eta) or self.eta < 0:
            raise ValidationError(f"power-law impact needs eta >= 0, got {self.eta}")
        if not (0.0 < self.delta <= 1.0):
            raise ValidationError(f"power-law impact exponent must lie in (0, 1], got {self.delta}")

    @property
    def linear(self):  # type: ignore[override]
        return self.delta == 1.0

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = self.eta * np.sign(v) * np.abs(v) ** self.delta
        return out if out.ndim else float(out)

    def params(self):
        return {"eta": self.eta, "delta": self.delta}


@dataclass(frozen=True, eq=False)
class TabulatedImpact(ImpactFunction):
    """Piecewise-linear impact through ``(volumes, impacts)``.

    A table with only non-negative volumes is extended as an odd function.
    Tables covering negative rates are used as given, so non-odd data is
    representable; ``assert_odd`` turns such data into a validation error.
    """

    volumes: tuple[float, ...]
    impacts: tuple[float, ...]
    assert_odd: bool = False
    kind = "tabulated"

    def __post_init__(self):
        vol = np.asarray(self.volumes, dtype=float)
        imp = np.asarray(self.impacts, dtype=float)
        if vol.ndim != 1 or vol.shape != imp.shape or vol.size == 0:
            raise ValidationError("tabulated impact needs equal-length, non-empty tables")
        if np.any(np.diff(vol) <= 0):
            raise ValidationError("tabulated impact volumes must be strictly increasing")
        object.__setattr__(self, "volumes", tuple(vol.tolist()))
        object.__setattr__(self, "impacts", tuple(imp.tolist()))
        if self.assert_odd:
            probe = np.unique(np.abs(vol))
            resid = self(probe) + self(-probe)
            scale = np.abs(self(probe)) + np.abs(self(-probe)) + 1e-300
            if np.any(np.abs(resid) > 1e-12 * scale) or abs(self(0.0)) > 0:
                raise ValidationError("tabulated impact is not an odd function of the trading rate")

    def __eq__(self, other):
        return (isinstance(other, TabulatedImpact) and self.volumes == other.volumes
                and self.impacts == other.impacts)

    def __hash__(self):
        return hash((self.volumes, self.impacts))

    @property
    def one_sided(self) -> bool:
        return self.volumes[0] >= 0

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.one_sided:
            out = np.sign(v) * np.interp(np.abs(v), self.volumes, self.impacts)
            if self.volumes[0] > 0:
                # below the table: interpolate linearly towards the origin
                lo = np.abs(v) < self.volumes[0]
                out = np.where(lo, v * self.impacts[0] / self.volumes[0], out)
        else:
            out = np.interp(v, self.volumes, self.impacts)
        return out if out.ndim else float(out)

    def params(self):
        return {"volumes": list(self.volumes), "impacts": list(self.impacts),
                "assert_odd": self.assert_odd}


def eval_impact(f: ImpactFunction, v):
    return f(v)


# ---------------------------------------------------------------------------
# (de)serialisation registry
# ---------------------------------------------------------------------------

_KERNELS = {"permanent": Permanent, "exponential": Exponential, "powerlaw": PowerLaw,
            "tabulated": Tabulated}
_IMPACTS = {"linear": Linear, "powerlaw_sign": PowerLawSign, "tabulated": TabulatedImpact}


def _build(registry, doc, what, where):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValidationError(f"{where}: {what} entry needs a 'kind'")
    kind = str(doc["kind"]).lower()
    if kind not in registry:
        raise ValidationError(f"{where}: unknown {what} kind {doc['kind']!r}")
    params = dict(doc.get("params", {}))
    for key in ("lags", "values", "volumes", "impacts"):
        if key in params:
            params[key] = tuple(params[key])
    try:
        return registry[kind](**params)
    except TypeError as exc:
        raise ValidationError(f"{where}: bad parameters for {kind}: {exc}") from None


def kernel_from_dict(doc, where="G") -> DecayKernel:
    return _build(_KERNELS, doc, "kernel", where)


def impact_from_dict(doc, where="f") -> ImpactFunction:
    return _build(_IMPACTS, doc, "impact", where)


# ---------------------------------------------------------------------------
# KernelSpec
# ---------------------------------------------------------------------------


def _as_grid(rows, n, name):
    rows = tuple(tuple(r) for r in rows)
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValidationError(f"{name} must be a {n}x{n} grid")
    return rows


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """``n x n`` grids of decay kernels ``G[i][j]`` and impact functions ``f[i][j]``.

    Entry ``(i, j)`` describes the effect of trading in asset ``j`` on the
    price of asset ``i``.
    """

    n_assets: int
    G: tuple[tuple[DecayKernel, ...], ...]
    f: tuple[tuple[ImpactFunction, ...], ...]
    noise_cov: np.ndarray | None = field(default=None)

    def __post_init__(self):
        n = int(self.n_assets)
        if n < 1:
            raise ValidationError("n_assets must be >= 1")
        object.__setattr__(self, "n_assets", n)
        object.__setattr__(self, "G", _as_grid(self.G, n, "G"))
        object.__setattr__(self, "f", _as_grid(self.f, n, "f"))
        for i in range(n):
            for j in range(n):
                if not isinstance(self.G[i][j], DecayKernel):
                    raise ValidationError(f"G[{i}][{j}] is not a decay kernel")
                if not isinstance(self.f[i][j], ImpactFunction):
                    raise ValidationError(f"f[{i}][{j}] is not an impact function")
        cov = np.zeros((n, n)) if self.noise_cov is None else np.array(self.noise_cov, dtype=float)
        if cov.shape != (n, n) or not np.all(np.isfinite(cov)):
            raise ValidationError("noise_cov must be a finite n x n matrix")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValidationError("noise_cov must be symmetric")
        if n and np.linalg.eigvalsh(cov).min() < -1e-12 * max(1.0, np.abs(cov).max()):
            raise ValidationError("noise_cov must be positive semidefinite")
        cov.setflags(write=False)
        object.__setattr__(self, "noise_cov", cov)

    # -- constructors -------------------------------------------------------

    @classmethod
    def linear(cls, eta, kernels=None, noise_cov=None) -> "KernelSpec":
        """Linear impact ``eta[i][j] v`` with kernels (default: permanent)."""
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        n = eta.shape[0]
        if kernels is None:
            kernels = [[Permanent()] * n for _ in range(n)]
        elif isinstance(kernels, DecayKernel):
            kernels = [[kernels] * n for _ in range(n)]
        f = [[Linear(float(eta[i, j])) for j in range(n)] for i in range(n)]
        return cls(n, kernels, f, noise_cov)

    @classmethod
    def exponential(cls, eta, rho, noise_cov=None) -> "KernelSpec":
        rho = np.atleast_2d(np.asarray(rho, dtype=float))
        n = rho.shape[0]
        kernels = [[Exponential(float(rho[i, j])) for j in range(n)] for i in range(n)]
        return cls.linear(eta, kernels, noise_cov)

    # -- queries -------------------------------------------------------------

    def is_bounded(self) -> bool:
        return all(g.bounded for row in self.G for g in row)

    def is_all_linear(self) -> bool:
        return all(fn.linear for row in self.f for fn in row)

    def eta(self) -> np.ndarray:
        """Matrix of linear coefficients; requires all-linear impact."""
        if not self.is_all_linear():
            raise ValidationError("impact is not linear in every slot")
        return np.array([[fn(1.0) for fn in row] for row in self.f])

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_assets": self.n_assets,
            "G": [[g.to_dict() for g in row] for row in self.G],
            "f": [[fn.to_dict() for fn in row] for row in self.f],
            "noise_cov": self.noise_cov.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "KernelSpec":
        if "n_assets" not in doc:
            raise ValidationError("kernel spec is missing 'n_assets'")
        n = int(doc["n_assets"])
        for key in ("G", "f"):
            if key not in doc:
                raise ValidationError(f"kernel spec is missing '{key}'")
        G = [[kernel_from_dict(doc["G"][i][j], f"G[{i}][{j}]") for j in range(n)]
             for i in range(n)] if len(doc["G"]) == n else doc["G"]
        f = [[impact_from_dict(doc["f"][i][j], f"f[{i}][{j}]") for j in range(n)]
             for i in range(n)] if len(doc["f"]) == n else doc["f"]
        return cls(n, G, f, doc.get("noise_cov"))

    @classmethod
    def load(cls, path) -> "KernelSpec":
        return cls.from_dict(load_config(path))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def load_config(path) -> dict[str, Any]:
    """Read a TOML or JSON document into a dict."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: invalid TOML: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Strategy:
    """Piecewise-constant trading schedule.

    ``times`` holds the ``K + 1`` phase boundaries starting at 0; ``rates`` is
    ``K x N`` (shares per unit time of each asset in each phase).
    """

    times: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        rates = np.array(self.rates, dtype=float)
        if rates.ndim == 1:
            rates = rates[:, None]
        if times.size < 2 or rates.shape[0] != times.size - 1:
            raise ValidationError("a strategy needs K+1 phase boundaries for K phases of rates")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(rates))):
            raise ValidationError("strategy contains non-finite values")
        if times[0] != 0.0:
            raise ValidationError("strategy phases must start at time 0")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("strategy phases must have positive length and be ordered")
        times.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_phases(cls, phases: Sequence[tuple[float, float, Sequence[float]]]) -> "Strategy":
        """Build from ``(start, end, rates)`` tuples; phases must tile ``[0, T]``."""
        if not phases:
            raise ValidationError("a strategy needs at least one phase")
        times = [float(phases[0][0])]
        for k, (start, end, _) in enumerate(phases):
            if not math.isclose(float(start), times[-1], rel_tol=0, abs_tol=1e-12 * max(1.0, abs(end))):
                raise ValidationError(f"phase {k} starts at {start}, expected {times[-1]} (gap or overlap)")
            times.append(float(end))
        rates = [list(np.atleast_1d(np.asarray(r, dtype=float))) for _, _, r in phases]
        return cls(np.array(times), np.array(rates))

    @classmethod
    def in_out(cls, v1, v2, T: float) -> "Strategy":
        """Two phases: rates ``v1`` on ``[0, Theta]`` then ``v2`` on ``[Theta, T]``.

        ``Theta = T / (1 - kappa)`` with ``kappa = v1 / v2`` common to all
        traded assets, so that positions return to zero.
        """
        theta = in_out_turn(v1, v2, T)
        if not np.any(v1):
            # kappa = 0: the unwind phase has zero length and nothing is traded
            return cls(np.array([0.0, T]), np.array([np.atleast_1d(v1)], dtype=float))
        return cls(np.array([0.0, theta, T]), np.array([np.atleast_1d(v1), np.atleast_1d(v2)], dtype=float))

    @classmethod
    def three_phase(cls, va: float, vb: float, T: float, n_assets: int = 2,
                    a: int = 0, b: int = 1) -> "Strategy":
        """Asymmetric three-phase round trip in assets ``a`` and ``b``.

        Asset ``a`` buys at ``va`` during the first third and sells during the
        last third; asset ``b`` sells at ``vb`` during the first third and buys
        back during the second.
        """
        rates = np.zeros((3, n_assets))
        rates[:, a] = [va, 0.0, -va]
        rates[:, b] = [-vb, vb, 0.0]
        return cls(np.array([0.0, T / 3.0, 2.0 * T / 3.0, T]), rates)

    @property
    def n_assets(self) -> int:
        return self.rates.shape[1]

    @property
    def n_phases(self) -> int:
        return self.rates.shape[0]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.times)

    def net_position(self) -> np.ndarray:
        return self.durations @ self.rates

    def is_round_trip(self) -> bool:
        scale = np.abs(self.rates).max() * self.horizon if self.rates.size else 0.0
        return bool(np.all(np.abs(self.net_position()) <= ROUND_TRIP_RTOL * scale))

    def scaled(self, c: float) -> "Strategy":
        return Strategy(self.times, self.rates * c)

    def time_scaled(self, c: float) -> "Strategy":
        """Same shape stretched to horizon ``c * T`` (rates unchanged)."""
        return Strategy(self.times * c, self.rates)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(["phase_start", "phase_end"] + [f"rate_asset_{i}" for i in range(self.n_assets)])
        for k in range(self.n_phases):
            writer.writerow([repr(float(self.times[k])), repr(float(self.times[k + 1]))]
                            + [repr(float(r)) for r in self.rates[k]])

    @classmethod
    def from_csv(cls, path) -> "Strategy":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"strategy file not found: {path}")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValidationError(f"{path}: empty strategy file")
        header = [h.strip() for h in rows[0]]
        if header[:2] != ["phase_start", "phase_end"] or len(header) < 3:
            raise ValidationError(f"{path}: header must be phase_start, phase_end, rate_asset_0..")
        phases = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                vals = [float(x) for x in row]
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric entry") from None
            phases.append((vals[0], vals[1], vals[2:]))
        return cls.from_phases(phases)


def in_out_turn(v1, v2, T: float) -> float:
    """Turnaround time ``Theta = T / (1 - kappa)`` of an in-out strategy.

    ``kappa = v1 / v2 <= 0`` must be common to every traded asset.  A zero
    first phase gives ``kappa = 0`` and ``Theta = T``.
    """
    v1 = np.atleast_1d(np.asarray(v1, dtype=float))
    v2 = np.atleast_1d(np.asarray(v2, dtype=float))
    if v1.shape != v2.shape:
        raise ValidationError("in-out rates must have the same length")
    if np.any((v2 == 0) & (v1 != 0)):
        raise ValidationError("invalid in-out strategy: an asset bought in phase 1 is never unwound")
    active = v2 != 0
    if not np.any(active):
        return float(T)
    kappa = v1[active] / v2[active]
    if np.any(kappa > 0):
        raise ValidationError("invalid in-out strategy: phase rates must have opposite signs")
    if np.ptp(kappa) > 1e-12 * max(np.abs(kappa).max(), 1e-300):
        raise ValidationError("invalid in-out strategy: kappa = v1/v2 differs across assets")
    return float(T / (1.0 - kappa[0]))


# ---------------------------------------------------------------------------
# Expected price path
# ---------------------------------------------------------------------------


def _check_dims(spec: KernelSpec, strat: Strategy) -> None:
    if spec.n_assets != strat.n_assets:
        raise ValidationError(
            f"dimension mismatch: spec has {spec.n_assets} assets, strategy has {strat.n_assets}")


def expected_price_path(spec: KernelSpec, strat: Strategy, grid) -> np.ndarray:
    """Expected price shifts ``E[S^i_t - S^i_0]`` on ``grid``; shape ``(N, len(grid))``."""
    _check_dims(spec, strat)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    T = strat.horizon
    if grid.size and (grid[0] < 0 or grid[-1] > T * (1 + 1e-12)):
        raise ValidationError("grid must lie inside [0, T]")
    if np.any(np.diff(grid) < 0):
        raise ValidationError("grid must be sorted")
    n = spec.n_assets
    starts, ends = strat.times[:-1], strat.times[1:]
    out = np.zeros((n, grid.size))
    for i in range(n):
        for j in range(n):
            drift = spec.f[i][j](strat.rates[:, j])
            if not np.any(drift):
                continue
            kern = spec.G[i][j]
            for k in np.flatnonzero(drift):
                t = grid[grid > starts[k]]
                if t.size == 0:
                    continue
                upper = t - starts[k]
                lower = t - np.minimum(ends[k], t)
                out[i, grid > starts[k]] += drift[k] * (kern.primitive(upper) - kern.primitive(lower))
    return out
