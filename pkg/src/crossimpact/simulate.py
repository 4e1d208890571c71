"""Synthetic order flow and mid prices from a planted discrete propagator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ValidationError
from .tape import MarketTape

SESSION_MS = 7 * 3_600_000
SESSION_OPEN_MS = 10 * 3_600_000
X0 = float(np.log(100.0))


def _vec(x, n, name):
    arr = np.broadcast_to(np.asarray(x, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    return arr


@dataclass
class SimConfig:
    """Simulation settings.

    ``H_true[l]`` is the planted cumulative kernel at lag ``l + 1`` (so
    ``H_true[0] = H(1)``), shape ``(p_true, N, N)``; beyond ``p_true`` the
    kernel stays at ``H(p_true)``.  Signs come from a thresholded Gaussian AR(1)
    whose latent correlations are chosen so that the *sign* autocorrelation at
    lag one equals ``sign_persistence`` and the simultaneous sign correlation
    equals ``cross_sign_corr``.  ``trade_intensity`` gives the relative
    frequency of each asset; on a step carrying several trades each asset
    joins independently with that probability.
    """

    n_assets: int
    H_true: np.ndarray
    n_steps: int
    seed: int = 0
    sign_persistence: np.ndarray | float = 0.0
    cross_sign_corr: np.ndarray | None = None
    trade_intensity: np.ndarray | float = 0.5
    simultaneity_prob: float = 0.0
    noise_vol: np.ndarray | float = 0.0
    volume_median: np.ndarray | float = 1e6
    volume_sigma: np.ndarray | float = 0.5
    impact_volume_exponent: float = 0.0
    spread_bp: np.ndarray | float = 5.0
    steps_per_day: int = 5000
    start_date: str = "2015-01-05"
    asset_ids: tuple[str, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        N = int(self.n_assets)
        if N < 1:
            raise ValidationError("n_assets must be at least 1")
        self.n_assets = N
        H = np.asarray(self.H_true, dtype=float)
        if H.ndim == 1 and N == 1:
            H = H[:, None, None]
        if H.ndim != 3 or H.shape[1:] != (N, N) or H.shape[0] < 1:
            raise ValidationError(f"H_true must have shape (p_true, {N}, {N}), got {H.shape}")
        if not np.all(np.isfinite(H)):
            raise ValidationError("H_true must be finite")
        self.H_true = H
        self.n_steps = int(self.n_steps)
        if self.n_steps < 1:
            raise ValidationError("n_steps must be positive")
        if self.p_true >= self.n_steps:
            raise ValidationError(f"p_true={self.p_true} must be smaller than n_steps={self.n_steps}")
        self.sign_persistence = _vec(self.sign_persistence, N, "sign_persistence")
        if np.any(self.sign_persistence < 0) or np.any(self.sign_persistence >= 1):
            raise ValidationError("sign_persistence must lie in [0, 1)")
        C = np.eye(N) if self.cross_sign_corr is None else np.asarray(self.cross_sign_corr, dtype=float)
        if C.shape != (N, N) or not np.allclose(C, C.T, atol=1e-12) or not np.allclose(np.diag(C), 1.0):
            raise ValidationError("cross_sign_corr must be a symmetric matrix with unit diagonal")
        if np.any(np.abs(C) > 1) or np.linalg.eigvalsh(C).min() < -1e-12:
            raise ValidationError("cross_sign_corr is not a valid correlation matrix")
        self.cross_sign_corr = C
        self.trade_intensity = _vec(self.trade_intensity, N, "trade_intensity")
        if np.any(self.trade_intensity <= 0) or np.any(self.trade_intensity > 1):
            raise ValidationError("trade_intensity entries must lie in (0, 1]")
        s = float(self.simultaneity_prob)
        if not 0 <= s <= 1:
            raise ValidationError("simultaneity_prob must lie in [0, 1]")
        if s > 0 and N < 2:
            raise ValidationError("simultaneity_prob > 0 needs at least two assets")
        self.simultaneity_prob = s
        self.noise_vol = _vec(self.noise_vol, N, "noise_vol")
        self.volume_median = _vec(self.volume_median, N, "volume_median")
        self.volume_sigma = _vec(self.volume_sigma, N, "volume_sigma")
        self.spread_bp = _vec(self.spread_bp, N, "spread_bp")
        if np.any(self.noise_vol < 0) or np.any(self.volume_sigma < 0) or np.any(self.spread_bp < 0):
            raise ValidationError("noise_vol, volume_sigma and spread_bp must be non-negative")
        if np.any(self.volume_median <= 0):
            raise ValidationError("volume_median must be positive")
        self.steps_per_day = int(self.steps_per_day)
        if not 1 <= self.steps_per_day <= SESSION_MS // 2:
            raise ValidationError("steps_per_day must lie in [1, 12600000]")
        if self.asset_ids is None:
            self.asset_ids = tuple(f"A{i}" for i in range(N))
        self.asset_ids = tuple(str(a) for a in self.asset_ids)
        if len(self.asset_ids) != N or len(set(self.asset_ids)) != N:
            raise ValidationError("asset_ids must be N distinct labels")
        self._latent_corr()

    @property
    def p_true(self) -> int:
        return int(self.H_true.shape[0])

    def increments(self) -> np.ndarray:
        """calH(l) = H(l+1) - H(l) for l = 0..p_true-1 (H(0) = 0)."""
        return np.diff(self.H_true, axis=0, prepend=np.zeros((1,) + self.H_true.shape[1:]))

    def _latent_corr(self):
        phi = np.sin(0.5 * np.pi * self.sign_persistence)
        r = np.sin(0.5 * np.pi * self.cross_sign_corr)
        # innovation correlation giving stationary latent correlation r
        scale = np.sqrt(np.outer(1 - phi**2, 1 - phi**2))
        innov = r * (1 - np.outer(phi, phi)) / scale
        np.fill_diagonal(innov, 1.0)
        if np.linalg.eigvalsh(innov).min() < -1e-12:
            raise ValidationError("cross_sign_corr is not attainable with these sign persistences")
        return phi, innov

    # -- config documents ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n_assets": self.n_assets, "H_true": self.H_true.tolist(), "n_steps": self.n_steps,
            "seed": int(self.seed), "sign_persistence": self.sign_persistence.tolist(),
            "cross_sign_corr": self.cross_sign_corr.tolist(),
            "trade_intensity": self.trade_intensity.tolist(),
            "simultaneity_prob": self.simultaneity_prob, "noise_vol": self.noise_vol.tolist(),
            "volume_median": self.volume_median.tolist(), "volume_sigma": self.volume_sigma.tolist(),
            "impact_volume_exponent": float(self.impact_volume_exponent),
            "spread_bp": self.spread_bp.tolist(), "steps_per_day": self.steps_per_day,
            "start_date": self.start_date, "asset_ids": list(self.asset_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "kernel" in d:
            d["H_true"] = planted_kernel(int(d["n_assets"]), **d.pop("kernel"))
        if "asset_ids" in d and d["asset_ids"] is not None:
            d["asset_ids"] = tuple(d["asset_ids"])
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown SimConfig field(s): {', '.join(sorted(extra))}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SimConfig":
        from .model import load_config
        return cls.from_dict(load_config(path))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def planted_kernel(n_assets: int, p_true: int, self_amp: float, cross_amp: float = 0.0,
                   peak_lag: float = 0.0, decay_lag: float | None = None, floor: float = 1.0,
                   asymmetry: float = 0.0) -> np.ndarray:
    """Cumulative kernel shape used by the bundled configs.

    ``H(l)/amp`` rises from ``1`` at lag one to a peak of ``1 + bump`` near
    ``peak_lag`` (bump omitted when ``peak_lag = 0``) and relaxes back to
    ``floor`` with time scale ``decay_lag``.  Cross entries use
    ``cross_amp``; ``asymmetry`` is added to entry (0, 1) only.
    """
    lags = np.arange(1, p_true + 1, dtype=float)
    shape = np.ones_like(lags)
    if peak_lag > 0:
        bump = (lags - 1) / peak_lag * np.exp(1 - (lags - 1) / peak_lag)
        shape = shape + bump
    if decay_lag is not None:
        shape = floor + (shape - floor) * np.exp(-np.maximum(lags - 1 - 2 * peak_lag, 0) / decay_lag)
    amp = np.full((n_assets, n_assets), float(cross_amp))
    np.fill_diagonal(amp, float(self_amp))
    H = shape[:, None, None] * amp[None]
    if asymmetry and n_assets > 1:
        H[:, 0, 1] += asymmetry * shape
    return H


def _active_sets(rng, cfg: SimConfig, n_steps: int) -> np.ndarray:
    N = cfg.n_assets
    w = cfg.trade_intensity / cfg.trade_intensity.sum()
    active = np.zeros((n_steps, N), dtype=bool)
    multi = rng.random(n_steps) < cfg.simultaneity_prob
    single = np.flatnonzero(~multi)
    active[single, rng.choice(N, size=single.size, p=w)] = True
    todo = np.flatnonzero(multi)
    if todo.size and np.count_nonzero(cfg.trade_intensity) < 2:
        raise ValidationError("simultaneous steps need two assets with positive intensity")
    while todo.size:
        draw = rng.random((todo.size, N)) < cfg.trade_intensity
        ok = draw.sum(axis=1) >= 2
        active[todo[ok]] = draw[ok]
        todo = todo[~ok]
    return active


def _timestamps(cfg: SimConfig, n_steps: int):
    spd = cfg.steps_per_day
    day = np.arange(n_steps) // spd
    k = np.arange(n_steps) % spd
    start = np.datetime64(cfg.start_date, "D")
    dates = np.busday_offset(start, np.arange(day[-1] + 1), roll="forward")
    day_ms = dates.astype("datetime64[ms]").astype(np.int64)
    ts = day_ms[day] + SESSION_OPEN_MS + (k * SESSION_MS) // spd
    day_starts = np.arange(0, n_steps, spd, dtype=np.int64)
    return ts.astype(np.int64), day_starts


def simulate(cfg: SimConfig) -> MarketTape:
    """Generate a tape; identical configs give bit-identical tapes."""
    N, T = cfg.n_assets, cfg.n_steps
    rng = np.random.default_rng(cfg.seed)
    phi, innov_corr = cfg._latent_corr()
    w, V = np.linalg.eigh(innov_corr)
    root = V * np.sqrt(np.clip(w, 0, None))
    e = rng.standard_normal((T, N)) @ root.T
    e[1:] *= np.sqrt(1 - phi**2)
    z = _kernels.ar1_filter(e, phi)
    eps = np.where(z >= 0, 1, -1).astype(np.int8)

    active = _active_sets(rng, cfg, T)
    signs = np.where(active, eps, 0).astype(np.int8)
    vols = cfg.volume_median * np.exp(cfg.volume_sigma * rng.standard_normal((T, N)))
    vols = np.where(active, vols, 0.0)
    noise = rng.standard_normal((T, N)) * cfg.noise_vol

    ts, day_starts = _timestamps(cfg, T)
    a = signs.astype(float)
    if cfg.impact_volume_exponent:
        a = a * np.where(active, vols / cfg.volume_median, 0.0) ** cfg.impact_volume_exponent
    r = _kernels.propagate(a, cfg.increments(), day_starts) + noise
    mid = X0 + np.concatenate([np.zeros((1, N)), np.cumsum(r[:-1], axis=0)])
    half = 0.5 * cfg.spread_bp * 1e-4
    prices = np.where(active, np.exp(mid) * (1 + signs * half), np.nan)
    meta = {"source": "simulate", "seed": int(cfg.seed)}
    return MarketTape(cfg.asset_ids, ts, signs, vols, prices, mid, day_starts, cfg.spread_bp, None,
                      "steps", meta)
