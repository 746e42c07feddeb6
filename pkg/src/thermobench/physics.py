"""Thermodynamic reference quantities and physics-guided loss terms.

The composite objective is::

    total = data + lambda_physics * physics + lambda_energy * energy

``physics`` penalizes the predicted COP against the Carnot COP and the
realistic band (0.3 to 0.8 of Carnot); ``energy`` penalizes the residual of
``heat_output = power_input * cop``. Both reduce by mean over the batch
unless ``reduction="sum"``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BAND_LO = 0.3
BAND_HI = 0.8

PHYSICS_MODES = ("literal", "hinge")


def carnot_cop(t_sink, t_source):
    """Heating Carnot COP ``t_sink / (t_sink - t_source)``, temperatures in kelvin."""
    t_sink = np.asarray(t_sink, dtype=float)
    t_source = np.asarray(t_source, dtype=float)
    if np.any(t_source <= 0):
        raise ValueError("source temperature must be > 0 K")
    if np.any(t_sink <= t_source):
        raise ValueError("t_sink must be greater than t_source")
    out = t_sink / (t_sink - t_source)
    return float(out) if out.ndim == 0 else out


def realistic_band(cop_carnot):
    c = np.asarray(cop_carnot, dtype=float)
    if np.any(c <= 0):
        raise ValueError("Carnot COP must be positive")
    lo, hi = BAND_LO * c, BAND_HI * c
    if c.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


@dataclass(frozen=True)
class PhysicsSignals:
    """Per-sample thermodynamic context for the physics and energy losses."""

    t_sink: np.ndarray
    t_source: np.ndarray
    heat_output: np.ndarray
    power_input: np.ndarray
    cop_carnot: np.ndarray
    cop_lo: np.ndarray
    cop_hi: np.ndarray

    @classmethod
    def build(cls, t_sink, t_source, heat_output, power_input=None, cop=None):
        """Derive Carnot COP and band; ``power_input`` defaults to ``heat / cop``."""
        t_sink = np.atleast_1d(np.asarray(t_sink, dtype=float))
        t_source = np.atleast_1d(np.asarray(t_source, dtype=float))
        heat = np.atleast_1d(np.asarray(heat_output, dtype=float))
        n = max(t_sink.size, t_source.size, heat.size)
        t_sink = np.broadcast_to(t_sink, (n,)).copy()
        t_source = np.broadcast_to(t_source, (n,)).copy()
        heat = np.broadcast_to(heat, (n,)).copy()
        if power_input is None:
            if cop is None:
                raise ValueError("need power_input or cop")
            power = heat / np.broadcast_to(np.asarray(cop, dtype=float), (n,))
        else:
            power = np.broadcast_to(np.asarray(power_input, dtype=float), (n,)).copy()
        carnot = np.atleast_1d(carnot_cop(t_sink, t_source))
        lo, hi = realistic_band(carnot)
        return cls(t_sink, t_source, heat, power, carnot, np.atleast_1d(lo), np.atleast_1d(hi))

    def __post_init__(self):
        n = self.t_sink.shape[0]
        for name in ("t_source", "heat_output", "power_input", "cop_carnot", "cop_lo", "cop_hi"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        if np.any(self.heat_output < 0) or np.any(self.power_input < 0):
            raise ValueError("heat_output and power_input must be >= 0")

    def __len__(self):
        return self.t_sink.shape[0]

    def take(self, idx) -> "PhysicsSignals":
        return PhysicsSignals(*(getattr(self, f)[idx] for f in _FIELDS))

    def scaled(self, factor: float) -> "PhysicsSignals":
        """Rescale heat and power by ``1/factor``; COP quantities are unchanged."""
        return PhysicsSignals(
            self.t_sink, self.t_source, self.heat_output / factor, self.power_input / factor,
            self.cop_carnot, self.cop_lo, self.cop_hi,
        )

    @staticmethod
    def concatenate(parts) -> "PhysicsSignals":
        return PhysicsSignals(*(np.concatenate([getattr(p, f) for p in parts]) for f in _FIELDS))


_FIELDS = ("t_sink", "t_source", "heat_output", "power_input", "cop_carnot", "cop_lo", "cop_hi")


@dataclass(frozen=True)
class LossWeights:
    lambda_physics: float = 0.1
    lambda_energy: float = 0.05

    def __post_init__(self):
        for v in (self.lambda_physics, self.lambda_energy):
            if not np.isfinite(v) or v < 0:
                raise ValueError("loss weights must be finite and >= 0")


@dataclass(frozen=True)
class LossBreakdown:
    data: float
    physics: float
    energy: float
    total: float

    def to_dict(self):
        return {"data": self.data, "physics": self.physics, "energy": self.energy,
                "total": self.total}


def _reduce(terms, reduction):
    if reduction == "mean":
        return float(np.mean(terms))
    if reduction == "sum":
        return float(np.sum(terms))
    raise ValueError(f"unknown reduction {reduction!r}")


def _check_batch(cop_pred, n):
    cop_pred = np.asarray(cop_pred, dtype=float)
    if cop_pred.size == 0:
        raise ValueError("empty batch")
    if cop_pred.shape != (n,):
        raise ValueError(f"cop_pred has shape {cop_pred.shape}, expected ({n},)")
    return cop_pred


def _physics_terms(cop_pred, s: PhysicsSignals, mode):
    if mode == "literal":
        mid = 0.5 * (s.cop_lo + s.cop_hi)
        r1 = cop_pred - s.cop_carnot
        r2 = cop_pred - mid
        return r1**2 + r2**2, 2 * r1 + 2 * r2
    if mode == "hinge":
        over = np.maximum(0.0, cop_pred - s.cop_carnot)
        under = np.maximum(0.0, s.cop_lo - cop_pred)
        above = np.maximum(0.0, cop_pred - s.cop_hi)
        return over**2 + under**2 + above**2, 2 * over - 2 * under + 2 * above
    raise ValueError(f"unknown physics mode {mode!r}")


def physics_loss(cop_pred, signals: PhysicsSignals, mode: str = "literal",
                 reduction: str = "mean") -> float:
    """COP penalty against Carnot and the realistic band.

    ``literal`` penalizes squared distance to the Carnot COP plus squared
    distance to the band midpoint. ``hinge`` penalizes only violations:
    exceeding Carnot, or leaving ``[lo, hi]``.
    """
    cop_pred = _check_batch(cop_pred, len(signals))
    terms, _ = _physics_terms(cop_pred, signals, mode)
    return _reduce(terms, reduction)


def physics_loss_grad(cop_pred, signals: PhysicsSignals, mode: str = "literal",
                      reduction: str = "mean") -> np.ndarray:
    cop_pred = _check_batch(cop_pred, len(signals))
    _, g = _physics_terms(cop_pred, signals, mode)
    return g / cop_pred.size if reduction == "mean" else g


def energy_loss(heat, power, cop_pred, reduction: str = "mean") -> float:
    """Squared residual of ``heat = power * cop_pred``."""
    heat = np.asarray(heat, dtype=float)
    cop_pred = _check_batch(cop_pred, heat.shape[0] if heat.ndim else 1)
    r = heat - np.asarray(power, dtype=float) * cop_pred
    return _reduce(r**2, reduction)


def energy_loss_grad(heat, power, cop_pred, reduction: str = "mean") -> np.ndarray:
    heat = np.asarray(heat, dtype=float)
    power = np.asarray(power, dtype=float)
    cop_pred = _check_batch(cop_pred, heat.shape[0])
    g = -2.0 * (heat - power * cop_pred) * power
    return g / cop_pred.size if reduction == "mean" else g


def total_loss(data: float, physics: float, energy: float,
               w: LossWeights = LossWeights()) -> LossBreakdown:
    for v in (data, physics, energy):
        if not np.isfinite(v):
            raise ValueError("loss components must be finite")
    total = data + w.lambda_physics * physics + w.lambda_energy * energy
    return LossBreakdown(float(data), float(physics), float(energy), float(total))
