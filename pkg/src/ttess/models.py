"""Gibbs energy models.

Every built-in energy is a linear combination of the cached statistics, so the
change of energy under an update is the same combination applied to the
update's statistics delta. ``log_h_ratio`` therefore costs O(1).

Energies are defined up to an additive constant; terms depending only on the
domain are kept as written (e.g. the boundary part of the total edge length in
the ACS energy) and cancel in every ratio the sampler uses.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Mapping, Optional, Sequence

from .tessellation import StatsCache, TTessellation

LOG2 = math.log(2.0)


class EnergyModel(ABC):
    """Unnormalized density ``h = exp(-energy)`` with respect to the CRTT."""

    name = "model"
    strictly_positive = True

    @abstractmethod
    def energy_from_stats(self, s: StatsCache) -> float:
        """Energy as a linear function of the statistics (no constant term)."""

    def energy(self, t: TTessellation) -> float:
        return self.energy_from_stats(t.stats)

    def log_h(self, t: TTessellation) -> float:
        return -self.energy(t)

    def log_h_ratio(self, t: Optional[TTessellation], update, receipt) -> float:
        """``log h(UT) - log h(T)`` from the receipt of applying ``update``."""
        return -self.energy_from_stats(receipt.delta)

    def is_hereditary(self) -> bool:
        return self.strictly_positive

    @property
    def stability_constant(self) -> Optional[float]:
        """K with ``h(T) <= K ** nseint(T)``, or None if unknown."""
        return None

    def params(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def _nonnegative(name: str, value: float) -> float:
    value = float(value)
    if not (value >= 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a non-negative finite number, got {value!r}")
    return value


class CrttModel(EnergyModel):
    """Scaled CRTT: ``h = tau ** nseint``."""

    name = "crtt"

    def __init__(self, tau: float = 1.0):
        self.tau = _positive("tau", tau)
        self._log_tau = math.log(self.tau)

    def energy_from_stats(self, s):
        return -s.nseint * self._log_tau

    @property
    def stability_constant(self):
        return max(self.tau, 1.0)

    def params(self):
        return {"tau": self.tau}


class AcsModel(EnergyModel):
    """Arak-Clifford-Surgailis model: ``(tau/pi) l(T) + nveint log 2 - nseint log tau``."""

    name = "acs"

    def __init__(self, tau: float = 1.0):
        self.tau = _positive("tau", tau)
        self._log_tau = math.log(self.tau)

    def energy_from_stats(self, s):
        return self.tau / math.pi * s.total_edge_length + s.nveint * LOG2 - s.nseint * self._log_tau

    @property
    def stability_constant(self):
        # the length and vertex terms only lower h
        return max(self.tau, 1.0)

    def params(self):
        return {"tau": self.tau}


class AreaModel(EnergyModel):
    """Penalty on the sum of squared cell areas."""

    name = "area"

    def __init__(self, tau: float = 1.0, alpha: float = 0.0):
        self.tau = _positive("tau", tau)
        self.alpha = _nonnegative("alpha", alpha)
        self._log_tau = math.log(self.tau)

    def energy_from_stats(self, s):
        return -s.nseint * self._log_tau + self.alpha * s.sum_sq_cell_area

    @property
    def stability_constant(self):
        return max(self.tau, 1.0)

    def params(self):
        return {"tau": self.tau, "alpha": self.alpha}


class AngleModel(EnergyModel):
    """Reward on the acute angles at T-vertices.

    Energy: ``-nseint log tau - beta * sum_v (phi(v) - phi_ref)``.

    ``include_boundary`` selects the vertex set of the sum: all vertices but
    the domain corners (default) or only vertices off the boundary.
    ``phi_ref`` in ``[0, pi/2]`` shifts each angle. With ``phi_ref = pi/2``
    every vertex pays ``beta`` times its deficit from a right angle; since a
    tessellation has exactly ``2 nseint`` non-corner vertices, this equals the
    unshifted model with ``tau * exp(-beta * pi)``.
    """

    name = "angle"

    def __init__(self, tau: float = 1.0, beta: float = 0.0, include_boundary: bool = True, phi_ref: float = 0.0):
        self.tau = _positive("tau", tau)
        self.beta = _nonnegative("beta", beta)
        self.include_boundary = bool(include_boundary)
        self.phi_ref = float(phi_ref)
        if not 0.0 <= self.phi_ref <= math.pi / 2:
            raise ValueError(f"phi_ref must lie in [0, pi/2], got {phi_ref!r}")
        self._log_tau = math.log(self.tau)

    def energy_from_stats(self, s):
        if self.include_boundary:
            phi = s.sum_phi_internal + s.sum_phi_boundary
            n = 2 * s.nseint
        else:
            phi = s.sum_phi_internal
            n = s.nveint
        return -s.nseint * self._log_tau - self.beta * (phi - self.phi_ref * n)

    @property
    def stability_constant(self):
        # at most two vertices per segment, each contributing at most pi/2 - phi_ref
        return max(self.tau * math.exp(self.beta * (math.pi - 2 * self.phi_ref)), 1.0)

    def params(self):
        return {
            "tau": self.tau,
            "beta": self.beta,
            "include_boundary": self.include_boundary,
            "phi_ref": self.phi_ref,
        }


class CompositeModel(EnergyModel):
    """Weighted sum of component energies."""

    name = "composite"

    def __init__(self, components: Sequence):
        parts = []
        for c in components:
            model, weight = (c, 1.0) if isinstance(c, EnergyModel) else c
            if not isinstance(model, EnergyModel):
                raise TypeError(f"not an energy model: {model!r}")
            weight = float(weight)
            if not math.isfinite(weight):
                raise ValueError("composite weights must be finite")
            parts.append((model, weight))
        if not parts:
            raise ValueError("composite model needs at least one component")
        self.components = parts

    @property
    def strictly_positive(self):
        return all(m.strictly_positive for m, _ in self.components)

    def energy_from_stats(self, s):
        return sum(w * m.energy_from_stats(s) for m, w in self.components)

    @property
    def stability_constant(self):
        k = 1.0
        for m, w in self.components:
            km = m.stability_constant
            if km is None or w < 0:
                return None
            k *= km ** w
        return k

    def params(self):
        return {"components": [(m, w) for m, w in self.components]}


MODELS = {cls.name: cls for cls in (CrttModel, AcsModel, AreaModel, AngleModel)}


def model_from_config(spec: Mapping) -> EnergyModel:
    """Build a model from ``{"name": ..., <params>}``.

    A composite is ``{"name": "composite", "components": [spec, ...]}``, where a
    component spec may carry a ``weight`` entry.
    """
    if not isinstance(spec, Mapping):
        raise ValueError(f"model spec must be a table, got {type(spec).__name__}")
    spec = dict(spec)
    name = spec.pop("name", None)
    if name == "composite":
        comps = spec.pop("components", None)
        if spec:
            raise ValueError(f"unknown composite model fields: {sorted(spec)}")
        if not comps:
            raise ValueError("composite model needs a non-empty 'components' list")
        parts = []
        for i, c in enumerate(comps):
            c = dict(c)
            w = c.pop("weight", 1.0)
            try:
                parts.append((model_from_config(c), w))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"components[{i}]: {exc}") from exc
        return CompositeModel(parts)
    cls = MODELS.get(name)
    if cls is None:
        raise ValueError(f"unknown model name {name!r}; expected one of {sorted(MODELS) + ['composite']}")
    try:
        return cls(**spec)
    except TypeError as exc:
        raise ValueError(f"model {name!r}: {exc}") from exc
