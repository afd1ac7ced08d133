"""Ohmic bath with exponential cutoff, discretized on a uniform frequency grid."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class BathSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    form: Literal["ohmic-exponential"] = "ohmic-exponential"
    eta: float = Field(0.1, ge=0)
    cutoff: float = Field(1.0, gt=0)
    modes: int = Field(0, ge=0)
    omega_max: float = Field(3.0, gt=0)
    mode_mass: float = Field(1.0, gt=0)

    def spectral_density(self, w):
        return self.eta * w * np.exp(-np.asarray(w) / self.cutoff)


@dataclass(frozen=True)
class ModeSet:
    frequencies: np.ndarray
    couplings: np.ndarray
    masses: np.ndarray

    def __len__(self):
        return len(self.frequencies)

    def reorganization_energy(self) -> float:
        """sum_j c_j^2 / (2 m_j w_j^2)"""
        if not len(self):
            return 0.0
        return float(np.sum(self.couplings ** 2 / (2 * self.masses * self.frequencies ** 2)))


def discretize_bath(spec: BathSpec) -> ModeSet:
    n = spec.modes
    if n == 0:
        empty = np.zeros(0)
        return ModeSet(empty, empty, empty)
    dw = spec.omega_max / n
    w = dw * np.arange(1, n + 1)
    m = np.full(n, spec.mode_mass)
    c = np.sqrt((2 / np.pi) * m * w * spec.spectral_density(w) * dw)
    return ModeSet(w, c, m)
