"""Observable series and CSV output."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .integrators import ConstrainedSystem, Trajectory

OBSERVABLE_COLUMNS = ["t", "phi", "chi", "H_S", "H_E", "H_tot", "absx", "Q", "xdotp"]


@dataclass
class Observables:
    t: np.ndarray
    phi: np.ndarray
    chi: np.ndarray
    H_S: np.ndarray
    H_E: np.ndarray
    H_tot: np.ndarray
    absx: np.ndarray
    Q: np.ndarray
    xdotp: np.ndarray
    collective: np.ndarray  # P^2/2M + M Omega^2 Q^2/2, the part of H_E without the bath

    def columns(self):
        return [getattr(self, name) for name in OBSERVABLE_COLUMNS]

    def relative_energy_drift(self) -> float:
        h0 = self.H_tot[0]
        return float(np.max(np.abs(self.H_tot - h0)) / max(abs(h0), 1e-300))


def measure(traj: Trajectory, system: ConstrainedSystem) -> Observables:
    S = traj.states
    d = system.d
    hs, collective, bath = system.energies(S)
    phi, chi = system.phi_chi(S)
    x, p = S[:, :d], S[:, d:2 * d]
    he = collective + bath
    return Observables(traj.times, phi, chi, hs, he, hs + he, np.sqrt(np.sum(x * x, axis=1)),
                       S[:, 2 * d], np.sum(x * p, axis=1), collective)


def q_autocorrelation(trajs: Sequence[Trajectory], system: ConstrainedSystem) -> np.ndarray:
    """Ensemble average of ``Q(t) Q(0)`` over the supplied trajectories."""
    col = 2 * system.d
    stack = np.stack([tr.states[:, col] * tr.states[0, col] for tr in trajs])
    return stack.mean(axis=0)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_trajectory_csv(path, traj: Trajectory):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + traj.header)
        for t, row in zip(traj.times, traj.states):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def write_observables_csv(path, obs: Observables):
    path = Path(path)
    cols = obs.columns()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OBSERVABLE_COLUMNS)
        for k in range(len(obs.t)):
            w.writerow([_fmt(c[k]) for c in cols])


def read_trajectory_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
