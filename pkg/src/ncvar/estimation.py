"""Monte Carlo check of the displacement Cramer-Rao bound with homodyne detection.

The signal ``exp(-i theta X_mu)`` moves the mean of a Gaussian state from
``d`` to ``d + theta Omega mu``. Homodyne detection of the quadrature
``m^T R`` returns normal samples with mean ``m.d + theta m.(Omega mu)`` and
variance ``m^T V m / 2``. The default measured direction is the conjugate
``-Omega mu``, for which the mean is ``m.d - theta``.

Randomness comes from a counter-based Philox generator keyed by the seed;
trial ``k`` uses its own counter block, so trials are independent streams
and any single trial can be regenerated in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import GaussianState, gaussian_qfi_matrix, omega


@dataclass(frozen=True)
class HomodyneExperiment:
    state: GaussianState
    mu: np.ndarray
    theta: float = 0.3
    shots: int = 100_000
    trials: int = 200
    seed: int = 0
    measured: np.ndarray | None = None

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.size != 2 * self.state.num_modes or abs(np.linalg.norm(mu) - 1) > 1e-12:
            raise ValueError("mu must be a unit vector of length 2N")
        if self.shots < 100 or self.trials < 10:
            raise ValueError("need at least 100 shots and 10 trials")
        object.__setattr__(self, "mu", mu)
        if self.measured is not None:
            m = np.asarray(self.measured, dtype=float)
            if abs(np.linalg.norm(m) - 1) > 1e-12:
                raise ValueError("measured direction must be unit-norm")
            object.__setattr__(self, "measured", m)

    def measured_direction(self) -> np.ndarray:
        if self.measured is not None:
            return self.measured
        return -omega(self.state.num_modes) @ self.mu


@dataclass
class CrbResult:
    var_hat: float
    var_expected: float
    qfi: float
    homodyne_fi: float
    ratio: float
    mean_estimate: float
    bias_z: float
    theta: float
    shots: int
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Independent substream for one trial: Philox keyed by seed, counter offset by trial."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, trial, 0, 0]))


def simulate_and_estimate(exp: HomodyneExperiment) -> CrbResult:
    g = exp.state
    m = exp.measured_direction()
    slope = float(m @ (omega(g.num_modes) @ exp.mu))
    if abs(slope) < 1e-12:
        raise ValueError("measured quadrature is insensitive to the signal")
    var1 = float(m @ g.cov @ m) / 2
    if var1 <= 0:
        raise ValueError("degenerate measured variance")
    offset = float(m @ g.mean)
    center = offset + exp.theta * slope
    sd = np.sqrt(var1)
    estimates = np.empty(exp.trials)
    for k in range(exp.trials):
        samples = trial_generator(exp.seed, k).normal(center, sd, exp.shots)
        estimates[k] = (samples.mean() - offset) / slope
    var_hat = float(estimates.var(ddof=1))
    qfi = gaussian_qfi_matrix(g.cov).quadratic(exp.mu)
    var_expected = var1 / (slope**2 * exp.shots)
    mean_est = float(estimates.mean())
    return CrbResult(
        var_hat=var_hat,
        var_expected=var_expected,
        qfi=qfi,
        homodyne_fi=slope**2 / var1,
        ratio=var_hat * exp.shots * qfi,
        mean_estimate=mean_est,
        bias_z=(mean_est - exp.theta) / np.sqrt(var_hat / exp.trials),
        theta=exp.theta,
        shots=exp.shots,
        trials=exp.trials,
        seed=exp.seed,
    )
