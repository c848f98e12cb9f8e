"""Parameter control: jDE self-adaptation of F and Cr, plus a fixed mode.

jDE regenerates each member's scaling factor with probability tau1
(fresh value f_l + u * f_u) and its crossover rate with probability tau2
(fresh uniform in [0, 1]); proposals only survive when the trial they
produced survives. Note the regeneration formula puts F in
[f_l, f_l + f_u] = [0.1, 1.0] under the defaults; the often-quoted
F in [0.1, 0.9] describes the same rule loosely, and the formula wins here.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ConfigurationError, Individual, RngStream

__all__ = ["Fixed", "JdeConfig", "commit_or_revert", "propose_cr", "propose_f"]


@dataclass(frozen=True)
class JdeConfig:
    tau1: float = 0.1
    tau2: float = 0.1
    f_l: float = 0.1
    f_u: float = 0.9

    def __post_init__(self):
        if not (0.0 <= self.tau1 <= 1.0 and 0.0 <= self.tau2 <= 1.0):
            raise ConfigurationError("tau1 and tau2 must be probabilities")
        if self.f_l <= 0 or self.f_u <= 0:
            raise ConfigurationError("f_l and f_u must be positive")


@dataclass(frozen=True)
class Fixed:
    """Constant parameters, used by the preprocess sweep."""

    f: float = 0.5
    cr: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.f <= 2.0:
            raise ConfigurationError("fixed F must be in (0, 2]")
        if not 0.0 <= self.cr <= 1.0:
            raise ConfigurationError("fixed Cr must be in [0, 1]")


# a run's control mode is either Fixed or a JdeConfig
ControlMode = Fixed | JdeConfig


def propose_f(current_f: float, cfg: JdeConfig, rng: RngStream) -> float:
    """With probability tau1 a fresh f_l + u*f_u, otherwise current_f."""
    if rng.uniform() < cfg.tau1:
        return cfg.f_l + rng.uniform() * cfg.f_u
    return current_f


def propose_cr(current_cr: float, cfg: JdeConfig, rng: RngStream) -> float:
    """With probability tau2 a fresh uniform in [0, 1), otherwise current_cr."""
    if rng.uniform() < cfg.tau2:
        return rng.uniform()
    return current_cr


def commit_or_revert(
    ind: Individual,
    proposed_f: dict[str, float],
    proposed_cr: float,
    trial_accepted: bool,
    winning_strategy: str | None,
) -> Individual:
    """Apply jDE survival to a member after selection.

    When the trial entered the population, the member keeps the proposed F
    of the strategy that produced it and the proposed (shared) Cr; F
    proposals of the losing strategies are discarded. A rejected trial
    discards everything.
    """
    if trial_accepted:
        if winning_strategy is not None:
            ind.f_per_strategy[winning_strategy] = proposed_f[winning_strategy]
        ind.cr = proposed_cr
    return ind
