"""Exception types shared across the package."""

from __future__ import annotations


class BlowUpError(RuntimeError):
    """An integration produced non-finite or absurdly large values.

    The hard on-site potential makes the true flow global, so a blow-up
    always indicates numerical failure (e.g. a too-large step).  The last
    time at which the state was still sane is carried along.
    """

    def __init__(self, message: str, last_good_time: float):
        super().__init__(f"{message} (last good time t={last_good_time:g})")
        self.last_good_time = last_good_time


class RegimeError(ValueError):
    """Requested parameters lie outside the asymptotic regime of a
    justification experiment (e.g. rho outside (eps^2, eps] for the
    standard envelope reduction)."""


class ThresholdError(ValueError):
    """The coupling is too large for the normal-form construction: the
    smallness function f(eps) dropped to or below 1."""


class NewtonSingularError(RuntimeError):
    """Newton's method hit a numerically singular Jacobian (degenerate
    solution branch)."""


class NewtonDivergenceError(RuntimeError):
    """Newton's method failed to converge within the iteration budget."""

    def __init__(self, message: str, last_iterate, defect: float):
        super().__init__(f"{message} (final defect {defect:.3e})")
        self.last_iterate = last_iterate
        self.defect = defect
