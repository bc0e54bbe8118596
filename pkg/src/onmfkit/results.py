"""Result containers returned by the factorization routines."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RunTrace:
    """Table of per-iteration diagnostics plus run-level flags.

    ``fields`` names the columns; ``rows`` holds one tuple per iteration.
    """

    fields: tuple
    rows: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    seconds: float = 0.0
    flags: list = field(default_factory=list)

    def append(self, *values):
        self.rows.append(tuple(values))

    def column(self, name):
        i = self.fields.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)


@dataclass
class Factorization:
    """``M ~ U @ V`` with ``objective = ||M - U V||_F^2``.

    ``objective_unclamped`` is only set by ONP-MF, where it holds the error
    before the residual negative entries of ``V`` were zeroed.
    """

    U: np.ndarray
    V: np.ndarray
    objective: float
    objective_unclamped: float = None
