from dataclasses import dataclass, field

import numpy as np

from .channel import PhaseVector
from .precoding import Precoder


@dataclass
class SolveOutcome:
    """Result of a phase-shift solver.

    ``objective`` is what the algorithm optimises: channel power gain for the
    single-user solvers (maximised) and AP transmit power in watts for the
    multiuser ones (minimised, ``inf`` when infeasible). ``total_power`` is
    the AP power in watts once a precoder is attached.
    """

    theta: PhaseVector
    objective: float
    total_power: float = np.inf
    precoder: Precoder = None
    iterations: int = 0
    objective_trace: list = field(default_factory=list)
    converged: bool = True
    nodes: int = 0
    evaluations: list = field(default_factory=list)   # (levels tuple, power) pairs

    @property
    def feasible(self):
        return np.isfinite(self.total_power)
