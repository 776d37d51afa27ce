"""Exact and Monte Carlo tools for a heavy-tailed lattice random walk.

Steps take length ``n`` with probability ``c1 |n|^-3`` along a random
lattice axis. The modules are

* :mod:`htrw.step_law` -- step law, sampler, characteristic function;
* :mod:`htrw.exact_dist` -- exact laws of the walk at fixed times;
* :mod:`htrw.renewal` -- return-time tails and avoidance probabilities;
* :mod:`htrw.montecarlo` -- parallel seeded simulation;
* :mod:`htrw.asymptotics` -- limit constants and trend statistics;
* :mod:`htrw.cli` -- the ``htrw`` command.
"""
import warnings

# old system TBB: numba falls back to OpenMP or workqueue anyway
warnings.filterwarnings("ignore", message="The TBB threading layer requires")

from .errors import HTRWError, OutOfRangeError, ToleranceError  # noqa: E402
from .step_law import C1, StepLaw1D, StepLaw2D, char_fn, char_fn_2d  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "C1",
    "HTRWError",
    "OutOfRangeError",
    "StepLaw1D",
    "StepLaw2D",
    "ToleranceError",
    "char_fn",
    "char_fn_2d",
    "__version__",
]
