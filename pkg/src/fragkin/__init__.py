"""Monte Carlo solutions of the self-similar fragmentation equation with shattering.

The solution started from ``mu_0`` is represented through the self-similar
Markov process ``X(t) = X(0) exp(-xi_{rho(X(0)**alpha t)})``, where ``xi`` is
the subordinator whose Lévy measure is the image of ``x B(dx)`` under
``x -> -ln x`` and ``rho`` is the Lamperti time change.
"""

__version__ = "0.1.0"

from .catalog import catalog, example_measure, limit_measure
from .initial import InitialMeasure, PowerTail, StretchedExpTail, sample_initial
from .measure import FragmentationMeasure, laplace_exponent, levy_image, rate_functions
from .solution import SimParams, estimate_solution, mass_curve, population_estimate

__all__ = [
    "FragmentationMeasure", "InitialMeasure", "PowerTail", "SimParams", "StretchedExpTail", "catalog",
    "estimate_solution", "example_measure", "laplace_exponent", "levy_image", "limit_measure", "mass_curve",
    "population_estimate", "rate_functions", "sample_initial",
]
