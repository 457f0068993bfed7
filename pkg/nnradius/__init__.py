"""
nnradius: Nearest-neighbor radii under dependent sampling

This package simulates k-nearest-neighbor radii of samples drawn from
dependent, uniform-marginal processes and checks them against their
theoretical tail and moment bounds. It also carries two applications of the
radii: a Kozachenko-Leonenko entropy estimate of a low-dimensional signal
seen through a higher-dimensional embedding, and a windowed k-NN forecaster.

Radii are computed by :py:mod:`nnradius.geometry`:

.. code-block:: python

   from nnradius import Family, SequenceSpec, Strength, generate, knn_radius

   row = generate(SequenceSpec(Family.LSS, 5000, strength=Strength.STRONG))
   print(knn_radius(row.data, [0.5], k=50))

The experiments are most easily run from the command line; see
:py:mod:`nnradius.__main__`.
"""

from .version import __version__        # noqa:F401
from .version import __author__         # noqa:F401
from .version import __copyright__      # noqa:F401
from .version import __license__        # noqa:F401

from .errors import NnRadiusError                       # noqa:F401
from .geometry import Metric, PointSet                  # noqa:F401
from .geometry import counting_process, knn_radius      # noqa:F401
from .generators import Family, Strength, SequenceSpec  # noqa:F401
from .generators import generate                        # noqa:F401
from .estimators import kl_entropy, slope_fit           # noqa:F401
from .streams import GLOBAL_SEED                        # noqa:F401
