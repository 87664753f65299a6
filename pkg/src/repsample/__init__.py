"""repsample: draw samples from tabular populations and audit their representativity.

Three measurable concepts drive the toolkit: reflection (the sample mimics the
population distribution), coverage (the sample spans the population's
heterogeneity), and representatives (typical exemplars per subgroup).
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
