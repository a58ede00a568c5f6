"""fracorder: recover the fractional time order of a diffusion process
from boundary flux measured at one point.

Subpackages follow the pipeline: special functions, sum-of-exponentials
kernel compression, mesh/FEM assembly, forward time stepping, spectral and
asymptotic reference solutions, least-squares order recovery, and a CLI
that reproduces the bundled experiment presets.
"""

__version__ = "0.1.0"

from .special import gamma_recip, mlf

__all__ = ["mlf", "gamma_recip", "__version__"]
