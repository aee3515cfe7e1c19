"""Spectral analysis of weakly deformed soft quantum waveguides.

Submodules:
  well1d      closed-form 1-D square-well spectra and eigenfunctions
  profiles    compactly supported deformation profiles and their moments
  asymptotics eigenvalue/eigenfunction expansions, hard-wall comparison,
              critical-case variational machinery
  bs_core     Birman-Schwinger kernels, discrete BS matrix, secular solves
  fd_oracle   finite-difference oracle (1-D and 2-D) with sparse eigensolves
  harness     config-driven sweeps, fitting, CSV/JSON/SVG output
  cli         the `softguide` command-line entry point
"""

__version__ = "0.1.0"

from .well1d import WellParams, solve_well  # noqa: F401
from .profiles import make_profile  # noqa: F401
