"""Second Renyi entropy of free bosons after a quench, via matrix permanents."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .correlations import (
    CDW,
    MI,
    CorrelationMatrix,
    CutSpec,
    InitialState,
    SwapMatrix,
    build_swap_matrix,
    build_z,
    correlation_matrix,
    entropy_density_like,
    g_value,
    volume_law_lower_bound,
    z_block_structure,
)
from .entropy import EntropyPoint, gaussian_renyi, gaussian_trace, renyi2, renyi2_at
from .permanent import permanent
from .single_particle import LatticeSpec, propagator, solve_open_chain
