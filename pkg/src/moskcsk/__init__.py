"""Error rate analysis of hybrid MoSK-CSK molecular communication links.

Closed-form diffusion channel, Poisson/mixed-Poisson symbol error analysis
for a tagged receiver in a 3-D Poisson field of interferers, and Monte Carlo
plus particle-based simulators to check it.
"""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    DesiredMode,
    ErrorReport,
    FieldConfig,
    NumericalConvergenceError,
    laplace_functional,
    miss_probability,
    p_integral,
    ser_multi,
    ser_single_pair,
    symbol_error,
)
from .arrivals import LinkConfig, decompose, mean_arrival  # noqa: E402
from .bell import complete_bell, incomplete_bell, scaled_bell_series  # noqa: E402
from .channel import (  # noqa: E402
    ChannelDomainError,
    ChannelParams,
    SlotGrid,
    absorbed_fraction,
    absorbed_fraction_nodeg,
    cir,
    cir_vector,
    hitting_rate,
)
from .modulation import ModulationScheme, SymbolHistory, bcsk, bit_rate, decode, emission_count, ook, qcsk  # noqa: E402
