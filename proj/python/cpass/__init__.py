"""Center-fed pinching-antenna system simulator.

The heavy lifting lives in the compiled extension; this package simply
re-exports it.
"""

from ._cpass import (
    SystemConfig,
    default_spec_json,
    derive_constants,
    run_sweep,
    solve,
    solve_end_fed,
    solve_random_precoding,
    solve_uniform_pinching,
    verify_state_recompute,
)

__all__ = [
    "SystemConfig",
    "default_spec_json",
    "derive_constants",
    "run_sweep",
    "solve",
    "solve_end_fed",
    "solve_random_precoding",
    "solve_uniform_pinching",
    "verify_state_recompute",
]

__version__ = "0.1.0"
