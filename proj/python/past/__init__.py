"""Python access to the spatio-temporal graph store.

The heavy lifting lives in the compiled ``_past`` extension; this package
re-exports it and adds a thin ``cli`` helper.
"""

from ._past import (
    DomainError,
    FormatError,
    LookupError,
    Store,
    StoreError,
    b_range,
    candidate_time_ranges,
    estimate,
    run_cli,
    select_plan,
    sf_lower_bound,
    slot_of,
    z_encode,
)

__all__ = [
    "DomainError",
    "FormatError",
    "LookupError",
    "Store",
    "StoreError",
    "b_range",
    "candidate_time_ranges",
    "cli",
    "estimate",
    "run_cli",
    "select_plan",
    "sf_lower_bound",
    "slot_of",
    "z_encode",
]


def cli(*args: str) -> str:
    """Run a CLI command and return its stdout; raises RuntimeError on a nonzero exit."""
    code, out, err = run_cli([str(a) for a in args])
    if code != 0:
        raise RuntimeError(f"past {' '.join(map(str, args))} exited {code}: {err.strip()}")
    return out
