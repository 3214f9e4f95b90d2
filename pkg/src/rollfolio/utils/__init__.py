from rollfolio.utils.validation import (
    check_panel,
    check_price_panel,
    check_series,
    check_weights,
    simplex_violation,
)

__all__ = [
    "check_panel",
    "check_price_panel",
    "check_series",
    "check_weights",
    "simplex_violation",
]
