"""Convergence, reference and stability studies plus their CLI."""
from .studies import (
    ConvergenceTable, StabilityFailure, StabilityTable, StudyConfig, converge_mms,
    converge_reference, fit_order, run_single, stability_table,
)
from .io import export_csv, export_field, export_field_csv, read_table_csv

__all__ = [
    "ConvergenceTable", "StabilityFailure", "StabilityTable", "StudyConfig", "converge_mms",
    "converge_reference", "fit_order", "run_single", "stability_table", "export_csv",
    "export_field", "export_field_csv", "read_table_csv",
]
