"""Post-hoc figures from gthermo result artifacts (CSV/JSON only; the
simulator is never invoked)."""

__version__ = "0.1.0"

from .tables import ResultTable, SchemaError
from .figures import plot_dichotomy, plot_sweep, plot_convergence, load_history

__all__ = ["ResultTable", "SchemaError", "plot_dichotomy", "plot_sweep",
           "plot_convergence", "load_history", "__version__"]
