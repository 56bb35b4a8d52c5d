"""Transform-based solvers for heat and resolvent problems with Robin
boundary conditions on planar wedges, with numerical checks of the
associated weighted estimates."""

__version__ = "0.1.0"
