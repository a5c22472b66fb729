"""
OAMSIM - One-Atom Maser Simulator
Quantum trajectories, averaged channel and outcome statistics of a
cavity mode crossed by a stream of two-level atoms
"""

__version__ = "1.0.0"
__description__ = "One-atom maser quantum trajectory simulator"

# Core imports
from .core import MaserCore, PluginManager, PluginInterface, RunConfig, parse_config
from .exceptions import OamsimError, TruncationOverflow
from .params import DimensionlessParams, PhysicalParams

# Version info
VERSION_INFO = {
    "major": 1,
    "minor": 0,
    "patch": 0,
    "release": "stable"
}


def get_version():
    """Get the current version string"""
    return __version__


def get_version_info():
    """Get detailed version information"""
    return VERSION_INFO


# Package-level configuration
DEFAULT_CONFIG = {
    "log_level": "INFO",
    "max_workers": 1,
    "leakage_budget": 1e-9,
    "guard": 4,
}

__all__ = [
    "MaserCore",
    "RunConfig",
    "PluginManager",
    "PluginInterface",
    "parse_config",
    "OamsimError",
    "TruncationOverflow",
    "DimensionlessParams",
    "PhysicalParams",
    "get_version",
    "get_version_info",
    "DEFAULT_CONFIG",
]
