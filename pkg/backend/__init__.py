"""
Nonconventional limit theorem toolkit backend package
"""

import logging
import os

import config

__version__ = "0.1.0"

# Import main components for easier access
from .chain_core import FiniteChain, mixing_profile, validate_chain
from .observable_decomp import build_observable, center, decompose
from .lattice_classify import LatticeKind, classify
from .sim_oracle import NonconvInstance, build_instance
from .run_manager import RunManager
from .settings_manager import SettingsManager
from .logger_setup import setup_logging


def init_package(level: str = None):
    """Set up logging and the results directory for command-line use. Library callers configure their own."""
    setup_logging(level)
    os.makedirs(config.RESULTS_DIR, exist_ok=True)
    logging.getLogger(__name__).debug(f"nllt backend {__version__} initialized")


# Export public API
__all__ = [
    'FiniteChain',
    'validate_chain',
    'mixing_profile',
    'build_observable',
    'center',
    'decompose',
    'LatticeKind',
    'classify',
    'NonconvInstance',
    'build_instance',
    'RunManager',
    'SettingsManager',
    'setup_logging',
    'init_package',
]
