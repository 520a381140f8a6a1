"""Common imports for the igd-sync simulator.

This module consolidates all imports used across the project.
Use 'from common import *' to import all commonly used modules.
"""

# Standard library imports
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

# Third-party imports - numpy
import numpy as np
from numpy.typing import NDArray

# Type hints
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Protocol,
    Sequence,
    Tuple,
)

# Array aliases shared by every module
Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]

# Local module imports - these will be available but may cause circular imports
# if used directly in common.py. Import them in the specific files that need them.
# from objective import Problem
# from network import Topology
# from algo import RunTrace

__all__ = [
    # Standard library
    'csv',
    'json',
    'logging',
    'math',
    'sys',
    'dataclass',
    'field',
    'replace',
    'Enum',
    'Path',
    # numpy
    'np',
    'NDArray',
    # Typing
    'Any',
    'Callable',
    'Dict',
    'Iterable',
    'Iterator',
    'List',
    'Mapping',
    'Optional',
    'Protocol',
    'Sequence',
    'Tuple',
    # Aliases
    'Vector',
    'Matrix',
]
