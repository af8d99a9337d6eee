"""Selects the compiled program runner when available.

Set ``SFQMAP_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

from ._simcore_py import (OP_AND, OP_CONST0, OP_COPY, OP_MAJ, OP_NOT, OP_OR,
                          OP_T1, OP_XOR)
from ._simcore_py import run_program as run_program_py

BACKEND = "python"
run_program = run_program_py
if os.environ.get("SFQMAP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._simcore import run_program  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["BACKEND", "run_program", "run_program_py", "OP_AND", "OP_CONST0",
           "OP_COPY", "OP_MAJ", "OP_NOT", "OP_OR", "OP_T1", "OP_XOR"]
