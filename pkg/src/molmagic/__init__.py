"""Rotational-hyperfine spectra, dynamic polarizabilities and magic trapping conditions
for ultracold bialkali molecules."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Basis,
    BasisState,
    FieldConfig,
    MoleculeParams,
    VibPole,
    build_basis,
    load_molecule,
    narb,
    rbcs,
)

__all__ = [
    "Basis",
    "BasisState",
    "FieldConfig",
    "MoleculeParams",
    "VibPole",
    "build_basis",
    "load_molecule",
    "narb",
    "rbcs",
    "__version__",
]
