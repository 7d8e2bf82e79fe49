"""Closed-form signature inversion for Fourier and orthogonal-polynomial bases."""
from .families import OrthoFamily, make_family
from .functionals import (
    FunctionalSet,
    fourier_functionals,
    ortho_functionals,
    taylor_weight_functionals,
)
from .invert import (
    Augmentation,
    FourierCoeffs,
    PolyCoeffs,
    augment_fourier,
    augment_ortho,
    fourier_channels,
    invert_fourier,
    invert_ortho,
    reconstruct,
    reconstruct_values,
)

__all__ = [
    "OrthoFamily", "make_family", "FunctionalSet", "fourier_functionals", "ortho_functionals",
    "taylor_weight_functionals", "Augmentation", "FourierCoeffs", "PolyCoeffs", "augment_fourier",
    "augment_ortho", "fourier_channels", "invert_fourier", "invert_ortho", "reconstruct",
    "reconstruct_values",
]
