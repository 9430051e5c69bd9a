from .complex import (
    CriticalPoint,
    MSComplex,
    PersistencePair,
    Separatrix,
    TwoCell,
    build_complex,
    combinatorially_equal,
    gradient_path,
    ms_graph,
    persistence_pairs,
    simplify,
    simplify_fraction,
)

__all__ = [
    "CriticalPoint",
    "MSComplex",
    "PersistencePair",
    "Separatrix",
    "TwoCell",
    "build_complex",
    "combinatorially_equal",
    "gradient_path",
    "ms_graph",
    "persistence_pairs",
    "simplify",
    "simplify_fraction",
]
