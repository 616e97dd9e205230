"""Single-excitation transport in blockade-constrained 2D dipolar spin clouds.

Subpackages are imported lazily so that worker processes can configure BLAS
threading before any numerical library is loaded.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "geometry",
    "coupling",
    "spectra",
    "levelstats",
    "clusters",
    "dynamics",
    "dephasing",
    "analysis",
    "ensemble",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
