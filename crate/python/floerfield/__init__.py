"""Python bindings for the floerfield toolkit.

The native module is built by cargo:

    cargo build -p floerfield-python --release --features extension-module

This package first tries a bundled ``_floerfield`` extension, then falls
back to loading the shared object straight out of the cargo target
directory, so an editable install works without a Rust-aware build
backend.
"""

import importlib.machinery
import importlib.util
import pathlib


def _load_native():
    try:
        from . import _floerfield  # bundled next to this file

        return _floerfield
    except ImportError:
        pass

    here = pathlib.Path(__file__).resolve()
    for root in here.parents:
        for profile in ("release", "debug"):
            candidate = root / "target" / profile / "lib_floerfield.so"
            if candidate.exists():
                loader = importlib.machinery.ExtensionFileLoader(
                    "floerfield._floerfield", str(candidate)
                )
                spec = importlib.util.spec_from_loader(loader.name, loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    raise ImportError(
        "native module not found; run "
        "`cargo build -p floerfield-python --release --features extension-module` "
        "at the repository root first"
    )


_native = _load_native()

Word = _native.Word
Correspondence = _native.Correspondence
phi = _native.phi
solve_moduli = _native.solve_moduli
goldman_gram = _native.goldman_gram
verify_move = _native.verify_move
intersect_vanishing_sets = _native.intersect_vanishing_sets
torus_sum = _native.torus_sum

__all__ = [
    "Word",
    "Correspondence",
    "phi",
    "solve_moduli",
    "goldman_gram",
    "verify_move",
    "intersect_vanishing_sets",
    "torus_sum",
]
