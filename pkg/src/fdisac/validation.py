"""Input validation helpers shared by the public entry points."""

import numpy as np


def as_complex_vector(x, size=None, name="x"):
    """Return `x` as a 1-D complex128 array, optionally checking its length."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise ValueError(f"{name} must have length {size}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_complex_matrix(x, shape=None, name="X"):
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_unit_modulus(phi, tol=1e-9, name="phi"):
    """Raise if any entry of `phi` is not unit modulus within `tol`."""
    dev = np.max(np.abs(np.abs(phi) - 1.0)) if np.size(phi) else 0.0
    if dev > tol:
        raise ValueError(f"{name} must be unit modulus (max deviation {dev:.3e})")
    return phi


def hermitian_part(a):
    """Symmetrize a square matrix: (A + A^H) / 2."""
    return 0.5 * (a + a.conj().T)


def repair_psd(a, clip_rel=1e-10, abort_rel=1e-6, name="matrix"):
    """Symmetrize `a` and clip tiny negative eigenvalues.

    Eigenvalues below ``-clip_rel * lambda_max`` are treated as noise and set
    to zero; anything below ``-abort_rel * lambda_max`` signals an assembly
    error and raises.
    """
    a = hermitian_part(a)
    lam, vec = np.linalg.eigh(a)
    lam_max = max(float(np.max(np.abs(lam))), 0.0)
    if lam_max == 0.0:
        return a
    if lam[0] < -abort_rel * lam_max:
        raise ValueError(
            f"{name} is not PSD: min eigenvalue {lam[0]:.3e}, max {lam_max:.3e}"
        )
    if lam[0] >= -clip_rel * lam_max:
        return a
    lam = np.clip(lam, 0.0, None)
    return hermitian_part((vec * lam) @ vec.conj().T)
