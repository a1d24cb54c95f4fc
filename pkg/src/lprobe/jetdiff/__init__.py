"""Differentiation engine: spatial jets, reverse-mode tape, Hessians, eigenvalues."""

from lprobe.jetdiff.jet import Jet2, activate, swish
from lprobe.jetdiff.linalg import hessian_fd, jacobi_eigh, sym_eigenvalues
from lprobe.jetdiff.tape import Tape, Var, grad

__all__ = [
    "Jet2",
    "Tape",
    "Var",
    "activate",
    "grad",
    "hessian_fd",
    "jacobi_eigh",
    "swish",
    "sym_eigenvalues",
]
