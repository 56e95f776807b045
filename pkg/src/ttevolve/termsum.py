"""Hamiltonians written as sums of Kronecker-product terms."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, DimensionError, HermiticityError


@dataclass(frozen=True)
class Term:
    """``coeff(t) * (S_{k1} (x) S_{k2} (x) ...)`` with identities elsewhere.

    ``factors`` is a tuple of ``(site, matrix)`` with strictly increasing
    sites. ``coeff`` is a number or a callable of time.
    """

    factors: tuple
    coeff: object = 1.0

    def coefficient(self, t: float = 0.0) -> complex:
        c = self.coeff
        return complex(c(t)) if callable(c) else complex(c)

    @property
    def sites(self):
        return [k for k, _ in self.factors]

    def local(self, site):
        for k, m in self.factors:
            if k == site:
                return m
        return None


class TermSumOperator:
    def __init__(self, phys_dims, terms, hermitian: bool = True):
        self.phys_dims = [int(d) for d in phys_dims]
        n = len(self.phys_dims)
        checked = []
        for i, term in enumerate(terms):
            if not isinstance(term, Term):
                factors, coeff = term
                term = Term(tuple(factors), coeff)
            factors = tuple((int(k), np.asarray(m, dtype=np.complex128)) for k, m in term.factors)
            sites = [k for k, _ in factors]
            if sites != sorted(set(sites)):
                raise DimensionError(f"term {i}: sites must be strictly increasing, got {sites}")
            for k, m in factors:
                if not 0 <= k < n:
                    raise DimensionError(f"term {i}: site {k} out of range")
                if m.shape != (self.phys_dims[k], self.phys_dims[k]):
                    raise DimensionError(f"term {i}: operator on site {k} has shape {m.shape}")
            checked.append(Term(factors, term.coeff))
        self.terms = checked
        self.hermitian = hermitian
        self._sparse_terms = None

    def __len__(self):
        return len(self.terms)

    @property
    def n_sites(self):
        return len(self.phys_dims)

    @property
    def time_dependent(self) -> bool:
        return any(callable(t.coeff) for t in self.terms)

    def coefficients(self, t: float = 0.0) -> np.ndarray:
        return np.array([term.coefficient(t) for term in self.terms])

    def _term_sparse(self):
        if self._sparse_terms is None:
            mats = []
            for term in self.terms:
                ops = [sp.identity(d, dtype=np.complex128, format="csr") for d in self.phys_dims]
                for k, m in term.factors:
                    ops[k] = sp.csr_matrix(m)
                mats.append(reduce(lambda a, b: sp.kron(a, b, format="csr"), ops))
            self._sparse_terms = mats
        return self._sparse_terms

    def sparse(self, t: float = 0.0) -> sp.csr_matrix:
        total = int(np.prod(self.phys_dims))
        out = sp.csr_matrix((total, total), dtype=np.complex128)
        for c, m in zip(self.coefficients(t), self._term_sparse()):
            if c != 0:
                out = out + c * m
        return out

    def dense(self, t: float = 0.0, cap: int = 4096) -> np.ndarray:
        total = int(np.prod(self.phys_dims))
        if total > cap:
            raise CapacityError(f"dense operator of dimension {total} exceeds cap {cap}")
        return self.sparse(t).toarray()

    def check_hermitian(self, t: float = 0.0, tol: float = 1e-10, cap: int = 4096):
        h = self.dense(t, cap)
        err = np.linalg.norm(h - h.conj().T)
        if err > tol:
            raise HermiticityError(f"operator is not Hermitian at t={t} (|H - H^+| = {err:.3e})")

    def scaled(self, factor: complex) -> "TermSumOperator":
        terms = []
        for term in self.terms:
            c = term.coeff
            if callable(c):
                terms.append(Term(term.factors, lambda t, c=c: factor * c(t)))
            else:
                terms.append(Term(term.factors, factor * c))
        return TermSumOperator(self.phys_dims, terms, self.hermitian)
