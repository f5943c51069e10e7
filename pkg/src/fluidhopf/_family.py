"""Flat array packing of a generator family for the numeric kernels.

Both kernel backends consume the same pack so a family is converted once per
solve or simulation, not per evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GeneratorFamily

KIND_CONSTANT = 0
KIND_PIECEWISE = 1
KIND_FOURIER_POLY = 2

_EMPTY_1 = np.zeros(0)
_EMPTY_3 = np.zeros((0, 1, 1))


@dataclass(frozen=True)
class FamilyPack:
    kind: int
    m: int
    bound_K: float
    const_mat: np.ndarray     # (m, m) for constant kind
    pw_breaks: np.ndarray     # (nb,)
    pw_mats: np.ndarray       # (nb + 1, m, m)
    fp_base: np.ndarray       # (m, m)
    fp_coefs: np.ndarray      # (nf, m, m)
    fp_omega: np.ndarray      # (nf,)
    fp_phase: np.ndarray      # (nf,)
    pp_coefs: np.ndarray      # (np, m, m)
    pp_degs: np.ndarray       # (np,) float degrees


def pack_family(family: GeneratorFamily) -> FamilyPack:
    m = family.m
    zero_mm = np.zeros((m, m))
    if family.kind == "constant":
        return FamilyPack(
            KIND_CONSTANT, m, family.bound_K,
            np.ascontiguousarray(family.matrix, dtype=float),
            _EMPTY_1, np.zeros((1, m, m)),
            zero_mm, np.zeros((0, m, m)), _EMPTY_1, _EMPTY_1,
            np.zeros((0, m, m)), _EMPTY_1,
        )
    if family.kind == "piecewise_constant":
        return FamilyPack(
            KIND_PIECEWISE, m, family.bound_K,
            zero_mm,
            np.ascontiguousarray(family.breakpoints, dtype=float),
            np.ascontiguousarray(family.matrices, dtype=float),
            zero_mm, np.zeros((0, m, m)), _EMPTY_1, _EMPTY_1,
            np.zeros((0, m, m)), _EMPTY_1,
        )
    if family.kind == "fourier_polynomial":
        nf = len(family.fourier_terms)
        npq = len(family.poly_terms)
        fp_coefs = np.zeros((nf, m, m))
        fp_omega = np.zeros(nf)
        fp_phase = np.zeros(nf)
        for k, t in enumerate(family.fourier_terms):
            fp_coefs[k] = t.coef
            fp_omega[k] = t.omega
            fp_phase[k] = t.phase
        pp_coefs = np.zeros((npq, m, m))
        pp_degs = np.zeros(npq)
        for k, t in enumerate(family.poly_terms):
            pp_coefs[k] = t.coef
            pp_degs[k] = float(t.degree)
        return FamilyPack(
            KIND_FOURIER_POLY, m, family.bound_K,
            zero_mm, _EMPTY_1, np.zeros((1, m, m)),
            np.ascontiguousarray(family.base, dtype=float),
            fp_coefs, fp_omega, fp_phase, pp_coefs, pp_degs,
        )
    raise ValueError(f"unknown family kind {family.kind!r}")
