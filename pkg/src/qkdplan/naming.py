"""Variable and constraint names used in built models and LP files.

Node ids are alphanumeric, so ``_`` is an unambiguous separator.
"""

from __future__ import annotations


def _j(*parts: object) -> str:
    return "_".join(str(p) for p in parts)


B = "B"


def s_var(u, v) -> str:
    return _j("S", u, v)


def shat_var(u, p, v) -> str:
    return _j("Shat", u, p, v)


def f_var(s, t, u, v) -> str:
    """Flow of pair (s, t) on the C2C edge oriented u -> v."""
    return _j("F", s, t, u, v)


def fhat_var(s, t, u, p, v) -> str:
    """Flow of pair (s, t) on the CSC edge oriented u -> v via server p."""
    return _j("Fhat", s, t, u, p, v)


def t_var(v) -> str:
    return _j("T", v)


def tp_var(v) -> str:
    return _j("Tp", v)


def tpp_var(v) -> str:
    return _j("Tpp", v)


def role_var(v) -> str:
    return _j("Trole", v)
