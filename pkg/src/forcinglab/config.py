"""Default size caps for the exhaustive machinery.

Everything in this library is enumerated in full, so every entry point that
could blow up combinatorially is guarded by one of these caps.  Suites may
override individual caps; a cap hit aborts the sub-instance, never the run.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


class CapExceeded(RuntimeError):
    """A configured enumeration cap would be exceeded."""


@dataclass(frozen=True)
class Caps:
    max_stages: int = 4                # iteration stage count bound
    max_stage_conditions: int = 64     # canonical conditions per stage poset
    algebra_max_base: int = 12         # default poset size bound for ro_algebra
    universe_cap: int = 4096           # names materialized per universe
    pair_universe_cap: int = 48        # universe size for pair-quantified transport sweeps
    hom_family_cap: int = 1 << 16      # subfamilies enumerated per completeness check
    dense_enum_max: int = 16           # poset size bound for literal dense-subset sweeps
    filter_crosscheck_max: int = 10    # poset size bound for the brute-force generic cross-check
    canonical_perm_max: int = 9        # poset size bound for permutation-based canonical forms
    cifs_rank_max: int = 4             # rank bound for materialized pure-set fragments

    def with_(self, **kw) -> "Caps":
        return replace(self, **kw)


DEFAULT_CAPS = Caps()
