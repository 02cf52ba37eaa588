"""Compiler configuration: rewrite toggles and paging."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class CompilerOptions:
    # relational rewrites, individually toggleable
    remove_noops: bool = True
    merge_projects: bool = True
    merge_filters: bool = True
    prune_attributes: bool = True
    prune_annotated_joins: bool = True
    pushdown_sort_limit: bool = True
    # operator-level optimizations
    merge_joins: bool = True
    elide_semijoins: bool = True
    # unreferenced hidden columns are dropped before decomposition
    eliminate_dead_columns: bool = True
    # structurally duplicated subtrees become common table expressions
    use_ctes: bool = True

    @classmethod
    def none(cls) -> "CompilerOptions":
        return cls(
            remove_noops=False, merge_projects=False, merge_filters=False,
            prune_attributes=False, prune_annotated_joins=False,
            pushdown_sort_limit=False, merge_joins=False,
            elide_semijoins=False, eliminate_dead_columns=False,
            use_ctes=False,
        )


@dataclass(frozen=True)
class Page:
    limit: int
    offset: int = 0
