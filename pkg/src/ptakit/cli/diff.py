"""Differential comparison of two result dumps."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class DiffReport:
    mode: str
    collapsed: bool
    lines: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def clean(self) -> bool:
        return self.error is None and not self.lines

    def text(self) -> str:
        if self.error:
            return f"error: {self.error}\n"
        head = f"mode={self.mode} fields={'collapsed' if self.collapsed else 'kept'}"
        if not self.lines:
            return f"{head}\nclean\n"
        return "\n".join([head, *self.lines, f"{len(self.lines)} difference(s)"]) + "\n"


def _collapse(locs: list[str]) -> set[str]:
    return {x.rpartition(".")[0] + ".0" for x in locs}


def diff_dumps(a: dict, b: dict, mode: str = "equal", fields: str = "auto") -> DiffReport:
    """Compare points-to tables and call graphs.

    ``equal`` lists every variable or call site whose sets differ; ``subset``
    lists violations of A ⊆ B. With ``fields="auto"`` locations are
    collapsed to their objects when either side is field-insensitive.
    """
    if mode not in ("equal", "subset"):
        raise ValueError(f"unknown diff mode {mode!r}")
    if fields == "auto":
        collapse = not (a.get("field_sensitive", True) and b.get("field_sensitive", True))
    else:
        collapse = fields == "collapse"
    report = DiffReport(mode, collapse)
    ha = a["provenance"]["module_sha256"]
    hb = b["provenance"]["module_sha256"]
    if ha != hb:
        report.error = f"dumps describe different modules ({ha[:12]} vs {hb[:12]})"
        return report

    def norm(locs):
        return _collapse(locs) if collapse else set(locs)

    def compare(kind: str, ta: dict, tb: dict, normalize) -> None:
        for key in sorted(set(ta) | set(tb)):
            sa = normalize(ta.get(key, []))
            sb = normalize(tb.get(key, []))
            if mode == "equal" and sa != sb:
                only_a = ", ".join(sorted(sa - sb))
                only_b = ", ".join(sorted(sb - sa))
                report.lines.append(f"{kind} {key}: only in A {{{only_a}}}; only in B {{{only_b}}}")
            elif mode == "subset" and not sa <= sb:
                report.lines.append(f"{kind} {key}: not in B {{{', '.join(sorted(sa - sb))}}}")

    compare("var", a["points_to"], b["points_to"], norm)
    compare("call", a["call_graph"], b["call_graph"], set)
    return report
